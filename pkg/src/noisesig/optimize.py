"""Small numerical utilities: batched 1-D minimisation, quantiles, bisection."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NoRootError, UsageError

__all__ = ["type1_quantile", "golden_min_batch", "weighted_median_gap",
           "bisect_sign_change"]

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def type1_quantile(values: np.ndarray, alpha: float) -> float:
    """Lower empirical quantile: sorted[ceil(alpha * R) - 1] (1-based)."""
    v = np.sort(np.asarray(values, float))
    if v.size == 0:
        raise UsageError("quantile of an empty sample")
    idx = int(np.ceil(alpha * v.size)) - 1
    return float(v[min(max(idx, 0), v.size - 1)])


def golden_min_batch(objective: Callable[[np.ndarray], np.ndarray],
                     n_replicates: int, lower: float, upper: float,
                     tol: float) -> np.ndarray:
    """Minimise R unimodal objectives over a shared starting interval.

    ``objective(b)`` maps an (R,) vector of abscissae — one per replicate
    — to (R,) objective values.  Classic golden-section, vectorised: the
    iteration count is fixed by the tolerance and the interval updates
    are branchless, so every replicate shrinks its own bracket in
    lockstep.  Returns the best objective value found per replicate.
    """
    R = int(n_replicates)
    width = float(upper - lower)
    if width <= tol:
        return objective(np.full(R, 0.5 * (lower + upper)))
    n_iter = max(1, int(np.ceil(np.log(tol / width) / np.log(_INVPHI))))
    lo = np.full(R, float(lower))
    hi = np.full(R, float(upper))
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1 = objective(x1)
    f2 = objective(x2)
    for _ in range(n_iter):
        left = f1 < f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x_keep = np.where(left, x1, x2)
        f_keep = np.where(left, f1, f2)
        x_new = np.where(left, hi - _INVPHI * (hi - lo), lo + _INVPHI * (hi - lo))
        f_new = objective(x_new)
        x1 = np.where(left, x_new, x_keep)
        f1 = np.where(left, f_new, f_keep)
        x2 = np.where(left, x_keep, x_new)
        f2 = np.where(left, f_keep, f_new)
    return np.minimum(f1, f2)


def bisect_sign_change(f: Callable[[float], float], inner: float, outer: float,
                       tol: float, max_iter: int = 40) -> float:
    """Locate the sign change of ``f`` between inner (f >= 0) and outer (f < 0).

    Returns the midpoint of the final bracket.  Caller guarantees the
    initial signs; ``f`` may be a fresh Monte Carlo draw per call.
    """
    a, b = float(outer), float(inner)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        mid = 0.5 * (a + b)
        if f(mid) < 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def weighted_median_gap(c: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Exact min_b sum_i |c_i - b * Z_i| per replicate (test oracle).

    The minimiser is a weighted median of c_i / Z_i with weights |Z_i|.
    ``c`` is (n,) shared or (R, n); ``Z`` is (R, n).
    """
    c2 = np.broadcast_to(c if c.ndim == 2 else c[None, :], Z.shape)
    weights = np.abs(Z)
    safe = np.where(Z == 0.0, 1.0, Z)
    ratios = np.where(Z != 0.0, c2 / safe, np.inf)
    order = np.argsort(ratios, axis=1)
    r_sorted = np.take_along_axis(ratios, order, axis=1)
    w_sorted = np.take_along_axis(weights, order, axis=1)
    cum = np.cumsum(w_sorted, axis=1)
    half = cum[:, -1] / 2.0
    idx = (cum < half[:, None]).sum(axis=1)
    b = np.take_along_axis(r_sorted, idx[:, None], axis=1)[:, 0]
    b = np.where(np.isfinite(b), b, 0.0)
    return np.abs(c2 - b[:, None] * Z).sum(axis=1)
