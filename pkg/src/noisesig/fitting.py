"""Regression solvers: exact least squares, Huber IRLS, smoothed L1.

The Huber rho with tuning constant c and scale sigma, applied to a raw
residual r, is a function of r alone through the half-width h = c*sigma:

    rho_h(r) = r^2 / (2h)   for |r| <= h,      |r| - h/2   otherwise,

and rho_h(r) = (sigma/c) * rho_c(r/sigma) exactly, so all comparisons
between fits (differences, quantiles) can be carried out in raw-residual
units and converted at the end.  The batched IRLS kernel below therefore
works with h only.

L1 fits use the same machinery with h = 0.01 * (1.4826-scaled MAD of the
fit's own residuals): the smoothed modulus.  The residual scale is
bootstrapped — a pilot solve at the response-based width fixes the
residuals whose MAD sets the final width — so the smoothing bias is
proportional to the noise level, not to the spread of the signal.  A
short continuation ladder (h descending 100x, 10x, 1x) initialises the
pilot; the minimised objective is exactly the smoothed one at the final h.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import DegenerateScaleError, SingularDesignError
from .model import Dataset, FitResult, design_matrix
from .validation import check_positive

__all__ = [
    "mad",
    "hsum",
    "smoothing_width",
    "residual_width",
    "batch_lstsq",
    "batch_huber_irls",
    "fit_l2",
    "fit_huber",
    "fit_l1",
    "fit_objective",
    "mad_scale",
    "density_at_zero",
]

RANK_TOLERANCE = 1e-10
IRLS_TOL = 1e-10
IRLS_MAX_ITER = 500
L1_SMOOTHING = 0.01  # c for the smoothed modulus
_LADDER = (100.0, 10.0, 1.0)  # continuation multipliers ending at 1x


def mad(x: np.ndarray, center: Optional[float] = None) -> float:
    """1.4826-scaled median absolute deviation (about the median by default)."""
    x = np.asarray(x, float)
    c = np.median(x) if center is None else center
    return 1.4826 * float(np.median(np.abs(x - c)))


def hsum(r: np.ndarray, h: float) -> np.ndarray:
    """Sum of the smoothed modulus rho_h over the last axis."""
    a = np.abs(r)
    return np.where(a <= h, r * r / (2.0 * h), a - h / 2.0).sum(axis=-1)


def smoothing_width(y: np.ndarray) -> float:
    """Pilot half-width h of the smoothed modulus for response ``y``.

    h = 0.01 * (1.4826 MAD of y about its median); falls back to the mean
    absolute deviation, then to 1, for pathologically concentrated data.
    Used only to start the pilot solve — final widths come from residuals
    via :func:`residual_width`.
    """
    s0 = mad(y)
    if s0 == 0.0:
        s0 = float(np.mean(np.abs(y - np.median(y)))) or 1.0
    return L1_SMOOTHING * s0


def residual_width(residuals: np.ndarray) -> float:
    """Half-width h of the smoothed modulus, set by the residual scale.

    h = 0.01 * (1.4826 MAD of the residuals), falling back to their mean
    absolute value when the MAD is zero.  Returns 0 only for an exact fit.
    """
    s = mad(residuals)
    if s == 0.0:
        s = float(np.mean(np.abs(residuals)))
    return L1_SMOOTHING * s


# ---------------------------------------------------------------------------
# Batched linear algebra


def batch_lstsq(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients for a stack of designs A (R,n,p)."""
    q, r = np.linalg.qr(A)
    rhs = np.matmul(q.transpose(0, 2, 1), y[..., None])
    return np.linalg.solve(r, rhs)[..., 0]


def batch_huber_irls(A: np.ndarray, y: np.ndarray, h: float,
                     beta0: Optional[np.ndarray] = None,
                     tol: float = IRLS_TOL,
                     max_iter: int = IRLS_MAX_ITER):
    """Minimise sum_i rho_h(y_i - a_i . beta) for each replicate.

    A has shape (R, n, p); y is (n,) shared or (R, n).  Returns
    (beta (R,p), iterations (R,), converged (R,)).  Each replicate's rows
    are frozen as soon as its coefficient step falls under
    tol * (1 + |beta|); the active set is compacted so late stragglers do
    not drag the whole batch.

    IRLS with weights w = h / max(|r|, h) is a majorise-minimise scheme
    for the smoothed objective: every accepted step decreases it, so a
    warm start from any coefficient vector can only improve on that
    vector's objective.
    """
    R, n, p = A.shape
    if y.ndim == 1:
        y = np.broadcast_to(y, (R, n))
    colnorm = np.sqrt(np.einsum("rnp,rnp->rp", A, A))
    colnorm[colnorm == 0] = 1.0
    As = A / colnorm[:, None, :]
    if beta0 is None:
        beta = batch_lstsq(As, y)
    else:
        beta = np.ascontiguousarray(beta0 * colnorm)
    iters = np.zeros(R, np.int64)
    conv = np.zeros(R, bool)
    active = np.arange(R)
    Aa, AaT, ya, ba = As, As.transpose(0, 2, 1), y, beta
    for _ in range(max_iter):
        r = ya - np.matmul(Aa, ba[..., None])[..., 0]
        w = h / np.maximum(np.abs(r), h)
        Aw = Aa * w[..., None]
        G = np.matmul(AaT, Aw)
        rhs = np.matmul(AaT, (w * ya)[..., None])
        bnew = np.linalg.solve(G, rhs)[..., 0]
        step = np.max(np.abs(bnew - ba), axis=1)
        bound = tol * (1.0 + np.sqrt(np.einsum("rp,rp->r", ba, ba)))
        done = step < bound
        ba = bnew
        iters[active] += 1
        if done.any():
            beta[active] = ba
            conv[active[done]] = True
            keep = ~done
            if not keep.any():
                break
            active = active[keep]
            Aa, AaT, ya, ba = Aa[keep], AaT[keep], ya[keep], ba[keep]
    else:
        beta[active] = ba
    return beta / colnorm, iters, conv


# ---------------------------------------------------------------------------
# Rank checking


def _check_rank(A: np.ndarray, columns_desc: list[str]) -> None:
    norms = np.sqrt((A * A).sum(axis=0))
    norms[norms == 0] = 1.0
    _, s, vt = np.linalg.svd(A / norms)
    if s[-1] < RANK_TOLERANCE * s[0]:
        null = np.abs(vt[-1])
        cols = tuple(int(j) for j in np.flatnonzero(null > 0.1 * null.max()))
        names = ", ".join(columns_desc[j] for j in cols)
        raise SingularDesignError(
            f"design is rank deficient (singular-value ratio "
            f"{s[-1] / s[0]:.2e}); dependent columns: {names}", cols)


def _column_labels(d: Dataset, e: int) -> list[str]:
    from .model import subset_members
    return ["intercept"] + [d.names[j] for j in subset_members(e, d.k)]


# ---------------------------------------------------------------------------
# Public fits


def fit_l2(d: Dataset, e: int) -> FitResult:
    """Exact least squares on subset ``e``; objective = mean squared residual."""
    A = design_matrix(d, e)
    _check_rank(A, _column_labels(d, e))
    beta, *_ = np.linalg.lstsq(A, d.y, rcond=None)
    r = d.y - A @ beta
    return FitResult(beta, r, float(np.mean(r * r)), int(e), True, 0)


def fit_huber(d: Dataset, e: int, c: float, sigma: float,
              beta0: Optional[np.ndarray] = None) -> FitResult:
    """Huber M-fit on subset ``e``; objective = mean rho_c(r/sigma).

    Starts from the least-squares fit unless ``beta0`` is given.
    Non-convergence is flagged, not raised.
    """
    check_positive(c, "c")
    check_positive(sigma, "sigma")
    A = design_matrix(d, e)
    _check_rank(A, _column_labels(d, e))
    h = c * sigma
    start = None if beta0 is None else np.asarray(beta0, float)[None, :]
    beta, iters, conv = batch_huber_irls(A[None], d.y, h, beta0=start)
    r = d.y - A @ beta[0]
    objective = float((c / sigma) * hsum(r, h) / d.n)
    return FitResult(beta[0], r, objective, int(e), bool(conv[0]), int(iters[0]))


def _l1_beta(A: np.ndarray, y: np.ndarray, h: float) -> tuple[np.ndarray, int, bool]:
    beta = None
    total = 0
    ok = True
    for mult in _LADDER:
        beta, iters, conv = batch_huber_irls(A[None], y, h * mult, beta0=beta)
        total += int(iters[0])
        ok = bool(conv[0])
    return beta[0], total, ok


def _l1_pilot(A: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, int, bool, float]:
    """Pilot L1 solve; returns (beta, iterations, converged, residual width)."""
    beta, iters, ok = _l1_beta(A, y, smoothing_width(y))
    return beta, iters, ok, residual_width(y - A @ beta)


def fit_l1(d: Dataset, e: int) -> FitResult:
    """Smoothed least-absolute-deviations fit on subset ``e``.

    Minimises the Huber objective with c = 0.01 and sigma = 1.4826 MAD of
    the fit's own residuals: a pilot solve at the response-based width
    (continuation ladder initialisation) fixes the residual scale, then a
    warm solve at the residual-based width refines the coefficients.  The
    reported objective is the plain mean absolute residual.
    """
    A = design_matrix(d, e)
    _check_rank(A, _column_labels(d, e))
    beta, iters, conv, h = _l1_pilot(A, d.y)
    if h > 0.0:
        refined, extra, refc = batch_huber_irls(A[None], d.y, h, beta0=beta[None])
        beta = refined[0]
        iters += int(extra[0])
        conv = bool(refc[0])
    r = d.y - A @ beta
    return FitResult(beta, r, float(np.mean(np.abs(r))), int(e), conv, iters)


def fit_objective(d: Dataset, e: int, obj) -> FitResult:
    """Dispatch on an ObjectiveSpec."""
    if obj.kind == "l2":
        return fit_l2(d, e)
    if obj.kind == "l1":
        return fit_l1(d, e)
    sigma = obj.sigma if obj.sigma is not None else mad_scale(d)
    return fit_huber(d, e, obj.c, sigma)


def mad_scale(d: Dataset) -> float:
    """Default residual scale: 1.4826 MAD of the full-model L1 residuals."""
    from .model import full_subset
    r = fit_l1(d, full_subset(d.k)).residuals
    sigma = mad(r)
    if sigma == 0.0:
        raise DegenerateScaleError(
            "full-model L1 residuals have zero MAD; "
            "the noise comparison is undefined for an exact fit")
    return sigma


def density_at_zero(residuals: np.ndarray) -> float:
    """Gaussian-kernel estimate of the residual density at 0 (approximate).

    Bandwidth 0.9 * min(sd, IQR/1.34) * n**(-1/5).
    """
    r = np.asarray(residuals, float)
    n = r.size
    sd = float(np.std(r, ddof=1))
    q75, q25 = np.percentile(r, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if not spread > 0:
        raise DegenerateScaleError("residuals have zero spread; f(0) undefined")
    bw = 0.9 * spread * n ** (-0.2)
    u = r / bw
    return float(np.mean(np.exp(-0.5 * u * u)) / (bw * np.sqrt(2.0 * np.pi)))
