"""Non-significance regions for location and regression functionals.

A parameter value t is non-significant at level alpha when one added
noise direction cannot beat it decisively: the excess of the fit error
at t over the best attainable error stays within the alpha-quantile of
the improvements that pure noise achieves at t.  The region collects all
such t.  Unlike a confidence region it makes no claim that a model
generated the data; it marks the values the data cannot distinguish from
the best-fitting one, with noise as the yardstick.

Simulated intervals (median, M-location, one L1 regression coefficient)
bisect on the sign of

    f(t) = q_alpha(noise gaps at t) - [ s(t) - s_best ],

which is >= 0 exactly on the region.  Every evaluation of f draws a
fresh replicate-indexed noise stream, so runs are reproducible without
being locked to a single noise panel.  Closed-form ellipsoids for M-,
L2- and asymptotic-L1 regression complement the simulated forms.
"""

from __future__ import annotations

import itertools
from typing import Callable, Union

import numpy as np
from scipy.special import ndtri
from scipy.stats import binom, chi2

from .errors import (DegenerateCurvatureError, NoRootError, NumericalError,
                     UsageError)
from .fitting import (_l1_beta, batch_huber_irls, density_at_zero, fit_l1,
                      fit_objective, hsum, mad, mad_scale, residual_width,
                      smoothing_width)
from .model import (Dataset, NonSigEllipsoid, NonSigInterval, ObjectiveSpec,
                    design_matrix, full_subset)
from .optimize import bisect_sign_change, golden_min_batch, type1_quantile
from .parallel import chunk_ranges, resolve_threads
from .rng import normals
from .validation import as_vector, check_alpha, check_count, check_positive

__all__ = [
    "nonsig_median",
    "nonsig_median_pvalue",
    "nonsig_mlocation",
    "nonsig_l1_component",
    "l1_region_contains",
    "nonsig_m_regression",
    "nonsig_asymptotic_l1",
]

DEFAULT_SIMS = 1000
# Order-statistic bracket for location roots: y(nl) with
# nl = BinomialQuantile(0.0005, n, 1/2) misses the region endpoint with
# probability ~1e-3; a widening pass to the data range backs it up.
BRACKET_TAIL = 0.0005
WIDEN_STEPS = 7           # doublings of the component-interval half-width
BISECT_TOL_FACTOR = 1e-3  # of the initial bracket width
BISECT_MAX_ITER = 40
GOLDEN_BOUND_MULT = 4.0   # search |b| <= 4 * spread * sqrt(n)
GOLDEN_TOL_FACTOR = 1e-6  # of the spread


def _robust_spread(x: np.ndarray) -> float:
    s = mad(x)
    if s == 0.0:
        s = float(np.mean(np.abs(x - np.median(x)))) or 1.0
    return s


# ---------------------------------------------------------------------------
# Noise-gap simulators: how much one optimised noise direction improves
# the fit of the constant c.  All gaps are >= 0 (b = 0 is feasible).


def _l1_noise_gaps(c: np.ndarray, sims: int, seed: int, context: tuple,
                   bound: float, tol: float, threads: int) -> np.ndarray:
    n = c.size
    s_at = float(np.abs(c).sum())
    gaps = np.empty(sims)
    for start, stop in chunk_ranges(sims, threads):
        R = stop - start
        Z = normals(seed, context, start, R, n)

        def objective(b: np.ndarray, Z: np.ndarray = Z) -> np.ndarray:
            return np.abs(c[None, :] - b[:, None] * Z).sum(axis=1)

        best = golden_min_batch(objective, R, -bound, bound, tol)
        gaps[start:stop] = s_at - best
    return np.maximum(gaps, 0.0)


def _huber_noise_gaps(c: np.ndarray, h: float, sims: int, seed: int,
                      context: tuple, bound: float, tol: float,
                      threads: int) -> np.ndarray:
    n = c.size
    s_at = float(hsum(c, h))
    gaps = np.empty(sims)
    for start, stop in chunk_ranges(sims, threads):
        R = stop - start
        Z = normals(seed, context, start, R, n)

        def objective(b: np.ndarray, Z: np.ndarray = Z) -> np.ndarray:
            return hsum(c[None, :] - b[:, None] * Z, h)

        best = golden_min_batch(objective, R, -bound, bound, tol)
        gaps[start:stop] = s_at - best
    return np.maximum(gaps, 0.0)


def _l2_noise_gaps(c: np.ndarray, sims: int, seed: int, context: tuple,
                   threads: int) -> np.ndarray:
    # min_b sum (c - bZ)^2 = sum c^2 - (c.Z)^2 / |Z|^2, exactly.
    n = c.size
    gaps = np.empty(sims)
    for start, stop in chunk_ranges(sims, threads):
        R = stop - start
        Z = normals(seed, context, start, R, n)
        gaps[start:stop] = (Z @ c) ** 2 / np.einsum("rn,rn->r", Z, Z)
    return gaps


# ---------------------------------------------------------------------------
# Shared bisection scaffold for simulated location intervals


def _location_roots(y: np.ndarray, center: float,
                    fval: Callable[[float, str, int], float]
                    ) -> tuple[float, float, float]:
    """Find the two sign changes of f around ``center``.

    ``fval(m, side, eval_index)`` must be >= 0 at the center and is
    re-simulated per call; the initial outer points are the order
    statistics y(nl) and y(n+1-nl), widened to the data range if needed.
    Returns (lower, upper, coarsest bisection tolerance).
    """
    n = y.size
    ys = np.sort(y)
    nl = int(binom.ppf(BRACKET_TAIL, n, 0.5))
    outers = {"lower": float(ys[max(nl - 1, 0)]),
              "upper": float(ys[min(n - nl, n - 1)])}

    def root(side: str) -> tuple[float, float]:
        counter = itertools.count()

        def f(m: float) -> float:
            return fval(m, side, next(counter))

        outer = outers[side]
        f_outer = f(outer)
        if f_outer >= 0.0:
            extreme = float(ys[0] if side == "lower" else ys[-1])
            if extreme != outer:
                outer = extreme
                f_outer = f(outer)
            if f_outer >= 0.0:
                raise NoRootError(
                    f"the {side} endpoint bracket never left the region: "
                    f"f({outer}) = {f_outer:.3g} >= 0 at the data extreme",
                    f_outer=f_outer)
        tol = BISECT_TOL_FACTOR * abs(center - outer)
        return bisect_sign_change(f, center, outer, tol, BISECT_MAX_ITER), tol

    lower, tol_lo = root("lower")
    upper, tol_up = root("upper")
    return lower, upper, max(tol_lo, tol_up)


def _snap_to_integers(lower: float, upper: float) -> tuple[float, float]:
    lo, up = np.ceil(lower), np.floor(upper)
    if lo > up:  # no integer inside: take the enclosing integer interval
        lo, up = np.floor(lower), np.ceil(upper)
    return float(lo), float(up)


# ---------------------------------------------------------------------------
# Median


def nonsig_median(y, alpha: float = 0.95, sims: int = DEFAULT_SIMS,
                  seed: int = 0, discrete: bool = False,
                  threads: int | None = 1) -> NonSigInterval:
    """Simulated non-significance interval for the median.

    A value m is in the region when sum |y - m| exceeds the best L1
    location error by no more than the alpha-quantile of the noise gaps
    sum |y - m| - min_b sum |y - m - b Z| (Z standard Gaussian).  With
    ``discrete`` the endpoints snap to the integers inside the interval
    (enclosing integers if none lie inside) — for integer-valued data
    whose population median is an integer.
    """
    y = as_vector(y, "y")
    alpha = check_alpha(alpha)
    sims = check_count(sims, "sims")
    threads = resolve_threads(threads)
    med = float(np.median(y))
    spread = mad(y)
    if spread == 0.0:
        return NonSigInterval(med, med, alpha, method="degenerate-scale",
                              sims_per_quantile=0)
    n = y.size
    s_best = float(np.abs(y - med).sum())
    bound = GOLDEN_BOUND_MULT * spread * np.sqrt(n)
    gtol = GOLDEN_TOL_FACTOR * spread

    def fval(m: float, side: str, ei: int) -> float:
        gaps = _l1_noise_gaps(y - m, sims, seed, ("median", side, ei),
                              bound, gtol, threads)
        excess = float(np.abs(y - m).sum()) - s_best
        return type1_quantile(gaps, alpha) - excess

    lower, upper, tol = _location_roots(y, med, fval)
    if discrete:
        lower, upper = _snap_to_integers(lower, upper)
    return NonSigInterval(lower, upper, alpha, method="simulated-bisection",
                          sims_per_quantile=sims, bisection_tolerance=tol)


def nonsig_median_pvalue(y, m: float, sims: int = DEFAULT_SIMS, seed: int = 0,
                         threads: int | None = 1) -> float:
    """P-value of the median value ``m``: the fraction of noise gaps that
    cover the observed error excess.  m lies in the alpha region exactly
    when this is >= 1 - alpha (up to Monte Carlo noise between calls).
    """
    y = as_vector(y, "y")
    m = float(m)
    sims = check_count(sims, "sims")
    threads = resolve_threads(threads)
    med = float(np.median(y))
    spread = _robust_spread(y)
    bound = GOLDEN_BOUND_MULT * spread * np.sqrt(y.size)
    gaps = _l1_noise_gaps(y - m, sims, seed, ("median-pvalue",), bound,
                          GOLDEN_TOL_FACTOR * spread, threads)
    excess = float(np.abs(y - m).sum() - np.abs(y - med).sum())
    return float(np.count_nonzero(gaps >= excess)) / sims


# ---------------------------------------------------------------------------
# M-location


def nonsig_mlocation(y, rho: Union[ObjectiveSpec, str],
                     alpha: float = 0.95, mode: str = "simulated",
                     sims: int = DEFAULT_SIMS, seed: int = 0,
                     threads: int | None = 1) -> NonSigInterval:
    """Non-significance interval for an M-location functional.

    ``mode`` "simulated" mirrors the median construction with the rho
    criterion in place of the modulus; "asymptotic" returns
    T +- z((1+alpha)/2) * sigma_n * sqrt(v/n) with
    v = mean psi(u)^2 / (mean rho''(u))^2 at u = (y - T)/sigma_n.
    The residual scale sigma_n is the 1.4826 MAD of y about its median
    (``rho.sigma`` overrides it).
    """
    y = as_vector(y, "y")
    if not isinstance(rho, ObjectiveSpec):
        rho = ObjectiveSpec.parse(str(rho))
    alpha = check_alpha(alpha)
    mode = {"sim": "simulated", "simulated": "simulated",
            "asymptotic": "asymptotic"}.get(mode)
    if mode is None:
        raise UsageError("mode must be 'simulated' or 'asymptotic'")
    if rho.kind == "l1":
        if mode == "simulated":
            return nonsig_median(y, alpha, sims, seed, False, threads)
        ell = nonsig_asymptotic_l1(y, alpha)
        half = float(np.sqrt(ell.radius2))
        med = float(ell.center[0])
        return NonSigInterval(med - half, med + half, alpha,
                              method=ell.method)
    sims = check_count(sims, "sims")
    threads = resolve_threads(threads)
    med = float(np.median(y))
    sigma_n = rho.sigma if rho.sigma is not None else mad(y)
    if sigma_n == 0.0:
        return NonSigInterval(med, med, alpha, method="degenerate-scale",
                              sims_per_quantile=0)
    n = y.size

    if rho.kind == "l2":
        center = float(np.mean(y))
    else:
        ones = np.ones((n, 1))
        beta, _, _ = batch_huber_irls(ones[None], y, rho.c * sigma_n)
        center = float(beta[0, 0])

    if mode == "asymptotic":
        u = (y - center) / sigma_n
        if rho.kind == "l2":
            curvature, psi2 = 1.0, float(np.mean(u * u))
        else:
            curvature = float(np.mean(np.abs(u) <= rho.c))
            if curvature == 0.0:
                raise DegenerateCurvatureError(
                    "all centred residuals lie beyond the Huber corner; "
                    "the asymptotic curvature term vanishes")
            psi2 = float(np.mean(np.clip(u, -rho.c, rho.c) ** 2))
        half = float(ndtri((1.0 + alpha) / 2.0)
                     * sigma_n * np.sqrt(psi2 / curvature ** 2 / n))
        return NonSigInterval(center - half, center + half, alpha,
                              method="asymptotic")

    bound = GOLDEN_BOUND_MULT * sigma_n * np.sqrt(n)
    gtol = GOLDEN_TOL_FACTOR * sigma_n
    if rho.kind == "l2":
        s_best = float(np.sum((y - center) ** 2))

        def fval(m: float, side: str, ei: int) -> float:
            gaps = _l2_noise_gaps(y - m, sims, seed,
                                  ("mlocation", side, ei), threads)
            excess = float(np.sum((y - m) ** 2)) - s_best
            return type1_quantile(gaps, alpha) - excess
    else:
        h = rho.c * sigma_n
        s_best = float(hsum(y - center, h))

        def fval(m: float, side: str, ei: int) -> float:
            gaps = _huber_noise_gaps(y - m, h, sims, seed,
                                     ("mlocation", side, ei), bound, gtol,
                                     threads)
            excess = float(hsum(y - m, h)) - s_best
            return type1_quantile(gaps, alpha) - excess

    lower, upper, tol = _location_roots(y, center, fval)
    return NonSigInterval(lower, upper, alpha, method="simulated-bisection",
                          sims_per_quantile=sims, bisection_tolerance=tol)


# ---------------------------------------------------------------------------
# Component-wise L1 regression interval


def nonsig_l1_component(d: Dataset, j: Union[int, str], alpha: float = 0.95,
                        sims: int = DEFAULT_SIMS, seed: int = 0,
                        fast_quantile: bool = False,
                        threads: int | None = 1) -> NonSigInterval:
    """Non-significance interval for one L1 regression coefficient.

    A value t of coefficient j is in the region when the best L1 fit of
    y - x_j t on the remaining covariates beats the full fit by no more
    than the alpha-quantile of the noise gaps at t (one optimised
    Gaussian column added to the reduced design).  The noise quantile is
    re-simulated at every bisection point; ``fast_quantile`` freezes it
    at its value at the L1 estimate, which is faster but narrows the
    interval when the quantile drifts with t.  One smoothing half-width,
    set by the full-fit residual scale, is shared by every profile and
    noise fit so that gaps are comparable across t.
    """
    if isinstance(j, str):
        j = d.column(j)
    j = int(j)
    if not (0 <= j < d.k):
        raise UsageError(f"covariate index {j} out of range for k={d.k}")
    alpha = check_alpha(alpha)
    sims = check_count(sims, "sims")
    threads = resolve_threads(threads)
    n = d.n
    y = d.y

    full = fit_l1(d, full_subset(d.k))
    s_full = full.objective * n
    h = residual_width(full.residuals)
    if h == 0.0:
        h = smoothing_width(y)
    f0 = density_at_zero(full.residuals)
    A_f = design_matrix(d, full_subset(d.k))
    inv = np.linalg.inv(A_f.T @ A_f)
    sd = float(np.sqrt(inv[j + 1, j + 1]) / (2.0 * f0))
    b_j = float(full.beta[j + 1])

    others = [l for l in range(d.k) if l != j]
    A_red = np.column_stack([np.ones(n)] + [d.X[:, l] for l in others])
    p_red = A_red.shape[1]
    x_j = d.X[:, j]
    counter = itertools.count()

    def noise_quantile(t: float, ei: int) -> float:
        u = y - x_j * t
        b_prof, _, _ = batch_huber_irls(A_red[None], u, h)
        s_prof = float(hsum(u - A_red @ b_prof[0], h))
        warm = np.concatenate([b_prof[0], [0.0]])
        gaps = np.empty(sims)
        for start, stop in chunk_ranges(sims, threads):
            R = stop - start
            Z = normals(seed, ("l1-component", j, ei), start, R, n)
            An = np.empty((R, n, p_red + 1))
            An[:, :, :p_red] = A_red
            An[:, :, p_red] = Z
            bN, _, _ = batch_huber_irls(
                An, u, h, beta0=np.broadcast_to(warm, (R, p_red + 1)))
            resid = u - np.matmul(An, bN[..., None])[..., 0]
            gaps[start:stop] = s_prof - hsum(resid, h)
        return type1_quantile(np.maximum(gaps, 0.0), alpha)

    def profile_l1(t: float) -> float:
        u = y - x_j * t
        beta, _, _ = _l1_beta(A_red, u, h)
        return float(np.abs(u - A_red @ beta).sum())

    q_fixed = noise_quantile(b_j, next(counter)) if fast_quantile else None

    def fval(t: float) -> float:
        q = q_fixed if fast_quantile else noise_quantile(t, next(counter))
        return s_full + q - profile_l1(t)

    def root(sign: int) -> tuple[float, float]:
        half = 3.0 * sd
        for _ in range(WIDEN_STEPS):
            outer = b_j + sign * half
            if fval(outer) < 0.0:
                break
            half *= 2.0
        else:
            raise NoRootError(
                f"coefficient {d.names[j]!r}: no region boundary within "
                f"{half:g} of the estimate after {WIDEN_STEPS} widenings")
        tol = BISECT_TOL_FACTOR * abs(b_j - outer)
        return bisect_sign_change(fval, b_j, outer, tol, BISECT_MAX_ITER), tol

    lower, tol_lo = root(-1)
    upper, tol_up = root(+1)
    method = "fixed-quantile-bisection" if fast_quantile else "simulated-bisection"
    return NonSigInterval(lower, upper, alpha, method=method,
                          sims_per_quantile=sims,
                          bisection_tolerance=max(tol_lo, tol_up))


def l1_region_contains(d: Dataset, beta, alpha: float = 0.95,
                       sims: int = DEFAULT_SIMS, seed: int = 0,
                       threads: int | None = 1) -> bool:
    """Membership test for the full-vector L1 region.

    ``beta`` is a length k+1 coefficient vector (intercept first).  It is
    in the region when its L1 error exceeds the best fit's by no more
    than the alpha-quantile of the noise gaps at beta.  Only the test is
    offered — the region itself is a k+1-dimensional set with no cheap
    parametrisation.
    """
    beta = np.asarray(beta, float)
    if beta.shape != (d.k + 1,):
        raise UsageError(
            f"beta must have length k+1 = {d.k + 1} (intercept first), "
            f"got shape {beta.shape}")
    alpha = check_alpha(alpha)
    sims = check_count(sims, "sims")
    threads = resolve_threads(threads)
    s_best = fit_l1(d, full_subset(d.k)).objective * d.n
    c = d.y - design_matrix(d, full_subset(d.k)) @ beta
    spread = _robust_spread(c)
    gaps = _l1_noise_gaps(c, sims, seed, ("l1-region",),
                          GOLDEN_BOUND_MULT * spread * np.sqrt(d.n),
                          GOLDEN_TOL_FACTOR * spread, threads)
    excess = float(np.abs(c).sum()) - s_best
    return excess <= type1_quantile(gaps, alpha)


# ---------------------------------------------------------------------------
# Closed-form ellipsoids


def nonsig_m_regression(d: Dataset, rho: Union[ObjectiveSpec, str],
                        alpha: float = 0.95) -> NonSigEllipsoid:
    """Asymptotic ellipsoidal region for M-regression coefficients.

    { beta : (beta - beta_hat)' X'X (beta - beta_hat) <= radius^2 } with

        radius^2 = qchisq(alpha, k+1) * sigma_n^2 * n^2 / (n - qchisq)
                   * sum psi(u)^2 / (sum rho''(u))^2,

    which for the L2 criterion reduces exactly to
    |r|^2 qchisq / (n - qchisq).  Needs n > qchisq(alpha, k+1).
    """
    if not isinstance(rho, ObjectiveSpec):
        rho = ObjectiveSpec.parse(str(rho))
    if rho.kind == "l1":
        raise UsageError("the M-regression ellipsoid needs a smooth rho; "
                         "use nonsig_asymptotic_l1 for the L1 criterion")
    alpha = check_alpha(alpha)
    dims = d.k + 1
    q = float(chi2.ppf(alpha, dims))
    if d.n <= q:
        raise NumericalError(
            f"n = {d.n} <= qchisq(alpha, k+1) = {q:.2f}: the radius "
            "formula has no positive denominator at this level")
    fit = fit_objective(d, full_subset(d.k), rho)
    A = design_matrix(d, full_subset(d.k))
    shape = A.T @ A
    if rho.kind == "l2":
        rss = float(np.sum(fit.residuals ** 2))
        radius2 = rss * q / (d.n - q)
    else:
        sigma_n = rho.sigma if rho.sigma is not None else mad_scale(d)
        u = fit.residuals / sigma_n
        sum_curv = float(np.count_nonzero(np.abs(u) <= rho.c))
        if sum_curv == 0.0:
            raise DegenerateCurvatureError(
                "all residuals lie beyond the Huber corner; "
                "the curvature normalisation vanishes")
        sum_psi2 = float(np.sum(np.clip(u, -rho.c, rho.c) ** 2))
        radius2 = q * sigma_n ** 2 * d.n ** 2 / (d.n - q) \
            * sum_psi2 / sum_curv ** 2
    return NonSigEllipsoid(center=fit.beta, shape=shape, radius2=radius2,
                           alpha=alpha, method="asymptotic")


def nonsig_asymptotic_l1(d, alpha: float = 0.95,
                         f0: float | None = None) -> NonSigEllipsoid:
    """Asymptotic region for L1 regression coefficients (or the median).

    For a dataset: { beta : (beta - beta_hat)' (X'X/n) (beta - beta_hat)
    <= qchisq(alpha, k+1) / (4 f0^2 n) } around the L1 fit.  For a plain
    response vector the same formula with an intercept-only design gives
    the interval median +- sqrt(qchisq(alpha, 1)) / (2 f0 sqrt(n)).

    ``f0`` is the residual density at zero.  The caller should supply it;
    when omitted, a Gaussian-kernel plug-in (approximate) is used and the
    method tag says so.
    """
    alpha = check_alpha(alpha)
    if isinstance(d, Dataset):
        fit = fit_l1(d, full_subset(d.k))
        A = design_matrix(d, full_subset(d.k))
        center = fit.beta
        shape = A.T @ A / d.n
        residuals = fit.residuals
        n, dims = d.n, d.k + 1
    else:
        y = as_vector(d, "y")
        med = float(np.median(y))
        center = np.array([med])
        shape = np.array([[1.0]])
        residuals = y - med
        n, dims = y.size, 1
    method = "asymptotic"
    if f0 is None:
        f0 = density_at_zero(residuals)
        method = "asymptotic/plug-in-f0"
    f0 = check_positive(f0, "f0")
    radius2 = float(chi2.ppf(alpha, dims)) / (4.0 * f0 * f0 * n)
    return NonSigEllipsoid(center=center, shape=shape, radius2=radius2,
                           alpha=alpha, method=method)
