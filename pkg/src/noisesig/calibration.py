"""Cut-off P-values: what does "small" mean when all covariates are noise?

``p0_nested`` simulates the exact object: with the real response kept and
every covariate replaced by fresh noise, the minimum subset P-value is
itself a random variable; its lower alpha-quantile is the calibrated
significance threshold p0(n, k, alpha).

``p0_chisq_approx`` is the cheap large-n surrogate: each covariate's
improvement is approximately an independent chi-squared(1) variable, a
subset's P-value is the chi-squared tail of the summed improvements, and
the minimum over subsets only ever occurs at a set of the m largest
variables — so a sort and prefix sum replace the 2**k enumeration.

``fit_log_quadratic`` condenses a grid of (alpha, p0) pairs into
log p0 ~ c1 + c2 log alpha + c3 log^2 alpha for instant lookup; the
coefficients live in a :class:`CutoffTable` that the selection step and
the CLI can reload.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import chi2

from .errors import CapacityError, UsageError
from .model import Dataset, ObjectiveSpec, full_subset
from .optimize import type1_quantile
from .parallel import chunk_ranges, resolve_threads
from .pvalues import _Engine, _gamma_from_engine
from .rng import normals
from .validation import as_vector, check_alpha, check_count

__all__ = ["CutoffTable", "p0_nested", "p0_chisq_approx", "fit_log_quadratic",
           "chisq_cutoff_table", "nested_cutoff_table"]

MAX_NESTED_COVARIATES = 12
MAX_CHISQ_COVARIATES = 20
DEFAULT_ALPHA_GRID = tuple(np.geomspace(0.005, 0.45, 16))


@dataclass(frozen=True)
class CutoffTable:
    """Calibrated cut-off values p0, with optional fitted curves per k.

    ``entries`` maps (n, k, alpha) to p0; n is None for the sample-size-free
    chi-squared approximation.  ``fits`` maps k to log-quadratic
    coefficients (c1, c2, c3) evaluated as exp(c1 + c2 log a + c3 log^2 a).
    """

    method: str
    entries: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    outer_sims: int = 0
    inner_sims: int = 0
    seed: int = 0

    def lookup(self, n: Optional[int], k: int, alpha: float) -> float:
        key = (n, int(k), float(alpha))
        if key in self.entries:
            return self.entries[key]
        key_free = (None, int(k), float(alpha))
        if key_free in self.entries:
            return self.entries[key_free]
        if int(k) in self.fits:
            c1, c2, c3 = self.fits[int(k)]
            la = np.log(float(alpha))
            return float(np.exp(c1 + c2 * la + c3 * la * la))
        raise UsageError(
            f"cutoff table ({self.method}) has no entry or fit for "
            f"n={n}, k={k}, alpha={alpha}")

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "method": self.method,
            "outer_sims": self.outer_sims,
            "inner_sims": self.inner_sims,
            "seed": self.seed,
            "entries": [
                {"n": n, "k": k, "alpha": a, "p0": p}
                for (n, k, a), p in sorted(self.entries.items(),
                                           key=lambda kv: (kv[0][0] or 0,
                                                           kv[0][1], kv[0][2]))
            ],
            "fits": [
                {"k": k, "c1": c[0], "c2": c[1], "c3": c[2]}
                for k, c in sorted(self.fits.items())
            ],
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "CutoffTable":
        if payload.get("schema") != 1:
            raise UsageError(
                f"unsupported cutoff-table schema {payload.get('schema')!r}")
        entries = {(row.get("n"), int(row["k"]), float(row["alpha"])):
                   float(row["p0"]) for row in payload.get("entries", ())}
        fits = {int(row["k"]): (float(row["c1"]), float(row["c2"]),
                                float(row["c3"]))
                for row in payload.get("fits", ())}
        return cls(method=str(payload.get("method", "unknown")),
                   entries=entries, fits=fits,
                   outer_sims=int(payload.get("outer_sims", 0)),
                   inner_sims=int(payload.get("inner_sims", 0)),
                   seed=int(payload.get("seed", 0)))

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "CutoffTable":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"cutoff table is not valid JSON: {exc}") from None
        return cls.from_json_dict(payload)


def p0_nested(y, k: int, obj: ObjectiveSpec, alpha: float,
              outer_sims: int, inner_sims: int, seed: int = 0,
              threads: int | None = 1) -> float:
    """Nested-simulation cut-off p0(n, k, alpha).

    The response stays fixed; each outer replicate draws an all-noise
    covariate matrix, computes every proper subset's Gamma-approximate
    P-value with ``inner_sims`` replicates, and records the minimum.
    Returns the empirical lower alpha-quantile of those minima.
    """
    y = as_vector(y, "y")
    k = check_count(k, "k")
    if k > MAX_NESTED_COVARIATES:
        raise CapacityError(
            f"nested calibration is limited to k <= {MAX_NESTED_COVARIATES} "
            f"(cost grows as 2**k * sims**2); got k={k}")
    if not isinstance(obj, ObjectiveSpec):
        obj = ObjectiveSpec.parse(str(obj))
    alpha = check_alpha(alpha)
    outer_sims = check_count(outer_sims, "outer_sims", minimum=100)
    inner_sims = check_count(inner_sims, "inner_sims", minimum=30)
    threads = resolve_threads(threads)
    n = y.size
    names = tuple(f"Z{j + 1}" for j in range(k))
    e_f = full_subset(k)
    minima = np.empty(outer_sims)
    for o in range(outer_sims):
        X = normals(seed, ("calibrate", "design"), o, 1, n * k)
        d = Dataset(y, X.reshape(n, k, order="F"), names)
        engine = _Engine(d, obj)
        best = np.inf
        for e in range(e_f):
            sims = engine.simulate(e, inner_sims, "gaussian", seed, threads,
                                   context=("calibrate", "inner", o, e))
            report = _gamma_from_engine(engine, e, inner_sims, "gaussian",
                                        seed, threads, sims=sims)
            best = min(best, report.p_gamma)
        minima[o] = best
    return type1_quantile(minima, alpha)


def p0_chisq_approx(k: int, alpha: float, sims: int, seed: int = 0,
                    threads: int | None = 1) -> float:
    """Chi-squared-sum approximation p~0(k, alpha).

    Per replicate, draw chi-squared(1) variables X_1..X_k; the minimum
    over nonempty subsets S of 1 - ChiSqCDF(sum_S X, |S|) is attained at
    a set of the m largest values for some m, so only k prefix sums of
    the descending sort need checking.  Returns the lower alpha-quantile
    of the per-replicate minima.
    """
    k = check_count(k, "k")
    if k > MAX_CHISQ_COVARIATES:
        raise CapacityError(
            f"chi-squared calibration is limited to k <= {MAX_CHISQ_COVARIATES}, "
            f"got k={k}")
    alpha = check_alpha(alpha)
    sims = check_count(sims, "sims")
    threads = resolve_threads(threads)
    dfs = np.arange(1, k + 1)
    minima = np.empty(sims)
    for start, stop in chunk_ranges(sims, threads):
        z = normals(seed, ("calibrate", "chisq"), start, stop - start, k)
        x = np.sort(z * z, axis=1)[:, ::-1]
        tails = chi2.sf(np.cumsum(x, axis=1), dfs)
        minima[start:stop] = tails.min(axis=1)
    return type1_quantile(minima, alpha)


def fit_log_quadratic(k: int, quantile_grid: Sequence[tuple[float, float]]
                      ) -> tuple[float, float, float]:
    """Least-squares fit of log p0 on (1, log alpha, log^2 alpha)."""
    grid = [(float(a), float(p)) for a, p in quantile_grid]
    if len(grid) < 3:
        raise UsageError(
            f"log-quadratic fit needs at least 3 grid points, got {len(grid)}")
    for a, p in grid:
        if not (0 < a < 1) or not (0 < p <= 1):
            raise UsageError(f"bad grid point (alpha={a}, p0={p})")
    la = np.log([a for a, _ in grid])
    lp = np.log([p for _, p in grid])
    design = np.column_stack([np.ones_like(la), la, la * la])
    coef, *_ = np.linalg.lstsq(design, lp, rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])


def chisq_cutoff_table(ks: Sequence[int], sims: int = 100_000, seed: int = 0,
                       alphas: Sequence[float] = DEFAULT_ALPHA_GRID,
                       threads: int | None = 1) -> CutoffTable:
    """Chi-squared-approximate cutoffs on a grid plus per-k fitted curves."""
    entries: dict = {}
    fits: dict = {}
    for k in ks:
        grid = []
        for a in alphas:
            p0 = p0_chisq_approx(k, a, sims, seed, threads)
            entries[(None, int(k), float(a))] = p0
            grid.append((float(a), p0))
        if len(grid) >= 3:  # enough points for the interpolating curve
            fits[int(k)] = fit_log_quadratic(k, grid)
    return CutoffTable(method="chisq-approx", entries=entries, fits=fits,
                       outer_sims=int(sims), seed=int(seed))


def nested_cutoff_table(y, ks: Sequence[int], obj: ObjectiveSpec,
                        alphas: Sequence[float], outer_sims: int,
                        inner_sims: int, seed: int = 0,
                        threads: int | None = 1) -> CutoffTable:
    """Nested-simulation cutoffs for the given k values and levels."""
    y = as_vector(y, "y")
    entries: dict = {}
    for k in ks:
        for a in alphas:
            entries[(y.size, int(k), float(a))] = p0_nested(
                y, k, obj, a, outer_sims, inner_sims, seed, threads)
    return CutoffTable(method="nested-simulation", entries=entries,
                       outer_sims=int(outer_sims), inner_sims=int(inner_sims),
                       seed=int(seed))
