"""Covering-frequency studies for non-significance intervals.

Two study designs:

* location — i.i.d. samples from a named family; per replicate build the
  simulated median interval and the rank-based confidence interval and
  test whether each contains the population median;
* regression — responses generated from the fixed stack-loss design with
  known coefficients and a chosen error family; per replicate build the
  component-wise L1 intervals and test coverage of the true slopes.

All draws are replicate-indexed streams, so studies are reproducible and
worker-count independent; each replicate's interval construction gets
its own derived seed so noise panels are not shared across replicates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import binom, chi2, poisson

from .datasets import stackloss
from .errors import NoRootError, UsageError
from .fitting import fit_l1
from .model import (CoverageResult, Dataset, NonSigInterval, design_matrix,
                    full_subset)
from .parallel import resolve_threads
from .regions import nonsig_l1_component, nonsig_median
from .rng import uniforms
from .validation import as_vector, check_alpha, check_count

__all__ = ["GeneratorSpec", "MEDIAN_FAMILIES", "ERROR_FAMILIES",
           "rank_median_ci", "coverage_median", "coverage_regression",
           "regression_truth"]

# Scales making the Laplace and Cauchy densities at the origin equal to
# the standard normal's: f(0) = 1/(2b) = 1/(pi*g) = phi(0).  With them
# the asymptotic median variance 1/(4 f(0)^2 n) matches the Gaussian one.
LAPLACE_SCALE = float(np.sqrt(np.pi / 2.0))
CAUCHY_SCALE = float(np.sqrt(2.0 / np.pi))

MEDIAN_FAMILIES = ("normal", "cauchy", "chisq1", "poisson4", "laplace")
ERROR_FAMILIES = ("residuals-resample", "normal", "laplace", "cauchy")

_TRUE_MEDIANS = {
    "normal": 0.0,
    "cauchy": 0.0,
    "laplace": 0.0,
    "chisq1": float(chi2.ppf(0.5, 1)),
    "poisson4": 4.0,
}

_ALIASES = {"poisson": "poisson4", "poisson(4)": "poisson4",
            "chisq": "chisq1", "chisq(1)": "chisq1",
            "residuals": "residuals-resample"}


def _canon_family(family: str) -> str:
    f = str(family).strip().lower().replace(" ", "")
    return _ALIASES.get(f, f)


def _replicate_seed(seed: int, replicate: int) -> int:
    # a distinct inner seed per replicate, so interval constructions do
    # not share noise panels across replicates
    return int(seed) * 1_000_003 + int(replicate)


@dataclass(frozen=True)
class GeneratorSpec:
    """A sampling family for the location study, with its target median."""

    family: str
    n: int
    true_target: float

    def __post_init__(self):
        family = _canon_family(self.family)
        if family not in MEDIAN_FAMILIES:
            raise UsageError(f"unknown family {self.family!r}; "
                             f"choose from {', '.join(MEDIAN_FAMILIES)}")
        object.__setattr__(self, "family", family)
        check_count(self.n, "n", minimum=5)
        known = _TRUE_MEDIANS[family]
        if abs(float(self.true_target) - known) > 1e-8:
            raise UsageError(
                f"true_target {self.true_target} inconsistent with "
                f"{family}: the population median is {known}")

    @classmethod
    def for_family(cls, family: str, n: int) -> "GeneratorSpec":
        f = _canon_family(family)
        if f not in _TRUE_MEDIANS:
            raise UsageError(f"unknown family {family!r}; "
                             f"choose from {', '.join(MEDIAN_FAMILIES)}")
        return cls(f, n, _TRUE_MEDIANS[f])


def _draw_sample(spec: GeneratorSpec, seed: int, replicate: int) -> np.ndarray:
    u = uniforms(seed, ("coverage-median", spec.family, spec.n),
                 replicate, 1, spec.n)[0]
    if spec.family == "normal":
        return ndtri(u)
    if spec.family == "cauchy":
        return np.tan(np.pi * (u - 0.5))
    if spec.family == "chisq1":
        return ndtri(u) ** 2
    if spec.family == "laplace":
        return np.where(u < 0.5, LAPLACE_SCALE * np.log(2.0 * u),
                        -LAPLACE_SCALE * np.log(2.0 * (1.0 - u)))
    return poisson.ppf(u, 4.0).astype(float)


# ---------------------------------------------------------------------------
# Rank-based confidence interval for the median


def rank_median_ci(y, alpha: float = 0.95) -> NonSigInterval:
    """Order-statistic confidence interval [y(l), y(n-l)] for the median,
    with l = BinomialQuantile((1-alpha)/2, n, 1/2), clamped to the data.
    """
    y = as_vector(y, "y")
    alpha = check_alpha(alpha)
    n = y.size
    if n < 5:
        raise UsageError(f"the rank interval needs n >= 5, got n = {n}")
    l = int(binom.ppf((1.0 - alpha) / 2.0, n, 0.5))
    ys = np.sort(y)
    lower = float(ys[max(l - 1, 0)])
    upper = float(ys[n - l - 1])
    return NonSigInterval(lower, upper, alpha, method="rank",
                          sims_per_quantile=0)


# ---------------------------------------------------------------------------
# Location study


def coverage_median(gen: GeneratorSpec, alpha: float = 0.95,
                    replicates: int = 1000, sims: int = 500, seed: int = 0,
                    threads: int | None = 1) -> dict[str, CoverageResult]:
    """Covering frequency and mean length of the simulated median interval
    and the rank interval, under ``gen``.  Returns {"nonsig": ..., "rank": ...}.

    The median interval is discrete-adjusted for the Poisson family.
    """
    alpha = check_alpha(alpha)
    replicates = check_count(replicates, "replicates", minimum=100)
    sims = check_count(sims, "sims")
    threads = resolve_threads(threads)
    discrete = gen.family == "poisson4"
    covered = {"nonsig": 0, "rank": 0}
    lengths: dict[str, list[float]] = {"nonsig": [], "rank": []}
    failures = 0
    for r in range(replicates):
        y = _draw_sample(gen, seed, r)
        rank_iv = rank_median_ci(y, alpha)
        covered["rank"] += rank_iv.contains(gen.true_target)
        lengths["rank"].append(rank_iv.length)
        try:
            ns_iv = nonsig_median(y, alpha, sims, _replicate_seed(seed, r),
                                  discrete, threads)
        except NoRootError:
            failures += 1
            continue
        covered["nonsig"] += ns_iv.contains(gen.true_target)
        lengths["nonsig"].append(ns_iv.length)
    if failures:
        warnings.warn(f"{failures} of {replicates} replicates failed root "
                      "bracketing; they count as non-covering with no "
                      "length contribution", stacklevel=2)
    return {m: CoverageResult(covered[m] / replicates,
                              float(np.mean(lengths[m])) if lengths[m]
                              else float("nan"), m, replicates)
            for m in ("nonsig", "rank")}


# ---------------------------------------------------------------------------
# Regression study on the fixed stack-loss design


def regression_truth() -> tuple[Dataset, np.ndarray, float]:
    """The fixed design, true coefficients and error scale of the study.

    The coefficients are the L1 fit reported for the stack-loss data and
    the scale is the mean absolute L1 residual of the real response.
    """
    d = stackloss()
    beta_true = np.array([-39.69, 0.832, 0.574, -0.061])
    sigma = float(np.mean(np.abs(fit_l1(d, full_subset(d.k)).residuals)))
    return d, beta_true, sigma


def _draw_errors(family: str, seed: int, replicate: int, n: int,
                 residuals: np.ndarray, sigma: float) -> np.ndarray:
    u = uniforms(seed, ("coverage-regression", family), replicate, 1, 2 * n)[0]
    if family == "normal":
        return sigma * ndtri(u[:n])
    if family == "laplace":
        ul = u[:n]
        return sigma * np.where(ul < 0.5, LAPLACE_SCALE * np.log(2.0 * ul),
                                -LAPLACE_SCALE * np.log(2.0 * (1.0 - ul)))
    if family == "cauchy":
        return sigma * CAUCHY_SCALE * np.tan(np.pi * (u[:n] - 0.5))
    # residuals-resample: each error is an L1 residual drawn with
    # replacement times an independent standard normal; the residuals
    # carry the scale themselves.
    idx = np.minimum((u[n:] * residuals.size).astype(int), residuals.size - 1)
    return ndtri(u[:n]) * residuals[idx]


def coverage_regression(error_family: str, alpha: float = 0.95,
                        replicates: int = 500, sims: int = 500, seed: int = 0,
                        threads: int | None = 1, fast_quantile: bool = False,
                        coefficients=None) -> dict[str, CoverageResult]:
    """Per-slope covering frequency of the component L1 intervals.

    Responses are drawn as design @ beta_true + errors; one interval per
    listed coefficient per replicate.  ``coefficients`` (names) restricts
    the study; default is all three slopes.  Returns a dict keyed by
    coefficient name.
    """
    family = _canon_family(error_family)
    if family not in ERROR_FAMILIES:
        raise UsageError(f"unknown error family {error_family!r}; "
                         f"choose from {', '.join(ERROR_FAMILIES)}")
    alpha = check_alpha(alpha)
    replicates = check_count(replicates, "replicates")
    sims = check_count(sims, "sims")
    threads = resolve_threads(threads)
    d0, beta_true, sigma = regression_truth()
    names = tuple(coefficients) if coefficients else d0.names
    cols = {name: d0.column(name) for name in names}
    mean_response = design_matrix(d0, full_subset(d0.k)) @ beta_true
    res_l1 = fit_l1(d0, full_subset(d0.k)).residuals
    covered = {name: 0 for name in names}
    lengths: dict[str, list[float]] = {name: [] for name in names}
    failures = 0
    for r in range(replicates):
        eps = _draw_errors(family, seed, r, d0.n, res_l1, sigma)
        d_r = Dataset(mean_response + eps, d0.X, d0.names, d0.response_name)
        for name in names:
            j = cols[name]
            try:
                iv = nonsig_l1_component(d_r, j, alpha, sims,
                                         _replicate_seed(seed, r),
                                         fast_quantile, threads)
            except NoRootError:
                failures += 1
                continue
            covered[name] += iv.contains(float(beta_true[j + 1]))
            lengths[name].append(iv.length)
    if failures:
        warnings.warn(f"{failures} interval constructions failed root "
                      "bracketing; they count as non-covering with no "
                      "length contribution", stacklevel=2)
    return {name: CoverageResult(covered[name] / replicates,
                                 float(np.mean(lengths[name]))
                                 if lengths[name] else float("nan"),
                                 "nonsig", replicates)
            for name in names}
