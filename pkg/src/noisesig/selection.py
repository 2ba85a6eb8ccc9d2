"""Two-step functional choice, plus the BIC baseline it is compared with.

Step 1 keeps the proper covariate subsets whose P-value exceeds the
calibrated cut-off p0(n, k, alpha): subsets that noise cannot imitate.
Step 2 keeps a surviving subset only if every smaller subset inside it is
clearly worse — every relative P-value p(e', e) falls below
p0(n, k(e), alpha) — so no covariate it carries is dispensable.  The full
set always enters step 2 as the fallback candidate: it is what remains
when no proper subset survives scrutiny.  The chosen functional is the
step-2 survivor with the largest P-value (ties: fewer covariates, then
smaller code).
"""

from __future__ import annotations

import warnings
from typing import Optional, Union

import numpy as np

from .calibration import CutoffTable, p0_chisq_approx
from .errors import CapacityError, SingularDesignError, UsageError
from .fitting import fit_l2
from .model import (Dataset, ObjectiveSpec, SelectionOutcome, full_subset,
                    is_subset, subset_members, subset_size, subsets_of)
from .parallel import chunk_ranges, resolve_threads
from .pvalues import p_all_subsets, p_asymptotic, p_gamma, p_raw
from .rng import normals
from .validation import check_alpha, check_count

__all__ = ["relative_pvalue", "choose_functional", "bic_rank",
           "bic_noise_experiment"]

MAX_STRATEGY_COVARIATES = 12

CutoffSource = Union[float, str, CutoffTable]


def _reindex_within(e_inner: int, e_outer: int, k: int) -> int:
    members = subset_members(e_outer, k)
    return sum(1 << pos for pos, j in enumerate(members) if e_inner >> j & 1)


def relative_pvalue(d: Dataset, e_outer: int, e_inner: int,
                    obj: ObjectiveSpec, method: str = "gamma",
                    n_sims: int = 1000, kind: str = "gaussian", seed: int = 0,
                    threads: int | None = 1) -> float:
    """P-value of ``e_inner`` computed as if ``e_outer`` were the full set.

    ``e_inner`` must be a strict subset of ``e_outer``; the dataset is
    restricted to the outer covariates and the inner code re-indexed.
    """
    e_outer, e_inner = int(e_outer), int(e_inner)
    if not is_subset(e_inner, e_outer) or e_inner == e_outer:
        raise UsageError(
            f"e_inner={e_inner} must be a strict subset of e_outer={e_outer}")
    if e_outer == full_subset(d.k):
        restricted, code = d, e_inner
    else:
        restricted = d.restrict(e_outer)
        code = _reindex_within(e_inner, e_outer, d.k)
    if method == "raw":
        return p_raw(restricted, code, obj, n_sims, kind, seed, threads).p_raw
    if method == "gamma":
        return p_gamma(restricted, code, obj, n_sims, kind, seed, threads).p_gamma
    if method == "asymptotic":
        return p_asymptotic(restricted, code, obj).p_asymptotic
    raise UsageError(f"unknown method {method!r}")


def _cutoff_lookup(source: CutoffSource, n: int, alpha: float, ks: set[int],
                   seed: int, cutoff_sims: int,
                   threads: int | None) -> dict[int, float]:
    out: dict[int, float] = {}
    for k_e in sorted(ks):
        if isinstance(source, CutoffTable):
            out[k_e] = source.lookup(n, k_e, alpha)
        elif isinstance(source, (int, float)) and not isinstance(source, bool):
            out[k_e] = float(source)
        elif source in ("chisq", "auto"):
            out[k_e] = p0_chisq_approx(k_e, alpha, cutoff_sims, seed, threads)
        else:
            raise UsageError(
                f"bad cutoff source {source!r}: use a number, 'chisq', "
                "or a CutoffTable")
    return out


def _report_pvalue(report, method: str) -> float:
    value = {"raw": report.p_raw, "gamma": report.p_gamma,
             "asymptotic": report.p_asymptotic}[method]
    if value is None:
        raise UsageError(f"report for subset {report.subset} lacks a "
                         f"{method} P-value")
    return value


def choose_functional(d: Dataset, obj: ObjectiveSpec, alpha: float,
                      cutoff_source: CutoffSource = "chisq",
                      method: str = "gamma", n_sims: int = 1000,
                      kind: str = "gaussian", seed: int = 0,
                      threads: int | None = 1,
                      cutoff_sims: int = 100_000) -> SelectionOutcome:
    """Run the two-step strategy and pick a covariate subset."""
    if d.k > MAX_STRATEGY_COVARIATES:
        raise CapacityError(
            f"the selection strategy enumerates sub-subsets; "
            f"k <= {MAX_STRATEGY_COVARIATES} required, got {d.k}")
    alpha = check_alpha(alpha)
    n_sims = check_count(n_sims, "n_sims")
    if method not in ("raw", "gamma", "asymptotic"):
        raise UsageError(f"unknown method {method!r}")
    if not isinstance(obj, ObjectiveSpec):
        obj = ObjectiveSpec.parse(str(obj))
    e_f = full_subset(d.k)
    reports = p_all_subsets(d, obj, method, n_sims, kind, seed, threads)
    pvals = {r.subset: _report_pvalue(r, method) for r in reports}

    candidates = [e for e in subsets_of(d.k) if e != e_f]
    ks_needed = {d.k} | {subset_size(e) for e in candidates if e != 0}
    cutoffs = _cutoff_lookup(cutoff_source, d.n, alpha, ks_needed, seed,
                             cutoff_sims, threads)

    step1 = tuple(e for e in candidates if pvals[e] > cutoffs[d.k])

    def survives_step2(e: int) -> bool:
        if e == 0:  # no sub-functionals to beat
            return True
        cut = cutoffs[subset_size(e)]
        for e_prime in range(e):
            if not is_subset(e_prime, e):
                continue
            rel = relative_pvalue(d, e, e_prime, obj, method, n_sims, kind,
                                  seed, threads)
            if rel >= cut:
                return False
        return True

    step2 = tuple(e for e in (*step1, e_f) if survives_step2(e))
    chosen: Optional[int] = None
    if step2:
        chosen = min(step2, key=lambda e: (-pvals[e], subset_size(e), e))
    return SelectionOutcome(survivors_step1=step1, survivors_step2=step2,
                            chosen=chosen, alpha=alpha,
                            cutoffs={k: cutoffs[k] for k in sorted(cutoffs)},
                            reports=tuple(reports))


def _bic_values(rss: np.ndarray, n: int, sizes: np.ndarray) -> np.ndarray:
    safe = np.maximum(rss, 1e-300)
    return n * np.log(safe / n) + (sizes + 2) * np.log(n)


def bic_rank(d: Dataset) -> list[tuple[int, float]]:
    """All subsets ordered by Gaussian BIC = n log(RSS/n) + (k(e)+2) log n."""
    ranked = []
    for e in subsets_of(d.k):
        try:
            res = fit_l2(d, e)
        except SingularDesignError as exc:
            warnings.warn(f"subset {e} skipped: {exc}", stacklevel=2)
            continue
        rss = float(np.sum(res.residuals ** 2))
        bic = float(_bic_values(np.array([rss]), d.n,
                                np.array([subset_size(e)]))[0])
        ranked.append((e, bic))
    ranked.sort(key=lambda t: (t[1], subset_size(t[0]), t[0]))
    return ranked


def bic_noise_experiment(d: Dataset, reps: int, seed: int = 0,
                         threads: int | None = 1) -> float:
    """Fraction of all-noise replicates whose best-BIC model is non-empty.

    All covariates are replaced by fresh Gaussian noise while the response
    stays fixed; BIC then has no true signal to find, so this fraction is
    its false-discovery rate under pure noise.
    """
    reps = check_count(reps, "reps", minimum=1)
    threads = resolve_threads(threads)
    n, k = d.n, d.k
    subsets = subsets_of(k)
    logn = np.log(n)
    y = d.y
    rss0 = float(np.sum((y - y.mean()) ** 2))
    bic_empty = n * np.log(max(rss0, 1e-300) / n) + 2 * logn
    wins = 0
    for start, stop in chunk_ranges(reps, threads):
        R = stop - start
        Z = normals(seed, ("bic-noise",), start, R, n * k)
        Z = Z.reshape(R, n, k, order="F")
        best = np.full(R, np.inf)
        for e in subsets:
            if e == 0:
                continue
            cols = subset_members(e, k)
            A = np.empty((R, n, len(cols) + 1))
            A[:, :, 0] = 1.0
            A[:, :, 1:] = Z[:, :, cols]
            q, r_ = np.linalg.qr(A)
            coef = np.linalg.solve(
                r_, np.matmul(q.transpose(0, 2, 1),
                              np.broadcast_to(y, (R, n))[..., None]))[..., 0]
            resid = y - np.matmul(A, coef[..., None])[..., 0]
            rss = np.sum(resid * resid, axis=1)
            bic = _bic_values(rss, n, np.full(R, len(cols)))
            best = np.minimum(best, bic)
        wins += int(np.count_nonzero(best < bic_empty))
    return wins / reps
