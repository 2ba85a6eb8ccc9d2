"""Noise-substitution P-values.

For a covariate subset ``e``, the excluded columns are replaced by fresh
noise and the functional is refitted on all k+1 columns.  Writing s(e)
for the subset fit's objective and S(e) for the noise-substituted one,
the P-value of ``e`` is P(S(e) <= s(e_f)): the probability that noise
does at least as well as the real excluded covariates.

Three estimates are provided:

* ``p_raw``        — the Monte Carlo proportion itself;
* ``p_gamma``      — a method-of-moments Gamma fit to the improvements
                     D = s(e) - S(e), evaluated at s(e) - s(e_f); resolves
                     P-values far below Monte Carlo resolution;
* ``p_asymptotic`` — a chi-squared tail approximation (L2 and Huber with
                     c >= 0.5 only; it degrades as c -> 0).

Internally all simulations run in raw-residual units (smoothed-modulus
sums for L1/Huber, residual sums of squares for L2); these are positive
multiples of the public mean-loss objectives, so counts, Gamma shapes and
tail probabilities are unchanged by the conversion.

The per-replicate draws are keyed by (seed, subset, replicate): any
chunking of the replicate range — hence any worker count — produces
bit-identical results.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import chi2, gamma as _gamma_dist

from .errors import DegenerateCurvatureError, DegenerateScaleError, UsageError
from .fitting import (_check_rank, _column_labels, _l1_beta, batch_huber_irls,
                      batch_lstsq, fit_l1, fit_l2, hsum, mad_scale,
                      residual_width)
from .model import (Dataset, ObjectiveSpec, PValueReport, design_matrix,
                    full_subset, subset_members, subset_size, subsets_of)
from .noise import check_noise_kind, noise_matrix_batch, _TEMPLATE_KINDS
from .parallel import chunk_ranges, resolve_threads
from .validation import check_count

__all__ = ["p_raw", "p_gamma", "p_asymptotic", "p_all_subsets"]

MIN_GAMMA_SIMS = 30
ASYMPTOTIC_MIN_C = 0.5


class _Engine:
    """Shared state for simulating one objective on one dataset.

    Internal objective units: sum of the smoothed modulus at half-width h
    for L1/Huber, RSS for L2.  ``factor`` converts internal units to the
    public mean-loss objective.
    """

    def __init__(self, d: Dataset, obj: ObjectiveSpec):
        self.d = d
        self.obj = obj
        if obj.kind == "l2":
            self.h = None
            self.factor = 1.0 / d.n
        elif obj.kind == "l1":
            self.h = residual_width(fit_l1(d, full_subset(d.k)).residuals)
            if self.h == 0.0:
                raise DegenerateScaleError(
                    "full-model L1 residuals are all zero; "
                    "the noise comparison is undefined for an exact fit")
            self.factor = None  # reported objective is mean |r|, see below
        else:
            sigma = obj.sigma if obj.sigma is not None else mad_scale(d)
            self.sigma = sigma
            self.h = obj.c * sigma
            self.factor = obj.c / (sigma * d.n)
        self._fits: dict[int, tuple[np.ndarray, float, float]] = {}

    def fit(self, e: int) -> tuple[np.ndarray, float, float]:
        """(beta, internal objective, public objective) for subset ``e``."""
        e = int(e)
        if e not in self._fits:
            A = design_matrix(self.d, e)
            if self.obj.kind == "l2":
                res = fit_l2(self.d, e)
                internal = float(np.sum(res.residuals ** 2))
                self._fits[e] = (res.beta, internal, res.objective)
            else:
                _check_rank(A, _column_labels(self.d, e))
                if self.obj.kind == "l1":
                    beta, _, _ = _l1_beta(A, self.d.y, self.h)
                else:
                    beta, _, _ = batch_huber_irls(A[None], self.d.y, self.h)
                    beta = beta[0]
                r = self.d.y - A @ beta
                internal = float(hsum(r, self.h))
                public = (float(np.mean(np.abs(r))) if self.obj.kind == "l1"
                          else internal * self.factor)
                self._fits[e] = (beta, internal, public)
        return self._fits[e]

    def simulate(self, e: int, n_sims: int, kind: str, seed: int,
                 threads: int, context: tuple | None = None) -> np.ndarray:
        """Noise-substituted objective values S_r(e), internal units."""
        d = self.d
        e = int(e)
        if context is None:
            context = ("pvalues", e)
        excluded = [j for j in range(d.k) if not (e >> j & 1)]
        beta_e, internal_e, _ = self.fit(e)
        if not excluded:
            return np.full(n_sims, internal_e)
        A_e = design_matrix(d, e)
        p_e = A_e.shape[1]
        m = len(excluded)
        template = d.X[:, excluded] if kind in _TEMPLATE_KINDS else None
        warm = np.concatenate([beta_e, np.zeros(m)])
        out = np.empty(n_sims)
        for start, stop in chunk_ranges(n_sims, threads):
            R = stop - start
            Z = noise_matrix_batch(d.n, m, kind, seed, context,
                                   start, R, template)
            An = np.empty((R, d.n, p_e + m))
            An[:, :, :p_e] = A_e
            An[:, :, p_e:] = Z
            if self.obj.kind == "l2":
                beta = batch_lstsq(An, np.broadcast_to(d.y, (R, d.n)))
                resid = d.y - np.matmul(An, beta[..., None])[..., 0]
                out[start:stop] = np.sum(resid * resid, axis=1)
            else:
                beta, _, _ = batch_huber_irls(
                    An, d.y, self.h, beta0=np.broadcast_to(warm, (R, p_e + m)))
                resid = d.y - np.matmul(An, beta[..., None])[..., 0]
                out[start:stop] = hsum(resid, self.h)
        return out


def _prep(d: Dataset, e: int, obj: ObjectiveSpec, kind: str,
          n_sims: int) -> tuple[_Engine, str, int]:
    if not isinstance(obj, ObjectiveSpec):
        obj = ObjectiveSpec.parse(str(obj))
    kind = check_noise_kind(kind)
    n_sims = check_count(n_sims, "n_sims")
    int(e)  # raises on nonsense early
    return _Engine(d, obj), kind, n_sims


def p_raw(d: Dataset, e: int, obj: ObjectiveSpec, n_sims: int,
          kind: str = "gaussian", seed: int = 0,
          threads: int | None = 1) -> PValueReport:
    """Monte Carlo P-value: #{S(e) <= s(e_f)} / n_sims (ties favour the null)."""
    engine, kind, n_sims = _prep(d, e, obj, kind, n_sims)
    return _raw_from_engine(engine, int(e), n_sims, kind, seed,
                            resolve_threads(threads))


def _raw_from_engine(engine: _Engine, e: int, n_sims: int, kind: str,
                     seed: int, threads: int) -> PValueReport:
    _, s_full_int, s_full_pub = engine.fit(full_subset(engine.d.k))
    _, _, s_e_pub = engine.fit(e)
    sims = engine.simulate(e, n_sims, kind, seed, threads)
    p = float(np.count_nonzero(sims <= s_full_int)) / n_sims
    return PValueReport(subset=e, p_raw=p, n_sims=n_sims,
                        objective_full=s_full_pub, objective_subset=s_e_pub)


def p_gamma(d: Dataset, e: int, obj: ObjectiveSpec, n_sims: int,
            kind: str = "gaussian", seed: int = 0,
            threads: int | None = 1) -> PValueReport:
    """Gamma-approximate P-value from the simulated improvements s(e) - S(e)."""
    engine, kind, n_sims = _prep(d, e, obj, kind, n_sims)
    if n_sims < MIN_GAMMA_SIMS:
        raise UsageError(
            f"the Gamma moment fit needs n_sims >= {MIN_GAMMA_SIMS}, got {n_sims}")
    return _gamma_from_engine(engine, int(e), n_sims, kind, seed,
                              resolve_threads(threads))


def _gamma_from_engine(engine: _Engine, e: int, n_sims: int, kind: str,
                       seed: int, threads: int,
                       sims: np.ndarray | None = None) -> PValueReport:
    _, s_full_int, s_full_pub = engine.fit(full_subset(engine.d.k))
    _, s_e_int, s_e_pub = engine.fit(e)
    if sims is None:
        sims = engine.simulate(e, n_sims, kind, seed, threads)
    improvements = np.maximum(s_e_int - sims, 0.0)
    gap = s_e_int - s_full_int
    mean = float(improvements.mean())
    var = float(improvements.var())
    unit = (1.0 / engine.d.n) if engine.factor is None else engine.factor
    if var <= 0.0 or mean <= 0.0:
        return PValueReport(subset=e, p_gamma=1.0 if gap <= 0 else 0.0,
                            n_sims=n_sims, objective_full=s_full_pub,
                            objective_subset=s_e_pub, degenerate_gamma_fit=True)
    shape = mean * mean / var
    scale = var / mean
    p = float(_gamma_dist.sf(gap, shape, scale=scale))
    return PValueReport(subset=e, p_gamma=p, n_sims=n_sims,
                        gamma_shape=shape, gamma_scale=scale * unit,
                        objective_full=s_full_pub, objective_subset=s_e_pub)


def p_asymptotic(d: Dataset, e: int, obj: ObjectiveSpec) -> PValueReport:
    """Chi-squared tail P-value (deterministic; L2 or Huber with c >= 0.5)."""
    if not isinstance(obj, ObjectiveSpec):
        obj = ObjectiveSpec.parse(str(obj))
    if obj.kind == "l1" or (obj.kind == "huber" and obj.c < ASYMPTOTIC_MIN_C):
        raise UsageError(
            "the asymptotic P-value needs the L2 objective or a Huber "
            f"constant >= {ASYMPTOTIC_MIN_C}; the approximation breaks "
            "down towards the L1 limit")
    engine = _Engine(d, obj)
    return _asymptotic_from_engine(engine, int(e))


def _asymptotic_from_engine(engine: _Engine, e: int) -> PValueReport:
    d, obj = engine.d, engine.obj
    df = d.k - subset_size(e)
    _, s_full_int, s_full_pub = engine.fit(full_subset(d.k))
    _, s_e_int, s_e_pub = engine.fit(e)
    if df == 0:
        return PValueReport(subset=e, p_asymptotic=1.0,
                            objective_full=s_full_pub, objective_subset=s_e_pub)
    if obj.kind == "l2":
        rss_e, rss_f = s_e_int, s_full_int
        if rss_e <= 0:
            p = 1.0
        else:
            T = d.n * max(rss_e - rss_f, 0.0) / rss_e
            p = float(chi2.sf(T, df))
    else:
        beta_e = engine.fit(e)[0]
        A = design_matrix(d, e)
        u = (d.y - A @ beta_e) / engine.sigma
        c = obj.c
        curvature = float(np.mean(np.abs(u) <= c))
        if curvature == 0.0:
            raise DegenerateCurvatureError(
                "all subset-fit residuals lie beyond the Huber corner; "
                "the asymptotic curvature term vanishes")
        psi2 = float(np.mean(np.clip(u, -c, c) ** 2))
        T = d.n * 2.0 * curvature * max(s_e_pub - s_full_pub, 0.0) / psi2
        p = float(chi2.sf(T, df))
    return PValueReport(subset=e, p_asymptotic=p,
                        objective_full=s_full_pub, objective_subset=s_e_pub)


def p_all_subsets(d: Dataset, obj: ObjectiveSpec, method: str = "raw",
                  n_sims: int = 1000, kind: str = "gaussian", seed: int = 0,
                  threads: int | None = 1) -> list[PValueReport]:
    """One report per subset, ascending code order.

    ``method`` is one of raw, gamma, asymptotic, all.  Simulation streams
    are indexed by (subset, replicate), so single-subset calls reproduce
    the corresponding row exactly.  With method "all" under the L1
    objective the asymptotic column is left absent (unsupported regime).
    """
    if not isinstance(obj, ObjectiveSpec):
        obj = ObjectiveSpec.parse(str(obj))
    if method not in ("raw", "gamma", "asymptotic", "all"):
        raise UsageError(f"unknown method {method!r}")
    kind = check_noise_kind(kind)
    threads = resolve_threads(threads)
    engine = _Engine(d, obj)
    asym_ok = obj.kind == "l2" or (obj.kind == "huber" and obj.c >= ASYMPTOTIC_MIN_C)
    if method == "asymptotic" and not asym_ok:
        raise UsageError("asymptotic method unsupported for this objective")
    reports = []
    for e in subsets_of(d.k):
        if method == "asymptotic":
            reports.append(_asymptotic_from_engine(engine, e))
            continue
        n_sims_checked = check_count(n_sims, "n_sims")
        sims = engine.simulate(e, n_sims_checked, kind, seed, threads)
        _, s_full_int, s_full_pub = engine.fit(full_subset(d.k))
        _, _, s_e_pub = engine.fit(e)
        fields: dict = {}
        if method in ("raw", "all"):
            fields["p_raw"] = float(np.count_nonzero(sims <= s_full_int)) / n_sims_checked
        if method in ("gamma", "all"):
            if n_sims_checked < MIN_GAMMA_SIMS:
                raise UsageError(
                    f"the Gamma moment fit needs n_sims >= {MIN_GAMMA_SIMS}")
            g = _gamma_from_engine(engine, e, n_sims_checked, kind, seed,
                                   threads, sims=sims)
            fields.update(p_gamma=g.p_gamma, gamma_shape=g.gamma_shape,
                          gamma_scale=g.gamma_scale,
                          degenerate_gamma_fit=g.degenerate_gamma_fit)
        if method == "all" and asym_ok:
            fields["p_asymptotic"] = _asymptotic_from_engine(engine, e).p_asymptotic
        reports.append(PValueReport(subset=e, n_sims=n_sims_checked,
                                    objective_full=s_full_pub,
                                    objective_subset=s_e_pub, **fields))
    return reports
