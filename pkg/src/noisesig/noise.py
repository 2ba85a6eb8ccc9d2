"""Replacement-noise generation and the mixed covariate/noise matrix W(e).

Noise kinds
-----------
gaussian     i.i.d. N(0,1)                       (default)
rademacher   i.i.d. +-1 with equal probability
uniform      i.i.d. Uniform(-1, 1)
signed-beta  i.i.d. sign * Beta(5,5) draw
cauchy       i.i.d. standard Cauchy
scaled       entrywise x_ij * Z_ij with Z Gaussian (needs the replaced
             columns as template)
permute      independent random row-permutation of each replaced column
             (needs template)

Every kind is driven by the keyed uniform stream of :mod:`noisesig.rng`,
so draws depend only on (seed, context, replicate).
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import beta as _beta_dist

from .errors import UsageError
from .model import Dataset, subset_members
from .rng import RngStream, uniforms
from .validation import check_count

__all__ = ["NOISE_KINDS", "check_noise_kind", "noise_matrix",
           "noise_matrix_batch", "build_w"]

NOISE_KINDS = ("gaussian", "rademacher", "uniform", "signed-beta",
               "cauchy", "scaled", "permute")
_TEMPLATE_KINDS = ("scaled", "permute")


def check_noise_kind(kind: str) -> str:
    k = str(kind).strip().lower()
    if k not in NOISE_KINDS:
        raise UsageError(
            f"unknown noise kind {kind!r}; choose from {', '.join(NOISE_KINDS)}")
    return k


def _uniform_budget(kind: str, n: int, m: int) -> int:
    # signed-beta spends two uniforms per entry (sign + magnitude)
    return 2 * n * m if kind == "signed-beta" else n * m


def noise_matrix_batch(n: int, m: int, kind: str, seed: int, context: tuple,
                       first_replicate: int, n_replicates: int,
                       template: np.ndarray | None = None) -> np.ndarray:
    """Noise matrices for a contiguous run of replicates, shape (R, n, m)."""
    kind = check_noise_kind(kind)
    n = check_count(n, "n")
    m = check_count(m, "m")
    if kind in _TEMPLATE_KINDS:
        if template is None:
            raise UsageError(f"noise kind {kind!r} requires a template matrix")
        template = np.asarray(template, float)
        if template.shape != (n, m):
            raise UsageError(
                f"template shape {template.shape} does not match ({n}, {m})")
    u = uniforms(seed, context, first_replicate, n_replicates,
                 _uniform_budget(kind, n, m))
    R = int(n_replicates)
    if kind == "gaussian":
        return ndtri(u).reshape(R, n, m, order="F")
    if kind == "rademacher":
        return np.where(u < 0.5, -1.0, 1.0).reshape(R, n, m, order="F")
    if kind == "uniform":
        return (2.0 * u - 1.0).reshape(R, n, m, order="F")
    if kind == "signed-beta":
        half = n * m
        sign = np.where(u[:, :half] < 0.5, -1.0, 1.0)
        mag = _beta_dist.ppf(u[:, half:], 5.0, 5.0)
        return (sign * mag).reshape(R, n, m, order="F")
    if kind == "cauchy":
        return np.tan(np.pi * (u - 0.5)).reshape(R, n, m, order="F")
    if kind == "scaled":
        z = ndtri(u).reshape(R, n, m, order="F")
        return template[None, :, :] * z
    # permute: independent row-permutation per column, per replicate
    keys = u.reshape(R, n, m, order="F")
    order = np.argsort(keys, axis=1)
    out = np.empty((R, n, m))
    for j in range(m):
        out[:, :, j] = template[:, j][order[:, :, j]]
    return out


def noise_matrix(n: int, m: int, kind: str, stream: RngStream,
                 template: np.ndarray | None = None) -> np.ndarray:
    """One replicate's noise matrix, shape (n, m)."""
    return noise_matrix_batch(n, m, kind, stream.seed, stream.context,
                              stream.replicate_index, 1, template)[0]


def build_w(d: Dataset, e: int, kind: str = "gaussian",
            stream: RngStream = RngStream(0)) -> np.ndarray:
    """Design with excluded covariates replaced by noise: n x (k+1).

    Column 0 is the intercept; column j+1 carries covariate j if it is in
    ``e`` and a noise column otherwise.  ``e`` equal to the full subset
    returns the ordinary design.
    """
    keep = set(subset_members(e, d.k))
    out = np.empty((d.n, d.k + 1))
    out[:, 0] = 1.0
    excluded = [j for j in range(d.k) if j not in keep]
    for j in keep:
        out[:, j + 1] = d.X[:, j]
    if excluded:
        template = d.X[:, excluded] if check_noise_kind(kind) in _TEMPLATE_KINDS else None
        Z = noise_matrix(d.n, len(excluded), kind, stream, template)
        for pos, j in enumerate(excluded):
            out[:, j + 1] = Z[:, pos]
    return out
