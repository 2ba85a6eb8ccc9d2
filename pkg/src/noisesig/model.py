"""Core domain types: datasets, covariate-subset codes, objectives, results.

A covariate subset ``e`` over ``k`` covariates is encoded as the integer
``sum(e_j * 2**(j-1))`` — bit ``j-1`` set means covariate ``j`` is kept.
The intercept is always part of every fit and is never encoded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CapacityError, UsageError
from .validation import as_matrix, as_vector

MAX_ENUMERATED_COVARIATES = 24

__all__ = [
    "Dataset",
    "ObjectiveSpec",
    "FitResult",
    "PValueReport",
    "NonSigInterval",
    "NonSigEllipsoid",
    "SelectionOutcome",
    "CoverageResult",
    "subsets_of",
    "subset_size",
    "subset_members",
    "is_subset",
    "full_subset",
    "design_matrix",
]


# ---------------------------------------------------------------------------
# Dataset


@dataclass(frozen=True)
class Dataset:
    """A response vector with named covariates.

    Invariants: n >= 2 rows, k >= 1 covariates, all entries finite,
    covariate names unique.
    """

    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...]
    response_name: str = "y"

    def __post_init__(self):
        y = as_vector(self.y, "y")
        X = as_matrix(self.X, "X")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", tuple(str(s) for s in self.names))
        if X.shape[0] != y.shape[0]:
            raise UsageError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if y.shape[0] < 2:
            raise UsageError("need at least 2 observations")
        if X.shape[1] < 1:
            raise UsageError("need at least 1 covariate")
        if len(self.names) != X.shape[1]:
            raise UsageError(
                f"{len(self.names)} names for {X.shape[1]} covariates")
        if len(set(self.names)) != len(self.names):
            raise UsageError("covariate names must be unique")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def column(self, name: str) -> int:
        """0-based index of a covariate by name."""
        try:
            return self.names.index(name)
        except ValueError:
            raise UsageError(
                f"unknown covariate {name!r}; have {', '.join(self.names)}"
            ) from None

    def restrict(self, e: int) -> "Dataset":
        """Dataset keeping only the covariates of subset ``e``."""
        cols = subset_members(e, self.k)
        if not cols:
            raise UsageError("cannot restrict to an empty covariate set")
        return Dataset(self.y, self.X[:, cols],
                       tuple(self.names[j] for j in cols), self.response_name)


# ---------------------------------------------------------------------------
# Subset codes


def _check_code(e: int, k: int) -> int:
    e = int(e)
    if not (0 <= e < (1 << k)):
        raise UsageError(f"subset code {e} out of range for k={k}")
    return e


def subsets_of(k: int) -> list[int]:
    """All subset codes for ``k`` covariates, ascending."""
    k = int(k)
    if not (1 <= k <= MAX_ENUMERATED_COVARIATES):
        raise CapacityError(
            f"subset enumeration needs 1 <= k <= {MAX_ENUMERATED_COVARIATES}, "
            f"got k={k} (2**k subsets)")
    return list(range(1 << k))


def subset_size(e: int) -> int:
    """Number of covariates in the subset (popcount)."""
    return int(e).bit_count()


def subset_members(e: int, k: int) -> list[int]:
    """0-based covariate indices in ``e``, ascending."""
    e = _check_code(e, k)
    return [j for j in range(k) if e >> j & 1]


def is_subset(e_inner: int, e_outer: int) -> bool:
    """True when every covariate of ``e_inner`` is in ``e_outer``."""
    return (int(e_inner) & ~int(e_outer)) == 0


def full_subset(k: int) -> int:
    return (1 << int(k)) - 1


def design_matrix(d: Dataset, e: int) -> np.ndarray:
    """Intercept column followed by the covariates of ``e`` in ascending order."""
    cols = subset_members(e, d.k)
    out = np.empty((d.n, len(cols) + 1))
    out[:, 0] = 1.0
    for pos, j in enumerate(cols, start=1):
        out[:, pos] = d.X[:, j]
    return out


# ---------------------------------------------------------------------------
# Objective specification


@dataclass(frozen=True)
class ObjectiveSpec:
    """Which fit criterion to use.

    kind "l1"     — least absolute deviations, realised as a Huber fit
                    with c = 0.01 (smoothed modulus).
    kind "huber"  — Huber M-fit with tuning constant ``c`` (> 0).
    kind "l2"     — exact least squares (closed form, not a Huber limit).

    ``sigma`` optionally fixes the residual scale used inside the Huber
    rho; by default it is the 1.4826-scaled MAD of the full-model L1
    residuals, computed from the data at hand.
    """

    kind: str = "l1"
    c: float = 1.345
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("l1", "huber", "l2"):
            raise UsageError(f"unknown objective kind {self.kind!r}")
        if self.kind == "huber" and not (float(self.c) > 0):
            raise UsageError(f"Huber tuning constant must be > 0, got {self.c}")
        if self.sigma is not None and not (float(self.sigma) > 0):
            raise UsageError(f"sigma must be > 0, got {self.sigma}")

    @classmethod
    def parse(cls, text: str) -> "ObjectiveSpec":
        """Parse 'l1', 'l2' or 'huber:<c>'."""
        t = text.strip().lower()
        if t in ("l1", "l2"):
            return cls(kind=t)
        if t == "huber":
            return cls(kind="huber")
        if t.startswith("huber:"):
            try:
                c = float(t.split(":", 1)[1])
            except ValueError:
                raise UsageError(f"bad Huber constant in {text!r}") from None
            return cls(kind="huber", c=c)
        raise UsageError(f"unknown objective {text!r} (use l1, l2 or huber:<c>)")

    def label(self) -> str:
        return {"l1": "l1", "l2": "l2"}.get(self.kind) or f"huber:{self.c:g}"


# ---------------------------------------------------------------------------
# Results


@dataclass(frozen=True)
class FitResult:
    """One functional fitted on one covariate subset.

    ``objective`` is the mean per-observation loss: mean |r| for L1,
    mean rho_c(r/sigma) for Huber, mean r**2 for L2.
    """

    beta: np.ndarray
    residuals: np.ndarray
    objective: float
    subset: int
    converged: bool = True
    iterations: int = 0


@dataclass(frozen=True)
class PValueReport:
    """P-values of one subset under one objective.

    Any of the three P-values may be absent (None) depending on the
    method requested.  ``objective_subset``/``objective_full`` are the
    plain (unsmoothed) objective values of the subset and full fits.
    """

    subset: int
    p_raw: Optional[float] = None
    p_gamma: Optional[float] = None
    p_asymptotic: Optional[float] = None
    n_sims: int = 0
    gamma_shape: Optional[float] = None
    gamma_scale: Optional[float] = None
    objective_full: float = float("nan")
    objective_subset: float = float("nan")
    degenerate_gamma_fit: bool = False

    def best(self) -> float:
        """The P-value by the most direct available method."""
        for p in (self.p_raw, self.p_gamma, self.p_asymptotic):
            if p is not None:
                return p
        raise UsageError("report carries no P-value")


@dataclass(frozen=True)
class NonSigInterval:
    """A one-dimensional non-significance region."""

    lower: float
    upper: float
    alpha: float
    method: str = "simulated-bisection"
    sims_per_quantile: int = 0
    bisection_tolerance: float = float("nan")

    def __post_init__(self):
        if self.lower > self.upper:
            raise UsageError(
                f"interval endpoints out of order: ({self.lower}, {self.upper})")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class NonSigEllipsoid:
    """An ellipsoidal non-significance region for coefficient vectors."""

    center: np.ndarray
    shape: np.ndarray
    radius2: float
    alpha: float
    method: str = "asymptotic"

    def contains(self, beta: Sequence[float]) -> bool:
        delta = np.asarray(beta, float) - self.center
        return float(delta @ self.shape @ delta) <= self.radius2 + 1e-12


@dataclass(frozen=True)
class SelectionOutcome:
    """Result of the two-step functional-choice strategy."""

    survivors_step1: tuple[int, ...]
    survivors_step2: tuple[int, ...]
    chosen: Optional[int]
    alpha: float
    cutoffs: dict = field(default_factory=dict)
    reports: tuple[PValueReport, ...] = ()


@dataclass(frozen=True)
class CoverageResult:
    """Covering frequency and mean length of one interval method."""

    covering_frequency: float
    mean_length: float
    method: str
    replicates: int
