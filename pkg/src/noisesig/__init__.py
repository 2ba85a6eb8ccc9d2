"""Noise-substitution significance tests and non-significance regions.

The question "does covariate j matter?" is answered operationally: refit
the regression with the excluded covariates replaced by synthetic noise,
and ask how often pure noise does as well as the real columns.  The same
machinery inverts into *non-significance regions* — parameter values the
data cannot distinguish from the fitted ones — which replace confidence
regions without assuming the model is true.

Entry points
------------
- :func:`p_raw`, :func:`p_gamma`, :func:`p_asymptotic`,
  :func:`p_all_subsets` — subset P-values under an L1/Huber/L2 criterion.
- :func:`choose_functional` — the two-step covariate-selection strategy,
  with cut-offs from :mod:`noisesig.calibration`.
- :func:`nonsig_median`, :func:`nonsig_mlocation`,
  :func:`nonsig_l1_component`, :func:`nonsig_m_regression`,
  :func:`nonsig_asymptotic_l1` — non-significance regions.
- :func:`coverage_median`, :func:`coverage_regression` — covering
  frequencies against the rank interval and across error families.
- :class:`NoiseSignificance` — fit/transform estimator front end.
- ``python -m noisesig`` — the command line.
"""

__version__ = "0.1.0"

from .calibration import (DEFAULT_ALPHA_GRID, CutoffTable, chisq_cutoff_table,
                          fit_log_quadratic, nested_cutoff_table,
                          p0_chisq_approx, p0_nested)
from .coverage import (ERROR_FAMILIES, MEDIAN_FAMILIES, GeneratorSpec,
                       coverage_median, coverage_regression, rank_median_ci,
                       regression_truth)
from .datasets import builtin_names, load_builtin, load_csv, read_csv_text, stackloss
from .errors import (CapacityError, DegenerateCurvatureError,
                     DegenerateScaleError, NoisesigError, NoRootError,
                     NumericalError, SingularDesignError, UsageError)
from .fitting import (density_at_zero, fit_huber, fit_l1, fit_l2,
                      fit_objective, mad, mad_scale, smoothing_width)
from .model import (CoverageResult, Dataset, FitResult, NonSigEllipsoid,
                    NonSigInterval, ObjectiveSpec, PValueReport,
                    SelectionOutcome, design_matrix, full_subset, is_subset,
                    subset_members, subset_size, subsets_of)
from .noise import NOISE_KINDS, build_w, noise_matrix
from .pvalues import p_all_subsets, p_asymptotic, p_gamma, p_raw
from .regions import (l1_region_contains, nonsig_asymptotic_l1,
                      nonsig_l1_component, nonsig_m_regression, nonsig_median,
                      nonsig_median_pvalue, nonsig_mlocation)
from .rng import RngStream, normals, uniforms
from .selection import (bic_noise_experiment, bic_rank, choose_functional,
                        relative_pvalue)
from .estimators import NoiseSignificance

__all__ = [
    "__version__",
    # model
    "Dataset", "ObjectiveSpec", "FitResult", "PValueReport",
    "NonSigInterval", "NonSigEllipsoid", "SelectionOutcome",
    "CoverageResult", "design_matrix", "subsets_of", "subset_size",
    "subset_members", "is_subset", "full_subset",
    # errors
    "NoisesigError", "UsageError", "CapacityError", "NumericalError",
    "SingularDesignError", "DegenerateScaleError",
    "DegenerateCurvatureError", "NoRootError",
    # data
    "stackloss", "builtin_names", "load_builtin", "load_csv",
    "read_csv_text",
    # rng + noise
    "RngStream", "uniforms", "normals", "NOISE_KINDS", "noise_matrix",
    "build_w",
    # fitting
    "fit_l1", "fit_l2", "fit_huber", "fit_objective", "mad", "mad_scale",
    "density_at_zero", "smoothing_width",
    # p-values
    "p_raw", "p_gamma", "p_asymptotic", "p_all_subsets",
    # calibration
    "CutoffTable", "p0_nested", "p0_chisq_approx", "fit_log_quadratic",
    "chisq_cutoff_table", "nested_cutoff_table", "DEFAULT_ALPHA_GRID",
    # selection
    "relative_pvalue", "choose_functional", "bic_rank",
    "bic_noise_experiment",
    # regions
    "nonsig_median", "nonsig_median_pvalue", "nonsig_mlocation",
    "nonsig_l1_component", "l1_region_contains", "nonsig_m_regression",
    "nonsig_asymptotic_l1",
    # coverage
    "GeneratorSpec", "MEDIAN_FAMILIES", "ERROR_FAMILIES", "rank_median_ci",
    "coverage_median", "coverage_regression", "regression_truth",
    # estimator
    "NoiseSignificance",
]
