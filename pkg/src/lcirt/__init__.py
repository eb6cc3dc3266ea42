"""Latent-class multidimensional IRT models for ordinal items.

Estimation is by EM with a Fisher-scoring M-step; model selection follows a
four-step procedure (latent classes, link, dimensionality, constraints)
driven by BIC and likelihood-ratio tests.
"""

from lcirt.data import ResponseDataset, load_csv, marginal_distribution, raw_score, read_rows
from lcirt.errors import (
    DataError,
    FailedOptimizationError,
    LcirtError,
    NumericUnderflowError,
    SelectionError,
    SpecError,
    UsageError,
)
from lcirt.estimate import (
    Controls,
    FitResult,
    compute_bic,
    e_step,
    expected_complete_loglik,
    fisher_scores,
    fit_em,
    fit_multistart,
    fit_standard_lc,
    log_likelihood,
)
from lcirt.link import LinkKind, canonical_jacobian, logits_to_probs, probs_to_logits
from lcirt.model import (
    Difficulty,
    Discrimination,
    ModelSpec,
    Parameters,
    count_free_parameters,
    count_standard_lc_parameters,
    embed,
    manifest_prob,
    name_model,
    validate,
)
from lcirt.select import (
    LrTestResult,
    ModelSummary,
    PipelineConfig,
    Regime,
    SelectionReport,
    choose_item_constraints,
    choose_k,
    choose_link,
    lr_test,
    run_selection_pipeline,
)
from lcirt.sim import SimConfig, recovery_report, sample_dataset, sample_rows
from lcirt.special import chi_square_sf

__version__ = "0.1.0"

__all__ = [
    "Controls",
    "DataError",
    "Difficulty",
    "Discrimination",
    "FailedOptimizationError",
    "FitResult",
    "LcirtError",
    "LinkKind",
    "LrTestResult",
    "ModelSpec",
    "ModelSummary",
    "NumericUnderflowError",
    "Parameters",
    "PipelineConfig",
    "Regime",
    "ResponseDataset",
    "SelectionError",
    "SelectionReport",
    "SimConfig",
    "SpecError",
    "UsageError",
    "canonical_jacobian",
    "chi_square_sf",
    "choose_item_constraints",
    "choose_k",
    "choose_link",
    "compute_bic",
    "count_free_parameters",
    "count_standard_lc_parameters",
    "e_step",
    "embed",
    "expected_complete_loglik",
    "fisher_scores",
    "fit_em",
    "fit_multistart",
    "fit_standard_lc",
    "load_csv",
    "log_likelihood",
    "logits_to_probs",
    "lr_test",
    "manifest_prob",
    "marginal_distribution",
    "name_model",
    "probs_to_logits",
    "raw_score",
    "read_rows",
    "recovery_report",
    "run_selection_pipeline",
    "sample_dataset",
    "sample_rows",
    "validate",
]
