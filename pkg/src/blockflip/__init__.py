"""Quantum block spin-flip dynamics on bipartite systems."""

from ._backend import BACKEND
from .correlations import (
    CorrelationReport,
    ObservablePair,
    QuasiAbelianDiagnosis,
    abelian_decomposition_from_zeros,
    correlation,
    correlation_report,
    correlation_series_terms,
    density_experiment,
    factorization_criterion,
    factorized_value,
    perturb_nondegenerate,
    perturb_nonfactorizable,
    quasi_abelian_diagnose,
    sqrt_separable,
    truncated_correlation,
)
from .dynamics import SpinFlipModel, build_model
from .linalg import BipartiteDims, HermitianEig
from .states import (
    BellDiagonalParams,
    ClosedFormDual,
    SeparableDecomposition,
    bell_reference,
    closed_form_dual,
    decomposition_equivalence,
    entanglement_onset,
    ppt_check,
    random_separable,
    separation_bound,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BellDiagonalParams",
    "BipartiteDims",
    "ClosedFormDual",
    "CorrelationReport",
    "HermitianEig",
    "ObservablePair",
    "QuasiAbelianDiagnosis",
    "SeparableDecomposition",
    "SpinFlipModel",
    "abelian_decomposition_from_zeros",
    "bell_reference",
    "build_model",
    "closed_form_dual",
    "correlation",
    "correlation_report",
    "correlation_series_terms",
    "decomposition_equivalence",
    "density_experiment",
    "entanglement_onset",
    "factorization_criterion",
    "factorized_value",
    "perturb_nondegenerate",
    "perturb_nonfactorizable",
    "ppt_check",
    "quasi_abelian_diagnose",
    "random_separable",
    "separation_bound",
    "sqrt_separable",
    "truncated_correlation",
]
