"""Discrete Bayesian-network classification: softmax extraction, identifiability
probing, prequential criteria and structure averaging."""

from .criteria import (
    CriterionKind,
    CriterionReport,
    class_sequential_exact,
    class_sequential_monte_carlo,
    conditional_node_monitor,
    criterion_gap,
    global_criterion,
    is_brc_structure,
)
from .errors import (
    BrcError,
    ConsistencyError,
    DegenerateDistributionError,
    ExtractionError,
    InfeasibleError,
    ValidationError,
)
from .identifiability import (
    RankReport,
    input_distribution_map,
    numerical_jacobian,
    numerical_rank,
    variational_dependence_probe,
)
from .network import (
    DagStructure,
    Dataset,
    DirichletSpec,
    ParameterSet,
    SufficientStats,
    Variable,
    collect_stats,
    conditional_class_dist,
    input_marginal_prob,
    joint_log_prob,
    log_marginal_likelihood,
    posterior_hyperparams,
    predictive_case_log_prob,
    sample_dataset,
)
from .selection import (
    ModelPrior,
    PosteriorTable,
    averaged_class_predictive,
    averaged_joint_predictive,
    enumerate_dags,
    posterior_predictive_class,
    posterior_predictive_joint,
    select_top_k,
    structure_log_posterior,
)
from .softmax import (
    Monomial,
    SoftmaxModel,
    evaluate_softmax,
    extract_linear_softmax,
    extract_polynomial_softmax,
    late_y_ordering,
)

__version__ = "0.1.0"

__all__ = [
    "BrcError",
    "ConsistencyError",
    "CriterionKind",
    "CriterionReport",
    "DagStructure",
    "Dataset",
    "DegenerateDistributionError",
    "DirichletSpec",
    "ExtractionError",
    "InfeasibleError",
    "ModelPrior",
    "Monomial",
    "ParameterSet",
    "PosteriorTable",
    "RankReport",
    "SoftmaxModel",
    "SufficientStats",
    "ValidationError",
    "Variable",
    "averaged_class_predictive",
    "averaged_joint_predictive",
    "class_sequential_exact",
    "class_sequential_monte_carlo",
    "collect_stats",
    "conditional_class_dist",
    "conditional_node_monitor",
    "criterion_gap",
    "enumerate_dags",
    "evaluate_softmax",
    "extract_linear_softmax",
    "extract_polynomial_softmax",
    "global_criterion",
    "input_distribution_map",
    "input_marginal_prob",
    "is_brc_structure",
    "joint_log_prob",
    "late_y_ordering",
    "log_marginal_likelihood",
    "numerical_jacobian",
    "numerical_rank",
    "posterior_hyperparams",
    "posterior_predictive_class",
    "posterior_predictive_joint",
    "predictive_case_log_prob",
    "sample_dataset",
    "select_top_k",
    "structure_log_posterior",
    "variational_dependence_probe",
]
