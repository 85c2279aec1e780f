"""Exhaustive structure enumeration, structure posteriors, and model averaging."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .criteria import (
    DEFAULT_COMPLETION_CAP,
    class_sequential_exact,
    class_sequential_monte_carlo,
    conditional_node_monitor,
)
from .errors import InfeasibleError, ValidationError
from .network import (
    DagStructure,
    Dataset,
    DirichletSpec,
    Variable,
    _topological_order,
    collect_stats,
    full_assignment,
    log_marginal_likelihood,
    predictive_case_log_prob,
)

MAX_UNCAPPED_NODES = 5
MAX_CAPPED_NODES = 6
RANKING_CRITERIA = ("posterior", "lml", "cnm", "csc", "csc-mc")

DirichletDefaults = float | Callable[[DagStructure], DirichletSpec]


def prior_for(structure: DagStructure, dirichlet_defaults: DirichletDefaults = 1.0) -> DirichletSpec:
    """Hyperparameters for a structure: a scalar alpha in every cell, or a callable."""
    if callable(dirichlet_defaults):
        return dirichlet_defaults(structure)
    return DirichletSpec.uniform(structure, float(dirichlet_defaults))


@dataclass(frozen=True)
class ModelPrior:
    """Structure prior keyed by :meth:`DagStructure.key`; ``None`` means uniform.

    Structures absent from ``weights`` get weight 0.  Weights are normalized
    over whatever family they are applied to.
    """

    weights: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.weights is not None:
            if any(w < 0 or not math.isfinite(w) for w in self.weights.values()):
                raise ValidationError("structure prior weights must be finite and >= 0")
            object.__setattr__(self, "weights", dict(self.weights))

    def log_weights(self, structures: Sequence[DagStructure]) -> np.ndarray:
        if self.weights is None:
            return np.full(len(structures), -math.log(len(structures)))
        raw = np.array([self.weights.get(s.key(), 0.0) for s in structures])
        if raw.sum() <= 0:
            raise ValidationError("structure prior puts zero mass on every enumerated structure")
        with np.errstate(divide="ignore"):
            return np.log(raw / raw.sum())


@dataclass(frozen=True)
class PosteriorEntry:
    structure: DagStructure
    log_marginal_likelihood: float
    log_prior: float
    log_posterior: float


@dataclass(frozen=True)
class PosteriorTable:
    entries: tuple[PosteriorEntry, ...]
    log_normalizer: float

    def __len__(self):
        return len(self.entries)

    @property
    def structures(self) -> tuple[DagStructure, ...]:
        return tuple(e.structure for e in self.entries)

    def posteriors(self) -> np.ndarray:
        return np.exp([e.log_posterior for e in self.entries])


def enumerate_parent_sets(n: int, max_parents: int | None = None) -> list[tuple[tuple[int, ...], ...]]:
    """Parent lists of every labeled DAG on ``n`` nodes (n = 0 yields the empty graph)."""
    limit = MAX_UNCAPPED_NODES if max_parents is None else MAX_CAPPED_NODES
    if n > limit:
        raise InfeasibleError(f"exhaustive enumeration over {n} variables exceeds the bound of {limit}")
    cap = max(n - 1, 0) if max_parents is None else min(max_parents, max(n - 1, 0))
    options = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        options.append([c for size in range(cap + 1) for c in itertools.combinations(others, size)])

    found = []
    parents: list[tuple[int, ...]] = [()] * n

    def extend(i):
        if i == n:
            found.append(tuple(parents))
            return
        for choice in options[i]:
            parents[i] = choice
            if _acyclic(parents):
                extend(i + 1)
        parents[i] = ()

    extend(0)
    return found


def enumerate_dags(variables: Sequence[Variable], class_index: int,
                   max_parents: int | None = None) -> list[DagStructure]:
    """All labeled DAGs over ``variables``, sorted by adjacency bitstring."""
    variables = tuple(variables)
    found = [DagStructure(variables, ps, class_index)
             for ps in enumerate_parent_sets(len(variables), max_parents)]
    found.sort(key=lambda s: s.key())
    return found


def _acyclic(parents) -> bool:
    try:
        _topological_order(parents)
    except ValidationError:
        return False
    return True


def structure_log_posterior(structures: Sequence[DagStructure], model_prior: ModelPrior,
                            dirichlet_defaults: DirichletDefaults, dataset: Dataset) -> PosteriorTable:
    """p(m | D) for every structure, normalized with log-sum-exp, in canonical order."""
    if not structures:
        raise ValidationError("need at least one structure")
    ordered = sorted(structures, key=lambda s: s.key())
    log_prior = model_prior.log_weights(ordered)
    lml = np.array([log_marginal_likelihood(s, prior_for(s, dirichlet_defaults), dataset) for s in ordered])
    unnorm = log_prior + lml
    norm = float(logsumexp(unnorm))
    entries = tuple(
        PosteriorEntry(s, float(m), float(p), float(u - norm))
        for s, m, p, u in zip(ordered, lml, log_prior, unnorm)
    )
    return PosteriorTable(entries, norm)


def posterior_predictive_joint(structure: DagStructure, prior: DirichletSpec, dataset: Dataset, case) -> float:
    """p(y, x | D, m) for one complete case."""
    return math.exp(predictive_case_log_prob(structure, prior, collect_stats(structure, dataset), case))


def posterior_predictive_class(structure: DagStructure, prior: DirichletSpec, dataset: Dataset,
                               x_assignment) -> np.ndarray:
    """p(y | x, D, m) as the ratio p(y, x | D, m) / p(x | D, m)."""
    stats = collect_stats(structure, dataset)
    logs = np.array([
        predictive_case_log_prob(structure, prior, stats, full_assignment(structure, x_assignment, k))
        for k in range(structure.class_cardinality)
    ])
    return np.exp(logs - logsumexp(logs))


def averaged_class_predictive(table: PosteriorTable, dirichlet_defaults: DirichletDefaults,
                              dataset: Dataset, x_assignment) -> np.ndarray:
    out = 0.0
    for e in table.entries:
        w = math.exp(e.log_posterior)
        if w == 0.0:
            continue
        prior = prior_for(e.structure, dirichlet_defaults)
        out = out + w * posterior_predictive_class(e.structure, prior, dataset, x_assignment)
    return np.asarray(out)


def averaged_joint_predictive(table: PosteriorTable, dirichlet_defaults: DirichletDefaults,
                              dataset: Dataset, case) -> float:
    total = 0.0
    for e in table.entries:
        w = math.exp(e.log_posterior)
        if w == 0.0:
            continue
        prior = prior_for(e.structure, dirichlet_defaults)
        total += w * posterior_predictive_joint(e.structure, prior, dataset, case)
    return total


def rank_structures(table: PosteriorTable, criterion: str = "posterior", *, dataset: Dataset | None = None,
                    dirichlet_defaults: DirichletDefaults = 1.0,
                    completion_cap: int = DEFAULT_COMPLETION_CAP,
                    samples: int | None = None, seed: int | None = None) -> list[tuple[DagStructure, float]]:
    """(structure, score) pairs, best first; ties fall back to canonical order."""
    if criterion not in RANKING_CRITERIA:
        raise ValidationError(f"unknown ranking criterion {criterion!r}; choose from {RANKING_CRITERIA}")
    if criterion in ("cnm", "csc", "csc-mc") and dataset is None:
        raise ValidationError(f"criterion {criterion!r} needs the dataset")
    if criterion == "csc-mc" and (samples is None or seed is None):
        raise ValidationError("csc-mc ranking needs samples and seed")
    scored = []
    for e in table.entries:
        s = e.structure
        if criterion == "posterior":
            score = e.log_posterior
        elif criterion == "lml":
            score = e.log_marginal_likelihood
        elif criterion == "cnm":
            score = conditional_node_monitor(s, prior_for(s, dirichlet_defaults), dataset).value
        elif criterion == "csc":
            try:
                score = class_sequential_exact(s, prior_for(s, dirichlet_defaults), dataset, completion_cap).value
            except InfeasibleError as exc:
                raise InfeasibleError(f"{exc}; rank with criterion 'csc-mc' instead") from None
        else:
            score = class_sequential_monte_carlo(s, prior_for(s, dirichlet_defaults), dataset, samples, seed).value
        scored.append((s, float(score)))
    scored.sort(key=lambda pair: (-pair[1], pair[0].key()))
    return scored


def select_top_k(table: PosteriorTable, k: int, criterion: str = "posterior", **criteria_inputs) -> list[DagStructure]:
    """Model selection (k = 1) or selective model averaging (k > 1)."""
    if not 1 <= k <= len(table):
        raise ValidationError(f"k must lie in [1, {len(table)}], got {k}")
    return [s for s, _ in rank_structures(table, criterion, **criteria_inputs)[:k]]
