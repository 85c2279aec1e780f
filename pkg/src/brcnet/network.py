"""Discrete Bayesian networks with Dirichlet priors.

Conventions used throughout the package:

* States of a variable with cardinality ``r`` are the integers ``0..r-1``.
* A CPT for node ``i`` is an array of shape ``(q_i, r_i)`` where ``q_i`` is the
  number of parent configurations.  The row index of a parent configuration is
  a mixed-radix number with the FIRST parent in the parent list most
  significant.
* An "x assignment" lists the states of every non-class variable in ascending
  variable-index order.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ConsistencyError, DegenerateDistributionError, ValidationError

ROW_SUM_TOL = 1e-12
LML_AGREEMENT_TOL = 1e-9


@dataclass(frozen=True)
class Variable:
    name: str
    cardinality: int

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValidationError(f"variable name must be a non-empty string, got {self.name!r}")
        if int(self.cardinality) != self.cardinality or self.cardinality < 2:
            raise ValidationError(
                f"variable {self.name!r}: cardinality must be an integer >= 2, got {self.cardinality!r}"
            )
        object.__setattr__(self, "cardinality", int(self.cardinality))


@dataclass(frozen=True)
class DagStructure:
    """A DAG over finite-state variables with one designated class variable."""

    variables: tuple[Variable, ...]
    parents: tuple[tuple[int, ...], ...]
    class_index: int
    _topo: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        variables = tuple(self.variables)
        parents = tuple(tuple(int(p) for p in ps) for ps in self.parents)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "parents", parents)
        n = len(variables)
        names = [v.name for v in variables]
        if len(set(names)) != n:
            raise ValidationError(f"variable names must be unique: {names}")
        if len(parents) != n:
            raise ValidationError(f"expected {n} parent lists, got {len(parents)}")
        for i, ps in enumerate(parents):
            if len(set(ps)) != len(ps):
                raise ValidationError(f"duplicate parent for {names[i]!r}")
            for p in ps:
                if not 0 <= p < n:
                    raise ValidationError(f"parent index {p} out of range for {names[i]!r}")
                if p == i:
                    raise ValidationError(f"{names[i]!r} lists itself as a parent")
        if not (isinstance(self.class_index, (int, np.integer)) and 0 <= self.class_index < n):
            raise ValidationError(f"class_index {self.class_index!r} is not a valid variable index")
        object.__setattr__(self, "class_index", int(self.class_index))
        object.__setattr__(self, "_topo", _topological_order(parents))

    @classmethod
    def from_edges(cls, variables, edges, class_name):
        """Build from ``(parent name, child name)`` pairs; parent order follows edge order."""
        variables = tuple(variables)
        index = {v.name: i for i, v in enumerate(variables)}
        parents = [[] for _ in variables]
        for a, b in edges:
            if a not in index or b not in index:
                raise ValidationError(f"edge ({a!r}, {b!r}) names an unknown variable")
            parents[index[b]].append(index[a])
        if class_name not in index:
            raise ValidationError(f"class variable {class_name!r} is not declared")
        return cls(variables, tuple(tuple(p) for p in parents), index[class_name])

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.variables)

    @property
    def class_cardinality(self) -> int:
        return self.variables[self.class_index].cardinality

    @property
    def input_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if i != self.class_index)

    def topological_order(self) -> tuple[int, ...]:
        """Topological order, ties broken by ascending variable index."""
        return self._topo

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"unknown variable {name!r}") from None

    def children(self, i: int) -> tuple[int, ...]:
        return tuple(j for j, ps in enumerate(self.parents) if i in ps)

    def edges(self) -> list[tuple[int, int]]:
        return [(p, j) for j, ps in enumerate(self.parents) for p in ps]

    def row_count(self, i: int) -> int:
        return math.prod(self.variables[p].cardinality for p in self.parents[i])

    def table_shape(self, i: int) -> tuple[int, int]:
        return (self.row_count(i), self.variables[i].cardinality)

    def row_index(self, i: int, assignment: Sequence[int]) -> int:
        """Mixed-radix parent configuration index of node ``i`` (first parent most significant)."""
        row = 0
        for p in self.parents[i]:
            row = row * self.variables[p].cardinality + int(assignment[p])
        return row

    def row_indices(self, i: int, cases: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`row_index` over an ``(N, n)`` case matrix."""
        rows = np.zeros(cases.shape[0], dtype=np.int64)
        for p in self.parents[i]:
            rows = rows * self.variables[p].cardinality + cases[:, p]
        return rows

    def key(self) -> str:
        """Canonical identity: row-major adjacency bitstring, bit (i, j) set iff i -> j."""
        bits = [["0"] * self.n for _ in range(self.n)]
        for p, j in self.edges():
            bits[p][j] = "1"
        return "".join("".join(row) for row in bits)

    def with_parents(self, parents) -> "DagStructure":
        return DagStructure(self.variables, tuple(tuple(p) for p in parents), self.class_index)


def _topological_order(parents) -> tuple[int, ...]:
    n = len(parents)
    indeg = [len(ps) for ps in parents]
    children = [[] for _ in range(n)]
    for j, ps in enumerate(parents):
        for p in ps:
            children[p].append(j)
    heap = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        i = heapq.heappop(heap)
        order.append(i)
        for c in children[i]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != n:
        raise ValidationError("parent relation contains a cycle")
    return tuple(order)


def _freeze(arrays, dtype) -> tuple[np.ndarray, ...]:
    out = []
    for a in arrays:
        a = np.array(a, dtype=dtype)
        if a.ndim != 2:
            raise ValidationError(f"tables must be 2-D, got shape {a.shape}")
        a.setflags(write=False)
        out.append(a)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class _Tables:
    tables: tuple[np.ndarray, ...]

    _dtype = float

    def __post_init__(self):
        object.__setattr__(self, "tables", _freeze(self.tables, self._dtype))
        self._validate()

    def _validate(self):
        pass

    def check_shapes(self, structure: DagStructure) -> None:
        if len(self.tables) != structure.n:
            raise ValidationError(
                f"{type(self).__name__} has {len(self.tables)} tables, structure has {structure.n} nodes"
            )
        for i, t in enumerate(self.tables):
            if t.shape != structure.table_shape(i):
                raise ValidationError(
                    f"{type(self).__name__} table for {structure.names[i]!r} has shape {t.shape}, "
                    f"expected {structure.table_shape(i)}"
                )

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and len(self.tables) == len(other.tables)
            and all(a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.tables, other.tables))
        )

    __hash__ = None


class ParameterSet(_Tables):
    """Conditional probability tables, one per node."""

    def _validate(self):
        for t in self.tables:
            if not np.all(np.isfinite(t)) or t.min(initial=0.0) < 0 or t.max(initial=0.0) > 1:
                raise ValidationError("probabilities must lie in [0, 1]")
            if np.any(np.abs(t.sum(axis=1) - 1.0) > ROW_SUM_TOL):
                raise ValidationError("every CPT row must sum to 1")

    @classmethod
    def uniform(cls, structure: DagStructure) -> "ParameterSet":
        return cls(tuple(np.full(structure.table_shape(i), 1.0 / structure.variables[i].cardinality)
                         for i in range(structure.n)))


class DirichletSpec(_Tables):
    """Dirichlet hyperparameters alpha_ijk, same shape as the CPTs."""

    def _validate(self):
        for t in self.tables:
            if not np.all(np.isfinite(t)) or np.any(t <= 0):
                raise ValidationError("Dirichlet hyperparameters must be finite and > 0")

    @classmethod
    def uniform(cls, structure: DagStructure, alpha: float = 1.0) -> "DirichletSpec":
        return cls(tuple(np.full(structure.table_shape(i), float(alpha)) for i in range(structure.n)))


class SufficientStats(_Tables):
    """Counts N_ijk of cases with node i in state k and parents in configuration j."""

    _dtype = np.int64

    def _validate(self):
        for t in self.tables:
            if np.any(t < 0):
                raise ValidationError("counts must be nonnegative")
        totals = {int(t.sum()) for t in self.tables}
        if len(totals) > 1:
            raise ValidationError(f"per-node totals differ: {sorted(totals)}")

    @classmethod
    def zeros(cls, structure: DagStructure) -> "SufficientStats":
        return cls(tuple(np.zeros(structure.table_shape(i), dtype=np.int64) for i in range(structure.n)))

    @property
    def case_count(self) -> int:
        return int(self.tables[0].sum()) if self.tables else 0


@dataclass(frozen=True, eq=False)
class Dataset:
    """Complete cases; ``rows[l, c]`` is the state of column ``columns[c]`` in case ``l``."""

    columns: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        columns = tuple(self.columns)
        rows = np.array(self.rows, dtype=np.int64).reshape(-1, len(columns))
        rows.setflags(write=False)
        if len(set(columns)) != len(columns):
            raise ValidationError(f"duplicate dataset columns: {columns}")
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "rows", rows)

    def __len__(self):
        return self.rows.shape[0]

    def __eq__(self, other):
        return (isinstance(other, Dataset) and self.columns == other.columns
                and np.array_equal(self.rows, other.rows))

    __hash__ = None

    @classmethod
    def empty(cls, structure: DagStructure) -> "Dataset":
        return cls(structure.names, np.zeros((0, structure.n), dtype=np.int64))

    @classmethod
    def from_cases(cls, structure: DagStructure, cases) -> "Dataset":
        cases = np.asarray(cases, dtype=np.int64).reshape(-1, structure.n)
        return cls(structure.names, cases)

    def append(self, case) -> "Dataset":
        return Dataset(self.columns, np.vstack([self.rows, np.asarray(case, dtype=np.int64)[None, :]]))

    def head(self, count: int) -> "Dataset":
        return Dataset(self.columns, self.rows[:count])

    def permuted(self, order) -> "Dataset":
        return Dataset(self.columns, self.rows[np.asarray(order)])


def aligned_cases(structure: DagStructure, dataset: Dataset) -> np.ndarray:
    """Dataset rows reordered into the structure's variable order, validated."""
    if set(dataset.columns) != set(structure.names) or len(dataset.columns) != structure.n:
        missing = set(structure.names) - set(dataset.columns)
        extra = set(dataset.columns) - set(structure.names)
        raise ValidationError(f"dataset columns do not match structure (missing {sorted(missing)}, "
                              f"unknown {sorted(extra)})")
    order = [dataset.columns.index(name) for name in structure.names]
    cases = dataset.rows[:, order]
    if cases.size:
        cards = np.array(structure.cardinalities)
        bad = (cases < 0) | (cases >= cards)
        if bad.any():
            l, c = np.argwhere(bad)[0]
            raise ValidationError(
                f"case {l}: state {cases[l, c]} invalid for {structure.names[c]!r} "
                f"(cardinality {cards[c]})"
            )
    return cases


def check_assignment(structure: DagStructure, assignment) -> tuple[int, ...]:
    values = tuple(int(a) for a in assignment)
    if len(values) != structure.n:
        raise ValidationError(f"assignment has {len(values)} entries, structure has {structure.n} variables")
    for i, (v, var) in enumerate(zip(values, structure.variables)):
        if not 0 <= v < var.cardinality:
            raise ValidationError(f"state {v} invalid for {var.name!r} (cardinality {var.cardinality})")
    return values


def full_assignment(structure: DagStructure, x_assignment, y: int) -> tuple[int, ...]:
    """Insert class state ``y`` into an x assignment."""
    if isinstance(x_assignment, Mapping):
        x_assignment = [x_assignment[structure.names[i]] for i in structure.input_indices]
    x = list(x_assignment)
    if len(x) != structure.n - 1:
        raise ValidationError(f"x assignment has {len(x)} entries, expected {structure.n - 1}")
    full = x[: structure.class_index] + [y] + x[structure.class_index:]
    return check_assignment(structure, full)


def all_assignments(cardinalities: Sequence[int]) -> np.ndarray:
    """Every configuration in mixed-radix order (first variable most significant)."""
    cardinalities = tuple(cardinalities)
    if not cardinalities:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices(cardinalities).reshape(len(cardinalities), -1).T
    return grids.astype(np.int64)


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


def joint_log_prob(structure: DagStructure, params: ParameterSet, assignment) -> float:
    """log p(z | theta, m) as the sum of local log-probabilities."""
    params.check_shapes(structure)
    z = check_assignment(structure, assignment)
    total = 0.0
    for i in range(structure.n):
        total += _log(params.tables[i][structure.row_index(i, z), z[i]])
    return total


def _class_log_joints(structure, params, x_assignment) -> np.ndarray:
    r = structure.class_cardinality
    return np.array([joint_log_prob(structure, params, full_assignment(structure, x_assignment, y))
                     for y in range(r)])


def conditional_class_dist(structure: DagStructure, params: ParameterSet, x_assignment) -> np.ndarray:
    """p(y | x, theta, m) by enumeration over the class states."""
    logs = _class_log_joints(structure, params, x_assignment)
    if np.all(np.isneginf(logs)):
        raise DegenerateDistributionError("every class state has zero joint probability for this x")
    return np.exp(logs - logsumexp(logs))


def input_marginal_prob(structure: DagStructure, params: ParameterSet, x_assignment) -> float:
    """p(x | theta, m) = sum over class states of the joint."""
    logs = _class_log_joints(structure, params, x_assignment)
    if np.all(np.isneginf(logs)):
        return 0.0
    return float(np.exp(logsumexp(logs)))


def collect_stats(structure: DagStructure, dataset: Dataset) -> SufficientStats:
    cases = aligned_cases(structure, dataset)
    return SufficientStats(_count_tables(structure, cases))


def _count_tables(structure, cases) -> tuple[np.ndarray, ...]:
    tables = []
    for i in range(structure.n):
        q, r = structure.table_shape(i)
        cells = structure.row_indices(i, cases) * r + cases[:, i]
        tables.append(np.bincount(cells, minlength=q * r).reshape(q, r).astype(np.int64))
    return tuple(tables)


def posterior_hyperparams(prior: DirichletSpec, stats: SufficientStats) -> DirichletSpec:
    if len(prior.tables) != len(stats.tables) or any(
        a.shape != n.shape for a, n in zip(prior.tables, stats.tables)
    ):
        raise ValidationError("prior and sufficient statistics have mismatched shapes")
    return DirichletSpec(tuple(a + n for a, n in zip(prior.tables, stats.tables)))


def _predictive_from_arrays(structure, alphas, counts, z) -> float:
    total = 0.0
    for i in range(structure.n):
        j = structure.row_index(i, z)
        a, c = alphas[i][j], counts[i][j]
        total += math.log((a[z[i]] + c[z[i]]) / (a.sum() + c.sum()))
    return total


def predictive_case_log_prob(structure: DagStructure, prior: DirichletSpec,
                             history: SufficientStats, case) -> float:
    """log p(case | history, m) under Dirichlet posterior predictives."""
    prior.check_shapes(structure)
    history.check_shapes(structure)
    z = check_assignment(structure, case)
    return _predictive_from_arrays(structure, prior.tables, history.tables, z)


def sequential_log_terms(structure: DagStructure, prior: DirichletSpec, dataset: Dataset) -> np.ndarray:
    """Per-case chain-rule terms log p(z_l | z_1..z_{l-1}, m)."""
    prior.check_shapes(structure)
    cases = aligned_cases(structure, dataset)
    counts = [np.zeros(structure.table_shape(i)) for i in range(structure.n)]
    terms = np.empty(cases.shape[0])
    for l, z in enumerate(cases):
        terms[l] = _predictive_from_arrays(structure, prior.tables, counts, z)
        for i in range(structure.n):
            counts[i][structure.row_index(i, z), z[i]] += 1
    return terms


def log_marginal_likelihood_closed_form(structure: DagStructure, prior: DirichletSpec,
                                        stats: SufficientStats) -> float:
    """Product of Gamma-function ratios over nodes, rows and cells."""
    total = 0.0
    for a, c in zip(prior.tables, stats.tables):
        total += float(np.sum(gammaln(a.sum(axis=1)) - gammaln(a.sum(axis=1) + c.sum(axis=1))))
        total += float(np.sum(gammaln(a + c) - gammaln(a)))
    return total


def log_marginal_likelihood(structure: DagStructure, prior: DirichletSpec, dataset: Dataset) -> float:
    """log p(D | m), computed by the chain rule and checked against the closed form."""
    sequential = math.fsum(sequential_log_terms(structure, prior, dataset))
    closed = log_marginal_likelihood_closed_form(structure, prior, collect_stats(structure, dataset))
    if abs(sequential - closed) > LML_AGREEMENT_TOL + 1e-12 * abs(closed):
        raise ConsistencyError(f"chain-rule LML {sequential!r} disagrees with closed form {closed!r}")
    return sequential


def sample_dataset(structure: DagStructure, params: ParameterSet, n: int, seed: int) -> Dataset:
    """Ancestral sampling with numpy's PCG64 generator (``default_rng(seed)``)."""
    if n < 0:
        raise ValidationError("case count must be >= 0")
    params.check_shapes(structure)
    rng = np.random.default_rng(seed)
    cases = np.zeros((n, structure.n), dtype=np.int64)
    for i in structure.topological_order():
        rows = structure.row_indices(i, cases)
        cum = np.cumsum(params.tables[i], axis=1)
        u = rng.random(n)
        states = (u[:, None] >= cum[rows]).sum(axis=1)
        cases[:, i] = np.minimum(states, structure.variables[i].cardinality - 1)
    return Dataset(structure.names, cases)
