"""Conversion of a network's class conditional into a softmax regression.

A softmax model stores, for every non-reference class ``k = 1..r-1``, the
log-odds ``lambda_k(x) = log p(y=k|x) - log p(y=0|x)`` as a sum of monomials in
state indicators ``I(x_v = s)``.  Monomials are kept in a canonical basis:
literals sorted by variable index and no literal ever names state 0, so every
function of the inputs has exactly one coefficient set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ExtractionError, ValidationError
from .network import DagStructure, ParameterSet, all_assignments, conditional_class_dist

PRUNE_TOL = 1e-12


@dataclass(frozen=True)
class Monomial:
    """Product of state indicators times a coefficient; no literals means intercept."""

    literals: tuple[tuple[int, int], ...]
    coefficient: float

    def __post_init__(self):
        literals = tuple(sorted((int(v), int(s)) for v, s in self.literals))
        variables = [v for v, _ in literals]
        if len(set(variables)) != len(variables):
            raise ValidationError(f"monomial mentions a variable twice: {literals}")
        if not math.isfinite(self.coefficient):
            raise ValidationError("monomial coefficient must be finite")
        object.__setattr__(self, "literals", literals)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @property
    def degree(self) -> int:
        return len(self.literals)

    def holds(self, states: dict[int, int]) -> bool:
        return all(states[v] == s for v, s in self.literals)


@dataclass(frozen=True)
class SoftmaxModel:
    """Softmax regression with implicit reference class 0 (lambda_0 = 0).

    ``per_class_terms[k - 1]`` holds the monomials of lambda_k.  The variable
    catalog lists ``(variable index, name, cardinality)`` of every input in
    ascending index order, which is also the order of an x assignment.
    """

    class_cardinality: int
    per_class_terms: tuple[tuple[Monomial, ...], ...]
    variable_catalog: tuple[tuple[int, str, int], ...]

    def __post_init__(self):
        terms = tuple(tuple(ms) for ms in self.per_class_terms)
        catalog = tuple((int(i), str(name), int(c)) for i, name, c in self.variable_catalog)
        object.__setattr__(self, "per_class_terms", terms)
        object.__setattr__(self, "variable_catalog", catalog)
        if self.class_cardinality < 2 or len(terms) != self.class_cardinality - 1:
            raise ValidationError("need one term list per non-reference class")
        cards = {i: c for i, _, c in catalog}
        for ms in terms:
            for m in ms:
                for v, s in m.literals:
                    if v not in cards or not 0 <= s < cards[v]:
                        raise ValidationError(f"literal ({v}, {s}) is outside the variable catalog")
                    if s == 0:
                        raise ValidationError(f"literal ({v}, 0) names the reference state")

    def canonical(self) -> tuple[dict[tuple[tuple[int, int], ...], float], ...]:
        """Per-class coefficient maps in the canonical basis, near-zero terms dropped."""
        return tuple(_canonicalize(ms) for ms in self.per_class_terms)


def _canonicalize(monomials) -> dict:
    acc: dict[tuple, float] = {}
    for m in monomials:
        acc[m.literals] = acc.get(m.literals, 0.0) + m.coefficient
    return {k: v for k, v in sorted(acc.items()) if abs(v) >= PRUNE_TOL}


def _states(model: SoftmaxModel, x_assignment) -> dict[int, int]:
    if isinstance(x_assignment, dict):
        x_assignment = [x_assignment[name] for _, name, _ in model.variable_catalog]
    x = list(x_assignment)
    if len(x) != len(model.variable_catalog):
        raise ValidationError(f"x assignment has {len(x)} entries, expected {len(model.variable_catalog)}")
    states = {}
    for (i, name, c), s in zip(model.variable_catalog, x):
        if not 0 <= int(s) < c:
            raise ValidationError(f"state {s} invalid for {name!r} (cardinality {c})")
        states[i] = int(s)
    return states


def log_odds(model: SoftmaxModel, x_assignment) -> np.ndarray:
    """Vector (lambda_0, ..., lambda_{r-1}) with lambda_0 = 0."""
    states = _states(model, x_assignment)
    lam = np.zeros(model.class_cardinality)
    for k, ms in enumerate(model.per_class_terms, start=1):
        lam[k] = math.fsum(m.coefficient for m in ms if m.holds(states))
    return lam


def softmax(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    return np.exp(lam - logsumexp(lam))


def evaluate_softmax(model: SoftmaxModel, x_assignment) -> np.ndarray:
    return softmax(log_odds(model, x_assignment))


def late_y_ordering(structure: DagStructure) -> tuple[tuple[int, ...], int]:
    """Topological order placing the class variable as late as possible.

    Non-descendants of Y come first, then Y, then its descendants; each block
    follows the tie-broken topological order.  Returns ``(ordering, n_h)`` where
    ``n_h`` counts the variables before Y.
    """
    y = structure.class_index
    descendants = set()
    frontier = [y]
    while frontier:
        for c in structure.children(frontier.pop()):
            if c not in descendants:
                descendants.add(c)
                frontier.append(c)
    topo = structure.topological_order()
    before = [i for i in topo if i != y and i not in descendants]
    after = [i for i in topo if i in descendants]
    return tuple(before + [y] + after), len(before)


def is_naive_bayes(structure: DagStructure) -> bool:
    y = structure.class_index
    return not structure.parents[y] and all(structure.parents[i] == (y,) for i in structure.input_indices)


def _catalog(structure: DagStructure):
    return tuple((i, structure.names[i], structure.cardinalities[i]) for i in structure.input_indices)


def _require_positive(structure: DagStructure, params: ParameterSet, node: int) -> np.ndarray:
    table = params.tables[node]
    zeros = np.argwhere(table <= 0)
    if zeros.size:
        j, k = (int(v) for v in zeros[0])
        raise ExtractionError(
            f"zero probability in a retained log-ratio: {structure.names[node]!r} row {j} state {k}",
            cell=(structure.names[node], j, k),
        )
    return np.log(table)


def _monomials(coeffs: dict) -> tuple[Monomial, ...]:
    return tuple(Monomial(lits, c) for lits, c in sorted(coeffs.items()) if abs(c) >= PRUNE_TOL)


def extract_linear_softmax(structure: DagStructure, params: ParameterSet) -> SoftmaxModel:
    """Linear softmax for naive Bayes over binary inputs.

    For class ``k`` the intercept is ``log t(y=k)/t(y=0) + sum_i log t(x_i=0|k)/t(x_i=0|0)``
    and input ``i`` contributes ``I(x_i = 1)`` with weight
    ``log t(x_i=1|k)/t(x_i=1|0) - log t(x_i=0|k)/t(x_i=0|0)``.
    """
    params.check_shapes(structure)
    if not is_naive_bayes(structure):
        raise ValidationError("linear extraction requires a naive Bayes structure")
    for i in structure.input_indices:
        if structure.cardinalities[i] != 2:
            raise ValidationError(f"linear extraction requires binary inputs; {structure.names[i]!r} "
                                  f"has {structure.cardinalities[i]} states")
    y = structure.class_index
    log_y = _require_positive(structure, params, y)[0]
    log_x = {i: _require_positive(structure, params, i) for i in structure.input_indices}
    per_class = []
    for k in range(1, structure.class_cardinality):
        coeffs = {(): log_y[k] - log_y[0]}
        for i in structure.input_indices:
            lt = log_x[i]
            r1 = lt[k, 0] - lt[0, 0]
            r2 = lt[k, 1] - lt[0, 1]
            coeffs[()] += r1
            coeffs[((i, 1),)] = r2 - r1
        per_class.append(_monomials(coeffs))
    return SoftmaxModel(structure.class_cardinality, tuple(per_class), _catalog(structure))


def indicator_expansion(values: np.ndarray, variables: Sequence[int]) -> dict:
    """Coefficients of a function on a product of finite state spaces in the indicator basis.

    ``values`` has one axis per entry of ``variables``.  The result maps literal
    tuples (no reference states) to coefficients such that summing the
    coefficients of every monomial satisfied by a configuration reproduces
    ``values`` at that configuration.
    """
    c = np.array(values, dtype=float)
    for axis in range(c.ndim):
        moved = np.moveaxis(c, axis, 0)
        moved[1:] -= moved[0]
    out = {}
    for idx in np.ndindex(c.shape):
        lits = tuple((variables[a], s) for a, s in enumerate(idx) if s != 0)
        out[lits] = float(c[idx])
    return out


def _term_over_inputs(structure: DagStructure, node: int, log_table: np.ndarray, k: int):
    """Log-ratio of node's CPT between class k and class 0, as an array over its input scope."""
    y = structure.class_index
    cards = structure.cardinalities
    pars = structure.parents[node]
    scope = sorted(({node} if node != y else set()) | {p for p in pars if p != y})
    values = np.zeros(tuple(cards[v] for v in scope))
    for idx in np.ndindex(values.shape):
        z = [0] * structure.n
        for v, s in zip(scope, idx):
            z[v] = s
        z[y] = k
        row_k = structure.row_index(node, z)
        state = z[node] if node != y else k
        z[y] = 0
        row_0 = structure.row_index(node, z)
        ref = z[node] if node != y else 0
        values[idx] = log_table[row_k, state] - log_table[row_0, ref]
    return values, scope


def extract_polynomial_softmax(structure: DagStructure, params: ParameterSet) -> SoftmaxModel:
    """Polynomial softmax regression on state indicators for any discrete network.

    Only the class CPT and the CPTs of descendants that list Y as a direct
    parent contribute; every other factor is identical across classes and
    cancels.
    """
    params.check_shapes(structure)
    y = structure.class_index
    ordering, n_h = late_y_ordering(structure)
    contributing = [y] + [i for i in ordering[n_h + 1:] if y in structure.parents[i]]
    log_tables = {i: _require_positive(structure, params, i) for i in contributing}
    per_class = []
    for k in range(1, structure.class_cardinality):
        coeffs: dict = {}
        for node in contributing:
            values, scope = _term_over_inputs(structure, node, log_tables[node], k)
            for lits, c in indicator_expansion(values, scope).items():
                coeffs[lits] = coeffs.get(lits, 0.0) + c
        per_class.append(_monomials(coeffs))
    return SoftmaxModel(structure.class_cardinality, tuple(per_class), _catalog(structure))


def max_deviation(structure: DagStructure, params: ParameterSet, model: SoftmaxModel) -> float:
    """Largest absolute gap between the softmax and enumeration over every x configuration."""
    worst = 0.0
    for x in all_assignments([structure.cardinalities[i] for i in structure.input_indices]):
        gap = np.abs(evaluate_softmax(model, x) - conditional_class_dist(structure, params, x))
        worst = max(worst, float(gap.max()))
    return worst


def degree_bound(structure: DagStructure) -> int:
    """Largest monomial degree the polynomial extractor can emit for this structure."""
    y = structure.class_index
    bound = len(structure.parents[y])
    kids = [1 + len([p for p in structure.parents[i] if p != y]) for i in structure.children(y)]
    return bound + max(kids, default=0)
