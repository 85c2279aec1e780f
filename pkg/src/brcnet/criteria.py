"""Prequential selection criteria for classification.

* CNM (conditional node monitor): sum over cases of ``log p(y_l | x_l, D_<l)``.
* CSC (class sequential criterion): sum over cases of
  ``log p(y_l | y_<l, x_1..x_N)``, equivalently
  ``log p(y_1..y_N, x_1..x_N) - log p(x_1..x_N)``.
* LML: the global criterion ``log p(D | m)``.

All predictive terms use Dirichlet posterior predictives under parameter
independence.  The input marginal needed by CSC is either summed exactly over
every class completion of the data or estimated by prior-sampling Monte Carlo.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ConsistencyError, InfeasibleError, ValidationError
from .network import (
    DagStructure,
    Dataset,
    DirichletSpec,
    aligned_cases,
    log_marginal_likelihood,
    sequential_log_terms,
)

DEFAULT_COMPLETION_CAP = 2**20
GAP_THRESHOLD = 1e-6
_CHUNK = 1 << 15


class CriterionKind(str, enum.Enum):
    CNM = "CNM"
    CSC_EXACT = "CSC_EXACT"
    CSC_MC = "CSC_MC"
    LML = "LML"


@dataclass(frozen=True)
class CriterionReport:
    criterion_kind: CriterionKind
    value: float
    per_case_terms: tuple[float, ...] = ()
    std_error: float | None = None
    sample_count: int | None = None
    extras: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        out = {
            "criterion": self.criterion_kind.value,
            "value": self.value,
            "per_case_terms": list(self.per_case_terms),
        }
        if self.std_error is not None:
            out["std_error"] = self.std_error
            out["sample_count"] = self.sample_count
        out.update(self.extras)
        return out


def is_brc_structure(structure: DagStructure) -> bool:
    """True when the class variable is a sink.

    With parameter independence and Dirichlet priors, a class sink splits the
    parameters into an input part and a class-conditional part with
    independent priors.
    """
    return not structure.children(structure.class_index)


def _check(structure: DagStructure, prior: DirichletSpec, dataset: Dataset) -> np.ndarray:
    prior.check_shapes(structure)
    return aligned_cases(structure, dataset)


def conditional_node_monitor(structure: DagStructure, prior: DirichletSpec, dataset: Dataset) -> CriterionReport:
    """Closed-form CNM, linear in the number of cases."""
    cases = _check(structure, prior, dataset)
    y = structure.class_index
    r = structure.class_cardinality
    counts = [np.zeros(structure.table_shape(i)) for i in range(structure.n)]
    terms = []
    for case in cases:
        z = case.copy()
        logs = np.empty(r)
        for k in range(r):
            z[y] = k
            total = 0.0
            for i in range(structure.n):
                j = structure.row_index(i, z)
                a, c = prior.tables[i][j], counts[i][j]
                total += math.log((a[z[i]] + c[z[i]]) / (a.sum() + c.sum()))
            logs[k] = total
        assert np.isfinite(logs).all()
        terms.append(float(logs[case[y]] - logsumexp(logs)))
        for i in range(structure.n):
            counts[i][structure.row_index(i, case), case[i]] += 1
    return CriterionReport(CriterionKind.CNM, math.fsum(terms), tuple(terms))


def global_criterion(structure: DagStructure, prior: DirichletSpec, dataset: Dataset) -> CriterionReport:
    terms = tuple(float(t) for t in sequential_log_terms(structure, prior, dataset))
    return CriterionReport(CriterionKind.LML, math.fsum(terms), terms)


def _completion_log_weights(structure: DagStructure, prior: DirichletSpec, cases: np.ndarray) -> np.ndarray:
    """Closed-form log marginal likelihood of every class completion of ``cases``.

    Completion ``m`` assigns class digits of ``m`` in base r to the cases, the
    first case being the most significant digit, so completions sharing a
    prefix of class labels are contiguous.
    """
    n_cases = cases.shape[0]
    y = structure.class_index
    r = structure.class_cardinality
    total = r**n_cases
    involved = (y,) + structure.children(y)

    # nodes untouched by the class contribute a constant
    base = 0.0
    for i in range(structure.n):
        if i in involved:
            continue
        q, ri = structure.table_shape(i)
        cells = structure.row_indices(i, cases) * ri + cases[:, i]
        cnt = np.bincount(cells, minlength=q * ri).reshape(q, ri)
        base += _node_lml(prior.tables[i], cnt[None])[0]

    zero_y = cases.copy()
    zero_y[:, y] = 0
    layouts = []
    for i in involved:
        q, ri = structure.table_shape(i)
        base_cells = structure.row_indices(i, zero_y) * ri + zero_y[:, i]
        if i == y:
            weight = 1
        else:
            pars = structure.parents[i]
            stride = math.prod(structure.cardinalities[p] for p in pars[pars.index(y) + 1:])
            weight = stride * ri
        layouts.append((prior.tables[i], q, ri, base_cells, weight))

    powers = r ** np.arange(n_cases - 1, -1, -1, dtype=np.int64)
    out = np.empty(total)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        labels = (idx[:, None] // powers[None, :]) % r
        acc = np.full(idx.size, base)
        for alpha, q, ri, base_cells, weight in layouts:
            cells = base_cells[None, :] + labels * weight
            flat = cells + (np.arange(idx.size, dtype=np.int64) * (q * ri))[:, None]
            cnt = np.bincount(flat.ravel(), minlength=idx.size * q * ri).reshape(idx.size, q, ri)
            acc += _node_lml(alpha, cnt)
        out[start:start + idx.size] = acc
    return out


def _node_lml(alpha: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Per-batch log marginal likelihood of one node; ``counts`` has shape (B, q, r)."""
    a_row = alpha.sum(axis=1)
    n_row = counts.sum(axis=2)
    return (np.sum(gammaln(a_row) - gammaln(a_row + n_row), axis=1)
            + np.sum(gammaln(alpha + counts) - gammaln(alpha), axis=(1, 2)))


def _require_feasible(structure: DagStructure, n_cases: int, cap: int) -> None:
    r = structure.class_cardinality
    if r**n_cases > cap:
        raise InfeasibleError(
            f"exact CSC needs {r}^{n_cases} class completions, above completion_cap={cap}; "
            f"use the Monte-Carlo criterion (csc-mc) instead"
        )


def input_log_marginal_exact(structure: DagStructure, prior: DirichletSpec, dataset: Dataset,
                             completion_cap: int = DEFAULT_COMPLETION_CAP) -> float:
    """log p(x_1..x_N | m) by summing over all class completions."""
    cases = _check(structure, prior, dataset)
    _require_feasible(structure, cases.shape[0], completion_cap)
    return float(logsumexp(_completion_log_weights(structure, prior, cases)))


def class_sequential_exact(structure: DagStructure, prior: DirichletSpec, dataset: Dataset,
                           completion_cap: int = DEFAULT_COMPLETION_CAP) -> CriterionReport:
    """Exact CSC by brute force over the r^N class completions."""
    cases = _check(structure, prior, dataset)
    n_cases = cases.shape[0]
    _require_feasible(structure, n_cases, completion_cap)
    if n_cases == 0:
        return CriterionReport(CriterionKind.CSC_EXACT, 0.0, ())
    r = structure.class_cardinality
    log_w = _completion_log_weights(structure, prior, cases)
    labels = cases[:, structure.class_index]

    # log of the total weight of completions agreeing with the first l labels
    prefix_logs = [float(logsumexp(log_w))]
    block = 0
    for l in range(1, n_cases + 1):
        block = block * r + int(labels[l - 1])
        size = r ** (n_cases - l)
        prefix_logs.append(float(logsumexp(log_w[block * size:(block + 1) * size])))
    terms = tuple(prefix_logs[l] - prefix_logs[l - 1] for l in range(1, n_cases + 1))

    joint = log_marginal_likelihood(structure, prior, dataset)
    if abs(joint - prefix_logs[-1]) > 1e-9:
        raise ConsistencyError("completion weight of the observed labels disagrees with the LML")
    return CriterionReport(CriterionKind.CSC_EXACT, math.fsum(terms), terms,
                           extras={"log_input_marginal": prefix_logs[0]})


def class_sequential_monte_carlo(structure: DagStructure, prior: DirichletSpec, dataset: Dataset,
                                 samples: int, seed: int) -> CriterionReport:
    """CSC with log p(x_1..x_N | m) estimated by sampling parameters from the prior.

    Each draw theta_s gives the weight ``w_s = prod_l p(x_l | theta_s)``; the
    estimate is the log-mean-exp of ``log w_s``.  The standard error is the
    delta-method ``sd(w) / (sqrt(S) * mean(w))``.  Draws use numpy's PCG64
    generator seeded with ``seed``.
    """
    if samples < 2:
        raise ValidationError("samples must be >= 2")
    cases = _check(structure, prior, dataset)
    joint = log_marginal_likelihood(structure, prior, dataset)
    log_w = _prior_sample_log_weights(structure, prior, cases, samples, np.random.default_rng(seed))
    if np.all(np.isneginf(log_w)):
        raise ConsistencyError("every Monte-Carlo weight is zero")
    top = log_w.max()
    w = np.exp(log_w - top)
    mean = w.mean()
    log_px = float(top + math.log(mean))
    se = float(w.std(ddof=1) / (math.sqrt(samples) * mean))
    return CriterionReport(CriterionKind.CSC_MC, joint - log_px, (), std_error=se, sample_count=samples,
                           extras={"log_input_marginal": log_px})


def _prior_sample_log_weights(structure, prior, cases, samples, rng) -> np.ndarray:
    log_theta = []
    for alpha in prior.tables:
        g = rng.standard_gamma(alpha, size=(samples,) + alpha.shape)
        with np.errstate(divide="ignore"):
            log_theta.append(np.log(g) - np.log(g.sum(axis=2, keepdims=True)))
    y = structure.class_index
    r = structure.class_cardinality
    log_w = np.zeros(samples)
    if cases.shape[0] == 0:
        return log_w
    patterns, multiplicity = np.unique(cases, axis=0, return_counts=True)
    for pattern, mult in zip(patterns, multiplicity):
        z = pattern.copy()
        per_class = np.empty((r, samples))
        for k in range(r):
            z[y] = k
            acc = np.zeros(samples)
            for i in range(structure.n):
                acc += log_theta[i][:, structure.row_index(i, z), z[i]]
            per_class[k] = acc
        log_w += mult * logsumexp(per_class, axis=0)
    return log_w


def criterion_gap(structure: DagStructure, prior: DirichletSpec, dataset: Dataset,
                  completion_cap: int = DEFAULT_COMPLETION_CAP) -> float:
    """CNM minus exact CSC; zero for class-sink structures."""
    cnm = conditional_node_monitor(structure, prior, dataset).value
    csc = class_sequential_exact(structure, prior, dataset, completion_cap).value
    return cnm - csc
