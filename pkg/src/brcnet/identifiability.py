"""Jacobian-rank probe of the map from network parameters to the input distribution.

If the Jacobian of ``theta_m -> theta_x`` has full rank at a point, the
parameters are locally recoverable from the input distribution alone, so the
class-conditional parameters are variationally dependent on ``theta_x`` and
unlabeled inputs carry information about them.

Coordinates: the free parameters of a CPT row are all states except the last;
``theta_x`` lists every input configuration in mixed-radix order (first input
most significant) with the last configuration dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, ValidationError
from .network import DagStructure, ParameterSet, all_assignments

DEFAULT_STEP = 1e-5
DEFAULT_RANK_TOL = 1e-7
DEFAULT_CONFIG_CAP = 2**20


def free_parameter_count(structure: DagStructure) -> int:
    return sum(structure.row_count(i) * (structure.cardinalities[i] - 1) for i in range(structure.n))


def input_config_count(structure: DagStructure) -> int:
    return int(np.prod([structure.cardinalities[i] for i in structure.input_indices], dtype=np.int64))


def to_free_vector(structure: DagStructure, params: ParameterSet) -> np.ndarray:
    params.check_shapes(structure)
    return np.concatenate([t[:, :-1].ravel() for t in params.tables]) if structure.n else np.zeros(0)


def from_free_vector(structure: DagStructure, point) -> ParameterSet:
    """Rebuild CPTs; the last state of every row is one minus the free entries."""
    return ParameterSet(_tables_from_free(structure, point))


def _tables_from_free(structure, point) -> list[np.ndarray]:
    point = np.asarray(point, dtype=float)
    if point.shape != (free_parameter_count(structure),):
        raise ValidationError(f"free vector has shape {point.shape}, expected ({free_parameter_count(structure)},)")
    tables, pos = [], 0
    for i in range(structure.n):
        q, r = structure.table_shape(i)
        free = point[pos: pos + q * (r - 1)].reshape(q, r - 1)
        pos += q * (r - 1)
        tables.append(np.hstack([free, 1.0 - free.sum(axis=1, keepdims=True)]))
    return tables


def _joint_tensor(structure: DagStructure, tables) -> np.ndarray:
    cards = structure.cardinalities
    configs = all_assignments(cards)
    prob = np.ones(configs.shape[0])
    for i in range(structure.n):
        prob *= tables[i][structure.row_indices(i, configs), configs[:, i]]
    return prob.reshape(cards)


def _input_distribution(structure: DagStructure, tables, cap: int) -> np.ndarray:
    count = input_config_count(structure)
    if count > cap:
        raise InfeasibleError(f"{count} input configurations exceed the cap of {cap}")
    full = _joint_tensor(structure, tables).sum(axis=structure.class_index).ravel()
    return full[:-1]


def input_distribution_map(structure: DagStructure, params: ParameterSet,
                           cap: int = DEFAULT_CONFIG_CAP) -> np.ndarray:
    """theta_x with the last configuration dropped."""
    params.check_shapes(structure)
    return _input_distribution(structure, params.tables, cap)


def restore_full(theta_x: np.ndarray) -> np.ndarray:
    return np.append(theta_x, 1.0 - np.sum(theta_x))


def check_margin(structure: DagStructure, point, margin: float) -> None:
    for i, t in enumerate(_tables_from_free(structure, point)):
        if t.min() < margin:
            raise ValidationError(
                f"point is within {margin:g} of the simplex boundary for {structure.names[i]!r}"
            )


def numerical_jacobian(structure: DagStructure, point, step: float = DEFAULT_STEP,
                       cap: int = DEFAULT_CONFIG_CAP) -> np.ndarray:
    """Central-difference Jacobian, rows = retained theta_x entries, columns = free parameters."""
    point = np.asarray(point, dtype=float)
    check_margin(structure, point, 2 * step)
    f = lambda p: _input_distribution(structure, _tables_from_free(structure, p), cap)  # noqa: E731
    n_free = point.size
    jac = np.empty((input_config_count(structure) - 1, n_free))
    for j in range(n_free):
        e = np.zeros(n_free)
        e[j] = step
        jac[:, j] = (f(point + e) - f(point - e)) / (2 * step)
    return jac


def directional_difference(structure: DagStructure, point, direction, step: float) -> np.ndarray:
    """Central-difference estimate of the Jacobian applied to ``direction``."""
    point = np.asarray(point, dtype=float)
    direction = np.asarray(direction, dtype=float)
    f = lambda p: _input_distribution(structure, _tables_from_free(structure, p), DEFAULT_CONFIG_CAP)  # noqa: E731
    return (f(point + step * direction) - f(point - step * direction)) / (2 * step)


def numerical_rank(matrix, tolerance: float = DEFAULT_RANK_TOL) -> int:
    """Count singular values above ``tolerance`` times the largest one."""
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("matrix has non-finite entries")
    if matrix.size == 0:
        return 0
    sv = np.linalg.svd(matrix, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > tolerance * sv[0]))


@dataclass(frozen=True)
class RankReport:
    points_tested: int
    full_rank_count: int
    expected_full_rank: int
    per_point_ranks: tuple[int, ...]
    tolerance_used: float
    step_used: float = DEFAULT_STEP
    jacobian_shape: tuple[int, int] = field(default=(0, 0))

    def as_dict(self) -> dict:
        return {
            "points_tested": self.points_tested,
            "full_rank_count": self.full_rank_count,
            "expected_full_rank": self.expected_full_rank,
            "jacobian_shape": list(self.jacobian_shape),
            "tolerance_used": self.tolerance_used,
            "step_used": self.step_used,
            "per_point_ranks": list(self.per_point_ranks),
        }


def sample_interior_point(structure: DagStructure, rng: np.random.Generator, margin: float) -> np.ndarray:
    """Uniform draw on each row simplex, redrawn until every entry clears ``margin``."""
    parts = []
    for i in range(structure.n):
        q, r = structure.table_shape(i)
        for _ in range(q):
            row = rng.dirichlet(np.ones(r))
            while row.min() < margin:
                row = rng.dirichlet(np.ones(r))
            parts.append(row[:-1])
    return np.concatenate(parts) if parts else np.zeros(0)


def variational_dependence_probe(structure: DagStructure, num_points: int, seed: int,
                                 step: float = DEFAULT_STEP, tolerance: float = DEFAULT_RANK_TOL,
                                 extra_points=(), cap: int = DEFAULT_CONFIG_CAP) -> RankReport:
    """Jacobian rank at ``num_points`` random interior points (plus any ``extra_points``)."""
    if num_points < 1:
        raise ValidationError("num_points must be >= 1")
    if input_config_count(structure) > cap:
        raise InfeasibleError(f"{input_config_count(structure)} input configurations exceed the cap of {cap}")
    rng = np.random.default_rng(seed)
    points = [sample_interior_point(structure, rng, 2 * step) for _ in range(num_points)]
    points.extend(np.asarray(p, dtype=float) for p in extra_points)
    shape = (input_config_count(structure) - 1, free_parameter_count(structure))
    expected = min(shape)
    ranks = tuple(numerical_rank(numerical_jacobian(structure, p, step, cap), tolerance) for p in points)
    return RankReport(
        points_tested=len(points),
        full_rank_count=sum(r == expected for r in ranks),
        expected_full_rank=expected,
        per_point_ranks=ranks,
        tolerance_used=tolerance,
        step_used=step,
        jacobian_shape=shape,
    )
