from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import optimize, sparse

from sf_rl_core.confidence import TransitionConfidenceSet
from sf_rl_core.errors import ProjectionError

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERATIONS = 10_000
DEFAULT_KKT_TOLERANCE = 1e-8
MAX_EXPONENT = 700.0
MAX_ROUNDS = 5
MAX_NEWTON_STEPS = 50
MAX_STEP_HALVINGS = 40
POLISH_TARGET = 1e-4
MIN_MASS = 1e-300


@dataclass(frozen=True)
class PolytopeConstraints:
    """Occupancy polytope of a confidence set over the entries allowed to carry mass."""

    support: tuple[np.ndarray, ...]
    offsets: tuple[int, ...]
    equalities: sparse.csr_matrix
    equality_targets: np.ndarray
    inequalities: sparse.csr_matrix

    @property
    def size(self) -> int:
        return self.offsets[-1]


def _support(confidence_set: TransitionConfidenceSet) -> list[np.ndarray]:
    """Entries with a positive upper bound whose source state can receive mass."""
    support = []
    reachable = np.ones(1, dtype=bool)
    for upper in confidence_set.upper:
        allowed = (upper > 0.0) & reachable[:, None, None]
        support.append(allowed)
        reachable = allowed.any(axis=(0, 1))
    return support


def build_constraints(confidence_set: TransitionConfidenceSet) -> PolytopeConstraints:
    support = _support(confidence_set)
    offsets = [0]
    positions = []
    for allowed in support:
        index = np.full(allowed.shape, -1, dtype=np.int64)
        flat = np.flatnonzero(allowed)
        index.reshape(-1)[flat] = offsets[-1] + np.arange(flat.size)
        positions.append(index)
        offsets.append(offsets[-1] + flat.size)

    rows, cols, vals = [], [], []
    # Start layer carries unit mass.
    start = positions[0][positions[0] >= 0]
    rows.extend([0] * start.size)
    cols.extend(start.tolist())
    vals.extend([1.0] * start.size)
    row = 1
    for layer in range(1, len(positions)):
        for state in range(positions[layer].shape[0]):
            outflow = positions[layer][state][positions[layer][state] >= 0]
            inflow = positions[layer - 1][:, :, state]
            inflow = inflow[inflow >= 0]
            if outflow.size == 0 and inflow.size == 0:
                continue
            rows.extend([row] * (outflow.size + inflow.size))
            cols.extend(outflow.tolist() + inflow.tolist())
            vals.extend([1.0] * outflow.size + [-1.0] * inflow.size)
            row += 1
    equalities = sparse.csr_matrix((vals, (rows, cols)), shape=(row, offsets[-1]))
    targets = np.zeros(row)
    targets[0] = 1.0

    rows, cols, vals = [], [], []
    row = 0
    for layer, index in enumerate(positions):
        lower = confidence_set.lower[layer]
        upper = confidence_set.upper[layer]
        for state, action in np.ndindex(index.shape[:2]):
            entries = np.flatnonzero(index[state, action] >= 0)
            if entries.size == 0:
                continue
            columns = index[state, action, entries].tolist()
            for entry, column in zip(entries, columns):
                high = float(upper[state, action, entry])
                low = float(lower[state, action, entry])
                if high < 1.0:
                    rows.extend([row] * len(columns))
                    cols.extend(columns)
                    vals.extend(
                        (1.0 - high) if other == column else -high for other in columns
                    )
                    row += 1
                if low > 0.0 and entries.size > 1:
                    rows.extend([row] * len(columns))
                    cols.extend(columns)
                    vals.extend(
                        (low - 1.0) if other == column else low for other in columns
                    )
                    row += 1
    inequalities = sparse.csr_matrix((vals, (rows, cols)), shape=(row, offsets[-1]))
    return PolytopeConstraints(
        support=tuple(support),
        offsets=tuple(offsets),
        equalities=equalities,
        equality_targets=targets,
        inequalities=inequalities,
    )


def kkt_residual(
    constraints: PolytopeConstraints,
    point: np.ndarray,
    multipliers: np.ndarray,
) -> float:
    equality_gap = constraints.equalities @ point - constraints.equality_targets
    slack = constraints.inequalities @ point
    residuals = [float(np.max(np.abs(equality_gap), initial=0.0))]
    residuals.append(float(np.max(slack, initial=0.0)))
    residuals.append(float(np.max(np.abs(multipliers * slack), initial=0.0)))
    return max(residuals)


class _DualProblem:
    """Dual of the projection: x = x~ exp(-S'y) and gradient b - Sx over y = (l, m)."""

    def __init__(self, constraints: PolytopeConstraints, log_base: np.ndarray) -> None:
        self.constraints = constraints
        self.log_base = log_base
        self.n_equalities = constraints.equalities.shape[0]
        self.stacked = sparse.vstack([constraints.equalities, constraints.inequalities]).tocsr()
        self.targets = np.concatenate(
            [constraints.equality_targets, np.zeros(constraints.inequalities.shape[0])]
        )

    @property
    def size(self) -> int:
        return self.stacked.shape[0]

    @property
    def n_inequalities(self) -> int:
        return self.size - self.n_equalities

    def primal(self, dual: np.ndarray) -> np.ndarray:
        exponent = self.log_base - self.stacked.T @ dual
        return np.exp(np.minimum(exponent, MAX_EXPONENT))

    def objective(self, dual: np.ndarray) -> tuple[float, np.ndarray]:
        point = self.primal(dual)
        return float(point.sum() + dual @ self.targets), self.targets - self.stacked @ point

    def hessian(self, dual: np.ndarray) -> np.ndarray:
        point = self.primal(dual)
        return (self.stacked @ sparse.diags(point) @ self.stacked.T).toarray()

    def residual(self, dual: np.ndarray) -> float:
        return kkt_residual(self.constraints, self.primal(dual), dual[self.n_equalities :])

    def projected_gradient(self, dual: np.ndarray) -> np.ndarray:
        _, gradient = self.objective(dual)
        bounded = gradient[self.n_equalities :]
        free = dual[self.n_equalities :] > 0.0
        gradient[self.n_equalities :] = np.where(free, bounded, np.minimum(bounded, 0.0))
        return gradient


def _warm_start(problem: _DualProblem, dual: np.ndarray, *, iterations: int, tolerance: float):
    if problem.n_inequalities == 0:
        return optimize.minimize(
            problem.objective,
            dual,
            jac=True,
            hess=problem.hessian,
            method="trust-exact",
            options={"gtol": tolerance * 1e-3, "maxiter": iterations},
        )
    return optimize.minimize(
        problem.objective,
        dual,
        jac=True,
        method="L-BFGS-B",
        bounds=[(None, None)] * problem.n_equalities + [(0.0, None)] * problem.n_inequalities,
        options={
            "maxiter": iterations,
            "maxfun": 2 * iterations,
            "ftol": 1e-15,
            "gtol": tolerance * 1e-2,
        },
    )


def newton_polish(
    problem: _DualProblem,
    dual: np.ndarray,
    *,
    tolerance: float,
    max_steps: int = MAX_NEWTON_STEPS,
) -> tuple[np.ndarray, int]:
    """Active-set Newton steps on the stationarity equations.

    Steps are accepted on the norm of the projected gradient, not on the dual
    objective, whose decrease falls below float resolution near the optimum.
    """
    n_equalities = problem.n_equalities
    for step in range(max_steps):
        if problem.residual(dual) <= tolerance:
            return dual, step
        point = problem.primal(dual)
        _, gradient = problem.objective(dual)
        active = np.ones(problem.size, dtype=bool)
        active[n_equalities:] = (dual[n_equalities:] > 0.0) | (gradient[n_equalities:] < 0.0)
        rows = problem.stacked[active]
        curvature = (rows @ sparse.diags(point) @ rows.T).toarray()
        direction = np.linalg.lstsq(curvature, -gradient[active], rcond=None)[0]

        merit = float(np.linalg.norm(problem.projected_gradient(dual)))
        length = 1.0
        for _ in range(MAX_STEP_HALVINGS):
            candidate = dual.copy()
            candidate[active] += length * direction
            candidate[n_equalities:] = np.maximum(candidate[n_equalities:], 0.0)
            if float(np.linalg.norm(problem.projected_gradient(candidate))) < merit:
                break
            length *= 0.5
        else:
            return dual, step
        dual = candidate
    return dual, max_steps


def kl_project(
    occupancy: Sequence[np.ndarray],
    confidence_set: TransitionConfidenceSet,
    *,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = DEFAULT_KKT_TOLERANCE,
) -> list[np.ndarray]:
    """Unnormalized-KL projection of positive triples onto the set's occupancy polytope.

    Solved through the dual: x = x~ exp(-A'l - G'm) minimizes sum(x) + l'b over
    free l and m >= 0. A quasi-Newton run brings the dual close to its optimum
    and Newton steps on the KKT system finish well below ``tolerance``.
    """
    constraints = build_constraints(confidence_set)
    log_base = np.concatenate(
        [
            np.log(np.maximum(np.asarray(layer)[allowed], MIN_MASS))
            for layer, allowed in zip(occupancy, constraints.support)
        ]
    )
    problem = _DualProblem(constraints, log_base)

    dual = np.zeros(problem.size)
    used = 0
    residual = float("inf")
    message = ""
    for _ in range(MAX_ROUNDS):
        remaining = max_iterations - used
        if remaining <= 0:
            break
        result = _warm_start(problem, dual, iterations=remaining, tolerance=tolerance)
        used += max(int(result.nit), 1)
        message = str(result.message)
        dual, steps = newton_polish(problem, result.x, tolerance=tolerance * POLISH_TARGET)
        used += steps
        previous = residual
        residual = problem.residual(dual)
        if residual <= tolerance or residual >= previous:
            break

    if residual > tolerance:
        diagnostics = {
            "iterations": used,
            "kkt_residual": residual,
            "solver_message": message,
            "equalities": int(problem.n_equalities),
            "inequalities": int(problem.n_inequalities),
        }
        logger.error("Occupancy projection did not converge: %s", diagnostics)
        raise ProjectionError("Occupancy projection did not converge.", diagnostics=diagnostics)

    point = problem.primal(dual)
    projected = []
    for layer, allowed in enumerate(constraints.support):
        values = np.zeros(allowed.shape)
        values[allowed] = point[constraints.offsets[layer] : constraints.offsets[layer + 1]]
        projected.append(values)
    return projected


def policy_from_occupancy(occupancy: Sequence[np.ndarray]) -> list[np.ndarray]:
    """pi(a|s) proportional to the mass of (s, a); uniform where a state has none."""
    rows = []
    for layer in occupancy:
        pairs = layer.sum(axis=2)
        totals = pairs.sum(axis=1, keepdims=True)
        uniform = np.full_like(pairs, 1.0 / pairs.shape[1])
        rows.append(np.where(totals > 0.0, pairs / np.where(totals > 0.0, totals, 1.0), uniform))
    return rows
