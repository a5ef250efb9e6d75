"""Fractional LP relaxation solved with a self-contained dense simplex."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .allocation import FractionalAllocation, copy_usage, frac_val, frac_val_with_costs
from .exceptions import LpNumericalError
from .models import Instance
from .numeric import LP_FEASIBILITY_TOLERANCE, Number

_LOGGER = logging.getLogger(__name__)

PIVOT_EPS = 1e-12
CLEAN_EPS = 1e-13


class LpStatus(str, Enum):
    """Solver outcome."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Optimal fractional allocation and its objective."""

    allocation: FractionalAllocation
    objective: Number
    status: LpStatus = LpStatus.OPTIMAL
    iterations: int = 0
    copy_usage: Optional[Tuple[Tuple[Number, ...], ...]] = None


class DenseSimplex:
    """Maximize c·x subject to A x ≤ b, x ≥ 0, for b ≥ 0.

    The slack basis is feasible, so a single phase suffices. Pivots follow
    Bland's rule (lowest entering index, lowest leaving basic variable on
    ratio ties), which makes the result a deterministic function of the
    input and rules out cycling on degenerate packing LPs.
    """

    def __init__(
        self,
        c: np.ndarray,
        A: np.ndarray,
        b: np.ndarray,
        exact: bool = False,
        max_iterations: Optional[int] = None,
    ) -> None:
        """Initialize the tableau."""
        m, n = A.shape
        self.m = m
        self.n = n
        self.exact = exact
        self.eps: Number = Fraction(0) if exact else PIVOT_EPS
        self.max_iterations = max_iterations or 50 * (m + n) + 500
        dtype = object if exact else float
        tableau = np.zeros((m + 1, n + m + 1), dtype=dtype)
        tableau[:m, :n] = A
        for i in range(m):
            tableau[i, n + i] = 1
        tableau[:m, -1] = b
        tableau[m, :n] = -c
        if np.any(tableau[:m, -1] < 0):
            raise LpNumericalError("Right-hand side must be non-negative", LpStatus.INFEASIBLE)
        self.tableau = tableau
        self.basis: List[int] = list(range(n, n + m))
        self.iterations = 0

    def _entering(self) -> Optional[int]:
        candidates = np.nonzero(self.tableau[self.m, :-1] < -self.eps)[0]
        return int(candidates[0]) if len(candidates) else None

    def _leaving(self, col: int) -> Optional[int]:
        column = self.tableau[: self.m, col]
        rows = np.nonzero(column > self.eps)[0]
        best_row: Optional[int] = None
        best_ratio: Number = 0
        for i in rows:
            ratio = self.tableau[i, -1] / column[i]
            if best_row is None:
                best_row, best_ratio = int(i), ratio
                continue
            if self.exact:
                better = ratio < best_ratio
                tied = ratio == best_ratio
            else:
                better = ratio < best_ratio - PIVOT_EPS
                tied = abs(ratio - best_ratio) <= PIVOT_EPS
            if better or (tied and self.basis[i] < self.basis[best_row]):
                best_row, best_ratio = int(i), ratio
        return best_row

    def _pivot(self, row: int, col: int) -> None:
        tableau = self.tableau
        pivot_row = tableau[row] / tableau[row, col]
        tableau[row] = pivot_row
        factors = tableau[:, col].copy()
        factors[row] = 0
        tableau -= np.outer(factors, pivot_row)
        tableau[:, col] = 0
        tableau[row, col] = 1
        if not self.exact:
            tableau[np.abs(tableau) < CLEAN_EPS] = 0.0
        self.basis[row] = col

    def solve(self) -> Tuple[np.ndarray, Number]:
        """Run the simplex; return (x, objective)."""
        while True:
            col = self._entering()
            if col is None:
                break
            if self.iterations >= self.max_iterations:
                raise LpNumericalError(
                    f"Simplex did not converge in {self.max_iterations} pivots",
                    details={"iterations": self.iterations},
                )
            row = self._leaving(col)
            if row is None:
                raise LpNumericalError(
                    "Packing LP reported unbounded; the model is malformed",
                    details={"column": col},
                )
            self._pivot(row, col)
            self.iterations += 1
        values = np.zeros(self.n + self.m, dtype=self.tableau.dtype)
        for i, var in enumerate(self.basis):
            values[var] = self.tableau[i, -1]
        x = values[: self.n]
        if not self.exact:
            x = np.where(x < CLEAN_EPS, 0.0, x)
        _LOGGER.debug("Simplex finished after %d pivots", self.iterations)
        return x, self.tableau[self.m, -1]


Row = Tuple[List[Tuple[int, Number]], Number]


def _constraint_matrix(
    rows: Sequence[Row], n: int, exact: bool
) -> Tuple[np.ndarray, np.ndarray]:
    dtype = object if exact else float
    A = np.zeros((len(rows), n), dtype=dtype)
    b = np.zeros(len(rows), dtype=dtype)
    for i, (coefficients, rhs) in enumerate(rows):
        for var, coefficient in coefficients:
            A[i, var] = coefficient
        b[i] = rhs
    return A, b


def _demand_rows(inst: Instance) -> List[Row]:
    rows = []
    for buyer in inst.buyers:
        for scenario in buyer.scenarios:
            if scenario.jobs:
                rows.append(([(j, 1) for j in scenario.jobs], scenario.probability))
    return rows


def _check(
    solution: FractionalAllocation, capacities: Optional[Sequence[int]], supply: bool
) -> None:
    problems = solution.violations(capacities, LP_FEASIBILITY_TOLERANCE, check_supply=supply)
    if problems:
        raise LpNumericalError(
            f"Simplex returned an infeasible point: {problems[0]}", details=problems
        )


def solve_frac_opt(
    inst: Instance, capacities: Optional[Sequence[int]] = None
) -> LpSolution:
    """FracOpt: maximize Σ v_j x_j subject to supply and demand constraints."""
    if inst.has_costs:
        _LOGGER.debug("Ignoring cost schedules; solving with fixed capacities")
    caps = inst.capacities if capacities is None else capacities
    exact = inst.is_rational
    n = inst.n_jobs
    if n == 0:
        empty = FractionalAllocation.zeros(inst)
        return LpSolution(empty, frac_val(empty))
    rows = []
    for t, jobs in enumerate(inst.jobs_by_item()):
        if jobs:
            rows.append(([(j, 1) for j in jobs], caps[t]))
    rows.extend(_demand_rows(inst))
    A, b = _constraint_matrix(rows, n, exact)
    c = np.array([job.value for job in inst.jobs], dtype=object if exact else float)
    solver = DenseSimplex(c, A, b, exact=exact)
    x, _ = solver.solve()
    allocation = FractionalAllocation(inst, x)
    _check(allocation, caps, supply=True)
    objective = frac_val(allocation)
    _LOGGER.debug("FracOpt %s over %d jobs, %d rows", objective, n, len(rows))
    return LpSolution(allocation, objective, iterations=solver.iterations)


def solve_frac_opt_with_costs(inst: Instance) -> LpSolution:
    """Cost-aware FracOpt with per-copy variables b_{tr} and demand constraints."""
    exact = inst.is_rational
    n = inst.n_jobs
    if n == 0:
        empty = FractionalAllocation.zeros(inst)
        return LpSolution(empty, frac_val_with_costs(empty), copy_usage=())
    variables = n
    objective: List[Number] = [job.value for job in inst.jobs]
    rows = _demand_rows(inst)
    copy_rows = []
    for t, jobs in enumerate(inst.jobs_by_item()):
        if not jobs:
            continue
        item = inst.items[t]
        copies = len(item.costs) if item.costs is not None else item.capacity
        coefficients: List[Tuple[int, Number]] = [(j, 1) for j in jobs]
        for r in range(1, copies + 1):
            coefficients.append((variables, -1))
            objective.append(-item.copy_cost(r))
            copy_rows.append(([(variables, 1)], 1))
            variables += 1
        rows.append((coefficients, 0))
    rows.extend(copy_rows)
    A, b = _constraint_matrix(rows, variables, exact)
    c = np.array(objective, dtype=object if exact else float)
    solver = DenseSimplex(c, A, b, exact=exact)
    x, _ = solver.solve()
    allocation = FractionalAllocation(inst, x[:n])
    _check(allocation, None, supply=False)
    loads = allocation.item_loads()
    usage = tuple(
        tuple(copy_usage(load, len(item.costs) if item.costs is not None else item.capacity))
        for item, load in zip(inst.items, loads)
    )
    value = frac_val_with_costs(allocation)
    _LOGGER.debug("Cost-aware FracOpt %s over %d variables", value, variables)
    return LpSolution(allocation, value, iterations=solver.iterations, copy_usage=usage)
