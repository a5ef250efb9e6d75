"""Fractional allocations and the value/weight accounting used everywhere."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import InstanceError
from .models import Instance
from .numeric import DEFAULT_TOLERANCE, Number, total, zeros

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FractionalAllocation:
    """Per-job fractional weights x_j, indexed by job id."""

    instance: Instance
    weights: np.ndarray

    def __post_init__(self) -> None:
        """Freeze a private copy of the weights."""
        weights = np.array(self.weights, copy=True)
        if weights.shape != (self.instance.n_jobs,):
            raise InstanceError(
                f"Allocation has {len(weights)} weights for {self.instance.n_jobs} jobs"
            )
        if weights.dtype != object:
            weights = weights.astype(float)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def zeros(cls, instance: Instance) -> FractionalAllocation:
        """Empty allocation."""
        return cls(instance, zeros(instance.n_jobs, instance.is_rational))

    @classmethod
    def from_mapping(
        cls, instance: Instance, mapping: Mapping[int, Number]
    ) -> FractionalAllocation:
        """Build an allocation from a job id → weight mapping."""
        exact = instance.is_rational or any(isinstance(v, Fraction) for v in mapping.values())
        weights = zeros(instance.n_jobs, exact)
        for job_id, weight in mapping.items():
            instance.job(job_id)
            if weight < 0:
                raise InstanceError(f"Negative weight {weight} for job {job_id}")
            weights[job_id] = weight
        return cls(instance, weights)

    @property
    def exact(self) -> bool:
        """True when weights are Fractions."""
        return self.weights.dtype == object

    def __getitem__(self, job_id: int) -> Number:
        return self.weights[job_id]

    def support(self) -> Tuple[int, ...]:
        """Job ids with positive weight, ascending."""
        return tuple(j for j in range(len(self.weights)) if self.weights[j] > 0)

    def _with_weights(self, weights: np.ndarray) -> FractionalAllocation:
        return FractionalAllocation(self.instance, weights)

    def restrict(self, job_ids: Iterable[int]) -> FractionalAllocation:
        """x_A: zero outside ``job_ids``."""
        weights = zeros(len(self.weights), self.exact)
        for j in job_ids:
            self.instance.job(j)
            weights[j] = self.weights[j]
        return self._with_weights(weights)

    def without(self, job_ids: Iterable[int]) -> FractionalAllocation:
        """Zero the weights of ``job_ids``."""
        weights = np.array(self.weights, copy=True)
        for j in job_ids:
            self.instance.job(j)
            weights[j] = 0 * weights[j]
        return self._with_weights(weights)

    def scaled(self, factor: Number) -> FractionalAllocation:
        """Multiply every weight by ``factor``."""
        return self._with_weights(self.weights * factor)

    def plus(self, other: FractionalAllocation) -> FractionalAllocation:
        """Pointwise sum with an allocation on the same instance."""
        return self._with_weights(self.weights + other.weights)

    def item_loads(self) -> List[Number]:
        """Σ_{j ∋ t} x_j for every item t."""
        per_item: List[List[Number]] = [[] for _ in range(self.instance.n_items)]
        for j in self.support():
            for t in self.instance.jobs[j].items:
                per_item[t].append(self.weights[j])
        return [total(values) for values in per_item]

    def violations(
        self,
        capacities: Optional[Sequence[int]] = None,
        tol: float = DEFAULT_TOLERANCE,
        check_supply: bool = True,
    ) -> List[str]:
        """Describe every violated demand or supply constraint."""
        problems: List[str] = []
        if any(w < 0 for w in self.weights):
            problems.append("negative weight")
        for buyer in self.instance.buyers:
            for scenario in buyer.scenarios:
                load = total(self.weights[j] for j in scenario.jobs)
                if load > scenario.probability + tol:
                    problems.append(
                        f"demand of buyer {buyer.id} scenario {scenario.index}: "
                        f"{load} > {scenario.probability}"
                    )
        if check_supply:
            caps = self.instance.capacities if capacities is None else capacities
            for t, load in enumerate(self.item_loads()):
                if load > caps[t] + tol:
                    problems.append(f"supply of item {t}: {load} > {caps[t]}")
        return problems

    def is_feasible(
        self, capacities: Optional[Sequence[int]] = None, tol: float = DEFAULT_TOLERANCE
    ) -> bool:
        """True when demand and supply constraints hold within ``tol``."""
        return not self.violations(capacities, tol)

    def to_dict(self) -> Dict[int, Number]:
        """Support as a job id → weight mapping."""
        return {j: self.weights[j] for j in self.support()}


def _select(x: FractionalAllocation, job_ids: Optional[Iterable[int]]) -> List[int]:
    if job_ids is None:
        return list(range(x.instance.n_jobs))
    ids = list(job_ids)
    for j in ids:
        x.instance.job(j)
    return ids


def frac_wt(x: FractionalAllocation, job_ids: Optional[Iterable[int]] = None) -> Number:
    """FracWt: Σ_{j∈A} x_j (all jobs when ``job_ids`` is omitted)."""
    return total(x.weights[j] for j in _select(x, job_ids))


def frac_val(x: FractionalAllocation, job_ids: Optional[Iterable[int]] = None) -> Number:
    """FracVal: Σ_{j∈A} v_j x_j (all jobs when ``job_ids`` is omitted)."""
    jobs = x.instance.jobs
    return total(jobs[j].value * x.weights[j] for j in _select(x, job_ids))


def item_frac_values(x: FractionalAllocation) -> List[Number]:
    """fv_t for every item of a line instance, with density ρ_j = v_j / |I_j|."""
    inst = x.instance
    inst.topology.require_line("item_frac_value")
    per_item: List[List[Number]] = [[] for _ in range(inst.n_items)]
    for j in x.support():
        job = inst.jobs[j]
        density = job.value * x.weights[j] / job.length
        for t in job.items:
            per_item[t].append(density)
    return [total(values) for values in per_item]


def item_frac_value(x: FractionalAllocation, item: int) -> Number:
    """fv_t(x) = Σ_{j: I_j ∋ t} ρ_j x_j."""
    if not 0 <= item < x.instance.n_items:
        raise InstanceError(f"Unknown item {item}")
    return item_frac_values(x)[item]


def copy_usage(load: Number, capacity: int) -> List[Number]:
    """b_{t,r}: the fraction of copy r sold when ``load`` units are allocated."""
    one = Fraction(1) if isinstance(load, Fraction) else 1.0
    usage: List[Number] = []
    for r in range(1, capacity + 1):
        usage.append(min(one, max(0 * one, load - (r - 1))))
    return usage


def frac_cost(x: FractionalAllocation) -> Number:
    """Σ_t Σ_r b_{tr} c_{tr} with copies filled in order."""
    inst = x.instance
    terms: List[Number] = []
    for item, load in zip(inst.items, x.item_loads()):
        if item.costs is None:
            continue
        usage = copy_usage(load, len(item.costs))
        terms.extend(b * c for b, c in zip(usage, item.costs))
    return total(terms)


def frac_val_with_costs(x: FractionalAllocation) -> Number:
    """Cost-aware FracVal(x, c) = Σ v_j x_j − Σ b_{tr} c_{tr}."""
    return frac_val(x) - frac_cost(x)


@dataclass(frozen=True, eq=False)
class SubMarket:
    """One part of a large-market split: jobs, sub-supply and its allocation."""

    index: int
    jobs: Tuple[int, ...]
    capacities: Tuple[int, ...]
    allocation: FractionalAllocation
    label: str = ""

    def supply_violations(self, tol: float = DEFAULT_TOLERANCE) -> List[str]:
        """Supply violations of the allocation against the sub-supply."""
        return [
            p for p in self.allocation.violations(self.capacities, tol) if p.startswith("supply")
        ]
