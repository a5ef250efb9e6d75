"""Arbitrary capacities, large markets and copy costs on a line."""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np

from .allocation import FractionalAllocation, SubMarket
from .exceptions import AllocationError
from .interval_bundling import DEFAULT_OFFSETS, plan_unit_allocation
from .models import Instance
from .numeric import DEFAULT_TOLERANCE, Number, ceil_with_tolerance, total
from .unit_allocation import (
    UnitAllocation,
    UnitPlan,
    compose_unit_allocations,
    plans_to_unit_allocation,
)

_LOGGER = logging.getLogger(__name__)

BASE_LAYER_DEPTH = 4


def _quarter(x: FractionalAllocation) -> Number:
    return Fraction(1, 4) if x.exact else 0.25


def _half(x: FractionalAllocation) -> Number:
    return Fraction(1, 2) if x.exact else 0.5


def greedy_layer(
    x: FractionalAllocation,
    capacities: Optional[Sequence[int]] = None,
    tol: float = DEFAULT_TOLERANCE,
) -> Tuple[int, ...]:
    """A job set covering every item between min(1, w_t) and 4.

    Starting from the earliest item that is not yet covered, the job that
    contains it and ends the latest is added (lowest id on ties). The target
    at item t is ``min(1, w_t)``, capped by ``capacities`` when given, where
    ``w_t`` is the load of ``x`` at t.
    """
    inst = x.instance
    inst.topology.require_line("greedy_layer")
    loads = x.item_loads()
    by_item: List[List[int]] = [[] for _ in range(inst.n_items)]
    for j in x.support():
        for t in inst.jobs[j].items:
            by_item[t].append(j)
    chosen: Set[int] = set()
    covered: List[Number] = [0 * loads[t] for t in range(inst.n_items)]
    for t in range(inst.n_items):
        target = min(1, loads[t])
        if capacities is not None:
            target = min(target, capacities[t])
        while covered[t] < target - tol:
            candidates = [j for j in by_item[t] if j not in chosen]
            if not candidates:
                break
            pick = max(candidates, key=lambda j: (inst.jobs[j].end, -j))
            chosen.add(pick)
            for item in inst.jobs[pick].items:
                covered[item] += x[pick]
    return tuple(sorted(chosen))


def layer_allocation(
    x: FractionalAllocation, tol: float = DEFAULT_TOLERANCE
) -> List[FractionalAllocation]:
    """Split x into ¼-scaled layers; layer r is feasible on copy r.

    Greedy layers are peeled off while some item carries more than four
    units of residual weight; the remainder becomes the last layer.
    """
    residual = x
    quarter = _quarter(x)
    layers: List[FractionalAllocation] = []
    while residual.support():
        depth = max(ceil_with_tolerance(load, tol) for load in residual.item_loads())
        if depth <= BASE_LAYER_DEPTH:
            layers.append(residual.scaled(quarter))
            break
        chosen = greedy_layer(residual, tol=tol)
        if not chosen:
            raise AllocationError("Greedy layer selected no job on a non-empty residual")
        layers.append(residual.restrict(chosen).scaled(quarter))
        residual = residual.without(chosen)
    _LOGGER.debug("Layered allocation into %d layers", len(layers))
    return layers


def _layer_plans(
    layers: Sequence[FractionalAllocation], offsets: int, tol: float
) -> List[Tuple[UnitPlan, int]]:
    return [
        (plan_unit_allocation(layer, offsets, tol), r)
        for r, layer in enumerate(layers, 1)
        if layer.support()
    ]


def build_capacity_allocation(
    x: FractionalAllocation,
    capacities: Optional[Sequence[int]] = None,
    offsets: int = DEFAULT_OFFSETS,
    tol: float = DEFAULT_TOLERANCE,
    label: str = "layered",
) -> UnitAllocation:
    """Unit allocation over item copies: layer x, then bundle every layer."""
    inst = x.instance
    caps = tuple(int(c) for c in (inst.capacities if capacities is None else capacities))
    layers = layer_allocation(x, tol)
    if len(layers) > max(caps, default=0):
        raise AllocationError(
            f"{len(layers)} layers exceed the largest capacity {max(caps, default=0)}"
        )
    plans = _layer_plans(layers, offsets, tol)
    return plans_to_unit_allocation(inst, plans, caps, label, tol)


def _length_groups(inst: Instance, k: int) -> List[int]:
    """Group index 0..k−1 of every job: smallest i with |I_j| ≤ L^{i/k}."""
    length = inst.max_length
    groups = []
    for job in inst.jobs:
        index = 1
        while index < k and job.length**k > length**index:
            index += 1
        groups.append(index - 1)
    return groups


def large_market_split(
    inst: Instance, x: FractionalAllocation, tol: float = DEFAULT_TOLERANCE
) -> List[SubMarket]:
    """Split jobs by length scale into k sub-markets with halved weights.

    Group i receives the jobs with L^{(i-1)/k} < |I_j| ≤ L^{i/k},
    k = ½·min(B, log₂L), and the sub-supply ⌈½·Σ x_j⌉ per item.
    """
    caps = tuple(int(c) for c in inst.capacities)
    if inst.min_capacity < 2:
        return [SubMarket(0, x.support(), caps, x, "identity")]
    log_length = math.log2(inst.max_length)
    k = max(1, int(math.floor(min(inst.min_capacity, log_length) / 2)))
    groups = _length_groups(inst, k)
    half = _half(x)
    markets: List[SubMarket] = []
    used = np.zeros(inst.n_items, dtype=int)
    for i in range(k):
        jobs = tuple(j for j in x.support() if groups[j] == i)
        part = x.restrict(jobs).scaled(half)
        supply = tuple(ceil_with_tolerance(load, tol) for load in part.item_loads())
        used += np.array(supply, dtype=int)
        markets.append(SubMarket(i, jobs, supply, part, f"length-group-{i + 1}"))
    if np.any(used > inst.capacities):
        raise AllocationError(
            "Sub-market supplies exceed the item capacities",
            details={"used": used.tolist(), "capacities": list(caps)},
        )
    _LOGGER.debug("Large-market split into %d groups (alpha=%s)", k, inst.max_length ** (1 / k))
    return markets


def build_large_market_allocation(
    x: FractionalAllocation,
    offsets: int = DEFAULT_OFFSETS,
    tol: float = DEFAULT_TOLERANCE,
) -> UnitAllocation:
    """Bundle every sub-market and stack them on disjoint copies."""
    inst = x.instance
    parts = [
        build_capacity_allocation(
            market.allocation, market.capacities, offsets, tol, market.label
        )
        for market in large_market_split(inst, x, tol)
    ]
    return compose_unit_allocations(inst, parts, "large-market", tol)


def shifted_values(inst: Instance, copy: int) -> List[Number]:
    """v'_j = v_j − Σ_{t∈I_j} c_{t,copy} for every job."""
    values = []
    for job in inst.jobs:
        cost = total(
            inst.items[t].copy_cost(copy) if copy <= inst.items[t].capacity else 0 * job.value
            for t in job.items
        )
        values.append(job.value - cost)
    return values


def unit_allocation_with_costs(
    x: FractionalAllocation,
    offsets: int = DEFAULT_OFFSETS,
    tol: float = DEFAULT_TOLERANCE,
) -> UnitAllocation:
    """Unit allocation whose layer r sits on copy r, bundled on shifted values.

    Jobs whose shifted value is not positive are removed from their layer.
    The bundle copies form the copy map τ of the result.
    """
    inst = x.instance
    layers = layer_allocation(x, tol)
    plans: List[Tuple[UnitPlan, int]] = []
    for r, layer in enumerate(layers, 1):
        values = shifted_values(inst, r)
        losing = [j for j in layer.support() if not values[j] > 0]
        kept = layer.without(losing)
        if losing:
            _LOGGER.debug("Layer %d drops %d jobs with non-positive shifted value", r, len(losing))
        if not kept.support():
            continue
        shifted = inst.with_job_values(
            [v if v > 0 else inst.jobs[j].value for j, v in enumerate(values)]
        )
        plan = plan_unit_allocation(
            FractionalAllocation(shifted, kept.weights), offsets, tol
        )
        weights = FractionalAllocation(inst, plan.weights.weights)
        plans.append((UnitPlan(plan.blocks, weights, f"copy-{r}/{plan.label}"), r))
    caps = tuple(int(c) for c in inst.capacities)
    if len(layers) > max(caps, default=0):
        raise AllocationError(f"{len(layers)} layers exceed the largest capacity")
    return plans_to_unit_allocation(inst, plans, caps, "cost-layered", tol)
