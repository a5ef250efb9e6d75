"""Fractional unit allocations: item-copy bundles with per-bundle weight ≤ 1."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .allocation import FractionalAllocation, frac_val, frac_wt
from .exceptions import AllocationError
from .models import Instance, Job
from .numeric import DEFAULT_TOLERANCE, Number, total, zeros

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Bundle:
    """An interval of items, one copy per item (copy indices are 1-based)."""

    id: int
    start: int
    end: int
    copies: Tuple[int, ...]
    filler: bool = False

    @property
    def items(self) -> range:
        """Items of the bundle."""
        return range(self.start, self.end + 1)

    def copy_of(self, item: int) -> int:
        """Copy index used for ``item``."""
        return self.copies[item - self.start]

    def item_copies(self) -> Tuple[Tuple[int, int], ...]:
        """(item, copy) pairs of the bundle."""
        return tuple(zip(self.items, self.copies))

    def covers(self, job: Job) -> bool:
        """True when the job's interval lies inside the bundle."""
        return bool(job.items) and self.start <= job.start and job.end <= self.end

    def descriptor(self) -> str:
        """Compact text form: ``start-end@copy`` or explicit ``item:copy`` pairs."""
        if len(set(self.copies)) == 1:
            return f"{self.start}-{self.end}@{self.copies[0]}"
        return " ".join(f"{t}:{r}" for t, r in self.item_copies())

    def to_dict(self) -> Dict[str, object]:
        """Convert to dictionary."""
        return {"id": self.id, "start": self.start, "end": self.end, "copies": list(self.copies)}


@dataclass(frozen=True)
class Block:
    """A planned bundle interval together with the jobs it hosts."""

    start: int
    end: int
    jobs: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class UnitPlan:
    """Blocks on a single copy layer plus the rescaled weights x'."""

    blocks: Tuple[Block, ...]
    weights: FractionalAllocation
    label: str = ""

    @property
    def value(self) -> Number:
        """FracVal of the rescaled weights."""
        return frac_val(self.weights)


@dataclass(frozen=True, eq=False)
class UnitAllocation:
    """Bundles partitioning the item-copy multiset, a job partition and x'."""

    instance: Instance
    bundles: Tuple[Bundle, ...]
    assignment: Tuple[Optional[int], ...]
    weights: FractionalAllocation
    capacities: Tuple[int, ...]
    label: str = ""
    _members: Tuple[Tuple[int, ...], ...] = field(
        default=(), init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        """Index the members of every bundle."""
        members: List[List[int]] = [[] for _ in self.bundles]
        for job_id, bundle_id in enumerate(self.assignment):
            if bundle_id is not None:
                members[bundle_id].append(job_id)
        object.__setattr__(self, "_members", tuple(tuple(m) for m in members))

    def members(self, bundle_id: int) -> Tuple[int, ...]:
        """A_k: jobs assigned to bundle ``bundle_id``."""
        return self._members[bundle_id]

    def bundle_weight(self, bundle_id: int) -> Number:
        """W_k = FracWt(x'_{A_k})."""
        return frac_wt(self.weights, self.members(bundle_id))

    def bundle_value(self, bundle_id: int) -> Number:
        """FracVal(x'_{A_k})."""
        return frac_val(self.weights, self.members(bundle_id))

    def value(self) -> Number:
        """FracVal(x')."""
        return frac_val(self.weights)

    def for_sale(self) -> Tuple[Bundle, ...]:
        """Bundles with at least one assigned job."""
        return tuple(b for b in self.bundles if self.members(b.id))

    def copy_cost(self, job_id: int) -> Number:
        """Σ_{t ∈ I_j} c_{t,r} over the copies of the job's bundle."""
        bundle_id = self.assignment[job_id]
        if bundle_id is None:
            return 0.0
        bundle = self.bundles[bundle_id]
        job = self.instance.jobs[job_id]
        return total(self.instance.items[t].copy_cost(bundle.copy_of(t)) for t in job.items)

    def shifted_value(self, job_id: int) -> Number:
        """v'_j = v_j − Σ_{t∈I_j} c_{t,r} for the copies the job sits on."""
        return self.instance.jobs[job_id].value - self.copy_cost(job_id)

    def cost_aware_value(self, job_ids: Optional[Sequence[int]] = None) -> Number:
        """FracVal(x', τ, c) = Σ x'_j v'_j."""
        ids = self.weights.support() if job_ids is None else job_ids
        return total(self.weights[j] * self.shifted_value(j) for j in ids)

    def violations(self, tol: float = DEFAULT_TOLERANCE) -> List[str]:
        """Describe every violated unit-allocation invariant."""
        problems: List[str] = []
        seen: Set[Tuple[int, int]] = set()
        for bundle in self.bundles:
            for t, r in bundle.item_copies():
                if not 0 <= t < len(self.capacities) or not 1 <= r <= self.capacities[t]:
                    problems.append(f"bundle {bundle.id} uses missing copy ({t}, {r})")
                elif (t, r) in seen:
                    problems.append(f"copy ({t}, {r}) appears in two bundles")
                seen.add((t, r))
        expected = sum(int(c) for c in self.capacities)
        if len(seen) != expected:
            problems.append(f"bundles cover {len(seen)} of {expected} item copies")
        for j in self.weights.support():
            bundle_id = self.assignment[j]
            if bundle_id is None:
                problems.append(f"job {j} has weight but no bundle")
            elif not self.bundles[bundle_id].covers(self.instance.jobs[j]):
                problems.append(f"job {j} does not fit bundle {bundle_id}")
        for bundle in self.bundles:
            weight = self.bundle_weight(bundle.id)
            if weight > 1 + tol:
                problems.append(f"bundle {bundle.id} carries weight {weight} > 1")
        return problems

    def validate(self, tol: float = DEFAULT_TOLERANCE) -> UnitAllocation:
        """Raise AllocationError unless every invariant holds."""
        problems = self.violations(tol)
        if problems:
            raise AllocationError(
                f"Invalid unit allocation ({self.label}): {problems[0]}", details=problems
            )
        return self


Placement = Tuple[Block, Tuple[int, ...]]


def assemble_unit_allocation(
    inst: Instance,
    placements: Sequence[Placement],
    weights: FractionalAllocation,
    capacities: Optional[Sequence[int]] = None,
    label: str = "",
    tol: float = DEFAULT_TOLERANCE,
) -> UnitAllocation:
    """Materialize placed blocks as bundles and fill the unused copies.

    Every unused item copy ends up in a filler bundle with no jobs, so the
    bundles always partition the full copy multiset.
    """
    caps = tuple(int(c) for c in (inst.capacities if capacities is None else capacities))
    ordered = sorted(placements, key=lambda p: (p[1][0], p[0].start, p[0].end))
    bundles: List[Bundle] = []
    assignment: List[Optional[int]] = [None] * inst.n_jobs
    used: Set[Tuple[int, int]] = set()
    for block, copies in ordered:
        bundle = Bundle(len(bundles), block.start, block.end, tuple(copies))
        bundles.append(bundle)
        used.update(bundle.item_copies())
        for j in block.jobs:
            if weights[j] > 0:
                assignment[j] = bundle.id
    for r in range(1, max(caps, default=0) + 1):
        t = 0
        while t < len(caps):
            if caps[t] >= r and (t, r) not in used:
                start = t
                while t + 1 < len(caps) and caps[t + 1] >= r and (t + 1, r) not in used:
                    t += 1
                bundles.append(
                    Bundle(len(bundles), start, t, (r,) * (t - start + 1), filler=True)
                )
            t += 1
    allocation = UnitAllocation(inst, tuple(bundles), tuple(assignment), weights, caps, label)
    return allocation.validate(tol)


def plans_to_unit_allocation(
    inst: Instance,
    plans: Sequence[Tuple[UnitPlan, int]],
    capacities: Optional[Sequence[int]] = None,
    label: str = "",
    tol: float = DEFAULT_TOLERANCE,
) -> UnitAllocation:
    """Place each plan's blocks on a uniform copy index and assemble."""
    weights = zeros(inst.n_jobs, inst.is_rational)
    placements: List[Placement] = []
    for plan, copy in plans:
        weights = weights + plan.weights.weights
        for block in plan.blocks:
            placements.append((block, (copy,) * (block.end - block.start + 1)))
    return assemble_unit_allocation(
        inst, placements, FractionalAllocation(inst, weights), capacities, label, tol
    )


def compose_unit_allocations(
    inst: Instance,
    parts: Sequence[UnitAllocation],
    label: str = "composed",
    tol: float = DEFAULT_TOLERANCE,
) -> UnitAllocation:
    """Stack sub-market allocations onto disjoint copies of the original supply."""
    offsets = np.zeros(inst.n_items, dtype=int)
    weights = zeros(inst.n_jobs, inst.is_rational)
    placements: List[Placement] = []
    for part in parts:
        weights = weights + part.weights.weights
        for bundle in part.for_sale():
            copies = tuple(
                int(offsets[t]) + r for t, r in zip(bundle.items, bundle.copies)
            )
            placements.append(
                (Block(bundle.start, bundle.end, part.members(bundle.id)), copies)
            )
        offsets = offsets + np.array(part.capacities, dtype=int)
    if np.any(offsets > inst.capacities):
        raise AllocationError("Sub-market supplies exceed the item capacities")
    return assemble_unit_allocation(
        inst, placements, FractionalAllocation(inst, weights), None, label, tol
    )
