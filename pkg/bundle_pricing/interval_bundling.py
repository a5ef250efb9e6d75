"""Unit-capacity interval bundling on a line.

A feasible fractional allocation is turned into a fractional unit allocation
in five steps: low-value jobs are filtered, the survivors are bucketed into a
dyadic hierarchy of intervals, the resulting groups are split into heavy and
light ones, and each class is extracted separately. The better extraction is
kept.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .allocation import FractionalAllocation, frac_val, frac_wt, item_frac_values
from .exceptions import InstanceError
from .models import Instance, Job
from .numeric import DEFAULT_TOLERANCE, Number, ceil_log2, floor_log2, total
from .unit_allocation import Block, UnitAllocation, UnitPlan, plans_to_unit_allocation

_LOGGER = logging.getLogger(__name__)

DEFAULT_OFFSETS = 64
BETA_TOLERANCE = 1e-12

HEAVY = "heavy"
LIGHT = "light"


def compute_beta(max_length: int) -> float:
    """β with β·log₂β = log₂L, clamped below at 2."""
    if max_length < 2:
        raise InstanceError(f"compute_beta needs L >= 2, got {max_length}")
    target = math.log2(max_length)
    if target <= 2:
        return 2.0
    low, high = 2.0, target
    while high - low > BETA_TOLERANCE:
        mid = (low + high) / 2
        if mid * math.log2(mid) < target:
            low = mid
        else:
            high = mid
    return (low + high) / 2


def max_scale(max_length: int) -> int:
    """ℓmax = ⌈log₂L⌉ + 1."""
    return ceil_log2(max(1, max_length)) + 1


def length_scale(job: Job) -> int:
    """The scale ℓ with ⌈log₂|I_j|⌉ = ℓ − 1."""
    return ceil_log2(job.length) + 1


def value_scale(value: Number) -> int:
    """a = ⌈log₂ v⌉."""
    return ceil_log2(value)


def _power_of_two(exponent: int, exact: bool) -> Number:
    return Fraction(2) ** exponent if exact else 2.0**exponent


@dataclass(frozen=True)
class ScalePartition:
    """Dyadic interval hierarchy shifted by ``offset``.

    At scale ℓ the block with index k holds the items
    ``offset + k·2^ℓ .. offset + (k+1)·2^ℓ − 1`` (0-based).
    """

    offset: int
    max_scale: int

    def __post_init__(self) -> None:
        """Check the offset range."""
        if not 0 <= self.offset < 2**self.max_scale:
            raise InstanceError(
                f"Offset {self.offset} outside [0, {2 ** self.max_scale})"
            )

    def block_of(self, item: int, scale: int) -> int:
        """Index k of the block at ``scale`` containing ``item``."""
        return (item - self.offset) >> scale

    def block_bounds(self, scale: int, block: int) -> Tuple[int, int]:
        """First and last item of 𝕀_{ℓ,k}."""
        first = self.offset + block * 2**scale
        return first, first + 2**scale - 1

    def job_block(self, job: Job, scale: Optional[int] = None) -> Optional[int]:
        """Block index hosting the job at its own scale, None when it straddles."""
        scale = length_scale(job) if scale is None else scale
        first = self.block_of(job.start, scale)
        return first if first == self.block_of(job.end, scale) else None


def candidate_offsets(scale: int, count: int = DEFAULT_OFFSETS) -> List[int]:
    """min(2^ℓmax, count) evenly spaced offsets."""
    span = 2**scale
    count = max(1, min(span, count))
    return sorted({(i * span) // count for i in range(count)})


@dataclass(frozen=True)
class JobGroup:
    """One contiguous component of G_{ℓ,k,a}."""

    scale: int
    block: int
    value_scale: int
    component: int
    jobs: Tuple[int, ...]
    start: int
    end: int

    @property
    def interval(self) -> Tuple[int, int]:
        """Covered interval 𝕀_G."""
        return self.start, self.end


def connected_components(
    jobs: Iterable[Job],
) -> List[Tuple[int, int, Tuple[int, ...]]]:
    """Split intervals into chains of overlapping jobs: (start, end, ids)."""
    components: List[Tuple[int, int, List[int]]] = []
    for job in sorted(jobs, key=lambda j: (j.start, j.end, j.id)):
        if components and job.start <= components[-1][1]:
            start, end, ids = components[-1]
            ids.append(job.id)
            components[-1] = (start, max(end, job.end), ids)
        else:
            components.append((job.start, job.end, [job.id]))
    return [(start, end, tuple(sorted(ids))) for start, end, ids in components]


def filter_low_value(
    x: FractionalAllocation, tol: float = DEFAULT_TOLERANCE
) -> Tuple[int, ...]:
    """U₁: support jobs with v_j ≥ ½·fv_{I_j}(x)."""
    inst = x.instance
    inst.topology.require_line("filter_low_value")
    fv = item_frac_values(x)
    kept = []
    for j in x.support():
        job = inst.jobs[j]
        interval_value = total(fv[t] for t in job.items)
        if job.value >= interval_value / 2 - tol:
            kept.append(j)
    _LOGGER.debug("Low-value filter kept %d of %d jobs", len(kept), len(x.support()))
    return tuple(kept)


def bucket_jobs(
    x: FractionalAllocation, jobs: Iterable[int], partition: ScalePartition
) -> List[JobGroup]:
    """Place jobs into G_{ℓ,k,a} and split each group into its components.

    Jobs straddling a block boundary at their own scale are dropped.
    """
    inst = x.instance
    cells: Dict[Tuple[int, int, int], List[Job]] = defaultdict(list)
    dropped = 0
    for j in jobs:
        job = inst.jobs[j]
        if not x[j] > 0:
            continue
        scale = length_scale(job)
        block = partition.job_block(job, scale)
        if block is None:
            dropped += 1
            continue
        cells[(scale, block, value_scale(job.value))].append(job)
    groups: List[JobGroup] = []
    for (scale, block, a), members in sorted(cells.items()):
        for index, (start, end, ids) in enumerate(connected_components(members), 1):
            groups.append(JobGroup(scale, block, a, index, ids, start, end))
    _LOGGER.debug(
        "Offset %d: %d groups, %d jobs dropped at block boundaries",
        partition.offset,
        len(groups),
        dropped,
    )
    return groups


def classify_heavy_light(
    x: FractionalAllocation, groups: Sequence[JobGroup], beta: float
) -> Tuple[List[JobGroup], List[JobGroup]]:
    """Heavy components have FracWt ≥ 1/(6β); the rest are light."""
    threshold = 1 / (6 * beta)
    heavy: List[JobGroup] = []
    light: List[JobGroup] = []
    for group in groups:
        (heavy if frac_wt(x, group.jobs) >= threshold else light).append(group)
    return heavy, light


def interval_cover(
    intervals: Sequence[Tuple[int, int]],
) -> Tuple[List[int], List[int]]:
    """Two internally disjoint sub-collections covering the union of ``intervals``.

    Returns indices into ``intervals``. Sweeping by (start, −end), an interval
    that extends the coverage goes to the first side whose last interval it
    misses; when it meets both, it replaces the most recently placed one.
    """
    order = sorted(range(len(intervals)), key=lambda i: (intervals[i][0], -intervals[i][1], i))
    sides: Tuple[List[int], List[int]] = ([], [])
    covered_end: Optional[int] = None
    last_side = 0
    for i in order:
        start, end = intervals[i]
        if covered_end is not None and end <= covered_end:
            continue
        for side_index, side in enumerate(sides):
            if not side or intervals[side[-1]][1] < start:
                side.append(i)
                last_side = side_index
                break
        else:
            sides[last_side][-1] = i
        covered_end = end if covered_end is None else max(covered_end, end)
    return sorted(sides[0]), sorted(sides[1])


def _empty_plan(x: FractionalAllocation, label: str) -> UnitPlan:
    return UnitPlan((), FractionalAllocation.zeros(x.instance), label)


def plan_heavy(x: FractionalAllocation, heavy: Sequence[JobGroup]) -> UnitPlan:
    """Cover the heavy intervals, keep the richer side, scale weights by ¼."""
    if not heavy:
        return _empty_plan(x, HEAVY)
    first, second = interval_cover([group.interval for group in heavy])
    values = [total(frac_val(x, heavy[i].jobs) for i in side) for side in (first, second)]
    chosen = first if values[0] >= values[1] else second
    quarter: Number = Fraction(1, 4) if x.exact else 0.25
    blocks = tuple(Block(heavy[i].start, heavy[i].end, heavy[i].jobs) for i in chosen)
    jobs = [j for block in blocks for j in block.jobs]
    return UnitPlan(blocks, x.restrict(jobs).scaled(quarter), HEAVY)


def select_light_subset(x: FractionalAllocation, job_ids: Sequence[int]) -> Tuple[int, ...]:
    """Pick S ⊆ G̃ with FracWt ≤ 1/β and FracVal ≥ ⅙·FracVal(G̃).

    Value scales are visited in increasing order with the rounded values
    2^a·W_a. With m the last prefix whose rounded value is at most a third of
    the total, either scale m+1 alone carries more than a third (take it) or
    every scale above m+1 together does.
    """
    inst = x.instance
    by_scale: Dict[int, List[int]] = defaultdict(list)
    for j in job_ids:
        if x[j] > 0:
            by_scale[value_scale(inst.jobs[j].value)].append(j)
    if not by_scale:
        return ()
    scales = sorted(by_scale)
    rounded = [_power_of_two(a, x.exact) * frac_wt(x, by_scale[a]) for a in scales]
    whole = total(rounded)
    third = whole / 3
    prefix: Number = 0 * whole
    m = 0
    for i, term in enumerate(rounded):
        if prefix + term > third:
            break
        prefix += term
        m = i + 1
    if m == len(scales):
        m -= 1
    if rounded[m] > third:
        chosen = [scales[m]]
    else:
        chosen = scales[m + 1 :]
    return tuple(sorted(j for a in chosen for j in by_scale[a]))


def light_window(beta: float) -> int:
    """Number of consecutive length scales merged into one light bundle family."""
    return max(1, floor_log2(Fraction(beta)))


def plan_light(
    x: FractionalAllocation, light: Sequence[JobGroup], beta: float, scale: int
) -> UnitPlan:
    """Best light extraction over every candidate top scale."""
    if not light:
        return _empty_plan(x, LIGHT)
    inst = x.instance
    cells: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for group in light:
        cells[(group.scale, group.block)].extend(group.jobs)
    selected = {cell: select_light_subset(x, ids) for cell, ids in sorted(cells.items())}
    window = light_window(beta)
    best = _empty_plan(x, LIGHT)
    best_value = best.value
    for top in range(1, scale + 1):
        families: Dict[int, List[int]] = defaultdict(list)
        for (cell_scale, block), ids in selected.items():
            if top - window < cell_scale <= top:
                families[block >> (top - cell_scale)].extend(ids)
        blocks: List[Block] = []
        for _, ids in sorted(families.items()):
            for start, end, members in connected_components(inst.jobs[j] for j in ids):
                blocks.append(Block(start, end, members))
        plan = UnitPlan(
            tuple(blocks),
            x.restrict(j for block in blocks for j in block.jobs),
            f"{LIGHT}@{top}",
        )
        if plan.value > best_value:
            best, best_value = plan, plan.value
    return best


def _unit_capacities(inst: Instance) -> Tuple[int, ...]:
    return tuple(1 for _ in inst.items)


def build_heavy_unit_allocation(
    x: FractionalAllocation, heavy: Sequence[JobGroup], tol: float = DEFAULT_TOLERANCE
) -> UnitAllocation:
    """Unit allocation from the heavy components (empty when there are none)."""
    plan = plan_heavy(x, heavy)
    return plans_to_unit_allocation(
        x.instance, [(plan, 1)], _unit_capacities(x.instance), plan.label, tol
    )


def build_light_unit_allocation(
    x: FractionalAllocation,
    light: Sequence[JobGroup],
    beta: float,
    tol: float = DEFAULT_TOLERANCE,
) -> UnitAllocation:
    """Unit allocation from the light components (empty when there are none)."""
    plan = plan_light(x, light, beta, max_scale(x.instance.max_length))
    return plans_to_unit_allocation(
        x.instance, [(plan, 1)], _unit_capacities(x.instance), plan.label, tol
    )


def plan_unit_allocation(
    x: FractionalAllocation,
    offsets: int = DEFAULT_OFFSETS,
    tol: float = DEFAULT_TOLERANCE,
) -> UnitPlan:
    """Run the five steps over the candidate offsets and keep the best plan.

    Ties go to the lowest offset, heavy before light.
    """
    inst = x.instance
    inst.topology.require_line("build_unit_allocation")
    length = inst.max_length
    beta = compute_beta(max(2, length))
    scale = max_scale(length)
    kept = filter_low_value(x, tol)
    best = _empty_plan(x, "empty")
    best_value = best.value
    for offset in candidate_offsets(scale, offsets):
        partition = ScalePartition(offset, scale)
        groups = bucket_jobs(x, kept, partition)
        heavy, light = classify_heavy_light(x, groups, beta)
        for plan in (plan_heavy(x, heavy), plan_light(x, light, beta, scale)):
            _LOGGER.debug(
                "Offset %d %s candidate: %d blocks, value %s",
                offset,
                plan.label,
                len(plan.blocks),
                plan.value,
            )
            if plan.value > best_value:
                best = UnitPlan(plan.blocks, plan.weights, f"{plan.label}/t0={offset}")
                best_value = plan.value
    if not best.blocks and x.support():
        _LOGGER.warning("No bundle survived the unit construction for %s", inst.name or "instance")
    return best


def build_unit_allocation(
    x: FractionalAllocation,
    offsets: int = DEFAULT_OFFSETS,
    tol: float = DEFAULT_TOLERANCE,
) -> UnitAllocation:
    """Fractional unit allocation on one copy of every item."""
    plan = plan_unit_allocation(x, offsets, tol)
    return plans_to_unit_allocation(
        x.instance, [(plan, 1)], _unit_capacities(x.instance), plan.label, tol
    )
