"""Arms, peeling and fractional layered allocations on a rooted tree."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .allocation import FractionalAllocation, SubMarket, frac_val
from .exceptions import AllocationError, InstanceError
from .models import Instance, Job, Topology
from .numeric import DEFAULT_TOLERANCE, Number, ceil_log2, ceil_with_tolerance, total

_LOGGER = logging.getLogger(__name__)

LEFT = "L"
RIGHT = "R"

PEEL_LIMIT = 6
TERMINATING_LIMIT = 3
LAYER_WEIGHT_LIMIT = 7

ArmKey = Tuple[int, str]


@dataclass(frozen=True)
class Arm:
    """A monotone sub-path of a job, listed from its peak edge downwards."""

    job: int
    side: str
    edges: Tuple[int, ...]

    @property
    def key(self) -> ArmKey:
        """(job id, side)."""
        return self.job, self.side

    @property
    def top(self) -> int:
        """Peak edge the arm starts from."""
        return self.edges[0]

    @property
    def bottom(self) -> int:
        """Deepest edge of the arm."""
        return self.edges[-1]


@dataclass(frozen=True)
class ArmDecomposition:
    """Peak edges of a job and its left/right arms (right may be empty)."""

    job: int
    peak: Tuple[int, ...]
    left: Arm
    right: Optional[Arm] = None

    @property
    def arms(self) -> Tuple[Arm, ...]:
        """Non-empty arms."""
        return (self.left,) if self.right is None else (self.left, self.right)

    def sibling(self, arm: Arm) -> Optional[Arm]:
        """The other non-empty arm of the job, if any."""
        if arm.side == LEFT:
            return self.right
        return self.left


def decompose_arms(job: Job, topology: Topology) -> ArmDecomposition:
    """Split P_j at its peak into depth-increasing arms."""
    topology.require_tree("decompose_arms")
    if not topology.is_simple_path(job.items):
        raise InstanceError(f"Job {job.id} bundle {list(job.items)} is not a simple path")
    top_depth = min(topology.depth(e) for e in job.items)
    peak = tuple(sorted(e for e in job.items if topology.depth(e) == top_depth))
    arms = []
    for side, start in zip((LEFT, RIGHT), peak):
        below = [e for e in job.items if topology.is_ancestor(start, e)]
        arms.append(Arm(job.id, side, tuple(sorted(below, key=topology.depth))))
    return ArmDecomposition(job.id, peak, arms[0], arms[1] if len(arms) > 1 else None)


def edge_weights(arms: Iterable[Arm], y: FractionalAllocation) -> Dict[int, Number]:
    """fw_t over the given arms for every edge they touch."""
    weights: Dict[int, List[Number]] = defaultdict(list)
    for arm in arms:
        for e in arm.edges:
            weights[e].append(y[arm.job])
    return {e: total(values) for e, values in weights.items()}


def arm_weight(arms: Iterable[Arm], y: FractionalAllocation) -> Number:
    """Σ y over arms (a job counts once per arm)."""
    return total(y[arm.job] for arm in arms)


def _depth_order(arms: Iterable[Arm], topology: Topology) -> List[Arm]:
    """Decreasing depth of the top edge, ties by (job, side)."""
    return sorted(arms, key=lambda a: (-topology.depth(a.top), a.job, a.side))


@dataclass(frozen=True, eq=False)
class PeelResult:
    """Kept arms J, dropped arms D, their siblings D' and the arm pool used."""

    kept: Tuple[Arm, ...]
    dropped: Tuple[Arm, ...]
    siblings: Tuple[Arm, ...]
    pool: Tuple[Arm, ...]
    weights: Dict[int, Number] = field(default_factory=dict)
    case: str = "light"
    pivot: Optional[int] = None

    @property
    def kept_edges(self) -> Tuple[int, ...]:
        """E_J."""
        return tuple(sorted({e for arm in self.kept for e in arm.edges}))

    def check(self, y: FractionalAllocation, tol: float = DEFAULT_TOLERANCE) -> List[str]:
        """Describe every violated peeling condition."""
        problems: List[str] = []
        kept = {a.key for a in self.kept}
        dropped = {a.key for a in self.dropped}
        if not kept:
            problems.append("J is empty")
        if kept & dropped:
            problems.append("J and D intersect")
        if kept & {a.key for a in self.siblings}:
            problems.append("J contains a sibling of a dropped arm")
        both = edge_weights(list(self.kept) + list(self.dropped), y)
        only_kept = edge_weights(self.kept, y)
        for e in self.kept_edges:
            if both[e] < min(1, self.weights.get(e, 0)) - tol:
                problems.append(f"edge {e}: J and D cover {both[e]} < min(1, fw)")
            if only_kept[e] > LAYER_WEIGHT_LIMIT + tol:
                problems.append(f"edge {e}: J weight {only_kept[e]} > {LAYER_WEIGHT_LIMIT}")
        if arm_weight(self.kept, y) < 2 * arm_weight(self.dropped, y) - tol:
            problems.append("FracWt(J) < 2 FracWt(D)")
        return problems


def _siblings(dropped: Iterable[Arm], inst: Instance) -> Tuple[Arm, ...]:
    siblings = []
    for arm in dropped:
        other = decompose_arms(inst.jobs[arm.job], inst.topology).sibling(arm)
        if other is not None:
            siblings.append(other)
    return tuple(siblings)


def peel(
    arms: Sequence[Arm], y: FractionalAllocation, tol: float = DEFAULT_TOLERANCE
) -> PeelResult:
    """Find J and D for one layer.

    When some edge carries fractional weight above 6, the deepest such edge t
    is examined: either the arms ending at t carry more than 3 (nested arms
    are split by depth) or the arms running through t into its child
    subtrees do (a prefix of children reaching 3 is taken together with all
    arms inside those subtrees).
    """
    inst = y.instance
    topology = inst.topology
    topology.require_tree("peel")
    pool = tuple(a for a in arms if y[a.job] > 0)
    if not pool:
        raise InstanceError("peel needs a non-zero fractional allocation")
    weights = edge_weights(pool, y)
    overloaded = [e for e, w in weights.items() if w > PEEL_LIMIT + tol]
    if not overloaded:
        return PeelResult(pool, (), (), pool, weights, "light")
    pivot = min(overloaded, key=lambda e: (-topology.depth(e), e))
    terminating = [a for a in pool if a.bottom == pivot]
    if arm_weight(terminating, y) > TERMINATING_LIMIT:
        order = _depth_order(terminating, topology)
        prefix: Number = 0
        last = len(order)
        for i, arm in enumerate(order):
            prefix += y[arm.job]
            if prefix >= TERMINATING_LIMIT - tol:
                last = i + 1
                break
        split = 1
        suffix: Number = 0
        for i in range(last - 1, -1, -1):
            suffix += y[order[i].job]
            if suffix >= 1 - tol:
                split = i + 1
                break
        kept, dropped = order[:split], order[split:last]
        case = "terminating"
    else:
        through: Dict[int, List[Arm]] = defaultdict(list)
        for arm in pool:
            if pivot in arm.edges and arm.bottom != pivot:
                through[arm.edges[arm.edges.index(pivot) + 1]].append(arm)
        children = topology.children(pivot)
        count = len(children)
        running: Number = 0
        for i, child in enumerate(children):
            running += arm_weight(through[child], y)
            if running >= TERMINATING_LIMIT - tol:
                count = i + 1
                break
        chosen = children[:count]
        selected = [a for child in chosen for a in through[child]]
        inside = [
            a for a in pool if any(topology.is_ancestor(child, a.top) for child in chosen)
        ]
        order = _depth_order(selected, topology)
        target = 2 * arm_weight(order, y) / 3
        prefix = 0
        split = len(order)
        for i, arm in enumerate(order):
            prefix += y[arm.job]
            if prefix >= target - tol:
                split = i + 1
                break
        kept = order[:split] + sorted(inside, key=lambda a: a.key)
        dropped = order[split:]
        case = "subtree"
    result = PeelResult(
        tuple(kept), tuple(dropped), _siblings(dropped, inst), pool, weights, case, pivot
    )
    _LOGGER.debug(
        "Peel at edge %s (%s): %d kept, %d dropped", pivot, case, len(kept), len(dropped)
    )
    return result


@dataclass(frozen=True)
class Layer:
    """One layer: the edge copies T_k and the arms A_k placed on them."""

    id: int
    copies: Tuple[Tuple[int, int], ...]
    arms: Tuple[Arm, ...] = ()
    filler: bool = False

    @property
    def edges(self) -> Tuple[int, ...]:
        """Edge ids of the layer."""
        return tuple(e for e, _ in self.copies)

    def copy_of(self, edge: int) -> Optional[int]:
        """Copy index of ``edge`` in this layer."""
        for e, r in self.copies:
            if e == edge:
                return r
        return None


@dataclass(frozen=True, eq=False)
class LayeredAllocation:
    """Edge-copy layers, an arm partition over them and the weights ỹ."""

    instance: Instance
    layers: Tuple[Layer, ...]
    weights: FractionalAllocation
    capacities: Tuple[int, ...]
    trace: Tuple[PeelResult, ...] = ()
    label: str = ""

    def arm_layers(self) -> Dict[ArmKey, int]:
        """(job, side) → layer id."""
        return {arm.key: layer.id for layer in self.layers for arm in layer.arms}

    def job_layers(self, job_id: int) -> Tuple[Optional[int], Optional[int]]:
        """Layers of the left and right arm of a job."""
        placed = self.arm_layers()
        return placed.get((job_id, LEFT)), placed.get((job_id, RIGHT))

    def edge_weight(self, layer_id: int, edge: int) -> Number:
        """Σ ỹ over arms of the layer containing ``edge``."""
        layer = self.layers[layer_id]
        return total(self.weights[a.job] for a in layer.arms if edge in a.edges)

    def value(self) -> Number:
        """FracVal(ỹ)."""
        return frac_val(self.weights)

    def violations(self, tol: float = DEFAULT_TOLERANCE) -> List[str]:
        """Describe every violated layered-allocation invariant."""
        problems: List[str] = []
        seen: Set[Tuple[int, int]] = set()
        for layer in self.layers:
            for e, r in layer.copies:
                if not 1 <= r <= self.capacities[e]:
                    problems.append(f"layer {layer.id} uses missing copy ({e}, {r})")
                elif (e, r) in seen:
                    problems.append(f"copy ({e}, {r}) appears in two layers")
                seen.add((e, r))
        expected = sum(self.capacities)
        if len(seen) != expected:
            problems.append(f"layers cover {len(seen)} of {expected} edge copies")
        placed: Dict[ArmKey, List[int]] = defaultdict(list)
        for layer in self.layers:
            edges = set(layer.edges)
            for arm in layer.arms:
                placed[arm.key].append(layer.id)
                if not set(arm.edges) <= edges:
                    problems.append(f"arm {arm.key} leaves layer {layer.id}")
        topology = self.instance.topology
        for j in self.weights.support():
            for arm in decompose_arms(self.instance.jobs[j], topology).arms:
                if len(placed.get(arm.key, [])) != 1:
                    problems.append(f"arm {arm.key} is placed {len(placed.get(arm.key, []))} times")
        for layer in self.layers:
            for e in layer.edges:
                weight = self.edge_weight(layer.id, e)
                if weight > 1 + tol:
                    problems.append(f"layer {layer.id} edge {e} carries {weight} > 1")
        return problems

    def validate(self, tol: float = DEFAULT_TOLERANCE) -> LayeredAllocation:
        """Raise AllocationError unless every invariant holds."""
        problems = self.violations(tol)
        if problems:
            raise AllocationError(f"Invalid layered allocation: {problems[0]}", details=problems)
        return self


def _filler_layers(
    used: Sequence[int], capacities: Sequence[int], first_id: int
) -> List[Layer]:
    layers = []
    for r in range(1, max(capacities, default=0) + 1):
        copies = tuple((e, r) for e in range(len(capacities)) if used[e] < r <= capacities[e])
        if copies:
            layers.append(Layer(first_id + len(layers), copies, (), filler=True))
    return layers


def build_layered_allocation(
    x: FractionalAllocation,
    capacities: Optional[Sequence[int]] = None,
    tol: float = DEFAULT_TOLERANCE,
    label: str = "layered",
) -> LayeredAllocation:
    """Peel repeatedly; every peel consumes one copy of each edge in E_J.

    Arms later dropped as siblings are removed from their layers and every
    surviving job receives ỹ_j = x_j / 7.
    """
    inst = x.instance
    topology = inst.topology
    topology.require_tree("build_layered_allocation")
    caps = tuple(int(c) for c in (inst.capacities if capacities is None else capacities))
    pool: List[Arm] = [
        arm for j in x.support() for arm in decompose_arms(inst.jobs[j], topology).arms
    ]
    used = [0] * inst.n_items
    staged: List[Tuple[Tuple[Tuple[int, int], ...], Tuple[Arm, ...]]] = []
    trace: List[PeelResult] = []
    discarded: Set[ArmKey] = set()
    while pool:
        result = peel(pool, x, tol)
        trace.append(result)
        copies = []
        for e in result.kept_edges:
            used[e] += 1
            if used[e] > caps[e]:
                raise AllocationError(
                    f"Layer {len(staged)} needs copy {used[e]} of edge {e} "
                    f"(capacity {caps[e]})"
                )
            copies.append((e, used[e]))
        staged.append((tuple(copies), result.kept))
        removed = {a.key for a in result.kept + result.dropped + result.siblings}
        discarded |= {a.key for a in result.siblings}
        pool = [a for a in pool if a.key not in removed]
    placed = {a.key for _, arms in staged for a in arms if a.key not in discarded}
    survivors = [
        j
        for j in x.support()
        if all(a.key in placed for a in decompose_arms(inst.jobs[j], topology).arms)
    ]
    alive = set(survivors)
    layers = [
        Layer(k, copies, tuple(a for a in arms if a.key in placed and a.job in alive))
        for k, (copies, arms) in enumerate(staged)
    ]
    layers.extend(_filler_layers(used, caps, len(layers)))
    seventh: Number = Fraction(1, LAYER_WEIGHT_LIMIT) if x.exact else 1 / LAYER_WEIGHT_LIMIT
    weights = x.restrict(survivors).scaled(seventh)
    _LOGGER.debug(
        "Layered %d of %d jobs into %d layers (%d peels)",
        len(survivors),
        len(x.support()),
        len(layers),
        len(trace),
    )
    allocation = LayeredAllocation(inst, tuple(layers), weights, caps, tuple(trace), label)
    return allocation.validate(tol)


@dataclass(frozen=True, eq=False)
class ValueClassPartition:
    """Dyadic value classes of an allocation and the chosen class C."""

    classes: Dict[int, Tuple[int, ...]]
    chosen: int
    allocation: FractionalAllocation
    v_min: Number

    @property
    def count(self) -> int:
        """Number of value classes spanned by the support."""
        return max(self.classes, default=-1) + 1


def value_class(value: Number, v_min: Number) -> int:
    """Class c with v_min·2^c < v ≤ v_min·2^{c+1} (class 0 also holds v_min)."""
    return max(0, ceil_log2(Fraction(value) / Fraction(v_min)) - 1)


def partition_value_classes(y: FractionalAllocation) -> ValueClassPartition:
    """Split the support into classes of values within a factor 2; keep the richest."""
    inst = y.instance
    support = y.support()
    if not support:
        raise InstanceError("partition_value_classes needs a non-zero allocation")
    v_min = min(inst.jobs[j].value for j in support)
    classes: Dict[int, List[int]] = defaultdict(list)
    for j in support:
        classes[value_class(inst.jobs[j].value, v_min)].append(j)
    values = {c: frac_val(y, ids) for c, ids in classes.items()}
    chosen = max(sorted(values), key=lambda c: (values[c], -c))
    _LOGGER.debug("Value class %d of %d chosen", chosen, len(classes))
    return ValueClassPartition(
        {c: tuple(ids) for c, ids in sorted(classes.items())},
        chosen,
        y.restrict(classes[chosen]),
        v_min,
    )


def tree_large_market_split(
    inst: Instance, y: FractionalAllocation, tol: float = DEFAULT_TOLERANCE
) -> List[SubMarket]:
    """Split jobs into k = ⌊B/2⌋ value bands of ratio α = H^{1/k}, halving weights."""
    caps = tuple(int(c) for c in inst.capacities)
    if inst.min_capacity < 2 or not y.support():
        return [SubMarket(0, y.support(), caps, y, "identity")]
    k = inst.min_capacity // 2
    values = [inst.jobs[j].value for j in y.support()]
    v_min = min(values)
    spread = max(values) / v_min
    exact = y.exact
    bands: Dict[int, List[int]] = defaultdict(list)
    for j in y.support():
        ratio = inst.jobs[j].value / v_min
        band = 1
        while band < k and not _within(ratio, spread, band, k, exact, tol):
            band += 1
        bands[band - 1].append(j)
    half: Number = Fraction(1, 2) if exact else 0.5
    markets: List[SubMarket] = []
    used = np.zeros(inst.n_items, dtype=int)
    for i in range(k):
        part = y.restrict(bands[i]).scaled(half)
        supply = tuple(ceil_with_tolerance(load, tol) for load in part.item_loads())
        used += np.array(supply, dtype=int)
        markets.append(SubMarket(i, tuple(bands[i]), supply, part, f"value-band-{i + 1}"))
    if np.any(used > inst.capacities):
        raise AllocationError(
            "Sub-market supplies exceed the edge capacities",
            details={"used": used.tolist(), "capacities": list(caps)},
        )
    _LOGGER.debug("Tree large-market split into %d value bands", k)
    return markets


def _within(ratio: Number, spread: Number, band: int, k: int, exact: bool, tol: float) -> bool:
    """ratio ≤ spread^{band/k}."""
    if exact:
        return Fraction(ratio) ** k <= Fraction(spread) ** band
    return math.log(float(ratio)) * k <= math.log(float(spread)) * band + tol
