"""Instance generators: lower-bound constructions and random families."""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import InstanceError
from .models import ROOT, Instance, Item, JobSpec, ScenarioSpec, Topology
from .numeric import Number, to_rational
from .simulation import ArrivalPolicy

_LOGGER = logging.getLogger(__name__)

MAX_TREE_HEIGHT = 10

Range = Tuple[float, float]
IntRange = Tuple[int, int]


def gen_footnote_single_item(eps: Number, rational: bool = False) -> Instance:
    """One item; buyer 0 values it 1 surely, buyer 1 values it 1/ε with probability ε."""
    eps = to_rational(eps) if rational else eps
    if not 0 < eps < 1:
        raise InstanceError(f"eps must lie in (0, 1), got {eps}")
    one: Number = Fraction(1) if rational else 1.0
    buyers: List[List[ScenarioSpec]] = [
        [(one, [((0, 0), one)])],
        [(eps, [((0, 0), one / eps)])],
    ]
    return Instance.create(
        Topology.line(1), [Item(0, 1)], buyers, name=f"single-item-eps{float(eps):g}"
    )


def gen_footnote_item_pricing(
    length: int, eps: Number, rational: bool = False
) -> Instance:
    """L unit items; a unit-demand buyer of value 1 and a buyer of all items at L − ε.

    Unit demand is encoded as L single-item jobs in one scenario.
    """
    if length < 2:
        raise InstanceError(f"item-pricing instance needs L >= 2, got {length}")
    eps = to_rational(eps) if rational else eps
    if not 0 < eps < 1:
        raise InstanceError(f"eps must lie in (0, 1), got {eps}")
    one: Number = Fraction(1) if rational else 1.0
    unit_demand: List[JobSpec] = [((t, t), one) for t in range(length)]
    buyers: List[List[ScenarioSpec]] = [
        [(one, unit_demand)],
        [(one, [((0, length - 1), length * one - eps)])],
    ]
    items = [Item(t, 1) for t in range(length)]
    return Instance.create(
        Topology.line(length), items, buyers, name=f"item-pricing-L{length}"
    )


def binary_tree_parents(height: int) -> List[int]:
    """Parent edges of a complete binary tree in heap order."""
    return [ROOT if e < 2 else (e - 2) // 2 for e in range(2 ** (height + 1) - 2)]


def _leaves_below(edge: int, depth: int, height: int) -> List[int]:
    frontier = [edge]
    for _ in range(height - depth):
        frontier = [child for e in frontier for child in (2 * e + 2, 2 * e + 3)]
    return frontier


def gen_tree_lower_bound(height: int, rational: bool = False) -> Instance:
    """Complete binary tree of unit edges with one buyer per (edge, leaf below) pair.

    Edges at level ℓ (leaf edges have level 0) carry buyers of value 2^ℓ who
    arrive with probability 2^-ℓ, each wanting the path from the edge down to
    the leaf. Buyers are numbered by level, then edge, then leaf.
    """
    if not 2 <= height <= MAX_TREE_HEIGHT:
        raise InstanceError(
            f"tree lower bound height must lie in [2, {MAX_TREE_HEIGHT}], got {height}"
        )
    topology = Topology.tree(binary_tree_parents(height))
    buyers: List[List[ScenarioSpec]] = []
    for level in range(height):
        depth = height - level
        value: Number = Fraction(2**level) if rational else float(2**level)
        probability: Number = 1 / value
        for edge in range(2**depth - 2, 2 ** (depth + 1) - 2):
            for leaf in _leaves_below(edge, depth, height):
                path = [leaf]
                while path[-1] != edge:
                    path.append(topology.parents[path[-1]])
                buyers.append([(probability, [(sorted(path), value)])])
    items = [Item(e, 1) for e in range(topology.size)]
    inst = Instance.create(topology, items, buyers, name=f"tree-lb-L{height}")
    _LOGGER.debug("Tree lower bound L=%d: %d buyers", height, len(buyers))
    return inst


def tree_lower_bound_order(inst: Instance) -> ArrivalPolicy:
    """Buyers from the lowest level to the highest, ties by buyer id."""

    def level_value(buyer: int) -> Number:
        return max(
            (inst.jobs[j].value for s in inst.buyers[buyer].scenarios for j in s.jobs),
            default=0,
        )

    order = sorted(range(len(inst.buyers)), key=lambda i: (level_value(i), i))
    return ArrivalPolicy.fixed(order)


def _probabilities(rng: np.random.Generator, count: int) -> List[float]:
    """``count`` scenario probabilities leaving a positive zero-valuation mass."""
    shares = rng.integers(1, 10, size=count + 1)
    return [round(float(s) / float(shares.sum()), 6) for s in shares[:count]]


def _items(
    rng: np.random.Generator, size: int, capacity_range: IntRange, costs: bool
) -> List[Item]:
    low, high = capacity_range
    items = []
    for t in range(size):
        capacity = int(rng.integers(low, high + 1))
        schedule: Optional[Tuple[float, ...]] = None
        if costs:
            schedule = tuple(
                round(float(c), 3) for c in np.sort(rng.uniform(0.0, 2.0, capacity))
            )
        items.append(Item(t, capacity, schedule))
    return items


def _comparable(a: Sequence[int], b: Sequence[int]) -> bool:
    sa, sb = set(a), set(b)
    return sa <= sb or sb <= sa


def _scenario_jobs(
    rng: np.random.Generator,
    bundles: Sequence[Tuple[int, ...]],
    value_range: Range,
) -> List[Tuple[Tuple[int, ...], float]]:
    """Jobs with pairwise incomparable bundles."""
    kept: List[Tuple[Tuple[int, ...], float]] = []
    for bundle in bundles:
        if any(_comparable(bundle, other) for other, _ in kept):
            continue
        kept.append((bundle, round(float(rng.uniform(*value_range)), 3)))
    return kept


def gen_random_interval(
    n_items: int,
    n_buyers: int,
    scenarios: int = 2,
    max_len: int = 3,
    value_range: Range = (1.0, 10.0),
    capacity_range: IntRange = (1, 1),
    seed: int = 0,
    costs: bool = False,
    jobs_per_scenario: int = 2,
) -> Instance:
    """Random line instance, reproducible from ``seed``."""
    if min(n_items, n_buyers, scenarios, max_len, jobs_per_scenario) < 1:
        raise InstanceError("random interval parameters must be positive")
    if not 0 < value_range[0] <= value_range[1] or capacity_range[0] < 1:
        raise InstanceError(f"bad ranges {value_range} / {capacity_range}")
    rng = np.random.default_rng(seed)
    items = _items(rng, n_items, capacity_range, costs)
    max_len = min(max_len, n_items)
    buyers: List[List[ScenarioSpec]] = []
    for _ in range(n_buyers):
        count = int(rng.integers(1, scenarios + 1))
        specs: List[ScenarioSpec] = []
        for probability in _probabilities(rng, count):
            bundles = []
            for _ in range(int(rng.integers(1, jobs_per_scenario + 1))):
                length = int(rng.integers(1, max_len + 1))
                start = int(rng.integers(0, n_items - length + 1))
                bundles.append(tuple(range(start, start + length)))
            jobs = _scenario_jobs(rng, bundles, value_range)
            specs.append((probability, [((b[0], b[-1]), v) for b, v in jobs]))
        buyers.append(specs)
    return Instance.create(
        Topology.line(n_items), items, buyers, name=f"random-interval-s{seed}"
    )


def random_tree_parents(rng: np.random.Generator, n_edges: int) -> List[int]:
    """Uniform attachment: edge e hangs below a uniform vertex among 0..e."""
    return [int(rng.integers(0, e + 1)) - 1 for e in range(n_edges)]


def gen_random_tree(
    n_edges: int,
    n_buyers: int,
    scenarios: int = 2,
    value_range: Range = (1.0, 10.0),
    capacity_range: IntRange = (1, 1),
    seed: int = 0,
    costs: bool = False,
    jobs_per_scenario: int = 2,
) -> Instance:
    """Random tree with random simple paths between vertex pairs."""
    if min(n_edges, n_buyers, scenarios, jobs_per_scenario) < 1:
        raise InstanceError("random tree parameters must be positive")
    if not 0 < value_range[0] <= value_range[1] or capacity_range[0] < 1:
        raise InstanceError(f"bad ranges {value_range} / {capacity_range}")
    rng = np.random.default_rng(seed)
    topology = Topology.tree(random_tree_parents(rng, n_edges))
    items = _items(rng, n_edges, capacity_range, costs)
    buyers: List[List[ScenarioSpec]] = []
    for _ in range(n_buyers):
        count = int(rng.integers(1, scenarios + 1))
        specs: List[ScenarioSpec] = []
        for probability in _probabilities(rng, count):
            bundles = []
            for _ in range(int(rng.integers(1, jobs_per_scenario + 1))):
                u, w = (int(v) for v in rng.choice(n_edges + 1, size=2, replace=False))
                bundles.append(topology.path_between(u, w))
            jobs = _scenario_jobs(rng, bundles, value_range)
            specs.append((probability, [(list(b), v) for b, v in jobs]))
        buyers.append(specs)
    return Instance.create(topology, items, buyers, name=f"random-tree-s{seed}")


GENERATORS: Dict[str, Callable[..., Instance]] = {
    "single-item": gen_footnote_single_item,
    "item-pricing": gen_footnote_item_pricing,
    "tree-lb": gen_tree_lower_bound,
    "random-interval": gen_random_interval,
    "random-tree": gen_random_tree,
}

SEEDED_GENERATORS = ("random-interval", "random-tree")


def get_generator(name: str) -> Callable[..., Instance]:
    """Get the generator registered under ``name``."""
    if name in GENERATORS:
        return GENERATORS[name]
    _LOGGER.warning("Unsupported generator: %s", name)
    raise ValueError(f"Unsupported generator: {name}")


def generate(
    name: str, params: Dict[str, Any], seed: int = 0, rational: bool = False
) -> Instance:
    """Run a generator with keyword ``params``; random families get ``seed``."""
    try:
        generator = get_generator(name)
    except ValueError as err:
        raise InstanceError(str(err), details=name) from err
    kwargs = dict(params)
    if name in SEEDED_GENERATORS:
        kwargs.setdefault("seed", seed)
    try:
        inst = generator(**kwargs)
    except TypeError as err:
        raise InstanceError(f"Bad parameters for generator {name}: {err}") from err
    if rational and not inst.is_rational:
        inst = inst.to_rational()
    return inst
