"""Data models for bundle pricing instances."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from .exceptions import InstanceError, UnsupportedTopologyError
from .numeric import (
    DEFAULT_TOLERANCE,
    Number,
    format_number,
    parse_number,
    to_rational,
    total,
)

_LOGGER = logging.getLogger(__name__)

LINE = "line"
TREE = "tree"
ROOT = -1

BundleSpec = Union[Tuple[int, int], Sequence[int]]
JobSpec = Tuple[BundleSpec, Number]
ScenarioSpec = Tuple[Number, Sequence[JobSpec]]


@dataclass(frozen=True)
class Topology:
    """Line of items or rooted tree of edges.

    Tree edges are given by the index of their parent edge, ``-1`` for edges
    incident on the root. Edge ``e`` joins vertex ``e + 1`` to the lower
    vertex of its parent edge (vertex ``0`` is the root).
    """

    kind: str
    size: int
    parents: Tuple[int, ...] = ()
    _depths: Tuple[int, ...] = field(default=(), init=False, repr=False, compare=False)
    _children: Tuple[Tuple[int, ...], ...] = field(
        default=(), init=False, repr=False, compare=False
    )
    _tin: Tuple[int, ...] = field(default=(), init=False, repr=False, compare=False)
    _tout: Tuple[int, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        """Check structure and index the tree."""
        if self.kind not in (LINE, TREE):
            raise InstanceError(f"Unknown topology kind: {self.kind}")
        if self.size < 1:
            raise InstanceError(f"Topology needs at least one item, got {self.size}")
        if self.kind == LINE:
            return
        if len(self.parents) != self.size:
            raise InstanceError(
                f"Tree has {self.size} edges but {len(self.parents)} parent entries"
            )
        children: List[List[int]] = [[] for _ in range(self.size)]
        roots: List[int] = []
        for edge, parent in enumerate(self.parents):
            if parent == ROOT:
                roots.append(edge)
            elif 0 <= parent < self.size and parent != edge:
                children[parent].append(edge)
            else:
                raise InstanceError(f"Edge {edge} has invalid parent {parent}")
        depths = [0] * self.size
        tin = [0] * self.size
        tout = [0] * self.size
        clock = 0
        stack: List[Tuple[int, int, bool]] = [(edge, 1, False) for edge in reversed(roots)]
        while stack:
            edge, depth, done = stack.pop()
            if done:
                tout[edge] = clock
                clock += 1
                continue
            depths[edge] = depth
            tin[edge] = clock
            clock += 1
            stack.append((edge, depth, True))
            for child in reversed(children[edge]):
                stack.append((child, depth + 1, False))
        if any(depth == 0 for depth in depths):
            raise InstanceError("Tree parent pointers contain a cycle")
        object.__setattr__(self, "_depths", tuple(depths))
        object.__setattr__(self, "_children", tuple(tuple(c) for c in children))
        object.__setattr__(self, "_tin", tuple(tin))
        object.__setattr__(self, "_tout", tuple(tout))

    @classmethod
    def line(cls, size: int) -> Topology:
        """Create a line of ``size`` items."""
        return cls(kind=LINE, size=size)

    @classmethod
    def tree(cls, parents: Sequence[int]) -> Topology:
        """Create a rooted tree from parent-edge pointers."""
        return cls(kind=TREE, size=len(parents), parents=tuple(int(p) for p in parents))

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> Topology:
        """Create a topology from its file representation."""
        if LINE in data:
            return cls.line(int(data[LINE]))
        if TREE in data:
            return cls.tree(data[TREE].get("parents", []))
        raise InstanceError(f"Unknown topology: {data}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the file representation."""
        if self.is_line:
            return {LINE: self.size}
        return {TREE: {"parents": list(self.parents)}}

    @property
    def is_line(self) -> bool:
        """Return True for a line topology."""
        return self.kind == LINE

    @property
    def is_tree(self) -> bool:
        """Return True for a tree topology."""
        return self.kind == TREE

    def require_line(self, operation: str) -> None:
        """Raise unless this is a line."""
        if not self.is_line:
            raise UnsupportedTopologyError(f"{operation} needs a line topology")

    def require_tree(self, operation: str) -> None:
        """Raise unless this is a tree."""
        if not self.is_tree:
            raise UnsupportedTopologyError(f"{operation} needs a tree topology")

    def depth(self, edge: int) -> int:
        """Number of edges from the root down to and including ``edge``."""
        return self._depths[edge]

    def children(self, edge: int) -> Tuple[int, ...]:
        """Child edges of ``edge`` in increasing index order."""
        return self._children[edge]

    def is_ancestor(self, ancestor: int, edge: int) -> bool:
        """True when ``ancestor`` lies on the root path of ``edge`` (or equals it)."""
        return self._tin[ancestor] <= self._tin[edge] and self._tout[edge] <= self._tout[ancestor]

    def upper_vertex(self, edge: int) -> int:
        """Vertex of ``edge`` closer to the root."""
        parent = self.parents[edge]
        return 0 if parent == ROOT else parent + 1

    @staticmethod
    def lower_vertex(edge: int) -> int:
        """Vertex of ``edge`` farther from the root."""
        return edge + 1

    def graph(self) -> nx.Graph:
        """Tree as an undirected networkx graph with edge ids as attributes."""
        self.require_tree("graph")
        graph = nx.Graph()
        graph.add_nodes_from(range(self.size + 1))
        for edge in range(self.size):
            graph.add_edge(self.upper_vertex(edge), self.lower_vertex(edge), edge=edge)
        return graph

    def path_between(self, source: int, target: int) -> Tuple[int, ...]:
        """Edge ids on the tree path between two vertices."""
        graph = self.graph()
        vertices = nx.shortest_path(graph, source, target)
        return tuple(
            sorted(graph.edges[u, v]["edge"] for u, v in zip(vertices, vertices[1:]))
        )

    def rerooted(self, vertex: int) -> Tuple[Topology, Dict[int, int]]:
        """Same tree rooted at ``vertex``, with the old-to-new edge id map.

        New edge ids follow breadth-first order from the new root.
        """
        self.require_tree("rerooted")
        if not 0 <= vertex <= self.size:
            raise InstanceError(f"Vertex {vertex} is not in the tree")
        graph = self.graph()
        below: Dict[int, int] = {vertex: ROOT}
        parents: List[int] = []
        mapping: Dict[int, int] = {}
        for upper, lower in nx.bfs_edges(graph, vertex):
            mapping[graph.edges[upper, lower]["edge"]] = len(parents)
            below[lower] = len(parents)
            parents.append(below[upper])
        return Topology.tree(parents), mapping

    def is_simple_path(self, items: Sequence[int]) -> bool:
        """Check that ``items`` form an interval (line) or a simple path (tree)."""
        if not items or len(set(items)) != len(items):
            return False
        if any(item < 0 or item >= self.size for item in items):
            return False
        ordered = sorted(items)
        if self.is_line:
            return ordered[-1] - ordered[0] + 1 == len(ordered)
        subgraph = nx.Graph()
        for edge in ordered:
            subgraph.add_edge(self.upper_vertex(edge), self.lower_vertex(edge))
        if max(degree for _, degree in subgraph.degree()) > 2:
            return False
        return nx.is_connected(subgraph)


@dataclass(frozen=True)
class Item:
    """An item (line slot or tree edge) with its copies and per-copy costs."""

    id: int
    capacity: int
    costs: Optional[Tuple[Number, ...]] = None

    @classmethod
    def from_json(cls, item_id: int, data: Dict[str, Any]) -> Item:
        """Create an item from its file representation."""
        costs = data.get("costs")
        return cls(
            id=item_id,
            capacity=int(data.get("capacity", len(costs) if costs else 1)),
            costs=tuple(parse_number(c) for c in costs) if costs is not None else None,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the file representation."""
        data: Dict[str, Any] = {"capacity": self.capacity}
        if self.costs is not None:
            data["costs"] = [format_number(c) for c in self.costs]
        return data

    def copy_cost(self, copy: int) -> Number:
        """Marginal cost of copy ``copy`` (1-based); zero without a schedule."""
        if self.costs is None:
            return 0.0
        return self.costs[copy - 1]


@dataclass(frozen=True)
class Job:
    """A minimal desired bundle of one buyer scenario."""

    id: int
    buyer: int
    scenario: int
    items: Tuple[int, ...]
    value: Number
    probability: Number

    @property
    def length(self) -> int:
        """Number of items in the bundle."""
        return len(self.items)

    @property
    def start(self) -> int:
        """Lowest item index."""
        return self.items[0]

    @property
    def end(self) -> int:
        """Highest item index (inclusive)."""
        return self.items[-1]

    def bundle_json(self, topology: Topology) -> List[int]:
        """Bundle in file form: [start, end] on a line, edge list on a tree."""
        if topology.is_line:
            if not self.items:
                return [0, -1]
            return [self.start, self.end]
        return list(self.items)


@dataclass(frozen=True)
class Scenario:
    """One valuation scenario of a buyer."""

    index: int
    probability: Number
    jobs: Tuple[int, ...]


@dataclass(frozen=True)
class Buyer:
    """A buyer with a finite distribution over scenarios."""

    id: int
    scenarios: Tuple[Scenario, ...]

    @property
    def residual_probability(self) -> Number:
        """Mass of the implicit zero valuation."""
        mass = total(s.probability for s in self.scenarios)
        return (Fraction(1) if isinstance(mass, Fraction) else 1.0) - mass


@dataclass(frozen=True)
class Instance:
    """A complete pricing instance: topology, items and buyers."""

    topology: Topology
    items: Tuple[Item, ...]
    buyers: Tuple[Buyer, ...]
    jobs: Tuple[Job, ...]
    name: str = ""

    @classmethod
    def create(
        cls,
        topology: Topology,
        items: Sequence[Item],
        buyers: Sequence[Sequence[ScenarioSpec]],
        name: str = "",
    ) -> Instance:
        """Create an instance, assigning dense job ids in buyer order."""
        if len(items) != topology.size:
            raise InstanceError(
                f"Topology has {topology.size} items but {len(items)} item entries"
            )
        jobs: List[Job] = []
        buyer_models: List[Buyer] = []
        for buyer_id, scenarios in enumerate(buyers):
            scenario_models: List[Scenario] = []
            for index, (probability, job_specs) in enumerate(scenarios):
                ids: List[int] = []
                for bundle, value in job_specs:
                    ids.append(len(jobs))
                    jobs.append(
                        Job(
                            id=len(jobs),
                            buyer=buyer_id,
                            scenario=index,
                            items=_normalize_bundle(topology, bundle),
                            value=value,
                            probability=probability,
                        )
                    )
                scenario_models.append(Scenario(index, probability, tuple(ids)))
            buyer_models.append(Buyer(buyer_id, tuple(scenario_models)))
        return cls(topology, tuple(items), tuple(buyer_models), tuple(jobs), name)

    @classmethod
    def from_json(cls, data: Dict[str, Any], name: str = "") -> Instance:
        """Create an instance from its JSON-syntax file representation."""
        try:
            topology = Topology.from_json(data["topology"])
            items = [Item.from_json(i, item) for i, item in enumerate(data["items"])]
            buyers = [
                [
                    (
                        parse_number(scenario["prob"]),
                        [
                            (job["bundle"], parse_number(job["value"]))
                            for job in scenario.get("jobs", [])
                        ],
                    )
                    for scenario in buyer.get("scenarios", [])
                ]
                for buyer in data["buyers"]
            ]
        except (KeyError, TypeError, ValueError) as err:
            raise InstanceError(f"Malformed instance data: {err}") from err
        return cls.create(topology, items, buyers, name=data.get("name", name))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the JSON-syntax file representation."""
        data: Dict[str, Any] = {}
        if self.name:
            data["name"] = self.name
        data["topology"] = self.topology.to_dict()
        data["items"] = [item.to_dict() for item in self.items]
        data["buyers"] = [
            {
                "scenarios": [
                    {
                        "prob": format_number(scenario.probability),
                        "jobs": [
                            {
                                "bundle": self.jobs[j].bundle_json(self.topology),
                                "value": format_number(self.jobs[j].value),
                            }
                            for j in scenario.jobs
                        ],
                    }
                    for scenario in buyer.scenarios
                ]
            }
            for buyer in self.buyers
        ]
        return data

    @classmethod
    def load(cls, path: Union[str, Path]) -> Instance:
        """Load an instance file."""
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
        except (OSError, json.JSONDecodeError) as err:
            raise InstanceError(f"Cannot read instance file {path}: {err}") from err
        _LOGGER.debug("Loaded instance %s", path)
        return cls.from_json(data, name=path.stem)

    def dumps(self) -> str:
        """Serialize to the instance file text."""
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path: Union[str, Path]) -> None:
        """Write an instance file."""
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.dumps())

    @property
    def n_items(self) -> int:
        """Number of items (line slots or tree edges)."""
        return self.topology.size

    @property
    def n_jobs(self) -> int:
        """Number of jobs over all buyers and scenarios."""
        return len(self.jobs)

    @property
    def max_length(self) -> int:
        """L: maximum bundle length (at least 1)."""
        return max((job.length for job in self.jobs), default=1) or 1

    @property
    def value_ratio(self) -> Number:
        """H: ratio of the largest to the smallest positive job value."""
        values = [job.value for job in self.jobs if job.value > 0]
        if not values:
            return 1.0
        return max(values) / min(values)

    @property
    def min_capacity(self) -> int:
        """B: smallest item capacity."""
        return min(item.capacity for item in self.items)

    @property
    def capacities(self) -> np.ndarray:
        """Per-item capacities as an integer array."""
        return np.array([item.capacity for item in self.items], dtype=int)

    @property
    def has_costs(self) -> bool:
        """True when any item carries a cost schedule."""
        return any(item.costs is not None for item in self.items)

    @property
    def is_rational(self) -> bool:
        """True when job values are exact rationals."""
        return any(isinstance(job.value, Fraction) for job in self.jobs)

    def job(self, job_id: int) -> Job:
        """Look up a job, raising an input error for unknown ids."""
        if not 0 <= job_id < len(self.jobs):
            raise InstanceError(f"Unknown job id {job_id}")
        return self.jobs[job_id]

    def values(self) -> np.ndarray:
        """Job values indexed by job id."""
        dtype = object if self.is_rational else float
        return np.array([job.value for job in self.jobs], dtype=dtype)

    def jobs_by_item(self) -> List[List[int]]:
        """For every item, the ids of the jobs whose bundle contains it."""
        table: List[List[int]] = [[] for _ in range(self.n_items)]
        for job in self.jobs:
            for item in job.items:
                if 0 <= item < self.n_items:
                    table[item].append(job.id)
        return table

    def with_job_values(self, values: Sequence[Number]) -> Instance:
        """Copy of the instance with job values replaced."""
        jobs = tuple(replace(job, value=value) for job, value in zip(self.jobs, values))
        return replace(self, jobs=jobs)

    def rerooted(self, vertex: int) -> Instance:
        """Copy of a tree instance rooted at another vertex."""
        topology, mapping = self.topology.rerooted(vertex)
        items = tuple(
            replace(self.items[old], id=new)
            for old, new in sorted(mapping.items(), key=lambda pair: pair[1])
        )
        jobs = tuple(
            replace(job, items=tuple(sorted(mapping[e] for e in job.items)))
            for job in self.jobs
        )
        return replace(self, topology=topology, items=items, jobs=jobs)

    def to_rational(self) -> Instance:
        """Copy of the instance with every number converted to a Fraction."""
        items = tuple(
            replace(
                item,
                costs=tuple(to_rational(c) for c in item.costs)
                if item.costs is not None
                else None,
            )
            for item in self.items
        )
        buyers = tuple(
            replace(
                buyer,
                scenarios=tuple(
                    replace(s, probability=to_rational(s.probability))
                    for s in buyer.scenarios
                ),
            )
            for buyer in self.buyers
        )
        jobs = tuple(
            replace(job, value=to_rational(job.value), probability=to_rational(job.probability))
            for job in self.jobs
        )
        return replace(self, items=items, buyers=buyers, jobs=jobs)


def _normalize_bundle(topology: Topology, bundle: Any) -> Tuple[int, ...]:
    """Turn a file bundle into a sorted item tuple."""
    if topology.is_line:
        try:
            start, end = (int(b) for b in bundle)
        except (TypeError, ValueError) as err:
            raise InstanceError(f"Line bundle must be [start, end], got {bundle}") from err
        return tuple(range(start, end + 1))
    return tuple(sorted(int(edge) for edge in bundle))


@dataclass(frozen=True)
class Violation:
    """A single failed instance invariant."""

    code: str
    subject: str
    message: str


@dataclass
class ValidationReport:
    """Outcome of validate_instance: empty iff the instance is valid."""

    violations: List[Violation] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        """True when no invariant is violated."""
        return not self.violations

    def add(self, code: str, subject: str, message: str) -> None:
        """Record a violation."""
        self.violations.append(Violation(code, subject, message))

    def subjects(self) -> List[str]:
        """Subjects named by the violations."""
        return [v.subject for v in self.violations]

    def __str__(self) -> str:
        if self.is_valid:
            return "valid"
        return "\n".join(f"{v.subject}: {v.message} [{v.code}]" for v in self.violations)


def validate_instance(inst: Instance, tol: float = DEFAULT_TOLERANCE) -> ValidationReport:
    """List every violated instance invariant."""
    report = ValidationReport()
    for item in inst.items:
        subject = f"item {item.id}"
        if item.capacity < 1:
            report.add("capacity", subject, f"capacity {item.capacity} < 1")
        if item.costs is not None:
            if len(item.costs) != item.capacity:
                report.add(
                    "costs",
                    subject,
                    f"{len(item.costs)} copy costs for capacity {item.capacity}",
                )
            if any(c < 0 for c in item.costs):
                report.add("costs", subject, "negative copy cost")
            if any(b < a for a, b in zip(item.costs, item.costs[1:])):
                report.add("costs", subject, "copy costs are not non-decreasing")

    for buyer in inst.buyers:
        subject = f"buyer {buyer.id}"
        for scenario in buyer.scenarios:
            if not 0 < scenario.probability <= 1:
                report.add(
                    "probability",
                    subject,
                    f"scenario {scenario.index} probability {scenario.probability} not in (0, 1]",
                )
        mass = total(s.probability for s in buyer.scenarios)
        if mass > 1 + (0 if isinstance(mass, Fraction) else tol):
            report.add("scenario-mass", subject, f"scenario probabilities sum to {mass}")

    for job in inst.jobs:
        subject = f"job {job.id}"
        if not job.value > 0:
            report.add("value", subject, f"value {job.value} is not positive")
        if not inst.topology.is_simple_path(job.items):
            shape = "interval" if inst.topology.is_line else "simple path"
            report.add("bundle", subject, f"bundle {list(job.items)} is not a valid {shape}")

    for buyer in inst.buyers:
        for scenario in buyer.scenarios:
            _check_duplicates(inst, scenario, report)

    if not report.is_valid:
        _LOGGER.debug("Instance %s has %d violations", inst.name, len(report.violations))
    return report


def _check_duplicates(inst: Instance, scenario: Scenario, report: ValidationReport) -> None:
    """Flag jobs dominated by a sub-bundle of the same scenario."""
    jobs = [inst.jobs[j] for j in scenario.jobs]
    for job in jobs:
        bundle = set(job.items)
        for other in jobs:
            sub = set(other.items)
            if other.id == job.id or not sub <= bundle:
                continue
            if sub == bundle:
                dominated = job.value < other.value or (
                    job.value == other.value and job.id > other.id
                )
            else:
                dominated = job.value <= other.value
            if dominated:
                report.add(
                    "duplicate",
                    f"job {job.id}",
                    f"dominated by job {other.id} of the same scenario",
                )
                break
