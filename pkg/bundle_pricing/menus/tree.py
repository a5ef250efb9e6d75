"""Tree menu: per-layer edge prices with a floor on every monotone path."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..allocation import FractionalAllocation
from ..exceptions import InstanceError
from ..models import Job, Topology
from ..numeric import Number, format_number, parse_number, total
from ..tree_layering import LayeredAllocation, decompose_arms
from .base import BaseMenu, MenuState, Quote

_LOGGER = logging.getLogger(__name__)

PER_ARM = "per_arm"
PER_PATH = "per_path"
FLOOR_MODES = (PER_ARM, PER_PATH)


@dataclass(frozen=True)
class EdgePrice:
    """Price p̂ of one edge copy in a layer."""

    edge: int
    copy: int
    price: Number


@dataclass(frozen=True)
class TreeLayerPrices:
    """Edge copies of one layer, their prices and the path floor."""

    id: int
    edges: Tuple[EdgePrice, ...]
    floor: Number
    _lookup: Dict[int, EdgePrice] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        """Index the edges."""
        object.__setattr__(self, "_lookup", {e.edge: e for e in self.edges})

    def get(self, edge: int) -> Optional[EdgePrice]:
        """Edge price entry, None when the edge is not in the layer."""
        return self._lookup.get(edge)

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> TreeLayerPrices:
        """Create a layer from its file representation."""
        return cls(
            id=int(data["id"]),
            edges=tuple(
                EdgePrice(int(e["edge"]), int(e["copy"]), parse_number(e["price"]))
                for e in data.get("edges", [])
            ),
            floor=parse_number(data["floor"]),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "id": self.id,
            "floor": format_number(self.floor),
            "edges": [
                {"edge": e.edge, "copy": e.copy, "price": format_number(e.price)}
                for e in self.edges
            ],
        }


@dataclass(frozen=True)
class _ArmOffer:
    layer: int
    raw: Number
    floor: Number
    copies: Tuple[Tuple[int, int], ...]


class TreeMenu(BaseMenu):
    """Monotone path bundles inside one layer cost max(floor, Σ p̂_e).

    Prices are kept in original value units; ``scale`` is the value that was
    normalized to 1 (the floor of a single-class menu).
    """

    closes_parts = False

    def __init__(
        self,
        topology: Topology,
        layers: Sequence[TreeLayerPrices],
        scale: Number = 1.0,
        floor_mode: str = PER_ARM,
    ) -> None:
        """Initialize the menu."""
        super().__init__(topology)
        topology.require_tree("TreeMenu")
        if floor_mode not in FLOOR_MODES:
            raise ValueError(f"Unsupported floor mode: {floor_mode}")
        self.layers: Tuple[TreeLayerPrices, ...] = tuple(layers)
        self.scale = scale
        self.floor_mode = floor_mode

    @property
    def kind(self) -> str:
        """Return the menu kind."""
        return "tree"

    @property
    def capacities(self) -> Tuple[int, ...]:
        """Highest copy index offered per edge."""
        caps = [0] * self.topology.size
        for layer in self.layers:
            for e in layer.edges:
                caps[e.edge] = max(caps[e.edge], e.copy)
        return tuple(caps)

    def normalized_prices(self) -> Dict[Tuple[int, int], Number]:
        """(layer, edge) → p̂ in normalized units (v_min = 1)."""
        return {
            (layer.id, e.edge): e.price / self.scale
            for layer in self.layers
            for e in layer.edges
        }

    def _offers(self, edges: Sequence[int], sold: set) -> List[_ArmOffer]:
        offers = []
        for layer in self.layers:
            found = [layer.get(e) for e in edges]
            if any(f is None for f in found):
                continue
            copies = tuple((f.edge, f.copy) for f in found if f is not None)
            if sold.intersection(copies):
                continue
            raw = total(f.price for f in found if f is not None)
            offers.append(_ArmOffer(layer.id, raw, layer.floor, copies))
        return offers

    def quote(
        self, items: Sequence[int], state: Optional[MenuState] = None
    ) -> Optional[Quote]:
        """Price a path arm by arm over the layers with all arm copies unsold."""
        query = self.check_query(items)
        query_job = Job(-1, -1, -1, query, 0, 0)
        arms = decompose_arms(query_job, self.topology).arms
        sold = state.sold if state is not None else set()
        chosen: List[_ArmOffer] = []
        for arm in arms:
            offers = self._offers(arm.edges, sold)
            if not offers:
                return None
            if self.floor_mode == PER_ARM:
                chosen.append(min(offers, key=lambda o: (max(o.floor, o.raw), o.layer)))
            else:
                chosen.append(min(offers, key=lambda o: (o.raw, o.layer)))
        if self.floor_mode == PER_ARM:
            price = total(max(o.floor, o.raw) for o in chosen)
        else:
            price = max(max(o.floor for o in chosen), total(o.raw for o in chosen))
        return Quote(
            price,
            tuple(o.layer for o in chosen),
            tuple(c for o in chosen for c in o.copies),
        )

    def entries(self) -> List[Tuple[str, Number]]:
        """(layer/edge@copy, p̂) rows followed by the layer floors."""
        rows: List[Tuple[str, Number]] = []
        for layer in self.layers:
            for e in layer.edges:
                rows.append((f"layer {layer.id} edge {e.edge}@{e.copy}", e.price))
        for layer in self.layers:
            rows.append((f"layer {layer.id} floor", layer.floor))
        return rows

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the menu file representation."""
        return {
            "kind": self.kind,
            "topology": self.topology.to_dict(),
            "scale": format_number(self.scale),
            "floor_mode": self.floor_mode,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> TreeMenu:
        """Create a menu from its file representation."""
        return cls(
            Topology.from_json(data["topology"]),
            [TreeLayerPrices.from_json(layer) for layer in data.get("layers", [])],
            parse_number(data.get("scale", 1.0)),
            data.get("floor_mode", PER_ARM),
        )


def normalization_factor(y: FractionalAllocation) -> Number:
    """v_min over the support of ``y`` (1 for an empty allocation)."""
    support = y.support()
    if not support:
        return Fraction(1) if y.exact else 1.0
    return min(y.instance.jobs[j].value for j in support)


def price_layered_allocation(
    layered: LayeredAllocation,
    floor_mode: str = PER_ARM,
    scale: Optional[Number] = None,
) -> TreeMenu:
    """p̂_e = Σ ¼·ỹ_j·v_j over arms whose peak edge is e in their layer.

    Every layer gets the floor ``scale`` (the normalized value 1).
    """
    inst = layered.instance
    y = layered.weights
    scale = normalization_factor(y) if scale is None else scale
    quarter: Number = Fraction(1, 4) if y.exact else 0.25
    layers = []
    for layer in layered.layers:
        contributions: Dict[int, List[Number]] = defaultdict(list)
        for arm in layer.arms:
            contributions[arm.top].append(quarter * y[arm.job] * inst.jobs[arm.job].value)
        edges = tuple(
            EdgePrice(e, r, total(contributions.get(e, [])) if e in contributions else 0 * scale)
            for e, r in layer.copies
        )
        layers.append(TreeLayerPrices(layer.id, edges, scale))
    _LOGGER.debug("Tree menu over %d layers, scale %s", len(layers), scale)
    return TreeMenu(inst.topology, layers, scale, floor_mode)


def compose_tree_menus(
    topology: Topology, menus: Sequence[TreeMenu], floor_mode: Optional[str] = None
) -> TreeMenu:
    """Stack menus onto disjoint edge copies so buyers may buy from any of them."""
    if not menus:
        raise InstanceError("compose_tree_menus needs at least one menu")
    offsets = [0] * topology.size
    layers: List[TreeLayerPrices] = []
    for menu in menus:
        for layer in menu.layers:
            edges = tuple(
                EdgePrice(e.edge, offsets[e.edge] + e.copy, e.price) for e in layer.edges
            )
            layers.append(TreeLayerPrices(len(layers), edges, layer.floor))
        for edge, cap in enumerate(menu.capacities):
            offsets[edge] += cap
    scale = min(menu.scale for menu in menus)
    return TreeMenu(topology, layers, scale, floor_mode or menus[0].floor_mode)
