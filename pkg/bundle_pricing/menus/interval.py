"""Static anonymous interval bundle menu."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..exceptions import AllocationError
from ..models import Instance, Topology
from ..numeric import Number, format_number, parse_number
from ..unit_allocation import UnitAllocation
from .base import BaseMenu, MenuState, Quote, cheapest_cover

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class MenuEntry:
    """A bundle of item copies [start, end] and its price."""

    id: int
    start: int
    end: int
    copies: Tuple[int, ...]
    price: Number

    @property
    def item_copies(self) -> Tuple[Tuple[int, int], ...]:
        """(item, copy) pairs of the bundle."""
        return tuple(zip(range(self.start, self.end + 1), self.copies))

    def descriptor(self) -> str:
        """Compact bundle text: ``start-end@copy`` or ``item:copy`` pairs."""
        if len(set(self.copies)) == 1:
            return f"{self.start}-{self.end}@{self.copies[0]}"
        return " ".join(f"{t}:{r}" for t, r in self.item_copies)

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> MenuEntry:
        """Create an entry from its file representation."""
        return cls(
            id=int(data["id"]),
            start=int(data["start"]),
            end=int(data["end"]),
            copies=tuple(int(r) for r in data["copies"]),
            price=parse_number(data["price"]),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "id": self.id,
            "start": self.start,
            "end": self.end,
            "copies": list(self.copies),
            "price": format_number(self.price),
        }


class IntervalMenu(BaseMenu):
    """Per-bundle prices; a query is priced as its cheapest cover by unsold bundles."""

    def __init__(self, topology: Topology, entries: Sequence[MenuEntry]) -> None:
        """Initialize the menu."""
        super().__init__(topology)
        topology.require_line("IntervalMenu")
        self.bundles: Tuple[MenuEntry, ...] = tuple(entries)
        seen = set()
        for entry in self.bundles:
            if entry.price < 0:
                raise AllocationError(f"Bundle {entry.id} has negative price {entry.price}")
            for copy in entry.item_copies:
                if copy in seen:
                    raise AllocationError(f"Copy {copy} is offered twice")
                seen.add(copy)
        self._by_id = {entry.id: entry for entry in self.bundles}

    @property
    def kind(self) -> str:
        """Return the menu kind."""
        return "interval"

    def bundle(self, entry_id: int) -> MenuEntry:
        """Look up an entry by id."""
        return self._by_id[entry_id]

    def quote(
        self, items: Sequence[int], state: Optional[MenuState] = None
    ) -> Optional[Quote]:
        """Sum of prices of the cheapest unsold bundle cover of ``items``."""
        query = self.check_query(items)
        closed = state.closed if state is not None else set()
        spans = [(e.id, e.start, e.end) for e in self.bundles if e.id not in closed]
        found = cheapest_cover(query[0], query[-1], spans, lambda p: self._by_id[p.entry].price)
        if found is None:
            return None
        price, pieces = found
        parts = tuple(piece.entry for piece in pieces)
        copies = tuple(c for entry_id in parts for c in self._by_id[entry_id].item_copies)
        return Quote(price, parts, copies)

    def entries(self) -> List[Tuple[str, Number]]:
        """(bundle descriptor, price) rows."""
        return [(entry.descriptor(), entry.price) for entry in self.bundles]

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the menu file representation."""
        return {
            "kind": self.kind,
            "topology": self.topology.to_dict(),
            "bundles": [entry.to_dict() for entry in self.bundles],
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> IntervalMenu:
        """Create a menu from its file representation."""
        return cls(
            Topology.from_json(data["topology"]),
            [MenuEntry.from_json(entry) for entry in data.get("bundles", [])],
        )


def price_unit_allocation(unit: UnitAllocation) -> IntervalMenu:
    """p_k = FracVal(x'_{A_k}) / (2·W_k) for every bundle with jobs."""
    entries = []
    for bundle in unit.for_sale():
        weight = unit.bundle_weight(bundle.id)
        if not weight > 0:
            raise AllocationError(f"Bundle {bundle.id} has members but zero weight")
        price = unit.bundle_value(bundle.id) / (2 * weight)
        entries.append(MenuEntry(bundle.id, bundle.start, bundle.end, bundle.copies, price))
    _LOGGER.debug("Interval menu with %d priced bundles", len(entries))
    return IntervalMenu(unit.instance.topology, entries)


def single_bundle_menu(inst: Instance, price: Number) -> IntervalMenu:
    """One bundle holding the first copy of every item."""
    n = inst.n_items
    return IntervalMenu(inst.topology, [MenuEntry(0, 0, n - 1, (1,) * n, price)])


def uniform_item_menu(inst: Instance, price: Number) -> IntervalMenu:
    """Every item copy sold on its own at the same price."""
    entries = []
    for item in inst.items:
        for r in range(1, item.capacity + 1):
            entries.append(MenuEntry(len(entries), item.id, item.id, (r,), price))
    return IntervalMenu(inst.topology, entries)
