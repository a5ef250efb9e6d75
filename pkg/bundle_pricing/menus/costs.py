"""Cost-aware adaptive menu: base price per bundle plus per-copy surcharges."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..exceptions import AllocationError
from ..models import Topology
from ..numeric import Number, format_number, parse_number, total
from ..unit_allocation import UnitAllocation
from .base import BaseMenu, MenuState, Piece, Quote, cheapest_cover

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class CostEntry:
    """Bundle τ_k with its base price p'_k and the cost of each copy."""

    id: int
    start: int
    end: int
    copies: Tuple[int, ...]
    base: Number
    surcharges: Tuple[Number, ...]

    def surcharge(self, first: int, last: int) -> Number:
        """Σ c_{t,r} over the items first..last of the bundle."""
        return total(self.surcharges[first - self.start : last - self.start + 1])

    def listed_price(self, first: int, last: int) -> Number:
        """Price of the interval [first, last] of τ_k."""
        return self.base + self.surcharge(first, last)

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> CostEntry:
        """Create an entry from its file representation."""
        return cls(
            id=int(data["id"]),
            start=int(data["start"]),
            end=int(data["end"]),
            copies=tuple(int(r) for r in data["copies"]),
            base=parse_number(data["base"]),
            surcharges=tuple(parse_number(c) for c in data["surcharges"]),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "id": self.id,
            "start": self.start,
            "end": self.end,
            "copies": list(self.copies),
            "base": format_number(self.base),
            "surcharges": [format_number(c) for c in self.surcharges],
        }


class CostAwareMenu(BaseMenu):
    """Any interval of an open bundle sells at base + surcharge.

    Selling part of τ_k withdraws the whole bundle from the menu.
    """

    def __init__(self, topology: Topology, entries: Sequence[CostEntry]) -> None:
        """Initialize the menu."""
        super().__init__(topology)
        topology.require_line("CostAwareMenu")
        self.bundles: Tuple[CostEntry, ...] = tuple(entries)
        for entry in self.bundles:
            if entry.base < 0 or any(c < 0 for c in entry.surcharges):
                raise AllocationError(f"Bundle {entry.id} has a negative price component")
        self._by_id = {entry.id: entry for entry in self.bundles}

    @property
    def kind(self) -> str:
        """Return the menu kind."""
        return "cost"

    def bundle(self, entry_id: int) -> CostEntry:
        """Look up an entry by id."""
        return self._by_id[entry_id]

    def _piece_price(self, piece: Piece) -> Number:
        return self._by_id[piece.entry].listed_price(piece.first, piece.last)

    def quote(
        self, items: Sequence[int], state: Optional[MenuState] = None
    ) -> Optional[Quote]:
        """Cheapest cover of ``items`` by intervals of open bundles."""
        query = self.check_query(items)
        closed = state.closed if state is not None else set()
        spans = [(e.id, e.start, e.end) for e in self.bundles if e.id not in closed]
        found = cheapest_cover(query[0], query[-1], spans, self._piece_price)
        if found is None:
            return None
        price, pieces = found
        copies = []
        costs = []
        for piece in pieces:
            entry = self._by_id[piece.entry]
            for t in range(piece.first, piece.last + 1):
                copies.append((t, entry.copies[t - entry.start]))
            costs.append(entry.surcharge(piece.first, piece.last))
        return Quote(price, tuple(p.entry for p in pieces), tuple(copies), total(costs))

    def entries(self) -> List[Tuple[str, Number]]:
        """(bundle descriptor, base price) rows."""
        rows = []
        for entry in self.bundles:
            if len(set(entry.copies)) == 1:
                text = f"{entry.start}-{entry.end}@{entry.copies[0]}"
            else:
                text = " ".join(
                    f"{t}:{r}" for t, r in zip(range(entry.start, entry.end + 1), entry.copies)
                )
            rows.append((f"{text} base", entry.base))
        return rows

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the menu file representation."""
        return {
            "kind": self.kind,
            "topology": self.topology.to_dict(),
            "bundles": [entry.to_dict() for entry in self.bundles],
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> CostAwareMenu:
        """Create a menu from its file representation."""
        return cls(
            Topology.from_json(data["topology"]),
            [CostEntry.from_json(entry) for entry in data.get("bundles", [])],
        )


def price_with_costs(unit: UnitAllocation) -> CostAwareMenu:
    """Base prices from shifted values v'_j, surcharges from the copy map τ."""
    inst = unit.instance
    entries = []
    for bundle in unit.for_sale():
        members = unit.members(bundle.id)
        weight = unit.bundle_weight(bundle.id)
        if not weight > 0:
            raise AllocationError(f"Bundle {bundle.id} has members but zero weight")
        base = unit.cost_aware_value(members) / (2 * weight)
        surcharges = tuple(
            inst.items[t].copy_cost(r) for t, r in zip(bundle.items, bundle.copies)
        )
        entries.append(
            CostEntry(bundle.id, bundle.start, bundle.end, bundle.copies, base, surcharges)
        )
    _LOGGER.debug("Cost-aware menu with %d bundles", len(entries))
    return CostAwareMenu(inst.topology, entries)
