"""Base menu class."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, Tuple

from ..exceptions import AllocationError, InstanceError
from ..models import Topology
from ..numeric import Number

_LOGGER = logging.getLogger(__name__)

Copy = Tuple[int, int]


@dataclass(frozen=True)
class Quote:
    """Price of a query bundle and what buying it consumes."""

    price: Number
    parts: Tuple[int, ...]
    copies: Tuple[Copy, ...]
    cost: Number = 0.0


@dataclass
class MenuState:
    """Runtime state of one mechanism run: sold copies and closed entries."""

    sold: Set[Copy] = field(default_factory=set)
    closed: Set[int] = field(default_factory=set)

    def copy(self) -> MenuState:
        """Independent clone."""
        return MenuState(set(self.sold), set(self.closed))


class BaseMenu(ABC):
    """Base class for posted bundle-price menus.

    A menu is static: quotes depend on the query and the menu state only.
    """

    closes_parts = True

    def __init__(self, topology: Topology) -> None:
        """Initialize the menu."""
        self.topology = topology

    @property
    @abstractmethod
    def kind(self) -> str:
        """Return the menu kind."""

    @abstractmethod
    def quote(
        self, items: Sequence[int], state: Optional[MenuState] = None
    ) -> Optional[Quote]:
        """Cheapest way to buy ``items``; None when unavailable."""

    @abstractmethod
    def entries(self) -> List[Tuple[str, Number]]:
        """(bundle descriptor, price) rows."""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Convert to the menu file representation."""

    @classmethod
    @abstractmethod
    def from_json(cls, data: Dict[str, Any]) -> BaseMenu:
        """Create a menu from its file representation."""

    def new_state(self) -> MenuState:
        """Fresh state with nothing sold."""
        return MenuState()

    def check_query(self, items: Sequence[int]) -> Tuple[int, ...]:
        """Normalize a query bundle, raising InstanceError when it is malformed."""
        query = tuple(sorted(int(t) for t in items))
        if not self.topology.is_simple_path(query):
            shape = "interval" if self.topology.is_line else "simple path"
            raise InstanceError(f"Query {list(items)} is not a valid {shape}")
        return query

    def purchase(self, quote: Quote, state: MenuState) -> None:
        """Record a sale in ``state``."""
        clash = state.sold.intersection(quote.copies)
        if clash:
            raise AllocationError(f"Copies {sorted(clash)} are already sold", details=quote)
        state.sold.update(quote.copies)
        if self.closes_parts:
            state.closed.update(quote.parts)
        _LOGGER.debug("Sold %s for %s", quote.parts, quote.price)


@dataclass(frozen=True)
class Piece:
    """The part [first, last] of a query served by one entry."""

    entry: int
    first: int
    last: int


def cheapest_cover(
    first: int,
    last: int,
    spans: Sequence[Tuple[int, int, int]],
    piece_price: Callable[[Piece], Number],
) -> Optional[Tuple[Number, Tuple[Piece, ...]]]:
    """Cheapest set of entry spans (id, start, end) covering [first, last].

    Every query item is served by exactly one entry; ties go to the lexicographically
    smaller id sequence. A piece always runs to the end of its entry (or of the
    query), so splits that hand part of an entry to a later one are not searched.
    """
    covering: Dict[int, List[Tuple[int, int, int]]] = {t: [] for t in range(first, last + 1)}
    for span in spans:
        for t in range(max(first, span[1]), min(last, span[2]) + 1):
            covering[t].append(span)
    best: Dict[int, Tuple[Number, Tuple[int, ...], Tuple[Piece, ...]]] = {
        first - 1: (0, (), ())
    }
    for reached in range(first - 1, last):
        if reached not in best:
            continue
        price, ids, pieces = best[reached]
        for entry, _, end in covering[reached + 1]:
            piece = Piece(entry, reached + 1, min(end, last))
            candidate = (price + piece_price(piece), ids + (entry,), pieces + (piece,))
            current = best.get(piece.last)
            if current is None or candidate[:2] < current[:2]:
                best[piece.last] = candidate
    if last not in best:
        return None
    price, _, pieces = best[last]
    return price, pieces
