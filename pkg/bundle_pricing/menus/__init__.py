"""Posted-price menus package."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Type, Union

from ..exceptions import InstanceError
from .base import BaseMenu, MenuState, Quote
from .costs import CostAwareMenu, CostEntry, price_with_costs
from .interval import (
    IntervalMenu,
    MenuEntry,
    price_unit_allocation,
    single_bundle_menu,
    uniform_item_menu,
)
from .tree import (
    FLOOR_MODES,
    PER_ARM,
    PER_PATH,
    TreeMenu,
    compose_tree_menus,
    price_layered_allocation,
)

_LOGGER = logging.getLogger(__name__)

# Registry of menu kinds
MENU_TYPES: Dict[str, Type[BaseMenu]] = {
    "interval": IntervalMenu,
    "tree": TreeMenu,
    "cost": CostAwareMenu,
}


def get_menu_class(kind: str) -> Type[BaseMenu]:
    """Get the menu class for the given kind."""
    _LOGGER.debug("Getting menu class for kind %s", kind)
    if kind in MENU_TYPES:
        return MENU_TYPES[kind]
    _LOGGER.warning("Unsupported menu kind: %s", kind)
    raise ValueError(f"Unsupported menu kind: {kind}")


def menu_from_json(data: Dict[str, Any]) -> BaseMenu:
    """Create a menu of whatever kind the data names."""
    try:
        menu_class = get_menu_class(data.get("kind", ""))
    except ValueError as err:
        raise InstanceError(str(err), details=data.get("kind")) from err
    return menu_class.from_json(data)


def load_menu(path: Union[str, Path]) -> BaseMenu:
    """Load a menu file written by save_menu."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as err:
        raise InstanceError(f"Cannot read menu file {path}: {err}") from err
    return menu_from_json(data)


def save_menu(menu: BaseMenu, path: Union[str, Path]) -> None:
    """Write a menu file."""
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(menu.to_dict(), handle, indent=2)
        handle.write("\n")


__all__ = [
    "BaseMenu",
    "CostAwareMenu",
    "CostEntry",
    "FLOOR_MODES",
    "IntervalMenu",
    "MENU_TYPES",
    "MenuEntry",
    "MenuState",
    "PER_ARM",
    "PER_PATH",
    "Quote",
    "TreeMenu",
    "compose_tree_menus",
    "get_menu_class",
    "load_menu",
    "menu_from_json",
    "price_layered_allocation",
    "price_unit_allocation",
    "price_with_costs",
    "save_menu",
    "single_bundle_menu",
    "uniform_item_menu",
]
