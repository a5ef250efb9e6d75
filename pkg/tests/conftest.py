"""Shared fixtures for the bundle pricing tests."""
from __future__ import annotations

from typing import Sequence

import pytest

from bundle_pricing.generators import (
    binary_tree_parents,
    gen_footnote_item_pricing,
    gen_footnote_single_item,
)
from bundle_pricing.models import Instance, Item, Topology


def line_instance(
    capacities: Sequence[int], buyers, name: str = "line", costs=None
) -> Instance:
    """Line instance from capacities and (prob, [((start, end), value)]) buyers."""
    items = [
        Item(t, cap, None if costs is None else tuple(costs[t]))
        for t, cap in enumerate(capacities)
    ]
    return Instance.create(Topology.line(len(capacities)), items, buyers, name)


def tree_instance(parents: Sequence[int], capacities: Sequence[int], buyers, name="tree"):
    """Tree instance from parent pointers; bundles are edge lists."""
    items = [Item(e, cap) for e, cap in enumerate(capacities)]
    return Instance.create(Topology.tree(parents), items, buyers, name)


@pytest.fixture
def single_item() -> Instance:
    """Two buyers on one item: a sure low buyer and a rare high buyer."""
    return gen_footnote_single_item(0.1)


@pytest.fixture
def item_pricing() -> Instance:
    """Eight unit-demand item buyers against one buyer of the whole line."""
    return gen_footnote_item_pricing(8, 0.5)


@pytest.fixture
def small_line() -> Instance:
    """Three deterministic buyers on a four-item line with unit capacities."""
    return line_instance(
        [1, 1, 1, 1],
        [
            [(1.0, [((0, 1), 4.0)])],
            [(1.0, [((1, 2), 3.0)])],
            [(0.5, [((2, 3), 6.0)]), (0.5, [((3, 3), 2.0)])],
        ],
        name="small-line",
    )


@pytest.fixture
def binary_tree() -> Topology:
    """Six-edge binary tree of height two."""
    return Topology.tree(binary_tree_parents(2))
