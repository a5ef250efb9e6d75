"""Tests for layering, large markets and copy costs on a line."""
from __future__ import annotations

import pytest
from conftest import line_instance

from bundle_pricing.allocation import FractionalAllocation, frac_val, frac_wt
from bundle_pricing.capacity import (
    build_capacity_allocation,
    build_large_market_allocation,
    greedy_layer,
    large_market_split,
    layer_allocation,
    shifted_values,
    unit_allocation_with_costs,
)
from bundle_pricing.generators import gen_random_interval
from bundle_pricing.lp import solve_frac_opt, solve_frac_opt_with_costs


def _crowd(buyers: int, capacity: int):
    """``buyers`` sure buyers of a single item with ``capacity`` copies."""
    inst = line_instance([capacity], [[(1.0, [((0, 0), 1.0)])] for _ in range(buyers)])
    x = FractionalAllocation.from_mapping(inst, {j: 1.0 for j in range(buyers)})
    return inst, x


def _layer_bound_misses(seeds):
    """(seed, item) pairs whose greedy-layer weight leaves [min(1, w_t), 4)."""
    misses = []
    for seed in seeds:
        inst = gen_random_interval(8, 8, max_len=3, capacity_range=(2, 4), seed=seed)
        x = solve_frac_opt(inst).allocation
        chosen = greedy_layer(x)
        for t, load in enumerate(x.item_loads()):
            weight = sum(x[j] for j in chosen if t in inst.jobs[j].items)
            if not min(1, load) - 1e-9 <= weight < 4:
                misses.append((seed, t))
    return misses


class TestGreedyLayer:
    """Covering layer selection."""

    def test_picks_latest_ending_job_first(self):
        inst = line_instance(
            [2, 2],
            [
                [(1.0, [((0, 0), 1.0)])],
                [(1.0, [((0, 1), 1.0)])],
                [(1.0, [((1, 1), 1.0)])],
            ],
        )
        x = FractionalAllocation.from_mapping(inst, {0: 0.6, 1: 0.6, 2: 0.6})
        assert greedy_layer(x) == (0, 1, 2)

    def test_light_items_need_all_their_weight(self):
        inst = line_instance(
            [1, 1, 1], [[(1.0, [((0, 1), 1.0)])], [(1.0, [((2, 2), 1.0)])]]
        )
        x = FractionalAllocation.from_mapping(inst, {0: 0.3, 1: 0.2})
        assert greedy_layer(x) == (0, 1)

    def test_full_item_stops_at_one(self):
        _, x = _crowd(3, 3)
        assert greedy_layer(x) == (0,)

    def test_random_layers_stay_between_bounds(self):
        assert _layer_bound_misses(range(30)) == []


class TestLayerAllocation:
    """Splitting x into per-copy layers."""

    def test_shallow_load_is_one_layer(self, small_line):
        x = solve_frac_opt(small_line).allocation
        layers = layer_allocation(x)
        assert len(layers) == 1
        assert frac_val(layers[0]) == pytest.approx(frac_val(x) / 4)

    def test_deep_load_is_peeled(self):
        _, x = _crowd(8, 8)
        layers = layer_allocation(x)
        assert len(layers) == 5
        assert sum(frac_val(layer) for layer in layers) == pytest.approx(2.0)
        for layer in layers:
            assert max(layer.item_loads()) <= 1

    def test_capacity_allocation_uses_one_copy_per_layer(self):
        _, x = _crowd(8, 8)
        unit = build_capacity_allocation(x)
        assert unit.violations() == []
        assert len(unit.for_sale()) == 5
        assert {b.copies[0] for b in unit.for_sale()} == {1, 2, 3, 4, 5}
        assert unit.value() == pytest.approx(0.5)

    def test_random_capacities(self):
        for seed in range(10):
            inst = gen_random_interval(8, 8, max_len=3, capacity_range=(2, 4), seed=seed)
            x = solve_frac_opt(inst).allocation
            unit = build_capacity_allocation(x, offsets=8)
            assert unit.violations() == []
            assert 0 < unit.value() <= frac_val(x) + 1e-9


class TestLargeMarket:
    """Length-group split for B ≥ 2."""

    def test_unit_capacity_is_identity(self, small_line):
        x = solve_frac_opt(small_line).allocation
        markets = large_market_split(small_line, x)
        assert len(markets) == 1
        assert markets[0].label == "identity"

    def test_short_line_is_a_single_group(self):
        inst = line_instance(
            [2, 2], [[(1.0, [((0, 1), 2.0)])], [(1.0, [((1, 1), 1.0)])]]
        )
        x = FractionalAllocation.from_mapping(inst, {0: 1.0, 1: 1.0})
        markets = large_market_split(inst, x)
        assert len(markets) == 1
        assert markets[0].jobs == (0, 1)
        assert frac_wt(markets[0].allocation) == pytest.approx(1.0)

    def test_groups_by_length(self):
        inst = line_instance(
            [8] * 16,
            [
                [(1.0, [((0, 3), 1.0)])],
                [(1.0, [((0, 4), 1.0)])],
                [(1.0, [((0, 15), 1.0)])],
            ],
        )
        x = FractionalAllocation.from_mapping(inst, {0: 1.0, 1: 1.0, 2: 1.0})
        markets = large_market_split(inst, x)
        assert [m.jobs for m in markets] == [(0,), (1, 2)]
        for market in markets:
            assert market.supply_violations() == []
        unit = build_large_market_allocation(x)
        assert unit.violations() == []
        assert unit.value() > 0


class TestCopyCosts:
    """Shifted values and cost-aware unit allocations."""

    def test_shifted_values(self):
        inst = line_instance(
            [2, 2],
            [[(1.0, [((0, 1), 10.0)])]],
            costs=[(1.0, 2.0), (0.5, 3.0)],
        )
        assert shifted_values(inst, 1) == pytest.approx([8.5])
        assert shifted_values(inst, 2) == pytest.approx([5.0])

    def test_zero_costs_match_plain_construction(self):
        inst = line_instance(
            [2, 2],
            [[(1.0, [((0, 1), 4.0)])], [(1.0, [((1, 1), 3.0)])], [(1.0, [((0, 0), 2.0)])]],
            costs=[(0.0, 0.0), (0.0, 0.0)],
        )
        x = solve_frac_opt_with_costs(inst).allocation
        costed = unit_allocation_with_costs(x)
        plain = build_capacity_allocation(x)
        assert costed.value() == pytest.approx(plain.value())

    def test_unprofitable_jobs_are_dropped(self):
        inst = line_instance([1], [[(1.0, [((0, 0), 5.0)])]], costs=[(10.0,)])
        x = FractionalAllocation.from_mapping(inst, {0: 1.0})
        unit = unit_allocation_with_costs(x)
        assert unit.for_sale() == ()

    def test_cost_aware_value(self):
        inst = line_instance([1], [[(1.0, [((0, 0), 10.0)])]], costs=[(2.0,)])
        x = solve_frac_opt_with_costs(inst).allocation
        unit = unit_allocation_with_costs(x)
        (bundle,) = unit.for_sale()
        assert unit.shifted_value(unit.members(bundle.id)[0]) == pytest.approx(8.0)
        assert unit.cost_aware_value() == pytest.approx(0.5)


@pytest.mark.slow
def test_greedy_layer_sweep():
    assert _layer_bound_misses(range(300)) == []
