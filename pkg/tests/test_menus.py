"""Tests for the posted-price menus."""
from __future__ import annotations

import pytest
from conftest import line_instance, tree_instance

from bundle_pricing.allocation import FractionalAllocation, frac_val
from bundle_pricing.capacity import unit_allocation_with_costs
from bundle_pricing.exceptions import (
    AllocationError,
    InstanceError,
    UnsupportedTopologyError,
)
from bundle_pricing.generators import gen_random_tree
from bundle_pricing.interval_bundling import build_unit_allocation
from bundle_pricing.lp import solve_frac_opt, solve_frac_opt_with_costs
from bundle_pricing.menus import (
    MENU_TYPES,
    PER_ARM,
    PER_PATH,
    CostAwareMenu,
    CostEntry,
    IntervalMenu,
    MenuEntry,
    MenuState,
    TreeMenu,
    compose_tree_menus,
    get_menu_class,
    load_menu,
    menu_from_json,
    price_layered_allocation,
    price_unit_allocation,
    price_with_costs,
    save_menu,
    single_bundle_menu,
    uniform_item_menu,
)
from bundle_pricing.menus.base import Piece, cheapest_cover
from bundle_pricing.menus.tree import EdgePrice, TreeLayerPrices, normalization_factor
from bundle_pricing.models import Topology
from bundle_pricing.simulation import worst_case_order_welfare
from bundle_pricing.tree_layering import (
    LEFT,
    Arm,
    Layer,
    LayeredAllocation,
    build_layered_allocation,
)
from bundle_pricing.unit_allocation import Block, assemble_unit_allocation


def _unit(inst, weights):
    """Unit allocation with every job placed in one bundle over the whole line."""
    x = FractionalAllocation.from_mapping(inst, weights)
    block = Block(0, inst.n_items - 1, tuple(sorted(weights)))
    return assemble_unit_allocation(inst, [(block, (1,) * inst.n_items)], x)


def _single_layer(inst, weights):
    """Layered allocation putting every single-edge job into layer 0."""
    arms = tuple(Arm(j, LEFT, inst.jobs[j].items) for j in sorted(weights))
    copies = tuple((e, 1) for e in range(inst.n_items))
    y = FractionalAllocation.from_mapping(inst, weights)
    return LayeredAllocation(inst, (Layer(0, copies, arms),), y, tuple(inst.capacities))


class TestIntervalMenu:
    """Bundle prices and cheapest covers on a line."""

    def test_price_is_half_the_average_value(self):
        inst = line_instance([1], [[(1.0, [((0, 0), 10.0)])]])
        menu = price_unit_allocation(_unit(inst, {0: 1.0}))
        assert menu.entries() == [("0-0@1", pytest.approx(5.0))]

    def test_price_of_mixed_bundle(self):
        inst = line_instance([1], [[(1.0, [((0, 0), 4.0)])], [(1.0, [((0, 0), 8.0)])]])
        menu = price_unit_allocation(_unit(inst, {0: 0.5, 1: 0.5}))
        assert menu.bundle(0).price == pytest.approx(3.0)

    def test_quote_is_additive_over_parts(self):
        inst = line_instance([1, 1], [[(1.0, [((0, 1), 1.0)])]])
        menu = IntervalMenu(
            inst.topology, [MenuEntry(0, 0, 0, (1,), 2.0), MenuEntry(1, 1, 1, (1,), 3.0)]
        )
        quote = menu.quote([0, 1])
        assert quote.price == 5.0
        assert quote.parts == (0, 1)
        assert quote.copies == ((0, 1), (1, 1))

    def test_cheapest_cover_wins(self):
        menu = IntervalMenu(
            Topology.line(2),
            [
                MenuEntry(0, 0, 1, (1, 1), 4.0),
                MenuEntry(1, 0, 0, (2,), 1.0),
                MenuEntry(2, 1, 1, (2,), 1.0),
            ],
        )
        assert menu.quote([0, 1]).parts == (1, 2)
        assert menu.quote([0, 1]).price == 2.0
        assert menu.quote([1]).parts == (2,)

    def test_pieces_run_to_the_end_of_their_entry(self):
        spans = [(0, 0, 3), (1, 2, 5)]
        rates = {0: 10.0, 1: 1.0}
        price, pieces = cheapest_cover(
            0, 5, spans, lambda p: rates[p.entry] * (p.last - p.first + 1)
        )
        assert pieces == (Piece(0, 0, 3), Piece(1, 4, 5))
        assert price == 42.0
        assert cheapest_cover(0, 5, [(0, 0, 3)], lambda p: 1.0) is None

    def test_sold_bundles_close(self):
        menu = IntervalMenu(
            Topology.line(2), [MenuEntry(0, 0, 0, (1,), 2.0), MenuEntry(1, 1, 1, (1,), 3.0)]
        )
        state = menu.new_state()
        menu.purchase(menu.quote([0]), state)
        assert menu.quote([0], state) is None
        assert menu.quote([1], state).price == 3.0
        with pytest.raises(AllocationError):
            menu.purchase(menu.quote([0]), state)

    def test_malformed_query(self):
        menu = uniform_item_menu(line_instance([1, 1, 1], [[(1.0, [((0, 0), 1.0)])]]), 1.0)
        with pytest.raises(InstanceError):
            menu.quote([0, 2])

    def test_menu_checks(self):
        with pytest.raises(AllocationError):
            IntervalMenu(Topology.line(1), [MenuEntry(0, 0, 0, (1,), -1.0)])
        with pytest.raises(AllocationError):
            IntervalMenu(
                Topology.line(1),
                [MenuEntry(0, 0, 0, (1,), 1.0), MenuEntry(1, 0, 0, (1,), 2.0)],
            )
        with pytest.raises(UnsupportedTopologyError):
            IntervalMenu(Topology.tree([-1]), [])

    def test_baselines(self, item_pricing):
        bundle = single_bundle_menu(item_pricing, 3.0)
        assert bundle.entries() == [("0-7@1", 3.0)]
        items = uniform_item_menu(item_pricing, 0.5)
        assert len(items.entries()) == 8
        assert items.quote(range(8)).price == pytest.approx(4.0)

    def test_unit_allocation_menu(self, item_pricing):
        unit = build_unit_allocation(solve_frac_opt(item_pricing).allocation)
        menu = price_unit_allocation(unit)
        assert menu.entries() == [("0-7@1", pytest.approx(3.75))]


class TestTreeMenu:
    """Layer edge prices and path floors."""

    def test_floor_lifts_cheap_paths(self):
        inst = tree_instance([-1], [1], [[(1.0, [([0], 1.0)])]])
        menu = price_layered_allocation(_single_layer(inst, {0: 1.0}))
        assert menu.scale == 1.0
        assert menu.layers[0].get(0).price == pytest.approx(0.25)
        assert menu.quote([0]).price == pytest.approx(1.0)

    def test_edge_price_sums_peak_contributions(self):
        inst = tree_instance(
            [-1], [1], [[(1.0, [([0], 2.0)])], [(1.0, [([0], 4.0)])]]
        )
        menu = price_layered_allocation(_single_layer(inst, {0: 0.5, 1: 0.25}))
        assert menu.layers[0].get(0).price == pytest.approx(0.5)
        assert menu.layers[0].floor == 2.0
        assert menu.normalized_prices() == {(0, 0): pytest.approx(0.25)}

    def test_cheapest_unsold_layer(self):
        menu = TreeMenu(
            Topology.tree([-1]),
            [
                TreeLayerPrices(0, (EdgePrice(0, 1, 3.0),), 1.0),
                TreeLayerPrices(1, (EdgePrice(0, 2, 5.0),), 1.0),
            ],
        )
        state = MenuState()
        first = menu.quote([0], state)
        assert (first.price, first.copies) == (3.0, ((0, 1),))
        menu.purchase(first, state)
        assert menu.quote([0], state).price == 5.0
        state.sold.add((0, 2))
        assert menu.quote([0], state) is None

    def test_floor_modes(self):
        layers = [TreeLayerPrices(0, (EdgePrice(0, 1, 0.2), EdgePrice(1, 1, 0.2)), 1.0)]
        topology = Topology.tree([-1, -1])
        assert TreeMenu(topology, layers).quote([0, 1]).price == pytest.approx(2.0)
        per_path = TreeMenu(topology, layers, floor_mode=PER_PATH)
        assert per_path.quote([0, 1]).price == pytest.approx(1.0)
        with pytest.raises(ValueError):
            TreeMenu(topology, layers, floor_mode="per_edge")

    def test_compose_stacks_copies(self):
        topology = Topology.tree([-1])
        parts = [
            TreeMenu(topology, [TreeLayerPrices(0, (EdgePrice(0, 1, p),), 1.0)])
            for p in (2.0, 4.0)
        ]
        menu = compose_tree_menus(topology, parts)
        assert menu.capacities == (2,)
        assert [layer.edges[0].copy for layer in menu.layers] == [1, 2]
        with pytest.raises(InstanceError):
            compose_tree_menus(topology, [])


def _single_class_shortfalls(seeds, floor_mode):
    """Seeds whose worst-order welfare falls below FracVal(y)/(2·v_max+5)."""
    shortfalls = []
    for seed in seeds:
        inst = gen_random_tree(
            4, 3, scenarios=1, value_range=(1.0, 1.99), jobs_per_scenario=1, seed=seed
        )
        x = solve_frac_opt(inst).allocation
        layered = build_layered_allocation(x)
        scale = normalization_factor(x)
        menu = price_layered_allocation(layered, floor_mode, scale)
        y = layered.weights
        v_max = max((inst.jobs[j].value for j in y.support()), default=scale) / scale
        bound = frac_val(y) / (2 * v_max + 5)
        if worst_case_order_welfare(inst, menu).value < bound - 1e-9:
            shortfalls.append(seed)
    return shortfalls


class TestTreePricingGuarantee:
    """Single value class: worst-order welfare against the layered value."""

    def test_per_path_floor_keeps_the_bound(self):
        assert _single_class_shortfalls(range(20), PER_PATH) == []

    def test_per_arm_floor_can_price_out_two_arm_paths(self):
        # both jobs are two-arm paths quoted at twice the floor
        assert _single_class_shortfalls([8], PER_ARM) == [8]
        assert _single_class_shortfalls([8], PER_PATH) == []


class TestCostAwareMenu:
    """Base prices plus surcharges, closing whole bundles."""

    def test_price_with_costs(self):
        inst = line_instance([1], [[(1.0, [((0, 0), 10.0)])]], costs=[(2.0,)])
        x = solve_frac_opt_with_costs(inst).allocation
        menu = price_with_costs(unit_allocation_with_costs(x))
        (entry,) = menu.bundles
        assert entry.base == pytest.approx(4.0)
        quote = menu.quote([0])
        assert quote.price == pytest.approx(6.0)
        assert quote.cost == pytest.approx(2.0)

    def test_partial_sale_closes_bundle(self):
        menu = CostAwareMenu(
            Topology.line(2), [CostEntry(0, 0, 1, (1, 1), 1.0, (0.5, 0.5))]
        )
        state = menu.new_state()
        quote = menu.quote([0], state)
        assert quote.price == pytest.approx(1.5)
        assert quote.copies == ((0, 1),)
        menu.purchase(quote, state)
        assert menu.quote([1], state) is None

    def test_zero_costs_reduce_to_interval_prices(self, small_line):
        unit = build_unit_allocation(solve_frac_opt(small_line).allocation)
        plain = price_unit_allocation(unit)
        costed = price_with_costs(unit)
        assert [e.base for e in costed.bundles] == pytest.approx(
            [e.price for e in plain.bundles]
        )


class TestRegistry:
    """Menu kinds and files."""

    def test_kinds(self):
        assert set(MENU_TYPES) == {"interval", "tree", "cost"}
        assert get_menu_class("tree") is TreeMenu
        with pytest.raises(ValueError):
            get_menu_class("auction")
        with pytest.raises(InstanceError):
            menu_from_json({"kind": "auction"})

    def test_interval_menu_file(self, tmp_path, item_pricing):
        menu = single_bundle_menu(item_pricing, 3.75)
        save_menu(menu, tmp_path / "menu.json")
        loaded = load_menu(tmp_path / "menu.json")
        assert isinstance(loaded, IntervalMenu)
        assert loaded.to_dict() == menu.to_dict()

    def test_tree_menu_file(self, tmp_path):
        menu = TreeMenu(
            Topology.tree([-1, 0]),
            [TreeLayerPrices(0, (EdgePrice(0, 1, 0.5), EdgePrice(1, 1, 0.25)), 2.0)],
            scale=2.0,
            floor_mode=PER_PATH,
        )
        save_menu(menu, tmp_path / "tree.json")
        loaded = load_menu(tmp_path / "tree.json")
        assert loaded.to_dict() == menu.to_dict()
        assert loaded.quote([0, 1]).price == menu.quote([0, 1]).price

    def test_missing_file(self, tmp_path):
        with pytest.raises(InstanceError):
            load_menu(tmp_path / "none.json")


@pytest.mark.slow
def test_single_class_sweep():
    assert _single_class_shortfalls(range(100), PER_PATH) == []
