"""Tests for the posted-price mechanism simulator."""
from __future__ import annotations

import pytest
from conftest import line_instance

from bundle_pricing.exceptions import BudgetExceededError, InstanceError
from bundle_pricing.generators import gen_random_interval
from bundle_pricing.interval_bundling import build_unit_allocation
from bundle_pricing.lp import solve_frac_opt
from bundle_pricing.menus import (
    CostAwareMenu,
    CostEntry,
    price_unit_allocation,
    single_bundle_menu,
    uniform_item_menu,
)
from bundle_pricing.simulation import (
    ADVERSARIAL_HEURISTIC,
    ArrivalPolicy,
    SimulationBudget,
    buyer_best_response,
    check_order,
    expected_outcome_exact,
    expected_welfare_exact,
    heuristic_adversary_order,
    iter_realizations,
    iter_trials,
    monte_carlo_welfare,
    realization_count,
    run_mechanism,
    worst_case_order_welfare,
)


def _half_value_shortfalls(seeds):
    """Seeds whose unit-allocation menu earns less than half of FracVal."""
    shortfalls = []
    for seed in seeds:
        inst = gen_random_interval(6, 4, max_len=3, seed=seed)
        unit = build_unit_allocation(solve_frac_opt(inst).allocation)
        menu = price_unit_allocation(unit)
        if worst_case_order_welfare(inst, menu).value < unit.value() / 2 - 1e-9:
            shortfalls.append(seed)
    return shortfalls


class TestBestResponse:
    """A single buyer facing the menu."""

    def test_buys_when_affordable(self):
        inst = line_instance([1], [[(1.0, [((0, 0), 5.0)])]])
        purchase = buyer_best_response(inst, 0, 0, single_bundle_menu(inst, 3.0))
        assert purchase.utility == 2.0
        assert purchase.price == 3.0

    def test_walks_away_when_too_expensive(self):
        inst = line_instance([1], [[(1.0, [((0, 0), 5.0)])]])
        assert buyer_best_response(inst, 0, 0, single_bundle_menu(inst, 6.0)) is None
        assert buyer_best_response(inst, 0, None, single_bundle_menu(inst, 1.0)) is None

    def test_ties_go_to_the_lower_price(self):
        inst = line_instance([1, 1], [[(1.0, [((0, 0), 5.0), ((0, 1), 6.0)])]])
        purchase = buyer_best_response(inst, 0, 0, uniform_item_menu(inst, 1.0))
        assert purchase.job == 0


class TestMechanismRun:
    """Sequential arrivals and the sale accounting."""

    def test_sold_items_are_gone(self, small_line):
        menu = uniform_item_menu(small_line, 1.0)
        outcome = run_mechanism(small_line, menu, [0, 1, 2], (0, 0, 0))
        assert [p.buyer for p in outcome.purchases] == [0, 2]
        assert outcome.welfare == 10.0
        assert outcome.revenue == 4.0
        assert outcome.sold == ((0, 1), (1, 1), (2, 1), (3, 1))

    def test_costs_are_netted_from_welfare(self):
        inst = line_instance([1], [[(1.0, [((0, 0), 10.0)])]], costs=[(2.0,)])
        menu = CostAwareMenu(inst.topology, [CostEntry(0, 0, 0, (1,), 4.0, (2.0,))])
        outcome = run_mechanism(inst, menu, [0], (0,))
        assert outcome.cost == 2.0
        assert outcome.welfare == 8.0
        assert outcome.welfare == outcome.revenue + outcome.utility - outcome.cost

    def test_bad_inputs(self, small_line):
        menu = uniform_item_menu(small_line, 1.0)
        with pytest.raises(InstanceError):
            run_mechanism(small_line, menu, [0, 1, 2], (0, 0))
        with pytest.raises(InstanceError):
            check_order([0, 0, 1], 3)
        with pytest.raises(InstanceError):
            ArrivalPolicy("shuffled")

    def test_individual_rationality(self):
        for seed in range(5):
            inst = gen_random_interval(6, 5, seed=seed)
            menu = uniform_item_menu(inst, 1.0)
            for _, outcome in iter_trials(inst, menu, ArrivalPolicy.random(), 20, seed):
                assert all(p.utility >= 0 for p in outcome.purchases)


class TestExactExpectation:
    """Enumeration over the product scenario space."""

    def test_realizations(self, single_item):
        assert realization_count(single_item) == 2
        probabilities = [p for _, p in iter_realizations(single_item)]
        assert sum(probabilities) == pytest.approx(1.0)
        with pytest.raises(BudgetExceededError):
            list(iter_realizations(single_item, limit=1))

    def test_price_above_small_value(self, single_item):
        menu = single_bundle_menu(single_item, 1.2)
        assert expected_welfare_exact(single_item, menu, [0, 1]) == pytest.approx(1.0)
        assert expected_welfare_exact(single_item, menu, [1, 0]) == pytest.approx(1.0)

    def test_accounting_identity(self, single_item):
        menu = single_bundle_menu(single_item, 0.5)
        outcome = expected_outcome_exact(single_item, menu, [1, 0])
        assert outcome.welfare == pytest.approx(1.9)
        assert outcome.revenue == pytest.approx(0.5)
        assert outcome.utility == pytest.approx(1.4)
        assert outcome.realizations == 2

    def test_budget(self, single_item):
        with pytest.raises(BudgetExceededError):
            expected_welfare_exact(
                single_item,
                single_bundle_menu(single_item, 0.5),
                [0, 1],
                SimulationBudget(max_realizations=1),
            )


class TestAdversary:
    """Worst arrival orders."""

    def test_small_buyer_first(self, single_item):
        result = worst_case_order_welfare(single_item, single_bundle_menu(single_item, 0.5))
        assert result.order == (0, 1)
        assert result.value == pytest.approx(1.0)
        assert result.exhaustive
        assert result.orders_tried == 2

    def test_heuristic_beyond_the_cap(self, single_item):
        menu = single_bundle_menu(single_item, 0.5)
        assert heuristic_adversary_order(single_item) == (1, 0)
        result = worst_case_order_welfare(
            single_item, menu, SimulationBudget(max_exhaustive_buyers=1)
        )
        assert not result.exhaustive
        assert result.order == (0, 1)
        assert result.value == pytest.approx(1.0)

    def test_no_price_beats_one(self, single_item):
        for price in (0.5, 0.99, 1.0, 1.2, 5.0, 9.99):
            menu = single_bundle_menu(single_item, price)
            assert worst_case_order_welfare(single_item, menu).value <= 1.0 + 1e-9
        assert worst_case_order_welfare(
            single_item, single_bundle_menu(single_item, 10.5)
        ).value == 0

    def test_unit_menu_earns_half_the_allocation(self):
        assert _half_value_shortfalls(range(20)) == []


class TestMonteCarlo:
    """Seeded sampling."""

    def test_estimate_is_close(self, single_item):
        menu = single_bundle_menu(single_item, 1.2)
        policy = ArrivalPolicy.fixed([0, 1])
        result = monte_carlo_welfare(single_item, menu, policy, 4000, seed=7)
        assert result.trials == 4000
        assert abs(result.mean - 1.0) <= 4 * result.stderr
        assert result.mean == pytest.approx(result.revenue + result.utility - result.cost)

    def test_reproducible(self, small_line):
        menu = uniform_item_menu(small_line, 1.0)
        first = monte_carlo_welfare(small_line, menu, ArrivalPolicy.random(), 200, seed=3)
        second = monte_carlo_welfare(small_line, menu, ArrivalPolicy.random(), 200, seed=3)
        assert first == second

    def test_adversarial_order_is_fixed_once(self, single_item):
        menu = single_bundle_menu(single_item, 0.5)
        orders = {
            outcome.order
            for _, outcome in iter_trials(
                single_item, menu, ArrivalPolicy(ADVERSARIAL_HEURISTIC), 10, seed=1
            )
        }
        assert orders == {(1, 0)}

    def test_needs_trials(self, single_item):
        with pytest.raises(InstanceError):
            monte_carlo_welfare(
                single_item, single_bundle_menu(single_item, 1.0), [0, 1], 0, seed=0
            )


@pytest.mark.slow
def test_unit_menu_sweep():
    assert _half_value_shortfalls(range(200)) == []
