"""Posted-price mechanism simulator: arrivals, best responses and welfare."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .exceptions import AllocationError, BudgetExceededError, InstanceError
from .menus.base import BaseMenu, Copy, MenuState, Quote
from .models import Buyer, Instance
from .numeric import DEFAULT_TOLERANCE, Number, total

_LOGGER = logging.getLogger(__name__)

FIXED = "fixed"
RANDOM = "random"
ADVERSARIAL = "adversarial"
ADVERSARIAL_HEURISTIC = "adversarial-heuristic"
ARRIVAL_POLICIES = (FIXED, RANDOM, ADVERSARIAL, ADVERSARIAL_HEURISTIC)

Realization = Tuple[Optional[int], ...]


@dataclass(frozen=True)
class SimulationBudget:
    """Enumeration limits of the exact simulator."""

    max_realizations: int = 2**20
    max_exhaustive_buyers: int = 8


@dataclass(frozen=True)
class ArrivalPolicy:
    """How buyers are ordered: fixed, uniformly random or adversarial."""

    kind: str = FIXED
    order: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        """Check the policy kind."""
        if self.kind not in ARRIVAL_POLICIES:
            raise InstanceError(f"Unknown arrival policy: {self.kind}")

    @classmethod
    def fixed(cls, order: Sequence[int]) -> ArrivalPolicy:
        """Buyers arrive in the given order."""
        return cls(FIXED, tuple(int(i) for i in order))

    @classmethod
    def random(cls) -> ArrivalPolicy:
        """A fresh uniform permutation per trial."""
        return cls(RANDOM)

    @classmethod
    def adversarial(cls, exhaustive: bool = True) -> ArrivalPolicy:
        """Worst order for the menu, chosen before values are realized."""
        return cls(ADVERSARIAL if exhaustive else ADVERSARIAL_HEURISTIC)


OrderSpec = Union[ArrivalPolicy, Sequence[int]]


@dataclass(frozen=True)
class Purchase:
    """What one buyer bought."""

    buyer: int
    job: int
    value: Number
    quote: Quote

    @property
    def price(self) -> Number:
        """Payment."""
        return self.quote.price

    @property
    def cost(self) -> Number:
        """Production cost of the copies sold."""
        return self.quote.cost

    @property
    def utility(self) -> Number:
        """Buyer surplus v_j − price."""
        return self.value - self.quote.price


@dataclass(frozen=True)
class TrialOutcome:
    """Accounting of one mechanism run.

    Welfare is the realized value of the sold bundles net of production costs,
    so ``welfare == revenue + utility - cost``.
    """

    order: Tuple[int, ...]
    realization: Realization
    purchases: Tuple[Purchase, ...]
    sold: Tuple[Copy, ...] = field(default=())

    @property
    def revenue(self) -> Number:
        """Σ payments."""
        return total(p.price for p in self.purchases)

    @property
    def utility(self) -> Number:
        """Σ buyer surplus."""
        return total(p.utility for p in self.purchases)

    @property
    def cost(self) -> Number:
        """Σ production costs."""
        return total(p.cost for p in self.purchases)

    @property
    def welfare(self) -> Number:
        """Σ realized values minus costs."""
        return total(p.value for p in self.purchases) - self.cost


@dataclass(frozen=True)
class ExpectedOutcome:
    """Exact expectation of the trial accounting over all realizations."""

    welfare: Number
    revenue: Number
    utility: Number
    cost: Number
    realizations: int


@dataclass(frozen=True)
class OrderSearchResult:
    """Worst arrival order found and its expected welfare.

    ``exhaustive`` is False when a heuristic searched the orders; the value is
    then only an upper bound on what the adversary can force.
    """

    order: Tuple[int, ...]
    value: Number
    exhaustive: bool
    orders_tried: int


@dataclass(frozen=True)
class MonteCarloResult:
    """Mean and standard error of welfare over seeded trials."""

    mean: float
    stderr: float
    trials: int
    revenue: float
    utility: float
    cost: float


def scenario_options(
    buyer: Buyer, tol: float = DEFAULT_TOLERANCE
) -> List[Tuple[Optional[int], Number]]:
    """(scenario index, probability) pairs, None for the zero valuation."""
    options: List[Tuple[Optional[int], Number]] = [
        (s.index, s.probability) for s in buyer.scenarios
    ]
    residual = buyer.residual_probability
    threshold = 0 if isinstance(residual, Fraction) else tol
    if residual > threshold:
        options.append((None, residual))
    return options


def realization_count(inst: Instance, tol: float = DEFAULT_TOLERANCE) -> int:
    """Size of the product scenario space."""
    return math.prod(len(scenario_options(b, tol)) for b in inst.buyers)


def iter_realizations(
    inst: Instance,
    limit: int = SimulationBudget.max_realizations,
    tol: float = DEFAULT_TOLERANCE,
) -> Iterator[Tuple[Realization, Number]]:
    """Every realization with its probability, refusing beyond ``limit``."""
    count = realization_count(inst, tol)
    if count > limit:
        raise BudgetExceededError(
            f"{count} realizations exceed the enumeration budget {limit}", limit, count
        )
    options = [scenario_options(b, tol) for b in inst.buyers]
    for combo in itertools.product(*options):
        realization = tuple(choice for choice, _ in combo)
        yield realization, math.prod(p for _, p in combo)


def check_order(order: Sequence[int], n_buyers: int) -> Tuple[int, ...]:
    """Validate a permutation of the buyers."""
    checked = tuple(int(i) for i in order)
    if sorted(checked) != list(range(n_buyers)):
        raise InstanceError(f"Order {list(order)} is not a permutation of {n_buyers} buyers")
    return checked


def buyer_best_response(
    inst: Instance,
    buyer: int,
    scenario: Optional[int],
    menu: BaseMenu,
    state: Optional[MenuState] = None,
) -> Optional[Purchase]:
    """Utility-maximizing affordable job of the realized scenario.

    Ties go to the lower price, then the lower job id. A buyer buys whenever
    the best utility is nonnegative.
    """
    if scenario is None:
        return None
    best: Optional[Purchase] = None
    best_key: Optional[Tuple[Number, Number, int]] = None
    for j in inst.buyers[buyer].scenarios[scenario].jobs:
        job = inst.jobs[j]
        quote = menu.quote(job.items, state)
        if quote is None:
            continue
        utility = job.value - quote.price
        if utility < 0:
            continue
        key = (-utility, quote.price, j)
        if best_key is None or key < best_key:
            best, best_key = Purchase(buyer, j, job.value, quote), key
    return best


def _check_supply(inst: Instance, sold: Set[Copy]) -> None:
    for item, copy in sold:
        if not 0 <= item < inst.n_items or not 1 <= copy <= inst.items[item].capacity:
            raise AllocationError(f"Sold copy {copy} of item {item} does not exist")


def heuristic_adversary_order(inst: Instance) -> Tuple[int, ...]:
    """Buyers by descending maximum scenario value, ties by buyer id."""

    def top_value(buyer: Buyer) -> Number:
        return max(
            (inst.jobs[j].value for s in buyer.scenarios for j in s.jobs), default=0
        )

    return tuple(sorted(range(len(inst.buyers)), key=lambda i: (-top_value(inst.buyers[i]), i)))


def resolve_order(
    inst: Instance,
    menu: BaseMenu,
    policy: OrderSpec,
    rng: Optional[np.random.Generator] = None,
    budget: Optional[SimulationBudget] = None,
) -> Tuple[int, ...]:
    """Arrival order for one run."""
    n = len(inst.buyers)
    if not isinstance(policy, ArrivalPolicy):
        return check_order(policy, n)
    if policy.kind == FIXED:
        return check_order(policy.order if policy.order is not None else range(n), n)
    if policy.kind == RANDOM:
        generator = rng if rng is not None else trial_generator(0, 0)
        return tuple(int(i) for i in generator.permutation(n))
    if policy.kind == ADVERSARIAL_HEURISTIC:
        return heuristic_adversary_order(inst)
    return worst_case_order_welfare(inst, menu, budget).order


def run_mechanism(
    inst: Instance,
    menu: BaseMenu,
    policy: OrderSpec,
    realization: Sequence[Optional[int]],
    seed: int = 0,
) -> TrialOutcome:
    """Let the buyers arrive and buy their best affordable bundle."""
    if len(realization) != len(inst.buyers):
        raise InstanceError(
            f"Realization covers {len(realization)} of {len(inst.buyers)} buyers"
        )
    order = resolve_order(inst, menu, policy, trial_generator(seed, 0))
    return _run(inst, menu, order, tuple(realization))


def _run(
    inst: Instance, menu: BaseMenu, order: Tuple[int, ...], realization: Realization
) -> TrialOutcome:
    state = menu.new_state()
    purchases: List[Purchase] = []
    for buyer in order:
        purchase = buyer_best_response(inst, buyer, realization[buyer], menu, state)
        if purchase is None:
            continue
        menu.purchase(purchase.quote, state)
        purchases.append(purchase)
    _check_supply(inst, state.sold)
    return TrialOutcome(order, realization, tuple(purchases), tuple(sorted(state.sold)))


def expected_outcome_exact(
    inst: Instance,
    menu: BaseMenu,
    order: Sequence[int],
    budget: Optional[SimulationBudget] = None,
) -> ExpectedOutcome:
    """Expectation of every accounting field over the product scenario space."""
    budget = budget or SimulationBudget()
    order = check_order(order, len(inst.buyers))
    welfare: List[Number] = []
    revenue: List[Number] = []
    utility: List[Number] = []
    cost: List[Number] = []
    for realization, probability in iter_realizations(inst, budget.max_realizations):
        outcome = _run(inst, menu, order, realization)
        welfare.append(probability * outcome.welfare)
        revenue.append(probability * outcome.revenue)
        utility.append(probability * outcome.utility)
        cost.append(probability * outcome.cost)
    return ExpectedOutcome(total(welfare), total(revenue), total(utility), total(cost), len(welfare))


def expected_welfare_exact(
    inst: Instance,
    menu: BaseMenu,
    order: Sequence[int],
    budget: Optional[SimulationBudget] = None,
) -> Number:
    """Exact expected welfare for a fixed arrival order."""
    return expected_outcome_exact(inst, menu, order, budget).welfare


def worst_case_order_welfare(
    inst: Instance,
    menu: BaseMenu,
    budget: Optional[SimulationBudget] = None,
) -> OrderSearchResult:
    """Minimum expected welfare over arrival orders fixed before realization.

    Orders are enumerated lexicographically and the first minimum is kept.
    Beyond ``max_exhaustive_buyers`` buyers a local search starting from the
    heuristic order is used instead.
    """
    budget = budget or SimulationBudget()
    n = len(inst.buyers)
    if n <= budget.max_exhaustive_buyers:
        best_order: Tuple[int, ...] = tuple(range(n))
        best_value: Optional[Number] = None
        tried = 0
        for order in itertools.permutations(range(n)):
            value = expected_welfare_exact(inst, menu, order, budget)
            tried += 1
            if best_value is None or value < best_value:
                best_order, best_value = order, value
        assert best_value is not None
        return OrderSearchResult(best_order, best_value, True, tried)

    _LOGGER.warning(
        "%d buyers exceed the exhaustive order cap %d; using the heuristic adversary",
        n,
        budget.max_exhaustive_buyers,
    )
    order = heuristic_adversary_order(inst)
    value = expected_welfare_exact(inst, menu, order, budget)
    tried = 1
    for i in range(n - 1):
        swapped = order[:i] + (order[i + 1], order[i]) + order[i + 2 :]
        swapped_value = expected_welfare_exact(inst, menu, swapped, budget)
        tried += 1
        if swapped_value < value:
            order, value = swapped, swapped_value
    return OrderSearchResult(order, value, False, tried)


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Independent counter-based generator of one trial."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def sample_realization(inst: Instance, rng: np.random.Generator) -> Realization:
    """Draw one scenario (or the zero valuation) per buyer."""
    draws = rng.random(len(inst.buyers))
    realization: List[Optional[int]] = []
    for buyer, u in zip(inst.buyers, draws):
        chosen: Optional[int] = None
        cumulative = 0.0
        for scenario in buyer.scenarios:
            cumulative += float(scenario.probability)
            if u < cumulative:
                chosen = scenario.index
                break
        realization.append(chosen)
    return tuple(realization)


def iter_trials(
    inst: Instance,
    menu: BaseMenu,
    policy: OrderSpec,
    trials: int,
    seed: int,
    budget: Optional[SimulationBudget] = None,
) -> Iterator[Tuple[int, TrialOutcome]]:
    """Seeded trials; adversarial orders are fixed once before the first trial."""
    if trials < 1:
        raise InstanceError(f"trials must be at least 1, got {trials}")
    fixed: Optional[Tuple[int, ...]] = None
    if not isinstance(policy, ArrivalPolicy) or policy.kind != RANDOM:
        fixed = resolve_order(inst, menu, policy, budget=budget)
    for trial in range(trials):
        rng = trial_generator(seed, trial)
        order = fixed if fixed is not None else resolve_order(inst, menu, policy, rng)
        yield trial, _run(inst, menu, order, sample_realization(inst, rng))


def monte_carlo_welfare(
    inst: Instance,
    menu: BaseMenu,
    policy: OrderSpec,
    trials: int,
    seed: int,
    budget: Optional[SimulationBudget] = None,
) -> MonteCarloResult:
    """Mean welfare over i.i.d. trials and its standard error."""
    rows = np.array(
        [
            (float(o.welfare), float(o.revenue), float(o.utility), float(o.cost))
            for _, o in iter_trials(inst, menu, policy, trials, seed, budget)
        ],
        dtype=float,
    )
    welfare = rows[:, 0]
    stderr = float(np.std(welfare, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    _LOGGER.debug("Monte Carlo over %d trials: mean %s, s.e. %s", trials, welfare.mean(), stderr)
    return MonteCarloResult(
        mean=float(welfare.mean()),
        stderr=stderr,
        trials=trials,
        revenue=float(rows[:, 1].mean()),
        utility=float(rows[:, 2].mean()),
        cost=float(rows[:, 3].mean()),
    )
