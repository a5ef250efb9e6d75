"""Offline optimum oracles: hindsight optimum, exact expectation and greedy bound."""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import BudgetExceededError, InstanceError
from .models import Instance, Job
from .numeric import Number, total
from .simulation import (
    MonteCarloResult,
    Realization,
    iter_realizations,
    sample_realization,
    trial_generator,
)

_LOGGER = logging.getLogger(__name__)

DP = "interval-dp"
SEARCH = "subset-search"


@dataclass(frozen=True)
class OracleBudget:
    """Limits beyond which the oracles refuse instead of approximating."""

    max_realizations: int = 2**20
    max_jobs: int = 20


@dataclass(frozen=True)
class HindsightResult:
    """Best integral allocation of one realization."""

    value: Number
    jobs: Tuple[int, ...]
    method: str


def realized_jobs(inst: Instance, realization: Sequence[Optional[int]]) -> List[List[Job]]:
    """Jobs of each buyer's realized scenario."""
    if len(realization) != len(inst.buyers):
        raise InstanceError(
            f"Realization covers {len(realization)} of {len(inst.buyers)} buyers"
        )
    groups = []
    for buyer, scenario in zip(inst.buyers, realization):
        if scenario is None:
            continue
        groups.append([inst.jobs[j] for j in buyer.scenarios[scenario].jobs])
    return groups


def _zero(inst: Instance) -> Number:
    return 0 * inst.jobs[0].value if inst.jobs else 0.0


def _net_value(inst: Instance, job: Job) -> Number:
    """v_j minus the first-copy costs of its items."""
    return job.value - total(inst.items[t].copy_cost(1) for t in job.items)


def _dp_applies(inst: Instance, groups: Sequence[Sequence[Job]]) -> bool:
    return (
        inst.topology.is_line
        and all(item.capacity == 1 for item in inst.items)
        and all(len(group) <= 1 for group in groups)
    )


def interval_scheduling_dp(
    inst: Instance, jobs: Sequence[Job]
) -> Tuple[Number, Tuple[int, ...]]:
    """Weighted interval scheduling over unit-capacity items."""
    weighted = [(job, _net_value(inst, job)) for job in jobs]
    weighted = [(job, w) for job, w in weighted if w > 0]
    weighted.sort(key=lambda jw: (jw[0].end, jw[0].start, jw[0].id))
    ends = [job.end for job, _ in weighted]
    best: List[Number] = [_zero(inst)]
    for i, (job, weight) in enumerate(weighted):
        # last interval that ends before this one starts
        p = bisect.bisect_left(ends, job.start, 0, i)
        best.append(max(best[i], best[p] + weight))
    chosen: List[int] = []
    i = len(weighted)
    while i > 0:
        if best[i] == best[i - 1]:
            i -= 1
            continue
        job = weighted[i - 1][0]
        chosen.append(job.id)
        i = bisect.bisect_left(ends, job.start, 0, i - 1)
    return best[-1], tuple(sorted(chosen))


class _SubsetSearch:
    """Depth-first choice of at most one job per buyer with bound pruning."""

    def __init__(self, inst: Instance, groups: Sequence[Sequence[Job]]) -> None:
        self.inst = inst
        self.groups = [sorted(g, key=lambda job: (-job.value, job.id)) for g in groups]
        self.usage = [0] * inst.n_items
        tops = [max((job.value for job in g), default=_zero(inst)) for g in self.groups]
        self.remaining = [total(tops[i:]) for i in range(len(tops) + 1)]
        self.best_value: Number = _zero(inst)
        self.best_jobs: Tuple[int, ...] = ()

    def _marginal(self, job: Job) -> Optional[Number]:
        costs = []
        for t in job.items:
            item = self.inst.items[t]
            if self.usage[t] >= item.capacity:
                return None
            costs.append(item.copy_cost(self.usage[t] + 1))
        return job.value - total(costs)

    def run(
        self, index: int = 0, value: Optional[Number] = None, jobs: Tuple[int, ...] = ()
    ) -> None:
        value = _zero(self.inst) if value is None else value
        if value > self.best_value:
            self.best_value, self.best_jobs = value, jobs
        if index == len(self.groups) or value + self.remaining[index] <= self.best_value:
            return
        for job in self.groups[index]:
            gain = self._marginal(job)
            if gain is None or not gain > 0:
                continue
            for t in job.items:
                self.usage[t] += 1
            self.run(index + 1, value + gain, jobs + (job.id,))
            for t in job.items:
                self.usage[t] -= 1
        self.run(index + 1, value, jobs)


def hindsight_opt(
    inst: Instance,
    realization: Sequence[Optional[int]],
    budget: Optional[OracleBudget] = None,
) -> HindsightResult:
    """Maximum welfare of an integral allocation for known realized values.

    Each buyer receives at most one job of its realized scenario; copies of an
    item are used in order so a job pays the cost of the next free copy.
    """
    budget = budget or OracleBudget()
    groups = realized_jobs(inst, realization)
    if _dp_applies(inst, groups):
        value, jobs = interval_scheduling_dp(inst, [g[0] for g in groups if g])
        return HindsightResult(value, jobs, DP)
    count = sum(len(g) for g in groups)
    if count > budget.max_jobs:
        raise BudgetExceededError(
            f"{count} realized jobs exceed the subset search budget {budget.max_jobs}",
            budget.max_jobs,
            count,
        )
    search = _SubsetSearch(inst, groups)
    search.run()
    return HindsightResult(search.best_value, tuple(sorted(search.best_jobs)), SEARCH)


def brute_force_opt(inst: Instance, realization: Sequence[Optional[int]]) -> HindsightResult:
    """Subset search regardless of whether the interval DP applies."""
    search = _SubsetSearch(inst, realized_jobs(inst, realization))
    search.run()
    return HindsightResult(search.best_value, tuple(sorted(search.best_jobs)), SEARCH)


def offline_opt_exact(inst: Instance, budget: Optional[OracleBudget] = None) -> Number:
    """Expected hindsight optimum over every realization."""
    budget = budget or OracleBudget()
    terms: List[Number] = []
    methods: Dict[str, int] = {}
    for realization, probability in iter_realizations(inst, budget.max_realizations):
        result = hindsight_opt(inst, realization, budget)
        methods[result.method] = methods.get(result.method, 0) + 1
        terms.append(probability * result.value)
    _LOGGER.debug("Offline optimum over %d realizations (%s)", len(terms), methods)
    return total(terms)


def _greedy_trial(
    inst: Instance, realization: Realization, rng: np.random.Generator
) -> Number:
    arrived: List[Job] = []
    for buyer, scenario in enumerate(realization):
        if scenario is None or not inst.buyers[buyer].scenarios[scenario].jobs:
            continue
        jobs = [inst.jobs[j] for j in inst.buyers[buyer].scenarios[scenario].jobs]
        arrived.append(max(jobs, key=lambda job: (job.value, -job.id)))
    arrived.sort(key=lambda job: (-job.value, job.buyer))
    usage = [0] * inst.n_items
    welfare: List[Number] = []
    coins = rng.random(len(arrived))
    for job, coin in zip(arrived, coins):
        free = all(usage[t] < inst.items[t].capacity for t in job.items)
        if free and coin < 0.5:
            for t in job.items:
                usage[t] += 1
            welfare.append(job.value)
    return total(welfare)


def greedy_offline_welfare(
    inst: Instance, trials: int, seed: int
) -> MonteCarloResult:
    """Admit arrived buyers from the highest value down, each with probability ½.

    Every arrived buyer whose path is still free is admitted on a fair coin.
    """
    if trials < 1:
        raise InstanceError(f"trials must be at least 1, got {trials}")
    samples = np.empty(trials, dtype=float)
    for trial in range(trials):
        rng = trial_generator(seed, trial)
        realization = sample_realization(inst, rng)
        samples[trial] = float(_greedy_trial(inst, realization, rng))
    stderr = float(np.std(samples, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    mean = float(samples.mean())
    _LOGGER.debug("Greedy offline estimate %s ± %s over %d trials", mean, stderr, trials)
    return MonteCarloResult(mean, stderr, trials, 0.0, 0.0, 0.0)
