"""End-to-end benchmark harness: relax, bundle or layer, price, simulate, compare."""

from __future__ import annotations

import asyncio
import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

from .allocation import FractionalAllocation
from .capacity import (
    build_capacity_allocation,
    build_large_market_allocation,
    unit_allocation_with_costs,
)
from .exceptions import (
    BudgetExceededError,
    BundlePricingError,
    InstanceError,
    InstanceValidationError,
    PipelineStageError,
)
from .generators import generate, tree_lower_bound_order
from .interval_bundling import DEFAULT_OFFSETS, build_unit_allocation
from .lp import solve_frac_opt, solve_frac_opt_with_costs
from .menus import (
    FLOOR_MODES,
    PER_ARM,
    BaseMenu,
    TreeMenu,
    compose_tree_menus,
    price_layered_allocation,
    price_unit_allocation,
    price_with_costs,
)
from .menus.tree import normalization_factor
from .models import Instance, validate_instance
from .numeric import DEFAULT_TOLERANCE, Number, format_cell, total
from .oracles import OracleBudget, greedy_offline_welfare, offline_opt_exact
from .simulation import (
    ADVERSARIAL,
    ARRIVAL_POLICIES,
    FIXED,
    ArrivalPolicy,
    SimulationBudget,
    expected_outcome_exact,
    monte_carlo_welfare,
    realization_count,
    worst_case_order_welfare,
)
from .tree_layering import (
    build_layered_allocation,
    partition_value_classes,
    tree_large_market_split,
)
from .unit_allocation import UnitAllocation

_LOGGER = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "instance",
    "parameter",
    "mode",
    "seed",
    "construction",
    "frac_opt",
    "construction_value",
    "opt",
    "greedy_offline",
    "greedy_stderr",
    "welfare",
    "welfare_stderr",
    "welfare_method",
    "revenue",
    "utility",
    "ratio_frac_opt",
    "ratio_opt",
]

PLOT_COLUMNS = ["instance", "parameter", "ratio", "welfare", "bound"]

LOWER_BOUND_ORDER = "lower-bound"
BENCHMARK_POLICIES = ARRIVAL_POLICIES + (LOWER_BOUND_ORDER,)


@dataclass(frozen=True)
class Construction:
    """Priced menu and the value its allocation certified."""

    menu: BaseMenu
    value: Number
    label: str


def _interval_menu(x: FractionalAllocation, offsets: int, tol: float) -> Construction:
    inst = x.instance
    if all(item.capacity == 1 for item in inst.items):
        unit = build_unit_allocation(x, offsets, tol)
    else:
        unit = build_capacity_allocation(x, offsets=offsets, tol=tol)
    best = unit
    if inst.min_capacity >= 2:
        split = build_large_market_allocation(x, offsets, tol)
        if split.value() > unit.value():
            best = split
    _LOGGER.debug("Interval construction %s, value %s", best.label, best.value())
    return Construction(price_unit_allocation(best), best.value(), best.label)


def _cost_menu(x: FractionalAllocation, offsets: int, tol: float) -> Construction:
    unit: UnitAllocation = unit_allocation_with_costs(x, offsets, tol)
    return Construction(price_with_costs(unit), unit.cost_aware_value(), unit.label)


def _class_menu(
    y: FractionalAllocation,
    capacities: Optional[Sequence[int]],
    floor_mode: str,
    tol: float,
    label: str,
) -> Tuple[TreeMenu, Number]:
    chosen = partition_value_classes(y).allocation
    layered = build_layered_allocation(chosen, capacities, tol, label)
    menu = price_layered_allocation(layered, floor_mode, normalization_factor(chosen))
    return menu, layered.value()


def _tree_menu(
    x: FractionalAllocation, floor_mode: str, tol: float
) -> Construction:
    inst = x.instance
    if not x.support():
        empty = build_layered_allocation(x, tol=tol)
        return Construction(price_layered_allocation(empty, floor_mode), empty.value(), "empty")
    menu, value = _class_menu(x, None, floor_mode, tol, "layered")
    best = Construction(menu, value, "layered")
    if inst.min_capacity >= 2:
        parts = [
            _class_menu(m.allocation, m.capacities, floor_mode, tol, m.label)
            for m in tree_large_market_split(inst, x, tol)
            if m.allocation.support()
        ]
        if parts:
            composed = compose_tree_menus(inst.topology, [p[0] for p in parts], floor_mode)
            split_value = total(p[1] for p in parts)
            if split_value > best.value:
                best = Construction(composed, split_value, "value-bands")
    _LOGGER.debug("Tree construction %s, value %s", best.label, best.value)
    return best


# Registry of pipeline modes
PIPELINE_MODES: Dict[str, str] = {
    "interval": "line",
    "interval-costs": "line",
    "tree": "tree",
}


def get_pipeline_mode(name: str) -> str:
    """Topology kind required by a pipeline mode."""
    if name in PIPELINE_MODES:
        return PIPELINE_MODES[name]
    _LOGGER.warning("Unsupported pipeline mode: %s", name)
    raise ValueError(f"Unsupported pipeline mode: {name}")


@dataclass
class InstanceSource:
    """Where a benchmark instance comes from: a file or a generator call."""

    file: Optional[str] = None
    generator: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)
    parameter: str = ""

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> InstanceSource:
        """Create a source from its config representation."""
        return cls(
            file=data.get("file"),
            generator=data.get("generator"),
            params=dict(data.get("params", {})),
            parameter=str(data.get("parameter", "")),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        data: Dict[str, Any] = {}
        if self.file is not None:
            data["file"] = self.file
        if self.generator is not None:
            data["generator"] = self.generator
            data["params"] = dict(self.params)
        if self.parameter:
            data["parameter"] = self.parameter
        return data

    def load(self, seed: int, rational: bool) -> Instance:
        """Materialize the instance."""
        if self.file is not None:
            inst = Instance.load(self.file)
            return inst.to_rational() if rational else inst
        if self.generator is not None:
            return generate(self.generator, self.params, seed, rational)
        raise InstanceError("Instance source needs a file or a generator")


@dataclass
class BenchmarkConfig:
    """Benchmark settings; seeds are explicit."""

    instances: List[InstanceSource] = field(default_factory=list)
    mode: str = "interval"
    offsets: int = DEFAULT_OFFSETS
    trials: int = 10000
    seeds: List[int] = field(default_factory=lambda: [0])
    policy: str = ADVERSARIAL
    floor_mode: str = PER_ARM
    rational: bool = False
    tolerance: float = DEFAULT_TOLERANCE
    greedy_trials: int = 0
    exact_opt: bool = True
    workers: int = 4
    output: Optional[str] = None
    plot_output: Optional[str] = None

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> BenchmarkConfig:
        """Create a config from its JSON representation."""
        defaults = cls()
        return cls(
            instances=[InstanceSource.from_json(s) for s in data.get("instances", [])],
            mode=data.get("mode", defaults.mode),
            offsets=int(data.get("offsets", defaults.offsets)),
            trials=int(data.get("trials", defaults.trials)),
            seeds=[int(s) for s in data.get("seeds", defaults.seeds)],
            policy=data.get("policy", defaults.policy),
            floor_mode=data.get("floor_mode", defaults.floor_mode),
            rational=bool(data.get("rational", defaults.rational)),
            tolerance=float(data.get("tolerance", defaults.tolerance)),
            greedy_trials=int(data.get("greedy_trials", defaults.greedy_trials)),
            exact_opt=bool(data.get("exact_opt", defaults.exact_opt)),
            workers=int(data.get("workers", defaults.workers)),
            output=data.get("output"),
            plot_output=data.get("plot_output"),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> BenchmarkConfig:
        """Load a JSON config file."""
        try:
            with open(path, "r", encoding="utf-8") as handle:
                return cls.from_json(json.load(handle))
        except (OSError, json.JSONDecodeError) as err:
            raise InstanceError(f"Cannot read benchmark config {path}: {err}") from err

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "instances": [s.to_dict() for s in self.instances],
            "mode": self.mode,
            "offsets": self.offsets,
            "trials": self.trials,
            "seeds": list(self.seeds),
            "policy": self.policy,
            "floor_mode": self.floor_mode,
            "rational": self.rational,
            "tolerance": self.tolerance,
            "greedy_trials": self.greedy_trials,
            "exact_opt": self.exact_opt,
            "workers": self.workers,
            "output": self.output,
            "plot_output": self.plot_output,
        }

    def validate(self) -> None:
        """Raise InstanceError for inconsistent settings."""
        try:
            get_pipeline_mode(self.mode)
        except ValueError as err:
            raise InstanceError(str(err)) from err
        if self.policy not in BENCHMARK_POLICIES:
            raise InstanceError(f"Unknown arrival policy: {self.policy}")
        if self.floor_mode not in FLOOR_MODES:
            raise InstanceError(f"Unknown floor mode: {self.floor_mode}")
        if not self.instances:
            raise InstanceError("Benchmark config lists no instances")
        if not self.seeds:
            raise InstanceError("Benchmark config needs explicit seeds")
        if self.trials < 1 or self.offsets < 1 or self.workers < 1:
            raise InstanceError("trials, offsets and workers must be positive")


@dataclass
class BenchmarkReport:
    """One benchmark cell: bounds, pricing welfare and ratios."""

    instance: str
    parameter: str
    mode: str
    seed: int
    construction: str
    frac_opt: Number
    construction_value: Number
    welfare: Number
    welfare_method: str
    revenue: Number
    utility: Number
    welfare_stderr: Optional[float] = None
    opt: Optional[Number] = None
    greedy_offline: Optional[float] = None
    greedy_stderr: Optional[float] = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def ratio_frac_opt(self) -> Optional[float]:
        """FracOpt / pricing welfare."""
        return _ratio(self.frac_opt, self.welfare)

    @property
    def ratio_opt(self) -> Optional[float]:
        """Opt / pricing welfare, when the exact optimum was computed."""
        return None if self.opt is None else _ratio(self.opt, self.welfare)

    def to_row(self) -> Dict[str, str]:
        """CSV cells; timings are left out so reports stay reproducible."""
        values = {name: getattr(self, name) for name in REPORT_COLUMNS}
        return {name: format_cell(value) for name, value in values.items()}


def _ratio(bound: Number, welfare: Number) -> Optional[float]:
    if not welfare > 0:
        return None
    return float(bound) / float(welfare)


@contextmanager
def _stage(name: str, timings: Dict[str, float]) -> Iterator[None]:
    started = time.perf_counter()
    try:
        yield
    except PipelineStageError:
        raise
    except BundlePricingError as err:
        raise PipelineStageError(name, err) from err
    finally:
        timings[name] = time.perf_counter() - started
        _LOGGER.info("Stage %s took %.3fs", name, timings[name])


def build_menu(
    inst: Instance, mode: str, offsets: int, floor_mode: str, tol: float
) -> Tuple[Number, Construction]:
    """Solve the relaxation for ``mode`` and price the best construction.

    Returns the LP objective with the priced construction.
    """
    if mode == "interval-costs":
        solution = solve_frac_opt_with_costs(inst)
        return solution.objective, _cost_menu(solution.allocation, offsets, tol)
    solution = solve_frac_opt(inst)
    if mode == "tree":
        return solution.objective, _tree_menu(solution.allocation, floor_mode, tol)
    return solution.objective, _interval_menu(solution.allocation, offsets, tol)


def evaluate_menu(
    inst: Instance,
    menu: BaseMenu,
    policy: Union[str, ArrivalPolicy],
    trials: int,
    seed: int,
    budget: Optional[SimulationBudget] = None,
) -> Tuple[Number, Optional[float], Number, Number, str]:
    """(welfare, s.e., revenue, utility, method) of a menu under an arrival policy.

    Exact expectations are used whenever the scenario space and the order
    search fit the budget; otherwise the policy is simulated.
    """
    budget = budget or SimulationBudget()
    if isinstance(policy, str):
        policy = ArrivalPolicy.adversarial() if policy == ADVERSARIAL else ArrivalPolicy(policy)
    fits = realization_count(inst) <= budget.max_realizations
    n = len(inst.buyers)
    if fits and policy.kind == ADVERSARIAL and n <= budget.max_exhaustive_buyers:
        search = worst_case_order_welfare(inst, menu, budget)
        outcome = expected_outcome_exact(inst, menu, search.order, budget)
        return outcome.welfare, None, outcome.revenue, outcome.utility, "exact-worst-order"
    if fits and policy.kind == FIXED:
        order = policy.order if policy.order is not None else range(n)
        outcome = expected_outcome_exact(inst, menu, order, budget)
        return outcome.welfare, None, outcome.revenue, outcome.utility, "exact-fixed-order"
    if policy.kind == ADVERSARIAL:
        _LOGGER.warning("Adversarial order beyond exhaustive budget; simulating heuristic order")
        policy = ArrivalPolicy.adversarial(exhaustive=False)
    result = monte_carlo_welfare(inst, menu, policy, trials, seed, budget)
    return result.mean, result.stderr, result.revenue, result.utility, f"monte-carlo-{policy.kind}"


def run_pipeline(
    inst: Instance,
    mode: str = "interval",
    seed: int = 0,
    offsets: int = DEFAULT_OFFSETS,
    trials: int = 10000,
    policy: Union[str, ArrivalPolicy] = ADVERSARIAL,
    floor_mode: str = PER_ARM,
    greedy_trials: int = 0,
    exact_opt: bool = True,
    parameter: str = "",
    tol: float = DEFAULT_TOLERANCE,
) -> BenchmarkReport:
    """Run every stage on one instance and report bounds against the pricing welfare."""
    timings: Dict[str, float] = {}
    with _stage("validate", timings):
        kind = get_pipeline_mode(mode)
        if kind == "tree":
            inst.topology.require_tree(f"pipeline mode {mode}")
        else:
            inst.topology.require_line(f"pipeline mode {mode}")
        report = validate_instance(inst, tol)
        if not report.is_valid:
            raise InstanceValidationError(
                f"Invalid instance {inst.name}:\n{report}", details=report
            )
    with _stage("construct", timings):
        frac_opt, construction = build_menu(inst, mode, offsets, floor_mode, tol)
    if policy == LOWER_BOUND_ORDER:
        policy = tree_lower_bound_order(inst)
    with _stage("simulate", timings):
        welfare, stderr, revenue, utility, method = evaluate_menu(
            inst, construction.menu, policy, trials, seed
        )
    opt: Optional[Number] = None
    if exact_opt:
        with _stage("opt", timings):
            try:
                opt = offline_opt_exact(inst, OracleBudget())
            except BudgetExceededError as err:
                _LOGGER.warning("Skipping exact optimum for %s: %s", inst.name, err)
    greedy = None
    if greedy_trials > 0:
        with _stage("greedy", timings):
            greedy = greedy_offline_welfare(inst, greedy_trials, seed)
    return BenchmarkReport(
        instance=inst.name,
        parameter=parameter,
        mode=mode,
        seed=seed,
        construction=construction.label,
        frac_opt=frac_opt,
        construction_value=construction.value,
        welfare=welfare,
        welfare_method=method,
        revenue=revenue,
        utility=utility,
        welfare_stderr=stderr,
        opt=opt,
        greedy_offline=greedy.mean if greedy is not None else None,
        greedy_stderr=greedy.stderr if greedy is not None else None,
        timings=timings,
    )


def run_cell(config: BenchmarkConfig, index: int, seed: int) -> BenchmarkReport:
    """Benchmark one (instance source, seed) cell."""
    source = config.instances[index]
    with _stage("load", {}):
        inst = source.load(seed, config.rational)
    return run_pipeline(
        inst,
        config.mode,
        seed,
        config.offsets,
        config.trials,
        config.policy,
        config.floor_mode,
        config.greedy_trials,
        config.exact_opt,
        source.parameter,
        config.tolerance,
    )


async def run_benchmark(config: BenchmarkConfig) -> List[BenchmarkReport]:
    """Fan the cells out to worker threads; reports come back sorted by cell."""
    config.validate()
    cells = [(i, seed) for i in range(len(config.instances)) for seed in config.seeds]
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        tasks = [loop.run_in_executor(executor, run_cell, config, i, seed) for i, seed in cells]
        reports = await asyncio.gather(*tasks)
    keyed = sorted(zip(cells, reports), key=lambda pair: pair[0])
    _LOGGER.info("Benchmark finished: %d cells", len(keyed))
    return [report for _, report in keyed]


def _write_csv(rows: Sequence[Dict[str, str]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def reports_to_csv(reports: Sequence[BenchmarkReport]) -> str:
    """Full report table."""
    return _write_csv([r.to_row() for r in reports], REPORT_COLUMNS)


def emit_plot_data(reports: Sequence[BenchmarkReport]) -> str:
    """Long-format rows (instance, parameter, ratio, welfare, bound) for plotting.

    The bound is FracOpt, which every report carries.
    """
    if not reports:
        raise InstanceError("emit_plot_data needs at least one report")
    rows = [
        {
            "instance": r.instance,
            "parameter": r.parameter,
            "ratio": format_cell(r.ratio_frac_opt),
            "welfare": format_cell(r.welfare),
            "bound": format_cell(r.frac_opt),
        }
        for r in reports
    ]
    return _write_csv(rows, PLOT_COLUMNS)

