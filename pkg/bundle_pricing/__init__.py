"""Posted bundle pricing for interval and tree markets with stochastic buyers."""

from .allocation import FractionalAllocation, frac_val, frac_wt
from .capacity import build_capacity_allocation, build_large_market_allocation
from .exceptions import (
    AllocationError,
    BudgetExceededError,
    BundlePricingError,
    InstanceError,
    InstanceValidationError,
    LpNumericalError,
    PipelineStageError,
    UnsupportedTopologyError,
)
from .generators import GENERATORS, generate, get_generator
from .interval_bundling import build_unit_allocation
from .lp import LpSolution, solve_frac_opt, solve_frac_opt_with_costs
from .models import Instance, Item, Job, Topology, validate_instance

# Import menu classes
from .menus import (
    BaseMenu,
    CostAwareMenu,
    IntervalMenu,
    TreeMenu,
    get_menu_class,
    load_menu,
    price_layered_allocation,
    price_unit_allocation,
    price_with_costs,
    save_menu,
)
from .oracles import greedy_offline_welfare, hindsight_opt, offline_opt_exact
from .pipeline import BenchmarkConfig, BenchmarkReport, run_benchmark, run_pipeline
from .simulation import (
    ArrivalPolicy,
    expected_welfare_exact,
    monte_carlo_welfare,
    run_mechanism,
    worst_case_order_welfare,
)
from .tree_layering import build_layered_allocation, partition_value_classes
from .unit_allocation import UnitAllocation

__version__ = "0.1.0"
__all__ = [
    "AllocationError",
    "ArrivalPolicy",
    "BaseMenu",
    "BenchmarkConfig",
    "BenchmarkReport",
    "BudgetExceededError",
    "BundlePricingError",
    "CostAwareMenu",
    "FractionalAllocation",
    "GENERATORS",
    "Instance",
    "InstanceError",
    "InstanceValidationError",
    "IntervalMenu",
    "Item",
    "Job",
    "LpNumericalError",
    "LpSolution",
    "PipelineStageError",
    "Topology",
    "TreeMenu",
    "UnitAllocation",
    "UnsupportedTopologyError",
    "build_capacity_allocation",
    "build_large_market_allocation",
    "build_layered_allocation",
    "build_unit_allocation",
    "expected_welfare_exact",
    "frac_val",
    "frac_wt",
    "generate",
    "get_generator",
    "get_menu_class",
    "greedy_offline_welfare",
    "hindsight_opt",
    "load_menu",
    "monte_carlo_welfare",
    "offline_opt_exact",
    "partition_value_classes",
    "price_layered_allocation",
    "price_unit_allocation",
    "price_with_costs",
    "run_benchmark",
    "run_mechanism",
    "run_pipeline",
    "save_menu",
    "solve_frac_opt",
    "solve_frac_opt_with_costs",
    "validate_instance",
    "worst_case_order_welfare",
]
