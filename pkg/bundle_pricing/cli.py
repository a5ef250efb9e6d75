"""Command-line interface for the bundle pricing toolkit."""

from __future__ import annotations

import argparse
import asyncio
import csv
import io
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .capacity import build_capacity_allocation, unit_allocation_with_costs
from .exceptions import (
    BudgetExceededError,
    BundlePricingError,
    InstanceError,
    InstanceValidationError,
    LpNumericalError,
    PipelineStageError,
    UnsupportedTopologyError,
)
from .generators import GENERATORS, generate
from .interval_bundling import DEFAULT_OFFSETS, build_unit_allocation
from .lp import solve_frac_opt, solve_frac_opt_with_costs
from .menus import FLOOR_MODES, PER_ARM, load_menu, save_menu
from .models import Instance, validate_instance
from .numeric import DEFAULT_TOLERANCE, format_cell
from .oracles import offline_opt_exact
from .pipeline import (
    BENCHMARK_POLICIES,
    PIPELINE_MODES,
    BenchmarkConfig,
    InstanceSource,
    build_menu,
    emit_plot_data,
    reports_to_csv,
    run_benchmark,
)
from .simulation import ADVERSARIAL, ARRIVAL_POLICIES, FIXED, ArrivalPolicy, iter_trials
from .tree_layering import build_layered_allocation
from .unit_allocation import UnitAllocation

_LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3
EXIT_NUMERICAL = 4


def exit_code(err: BaseException) -> int:
    """Exit status for a library error."""
    if isinstance(err, PipelineStageError) and err.cause is not None:
        return exit_code(err.cause)
    if isinstance(err, (InstanceError, UnsupportedTopologyError)):
        return EXIT_INPUT
    if isinstance(err, BudgetExceededError):
        return EXIT_BUDGET
    if isinstance(err, LpNumericalError):
        return EXIT_NUMERICAL
    return EXIT_ERROR


def _csv(rows: Sequence[Sequence[Any]], header: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[format_cell(v) for v in row] for row in rows])
    return buffer.getvalue()


def _emit(args: argparse.Namespace, outputs: Dict[str, str]) -> None:
    """Write every named output into --out, or all of them to stdout."""
    if args.out:
        directory = Path(args.out)
        directory.mkdir(parents=True, exist_ok=True)
        for name, text in outputs.items():
            (directory / name).write_text(text, encoding="utf-8")
            _LOGGER.info("Wrote %s", directory / name)
        return
    sys.stdout.write("\n".join(outputs.values()))


def _load(args: argparse.Namespace) -> Instance:
    inst = Instance.load(args.instance)
    report = validate_instance(inst, args.tolerance)
    if not report.is_valid:
        raise InstanceValidationError(
            f"Invalid instance {args.instance}:\n{report}", details=report
        )
    if getattr(args, "root", None) is not None:
        inst = inst.rerooted(args.root)
    return inst.to_rational() if args.rational else inst


def _cmd_gen(args: argparse.Namespace) -> int:
    params: Dict[str, Any]
    if args.kind == "single-item":
        params = {"eps": args.eps}
    elif args.kind == "item-pricing":
        params = {"length": args.length, "eps": args.eps}
    elif args.kind == "tree-lb":
        params = {"height": args.height}
    else:
        params = {
            "n_buyers": args.buyers,
            "scenarios": args.scenarios,
            "value_range": (args.value_min, args.value_max),
            "capacity_range": (args.capacity_min, args.capacity_max),
            "costs": args.costs,
        }
        if args.kind == "random-interval":
            params.update(n_items=args.items, max_len=args.max_len)
        else:
            params.update(n_edges=args.edges)
    inst = generate(args.kind, params, args.seed, args.rational)
    _emit(args, {f"{inst.name}.json": inst.dumps()})
    return EXIT_OK


def _cmd_solve_lp(args: argparse.Namespace) -> int:
    inst = _load(args)
    solution = solve_frac_opt_with_costs(inst) if args.costs else solve_frac_opt(inst)
    rows: List[List[Any]] = [[j, solution.allocation[j]] for j in range(inst.n_jobs)]
    rows.append(["objective", solution.objective])
    _emit(args, {"lp.csv": _csv(rows, ["job_id", "x"])})
    return EXIT_OK


def _unit_allocation(inst: Instance, args: argparse.Namespace) -> UnitAllocation:
    if args.costs:
        x = solve_frac_opt_with_costs(inst).allocation
        return unit_allocation_with_costs(x, args.offsets, args.tolerance)
    x = solve_frac_opt(inst).allocation
    if all(item.capacity == 1 for item in inst.items):
        return build_unit_allocation(x, args.offsets, args.tolerance)
    return build_capacity_allocation(x, offsets=args.offsets, tol=args.tolerance)


def _cmd_bundle(args: argparse.Namespace) -> int:
    inst = _load(args)
    unit = _unit_allocation(inst, args)
    bundles = [[b.id, b.descriptor()] for b in unit.bundles]
    jobs = [
        [j, unit.assignment[j], unit.weights[j]]
        for j in unit.weights.support()
    ]
    _emit(
        args,
        {
            "bundles.csv": _csv(bundles, ["bundle_id", "item_copy_list"]),
            "assignment.csv": _csv(jobs, ["job_id", "bundle_id", "x"]),
        },
    )
    return EXIT_OK


def _cmd_layer(args: argparse.Namespace) -> int:
    inst = _load(args)
    x = solve_frac_opt(inst).allocation
    layered = build_layered_allocation(x, tol=args.tolerance)
    copies = [[layer.id, e, r] for layer in layered.layers for e, r in layer.copies]
    arms = sorted(
        [arm.job, arm.side, layer.id, layered.weights[arm.job]]
        for layer in layered.layers
        for arm in layer.arms
    )
    _emit(
        args,
        {
            "layers.csv": _csv(copies, ["layer_id", "edge_id", "copy"]),
            "arms.csv": _csv(arms, ["job_id", "arm", "layer_id", "y"]),
        },
    )
    return EXIT_OK


def _price_mode(inst: Instance, args: argparse.Namespace) -> str:
    if args.tree or (inst.topology.is_tree and not args.interval):
        return "tree"
    return "interval-costs" if args.costs else "interval"


def _cmd_price(args: argparse.Namespace) -> int:
    inst = _load(args)
    _, construction = build_menu(
        inst, _price_mode(inst, args), args.offsets, args.floor_mode, args.tolerance
    )
    if args.save:
        save_menu(construction.menu, args.save)
    _emit(args, {"menu.csv": _csv(construction.menu.entries(), ["bundle", "price"])})
    return EXIT_OK


def _policy(args: argparse.Namespace) -> ArrivalPolicy:
    if args.order and args.policy != FIXED:
        raise InstanceError(f"--order needs --policy fixed, got {args.policy}")
    if args.policy == FIXED:
        if not args.order:
            raise InstanceError("--policy fixed needs --order")
        return ArrivalPolicy.fixed(int(i) for i in args.order.split(","))
    if args.policy == ADVERSARIAL:
        return ArrivalPolicy.adversarial()
    return ArrivalPolicy(args.policy)


def _cmd_simulate(args: argparse.Namespace) -> int:
    inst = _load(args)
    menu = load_menu(args.menu)
    rows = []
    for trial, outcome in iter_trials(inst, menu, _policy(args), args.trials, args.seed):
        rows.append(
            [
                trial,
                " ".join(str(i) for i in outcome.order),
                outcome.welfare,
                outcome.revenue,
                outcome.utility,
                outcome.cost,
            ]
        )
    table = np.array([[float(v) for v in r[2:5]] for r in rows])
    n = len(rows)
    stderr = float(np.std(table[:, 0], ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    summary = [[*(float(m) for m in table.mean(axis=0)), stderr]]
    _emit(
        args,
        {
            "trials.csv": _csv(
                rows, ["trial", "order", "welfare", "revenue", "utility", "cost"]
            ),
            "summary.csv": _csv(summary, ["mean_welfare", "revenue", "utility", "stderr"]),
        },
    )
    return EXIT_OK


def _cmd_opt(args: argparse.Namespace) -> int:
    inst = _load(args)
    if args.lp:
        solution = solve_frac_opt_with_costs(inst) if inst.has_costs else solve_frac_opt(inst)
        rows = [["frac_opt", solution.objective]]
    else:
        rows = [["opt", offline_opt_exact(inst)]]
    _emit(args, {"opt.csv": _csv(rows, ["bound", "value"])})
    return EXIT_OK


def _parse_param(text: str) -> Any:
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            continue
    return text


def _cmd_bench(args: argparse.Namespace) -> int:
    if args.config:
        config = BenchmarkConfig.load(args.config)
    else:
        sources = [InstanceSource(file=path) for path in args.instance or []]
        if args.generator:
            params = {}
            for item in args.param or []:
                key, _, value = item.partition("=")
                params[key] = _parse_param(value)
            sources.append(InstanceSource(generator=args.generator, params=params))
        config = BenchmarkConfig(
            instances=sources,
            mode=args.mode,
            offsets=args.offsets,
            trials=args.trials,
            seeds=args.seeds or [args.seed],
            policy=args.policy,
            floor_mode=args.floor_mode,
            rational=args.rational,
            tolerance=args.tolerance,
            greedy_trials=args.greedy_trials,
            exact_opt=not args.no_exact,
            workers=args.workers,
        )
    reports = asyncio.run(run_benchmark(config))
    _emit(
        args,
        {"report.csv": reports_to_csv(reports), "plot.csv": emit_plot_data(reports)},
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with every subcommand."""
    parser = argparse.ArgumentParser(
        prog="bundle-pricing", description="Posted bundle pricing toolkit"
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=0, help="Master random seed")
    parser.add_argument(
        "--tolerance", type=float, default=DEFAULT_TOLERANCE, help="Comparison tolerance"
    )
    parser.add_argument(
        "--rational", action="store_true", help="Exact rational arithmetic"
    )
    parser.add_argument("--out", help="Directory for output files (default: stdout)")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate an instance file")
    gen.add_argument("kind", choices=sorted(GENERATORS))
    gen.add_argument("--eps", type=float, default=0.1)
    gen.add_argument("--length", type=int, default=4, help="L of the item-pricing instance")
    gen.add_argument("--height", type=int, default=3, help="L of the tree lower bound")
    gen.add_argument("--items", type=int, default=6)
    gen.add_argument("--edges", type=int, default=6)
    gen.add_argument("--buyers", type=int, default=4)
    gen.add_argument("--scenarios", type=int, default=2)
    gen.add_argument("--max-len", type=int, default=3)
    gen.add_argument("--value-min", type=float, default=1.0)
    gen.add_argument("--value-max", type=float, default=10.0)
    gen.add_argument("--capacity-min", type=int, default=1)
    gen.add_argument("--capacity-max", type=int, default=1)
    gen.add_argument("--costs", action="store_true", help="Add copy cost schedules")
    gen.set_defaults(func=_cmd_gen)

    solve = sub.add_parser("solve-lp", help="Solve the fractional relaxation")
    solve.add_argument("instance")
    solve.add_argument("--costs", action="store_true")
    solve.set_defaults(func=_cmd_solve_lp)

    bundle = sub.add_parser("bundle", help="Build a fractional unit allocation")
    bundle.add_argument("instance")
    bundle.add_argument("--offsets", type=int, default=DEFAULT_OFFSETS)
    bundle.add_argument("--costs", action="store_true")
    bundle.set_defaults(func=_cmd_bundle)

    layer = sub.add_parser("layer", help="Build a layered allocation of a tree")
    layer.add_argument("instance")
    layer.add_argument("--root", type=int, help="Root the tree at this vertex")
    layer.set_defaults(func=_cmd_layer)

    price = sub.add_parser("price", help="Price an instance and print the menu")
    price.add_argument("instance")
    kind = price.add_mutually_exclusive_group()
    kind.add_argument("--tree", action="store_true")
    kind.add_argument("--interval", action="store_true")
    price.add_argument("--costs", action="store_true")
    price.add_argument("--offsets", type=int, default=DEFAULT_OFFSETS)
    price.add_argument("--floor-mode", choices=FLOOR_MODES, default=PER_ARM)
    price.add_argument("--root", type=int, help="Root the tree at this vertex")
    price.add_argument("--save", help="Also write the menu file here")
    price.set_defaults(func=_cmd_price)

    simulate = sub.add_parser("simulate", help="Run the mechanism against a menu")
    simulate.add_argument("instance")
    simulate.add_argument("--menu", required=True)
    simulate.add_argument(
        "--policy", choices=ARRIVAL_POLICIES, default="random"
    )
    simulate.add_argument("--order", help="Comma-separated buyer order for --policy fixed")
    simulate.add_argument("--trials", type=int, default=1000)
    simulate.set_defaults(func=_cmd_simulate)

    opt = sub.add_parser("opt", help="Print the offline optimum or its LP bound")
    opt.add_argument("instance")
    which = opt.add_mutually_exclusive_group()
    which.add_argument("--exact", action="store_true", default=True)
    which.add_argument("--lp", action="store_true")
    opt.set_defaults(func=_cmd_opt)

    bench = sub.add_parser("bench", help="Run the end-to-end benchmark")
    bench.add_argument("--config", help="JSON benchmark config")
    bench.add_argument("--instance", action="append", help="Instance file (repeatable)")
    bench.add_argument("--generator", choices=sorted(GENERATORS))
    bench.add_argument("--param", action="append", help="Generator parameter key=value")
    bench.add_argument("--mode", choices=sorted(PIPELINE_MODES), default="interval")
    bench.add_argument("--offsets", type=int, default=DEFAULT_OFFSETS)
    bench.add_argument("--trials", type=int, default=10000)
    bench.add_argument("--seeds", type=int, nargs="+")
    bench.add_argument("--policy", choices=BENCHMARK_POLICIES, default=ADVERSARIAL)
    bench.add_argument("--floor-mode", choices=FLOOR_MODES, default=PER_ARM)
    bench.add_argument("--greedy-trials", type=int, default=0)
    bench.add_argument("--no-exact", action="store_true", help="Skip the exact optimum")
    bench.add_argument("--workers", type=int, default=4)
    bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args))
    except BundlePricingError as err:
        stage = err.stage if isinstance(err, PipelineStageError) else args.command
        _LOGGER.error("%s failed: %s", stage, err)
        return exit_code(err)


if __name__ == "__main__":
    sys.exit(main())
