"""Tests for the command-line interface."""
from __future__ import annotations

import csv

import pytest

from bundle_pricing import __version__
from bundle_pricing.cli import (
    EXIT_BUDGET,
    EXIT_ERROR,
    EXIT_INPUT,
    EXIT_NUMERICAL,
    EXIT_OK,
    exit_code,
    main,
)
from bundle_pricing.exceptions import (
    AllocationError,
    BudgetExceededError,
    InstanceError,
    LpNumericalError,
    PipelineStageError,
)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


@pytest.fixture
def instance_file(tmp_path):
    """Generate the single-item instance and return its path."""
    assert main(["--out", str(tmp_path), "gen", "single-item", "--eps", "0.1"]) == EXIT_OK
    return tmp_path / "single-item-eps0.1.json"


class TestCommands:
    """Subcommands write their tables."""

    def test_gen(self, instance_file):
        assert instance_file.exists()

    def test_version(self, capsys):
        with pytest.raises(SystemExit):
            main(["--version"])
        assert __version__ in capsys.readouterr().out

    def test_solve_lp_rational(self, instance_file, capsys):
        assert main(["--rational", "solve-lp", str(instance_file)]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "job_id,x"
        assert "objective,19/10" in lines

    def test_bundle(self, tmp_path):
        out = tmp_path / "out"
        main(["--out", str(tmp_path), "gen", "item-pricing", "--length", "8", "--eps", "0.5"])
        path = tmp_path / "item-pricing-L8.json"
        assert main(["--out", str(out), "bundle", str(path)]) == EXIT_OK
        bundles = _read_csv(out / "bundles.csv")
        assert bundles[0] == ["bundle_id", "item_copy_list"]
        assert ["0", "0-7@1"] in bundles
        assert ["8", "0"] in [row[:2] for row in _read_csv(out / "assignment.csv")]

    def test_layer(self, tmp_path):
        main(["--out", str(tmp_path), "gen", "tree-lb", "--height", "2"])
        out = tmp_path / "out"
        assert main(["--out", str(out), "layer", str(tmp_path / "tree-lb-L2.json")]) == EXIT_OK
        assert _read_csv(out / "layers.csv")[0] == ["layer_id", "edge_id", "copy"]
        assert _read_csv(out / "arms.csv")[0] == ["job_id", "arm", "layer_id", "y"]

    def test_price_then_simulate(self, tmp_path, instance_file):
        menu = tmp_path / "menu.json"
        out = tmp_path / "out"
        assert main(["price", str(instance_file), "--save", str(menu)]) == EXIT_OK
        assert menu.exists()
        code = main(
            [
                "--out",
                str(out),
                "simulate",
                str(instance_file),
                "--menu",
                str(menu),
                "--policy",
                "fixed",
                "--order",
                "0,1",
                "--trials",
                "20",
            ]
        )
        assert code == EXIT_OK
        trials = _read_csv(out / "trials.csv")
        assert len(trials) == 21
        assert {row[1] for row in trials[1:]} == {"0 1"}
        assert _read_csv(out / "summary.csv")[0][0] == "mean_welfare"

    def test_opt(self, instance_file, capsys):
        assert main(["--rational", "opt", str(instance_file), "--lp"]) == EXIT_OK
        assert "frac_opt,19/10" in capsys.readouterr().out.splitlines()

    def test_bench(self, tmp_path):
        code = main(
            [
                "--out",
                str(tmp_path),
                "bench",
                "--generator",
                "single-item",
                "--param",
                "eps=0.1",
                "--trials",
                "50",
                "--workers",
                "1",
            ]
        )
        assert code == EXIT_OK
        report = _read_csv(tmp_path / "report.csv")
        assert report[0][0] == "instance"
        assert report[1][0] == "single-item-eps0.1"
        assert (tmp_path / "plot.csv").exists()


class TestExitCodes:
    """Library errors map onto exit statuses."""

    def test_missing_instance(self, tmp_path):
        assert main(["solve-lp", str(tmp_path / "none.json")]) == EXIT_INPUT

    def test_budget(self, tmp_path):
        main(["--out", str(tmp_path), "gen", "tree-lb", "--height", "5"])
        assert main(["opt", str(tmp_path / "tree-lb-L5.json")]) == EXIT_BUDGET

    def test_bench_without_instances(self):
        assert main(["bench"]) == EXIT_INPUT

    def test_order_needs_fixed_policy(self, tmp_path, instance_file):
        menu = tmp_path / "menu.json"
        main(["price", str(instance_file), "--save", str(menu)])
        simulate = ["simulate", str(instance_file), "--menu", str(menu)]
        assert main(simulate + ["--policy", "random", "--order", "0,1"]) == EXIT_INPUT
        assert main(simulate + ["--policy", "adversarial", "--order", "1,0"]) == EXIT_INPUT
        assert main(simulate + ["--policy", "fixed"]) == EXIT_INPUT

    @pytest.mark.parametrize(
        "err,code",
        [
            (InstanceError("x"), EXIT_INPUT),
            (BudgetExceededError("x", 1, 2), EXIT_BUDGET),
            (LpNumericalError("x"), EXIT_NUMERICAL),
            (AllocationError("x"), EXIT_ERROR),
            (PipelineStageError("opt", BudgetExceededError("x", 1, 2)), EXIT_BUDGET),
        ],
    )
    def test_exit_code(self, err, code):
        assert exit_code(err) == code


class TestDeterminism:
    """Fixed seeds give byte-identical outputs."""

    def _run(self, out):
        instance = out / "random-interval-s5.json"
        steps = [
            ["--seed", "5", "gen", "random-interval", "--items", "6", "--buyers", "4"],
            ["bundle", str(instance)],
            ["price", str(instance), "--save", str(out / "menu.json")],
            [
                "--seed",
                "3",
                "simulate",
                str(instance),
                "--menu",
                str(out / "menu.json"),
                "--trials",
                "30",
            ],
            [
                "bench",
                "--generator",
                "random-interval",
                "--param",
                "n_items=5",
                "--param",
                "n_buyers=3",
                "--seeds",
                "0",
                "1",
                "--policy",
                "random",
                "--trials",
                "50",
                "--workers",
                "2",
            ],
        ]
        for step in steps:
            assert main(["--out", str(out)] + step) == EXIT_OK
        return {path.name: path.read_bytes() for path in sorted(out.iterdir())}

    def test_two_runs_match(self, tmp_path):
        first = self._run(tmp_path / "first")
        second = self._run(tmp_path / "second")
        assert sorted(first) == sorted(second)
        assert "trials.csv" in first and "report.csv" in first
        assert first == second
