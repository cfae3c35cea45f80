import json
import re
import subprocess
import sys

import numpy as np
import pytest

from conesta import GridMask, build_tv_operator, m_constant
from conesta.cli import main
from conesta.solvers import SolverTrace


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "conesta", *[str(a) for a in args]],
        capture_output=True, text=True,
    )


SIM_ARGS = ("simulate", "--n", 60, "--p", 60, "--correlation", "low",
            "--sparsity", "0.5", "--snr", "0.5", "--seed", 1)


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "d1"
    proc = run_cli(*SIM_ARGS, "--out", out)
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="module")
def solve_dir(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("res") / "r1"
    proc = run_cli("solve", "--solver", "conesta", "--eps", "1e-4",
                   "--data", dataset_dir, "--out", out)
    assert proc.returncode == 0, proc.stderr
    return out


class TestSimulateCommand:

    def test_writes_layout_and_prints_summary(self, dataset_dir):
        for name in ("X.csv", "y.csv", "beta_star.csv", "e.csv", "meta.json"):
            assert (dataset_dir / name).exists()
        proc = run_cli(*SIM_ARGS, "--out", dataset_dir.parent / "again")
        assert proc.returncode == 0
        assert re.search(r"^f_star [-0-9.e+]+$", proc.stdout, re.M)
        assert re.search(r"^kkt_residual [-0-9.e+]+$", proc.stdout, re.M)
        kkt = float(proc.stdout.split("kkt_residual")[1].split()[0])
        assert kkt <= 1e-9

    def test_byte_identical_reruns(self, tmp_path, dataset_dir):
        proc = run_cli(*SIM_ARGS, "--out", tmp_path / "d2")
        assert proc.returncode == 0
        for name in ("X.csv", "y.csv", "beta_star.csv", "e.csv", "meta.json"):
            assert (tmp_path / "d2" / name).read_bytes() == \
                (dataset_dir / name).read_bytes()

    def test_medium_sparsity_accepted(self, tmp_path):
        proc = run_cli("simulate", "--n", 40, "--p", 40, "--sparsity", "0.725",
                       "--seed", 2, "--out", tmp_path / "d")
        assert proc.returncode == 0

    def test_infeasible_calibration_exits_3(self, tmp_path):
        proc = run_cli("simulate", "--n", 40, "--p", 40, "--l1", "0",
                       "--seed", 1, "--out", tmp_path / "d")
        assert proc.returncode == 3
        assert "numerical failure" in proc.stderr

    def test_bad_arguments_exit_2(self, tmp_path):
        proc = run_cli("simulate", "--n", 40, "--out", tmp_path / "d")
        assert proc.returncode == 2
        proc = run_cli("simulate", "--n", 40, "--p", 40, "--correlation",
                       "extreme", "--out", tmp_path / "d")
        assert proc.returncode == 2


class TestSolveCommand:

    def test_result_files(self, solve_dir, dataset_dir):
        result = json.loads((solve_dir / "result.json").read_text())
        assert result["converged"] is True
        assert result["gap"] <= 1e-4
        assert result["error_to_optimum"] <= 1e-4
        assert result["outer_steps"] >= 1
        beta = np.loadtxt(solve_dir / "beta.csv")
        assert beta.shape == (60,)
        trace = SolverTrace.read_csv(solve_dir / "trace.csv")
        assert len(trace) >= 2

    def test_fixed_mu_chen_trace(self, dataset_dir, tmp_path):
        proc = run_cli("solve", "--solver", "fista-fixed", "--mode", "chen",
                       "--eps", "1e-2", "--budget", "3000",
                       "--data", dataset_dir, "--out", tmp_path / "r")
        assert proc.returncode == 0, proc.stderr
        trace = SolverTrace.read_csv(tmp_path / "r" / "trace.csv")
        M = m_constant(build_tv_operator(GridMask.chain(60)))
        want = 1e-2 / (2.0 * 1.618 * M)
        mus = {rec.mu for rec in trace.records}
        assert len(mus) == 1
        assert mus.pop() == pytest.approx(want, rel=1e-12)

    def test_warm_start_uses_fewer_iterations(self, dataset_dir, solve_dir, tmp_path):
        proc = run_cli("solve", "--solver", "conesta", "--eps", "1e-4",
                       "--data", dataset_dir, "--warm-start", solve_dir / "beta.csv",
                       "--out", tmp_path / "warm")
        assert proc.returncode == 0, proc.stderr
        cold = json.loads((solve_dir / "result.json").read_text())
        warm = json.loads((tmp_path / "warm" / "result.json").read_text())
        assert warm["inner_iterations"] < cold["inner_iterations"]

    def test_raw_csv_inputs_with_mask(self, tmp_path, rng):
        X = rng.standard_normal((20, 6))
        y = rng.standard_normal(20)
        np.savetxt(tmp_path / "X.csv", X, delimiter=",")
        np.savetxt(tmp_path / "y.csv", y, delimiter=",")
        (tmp_path / "mask.txt").write_text("dims 3 2 1\n1 1\n1 1\n1 1\n")
        proc = run_cli("solve", "--X", tmp_path / "X.csv", "--y", tmp_path / "y.csv",
                       "--mask", tmp_path / "mask.txt",
                       "--l1", "0.1", "--l2", "1.0", "--tv", "0.5",
                       "--eps", "1e-5", "--out", tmp_path / "r")
        assert proc.returncode == 0, proc.stderr
        result = json.loads((tmp_path / "r" / "result.json").read_text())
        assert result["converged"] is True

    def test_raw_inputs_need_weights(self, tmp_path, rng):
        np.savetxt(tmp_path / "X.csv", rng.standard_normal((5, 3)), delimiter=",")
        np.savetxt(tmp_path / "y.csv", rng.standard_normal(5), delimiter=",")
        proc = run_cli("solve", "--X", tmp_path / "X.csv", "--y", tmp_path / "y.csv",
                       "--eps", "1e-3", "--out", tmp_path / "r")
        assert proc.returncode == 2

    def test_mask_size_mismatch(self, dataset_dir, tmp_path):
        (tmp_path / "mask.txt").write_text("dims 2 1 1\n1\n1\n")
        proc = run_cli("solve", "--data", dataset_dir, "--mask", tmp_path / "mask.txt",
                       "--eps", "1e-3", "--out", tmp_path / "r")
        assert proc.returncode == 2

    def test_unknown_solver_exits_2(self, dataset_dir, tmp_path):
        proc = run_cli("solve", "--solver", "sgd", "--data", dataset_dir,
                       "--out", tmp_path / "r")
        assert proc.returncode == 2

    def test_inexact_solver(self, dataset_dir, tmp_path):
        proc = run_cli("solve", "--solver", "inexact", "--eps", "1e-3",
                       "--data", dataset_dir, "--out", tmp_path / "r")
        assert proc.returncode == 0, proc.stderr
        result = json.loads((tmp_path / "r" / "result.json").read_text())
        assert result["converged"] is True


class TestPlotCommand:

    def test_renders_svg_with_dots(self, solve_dir, dataset_dir, tmp_path):
        fig = tmp_path / "fig.svg"
        proc = run_cli("plot", solve_dir / "trace.csv", "--data", dataset_dir,
                       "--out", fig)
        assert proc.returncode == 0, proc.stderr
        svg = fig.read_text()
        assert svg.lstrip().startswith("<?xml")
        assert "seconds" in svg and "iterations" in svg and "error" in svg
        result = json.loads((solve_dir / "result.json").read_text())
        m = re.search(r'<g id="continuation-dots-iter-trace">(.*?)</g>', svg, re.S)
        assert m is not None
        assert m.group(1).count("<use") == result["outer_steps"]
        assert f"{result['outer_steps']} continuation dots" in proc.stdout

    def test_multiple_traces_legend(self, solve_dir, dataset_dir, tmp_path):
        other = tmp_path / "other.csv"
        other.write_bytes((solve_dir / "trace.csv").read_bytes())
        fig = tmp_path / "fig2.svg"
        proc = run_cli("plot", solve_dir / "trace.csv", other, "--out", fig)
        assert proc.returncode == 0, proc.stderr
        svg = fig.read_text()
        assert "trace" in svg and "other" in svg

    def test_malformed_trace_exits_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("nonsense\n")
        proc = run_cli("plot", bad, "--out", tmp_path / "f.svg")
        assert proc.returncode == 2


class TestBenchCommand:

    def test_config_run(self, tmp_path):
        cfg = {
            "solvers": [
                {"kind": "conesta", "eps": 1e-2, "max_inner_total": 100000,
                 "max_inner_per_step": 100000},
                {"kind": "fista-large", "eps": 1e-2, "max_inner_total": 10000},
            ],
            "designs": [{"n": 40, "p": 40, "seed": 1}],
            "levels": [1.0, 1e-1, 1e-2],
        }
        (tmp_path / "bench.json").write_text(json.dumps(cfg))
        proc = run_cli("bench", tmp_path / "bench.json", "--out", tmp_path / "out",
                       "--rank-by", "iters")
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "out" / "ranks.csv").exists()
        assert len(list((tmp_path / "out" / "traces").iterdir())) == 2

    def test_missing_config_exits_2(self, tmp_path):
        proc = run_cli("bench", tmp_path / "none.json")
        assert proc.returncode == 2


class TestMainInProcess:

    def test_returns_2_on_bad_args(self):
        assert main(["solve", "--solver", "nope"]) == 2

    def test_no_command_is_error(self):
        assert main([]) == 2
