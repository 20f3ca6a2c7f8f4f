import json

import numpy as np
import pytest

from gradcut.bench import Instance, write_instance_json
from gradcut.cli import main
from gradcut.model import FeasibleDomain, QuadraticObjective

from conftest import Q_DIAG


@pytest.fixture
def e1_json(tmp_path):
    inst = Instance(
        name="e1",
        obj=QuadraticObjective(Q_DIAG),
        dom=FeasibleDomain(n=3, m=1),
        source="canonical_json",
    )
    path = tmp_path / "e1.json"
    write_instance_json(inst, path)
    return path


@pytest.fixture
def e2_json(tmp_path):
    q = np.array([[2.0, 1.0, 0.0], [1.0, 4.0, 2.0], [0.0, 2.0, 6.0]])
    inst = Instance(
        name="e2",
        obj=QuadraticObjective(q),
        dom=FeasibleDomain(n=3, m=1),
        source="canonical_json",
    )
    path = tmp_path / "e2.json"
    write_instance_json(inst, path)
    return path


class TestSolve:
    def test_solves_to_optimality(self, e1_json, capsys):
        code = main(["solve", str(e1_json), "--config", "cpm", "--backend", "bruteforce"])
        out = capsys.readouterr().out
        assert code == 0
        assert "f_best     1" in out
        assert "eps_optimal" in out

    def test_loose_epsilon_exits_zero_immediately(self, e1_json, capsys):
        code = main(
            [
                "solve", str(e1_json), "--config", "pgm", "--epsilon", "10",
                "--backend", "bruteforce", "--x0", "001",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "f_best     3" in out
        assert "iterations 1" in out

    def test_missing_file_exits_one(self, tmp_path, capsys):
        code = main(["solve", str(tmp_path / "nope.json"), "--config", "cpm"])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_bad_x0_exits_one(self, e1_json, capsys):
        code = main(["solve", str(e1_json), "--x0", "11", "--backend", "bruteforce"])
        assert code == 1

    def test_writes_trace(self, e1_json, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        code = main(
            ["solve", str(e1_json), "--config", "cpm", "--backend", "bruteforce",
             "--out", str(trace)]
        )
        assert code == 0
        lines = trace.read_text().strip().splitlines()
        assert lines[0] == "k,t,ub,lb,n_cuts,tau"
        assert len(lines) >= 2

    def test_time_limit_zero_exits_two(self, e1_json, capsys):
        code = main(
            ["solve", str(e1_json), "--config", "cpm", "--backend", "bruteforce",
             "--time-limit", "0"]
        )
        assert code == 2


class TestBench:
    def test_cell_count_and_manifest(self, e1_json, e2_json, tmp_path, capsys):
        out_dir = tmp_path / "sweep"
        code = main(
            ["bench", str(e1_json), str(e2_json), "--out", str(out_dir),
             "--backend", "bruteforce"]
        )
        assert code == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert len(manifest["cells"]) == 10
        traces = list(out_dir.glob("*.csv"))
        assert len(traces) == 10
        assert all(cell["status"] == "eps_optimal" for cell in manifest["cells"])

    def test_synthetic_sweep_is_deterministic(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out_dir = tmp_path / tag
            code = main(
                ["bench", "--synthetic", "psd_random", "--synth-count", "2",
                 "--synth-n", "7", "--seed", "3", "--out", str(out_dir),
                 "--backend", "bruteforce", "--config", "cpm", "--config", "pgm"]
            )
            assert code == 0
            manifest = json.loads((out_dir / "manifest.json").read_text())
            for cell in manifest["cells"]:
                cell.pop("runtime")
            outs.append(manifest)
        assert outs[0] == outs[1]

    def test_unreadable_instance_isolated(self, e1_json, tmp_path, capsys):
        out_dir = tmp_path / "sweep"
        code = main(
            ["bench", str(e1_json), str(tmp_path / "missing.json"), "--out", str(out_dir),
             "--backend", "bruteforce", "--config", "cpm"]
        )
        assert code == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        statuses = {cell["instance"]: cell["status"] for cell in manifest["cells"]}
        assert statuses["e1"] == "eps_optimal"
        assert any(s == "error" for s in statuses.values())

    def test_all_cells_failing_exits_nonzero(self, tmp_path):
        code = main(
            ["bench", str(tmp_path / "missing.json"), "--out", str(tmp_path / "s"),
             "--backend", "bruteforce"]
        )
        assert code == 1


class TestReport:
    def test_profiles_and_cdfs_from_sweep(self, e1_json, e2_json, tmp_path, capsys):
        sweep = tmp_path / "sweep"
        assert (
            main(
                ["bench", str(e1_json), str(e2_json), "--out", str(sweep),
                 "--backend", "bruteforce"]
            )
            == 0
        )
        report = tmp_path / "report"
        code = main(
            ["report", str(sweep / "manifest.json"), "--out", str(report),
             "--budget", "0.5"]
        )
        assert code == 0
        assert (report / "profile_iterations.csv").exists()
        assert (report / "profile_iterations.svg").exists()
        assert (report / "profile_runtime.csv").exists()
        assert (report / "cdf_t0p5.csv").exists()
        assert (report / "cdf_t0p5.svg").exists()

    def test_best_known_sidecar_used(self, e1_json, tmp_path):
        sweep = tmp_path / "sweep"
        main(["bench", str(e1_json), "--out", str(sweep), "--backend", "bruteforce",
              "--config", "cpm"])
        sidecar = tmp_path / "best.json"
        sidecar.write_text(json.dumps({"e1": 1.0}))
        report = tmp_path / "report"
        code = main(
            ["report", str(sweep / "manifest.json"), "--best-known", str(sidecar),
             "--out", str(report)]
        )
        assert code == 0
        profile = (report / "profile_iterations.csv").read_text()
        # the optimum is reached, so the profile ends at residue 0
        last = profile.strip().splitlines()[-1].split(",")
        assert float(last[2]) == 0.0

    def test_single_cell_profile_equals_series(self, e1_json, tmp_path):
        sweep = tmp_path / "sweep"
        main(["bench", str(e1_json), "--out", str(sweep), "--backend", "bruteforce",
              "--config", "cpm"])
        report = tmp_path / "report"
        assert main(["report", str(sweep / "manifest.json"), "--out", str(report)]) == 0
        rows = (report / "profile_iterations.csv").read_text().strip().splitlines()[1:]
        for row in rows:
            _, _, med, q1, q3 = row.split(",")
            assert med == q1 == q3


def test_unknown_config_rejected(e1_json):
    with pytest.raises(SystemExit):
        main(["solve", str(e1_json), "--config", "bogus"])


def test_solve_agrees_with_enumeration(tmp_path, capsys):
    from conftest import enumerate_min

    rng = np.random.default_rng(31)
    a = rng.standard_normal((8, 8))
    q = a.T @ a
    q = (q + q.T) / 2.0
    inst = Instance(
        name="rand8",
        obj=QuadraticObjective(q),
        dom=FeasibleDomain(n=8, m=3),
        source="canonical_json",
    )
    path = tmp_path / "rand8.json"
    write_instance_json(inst, path)
    f_star, _ = enumerate_min(q, inst.dom)
    for backend in ("bruteforce", "highs"):
        code = main(["solve", str(path), "--config", "pgm-tau-lb", "--backend", backend])
        out = capsys.readouterr().out
        assert code == 0
        f_line = next(ln for ln in out.splitlines() if ln.startswith("f_best"))
        assert abs(float(f_line.split()[1]) - f_star) <= 1e-9
