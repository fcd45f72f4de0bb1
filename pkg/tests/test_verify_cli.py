"""Verification suites and the command-line surface: report format, exit
codes, manifests, and byte-level determinism."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mcflow.cli import main
from mcflow.verify import REPORT_COLUMNS, SUITES, run_suite, write_report


class TestSuites:
    @pytest.mark.parametrize("name", list(SUITES))
    def test_small_runs_are_clean(self, name):
        rows = run_suite(name, 2000, seed=11)
        assert rows, f"suite {name} produced no cells"
        assert sum(r.violations for r in rows) == 0

    def test_unknown_suite(self):
        with pytest.raises(KeyError):
            run_suite("bogus", 10, 1)

    def test_seeds_reproduce_margins(self):
        a = run_suite("reaction", 3000, seed=5)
        b = run_suite("reaction", 3000, seed=5)
        assert [r.worst_margin for r in a] == [r.worst_margin for r in b]

    def test_operator_pinch_skips_infeasible_cells(self):
        rows = run_suite("operator-pinch", 1000, seed=3)
        # eps = 0.1 requires eps < 1/(n(n-1)): only n = 2, 3 qualify
        strict = [r for r in rows if "eps=0.1" in r.suite]
        assert {r.n for r in strict} == {2, 3}

    def test_unpinched_c_yields_violations(self):
        rows = run_suite("reaction", 20_000, seed=42, n=4, c=0.5)
        assert sum(r.violations for r in rows) > 0

    def test_report_format(self, tmp_path):
        rows = run_suite("lemma31", 500, seed=9)
        path = tmp_path / "rep.csv"
        write_report(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(REPORT_COLUMNS)
        first = lines[1].split(",")
        assert first[0] == "lemma31"
        assert int(first[3]) > 0
        assert first[6] == "9"


def run_cli(*args):
    return main(list(args))


class TestCliSimulate:
    def test_small_sphere_run(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli("simulate", "--spec", "sphere", "--n", "2", "--k", "2",
                       "--radius", "1", "--grid", "16x32", "--t-end", "0.05",
                       "--snapshot-every", "10", "--out", str(out))
        assert code == 0
        assert (out / "diagnostics.csv").exists()
        assert (out / "manifest.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["stop_reason"] == "t_end"
        assert manifest["config"]["grid"] == "16x32"
        snaps = [f for f in os.listdir(out) if f.startswith("snap_")]
        assert manifest["outputs"][: len(snaps)] == sorted(snaps)

    def test_usage_errors(self, tmp_path):
        assert run_cli("simulate", "--spec", "sphere", "--grid", "4x8",
                       "--t-end", "0.1", "--out", str(tmp_path / "x")) == 64
        assert run_cli("simulate", "--grid", "16x32", "--t-end", "0.1",
                       "--out", str(tmp_path / "y")) == 64            # no --spec
        assert run_cli("simulate", "--spec", "sphere", "--grid", "16x32",
                       "--out", str(tmp_path / "z")) == 64            # no --t-end
        assert run_cli("nonsense") == 64

    def test_blowup_exit_code(self, tmp_path):
        out = tmp_path / "blow"
        code = run_cli("simulate", "--spec", "sphere", "--grid", "16x32",
                       "--t-end", "0.24", "--blowup-cap", "50",
                       "--out", str(out))
        assert code == 2

    def test_veronese_static_diagnostics(self, tmp_path):
        out = tmp_path / "ver"
        code = run_cli("simulate", "--spec", "veronese", "--grid", "32x64",
                       "--t-end", "0", "--out", str(out))
        assert code == 0
        rows = (out / "diagnostics.csv").read_text().splitlines()
        assert len(rows) == 2   # header + single record
        max_ratio = float(rows[1].split(",")[5])
        assert abs(max_ratio - 5.0 / 6.0) <= 1e-3

    def test_torus_seed_flows(self, tmp_path):
        out = tmp_path / "torus"
        code = run_cli("simulate", "--spec", "torus", "--grid", "16x16",
                       "--radius", "1", "--t-end", "0.02",
                       "--snapshot-every", "5", "--out", str(out))
        assert code == 0
        rows = (out / "diagnostics.csv").read_text().splitlines()[1:]
        areas = [float(r.split(",")[1]) for r in rows]
        assert all(b < a for a, b in zip(areas, areas[1:]))
        # flat seed: Gauss curvature integral starts at ~0
        assert abs(float(rows[0].split(",")[8])) <= 1e-6

    def test_config_file_precedence(self, tmp_path):
        cfg = tmp_path / "flow.cfg"
        cfg.write_text("spec=sphere\ngrid=16x32\nt_end=0.02\nsnapshot_every=5\n")
        out = tmp_path / "run"
        code = run_cli("simulate", "--config", str(cfg), "--t-end", "0.01",
                       "--out", str(out))
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["t_end"] == 0.01     # flag beats config file
        assert manifest["config"]["snapshot_every"] == 5


class TestCliVerify:
    def test_clean_suite_exit_zero(self, tmp_path):
        rep = tmp_path / "r.csv"
        assert run_cli("verify", "--suite", "lemma31", "--samples", "500",
                       "--seed", "1", "--out", str(rep)) == 0
        assert rep.exists()

    def test_violations_exit_one(self, tmp_path):
        rep = tmp_path / "r.csv"
        code = run_cli("verify", "--suite", "reaction", "--c", "0.5", "--n", "4",
                       "--samples", "20000", "--out", str(rep))
        assert code == 1

    def test_unknown_suite_usage(self, tmp_path):
        assert run_cli("verify", "--suite", "wat") == 64

    def test_all_suites_in_one_report(self, tmp_path):
        rep = tmp_path / "all.csv"
        assert run_cli("verify", "--suite", "all", "--samples", "700",
                       "--seed", "2", "--out", str(rep)) == 0
        names = {line.split(",")[0].split("[")[0]
                 for line in rep.read_text().splitlines()[1:]}
        assert names == set(SUITES)


class TestCliReport:
    @pytest.fixture()
    def run_dir(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli("simulate", "--spec", "sphere", "--k", "2",
                       "--grid", "16x32", "--t-end", "0.17",
                       "--snapshot-every", "8", "--out", str(out))
        assert code == 0
        return out

    def test_classify_and_fit(self, run_dir):
        assert run_cli("report", "--in", str(run_dir), "--classify",
                       "--fit-area-decay") == 0
        kind, c, c2, sup, trend = (run_dir / "classify.csv").read_text() \
            .splitlines()[1].split(",")
        assert kind == "TypeI"
        assert abs(float(c2) - 1.0) <= 1e-2
        _, r, _ = (run_dir / "area_fit.csv").read_text().splitlines()[1].split(",")
        assert abs(float(r) - 1.0) <= 0.02

    def test_rescale_type2_outputs(self, run_dir):
        assert run_cli("report", "--in", str(run_dir), "--rescale", "type2") == 0
        sub = run_dir / "rescale_type2"
        assert (sub / "summary.csv").exists()
        rows = (sub / "summary.csv").read_text().splitlines()[1:]
        taus = [float(r.split(",")[0]) for r in rows]
        max_h_at_0 = [float(r.split(",")[1]) for r in rows if abs(float(r.split(",")[0])) < 1e-12]
        assert len(max_h_at_0) == 1
        assert abs(max_h_at_0[0] - 1.0) <= 1e-10

    def test_missing_directory_is_data_error(self, tmp_path):
        assert run_cli("report", "--in", str(tmp_path / "absent"), "--classify") == 65

    def test_ancient_run_and_type1_rescale(self, tmp_path):
        out = tmp_path / "anc"
        code = run_cli("simulate", "--spec", "sphere", "--grid", "16x32",
                       "--mode", "ancient", "--t0", "-0.25", "--t-end", "-0.12",
                       "--snapshot-every", "2", "--out", str(out))
        assert code == 0
        assert run_cli("report", "--in", str(out), "--rescale", "type1",
                       "--tj", "-0.124") == 0
        rows = (out / "rescale_type1" / "summary.csv").read_text().splitlines()[1:]
        # rescaled sphere trajectory: |H| = n / sqrt(-2 n tau) = 1/sqrt(-tau)
        for row in rows:
            tau, max_h, _ = row.split(",")
            expect = (-float(tau)) ** -0.5
            assert abs(float(max_h) / expect - 1.0) <= 1e-2

    def test_corrupt_snapshot_is_data_error(self, run_dir):
        snaps = sorted(f for f in os.listdir(run_dir) if f.startswith("snap_"))
        (run_dir / snaps[0]).write_text("MCFLOW v1 garbage\n")
        assert run_cli("report", "--in", str(run_dir), "--classify") == 65


class TestDeterminism:
    def test_verify_reports_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("verify", "--suite", "reaction", "--samples", "5000",
                "--seed", "42", "--out", str(a), "--threads", "1")
        run_cli("verify", "--suite", "reaction", "--samples", "5000",
                "--seed", "42", "--out", str(b), "--threads", "8")
        assert a.read_bytes() == b.read_bytes()

    def test_simulate_csv_byte_identical(self, tmp_path):
        outs = []
        for threads, name in ((1, "t1"), (8, "t8")):
            out = tmp_path / name
            run_cli("simulate", "--spec", "sphere", "--grid", "16x32",
                    "--t-end", "0.03", "--threads", str(threads),
                    "--out", str(out))
            outs.append((out / "diagnostics.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_entry_point_subprocess(self, tmp_path):
        # the installed console script path works end to end
        res = subprocess.run(
            [sys.executable, "-m", "mcflow.cli", "verify", "--suite", "lemma31",
             "--samples", "200", "--out", str(tmp_path / "r.csv")],
            capture_output=True, text=True)
        assert res.returncode == 0
        assert "violations=0" in res.stdout
