"""Command-line runner: exit codes, outputs, determinism."""

import json
import math
from pathlib import Path

import pytest

from chaosavg.cli import main


def write(tmp_path: Path, name: str, payload: dict) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


BM_SMALL = {
    "model": "gaussian:scale=1",
    "d": 1,
    "series": {"2": 1.0},
    "radii": [8.0],
    "grid": {"half_extent": 10.0, "spacing": 0.25},
    "n_reps": 200,
    "master_seed": 99,
    "tolerances": {"var_rtol": 0.5, "ks_p_min": 0.001, "fourth_moment_window": [2.0, 4.5]},
}


class TestSpecialCheck:
    def test_default_config_passes(self, tmp_path):
        assert main(["special-check", "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "special_check.json").read_text())
        assert report["pass"] and len(report["checks"]) >= 6

    def test_unmeetable_tolerance_fails(self, tmp_path):
        cfg = write(tmp_path, "sc.json", {"tolerances": {"ell1_mass": 1e-15}})
        assert main(["special-check", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_malformed_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["special-check", "--config", str(bad), "--out", str(tmp_path)]) == 2

    def test_unknown_field_rejected(self, tmp_path):
        cfg = write(tmp_path, "sc.json", {"no_such_field": 1})
        assert main(["special-check", "--config", cfg, "--out", str(tmp_path)]) == 2


class TestBM:
    def test_small_run_passes(self, tmp_path):
        cfg = write(tmp_path, "bm.json", BM_SMALL)
        assert main(["bm", "--config", cfg, "--out", str(tmp_path)]) == 0
        verdict = json.loads((tmp_path / "bm_verdict.json").read_text())
        assert verdict["pass"]
        assert verdict["sigma2_theory"] == pytest.approx(4.0 * math.sqrt(math.pi / 2.0), rel=1e-9)
        rows = (tmp_path / "bm_rows.csv").read_text().splitlines()
        assert rows[0] == "group,replication,value,seed"
        assert len(rows) == 1 + 200

    def test_insufficient_reps_exit1(self, tmp_path):
        cfg = write(tmp_path, "bm.json", {**BM_SMALL, "n_reps": 10})
        assert main(["bm", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_non_square_integrable_rank2_exit2(self, tmp_path):
        cfg = write(tmp_path, "bm.json", {**BM_SMALL, "model": "riesz:beta=0.5"})
        assert main(["bm", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_byte_identical_across_threads(self, tmp_path):
        cfg = write(tmp_path, "bm.json", BM_SMALL)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["bm", "--config", cfg, "--out", str(out1), "--threads", "1"]) == 0
        assert main(["bm", "--config", cfg, "--out", str(out2), "--threads", "4"]) == 0
        assert (out1 / "bm_rows.csv").read_bytes() == (out2 / "bm_rows.csv").read_bytes()

    def test_seed_override_changes_rows(self, tmp_path):
        cfg = write(tmp_path, "bm.json", BM_SMALL)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["bm", "--config", cfg, "--out", str(out1)])
        main(["bm", "--config", cfg, "--out", str(out2), "--seed", "123"])
        assert (out1 / "bm_rows.csv").read_bytes() != (out2 / "bm_rows.csv").read_bytes()


class TestShe:
    def test_first_chaos_riesz_reference(self, tmp_path):
        cfg = write(tmp_path, "she.json", {
            "kind": "first-chaos", "d": 1,
            "gamma0": {"kind": "const", "value": 1.0},
            "gamma1": "riesz:beta=0.5",
            "times": [1.0], "radii": [10.0, 30.0, 100.0], "master_seed": 5,
        })
        assert main(["she", "--config", cfg, "--out", str(tmp_path)]) == 0
        verdict = json.loads((tmp_path / "she_verdict.json").read_text())
        assert verdict["pass"]
        seq = verdict["normalized_sequence"]
        assert seq[0] < seq[1] < seq[2]
        assert abs(seq[-1] / verdict["kappa_beta"] - 1.0) < 0.05

    def test_sigma_limit_symmetry(self, tmp_path):
        cfg = write(tmp_path, "she.json", {
            "kind": "sigma-limit", "d": 1,
            "gamma0": {"kind": "const", "value": 1.0},
            "gamma1": "gaussian:scale=1",
            "times": [0.5, 1.0], "bm_steps": 32, "n_paths": 4, "n_z": 250,
            "master_seed": 6,
        })
        assert main(["she", "--config", cfg, "--out", str(tmp_path)]) == 0
        rows = (tmp_path / "she_rows.csv").read_text().splitlines()
        assert rows[0] == "quantity,t,s,R,estimate,std_error,n,seed"

    def test_riesz_share(self, tmp_path):
        cfg = write(tmp_path, "she.json", {
            "kind": "riesz-share", "d": 1,
            "gamma0": {"kind": "const", "value": 1.0},
            "gamma1": "riesz:beta=0.5",
            "times": [1.0], "radii": [10.0, 100.0],
            "bm_steps": 32, "n_paths": 100, "n_z": 500, "master_seed": 7,
        })
        assert main(["she", "--config", cfg, "--out", str(tmp_path)]) == 0

    def test_beta_window_violation_exit2(self, tmp_path):
        cfg = write(tmp_path, "she.json", {
            "kind": "kappa-beta", "d": 1,
            "gamma0": {"kind": "const", "value": 1.0},
            "gamma1": "riesz:beta=1.5",
            "times": [1.0], "master_seed": 1,
        })
        assert main(["she", "--config", cfg, "--out", str(tmp_path)]) == 2


class TestTailBound:
    def test_gaussian_reference(self, tmp_path):
        cfg = write(tmp_path, "tb.json", {
            "model": "gaussian:scale=1", "d": 1, "t": 1.0, "N": 2.0,
            "gamma0": {"kind": "const", "value": 1.0}, "mode": "standard", "p_max": 4,
        })
        assert main(["tail-bound", "--config", cfg, "--out", str(tmp_path)]) == 0
        verdict = json.loads((tmp_path / "tail_bound.json").read_text())
        assert verdict["gate_ok"]
        assert verdict["per_p_bound"]["2"] > 0


class TestReport:
    def test_merge_and_figures(self, tmp_path):
        cfg = write(tmp_path, "bm.json", BM_SMALL)
        run_dir = tmp_path / "run"
        main(["bm", "--config", cfg, "--out", str(run_dir)])
        rep_dir = tmp_path / "rep"
        assert main(["report", str(run_dir / "bm_rows.csv"), "--out", str(rep_dir)]) == 0
        summary = json.loads((rep_dir / "summary.json").read_text())
        assert summary["groups"][0]["n"] == 200
        assert (rep_dir / "summary.csv").exists()
        figs = list(rep_dir.glob("fig_*.png"))
        assert figs, "report should render figures next to the delimited output"

    def test_no_figures_flag(self, tmp_path):
        cfg = write(tmp_path, "bm.json", BM_SMALL)
        run_dir = tmp_path / "run"
        main(["bm", "--config", cfg, "--out", str(run_dir)])
        rep_dir = tmp_path / "rep"
        assert main(["report", str(run_dir / "bm_rows.csv"), "--out", str(rep_dir),
                     "--no-figures"]) == 0
        assert not list(rep_dir.glob("fig_*.png"))


class TestReferenceConfigs:
    def test_shipped_configs_validate(self):
        import chaosavg.cli as cli

        repo = Path(__file__).resolve().parents[1] / "configs"
        mapping = {
            "bm_h2_gaussian.json": "bm",
            "she_riesz_first_chaos.json": "she",
            "she_riesz_share.json": "she",
            "she_sigma_limit.json": "she",
            "tail_bound_gaussian.json": "tail-bound",
            "special_check.json": "special-check",
        }
        for name, command in mapping.items():
            config = json.loads((repo / name).read_text())
            cli._validate_config(config, command)
