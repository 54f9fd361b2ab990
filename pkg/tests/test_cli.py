import json
import os
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from pointtilt import Constant, ExactAffine, InvariantError, SchemaError
from pointtilt.cli import main, run_subcommand
from pointtilt.config import parse_config, serialize_config

MINIMAL = """
lambda: {type: constant, rates: [1.0]}
mu: {type: constant, rates: [2.0]}
horizon: 1.0
n_paths: 10000
seed: 42
"""

AFFINE = """
lambda: {type: constant, rates: [1.0]}
mu: {type: exact_affine, alpha: 0.5, beta: 0.3}
horizon: 1.0
n_paths: 3000
seed: 42
"""


class TestParseConfig:
    def test_minimal_valid(self):
        cfg = parse_config(MINIMAL)
        assert cfg.lambda_spec == Constant((1.0,))
        assert cfg.mu_spec == Constant((2.0,))
        assert cfg.horizon == 1.0
        assert cfg.n_paths == 10_000
        assert cfg.master_seed == 42

    def test_reset_ou_zero_b_field_path(self):
        doc = """
mu:
  type: reset_ou
  xi: {family: constant, c: 1.0}
  a: {family: constant, c: 0.0}
  b: {family: constant, c: 0.0}
  sigma: 1.0
horizon: 1.0
n_paths: 100
seed: 1
"""
        with pytest.raises(InvariantError) as err:
            parse_config(doc)
        assert err.value.field_path == "mu.resetou.b"

    def test_window_order_enforced(self):
        doc = MINIMAL + "window: [0.5, 0.2]\n"
        with pytest.raises(InvariantError) as err:
            parse_config(doc)
        assert err.value.field_path == "window"

    def test_unknown_key(self):
        with pytest.raises(SchemaError):
            parse_config(MINIMAL + "bogus: 1\n")

    def test_missing_required(self):
        with pytest.raises(SchemaError) as err:
            parse_config("mu: {type: constant, rates: [1.0]}\nn_paths: 10\nseed: 1\n")
        assert "horizon" in str(err.value)

    def test_bad_intensity_type(self):
        doc = MINIMAL.replace("constant, rates: [2.0]", "warp, rates: [2.0]")
        with pytest.raises(SchemaError) as err:
            parse_config(doc)
        assert err.value.field_path == "mu.type"

    def test_dimension_mismatch(self):
        doc = """
lambda: {type: constant, rates: [1.0, 1.0]}
mu: {type: constant, rates: [2.0]}
horizon: 1.0
n_paths: 10
seed: 1
"""
        with pytest.raises(InvariantError):
            parse_config(doc)

    def test_lambda_defaults_to_unit(self):
        doc = """
mu: {type: exact_affine, alpha: 0.5, beta: 0.3, dimension: 2}
horizon: 1.0
n_paths: 10
seed: 1
"""
        cfg = parse_config(doc)
        assert cfg.lambda_spec == Constant((1.0, 1.0))

    def test_round_trip(self):
        doc = """
lambda: {type: constant, rates: [1.0]}
mu:
  type: hawkes
  phi: [abs]
  kernels: [[{kind: exponential, amplitude: 0.5, decay: 1.0}]]
horizon: 2.0
window: [0.0, 1.5]
n_paths: 500
seed: 7
event_cap: 300
quadrature_step: 0.005
options: {estimator: count_marginal}
output: out/here
"""
        cfg = parse_config(doc)
        again = parse_config(serialize_config(cfg))
        assert again == cfg

    @pytest.mark.parametrize("spec_yaml", [
        "{type: piecewise_birth, alphas: {family: geometric, c: 1.0, r: 2.0}}",
        "{type: affine_count, alpha: 1.0, beta: 0.5, dimension: 2}",
        ("{type: reset_ou, xi: {family: constant, c: 1.0}, a: {family: constant, c: 0.0},"
         " b: {family: constant, c: -1.0}, sigma: 0.5}"),
        ("{type: linear_sde, drift: {kind: constant, values: [0.0]},"
         " reversion: {kind: constant, rows: [[-1.0]]},"
         " noise: {kind: constant, rows: [[1.0]]}, link: abs, x0: [1.0]}"),
    ])
    def test_round_trip_all_families(self, spec_yaml):
        doc = f"mu: {spec_yaml}\nhorizon: 1.0\nn_paths: 10\nseed: 1\n"
        cfg = parse_config(doc)
        assert parse_config(serialize_config(cfg)) == cfg


class TestSubcommands:
    def _run(self, tmp_path, name, doc, sub="out"):
        cfg_file = tmp_path / "cfg.yaml"
        cfg_file.write_text(doc)
        out = tmp_path / sub
        code = main([name, str(cfg_file), "--out", str(out), "--no-plots"])
        return code, out

    def test_simulate_zero_rate_empty_csv(self, tmp_path):
        doc = "mu: {type: constant, rates: [0.0]}\nhorizon: 1.0\nn_paths: 50\nseed: 1\n"
        code, out = self._run(tmp_path, "simulate", doc)
        assert code == 0
        assert (out / "events.csv").read_text() == "path_id,coordinate,time\n"

    def test_weight_outputs(self, tmp_path):
        code, out = self._run(tmp_path, "weight", AFFINE)
        assert code == 0
        weights = (out / "weights.csv").read_text().splitlines()
        assert weights[0] == "path_id,log_weight,hit_zero,quad_err"
        assert len(weights) == 3001
        events = (out / "events.csv").read_text().splitlines()
        assert events[0] == "path_id,coordinate,time"
        assert (out / "manifest.json").exists()

    def test_verify_martingale_passes(self, tmp_path):
        code, _ = self._run(tmp_path, "verify-martingale", AFFINE)
        assert code == 0

    def test_explosion_convergent_exits_two(self, tmp_path):
        doc = ("mu: {type: piecewise_birth, alphas: {family: geometric, c: 1.0, r: 2.0}}\n"
               "horizon: 5.0\nn_paths: 3000\nseed: 42\nevent_cap: 200\n")
        code, out = self._run(tmp_path, "explosion", doc)
        assert code == 2
        summary = yaml.safe_load((out / "summary.yaml").read_text())
        assert summary["aggregates"]["series_verdict"] == "convergent"
        assert summary["aggregates"]["explosion_mass"] > 0

    def test_explosion_divergent_exits_zero(self, tmp_path):
        doc = ("mu: {type: piecewise_birth, alphas: {family: constant, c: 1.0}}\n"
               "horizon: 5.0\nn_paths: 3000\nseed: 42\nevent_cap: 200\n")
        code, _ = self._run(tmp_path, "explosion", doc)
        assert code == 0

    def test_check_affine_passes(self, tmp_path):
        doc = AFFINE + "options: {window_eps: 0.25}\n"
        code, out = self._run(tmp_path, "check", doc)
        assert code == 0
        summary = yaml.safe_load((out / "summary.yaml").read_text())
        ids = {c["criterion_id"] for c in summary["checks"]}
        assert {"C25", "C26", "PHI_35", "BOUND_36"} <= ids
        assert summary["all_windows_passed"]

    def test_importance_sample_mean_count(self, tmp_path):
        doc = AFFINE + "options: {estimator: mean_count}\n"
        code, out = self._run(tmp_path, "importance-sample", doc)
        assert code == 0
        summary = yaml.safe_load((out / "summary.yaml").read_text())
        assert summary["aggregates"]["statistic"] == "mean_count"

    def test_importance_sample_cross_proposal(self, tmp_path):
        doc = """
mu:
  type: reset_ou
  xi: {family: constant, c: 1.0}
  a: {family: constant, c: 0.0}
  b: {family: constant, c: -1.0}
  sigma: 0.5
horizon: 1.0
n_paths: 4000
seed: 11
options: {base_rates: [1.0, 2.0]}
"""
        code, out = self._run(tmp_path, "importance-sample", doc)
        assert code == 0
        summary = yaml.safe_load((out / "summary.yaml").read_text())
        assert summary["aggregates"]["statistic"] == "cross_proposal"
        assert summary["aggregates"]["agree"]

    def test_oracles_pass(self, tmp_path):
        doc = ("horizon: 1.0\nlambda: {type: constant, rates: [1.0]}\n"
               "n_paths: 40000\nseed: 12\n"
               "options: {gaussian: {n_samples: 40000}, ou: {n_samples: 40000, modes: [exact]}}\n")
        code, out = self._run(tmp_path, "oracles", doc)
        assert code == 0
        summary = yaml.safe_load((out / "summary.yaml").read_text())
        assert len(summary["oracles"]) >= 10

    def test_error_exit_one(self, tmp_path):
        cfg_file = tmp_path / "bad.yaml"
        cfg_file.write_text("horizon: 1.0\nn_paths: 10\nseed: 1\n")  # no lambda, no mu
        code = main(["simulate", str(cfg_file), "--out", str(tmp_path / "x")])
        assert code == 1

    def test_usage_error_exit_one(self, capsys):
        assert main(["no-such-command", "cfg.yaml"]) == 1
        capsys.readouterr()

    def test_missing_config_file_exit_one(self, tmp_path):
        assert main(["simulate", str(tmp_path / "absent.yaml")]) == 1

    def test_seed_override_changes_data(self, tmp_path):
        cfg_file = tmp_path / "cfg.yaml"
        cfg_file.write_text(AFFINE)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["weight", str(cfg_file), "--out", str(out1), "--no-plots"]) == 0
        assert main(["weight", str(cfg_file), "--out", str(out2), "--no-plots",
                     "--seed", "77"]) == 0
        assert (out1 / "events.csv").read_text() != (out2 / "events.csv").read_text()


class TestReproducibility:
    def test_byte_identical_runs_and_workers(self, tmp_path):
        cfg_file = tmp_path / "cfg.yaml"
        cfg_file.write_text(AFFINE)
        outs = []
        for name, threads in (("r1", None), ("r2", None), ("r4", "4")):
            out = tmp_path / name
            env = dict(os.environ)
            if threads:
                env["POINTTILT_THREADS"] = threads
            else:
                env.pop("POINTTILT_THREADS", None)
            proc = subprocess.run(
                [sys.executable, "-m", "pointtilt.cli", "weight", str(cfg_file),
                 "--out", str(out), "--no-plots"],
                env=env, capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            outs.append(out)
        ref_events = (outs[0] / "events.csv").read_bytes()
        ref_weights = (outs[0] / "weights.csv").read_bytes()
        for out in outs[1:]:
            assert (out / "events.csv").read_bytes() == ref_events
            assert (out / "weights.csv").read_bytes() == ref_weights

    def test_events_csv_precision(self, tmp_path):
        cfg_file = tmp_path / "cfg.yaml"
        cfg_file.write_text(MINIMAL.replace("10000", "200"))
        out = tmp_path / "p"
        assert main(["simulate", str(cfg_file), "--out", str(out), "--no-plots"]) == 0
        lines = (out / "events.csv").read_text().splitlines()[1:]
        assert lines, "expected events"
        for line in lines[:50]:
            t = line.split(",")[2]
            assert len(t.replace(".", "").replace("-", "").lstrip("0")) <= 15


class TestFigures:
    def test_plots_written_when_enabled(self, tmp_path):
        cfg_file = tmp_path / "cfg.yaml"
        cfg_file.write_text(AFFINE.replace("3000", "500"))
        out = tmp_path / "figs"
        assert main(["weight", str(cfg_file), "--out", str(out)]) == 0
        assert (out / "fig_weights.png").exists()
        assert (out / "fig_running_mean.png").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert any("fig_weights.png" in o for o in manifest["outputs"])

    def test_no_plots_flag(self, tmp_path):
        cfg_file = tmp_path / "cfg.yaml"
        cfg_file.write_text(AFFINE.replace("3000", "500"))
        out = tmp_path / "nofigs"
        assert main(["weight", str(cfg_file), "--out", str(out), "--no-plots"]) == 0
        assert not list(out.glob("*.png"))
