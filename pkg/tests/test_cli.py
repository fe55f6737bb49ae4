"""Experiment runner and command-line surface: configs, outputs, exit codes."""

import json

import pytest

from nminus.cli import main
from nminus.experiments import ExperimentConfig, run


class TestConfigValidation:
    def test_unknown_top_level_field(self):
        res = run({"experiment": "count-lattice", "bogus": 1})
        assert res.exit_code == 2
        assert "bogus" in res.summary["error"]

    def test_unknown_limits_field(self):
        res = run({"experiment": "count-lattice", "limits": {"nope": 3}})
        assert res.exit_code == 2
        assert "nope" in res.summary["error"]

    def test_unknown_experiment(self):
        res = run({"experiment": "fly-to-the-moon"})
        assert res.exit_code == 2

    def test_unknown_family(self):
        res = run({"experiment": "count-lattice", "potential": {"kind": "martian"}})
        assert res.exit_code == 2

    def test_negative_alpha_rejected(self):
        res = run({"experiment": "count-lattice", "alphas": [-1.0]})
        assert res.exit_code == 2

    def test_wrong_layer_potential(self):
        res = run(
            {"experiment": "count-lattice", "potential": {"kind": "radial-indicator"}}
        )
        assert res.exit_code == 2

    def test_layer_precondition_maps_to_exit_two(self):
        # zero coupling is a precondition failure for the decoupling check
        res = run({"experiment": "verify-decoupling", "alphas": [0.0], "suite": {"count": 1}})
        assert res.exit_code == 2
        # support escaping the configured plane box is an input error
        res = run(
            {
                "experiment": "count-continuum",
                "potential": {"kind": "radial-indicator", "params": {"radius": 40.0}},
                "alphas": [10.0],
                "limits": {"fem_box": 4},
            }
        )
        assert res.exit_code == 2


class TestOutputs:
    def test_csv_and_json_written(self, tmp_path):
        res = run(
            {
                "experiment": "count-lattice",
                "alphas": [10.0],
                "out": str(tmp_path),
                "timestamp": False,
            }
        )
        assert res.exit_code == 0
        csv_text = (tmp_path / "count-lattice.csv").read_text()
        assert csv_text.splitlines()[0].startswith("family,")
        summary = json.loads((tmp_path / "count-lattice_summary.json").read_text())
        assert summary["experiment"] == "count-lattice"

    def test_nonpositive_count_column_via_shift_tolerance(self):
        res = run(
            {
                "experiment": "count-lattice",
                "alphas": [10.0],
                "potential": {"kind": "single-site", "params": {"value": 1.0}},
                "tolerances": {"shift_eps": 1e-9},
            }
        )
        assert res.exit_code == 0
        final = [r for r in res.rows if "count_nonpositive" in r]
        assert final and all(
            r["count_nonpositive"] >= r["count"] for r in final
        )  # counting at a positive shift can only add eigenvalues

    def test_reproducible_bytes(self, tmp_path):
        cfg = {
            "experiment": "alpha-scan",
            "alphas": [1.0, 4.0, 16.0],
            "potential": {"kind": "random-box", "params": {"half_width": 4, "count": 3}, "seed": 5},
            "timestamp": False,
            "seed": 5,
        }
        a = run(dict(cfg, out=str(tmp_path / "a")))
        b = run(dict(cfg, out=str(tmp_path / "b")))
        assert a.exit_code == b.exit_code == 0
        assert (tmp_path / "a" / "alpha-scan.csv").read_bytes() == (
            tmp_path / "b" / "alpha-scan.csv"
        ).read_bytes()

    def test_timestamp_header_toggle(self, tmp_path):
        cfg = {"experiment": "count-lattice", "alphas": [10.0]}
        run(dict(cfg, out=str(tmp_path / "ts"), timestamp=True))
        run(dict(cfg, out=str(tmp_path / "nots"), timestamp=False))
        with_ts = (tmp_path / "ts" / "count-lattice.csv").read_text()
        without = (tmp_path / "nots" / "count-lattice.csv").read_text()
        assert with_ts.startswith("# generated")
        assert not without.startswith("#")


class TestAlphaScan:
    def test_single_site_trend(self):
        res = run(
            {
                "experiment": "alpha-scan",
                "alphas": [1.0, 2.0, 4.0, 8.0, 16.0],
                "potential": {"kind": "single-site", "params": {"value": 10.0}},
            }
        )
        assert res.exit_code == 0
        counts = [r["count"] for r in res.rows]
        assert all(c == 1 for c in counts)  # converged count is identically 1
        ratios = [r["count_over_alpha"] for r in res.rows]
        assert ratios == sorted(ratios, reverse=True)

    def test_rank_bound_asserted(self):
        res = run(
            {
                "experiment": "alpha-scan",
                "alphas": [4.0, 64.0, 1024.0, 10000.0],
                "potential": {
                    "kind": "random-box",
                    "params": {"half_width": 3, "count": 5},
                    "seed": 2,
                },
            }
        )
        assert res.exit_code == 0
        assert all(r["count"] <= r["rank_bound"] == 5 for r in res.rows)

    def test_empty_alpha_grid(self):
        res = run({"experiment": "alpha-scan", "alphas": []})
        assert res.exit_code == 0
        assert res.rows == []


class TestEmptyPotential:
    def test_all_zero_exit_zero(self):
        res = run(
            {
                "experiment": "bounds",
                "potential": {"kind": "single-site", "params": {"value": 0.0}},
                "alphas": [4.0],
            }
        )
        assert res.exit_code == 0
        assert all(row["value"] == 0 for row in res.rows)


class TestCliEntry:
    def test_cli_runs_and_writes(self, tmp_path, capsys):
        code = main(
            [
                "count-lattice",
                "--alpha",
                "10",
                "--out",
                str(tmp_path),
                "--no-timestamp",
                "--seed",
                "0",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert json.loads(out)["experiment"] == "count-lattice"
        assert (tmp_path / "count-lattice.csv").exists()

    def test_cli_config_file(self, tmp_path, capsys):
        cfg = {"alphas": [10.0], "timestamp": False}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        code = main(["count-lattice", "--config", str(path)])
        assert code == 0

    def test_cli_bad_config_path(self, capsys):
        assert main(["count-lattice", "--config", "/does/not/exist.json"]) == 2

    def test_cli_invalid_field(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"whatever": 1}))
        code = main(["count-lattice", "--config", str(path)])
        assert code == 2
        assert "whatever" in capsys.readouterr().err

    def test_jobs_flag_same_answer(self):
        cfg = {
            "experiment": "verify-decoupling",
            "suite": {"count": 2},
            "seed": 0,
        }
        r1 = run(dict(cfg, jobs=1))
        r2 = run(dict(cfg, jobs=3))
        assert r1.exit_code == r2.exit_code == 0
        assert r1.rows == r2.rows


class TestConfigDataclass:
    def test_from_dict_roundtrip(self):
        cfg = ExperimentConfig.from_dict(
            {"experiment": "verify-mv", "alphas": [1, 2], "seed": 3, "jobs": 2}
        )
        assert cfg.experiment == "verify-mv"
        assert cfg.alphas == (1.0, 2.0)
        assert cfg.limit("lattice_box", 64) == 64
