"""Config validation, run orchestration, report files, and the CLI."""

import json

import numpy as np
import pytest

from adsdirac.channel import BoundaryCondition
from adsdirac.cli import _thread_count, build_parser, main
from adsdirac.geometry import Regime
from adsdirac.harness import (
    EXPERIMENTS,
    ConfigError,
    ExperimentResult,
    parse_config,
    parse_config_dict,
    run,
)

MINIMAL = {"M": 1, "l": 1, "m": 1, "channel": [0.5, 0.5]}


def small_config(**extra):
    """A config whose experiments finish in well under a second."""
    data = dict(MINIMAL)
    data.update(
        {
            "grid": {"x_min": -16.0, "n": 64},
            "evolution": {"t_final": 1.0, "snapshots": 2},
        }
    )
    data.update(extra)
    return parse_config_dict(data)


class TestConfigValidation:

    def test_minimal_is_valid(self):
        cfg = parse_config_dict(MINIMAL)
        assert cfg.params.regime == Regime.SUPERCRITICAL
        assert cfg.bc == BoundaryCondition.NATURAL
        assert cfg.channel.coupling == 1.0
        assert cfg.experiments == EXPERIMENTS

    def test_subcritical_selects_bag_rows(self):
        cfg = parse_config_dict({**MINIMAL, "m": 0.25})
        assert cfg.params.regime == Regime.SUBCRITICAL
        assert cfg.bc == BoundaryCondition.MIT

    def test_index_rule_rejects_bad_channel(self):
        with pytest.raises(ConfigError, match="channel"):
            parse_config_dict({**MINIMAL, "channel": [0.5, 1.5]})

    def test_bc_contradiction(self):
        with pytest.raises(ConfigError, match="contradicts"):
            parse_config_dict({**MINIMAL, "bc": "mit"})

    def test_bc_matching_regime_accepted(self):
        cfg = parse_config_dict({**MINIMAL, "bc": "natural"})
        assert cfg.bc == BoundaryCondition.NATURAL

    def test_errors_aggregate(self):
        with pytest.raises(ConfigError) as err:
            parse_config_dict(
                {
                    "M": 1,
                    "l": 1,
                    "m": -2,
                    "channel": [0.5],
                    "typo": 1,
                    "grid": {"x_min": 3.0},
                }
            )
        messages = err.value.errors
        assert len(messages) >= 4
        assert any("typo" in msg for msg in messages)
        assert any("x_min" in msg for msg in messages)

    def test_missing_required_keys(self):
        with pytest.raises(ConfigError, match="missing required key"):
            parse_config_dict({"M": 1})

    @pytest.mark.parametrize(
        "grid",
        [
            {"x_min": -10.0, "n": 64, "h_min": 0.01, "ratio": 1.1, "h_max": 0.1},
            {"x_min": -10.0, "h_min": 0.01, "ratio": 1.1},
            {"x_min": -10.0, "h_min": 0.1, "ratio": 0.9, "h_max": 0.2},
            {"x_min": -10.0, "n": 4},
            {"spacing": 0.1},
        ],
    )
    def test_bad_grid_blocks(self, grid):
        with pytest.raises(ConfigError, match="grid"):
            parse_config_dict({**MINIMAL, "grid": grid})

    def test_graded_grid_accepted(self):
        cfg = parse_config_dict(
            {**MINIMAL, "grid": {"x_min": -10.0, "h_min": 0.01, "ratio": 1.1, "h_max": 0.1}}
        )
        assert cfg.grid.n is None
        grid = cfg.grid.build()
        assert grid.resolves_wall_layer

    def test_bad_evolution_block(self):
        with pytest.raises(ConfigError, match="evolution"):
            parse_config_dict({**MINIMAL, "evolution": {"dt": -0.1, "steps": 3}})

    def test_unknown_experiment_name(self):
        with pytest.raises(ConfigError, match="resonance"):
            parse_config_dict({**MINIMAL, "experiments": ["geometry", "resonance"]})

    def test_experiment_selection_keeps_canonical_order(self):
        cfg = parse_config_dict({**MINIMAL, "experiments": ["mourre", "geometry"]})
        assert cfg.experiments == ("geometry", "mourre")

    def test_bool_is_not_a_number(self):
        with pytest.raises(ConfigError):
            parse_config_dict({**MINIMAL, "m": True})
        with pytest.raises(ConfigError, match="seed"):
            parse_config_dict({**MINIMAL, "seed": True})

    def test_option_whitelists(self):
        with pytest.raises(ConfigError, match="options"):
            parse_config_dict({**MINIMAL, "options": {"resonance": {}}})
        with pytest.raises(ConfigError, match="schedule_times"):
            parse_config_dict(
                {**MINIMAL, "options": {"scatter": {"schedule_times": [1, 2]}}}
            )

    def test_parse_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(MINIMAL))
        cfg = parse_config(path)
        assert cfg.params.two_ml == 2.0

    def test_parse_config_rejects_bad_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            parse_config(path)


class TestDigest:

    def test_stable_across_equivalent_inputs(self):
        a = parse_config_dict(MINIMAL)
        b = parse_config_dict({**MINIMAL, "experiments": ["all"]})
        assert a.digest == b.digest

    def test_sensitive_to_physics(self):
        a = parse_config_dict(MINIMAL)
        b = parse_config_dict({**MINIMAL, "m": 0.25})
        assert a.digest != b.digest

    def test_canonical_fills_defaults(self):
        cfg = parse_config_dict(MINIMAL)
        assert cfg.canonical["grid"] == {"x_min": -32.0, "n": 2048}
        assert cfg.canonical["evolution"]["t_final"] == 10.0
        assert cfg.canonical["seed"] == 0


class TestRun:

    def test_geometry_only_writes_one_csv_one_json(self, tmp_path):
        cfg = small_config()
        manifest = run(cfg, experiments=["geometry"], out=str(tmp_path), echo=False)
        assert manifest.all_passed
        assert [r.name for r in manifest.results] == ["geometry"]
        assert sorted(p.name for p in tmp_path.iterdir()) == [
            "geometry.json",
            "geometry_map.csv",
            "manifest.json",
        ]

    def test_headers_carry_config_hash(self, tmp_path):
        cfg = small_config()
        run(cfg, experiments=["geometry"], out=str(tmp_path), echo=False)
        first = (tmp_path / "geometry_map.csv").read_text().splitlines()[0]
        assert first == f"# config {cfg.digest}"
        doc = json.loads((tmp_path / "geometry.json").read_text())
        assert doc["config"] == cfg.digest

    def test_identical_reruns_byte_identical(self, tmp_path):
        cfg = small_config()
        run(cfg, experiments=["geometry"], out=str(tmp_path / "a"), echo=False)
        run(cfg, experiments=["geometry"], out=str(tmp_path / "b"), echo=False)
        for name in ("geometry_map.csv", "geometry.json"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_module_error_aborts_only_that_experiment(self, tmp_path, monkeypatch):
        import adsdirac.harness as hn

        def boom(cfg, out_dir):
            raise RuntimeError("synthetic failure")

        monkeypatch.setitem(hn._RUNNERS, "evolve", boom)
        cfg = small_config()
        manifest = run(
            cfg, experiments=["geometry", "evolve"], out=str(tmp_path), echo=False
        )
        by_name = {r.name: r for r in manifest.results}
        assert by_name["geometry"].status == "pass"
        assert by_name["evolve"].status == "error"
        assert "synthetic failure" in by_name["evolve"].error
        assert not manifest.all_passed
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["experiments"]["evolve"]["status"] == "error"
        assert doc["all_passed"] is False

    def test_pool_collection_is_order_deterministic(self, tmp_path):
        cfg = small_config(
            options={"spectrum": {"n": 64, "lambdas": [0.0], "depth": 5.0}}
        )
        manifest = run(
            cfg,
            experiments=["spectrum", "geometry"],
            out=str(tmp_path),
            threads=2,
            echo=False,
        )
        assert [r.name for r in manifest.results] == ["geometry", "spectrum"]

    def test_empty_selection_rejected(self, tmp_path):
        cfg = small_config()
        with pytest.raises(Exception, match="no experiments"):
            run(cfg, experiments=["nothing"], out=str(tmp_path), echo=False)

    def test_verdict_lines_echoed(self, tmp_path, capsys):
        cfg = small_config()
        run(cfg, experiments=["geometry"], out=str(tmp_path))
        lines = capsys.readouterr().out.splitlines()
        assert any(line.startswith("[pass] geometry.horizon_root") for line in lines)
        assert lines[-1].startswith("all checks passed")


class TestCli:

    def write(self, tmp_path, data):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(data))
        return str(path)

    def test_geometry_exit_zero(self, tmp_path, capsys):
        path = self.write(tmp_path, MINIMAL)
        code = main(["geometry", "--config", path, "--out", str(tmp_path / "out")])
        assert code == 0
        assert "[pass] geometry.horizon_root" in capsys.readouterr().out

    def test_bad_config_exit_two(self, tmp_path, capsys):
        path = self.write(tmp_path, {**MINIMAL, "channel": [0.5, 1.5], "typo": 1})
        code = main(["geometry", "--config", path])
        assert code == 2
        err = capsys.readouterr().err
        assert "config rejected" in err
        assert "typo" in err

    def test_missing_config_exit_two(self, tmp_path, capsys):
        code = main(["geometry", "--config", str(tmp_path / "absent.json")])
        assert code == 2

    def test_failing_check_exit_one(self, tmp_path, capsys):
        # sub-cell grading cannot see the wall exponent; the fit misses
        # its target and the exit code must say so
        path = self.write(
            tmp_path,
            {**MINIMAL, "options": {"domain-exponent": {"h_min": 0.02}}},
        )
        code = main(
            ["domain-exponent", "--config", path, "--out", str(tmp_path / "out")]
        )
        assert code == 1
        assert "[FAIL]" in capsys.readouterr().out

    def test_dump_matrix(self, tmp_path, capsys):
        path = self.write(
            tmp_path, {**MINIMAL, "grid": {"x_min": -16.0, "n": 64}}
        )
        code = main(
            [
                "geometry",
                "--config",
                path,
                "--out",
                str(tmp_path / "out"),
                "--dump-matrix",
            ]
        )
        assert code == 0
        rows = (tmp_path / "out" / "matrix.csv").read_text().splitlines()
        assert rows[2] == "row,col,re,im"
        k, j, re, im = rows[3].split(",")
        assert (int(k), int(j)) == (0, 0)
        assert np.isfinite(float(re)) and np.isfinite(float(im))

    def test_thread_count_resolution(self, monkeypatch):
        monkeypatch.delenv("ADSDIRAC_THREADS", raising=False)
        assert _thread_count(None) == 1
        assert _thread_count(3) == 3
        monkeypatch.setenv("ADSDIRAC_THREADS", "4")
        assert _thread_count(None) == 4
        assert _thread_count(2) == 2
        monkeypatch.setenv("ADSDIRAC_THREADS", "many")
        assert _thread_count(None) == 1

    def test_parser_covers_all_experiments(self):
        parser = build_parser()
        for name in (*EXPERIMENTS, "all"):
            args = parser.parse_args([name, "--config", "x.json"])
            assert args.experiment == name

    def test_status_property(self):
        r = ExperimentResult("x")
        assert r.status == "pass"
        r.error = "boom"
        assert r.status == "error"
