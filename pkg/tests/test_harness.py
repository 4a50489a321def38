"""Tests for scenarios, presets, the Monte Carlo driver, output files, and the CLI."""

import json
import subprocess
import sys

import numpy as np
import pytest

from fbmclab.analysis import Case, LinkParams
from fbmclab.core import InvalidParameterError, RngStream, complex_normal
from fbmclab.harness import (
    CSV_COLUMNS,
    ResultRow,
    Scenario,
    analytic_sinr,
    emit,
    preset,
    preset_names,
    read_rows,
    run_scenario,
)


def _small(preset_name="fig2a", **overrides):
    doc = json.loads(preset(preset_name).to_json())
    doc.update(overrides)
    return Scenario.from_dict(doc)


class TestPresets:
    def test_preset_names_cover_experiments(self):
        names = preset_names()
        for expected in ("fig2a", "fig2b", "fig3a", "fig3b", "fig5a", "fig6a", "fig9b"):
            assert expected in names

    def test_fig2a_large_scale_profile(self):
        s = preset("fig2a")
        assert s.beta[0] == pytest.approx(0.749)
        assert s.num_subcarriers == 128 and s.num_users == 8 and s.num_pilots == 8
        assert s.num_taps == 6 and s.noise_var == 1.0 and s.coherence_symbols == 196

    def test_fig9b_settings(self):
        s = preset("fig9b")
        assert s.power_db == -5.0
        assert s.num_antennas == 64 and s.num_users == 8 and s.num_taps == 2
        assert s.modulation == "bpsk" and s.receivers == ("zf",)
        assert s.sweep == "cfo"

    def test_fig3a_scaling_schedules(self):
        s = preset("fig3a")
        assert set(s.scalings) == {"inv_sqrt_n", "inv_n"}
        assert s.ref_power_db == 5.0

    def test_unknown_preset(self):
        with pytest.raises(InvalidParameterError, match="unknown preset"):
            preset("fig99")


class TestScenarioValidation:
    def test_empty_grid(self):
        with pytest.raises(InvalidParameterError, match="empty"):
            _small(sweep_values=[])

    def test_unsorted_grid(self):
        with pytest.raises(InvalidParameterError, match="sorted"):
            _small(sweep_values=[64, 16])

    def test_minimum_trials(self):
        with pytest.raises(InvalidParameterError, match="100 trials"):
            _small(trials=10)

    def test_unknown_field(self):
        with pytest.raises(InvalidParameterError, match="unknown scenario fields"):
            Scenario.from_dict({"name": "x", "bogus": 1})

    def test_unknown_receiver(self):
        with pytest.raises(InvalidParameterError, match="receiver"):
            _small(receivers=["dfe"])

    def test_json_round_trip(self):
        s = preset("fig3a")
        back = Scenario.from_dict(json.loads(s.to_json()))
        assert back == s


@pytest.fixture(scope="module")
def small_rows():
    s = _small(trials=120, sweep_values=[16, 32], receivers=["mrc", "zf"])
    return s, run_scenario(s, threads=1)


class TestRunScenario:

    def test_row_schema(self, small_rows):
        s, rows = small_rows
        assert len(rows) == 2 * 2 * 2  # points x receivers x csi
        for r in rows:
            assert r.rate_sim is not None and r.rate_ci95 is not None
            assert r.rate_lb is not None  # mrc and zf both have bounds
            assert r.mode == "analytic" and r.seed == s.seed

    def test_rerun_identical(self, small_rows):
        s, rows = small_rows
        assert run_scenario(s, threads=1) == rows

    def test_thread_count_invariance(self, small_rows):
        s, rows = small_rows
        assert run_scenario(s, threads=4) == rows

    def test_seed_changes_results(self, small_rows):
        s, rows = small_rows
        s2 = _small(trials=120, sweep_values=[16, 32], receivers=["mrc", "zf"], seed=1)
        rows2 = run_scenario(s2)
        assert rows2 != rows

    def test_closed_form_only_beyond_sim_limit(self):
        s = _small(
            trials=100,
            sweep_values=[16, 2048],
            receivers=["zf"],
            csi=["perfect"],
            sim_max_antennas=1024,
        )
        rows = run_scenario(s)
        by_n = {r.sweep_value: r for r in rows}
        assert by_n[16.0].rate_sim is not None
        assert by_n[2048.0].rate_sim is None
        assert by_n[2048.0].rate_lb is not None

    def test_scaling_groups_emit_asymptotes(self):
        s = _small(
            name="scaling-check",
            trials=100,
            sweep_values=[16, 64],
            receivers=["zf"],
            scalings=["inv_sqrt_n", "inv_n"],
            ref_power_db=5.0,
        )
        rows = run_scenario(s)
        labels = {r.sweep_var for r in rows}
        assert labels == {"antennas[E/sqrtN]", "antennas[E/N]"}
        for r in rows:
            if r.sweep_var == "antennas[E/N]" and r.csi == "perfect":
                assert r.asymptote is not None
            if r.sweep_var == "antennas[E/sqrtN]" and r.csi == "perfect":
                assert r.asymptote is None  # unbounded growth has no stated limit


@pytest.fixture(scope="module")
def rows():
    s = _small(trials=100, sweep_values=[16], receivers=["mrc"], csi=["perfect"])
    return s, run_scenario(s)


class TestEmit:

    def test_csv_round_trip(self, rows, tmp_path):
        s, rr = rows
        path = tmp_path / "out.csv"
        emit(rr, path, "csv", scenario=s)
        doc, back = read_rows(path)
        assert back == rr
        assert doc["name"] == s.name

    def test_csv_schema_order(self, rows, tmp_path):
        s, rr = rows
        path = tmp_path / "out.csv"
        emit(rr, path, "csv", scenario=s)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# scenario: ")
        assert lines[1] == ",".join(CSV_COLUMNS)

    def test_plotdata_columns(self, rows, tmp_path):
        s, rr = rows
        written = emit(rr, tmp_path / "out.csv", "plotdata", scenario=s)
        assert len(written) == 1  # one file per (receiver, csi) curve
        lines = open(written[0]).read().splitlines()
        data = [l for l in lines if not l.startswith("#")]
        assert all(len(l.split()) == 5 for l in data)  # sweep value + 4 per-curve columns

    def test_empty_rows_rejected(self, tmp_path):
        with pytest.raises(InvalidParameterError):
            emit([], tmp_path / "x.csv")

    def test_no_nan_tokens_in_csv(self, rows, tmp_path):
        s, rr = rows
        path = tmp_path / "out.csv"
        emit(rr, path, "csv", scenario=s)
        assert "nan" not in path.read_text().lower()


class TestAnalyticWaveformEquivalence:
    def test_fbmc_and_ofdm_models_coincide(self):
        """In analytic mode the per-draw SINR is waveform independent (<= 1e-12)."""
        rng = RngStream(1, 0).generator()
        p = LinkParams(32, 4, 4, 10.0, beta=np.ones(4))
        G = complex_normal(rng, (32, 4), 1.0)
        for rcv in ("mrc", "zf", "mmse"):
            case = Case("single", rcv, "perfect")
            a = analytic_sinr(case, p, "fbmc", channel=G)
            b = analytic_sinr(case, p, "ofdm", channel=G)
            assert np.max(np.abs(a - b)) <= 1e-12


class TestCli:
    def _run(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "fbmclab", *args], capture_output=True, text=True
        )

    def test_list_presets(self):
        res = self._run("--list-presets")
        assert res.returncode == 0
        assert "fig2a" in res.stdout

    def test_dump_config(self):
        res = self._run("--preset", "fig2a", "--dump-config")
        assert res.returncode == 0
        doc = json.loads(res.stdout)
        assert doc["name"] == "fig2a"

    def test_run_small_config(self, tmp_path):
        doc = json.loads(preset("fig2a").to_json())
        doc.update(
            {"trials": 100, "sweep_values": [16], "receivers": ["zf"], "csi": ["perfect"]}
        )
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(doc))
        res = self._run("--config", str(cfg), "--out", str(tmp_path / "res"))
        assert res.returncode == 0, res.stderr
        out = res.stdout.strip().splitlines()[-1]
        _, rows = read_rows(out)
        assert rows[0].rate_sim is not None

    def test_invalid_config_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"name": "bad", "trials": 5}))
        res = self._run("--config", str(cfg))
        assert res.returncode == 2
        assert "invalid scenario" in res.stderr

    def test_unknown_preset_exit_code(self):
        res = self._run("--preset", "nope")
        assert res.returncode == 2

    def test_missing_config_file_exit_code(self):
        res = self._run("--config", "/nonexistent/file.json")
        assert res.returncode == 4
