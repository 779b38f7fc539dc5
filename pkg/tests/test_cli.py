import json
import math

import numpy as np
import pytest

from pnrres import GAUSSIAN_FWHM_FACTOR
from pnrres.cli import main

REF_CONFIG = {
    "t0_ps": 0.0,
    "delta_mu_ps": 100.0,
    "tau_ps": 0.0,
    "jitter_ps": {"noise": 3.0, "inst": 4.0},
    "n_max": 6,
    "mean_photon": 1.5,
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(REF_CONFIG))
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestFwhmCommand:
    def test_gaussian_value_on_stdout(self, capsys):
        assert run("fwhm", "--sigma", 1, "--tau", 0) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["fwhm_ps"] == pytest.approx(2.35482, abs=1e-5)

    def test_emg_value_matches_grid_oracle(self, capsys):
        assert run("fwhm", "--sigma", 1, "--tau", 1) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["fwhm_ps"] == pytest.approx(2.8908903874173366, abs=1e-6)

    def test_negative_sigma_is_usage_error(self, capsys):
        assert run("fwhm", "--sigma", -1) == 2
        assert "sigma must be >= 0" in capsys.readouterr().err

    def test_csv_format_and_out_file(self, tmp_path, capsys):
        out = tmp_path / "w.csv"
        assert run("fwhm", "--sigma", 2, "--format", "csv",
                   "--output-dir", tmp_path, "--out", "w.csv") == 0
        header, values = out.read_text().strip().splitlines()
        row = dict(zip(header.split(","), map(float, values.split(","))))
        assert row["fwhm_ps"] == pytest.approx(2 * GAUSSIAN_FWHM_FACTOR, rel=1e-6)

    def test_missing_required_flag_exits_2(self):
        assert run("fwhm") == 2


class TestResolveCommand:
    def test_reference_config(self, config_path, tmp_path, capsys):
        out = tmp_path / "res"
        assert run("resolve", "--config", config_path, "--output-dir", out) == 0
        assert "n_resolvable_exact=2" in capsys.readouterr().out
        report = json.loads((out / "report.json").read_text())
        assert report["n_resolvable_exact"] == 2
        assert report["n_resolvable_gaussian"] == 2
        seps = (out / "fig2b_separation.csv").read_text().strip().splitlines()
        widths = (out / "fig2b_fwhm.csv").read_text().strip().splitlines()
        assert seps[0] == "n,separation_ps" and widths[0] == "n,fwhm_ps"
        assert len(seps) == len(widths) == 1 + REF_CONFIG["n_max"] - 1
        sep_values = [float(line.split(",")[1]) for line in seps[1:]]
        assert all(a > b for a, b in zip(sep_values, sep_values[1:]))
        density = (out / "fig2a_density.csv").read_text().strip().splitlines()
        assert density[0].startswith("t_ps,density_n1")
        markers = (out / "fig2a_fwhm.csv").read_text().strip().splitlines()
        assert len(markers) == 1 + REF_CONFIG["n_max"]

    def test_huge_separation_resolves_all(self, tmp_path, capsys):
        cfg = dict(REF_CONFIG, delta_mu_ps=1e7)
        path = tmp_path / "m.json"
        path.write_text(json.dumps(cfg))
        assert run("resolve", "--config", path, "--output-dir", tmp_path / "o") == 0
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["n_resolvable_exact"] == REF_CONFIG["n_max"] - 1

    def test_malformed_json_exits_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ nope")
        assert run("resolve", "--config", path, "--output-dir", tmp_path) == 2

    def test_missing_config_exits_2(self, tmp_path):
        assert run("resolve", "--config", tmp_path / "nothere.json",
                   "--output-dir", tmp_path) == 2

    def test_unknown_config_key_exits_2(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps(dict(REF_CONFIG, bogus=1)))
        assert run("resolve", "--config", path, "--output-dir", tmp_path) == 2


class TestSimulateCommand:
    def test_deterministic_bytes(self, config_path, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run("simulate", "--config", config_path, "--shots", 4000,
                       "--seed", 7, "--output-dir", d) == 0
        assert (a / "tags.csv").read_bytes() == (b / "tags.csv").read_bytes()

    def test_zero_shots_writes_header_only(self, config_path, tmp_path):
        assert run("simulate", "--config", config_path, "--shots", 0,
                   "--seed", 1, "--output-dir", tmp_path) == 0
        assert (tmp_path / "tags.csv").read_text() == "shot,true_n,arrival_ps\n"

    def test_seed_required(self, config_path, tmp_path):
        assert run("simulate", "--config", config_path, "--shots", 10,
                   "--output-dir", tmp_path) == 2

    def test_optional_histogram(self, config_path, tmp_path):
        assert run("simulate", "--config", config_path, "--shots", 5000, "--seed", 3,
                   "--output-dir", tmp_path, "--bin-width-ps", 2,
                   "--range-ps", 0, 160) == 0
        lines = (tmp_path / "histogram.csv").read_text().splitlines()
        assert lines[0].startswith("# bin_width_ps=2.0 ")
        assert len(lines) == 2 + 80

    def test_half_binning_flags_rejected(self, config_path, tmp_path):
        assert run("simulate", "--config", config_path, "--shots", 10, "--seed", 1,
                   "--output-dir", tmp_path, "--bin-width-ps", 2) == 2

    def test_escaping_output_dir_rejected(self, config_path, tmp_path):
        inner = tmp_path / "inner"
        inner.mkdir()
        assert run("simulate", "--config", config_path, "--shots", 10, "--seed", 1,
                   "--output-dir", inner, "--out", "../escape.csv") == 2
        assert not (tmp_path / "escape.csv").exists()


class TestFitCommand:
    def test_round_trip_via_files(self, config_path, tmp_path, capsys):
        work = tmp_path / "w"
        assert run("simulate", "--config", config_path, "--shots", 120_000,
                   "--seed", 11, "--output-dir", work) == 0
        start = tmp_path / "start.json"
        start.write_text(json.dumps(dict(REF_CONFIG, delta_mu_ps=110.0)))
        fitcfg = tmp_path / "fit.json"
        fitcfg.write_text(json.dumps({"free": ["delta_mu", "sigma_int"]}))
        assert run("fit", "--config", start, "--tags", work / "tags.csv",
                   "--bin-width-ps", 2, "--range-ps", 0, 160,
                   "--fit-config", fitcfg, "--output-dir", work) == 0
        result = json.loads((work / "fit.json").read_text())
        assert result["converged"] is True
        assert result["estimates"]["delta_mu"] == pytest.approx(100.0, rel=0.03)
        assert 0.5 < result["chi2_summary"]["chi2_per_dof"] < 2.0

    def test_fit_is_deterministic(self, config_path, tmp_path):
        work = tmp_path / "w"
        assert run("simulate", "--config", config_path, "--shots", 30_000,
                   "--seed", 5, "--output-dir", work) == 0
        outs = []
        for name in ("f1.json", "f2.json"):
            assert run("fit", "--config", config_path, "--tags", work / "tags.csv",
                       "--bin-width-ps", 2, "--range-ps", 0, 160,
                       "--output-dir", work, "--out", name) == 0
            outs.append((work / name).read_bytes())
        assert outs[0] == outs[1]

    def test_missing_tags_file_exits_2(self, config_path, tmp_path):
        assert run("fit", "--config", config_path, "--tags", tmp_path / "none.csv",
                   "--bin-width-ps", 2, "--range-ps", 0, 160,
                   "--output-dir", tmp_path) == 2

    def test_needs_exactly_one_input(self, config_path, tmp_path):
        assert run("fit", "--config", config_path, "--output-dir", tmp_path) == 2

    def test_histogram_input(self, config_path, tmp_path):
        work = tmp_path / "w"
        assert run("simulate", "--config", config_path, "--shots", 30_000, "--seed", 5,
                   "--output-dir", work, "--bin-width-ps", 2, "--range-ps", 0, 160) == 0
        assert run("fit", "--config", config_path, "--histogram", work / "histogram.csv",
                   "--output-dir", work, "--out", "hfit.json") == 0
        result = json.loads((work / "hfit.json").read_text())
        assert result["converged"] is True


class TestClassifyCommand:
    def test_outputs_and_rule_reuse(self, config_path, tmp_path):
        work = tmp_path / "w"
        assert run("simulate", "--config", config_path, "--shots", 40_000,
                   "--seed", 13, "--output-dir", work) == 0
        assert run("classify", "--config", config_path, "--tags", work / "tags.csv",
                   "--labels", 4, "--output-dir", work) == 0
        for name in ("rule.json", "labeled.csv", "confusion_analytic.json",
                     "confusion_empirical.json"):
            assert (work / name).exists()
        analytic = json.loads((work / "confusion_analytic.json").read_text())
        emp = json.loads((work / "confusion_empirical.json").read_text())
        a = np.array(analytic["probs"])
        e = np.array(emp["probs"])
        assert a.shape == e.shape == (4, 4)
        assert np.all(np.abs(np.diag(a) - np.diag(e)) < 0.05)
        # byte-determinism when reusing the emitted rule
        again = tmp_path / "again"
        assert run("classify", "--config", config_path, "--tags", work / "tags.csv",
                   "--rule", work / "rule.json", "--output-dir", again) == 0
        assert (again / "labeled.csv").read_bytes() == (work / "labeled.csv").read_bytes()


class TestReportCommand:
    def test_bundle(self, config_path, tmp_path, capsys):
        out = tmp_path / "rep"
        assert run("report", "--config", config_path, "--output-dir", out) == 0
        bundle = json.loads((out / "report.json").read_text())
        assert bundle["resolvability"]["n_resolvable_exact"] == 2
        assert len(bundle["components"]) == 6
        assert len(bundle["decision_rule"]["thresholds_ps"]) == 5
        assert (out / "fig2b_separation.csv").exists()
        assert (out / "fig2b_fwhm.csv").exists()
