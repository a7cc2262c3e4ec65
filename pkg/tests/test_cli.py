import hashlib
import json
import math

import pytest

from qfredkin import cli


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def read(out, fname):
    return json.loads((out / fname).read_text())


def digest(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(folder.iterdir())}


def test_truth_table_exact(tmp_path):
    code, out = run(tmp_path, "truth-table", "--exact")
    assert code == 0
    doc = read(out, "truth_table.json")
    assert doc["result"]["overlap"] == pytest.approx(1.0, abs=1e-10)
    assert doc["config"]["exact"] is True
    assert (out / "truth_table_measured.csv").read_text().startswith("# {")


def test_sampled_run_is_byte_identical(tmp_path):
    _, a = run(tmp_path, "truth-table", "--seed", "7", name="a")
    _, b = run(tmp_path, "truth-table", "--seed", "7", name="b")
    _, c = run(tmp_path, "truth-table", "--seed", "8", name="c")
    assert digest(a) == digest(b)
    assert digest(a) != digest(c)


def test_sampled_run_needs_seed(tmp_path, capsys):
    code, _ = run(tmp_path, "mermin")
    assert code == cli.EXIT_CONFIG
    assert "seed" in capsys.readouterr().err


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# experiment\nzeta1 = 0.9\nseed = 5\nmermin_events = 300  # smaller run\n")
    code, out = run(tmp_path, "mermin", "--config", str(cfg))
    assert code == 0
    doc = read(out, "mermin.json")
    assert doc["seed"] == 5
    assert doc["config"]["zeta1"] == 0.9
    assert doc["result"]["events"] == 300


def test_command_line_overrides_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[experiment]\nseed = 5\nzeta1 = 0.9\n")
    code, out = run(tmp_path, "svetlichny", "--config", str(cfg), "--seed", "6", "--zeta1", "0.8", "--shots", "500")
    assert code == 0
    doc = read(out, "svetlichny.json")
    assert doc["seed"] == 6 and doc["config"]["zeta1"] == 0.8
    assert doc["config"]["svetlichny_events"] == 500


@pytest.mark.parametrize(
    "text",
    ["zeta1 = 1.5\n", "unknown_key = 3\n", "qst_events = many\n", "collection = sideways\n", "mermin_events = -1\n", "[a]\nx=1\n[b]\ny=2\n"],
)
def test_invalid_config_exits_with_config_code(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    code, _ = run(tmp_path, "resources", "--config", str(cfg))
    assert code == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    code, _ = run(tmp_path, "resources", "--config", str(tmp_path / "nope.cfg"))
    assert code == cli.EXIT_CONFIG


def test_shots_not_applicable(tmp_path):
    code, _ = run(tmp_path, "resources", "--shots", "5")
    assert code == cli.EXIT_CONFIG


def test_calibration_error_is_mapped(tmp_path, monkeypatch):
    def flat(*a, **k):
        raise cli.CalibrationError("flat")

    monkeypatch.setattr(cli.circuit, "calibrated", flat)
    code, _ = run(tmp_path, "ghz", "2+", "--exact")
    assert code == cli.EXIT_CALIBRATION


def test_fit_failure_exit_code(tmp_path):
    cfg = tmp_path / "f.cfg"
    cfg.write_text("fringe_shots = 0\nseed = 1\n")
    code, _ = run(tmp_path, "swap-test", "--config", str(cfg))
    assert code == cli.EXIT_FIT


def test_ghz_exact(tmp_path):
    code, out = run(tmp_path, "ghz", "2-", "--exact")
    assert code == 0
    res = read(out, "ghz_2minus.json")["result"]
    assert res["fidelity"] == pytest.approx(1.0, abs=1e-9)
    assert res["purity"] == pytest.approx(1.0, abs=1e-9)


def test_ghz_exact_with_dephasing(tmp_path):
    code, out = run(tmp_path, "ghz", "1+", "--exact", "--zeta1", "0.9")
    res = read(out, "ghz_1plus.json")["result"]
    assert res["fidelity"] == pytest.approx(0.95, abs=1e-9)
    assert res["purity"] == pytest.approx(0.905, abs=1e-9)


def test_ghz_sampled(tmp_path):
    cfg = tmp_path / "g.cfg"
    cfg.write_text("mc_samples = 10\nzeta1 = 0.95\nzeta2 = 0.95\n")
    code, out = run(tmp_path, "ghz", "2+", "--config", str(cfg), "--seed", "3")
    assert code == 0
    res = read(out, "ghz_2plus.json")["result"]
    assert 0.85 < res["fidelity"] < 1.0
    assert res["sigma_fidelity"] > 0
    assert (out / "ghz_2plus_counts.csv").exists()
    assert len((out / "ghz_2plus_rho.csv").read_text().splitlines()) == 2 + 64


def test_mermin_exact_is_flagged(tmp_path):
    code, out = run(tmp_path, "mermin", "--exact")
    res = read(out, "mermin.json")["result"]
    assert res["value"] == pytest.approx(4.0, abs=1e-9)
    assert res["significance"] == "inf"
    assert res["exact_mode"] is True


def test_svetlichny_exact(tmp_path):
    code, out = run(tmp_path, "svetlichny", "--exact")
    assert read(out, "svetlichny.json")["result"]["value"] == pytest.approx(4 * math.sqrt(2), abs=1e-9)


def test_swap_mixed_hom(tmp_path):
    assert run(tmp_path, "swap-test", "--exact")[0] == 0
    res = read(tmp_path / "out", "swap_test.json")["result"]
    assert [round(v["visibility"], 8) for v in res.values()] == [1.0, 0.0, 0.5]
    assert run(tmp_path, "mixed", "--seed", "2", name="m")[0] == 0
    weights = read(tmp_path / "m", "mixed_weights.json")["result"]["weights"]
    assert all(sum(w.values()) == pytest.approx(1.0) for w in weights.values())
    assert run(tmp_path, "hom", "--exact", name="h")[0] == 0
    res = read(tmp_path / "h", "hom.json")["result"]
    assert res["fock_coincidence_at_zero_delay"] == pytest.approx(res["analytic_coincidence_at_zero_delay"])


def test_resources(tmp_path):
    code, out = run(tmp_path, "resources")
    res = read(out, "resources.json")["result"]
    probs = {(r["variant"], r["collection"]): r["success_probability"] for r in res["reports"]}
    assert probs[("direct", "single-port")] == pytest.approx(1 / 16)
    assert probs[("direct", "both-ports")] == pytest.approx(1 / 4)
    assert res["simulated"]["mean"] == pytest.approx(1 / 16)
