import json
import math
import subprocess
import sys

import pytest

from abphase import cli
from abphase.config import to_natural
from abphase.scenarios import git_blob_sha1, load_scenario


def run(tmp_path, text, *args, verb="run", name="cfg.toml"):
    cfg = tmp_path / name
    cfg.write_text(text)
    out = tmp_path / "out"
    code = cli.main([verb, str(cfg), "--out-dir", str(out), "--quiet", *args])
    return code, out


def report(out, name="report.json"):
    return json.loads((out / name).read_text())


@pytest.mark.parametrize("kind", ["SectorPhase", "PhaseDifference", "Heisenberg", "PathSweep",
                                  "Tomography"])
def test_minimal_config_runs(tmp_path, kind):
    code, out = run(tmp_path, f'kind = "{kind}"\n')
    assert code == 0
    rep = report(out)
    assert rep["schema"] == "abphase.report/1"
    assert rep["status"] == "ok" and rep["kind"] == kind
    assert rep["config_sha1"] == git_blob_sha1(f'kind = "{kind}"\n'.encode())


def test_path_sweep_outputs(tmp_path):
    code, out = run(tmp_path, 'kind = "PathSweep"\n')
    assert code == 0
    lines = (out / "series.csv").read_text().splitlines()
    assert lines[0] == "arc_parameter,x,y,phi_rate_L,phi_rate_R,delta_phi_rate,cumulative_phase"
    assert len(lines) == 1 + 129
    res = report(out)["result"]
    assert res["total_phase"] == pytest.approx(res["expected_flux_phase"], rel=1e-6)
    assert (out / "series.csv").read_bytes().endswith(b"\n")


def test_tomography_shots_zero_matches_truth(tmp_path):
    code, out = run(tmp_path, 'kind = "Tomography"\n[scenario]\nshots = 0\n')
    assert code == 0
    res = report(out)["result"]
    assert abs(res["phase_estimate"] - res["ground_truth"]) < 1e-9


def test_determinism_byte_identical(tmp_path):
    text = 'kind = "Tomography"\nseed = 11\n[scenario]\nshots = 20000\n'
    code, out = run(tmp_path, text)
    first = (out / "report.json").read_bytes()
    code2, out2 = run(tmp_path, text)
    assert code == code2 == 0
    assert first == (out2 / "report.json").read_bytes()
    assert b"timestamp" not in first
    code3, _ = run(tmp_path, text, "--seed", "12")
    assert (out / "report.json").read_bytes() != first


def test_malformed_config_writes_nothing(tmp_path, capsys):
    code, out = run(tmp_path, 'kind = "PathSweep"\n[path\nrho = 1\n')
    assert code == cli.EXIT_CONFIG
    assert not out.exists() or not any(out.iterdir())
    rec = json.loads(capsys.readouterr().err)
    assert rec["status"] == "error"
    assert rec["line"] == 2 and rec["column"] >= 1


def test_unknown_key_and_kind(tmp_path, capsys):
    assert run(tmp_path, 'kind = "Nope"\n')[0] == cli.EXIT_CONFIG
    assert "unknown kind" in json.loads(capsys.readouterr().err)["message"]
    assert run(tmp_path, 'kind = "PathSweep"\n[path]\nradius = 1.0\n')[0] == cli.EXIT_CONFIG
    assert "unknown key" in json.loads(capsys.readouterr().err)["message"]
    assert run(tmp_path, '[path]\nrho = 1.0\n')[0] == cli.EXIT_CONFIG
    assert "kind" in json.loads(capsys.readouterr().err)["message"]


def test_unit_suffix_conversion():
    scn = load_scenario('kind = "PathSweep"\n[units]\nlength_scale_m = 1e-6\n'
                        '[physical]\nB0_T = 0.5\n[path]\nrho_um = 2.0\nt_loop_ps = 30.0\n')
    assert scn.settings["physical"]["B0"] == pytest.approx(to_natural(0.5, "T", 1e-6))
    assert scn.settings["path"]["rho"] == pytest.approx(2.0)
    assert scn.settings["path"]["t_loop"] == pytest.approx(30e-12 * 299792458.0 / 1e-6)
    with pytest.raises(Exception, match="expected field"):
        load_scenario('kind = "PathSweep"\n[physical]\nB0_m = 1.0\n')


def test_velocity_error_record(tmp_path, capsys):
    code, out = run(tmp_path, 'kind = "PhaseDifference"\n[physical]\np_vec = [0.0, 0.05, 0.0]\n')
    assert code == cli.EXIT_CONFIG
    rec = json.loads(capsys.readouterr().err)
    assert "adiabatic" in rec["message"]
    assert not out.exists() or not any(out.iterdir())


def test_regime_error_exit_code(tmp_path, capsys):
    text = ('kind = "PhaseDifference"\n[physical]\nB0 = 0.05\np_vec = [0.0, 5e-3, 0.0]\n'
            '[grid]\nk_vecs = [[1.0, 0.0, 0.0]]\nvolume = 0.002\nn_max = 2\n')
    code, _ = run(tmp_path, text)
    assert code == cli.EXIT_REGIME
    rec = json.loads(capsys.readouterr().err)
    assert rec["error_type"] in ("RegimeError", "NyquistError")


def test_validate_verb(tmp_path, capsys):
    code, out = run(tmp_path, 'kind = "Heisenberg"\n', verb="validate")
    assert code == 0 and not out.exists()
    code, _ = run(tmp_path, 'kind = "Heisenberg"\n[grid]\nvolume = -1.0\n', verb="validate")
    assert code != 0


def test_sweep_verb_path_samples(tmp_path):
    code, out = run(tmp_path, 'kind = "PathSweep"\n', "--axis", "path_samples", "--values", "129,257,513",
                    verb="sweep")
    assert code == 0
    sw = report(out, "sweep.json")
    assert sw["schema"] == "abphase.sweep/1"
    res = sw["result"]
    metrics = [r["metric"] for r in res["rows"]]
    assert all(abs(m - metrics[0]) / metrics[0] < 1e-9 for m in metrics)
    assert (out / "sweep.csv").read_text().splitlines()[0] == "value,status,discrepancy,metric"


def test_sweep_records_failures_and_continues(tmp_path):
    code, out = run(tmp_path, 'kind = "PathSweep"\n', "--axis", "path_samples", "--values", "33,129",
                    verb="sweep")
    assert code == 0
    rows = report(out, "sweep.json")["result"]["rows"]
    assert rows[0]["status"] == "error" and "64" in rows[0]["error"]
    assert rows[1]["status"] == "ok"
    assert report(out, "sweep.json")["result"]["monotone"] is False


def test_sweep_rejects_non_monotone_values(tmp_path):
    code, _ = run(tmp_path, 'kind = "PathSweep"\n', "--axis", "path_samples", "--values", "129,65,257",
                  verb="sweep")
    assert code == cli.EXIT_CONFIG


def test_n_max_sweep_converges_monotonically(tmp_path):
    text = ('kind = "ConvergenceSweep"\n[physical]\nB0 = 0.05\np_vec = [0.0, 5e-3, 0.0]\n'
            '[grid]\nk_vecs = [[1.0, 0.0, 0.0]]\nvolume = 0.002\n'
            '[sweep]\ntarget = "SectorPhase"\naxis = "n_max"\nvalues = [2, 3, 4, 5, 6, 7, 8]\n')
    code, out = run(tmp_path, text)
    assert code == 0
    res = report(out)["result"]
    assert res["monotone"] is True
    errs = [r["discrepancy"] for r in res["rows"]]
    assert errs[0] > 1e-4 and errs[-1] < 1e-12


@pytest.mark.slow
def test_identity_radial_sweep_stabilizes(tmp_path):
    code, out = run(tmp_path, 'kind = "IdentityCheck"\n', "--axis", "radial_nodes",
                    "--values", "160,220,260", verb="sweep")
    assert code == 0
    res = report(out, "sweep.json")["result"]
    assert all(r["status"] == "ok" for r in res["rows"])
    assert res["last_two_change"] < 0.01


def test_entry_point_subprocess(tmp_path):
    cfg = tmp_path / "p.toml"
    cfg.write_text('kind = "PathSweep"\n')
    proc = subprocess.run([sys.executable, "-m", "abphase.cli", "run", str(cfg), "--out-dir", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "ok"
    assert math.isfinite(json.loads((tmp_path / "o" / "report.json").read_text())["result"]["total_phase"])
