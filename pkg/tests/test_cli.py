import json

import numpy as np
import pytest

from h2entangle.cli import main
from h2entangle.eventfile import EventFile, make_records, write_event_file
from h2entangle.fitting import fit_cosine
from h2entangle.model import PhysicsModel


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    """model -> simulate -> analyze -> fit on the default configuration."""
    root = tmp_path_factory.mktemp("run")
    for argv in (["model", "--out", str(root / "model")],
                 ["simulate", "--out", str(root / "sim")],
                 ["analyze", str(root / "sim" / "events.atl"), "--out", str(root / "ana")],
                 ["fit", str(root / "ana"), "--out", str(root / "fit")],
                 ["fit", str(root / "model"), "--out", str(root / "fitm")]):
        assert main(argv) == 0, argv
    return root


def load(path):
    return json.loads(path.read_text())


def test_outputs_exist(chain):
    for name in ("model/model.json", "model/model_map_OB19.csv", "model/model_map_OB19.png",
                 "model/plot_outputs.py", "sim/events.atl", "ana/jes.csv", "ana/delay_scan.csv",
                 "ana/projections.csv", "ana/analysis.json", "ana/jes.png", "fit/fit.json"):
        assert (chain / name).is_file(), name


def test_provenance_everywhere(chain):
    for name in ("model/model.json", "ana/analysis.json", "fit/fit.json"):
        meta = load(chain / name)["provenance"]
        assert {"config_hash", "seed", "version", "tool"} <= set(meta)
    first = (chain / "model/model_map_OB19.csv").read_text().splitlines()[0]
    assert first.startswith("#") and "config_hash" in first


def test_closed_loop_phase(chain):
    model = load(chain / "model/model.json")["bands"]
    fit = load(chain / "fit/fit.json")["probe"]
    for parity, ref in (("odd", "OB19"), ("even", "EB20")):
        d = fit[f"sum_{parity}"]["phase"] - model[ref]["probe_fit"]["phase"]
        assert abs(np.angle(np.exp(1j * d))) < 0.1


def test_model_period(chain):
    m = load(chain / "model/model.json")
    assert m["period_fs"] == pytest.approx(1.723, abs=1e-3)


def test_fit_on_model_maps_is_exact(chain):
    fm = load(chain / "fitm/fit.json")["probe"]["OB19"]
    model = PhysicsModel.build()
    band = model.band("OB19")
    tau = np.linspace(0.0, 2 * model.period, 65)[:-1]
    ref = fit_cosine(tau, model.asymmetry(band, fm["ker_eV"], tau), model.omega)
    for key in ("offset", "amplitude", "phase"):
        assert fm[key] == pytest.approx(getattr(ref, key), abs=1e-9)


def test_model_rerun_identical(chain, tmp_path):
    assert main(["model", "--out", str(tmp_path)]) == 0
    for name in ("model.json", "model_map_EB20.csv", "model_mean_asymmetry.csv", "model_map_OB17.png"):
        assert (tmp_path / name).read_bytes() == (chain / "model" / name).read_bytes()


def test_simulate_deterministic(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[simulation]\nevents = 20000\n")
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a/events.atl").read_bytes() == (tmp_path / "b/events.atl").read_bytes()
    assert main(["simulate", "--config", str(cfg), "--seed", "4", "--threads", "3",
                 "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c/events.atl").read_bytes() != (tmp_path / "a/events.atl").read_bytes()


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["analyze"]) == 1
    assert main(["simulate", "--threads", "0"]) == 1


def test_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[physics]\nphoton_energy = -1\n")
    assert main(["model", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "bad.ini:2" in capsys.readouterr().err
    assert main(["model", "--config", str(tmp_path / "missing.ini")]) == 2


def test_corrupted_event_file(chain, tmp_path, capsys):
    raw = bytearray((chain / "sim/events.atl").read_bytes()[:4096])
    raw[:4] = b"BAD!"
    path = tmp_path / "bad.atl"
    path.write_bytes(bytes(raw))
    assert main(["analyze", str(path), "--out", str(tmp_path / "o")]) == 3
    assert "magic" in capsys.readouterr().err.lower()
    assert main(["analyze", str(tmp_path / "none.atl"), "--out", str(tmp_path / "o")]) == 3


def test_fit_without_inputs(tmp_path):
    assert main(["fit", str(tmp_path), "--out", str(tmp_path / "o")]) == 3


def test_empty_event_file(tmp_path, capsys):
    model = PhysicsModel.build()
    delays = np.linspace(0, 2 * model.period, 32, endpoint=False)
    ev = EventFile(delays, make_records([], np.zeros((0, 3)), np.zeros((0, 3))))
    write_event_file(ev, tmp_path / "empty.atl")
    assert main(["analyze", str(tmp_path / "empty.atl"), "--out", str(tmp_path / "o")]) == 0
    assert "empty" in capsys.readouterr().err
    summary = load(tmp_path / "o/analysis.json")
    assert summary["n_events"] == 0 and summary["warnings"]
    rows = [ln for ln in (tmp_path / "o/jes.csv").read_text().splitlines() if not ln.startswith("#")][1:]
    assert rows and all(r.split(",")[2:4] == ["0", "0"] for r in rows)


def test_default_config_and_version(capsys):
    assert main(["default-config"]) == 0
    assert "[physics]" in capsys.readouterr().out
    assert main(["--version"]) == 0


def test_plot_script_runs(chain, tmp_path):
    import shutil
    import subprocess
    import sys
    for f in ("model_mean_asymmetry.csv", "plot_outputs.py"):
        shutil.copy(chain / "model" / f, tmp_path / f)
    out = subprocess.run([sys.executable, str(tmp_path / "plot_outputs.py")], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert list(tmp_path.glob("*.replot.png"))


def test_selfcheck_with_other_seed(capsys):
    assert main(["selfcheck", "--seed", "100"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 10 and "10/10" in out


def test_selfcheck_failure_exit(monkeypatch, capsys):
    from h2entangle import acceptance

    broken = [(1, "always fails", lambda model=None: (False, "forced"))]
    monkeypatch.setattr(acceptance, "CHECKS", broken)
    assert main(["selfcheck"]) == 4
    assert "[FAIL]" in capsys.readouterr().out
