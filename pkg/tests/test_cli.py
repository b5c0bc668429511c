import json

import numpy as np
import pytest

from shimmy import cli
from shimmy.integrator import Trajectory
from shimmy.observer import ObserverCert, verify_cert
from shimmy.dynamics import NlgParams
from shimmy.tire import TireModel



def test_precedence_flags_over_file_over_defaults(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nzad.T = 5e-4\nplant.V = 60\ndt = 2e-5\n")
    s = cli.resolve_settings(cli.read_config_file(cfg), {"dt": 1e-5})
    assert s["zad.T"] == 5e-4 and s["plant.V"] == 60.0
    assert s["dt"] == 1e-5
    assert s["zad.mu"] == 1000.0
    assert cli.resolve_settings({}, {"test2.pothole_times": "1, 2.5"})["test2.pothole_times"] == (1.0, 2.5)


def test_config_errors(tmp_path, capsys):
    assert cli.main(["simulate", "--set", "plant.nonsense=1"]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--set", "zad.T=fast"]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--controller", "zad", "--cert", str(tmp_path / "none.json")]) == cli.EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


def test_simulate_writes_csv_and_sidecar(tmp_path):
    out = tmp_path / "t1.csv"
    code = cli.main(["simulate", "--scenario", "test1", "--controller", "zad", "--out", str(out),
                     "--set", "test1.duration=0.4", "--set", "record_every=10"])
    assert code == cli.EXIT_OK
    tr = Trajectory.from_csv(out)
    assert tr.t[-1] == pytest.approx(0.4) and np.all(np.isfinite(tr.x_hat))
    side = json.loads(out.with_suffix(".run.json").read_text())
    assert side["metrics"]["overshoot"] < 0.01745
    assert side["config"]["zad.k_s"] == 0.5 and side["config"]["plant.c"] == -1e5
    assert set(cli.default_settings()) == set(side["config"])


def test_simulate_divergence_exit_code(tmp_path):
    code = cli.main(["simulate", "--scenario", "custom", "--set", "plant.k=1e4", "--set", "custom.duration=5",
                     "--dt", "1e-4", "--out", str(tmp_path / "d.csv")])
    assert code == cli.EXIT_DIVERGED


def test_bifurcate_below_onset(tmp_path):
    out = tmp_path / "b.csv"
    code = cli.main(["bifurcate", "--out", str(out), "--dt", "1e-4", "--jobs", "2", "--set", "sweep.V_start=5",
                     "--set", "sweep.V_stop=15", "--set", "sweep.step=5"])
    assert code == cli.EXIT_OK
    assert len(out.read_text().splitlines()) == 4
    side = json.loads(out.with_suffix(".run.json").read_text())
    assert side["no_bifurcation"] is True and side["hopf_v"] is None


def test_synth_then_verify_round_trip(tmp_path, capsys):
    out = tmp_path / "cert.json"
    assert cli.main(["synth-observer", "--out", str(out)]) == cli.EXIT_OK
    assert "lambda_min(Q)" in capsys.readouterr().out
    cert = ObserverCert.load(out)
    p = NlgParams()
    rep = verify_cert(p, TireModel.from_params("piecewise", p), cert)
    assert rep.ok
    assert cli.main(["verify-observer", "--cert", str(out)]) == cli.EXIT_OK
    assert cli.main(["simulate", "--cert", str(out), "--controller", "mcs", "--set", "test1.duration=0.3",
                     "--out", str(tmp_path / "m.csv")]) == cli.EXIT_OK


def test_synth_budget_zero(tmp_path):
    assert cli.main(["synth-observer", "--set", "synth.max_rounds=0", "--out", str(tmp_path / "c.json")]) == cli.EXIT_SYNTH


def test_verify_published_matrices(capsys):
    code = cli.main(["verify-observer"])
    out = capsys.readouterr().out
    assert "lambda_min(Q) = 29.437" in out and "rho = 27.8644" in out
    # the published Q does not solve the Lyapunov equation to 1e-6 at any V
    assert code == cli.EXIT_SYNTH
    assert cli.main(["verify-observer", "--set", "verify.lyap_tol=30"]) == cli.EXIT_OK
