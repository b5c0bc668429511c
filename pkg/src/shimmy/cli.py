"""Command-line entry point: simulate, bifurcate, synth-observer, verify-observer.

Settings come from three layers, later ones winning: built-in defaults, a
``--config`` file of ``key = value`` lines, then command-line flags
(including repeated ``--set key=value``). Keys are namespaced, e.g.
``plant.V``, ``zad.T``, ``mcs.k_I``, ``test2.ramp_time``, ``sweep.step``.
Every run writes the fully resolved settings to a JSON sidecar.

Exit codes: 0 ok, 1 configuration error, 2 numerical divergence,
3 observer synthesis or verification failure.
"""
from __future__ import annotations

import argparse
import inspect
import json
import logging
import math
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import analysis, scenarios
from .controllers import AdaptationDivergence, McsConfig, ZadConfig
from .dynamics import NlgParams, SingularVelocityError
from .integrator import DivergenceError, StepConfig, simulate
from .observer import (CertificateInvalid, ObserverCert, SearchConfig, SynthesisFailed,
                       lyapunov_q, published_cert, synthesize_cert, verify_cert)
from .tire import TireKind, TireModel

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_SYNTH = 0, 1, 2, 3

log = logging.getLogger("shimmy")


class ConfigError(ValueError):
    pass


def _dataclass_defaults(cls, skip=()):
    return {f.name: getattr(cls(), f.name) for f in fields(cls) if f.name not in skip}


def _signature_defaults(fn):
    return {k: v.default for k, v in inspect.signature(fn).parameters.items()}


def default_settings() -> dict:
    d = {
        "scenario": "test1",
        "controller": "none",
        "plant_tire": "piecewise",
        "controller_tire": "smooth",
        "cert": "",
        "dt": 1e-5,
        "record_every": 1,
        "out": "",
        "jobs": 1,
        "hopf.threshold": analysis.HOPF_THRESHOLD,
        "verify.quad_samples": 10000,
        "verify.lyap_tol": 1e-6,
        "verify.v_design": math.nan,
        "custom.duration": 2.0,
        "custom.psi0": 0.05,
    }
    sections = {
        "plant": _dataclass_defaults(NlgParams),
        "zad": _dataclass_defaults(ZadConfig),
        "mcs": _dataclass_defaults(McsConfig, skip=("P_m", "A_m", "B_m")),
        "sweep": _dataclass_defaults(analysis.SweepConfig),
        "synth": _dataclass_defaults(SearchConfig),
        "test1": _signature_defaults(scenarios.test1),
        "test2": _signature_defaults(scenarios.test2),
    }
    for sec, vals in sections.items():
        d.update({f"{sec}.{k}": v for k, v in vals.items()})
    return d


CHOICES = {
    "scenario": ("test1", "test2", "custom"),
    "controller": ("none", "zad", "mcs"),
    "plant_tire": tuple(k.value for k in TireKind),
    "controller_tire": tuple(k.value for k in TireKind),
}


def _coerce(key: str, raw, default):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key in CHOICES:
            if text not in CHOICES[key]:
                raise ConfigError(f"{key} must be one of {CHOICES[key]}, got {text!r}")
            return text
        if default is None:
            return None if text.lower() == "none" else float(text)
        if isinstance(default, bool):
            if text.lower() not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return text.lower() in ("true", "1")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(v) for v in text.split(",") if v.strip())
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def read_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    out = {}
    for n, line in enumerate(p.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def resolve_settings(file_values: dict, flag_values: dict) -> dict:
    """defaults < file < flags; unknown keys are rejected."""
    settings = default_settings()
    for layer in (file_values, flag_values):
        for k, v in layer.items():
            if k not in settings:
                raise ConfigError(f"unknown config key {k!r}")
            settings[k] = _coerce(k, v, default_settings()[k])
    if not settings["dt"] > 0:
        raise ConfigError("dt must be positive")
    return settings


def _section(settings: dict, name: str) -> dict:
    pre = name + "."
    return {k[len(pre):]: v for k, v in settings.items() if k.startswith(pre)}


def _build(cls, kwargs):
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from None


def _load_cert(settings: dict) -> ObserverCert:
    path = settings["cert"]
    if not path:
        return published_cert()
    try:
        return ObserverCert.load(path)
    except FileNotFoundError:
        raise ConfigError(f"certificate file not found: {path}") from None
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"unreadable certificate {path}: {exc}") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_sidecar(out: Path, settings: dict, **payload) -> Path:
    path = out.with_suffix(".run.json")
    doc = {"config": settings, **payload}
    path.write_text(json.dumps(_jsonable(doc), indent=2) + "\n")
    return path


def _scenario(settings: dict, params: NlgParams) -> tuple[scenarios.Scenario, float]:
    """Materialise the scenario and return it with its disturbance onset."""
    name = settings["scenario"]
    plant_kind = TireKind(settings["plant_tire"])
    ctrl_kind = TireKind(settings["controller_tire"])
    if name == "custom":
        sc = scenarios.Scenario("custom", scenarios.Constant(params.V), scenarios.PulseTrain(),
                                settings["custom.duration"], plant_kind, ctrl_kind,
                                (settings["custom.psi0"], 0.0, 0.0), params)
        return sc, 0.0
    kwargs = _section(settings, name)
    try:
        sc = scenarios.SCENARIOS[name](**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None
    onset = kwargs["start"] if name == "test1" else min(kwargs["pothole_times"], default=0.0)
    # plant constants come from the plant section, speed from the scenario
    return scenarios.Scenario(sc.name, sc.velocity_profile, sc.disturbance, sc.duration, plant_kind,
                              ctrl_kind, sc.x0, params.with_velocity(sc.params.V)), onset


def cmd_simulate(settings: dict) -> int:
    params = _build(NlgParams, _section(settings, "plant"))
    sc, onset = _scenario(settings, params)
    cert = _load_cert(settings)
    controller = None
    if settings["controller"] == "zad":
        controller = _build(ZadConfig, _section(settings, "zad"))
    elif settings["controller"] == "mcs":
        controller = _build(McsConfig, _section(settings, "mcs"))
    plant_tire, ctrl_tire = sc.tires()
    cfg = _build(StepConfig, {"dt": settings["dt"], "t_end": sc.duration, "record_every": settings["record_every"]})
    out = Path(settings["out"] or f"{sc.name}_{settings['controller']}.csv")
    traj = simulate(sc.params, plant_tire, cfg, controller=controller, cert=cert, observer_tire=ctrl_tire,
                    disturbance=sc.disturbance, velocity=sc.velocity_profile, x0=sc.x0)
    traj.to_csv(out)
    m = analysis.perf_metrics(traj, onset)
    tail = traj.t >= traj.t[-1] - 0.5
    metrics = {**asdict(m), "max_abs_psi": float(np.abs(traj.psi).max()),
               "max_abs_alpha_error": float(np.nanmax(np.abs(traj.x_hat[:, 2] - traj.x[:, 2]))),
               "d_c_std_final": float(np.std(traj.d_c[tail])) if controller is not None and
               isinstance(controller, ZadConfig) else None}
    _write_sidecar(out, settings, metrics=metrics)
    print(f"wrote {out}  overshoot={m.overshoot:.6g} rad  settle_time={m.settle_time:.6g} s")
    return EXIT_OK


def cmd_bifurcate(settings: dict) -> int:
    params = _build(NlgParams, _section(settings, "plant"))
    model = TireModel.from_params(settings["plant_tire"], params)
    sw = _section(settings, "sweep")
    sw["dt"] = settings["dt"]
    cfg = _build(analysis.SweepConfig, sw)
    points = analysis.bifurcation_sweep(params, model, cfg, jobs=settings["jobs"])
    out = Path(settings["out"] or f"bifurcation_{settings['plant_tire']}.csv")
    analysis.write_sweep_csv(points, out)
    hopf = analysis.detect_hopf(points, settings["hopf.threshold"])
    peak = analysis.peak_point(points) if any(not p.diverged for p in points) else None
    _write_sidecar(out, settings, hopf_v=hopf, no_bifurcation=hopf is None,
                   peak_V=peak.V if peak else None, peak_amplitude=peak.amplitude if peak else None,
                   n_diverged=sum(p.diverged for p in points))
    print(f"wrote {out}  hopf_v={'none' if hopf is None else f'{hopf:.4g}'}")
    return EXIT_OK


def cmd_synth_observer(settings: dict) -> int:
    params = _build(NlgParams, _section(settings, "plant"))
    model = TireModel.from_params(settings["plant_tire"], params)
    search = _build(SearchConfig, _section(settings, "synth"))
    out = Path(settings["out"] or "cert.json")
    cert = synthesize_cert(params, model, search)
    cert.save(out)
    lam = float(np.linalg.eigvalsh(cert.Q)[0])
    _write_sidecar(out, settings, rho=cert.rho, lambda_min_q=lam, v_design=cert.V_design)
    print(f"wrote {out}  rho={cert.rho:.6g}  lambda_min(Q)={lam:.6g}")
    return EXIT_OK


def cmd_verify_observer(settings: dict) -> int:
    cert = _load_cert(settings)
    V = settings["verify.v_design"]
    V = cert.V_design if math.isnan(V) else V
    base = _build(NlgParams, _section(settings, "plant"))
    model = TireModel.from_params(settings["plant_tire"], base)
    report = verify_cert(base.with_velocity(V), model, cert, quad_samples=settings["verify.quad_samples"],
                         strict=False, lyap_tol=settings["verify.lyap_tol"])
    residuals = {}
    for Vc in sorted({20.0, 30.0, 80.0, float(V)}):
        r = verify_cert(base.with_velocity(Vc), model, cert, quad_samples=0, strict=False)
        residuals[str(Vc)] = r.lyapunov_residual
    print(f"lambda_min(Q) = {report.lambda_min_q:.6g}  rho = {report.rho:.6g}  gap = {report.gap:.6g}")
    lam_re = float(np.linalg.eigvalsh(lyapunov_q(base.with_velocity(V), cert.P, cert.L))[0])
    print(f"lambda_min of Q recomputed from P, L at V_design={V:g}: {lam_re:.6g}")
    print(f"QUAD requires rho >= {report.quad_required_rho:.6g}; worst sampled margin {report.worst_sampled_margin:.6g}")
    for Vc, res in residuals.items():
        print(f"Lyapunov residual at V_design={Vc}: {res:.6g}")
    for cond, detail in report.violations:
        print(f"violated ({cond}): {detail}")
    if settings["out"]:
        out = Path(settings["out"])
        _write_sidecar(out, settings, report=asdict(report), residuals=residuals, v_design=V)
    return EXIT_OK if report.ok else EXIT_SYNTH


COMMANDS = {
    "simulate": cmd_simulate,
    "bifurcate": cmd_bifurcate,
    "synth-observer": cmd_synth_observer,
    "verify-observer": cmd_verify_observer,
}

FLAG_KEYS = {"scenario": "scenario", "controller": "controller", "plant_tire": "plant_tire",
             "controller_tire": "controller_tire", "cert": "cert", "dt": "dt", "out": "out", "jobs": "jobs"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shimmy", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="file of key = value lines")
        p.add_argument("--scenario", choices=CHOICES["scenario"])
        p.add_argument("--controller", choices=CHOICES["controller"])
        p.add_argument("--plant-tire", dest="plant_tire", choices=CHOICES["plant_tire"])
        p.add_argument("--controller-tire", dest="controller_tire", choices=CHOICES["controller_tire"])
        p.add_argument("--cert", help="observer certificate JSON (default: built-in published matrices)")
        p.add_argument("--dt", type=float)
        p.add_argument("--out")
        p.add_argument("--jobs", type=int)
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = read_config_file(args.config) if args.config else {}
        flags = {key: getattr(args, attr) for attr, key in FLAG_KEYS.items() if getattr(args, attr) is not None}
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            flags[k.strip()] = v
        settings = resolve_settings(file_values, flags)
        return COMMANDS[args.command](settings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, AdaptationDivergence) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except SingularVelocityError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SynthesisFailed, CertificateInvalid) as exc:
        print(f"observer failure: {exc}", file=sys.stderr)
        return EXIT_SYNTH


if __name__ == "__main__":
    sys.exit(main())
