"""Command-line entry point.

Subcommands are thin wrappers over the library: ``physics`` (SI parameter
conversions), ``profile`` (inversion profiles and backaction calibration),
``cool`` (one protocol trajectory), ``sweep`` (Monte Carlo parameter
sweeps) and ``validate`` (fast oracle suite).  Configuration comes from an
optional JSON file plus command-line overrides; every run writes its
outputs under a timestamped directory with a manifest.

Exit codes: 0 success, 1 validation failure (bad configuration or a failed
oracle), 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path


from . import __version__
from .controller import ControllerConfig
from .physics import ParameterError, echo_quantities, preset
from .protocol import ProtocolConfig, ProtocolError, run_protocol
from .pulses import calibrate_backaction, gaussian_pulse, inversion_profile
from .sweep import SweepSpec, emit_report, run_sweep
from .validate import run_validation

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (all violations listed)."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def _fail_validation(errors: list[str]) -> int:
    json.dump({"errors": errors}, sys.stderr, indent=1)
    sys.stderr.write("\n")
    return EXIT_VALIDATION


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        with open(p) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config file is not valid JSON: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError(["config file must hold a JSON object"])
    return data


def build_protocol_config(file_values: dict, flag_values: dict) -> ProtocolConfig:
    """Merge config-file values with flag overrides and validate everything.

    Flags win over file values.  All constraint violations are collected and
    reported together.
    """
    merged = dict(file_values)
    controller_values = dict(merged.pop("controller", {}) or {})
    for key, value in flag_values.items():
        if value is None:
            continue
        if key.startswith("controller."):
            controller_values[key.split(".", 1)[1]] = value
        else:
            merged[key] = value

    errors: list[str] = []
    known = {"nbar", "readout_fidelity", "heating_rate", "trap_frequency",
             "mode", "seed", "estimator_points", "sim_points", "sim_margin",
             "pulse_ratio", "apply_final_displacement"}
    for key in merged:
        if key not in known:
            errors.append(f"unknown configuration key: {key}")
    known_ctrl = {"width_factor", "target_up_prob", "threshold_sigmas",
                  "stop_width_1", "stop_width_2", "readout_fidelity",
                  "max_steps"}
    for key in controller_values:
        if key not in known_ctrl:
            errors.append(f"unknown controller key: {key}")
    if errors:
        raise ConfigError(errors)

    controller_values.setdefault("readout_fidelity",
                                 merged.get("readout_fidelity", 1.0))
    try:
        controller = ControllerConfig(**controller_values)
    except ValueError as exc:
        errors.extend(str(exc).split("; "))
        controller = None
    try:
        # validate the remaining fields even when the controller is broken
        config = ProtocolConfig(controller=controller or ControllerConfig(),
                                **merged)
    except (ValueError, TypeError) as exc:
        errors.extend(str(exc).split("; "))
        config = None
    if errors or config is None or controller is None:
        raise ConfigError(errors or ["invalid configuration"])
    return config


def _make_run_dir(base: str | None, kind: str) -> Path:
    # precedence: flag, then MAGCOOL_OUT, then ./runs
    if base is None:
        base = os.environ.get("MAGCOOL_OUT")
    root = Path(base) if base else Path.cwd() / "runs"
    stamp = time.strftime("%Y%m%d-%H%M%S")
    path = root / f"{stamp}-{kind}"
    suffix = 0
    while path.exists():
        suffix += 1
        path = root / f"{stamp}-{kind}-{suffix}"
    path.mkdir(parents=True)
    return path


def _write_manifest(run_dir: Path, command: str, payload: dict) -> None:
    manifest = {
        "tool": "magcool",
        "version": __version__,
        "command": command,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "outputs": payload,
    }
    with open(run_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_physics(args) -> int:
    try:
        if args.preset:
            params = preset(args.preset)
        else:
            missing = [name for name in ("radius", "density", "trap_frequency",
                                         "sensor_distance")
                       if getattr(args, name) is None]
            if missing:
                return _fail_validation(
                    [f"missing required parameter: {m}" for m in missing])
            params = _params_from_args(args)
        echo = echo_quantities(params)
    except ParameterError as exc:
        return _fail_validation(str(exc).split("; "))
    print(json.dumps(echo, indent=1, sort_keys=True))
    return EXIT_OK


def _params_from_args(args):
    from .physics import PhysicalParams

    kwargs = dict(radius=args.radius, density=args.density,
                  trap_frequency=args.trap_frequency,
                  sensor_distance=args.sensor_distance)
    for name in ("magnetization", "temperature", "quality_factor",
                 "coupling"):
        value = getattr(args, name)
        if value is not None:
            kwargs[name] = value
    return PhysicalParams(**kwargs)


def cmd_profile(args) -> int:
    try:
        pulse = gaussian_pulse(center=args.center, width=args.width,
                               g=args.coupling, alpha=args.alpha,
                               ratio=args.ratio)
        prof = inversion_profile(pulse, g=args.coupling, exact=args.exact)
    except ValueError as exc:
        return _fail_validation(str(exc).split("; "))
    run_dir = _make_run_dir(args.out, "profile")
    samples = run_dir / "profile.csv"
    with open(samples, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["z", "prob_up"])
        for z, p in zip(prof.z, prof.prob_up):
            writer.writerow([f"{z:.17g}", f"{p:.17g}"])
    fit = {
        "fit_center": prof.fit_center,
        "fit_width": prof.fit_width,
        "max_residual": prof.max_residual,
        "alpha": prof.alpha,
        "gaussian_ok": prof.gaussian_ok,
        "pulse": {"center": pulse.center, "width": pulse.width,
                  "envelope_sigma": pulse.envelope_sigma,
                  "duration": pulse.duration, "kind": pulse.kind},
    }
    with open(run_dir / "fit.json", "w") as fh:
        json.dump(fit, fh, indent=1, sort_keys=True)
    outputs = {"profile_csv": samples.name, "fit_json": "fit.json"}
    if args.calibrate:
        table = calibrate_backaction(pulse, g=args.coupling)
        with open(run_dir / "backaction.json", "w") as fh:
            json.dump(table.to_dict(), fh, indent=1, sort_keys=True)
        outputs["backaction_json"] = "backaction.json"
    _write_manifest(run_dir, "profile", outputs)
    print(run_dir)
    return EXIT_OK


def cmd_cool(args) -> int:
    flag_values = {
        "mode": args.mode, "nbar": args.nbar,
        "readout_fidelity": args.fidelity, "heating_rate": args.heating,
        "trap_frequency": args.trap_frequency, "seed": args.seed,
        "sim_points": args.sim_points, "estimator_points": args.estimator_points,
        "controller.width_factor": args.width_factor,
        "controller.target_up_prob": args.target_up_prob,
        "controller.threshold_sigmas": args.threshold_sigmas,
        "controller.stop_width_1": args.stop_width_1,
        "controller.stop_width_2": args.stop_width_2,
    }
    try:
        file_values = _load_config_file(args.config)
        config = build_protocol_config(file_values, flag_values)
    except ConfigError as exc:
        return _fail_validation(exc.errors)
    try:
        record = run_protocol(config)
    except (ProtocolError, ValueError) as exc:
        sys.stderr.write(f"run failed: {exc}\n")
        return EXIT_RUNTIME
    run_dir = _make_run_dir(args.out, "cool")
    with open(run_dir / "trajectory.json", "w") as fh:
        fh.write(record.to_json(indent=1, sort_keys=True))
    rows = record.step_rows()
    with open(run_dir / "steps.csv", "w", newline="") as fh:
        if rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]),
                                    lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v)
                                 for k, v in row.items()})
    _write_manifest(run_dir, "cool", {"trajectory_json": "trajectory.json",
                                      "steps_csv": "steps.csv"})
    summary = {"gs_fidelity": record.gs_fidelity,
               "total_time": record.total_time,
               "measurements": [record.quadrature_1.measurement_count,
                                record.quadrature_2.measurement_count],
               "run_dir": str(run_dir)}
    print(json.dumps(summary, indent=1, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec_values = _load_config_file(args.config)
        if not spec_values:
            return _fail_validation(["sweep requires a config file"])
        spec = _sweep_spec_from_dict(spec_values)
    except ConfigError as exc:
        return _fail_validation(exc.errors)
    workers = args.workers
    if workers is None:
        env = os.environ.get("MAGCOOL_WORKERS")
        workers = int(env) if env else (os.cpu_count() or 1)
    try:
        result = run_sweep(spec, workers=workers)
    except Exception as exc:  # noqa: BLE001 - reported as runtime failure
        sys.stderr.write(f"sweep failed: {exc}\n")
        return EXIT_RUNTIME
    run_dir = _make_run_dir(args.out, "sweep")
    emit_report(result, run_dir / "sweep_long.csv", run_dir / "summary.json")
    _write_manifest(run_dir, "sweep", {"csv": "sweep_long.csv",
                                       "json": "summary.json"})
    print(run_dir)
    return EXIT_OK


def _sweep_spec_from_dict(data: dict) -> SweepSpec:
    errors = []
    axes = data.get("axes")
    if not isinstance(axes, list) or not all(
            isinstance(a, (list, tuple)) and len(a) == 2 for a in axes or []):
        errors.append("axes must be a list of [name, values] pairs")
    base_values = data.get("base", {})
    if errors:
        raise ConfigError(errors)
    base = build_protocol_config(base_values, {})
    return SweepSpec(
        axes=tuple((name, tuple(values)) for name, values in axes),
        trajectories=int(data.get("trajectories", 100)),
        base=base,
        run_kind=data.get("run_kind", "protocol"),
        seed_base=int(data.get("seed_base", 0)),
    )


def cmd_validate(args) -> int:
    results = run_validation(alpha_expected=args.alpha_expected)
    for row in results:
        print(row.row())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} oracles passed")
    return EXIT_OK if not failed else EXIT_VALIDATION


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magcool",
        description="Adaptive-measurement cooling of a levitated magnet")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("physics", help="SI parameter conversions")
    p.add_argument("--preset", help="named parameter set (case-a, case-b)")
    for name in ("radius", "density", "trap-frequency", "sensor-distance",
                 "magnetization", "temperature", "quality-factor", "coupling"):
        p.add_argument(f"--{name}", type=float, default=None,
                       dest=name.replace("-", "_"))
    p.set_defaults(func=cmd_physics)

    p = sub.add_parser("profile", help="inversion profile and calibration")
    p.add_argument("--width", type=float, required=True,
                   help="target profile width (dimensionless position)")
    p.add_argument("--center", type=float, default=0.0)
    p.add_argument("--coupling", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.15)
    p.add_argument("--ratio", type=float, default=10.0)
    p.add_argument("--exact", action="store_true",
                   help="integrate on the output grid instead of rescaling")
    p.add_argument("--calibrate", action="store_true",
                   help="also emit the backaction table")
    p.add_argument("--out", default=None, help="run directory root")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("cool", help="run one protocol trajectory")
    p.add_argument("--config", default=None, help="JSON configuration file")
    p.add_argument("--mode", choices=("wigner", "bayes"), default=None)
    p.add_argument("--nbar", type=float, default=None)
    p.add_argument("--fidelity", type=float, default=None)
    p.add_argument("--heating", type=float, default=None,
                   help="heating rate in units of the coupling")
    p.add_argument("--trap-frequency", type=float, default=None,
                   dest="trap_frequency")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sim-points", type=int, default=None, dest="sim_points")
    p.add_argument("--estimator-points", type=int, default=None,
                   dest="estimator_points")
    p.add_argument("--width-factor", type=float, default=None,
                   dest="width_factor")
    p.add_argument("--target-up-prob", type=float, default=None,
                   dest="target_up_prob")
    p.add_argument("--threshold-sigmas", type=float, default=None,
                   dest="threshold_sigmas")
    p.add_argument("--stop-width-1", type=float, default=None,
                   dest="stop_width_1")
    p.add_argument("--stop-width-2", type=float, default=None,
                   dest="stop_width_2")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cool)

    p = sub.add_parser("sweep", help="Monte Carlo parameter sweep")
    p.add_argument("--config", required=True, help="sweep spec (JSON)")
    p.add_argument("--workers", type=int, default=None,
                   help="process count (default: MAGCOOL_WORKERS or all cores)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the fast oracle suite")
    p.add_argument("--alpha-expected", type=float, default=1.15,
                   dest="alpha_expected",
                   help="expected profile width constant (fault injection)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
