"""Config-driven command-line front end.

Commands
--------
simulate        full tomography experiment from a JSON config
tomograph       single-state tomography with config overrides
calibrate       fringe calibration of the configured device
analyze-frames  run the dark-axis routine over a directory of PGM frames
gen-frames      synthesize reference frames with ground-truth sidecars
qudit           four-mode network simulation and reconstruction
budget          efficiency products, phase sensitivities, extension presets

Exit codes: 0 success, 2 configuration error, 3 runtime error.  Every
artifact embeds the SHA-256 of the resolved configuration and the master
seed; re-running a command with identical inputs reproduces identical
bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

from . import __version__, fieldio, modes, phasecam, qudit, tomo
from .apparatus import (
    DetectionConfig,
    InterferometerConfig,
    balanced_paths,
    leakage_from_db,
    measured_paths,
    phase_sensitivity_dispersion,
    phase_sensitivity_geometric,
    write_count_csv,
)
from .qubit import PureQubit
from .seeding import spawn_rng

DEG = math.pi / 180.0


class ConfigError(ValueError):
    """Configuration file or command-line arguments are invalid."""


# ----------------------------------------------------------------------
# Config loading and validation
# ----------------------------------------------------------------------


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _get(doc: dict, path: str, key: str, types, default=None, required=False):
    here = f"{path}.{key}"
    if key not in doc:
        if required:
            _fail(here, "missing required field")
        return default
    value = doc[key]
    if types is bool:
        if not isinstance(value, bool):
            _fail(here, f"expected a boolean, got {type(value).__name__}")
    elif types is int:
        if isinstance(value, bool) or not isinstance(value, int):
            _fail(here, f"expected an integer, got {type(value).__name__}")
    elif types is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            _fail(here, f"expected a number, got {type(value).__name__}")
        value = float(value)
    elif not isinstance(value, types):
        _fail(here, f"expected {types}, got {type(value).__name__}")
    return value


def _positive_int(doc: dict, path: str, key: str, default=None, required=False):
    value = _get(doc, path, key, int, default=default, required=required)
    if value is not None and value < 1:
        _fail(f"{path}.{key}", f"expected a positive integer, got {value}")
    return value


def load_config(path: str | Path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"$: config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"$: invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise ConfigError("$: top level must be a JSON object")
    return doc


def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


DEVICE_PRESETS = ("ideal", "benchmark", "measured")


def build_device(doc: dict, path: str = "$.device") -> tomo.SimulatedDevice:
    preset = _get(doc, path, "preset", str, default="benchmark")
    if preset not in DEVICE_PRESETS:
        _fail(f"{path}.preset", f"unknown preset {preset!r}; expected one of {DEVICE_PRESETS}")
    visibility = _get(doc, path, "visibility", float, default=None)
    leakage_db = _get(doc, path, "leakage_db", float, default=None)
    efficiency = _get(doc, path, "efficiency", float, default=None)
    reference_tap = _get(doc, path, "reference_tap", float, default=None)
    offset_deg = _get(doc, path, "reference_offset_deg", float, default=0.0)

    if preset == "ideal":
        interferometer = InterferometerConfig.ideal_device()
    elif preset == "measured":
        interferometer = InterferometerConfig(
            *measured_paths(),
            reference_tap=0.75 if reference_tap is None else reference_tap,
            visibility=1.0 if visibility is None else visibility,
        )
    else:
        interferometer = InterferometerConfig(
            *balanced_paths(
                efficiency=0.65 if efficiency is None else efficiency,
                leakage=leakage_from_db(25.0 if leakage_db is None else leakage_db),
            ),
            reference_tap=0.75 if reference_tap is None else reference_tap,
            visibility=0.99 if visibility is None else visibility,
        )
    try:
        return tomo.SimulatedDevice(
            interferometer=interferometer, reference_offset=offset_deg * DEG
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")


def build_detection(doc: dict, path: str = "$.detection") -> DetectionConfig:
    mean_photons = _get(doc, path, "mean_photons", float, default=0.6)
    efficiency = _get(doc, path, "detector_efficiency", float, default=0.5)
    background = _get(doc, path, "background_rate", float, default=1e-3)
    try:
        return DetectionConfig(
            mean_photons=mean_photons,
            detector_efficiency=efficiency,
            background_rate=background,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")


def build_schedule(doc: dict, path: str = "$.schedule") -> tomo.MeasurementSchedule:
    kind = _get(doc, path, "kind", str, default="four_point")
    blocked = _positive_int(doc, path, "blocked_trials", default=10**6)
    if kind == "four_point":
        per_point = _positive_int(doc, path, "trials_per_bin", default=500000)
        return tomo.four_point_schedule(trials_per_point=per_point, blocked_trials=blocked)
    if kind == "scan":
        per_point = _positive_int(doc, path, "trials_per_bin", default=25000)
        n_bins = _positive_int(doc, path, "n_bins", default=120)
        try:
            return tomo.standard_schedule(
                n_bins=n_bins, trials_per_bin=per_point, blocked_trials=blocked
            )
        except tomo.ScheduleError as exc:
            raise ConfigError(f"{path}.n_bins: {exc}")
    _fail(f"{path}.kind", f"expected 'four_point' or 'scan', got {kind!r}")


def parse_state(spec, path: str) -> tuple[str, PureQubit]:
    if isinstance(spec, str):
        try:
            return spec.upper(), PureQubit.named(spec)
        except KeyError as exc:
            raise ConfigError(f"{path}: {exc.args[0]}")
    if isinstance(spec, dict):
        if "name" in spec:
            return parse_state(spec["name"], f"{path}.name")
        if "bloch" in spec:
            angles = spec["bloch"]
            if not (isinstance(angles, list) and len(angles) == 2):
                _fail(f"{path}.bloch", "expected [theta_deg, phi_deg]")
            theta, phi = float(angles[0]) * DEG, float(angles[1]) * DEG
            return (
                f"bloch_{angles[0]:g}_{angles[1]:g}",
                PureQubit.from_bloch(theta, phi),
            )
        if "alpha" in spec and "beta" in spec:
            try:
                alpha = complex(spec["alpha"][0], spec["alpha"][1])
                beta = complex(spec["beta"][0], spec["beta"][1])
                return "custom", PureQubit(alpha, beta)
            except (TypeError, IndexError):
                _fail(path, "alpha/beta must be [re, im] pairs")
            except ValueError as exc:
                raise ConfigError(f"{path}: {exc}")
    _fail(path, "expected a mode name, {'name': ...}, {'bloch': ...} or {'alpha','beta'}")


def build_inputs(doc: dict) -> list[tuple[str, PureQubit]]:
    raw = doc.get("inputs", ["R", "L", "H", "V", "D", "A"])
    if not isinstance(raw, list) or not raw:
        _fail("$.inputs", "expected a non-empty list of state specs")
    return [parse_state(spec, f"$.inputs[{i}]") for i, spec in enumerate(raw)]


def resolve_seed(doc: dict, override: int | None) -> int:
    if override is not None:
        doc = dict(doc, seed=override)
    seed = _get(doc, "$", "seed", int, required=True)
    if seed < 0:
        _fail("$.seed", f"expected a non-negative integer, got {seed}")
    return seed


# ----------------------------------------------------------------------
# Artifact helpers
# ----------------------------------------------------------------------


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _state_intensity_pgm(state: PureQubit, path: Path, comment: str) -> None:
    a, b = state.weights
    sup = modes.EquatorialSuperposition(state.relative_phase, (a, b))
    geom = modes.BeamGeometry(w0=1.0, wavelength=1e-3)
    field = modes.hg_superposition(sup, geom, modes.GridSpec(n=128, half_width=3.0))
    fieldio.field_to_pgm(field, path, comment=comment)


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


def cmd_simulate(args) -> int:
    doc = load_config(args.config)
    seed = resolve_seed(doc, args.seed)
    doc_resolved = dict(doc, seed=seed)
    digest = config_hash(doc_resolved)
    stamp = {"config_sha256": digest, "master_seed": seed}
    comment = f"config_sha256={digest} master_seed={seed}"

    device = build_device(doc_resolved.get("device", {}))
    det = build_detection(doc_resolved.get("detection", {}))
    schedule = build_schedule(doc_resolved.get("schedule", {}))
    inputs = build_inputs(doc_resolved)
    physical = _get(doc_resolved, "$", "physicality_projection", bool, default=False)
    subtract = _get(doc_resolved, "$", "subtract_background", bool, default=False)

    out_dir = Path(args.out or doc_resolved.get("output_dir", "oamtomo-out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    calib = tomo.calibrate(device, det, seed=seed, trials_per_point=25000)
    _write_json(out_dir / "calibration.json", {**calib.to_json_dict(), **stamp})

    all_records = []
    summary = []
    for name, state in inputs:
        result = tomo.run_tomography(
            state,
            schedule,
            device,
            det,
            seed,
            physicality_projection=physical,
            subtract_background=subtract,
            run_label=name,
        )
        prefixed = [
            rec.__class__(
                f"{name}:{rec.configuration_id}",
                rec.port,
                rec.phase_bin_deg,
                rec.trials,
                rec.clicks,
                rec.seed,
            )
            for rec in result.records
        ]
        all_records.extend(prefixed)
        _write_json(
            out_dir / f"density_{name}.json",
            {**result.to_json_dict(), "input": name, **stamp},
        )
        _state_intensity_pgm(state, out_dir / f"intensity_{name}.pgm", comment)
        summary.append(f"{name}={result.fidelity:.4f}")

    write_count_csv(out_dir / "counts.csv", all_records, comment=comment)
    print("fidelity " + " ".join(summary))
    return 0


def cmd_tomograph(args) -> int:
    doc = load_config(args.config) if args.config else {"seed": 0}
    seed = resolve_seed(doc, args.seed)
    doc_resolved = dict(doc, seed=seed)
    if args.state:
        doc_resolved["inputs"] = [args.state]
    digest = config_hash(doc_resolved)
    stamp = {"config_sha256": digest, "master_seed": seed}

    device = build_device(doc_resolved.get("device", {}))
    det = build_detection(doc_resolved.get("detection", {}))
    schedule = build_schedule(doc_resolved.get("schedule", {}))
    inputs = build_inputs(doc_resolved)
    out_dir = Path(args.out or doc_resolved.get("output_dir", "oamtomo-out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    for name, state in inputs:
        result = tomo.run_tomography(state, schedule, device, det, seed, run_label=name)
        _write_json(
            out_dir / f"density_{name}.json",
            {**result.to_json_dict(), "input": name, **stamp},
        )
        write_count_csv(
            out_dir / f"counts_{name}.csv",
            result.records,
            comment=f"config_sha256={digest} master_seed={seed}",
        )
        print(
            f"{name}: F={result.fidelity:.4f} +- {result.fidelity_sigma:.4f} "
            f"S=({result.stokes.s1:+.3f}, {result.stokes.s2:+.3f}, {result.stokes.s3:+.3f})"
        )
    return 0


def cmd_calibrate(args) -> int:
    doc = load_config(args.config) if args.config else {"seed": 0}
    seed = resolve_seed(doc, args.seed)
    doc_resolved = dict(doc, seed=seed)
    digest = config_hash(doc_resolved)

    device = build_device(doc_resolved.get("device", {}))
    det = build_detection(doc_resolved.get("detection", {}))
    report = tomo.calibrate(
        device, det, seed=seed, trials_per_point=args.trials_per_point
    )
    doc_out = {**report.to_json_dict(), "config_sha256": digest, "master_seed": seed}
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "calibration.json", doc_out)
    if args.format == "json":
        print(json.dumps(doc_out, sort_keys=True, indent=2))
    else:
        for name, fit in report.fits.items():
            print(
                f"{name}: theta={fit.theta / DEG:7.2f} deg "
                f"(theory {report.theta_theory[name] / DEG:6.1f}) "
                f"V={fit.visibility:.3f}"
            )
        print(
            f"mean |deviation| = {report.mean_abs_deviation / DEG:.2f} deg, "
            f"cross offset = {report.cross_offset / DEG:+.2f} deg, "
            f"mean V = {report.mean_visibility:.3f}"
        )
        if report.misaligned:
            print("WARNING: visibility below threshold; device looks misaligned")
    return 0


def cmd_gen_frames(args) -> int:
    if args.count < 1:
        raise ConfigError("$.count: expected a positive integer")
    out_dir = Path(args.out or "frames")
    out_dir.mkdir(parents=True, exist_ok=True)
    geometry = phasecam.FrameGeometry(
        width=args.size, height=args.size, waist_px=args.waist
    )
    defects = phasecam.Defects(
        offset_waists=args.offset, tilt=args.tilt, lobe_imbalance=args.lobe_imbalance
    )
    seed = 0 if args.seed is None else args.seed
    manifest = {
        "count": args.count,
        "master_seed": seed,
        "geometry": {"size": args.size, "waist_px": args.waist},
        "defects": {
            "offset_waists": args.offset,
            "tilt": args.tilt,
            "lobe_imbalance": args.lobe_imbalance,
        },
    }
    digest = config_hash(manifest)
    for k in range(args.count):
        phi = k * 2.0 * math.pi / args.count
        frame = phasecam.synthesize_frame(
            phi,
            geometry,
            defects=defects,
            background=args.background,
            noise_photons=args.noise_photons,
            seed=seed + k,
        )
        stem = out_dir / f"frame_{k:04d}"
        frame.to_pgm(
            stem.with_suffix(".pgm"), comment=f"config_sha256={digest} master_seed={seed}"
        )
        _write_json(
            stem.with_suffix(".json"),
            {
                "phi_deg": phi / DEG,
                "alpha_d_deg": modes.dark_axis_angle(phi) / DEG,
                "center": list(geometry.center_xy),
                "waist_px": geometry.waist_px,
                "config_sha256": digest,
                "master_seed": seed,
            },
        )
    _write_json(out_dir / "manifest.json", {**manifest, "config_sha256": digest})
    print(f"wrote {args.count} frames to {out_dir}")
    return 0


def cmd_analyze_frames(args) -> int:
    in_dir = Path(args.frames)
    if not in_dir.is_dir():
        raise ConfigError(f"$.frames: not a directory: {in_dir}")
    paths = sorted(in_dir.glob("*.pgm"))
    if not paths:
        raise ConfigError(f"$.frames: no PGM frames in {in_dir}")
    frames = [phasecam.PhaseFrame.from_pgm(p) for p in paths]
    if args.enhance:
        frames = [phasecam.enhance(f) for f in frames]

    out_dir = Path(args.out or "analysis")
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.fit:
        ring = phasecam.fit_ring(frames)
        _write_json(out_dir / "ringfit.json", ring.to_json_dict())
    elif args.ringfit:
        ring = phasecam.RingFit.from_json_dict(json.loads(Path(args.ringfit).read_text()))
    else:
        raise ConfigError("$.ringfit: provide a ring-fit JSON or pass --fit")

    lines = ["frame_id,alpha_d_deg,phi_deg,min_bin_index,residual"]
    for path, frame in zip(paths, frames):
        ext = phasecam.extract_phase(frame, ring, n_bins=args.bins)
        lines.append(
            f"{path.stem},{ext.alpha_d / DEG:.4f},{ext.phi / DEG:.4f},"
            f"{ext.min_bin},{ext.residual:.6f}"
        )
    (out_dir / "frames.csv").write_text("\n".join(lines) + "\n")
    print(f"analyzed {len(paths)} frames -> {out_dir / 'frames.csv'}")
    return 0


def cmd_qudit(args) -> int:
    seed = 0 if args.seed is None else args.seed
    rng = spawn_rng(seed, "qudit-state")
    if args.state == "demo":
        name, state = "demo", qudit.QuditState.demo()
    elif args.state == "random":
        name, state = "random", qudit.QuditState.random(rng)
    elif args.state.startswith("basis:"):
        mode_l = int(args.state.split(":", 1)[1])
        if mode_l not in qudit.QUDIT_MODES:
            raise ConfigError(f"$.state: basis mode must be one of {qudit.QUDIT_MODES}")
        name, state = f"basis{mode_l:+d}", qudit.QuditState.basis(mode_l)
    else:
        raise ConfigError("$.state: expected 'demo', 'random' or 'basis:<l>'")

    if args.trials < 1:
        raise ConfigError("$.trials: expected a positive integer")
    network = qudit.standard_network(suppression_db=args.suppression_db)
    projectors = qudit.tomography_projectors(network)
    det = DetectionConfig(
        mean_photons=args.mean_photons,
        detector_efficiency=args.detector_efficiency,
        background_rate=args.background_rate,
        trials=args.trials,
    )
    records = qudit.simulate_projector_counts(state, projectors, det, seed=seed)
    probs = qudit.probabilities_from_counts(records, det)
    rec = qudit.reconstruct_qudit(probs, projectors, target=state)

    out_dir = Path(args.out or "oamtomo-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp = {"master_seed": seed, "input": name}
    _write_json(
        out_dir / f"qudit_density_{name}.json",
        {
            **rec.rho.to_json_dict(),
            "fidelity": rec.fidelity,
            "residual": rec.residual,
            "condition_number": rec.condition_number,
            **stamp,
        },
    )
    write_count_csv(out_dir / f"qudit_counts_{name}.csv", records, comment=f"master_seed={seed}")
    print(f"qudit {name}: F={rec.fidelity:.4f} cond={rec.condition_number:.1f}")
    return 0


def cmd_budget(args) -> int:
    stages = tomo.standard_efficiency_chain()
    if args.stages:
        try:
            values = [float(v) for v in args.stages.split(",")]
        except ValueError:
            raise ConfigError("$.stages: expected comma-separated numbers")
        stages = {f"stage_{i}": v for i, v in enumerate(values)}
    try:
        total = tomo.efficiency_budget(stages)
    except ValueError as exc:
        raise ConfigError(f"$.stages: {exc}")

    geo = phase_sensitivity_geometric(args.dl, args.dnu)
    disp = phase_sensitivity_dispersion(args.dl, args.dnu)
    presets = (
        [qudit.extension_budget(args.preset)]
        if args.preset
        else [qudit.extension_budget(k) for k in ("current", "3bs", "oam-sorter")]
    )

    if args.format == "json":
        print(
            json.dumps(
                {
                    "detection_efficiency": total,
                    "stages": stages,
                    "phase_sensitivity_deg": {"geometric": geo, "dispersion": disp},
                    "extensions": [p.to_json_dict() for p in presets],
                },
                sort_keys=True,
                indent=2,
            )
        )
        return 0
    for name, value in stages.items():
        print(f"  {name:28s} {value:5.2f}")
    print(f"detection efficiency (product): {total:.2%}")
    print(
        f"phase sensitivity at dL={args.dl:g} cm, dnu={args.dnu:g} GHz: "
        f"geometric {geo:+.3f} deg, fiber dispersion {disp:+.3f} deg"
    )
    for p in presets:
        print(
            f"  {p.device:10s} dim={p.dimension:<3d} losses={p.loss:.0%} "
            f"crosstalk suppression >{p.crosstalk_suppression_db:.0f} dB"
        )
    return 0


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------


def bundled_config(name: str) -> Path:
    return Path(__file__).parent / "data" / name


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oamtomo",
        description="Projection-based tomography of OAM photonic qubits (simulation).",
    )
    parser.add_argument("--version", action="version", version=f"oamtomo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("simulate", help="run a full experiment from a JSON config")
    p.add_argument("config", type=str, help="experiment config (JSON)")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tomograph", help="tomography of one or more input states")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--state", type=str, default=None, help="input mode name (R/L/H/V/D/A)")
    add_common(p)
    p.set_defaults(func=cmd_tomograph)

    p = sub.add_parser("calibrate", help="fringe calibration of the configured device")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--trials-per-point", type=int, default=25000)
    add_common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("gen-frames", help="synthesize phase-reference frames")
    p.add_argument("--count", type=int, default=360)
    p.add_argument("--size", type=int, default=330)
    p.add_argument("--waist", type=float, default=55.0)
    p.add_argument("--offset", type=float, default=0.0, help="beam offset in waists")
    p.add_argument("--tilt", type=float, default=0.0, help="tilt phase (rad per waist)")
    p.add_argument("--lobe-imbalance", type=float, default=0.0)
    p.add_argument("--background", type=float, default=0.0)
    p.add_argument("--noise-photons", type=float, default=None)
    add_common(p)
    p.set_defaults(func=cmd_gen_frames)

    p = sub.add_parser("analyze-frames", help="extract phases from stored PGM frames")
    p.add_argument("frames", type=str, help="directory of PGM frames")
    p.add_argument("--ringfit", type=str, default=None, help="ring-fit JSON to reuse")
    p.add_argument("--fit", action="store_true", help="fit the ring on the stack average")
    p.add_argument("--bins", type=int, default=120)
    p.add_argument("--enhance", action="store_true", help="median + midtone stretch first")
    add_common(p)
    p.set_defaults(func=cmd_analyze_frames)

    p = sub.add_parser("qudit", help="four-mode network tomography")
    p.add_argument("--state", type=str, default="demo")
    p.add_argument("--trials", type=int, default=10**5)
    p.add_argument("--suppression-db", type=float, default=qudit.NETWORK_SUPPRESSION_DB)
    p.add_argument("--mean-photons", type=float, default=5.0)
    p.add_argument("--detector-efficiency", type=float, default=0.5)
    p.add_argument("--background-rate", type=float, default=1e-3)
    add_common(p)
    p.set_defaults(func=cmd_qudit)

    p = sub.add_parser("budget", help="efficiency and phase-sensitivity calculators")
    p.add_argument("--dl", type=float, default=1.0, help="path difference (cm)")
    p.add_argument("--dnu", type=float, default=1.0, help="detuning (GHz)")
    p.add_argument("--stages", type=str, default=None, help="comma-separated efficiencies")
    p.add_argument("--preset", type=str, default=None, help="extension preset name")
    add_common(p)
    p.set_defaults(func=cmd_budget)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # simulation/runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
