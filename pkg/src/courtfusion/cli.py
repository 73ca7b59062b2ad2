"""Command-line entry point: ``courtfusion {calibrate,simulate,track,evaluate,plot}``.

Settings precedence: command-line flags, then the JSON config file named by
``--config`` or ``$COURTFUSION_CONFIG``, then the scenario file, then the
built-in defaults.

Exit codes: 0 success, 1 ``--strict`` evaluation failure, 2 input error,
3 pipeline error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .geometry import DegenerateConfiguration, GeometryError, calibrate, save_calibration
from .plot import court_svg, polylines_from_rows
from .reid import ReidError, save_registry, write_binding_log
from .sim import (
    RNG_NAME,
    PipelineConfig,
    ScenarioError,
    aggregate,
    load_scenario,
    run_pipeline,
    simulate,
    SimFrame,
)
from .tracker import TrackerError, read_trajectory_csv, write_trajectory_csv

EXIT_OK, EXIT_STRICT, EXIT_INPUT, EXIT_PIPELINE = 0, 1, 2, 3
CONFIG_ENV = "COURTFUSION_CONFIG"
CONFIG_KEYS = {
    "gate_radius", "max_missed", "match_threshold", "feature_update",
    "pairing_gate", "noise_sigma", "seed",
}


class InputError(Exception):
    pass


class PipelineFailure(Exception):
    pass


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def load_config(path) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise InputError(f"unknown config keys {sorted(unknown)}")
    return cfg


def resolve(args) -> tuple:
    """Merge config file and flags into (scenario, PipelineConfig, seed)."""
    cfg = load_config(getattr(args, "config", None))
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    try:
        spec = load_scenario(args.scenario)
    except OSError as exc:
        raise InputError(str(exc)) from exc
    if cfg.get("gate_radius", 1.0) <= 0:
        raise InputError("gate_radius must be positive")
    if not -1.0 < cfg.get("match_threshold", 0.9) < 1.0:
        raise InputError("match_threshold must lie in (-1, 1)")
    if cfg.get("noise_sigma", 0.0) < 0:
        raise InputError("noise_sigma must be nonnegative")
    if cfg.get("max_missed", 0) < 0:
        raise InputError("max_missed must be nonnegative")
    spec = spec.with_overrides(noise_sigma=cfg.get("noise_sigma"))
    pcfg = PipelineConfig(
        **{k: cfg[k] for k in ("gate_radius", "max_missed", "match_threshold", "feature_update", "pairing_gate") if k in cfg},
        rear_only=getattr(args, "rear_only", False),
    )
    seed = int(cfg.get("seed", spec.seed))
    return spec, pcfg, seed


def cmd_calibrate(args) -> int:
    try:
        d = json.loads(Path(args.corners).read_text())
        image, world = d["image_corners"], d["world_corners"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"bad corners file {args.corners}: {exc!r}") from exc
    if len(image) != 4 or len(world) != 4:
        raise InputError("corners file needs four image_corners and four world_corners")
    try:
        cal = calibrate(image, world)
    except DegenerateConfiguration as exc:
        which, triple = exc.triple if exc.triple else ("corner", None)
        kind = "image" if which == "source" else "world"
        raise InputError(f"degenerate calibration: {kind} corners {triple} are collinear") from exc
    except GeometryError as exc:
        raise InputError(f"calibration failed: {exc}") from exc
    _emit(json.dumps(cal.to_dict(), indent=2) + "\n", args.out)
    print(f"max corner reprojection error: {cal.reprojection_error():.3e}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec, _, seed = resolve(args)
    lines = [json.dumps({"scenario": spec.name, "seed": seed, "rng": RNG_NAME, "n_frames": spec.n_frames,
                         "noise_sigma": spec.noise_sigma}, sort_keys=True)]
    lines += [json.dumps(fr.to_dict(), sort_keys=True) for fr in simulate(spec, seed)]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _read_frames(path):
    try:
        with open(path) as f:
            header = json.loads(f.readline())
            return header, [SimFrame.from_dict(json.loads(line)) for line in f if line.strip()]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad frames file {path}: {exc!r}") from exc


def cmd_track(args) -> int:
    spec, pcfg, seed = resolve(args)
    frames = None
    if args.frames:
        _, frames = _read_frames(args.frames)
    res = run_pipeline(spec, pcfg, seed=seed, frames=frames)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(res.trajectory_rows, out / "trajectories.csv")
    write_binding_log(res.binding_log, out / "bindings.csv")
    save_registry(res.registry, out / "registry.json", with_features=args.with_features)
    print(f"wrote {out / 'trajectories.csv'}, {out / 'bindings.csv'}, {out / 'registry.json'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    spec, pcfg, seed = resolve(args)
    if args.seeds < 1:
        raise InputError("--seeds must be >= 1")
    seeds = [seed + k for k in range(args.seeds)]
    reports = [run_pipeline(spec, pcfg, seed=s).report for s in seeds]
    total = aggregate(reports)
    doc = {
        "scenario": spec.name,
        "rng": RNG_NAME,
        "seeds": seeds,
        "config": {**asdict(pcfg), "noise_sigma": spec.noise_sigma},
        "report": total.to_dict(),
    }
    if len(seeds) > 1:
        doc["per_seed"] = [r.to_dict() for r in reports]
    _emit(_dump(doc), args.out)
    if args.strict and total.id_switches != 0:
        return EXIT_STRICT
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        rows = read_trajectory_csv(args.trajectories)
        bindings = None
        if args.bindings:
            with open(args.bindings) as f:
                next(f, None)
                bindings = {}
                for line in f:
                    if line.strip():
                        frame, tid, pid = (int(v) for v in line.split(","))
                        bindings[(frame, tid)] = pid
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"malformed trajectory input: {exc}") from exc
    svg = court_svg(polylines_from_rows(rows, bindings), title=Path(args.trajectories).name)
    _emit(svg, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="courtfusion", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_opts(sp):
        sp.add_argument("--scenario", required=True, help="scenario JSON path or bundled name")
        sp.add_argument("--seed", type=_u64)
        sp.add_argument("--config", help=f"JSON config file (default ${CONFIG_ENV})")
        sp.add_argument("--gate-radius", dest="gate_radius", type=float)
        sp.add_argument("--match-threshold", dest="match_threshold", type=float)
        sp.add_argument("--noise-sigma", dest="noise_sigma", type=float)
        sp.add_argument("--max-missed", dest="max_missed", type=int)
        sp.add_argument("--rear-only", action="store_true", help="ablation: ignore the top view")

    sp = sub.add_parser("calibrate", help="four-corner calibration file")
    sp.add_argument("--corners", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("simulate", help="render scenario frames as JSON lines")
    scenario_opts(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("track", help="run tracking and re-identification")
    scenario_opts(sp)
    sp.add_argument("--frames", help="frames file from `simulate` (default: render on the fly)")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--with-features", action="store_true")
    sp.set_defaults(func=cmd_track)

    sp = sub.add_parser("evaluate", help="score the pipeline against simulated truth")
    scenario_opts(sp)
    sp.add_argument("--seeds", type=int, default=1)
    sp.add_argument("--strict", action="store_true", help="exit 1 unless id_switches == 0")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("plot", help="SVG court diagram from a trajectory CSV")
    sp.add_argument("--trajectories", required=True)
    sp.add_argument("--bindings", help="bindings CSV to color by player id instead of track id")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ReidError, TrackerError, GeometryError, PipelineFailure) as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
