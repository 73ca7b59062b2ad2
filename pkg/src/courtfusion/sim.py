"""Synthetic two-camera match simulator and end-to-end evaluation harness.

Scripted world trajectories are projected into a top-view and a rear-view
camera.  The rear view merges players that overlap in its image (the
single-camera failure mode); the overhead view never does.  Frames are then
run through the tracker and the player registry and scored against truth.

Random numbers come from numpy's PCG64 bit generator seeded with the
scenario seed; draws happen in scenario player order, frame by frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import tracker as trk
from .features import Detection
from .geometry import CameraCalibration, CourtModel, Point2, calibrate, transform
from .reid import PlayerRegistry, RearViewObservation

RNG_NAME = "numpy.random.PCG64"
BUNDLED = ("crossing", "exit_return", "same_side")

# Nominal box sizes (pixels) for synthetic detections; only foot points matter.
TOP_BOX = (24.0, 24.0)
REAR_BOX = (40.0, 90.0)


class ScenarioError(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class MotionScript:
    player_name: str
    waypoints: tuple[tuple[float, Point2], ...]
    feature_basis: np.ndarray = field(repr=False)
    team: str | None = None

    def __post_init__(self):
        wps = tuple((float(t), Point2(float(p[0]), float(p[1]))) for t, p in self.waypoints)
        if not wps:
            raise ScenarioError(f"player {self.player_name!r} has no waypoints")
        if any(b[0] <= a[0] for a, b in zip(wps, wps[1:])):
            raise ScenarioError(f"waypoint times of {self.player_name!r} must increase strictly")
        basis = np.asarray(self.feature_basis, dtype=float).ravel()
        if not np.any(basis):
            raise ScenarioError(f"feature_basis of {self.player_name!r} is zero")
        basis.setflags(write=False)
        object.__setattr__(self, "waypoints", wps)
        object.__setattr__(self, "feature_basis", basis)


class ExitEvent(NamedTuple):
    player: str
    t_exit: float
    t_return: float


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    name: str
    court: CourtModel
    top_cal: CameraCalibration
    rear_cal: CameraCalibration
    players: tuple[MotionScript, ...]
    fps: float = 30.0
    duration: float = 3.0
    noise_sigma: float = 0.05
    merge_distance: float = 100.0
    exit_events: tuple[ExitEvent, ...] = ()
    seed: int = 0
    feature_similarity: float = 0.98

    def __post_init__(self):
        if not self.fps > 0 or not self.duration > 0:
            raise ScenarioError("fps and duration must be positive")
        if self.noise_sigma < 0 or self.merge_distance < 0:
            raise ScenarioError("noise_sigma and merge_distance must be nonnegative")
        if not 0.0 < self.feature_similarity <= 1.0:
            raise ScenarioError("feature_similarity must lie in (0, 1]")
        names = [p.player_name for p in self.players]
        if len(set(names)) != len(names):
            raise ScenarioError("player names must be unique")
        dims = {len(p.feature_basis) for p in self.players}
        if len(dims) > 1:
            raise ScenarioError("all feature bases must have the same length")
        for e in self.exit_events:
            if e.player not in names:
                raise ScenarioError(f"exit event for unknown player {e.player!r}")
            if not e.t_return > e.t_exit:
                raise ScenarioError("t_return must come after t_exit")
        for p in self.players:
            for t, pt in p.waypoints:
                if not self.court.contains(pt) and not self.in_exit_window(p.player_name, t, True):
                    raise ScenarioError(
                        f"waypoint {tuple(pt)} of {p.player_name!r} at t={t} lies outside the court"
                    )

    @property
    def n_frames(self) -> int:
        return int(round(self.fps * self.duration))

    def in_exit_window(self, name: str, t: float, inclusive: bool = False) -> bool:
        for e in self.exit_events:
            if e.player != name:
                continue
            if e.t_exit <= t < e.t_return or (inclusive and t == e.t_return):
                return True
        return False

    def with_overrides(self, **kw) -> "ScenarioSpec":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


class TruthEntry(NamedTuple):
    player_name: str
    world: Point2
    visible: bool


@dataclass(eq=False)
class SimFrame:
    frame_index: int
    top_detections: list[Detection]
    top_sources: list[tuple[str, ...]]
    rear_observations: list[RearViewObservation]
    rear_sources: list[tuple[str, ...]]
    truth: list[TruthEntry]

    def to_dict(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "top": [
                {"foot": list(d.foot_point), "box": list(d.box), "sources": list(s)}
                for d, s in zip(self.top_detections, self.top_sources)
            ],
            "rear": [
                {
                    "image_point": list(o.image_point),
                    "world_point": list(o.world_point),
                    "feature": o.feature.tolist(),
                    "sources": list(s),
                }
                for o, s in zip(self.rear_observations, self.rear_sources)
            ],
            "truth": [
                {"player": t.player_name, "world": list(t.world), "visible": t.visible}
                for t in self.truth
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimFrame":
        return cls(
            d["frame_index"],
            [Detection(tuple(r["box"])) for r in d["top"]],
            [tuple(r["sources"]) for r in d["top"]],
            [RearViewObservation(r["feature"], r["image_point"], r["world_point"]) for r in d["rear"]],
            [tuple(r["sources"]) for r in d["rear"]],
            [TruthEntry(t["player"], Point2(*t["world"]), t["visible"]) for t in d["truth"]],
        )


@dataclass
class EvalReport:
    id_switches: int = 0
    reid_failures: int = 0
    trajectory_rmse: float = 0.0
    frames_fully_correct: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


def interpolate(script: MotionScript, t: float) -> Point2:
    """Piecewise-linear position at time ``t``, clamped to the first/last waypoint."""
    wps = script.waypoints
    if t <= wps[0][0]:
        return wps[0][1]
    if t >= wps[-1][0]:
        return wps[-1][1]
    for (t0, p0), (t1, p1) in zip(wps, wps[1:]):
        if t0 <= t <= t1:
            s = (t - t0) / (t1 - t0)
            return Point2(p0.x + s * (p1.x - p0.x), p0.y + s * (p1.y - p0.y))
    raise AssertionError("unreachable")


def feature_noise_scale(basis: np.ndarray, similarity: float) -> float:
    # E[cos(b, b + n)] ~ |b| / sqrt(|b|^2 + D s^2) for n ~ N(0, s^2 I)
    b = float(np.linalg.norm(basis))
    return b * math.sqrt((1.0 / similarity**2 - 1.0) / len(basis))


def merge_rear(points: Sequence[Point2], merge_distance: float) -> list[tuple[int, ...]]:
    """Group indices of rear-view points that occlude each other.

    Pairs closer than ``merge_distance`` pixels are merged, closest first;
    each point joins at most one pair.  Groups come back sorted.
    """
    cand = []
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d = math.hypot(points[i].x - points[j].x, points[i].y - points[j].y)
            if d < merge_distance:
                cand.append((d, i, j))
    cand.sort()
    used, groups = set(), []
    for _, i, j in cand:
        if i in used or j in used:
            continue
        used.update((i, j))
        groups.append((i, j))
    groups += [(i,) for i in range(len(points)) if i not in used]
    return sorted(groups)


def render_frame(spec: ScenarioSpec, frame_index: int, rng: np.random.Generator) -> SimFrame:
    if not 0 <= frame_index < spec.n_frames:
        raise ScenarioError(f"frame {frame_index} outside [0, {spec.n_frames})")
    t = frame_index / spec.fps
    truth, visible = [], []
    for p in spec.players:
        w = interpolate(p, t)
        vis = not spec.in_exit_window(p.player_name, t)
        truth.append(TruthEntry(p.player_name, w, vis))
        if vis:
            visible.append((p, w))

    sigma = spec.noise_sigma
    # draw noise by player name so the listing order of players is irrelevant
    noise = {}
    for p, _ in sorted(visible, key=lambda pw: pw[0].player_name):
        n_top = rng.normal(0.0, sigma, 2) if sigma > 0 else np.zeros(2)
        n_rear = rng.normal(0.0, sigma, 2) if sigma > 0 else np.zeros(2)
        s = feature_noise_scale(p.feature_basis, spec.feature_similarity)
        noise[p.player_name] = (n_top, n_rear, rng.normal(0.0, 1.0, len(p.feature_basis)) * s)
    top_dets, top_src, rear_px, rear_feat = [], [], [], []
    for p, w in visible:
        n_top, n_rear, n_feat = noise[p.player_name]
        top_px = transform(spec.top_cal.from_world, (w.x + n_top[0], w.y + n_top[1]))
        top_dets.append(Detection.at_foot(top_px, *TOP_BOX))
        top_src.append((p.player_name,))
        rear_px.append(transform(spec.rear_cal.from_world, (w.x + n_rear[0], w.y + n_rear[1])))
        rear_feat.append(p.feature_basis + n_feat)

    rear_obs, rear_src = [], []
    for group in merge_rear(rear_px, spec.merge_distance):
        pts = [rear_px[i] for i in group]
        img = Point2(sum(q.x for q in pts) / len(pts), sum(q.y for q in pts) / len(pts))
        # the player lower in the image is nearer the camera and occludes the other
        front = max(group, key=lambda i: (rear_px[i].y, visible[i][0].player_name))
        rear_obs.append(
            RearViewObservation(rear_feat[front], img, transform(spec.rear_cal.to_world, img))
        )
        rear_src.append(tuple(sorted(visible[i][0].player_name for i in group)))
    return SimFrame(frame_index, top_dets, top_src, rear_obs, rear_src, truth)


def simulate(spec: ScenarioSpec, seed: int | None = None):
    """Yield every frame of the scenario."""
    rng = make_rng(spec.seed if seed is None else seed)
    for k in range(spec.n_frames):
        yield render_frame(spec, k, rng)


@dataclass(frozen=True)
class PipelineConfig:
    gate_radius: float = 1.5
    max_missed: int = 5
    match_threshold: float = 0.9
    feature_update: float = 0.3
    pairing_gate: float = 2.0
    rear_only: bool = False


@dataclass
class PipelineResult:
    trajectory_rows: list[tuple]
    binding_log: list[tuple[int, int, int]]
    report: EvalReport
    registry: PlayerRegistry
    tracker: trk.TrackerState
    max_registry_size: int = 0
    player_ids: dict[str, list[int | None]] = field(default_factory=dict)


class _Scorer:
    def __init__(self, names):
        self.stable: dict[str, int] = {}
        self.previous: dict[str, int] = {}
        self.history = {n: [] for n in names}
        self.switches = 0
        self.failures = 0
        self.sq_errors: list[float] = []
        self.correct_frames = 0
        self.frames = 0

    def entries(self, events, assignment, sources, bindings):
        for e in events:
            if e.kind != trk.ENTERED:
                continue
            pid = bindings.get(e.track_id)
            for name in sources[assignment[e.track_id]]:
                if name in self.stable and pid != self.stable[name]:
                    self.failures += 1

    def frame(self, truth, assignment, sources, bindings, state):
        det_track = {j: tid for tid, j in assignment.items()}
        ok = True
        for entry in truth:
            pid = None
            if entry.visible:
                for j, src in enumerate(sources):
                    if entry.player_name in src and j in det_track:
                        tid = det_track[j]
                        pid = bindings.get(tid)
                        tw = state.track(tid).position
                        self.sq_errors.append((tw.x - entry.world.x) ** 2 + (tw.y - entry.world.y) ** 2)
                        break
            self.history[entry.player_name].append(pid)
            if not entry.visible:
                continue
            if pid is None:
                ok = False
                continue
            name = entry.player_name
            self.stable.setdefault(name, pid)
            if name in self.previous and self.previous[name] != pid:
                self.switches += 1
            self.previous[name] = pid
            if pid != self.stable[name]:
                ok = False
        self.frames += 1
        self.correct_frames += ok

    def report(self) -> EvalReport:
        rmse = math.sqrt(sum(self.sq_errors) / len(self.sq_errors)) if self.sq_errors else 0.0
        frac = self.correct_frames / self.frames if self.frames else 1.0
        return EvalReport(self.switches, self.failures, rmse, frac)


def run_pipeline(spec: ScenarioSpec, config: PipelineConfig | None = None, seed: int | None = None, frames=None) -> PipelineResult:
    """Feed simulated frames through tracker and registry; score against truth.

    With ``config.rear_only`` the top view is ignored and the rear-view
    observations drive the tracker through the rear calibration.
    """
    config = config or PipelineConfig()
    cal = spec.rear_cal if config.rear_only else spec.top_cal
    state = trk.TrackerState(cal, spec.court, config.gate_radius, config.max_missed)
    reg = PlayerRegistry(config.match_threshold, config.feature_update, config.pairing_gate)
    scorer = _Scorer([p.player_name for p in spec.players])
    rows, log, max_size = [], [], 0
    for fr in frames if frames is not None else simulate(spec, seed):
        if config.rear_only:
            dets = [Detection.at_foot(o.image_point, *REAR_BOX) for o in fr.rear_observations]
            sources = fr.rear_sources
        else:
            dets, sources = fr.top_detections, fr.top_sources
        state, events = trk.step(state, fr.frame_index, dets)
        positions = {t.track_id: t.position for t in state.active_tracks()}
        reg, binding = reg.process_frame(events, fr.rear_observations, positions)
        bindings = dict(binding)
        scorer.entries(events, state.last_assignment, sources, bindings)
        scorer.frame(fr.truth, state.last_assignment, sources, bindings, state)
        rows.extend(trk.trajectory_rows(state, fr.frame_index, events))
        log.extend((fr.frame_index, tid, pid) for tid, pid in binding)
        max_size = max(max_size, len(reg))
    return PipelineResult(rows, log, scorer.report(), reg, state, max_size, scorer.history)


def aggregate(reports: Sequence[EvalReport]) -> EvalReport:
    """Totals of counts, frame-weighted means of the rest (equal weights per run)."""
    if not reports:
        return EvalReport()
    n = len(reports)
    return EvalReport(
        sum(r.id_switches for r in reports),
        sum(r.reid_failures for r in reports),
        math.sqrt(sum(r.trajectory_rmse**2 for r in reports) / n),
        sum(r.frames_fully_correct for r in reports) / n,
    )


def same_side_frames(rows, bindings_by_frame, team_of: dict[int, str], court: CourtModel) -> int:
    """Count frames in which both members of some team stand on the same lateral half."""
    by_frame: dict[int, dict[str, list[float]]] = {}
    for frame, tid, x, _y, state in rows:
        if state != trk.ACTIVE:
            continue
        pid = bindings_by_frame.get((frame, tid))
        team = team_of.get(pid) if pid is not None else None
        if team is None:
            continue
        by_frame.setdefault(frame, {}).setdefault(team, []).append(x)
    half = court.width / 2.0
    count = 0
    for teams in by_frame.values():
        if any(len(xs) >= 2 and len({x < half for x in xs}) == 1 for xs in teams.values()):
            count += 1
    return count


# -- scenario files ---------------------------------------------------------


def _cal_dict(cal: CameraCalibration) -> dict:
    return {"image_corners": [list(p) for p in cal.image_corners],
            "world_corners": [list(p) for p in cal.world_corners]}


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "name": spec.name,
        "court": spec.court.to_dict(),
        "top_calibration": _cal_dict(spec.top_cal),
        "rear_calibration": _cal_dict(spec.rear_cal),
        "fps": spec.fps,
        "duration": spec.duration,
        "noise_sigma": spec.noise_sigma,
        "merge_distance": spec.merge_distance,
        "feature_similarity": spec.feature_similarity,
        "seed": spec.seed,
        "players": [
            {
                "name": p.player_name,
                **({"team": p.team} if p.team is not None else {}),
                "waypoints": [[t, pt.x, pt.y] for t, pt in p.waypoints],
                "feature_basis": p.feature_basis.tolist(),
            }
            for p in spec.players
        ],
        "exit_events": [e._asdict() for e in spec.exit_events],
    }


def scenario_from_dict(d: dict) -> ScenarioSpec:
    try:
        court = CourtModel(**d.get("court", {}))

        def cal(key):
            c = d[key]
            return calibrate(c["image_corners"], c.get("world_corners", court.corners))

        players = tuple(
            MotionScript(
                p["name"],
                tuple((w[0], (w[1], w[2])) for w in p["waypoints"]),
                p["feature_basis"],
                p.get("team"),
            )
            for p in d["players"]
        )
        exits = tuple(
            ExitEvent(e["player"], float(e["t_exit"]), float(e["t_return"]))
            for e in d.get("exit_events", [])
        )
        return ScenarioSpec(
            name=str(d.get("name", "scenario")),
            court=court,
            top_cal=cal("top_calibration"),
            rear_cal=cal("rear_calibration"),
            players=players,
            fps=float(d.get("fps", 30.0)),
            duration=float(d["duration"]),
            noise_sigma=float(d.get("noise_sigma", 0.05)),
            merge_distance=float(d.get("merge_distance", 100.0)),
            exit_events=exits,
            seed=int(d.get("seed", 0)),
            feature_similarity=float(d.get("feature_similarity", 0.98)),
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario: {exc!r}") from exc


def load_scenario(path_or_name) -> ScenarioSpec:
    """Load a scenario JSON file, or a bundled scenario by name."""
    path = Path(path_or_name)
    if path.is_file():
        text = path.read_text()
    else:
        stem = path.name[:-5] if path.name.endswith(".json") else path.name
        if stem not in BUNDLED:
            raise ScenarioError(f"no scenario file or bundled scenario named {str(path_or_name)!r}")
        text = resources.files("courtfusion.scenarios").joinpath(f"{stem}.json").read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    return scenario_from_dict(d)


def save_scenario(spec: ScenarioSpec, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(spec), indent=2) + "\n")
