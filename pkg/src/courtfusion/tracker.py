"""Top-view track maintenance.

Detections are lifted to world coordinates through the top-view calibration
and linked frame to frame by distance-gated association.  Tracks that go
unmatched too long, or that sit outside the court for too long, are retired
and reported as ``exited`` events; unmatched detections inside the court open
new tracks and report ``entered`` events.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .geometry import CameraCalibration, CourtModel, Point2, transform

ACTIVE = "active"
EXITED = "exited"
ENTERED = "entered"

TRAJECTORY_COLUMNS = ("frame_index", "track_id", "world_x_m", "world_y_m", "state")


class TrackerError(ValueError):
    pass


class NonMonotonicFrame(TrackerError):
    pass


class ZeroVariance(TrackerError):
    pass


class TrackPoint(NamedTuple):
    frame_index: int
    image: Point2
    world: Point2


@dataclass
class Track:
    track_id: int
    points: list[TrackPoint] = field(default_factory=list)
    last_seen: int = -1
    state: str = ACTIVE
    template: np.ndarray | None = field(default=None, repr=False)
    missed: int = 0
    outside: int = 0

    @property
    def position(self) -> Point2:
        return self.points[-1].world


class TrackEvent(NamedTuple):
    kind: str
    track_id: int
    frame_index: int
    position: Point2


class Assignment(NamedTuple):
    pairs: list[tuple[int, int]]
    unmatched_dets: list[int]
    unmatched_tracks: list[int]


def _distances(tracks: Sequence[Track], dets: Sequence) -> np.ndarray:
    if not tracks or not dets:
        return np.zeros((len(tracks), len(dets)))
    t = np.array([tr.position for tr in tracks], dtype=float)
    d = np.array(dets, dtype=float)
    return np.hypot(t[:, None, 0] - d[None, :, 0], t[:, None, 1] - d[None, :, 1])


def associate(tracks: Sequence[Track], dets: Sequence, gate_radius: float, cost=None) -> Assignment:
    """Globally greedy matching on ascending distance, gated by ``gate_radius``.

    Ties are broken by (track_id, detection x, detection y, detection index),
    which makes the matched set independent of the input order.  ``cost`` is
    an optional precomputed distance matrix (tracks x dets).
    """
    if gate_radius <= 0:
        raise ValueError("gate_radius must be positive")
    dist = _distances(tracks, dets) if cost is None else np.asarray(cost, dtype=float)
    candidates = [
        (dist[i, j], tracks[i].track_id, float(dets[j][0]), float(dets[j][1]), j, i)
        for i in range(len(tracks))
        for j in range(len(dets))
        if dist[i, j] <= gate_radius
    ]
    candidates.sort()
    used_t, used_d, pairs = set(), set(), []
    for _, tid, _, _, j, i in candidates:
        if i in used_t or j in used_d:
            continue
        used_t.add(i)
        used_d.add(j)
        pairs.append((tid, j))
    pairs.sort()
    return Assignment(
        pairs,
        [j for j in range(len(dets)) if j not in used_d],
        [tr.track_id for i, tr in enumerate(tracks) if i not in used_t],
    )


def associate_hungarian(tracks: Sequence[Track], dets: Sequence, gate_radius: float, cost=None) -> Assignment:
    """Minimum-total-distance matching; drop-in alternative to :func:`associate`."""
    from scipy.optimize import linear_sum_assignment

    if gate_radius <= 0:
        raise ValueError("gate_radius must be positive")
    dist = _distances(tracks, dets) if cost is None else np.asarray(cost, dtype=float)
    pairs = []
    if dist.size:
        big = gate_radius * 1e6 + 1.0
        rows, cols = linear_sum_assignment(np.where(dist <= gate_radius, dist, big))
        pairs = sorted(
            (tracks[i].track_id, j) for i, j in zip(rows, cols) if dist[i, j] <= gate_radius
        )
    used_d = {j for _, j in pairs}
    used_t = {t for t, _ in pairs}
    return Assignment(
        pairs,
        [j for j in range(len(dets)) if j not in used_d],
        [tr.track_id for tr in tracks if tr.track_id not in used_t],
    )


def ncc_score(template, candidate) -> float:
    """Zero-mean normalized cross-correlation of two equally shaped arrays."""
    t = np.asarray(template, dtype=float)
    c = np.asarray(candidate, dtype=float)
    if t.shape != c.shape:
        raise ValueError(f"shape mismatch {t.shape} vs {c.shape}")
    t = t - t.mean()
    c = c - c.mean()
    denom = math.sqrt(float(np.sum(t * t)) * float(np.sum(c * c)))
    if denom == 0.0:
        raise ZeroVariance("template or candidate has zero variance")
    return max(-1.0, min(1.0, float(np.sum(t * c)) / denom))


@dataclass
class TrackerState:
    """Mutable tracker state; drive it with :func:`step`, one writer per match."""

    calibration: CameraCalibration
    court: CourtModel = field(default_factory=CourtModel)
    gate_radius: float = 1.5
    max_missed: int = 5
    min_ncc: float | None = None
    associate_fn: Callable[..., Assignment] = associate
    tracks: list[Track] = field(default_factory=list)
    next_track_id: int = 0
    last_frame: int | None = None
    # track_id -> detection index matched (or spawned) in the latest frame
    last_assignment: dict[int, int] = field(default_factory=dict)

    def active_tracks(self) -> list[Track]:
        return [t for t in self.tracks if t.state == ACTIVE]

    def track(self, track_id: int) -> Track:
        for t in self.tracks:
            if t.track_id == track_id:
                return t
        raise KeyError(track_id)


def _appearance_cost(state: TrackerState, active: list[Track], dets, world) -> np.ndarray:
    dist = _distances(active, world)
    if state.min_ncc is None:
        return dist
    for i, tr in enumerate(active):
        for j, d in enumerate(dets):
            tmpl = getattr(d, "template", None)
            if tr.template is None or tmpl is None:
                continue
            try:
                ok = ncc_score(tr.template, tmpl) >= state.min_ncc
            except (ZeroVariance, ValueError):
                ok = True
            if not ok:
                dist[i, j] = math.inf
    return dist


def step(state: TrackerState, frame_index: int, dets_topview: Sequence) -> tuple[TrackerState, list[TrackEvent]]:
    """Advance the tracker by one frame.

    ``dets_topview`` holds Detection objects (their foot points are used) or
    plain image points.  Returns the same, updated state and the frame's
    events, exits listed before entries.
    """
    if state.last_frame is not None and frame_index <= state.last_frame:
        raise NonMonotonicFrame(f"frame {frame_index} after frame {state.last_frame}")
    state.last_frame = frame_index
    image_pts = [Point2(*(d.foot_point if hasattr(d, "foot_point") else d)) for d in dets_topview]
    world = [transform(state.calibration.to_world, p) for p in image_pts]

    active = state.active_tracks()
    cost = _appearance_cost(state, active, dets_topview, world)
    result = state.associate_fn(active, world, state.gate_radius, cost=cost)
    by_id = {t.track_id: t for t in active}
    state.last_assignment = {}

    for tid, j in result.pairs:
        tr = by_id[tid]
        tr.points.append(TrackPoint(frame_index, image_pts[j], world[j]))
        tr.last_seen = frame_index
        tr.missed = 0
        tmpl = getattr(dets_topview[j], "template", None)
        if tmpl is not None:
            tr.template = tmpl
        state.last_assignment[tid] = j
    for tid in result.unmatched_tracks:
        by_id[tid].missed += 1

    events: list[TrackEvent] = []
    for tr in active:
        if state.court.contains(tr.position, state.court.boundary_margin):
            tr.outside = 0
        else:
            tr.outside += 1
        if tr.missed > state.max_missed or tr.outside >= max(state.max_missed, 1):
            tr.state = EXITED
            state.last_assignment.pop(tr.track_id, None)
            events.append(TrackEvent(EXITED, tr.track_id, frame_index, tr.position))

    for j in result.unmatched_dets:
        if not state.court.contains(world[j]):
            continue
        tr = Track(state.next_track_id, [TrackPoint(frame_index, image_pts[j], world[j])], frame_index)
        tr.template = getattr(dets_topview[j], "template", None)
        state.next_track_id += 1
        state.tracks.append(tr)
        state.last_assignment[tr.track_id] = j
        events.append(TrackEvent(ENTERED, tr.track_id, frame_index, world[j]))
    return state, events


def trajectory_world(track: Track) -> list[tuple[int, Point2]]:
    return [(p.frame_index, p.world) for p in track.points]


def trajectory_rows(state: TrackerState, frame_index: int, events: Sequence[TrackEvent]) -> list[tuple]:
    """CSV rows for one frame: every active track, plus tracks that exited this frame."""
    exited = {e.track_id for e in events if e.kind == EXITED}
    rows = []
    for tr in state.tracks:
        if tr.state == ACTIVE or tr.track_id in exited:
            x, y = tr.position
            rows.append((frame_index, tr.track_id, x, y, tr.state))
    return rows


def write_trajectory_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for frame, tid, x, y, st in rows:
            w.writerow([frame, tid, repr(float(x)), repr(float(y)), st])


def read_trajectory_csv(path) -> list[tuple[int, int, float, float, str]]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            return []
        missing = set(TRAJECTORY_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise ValueError(f"trajectory CSV lacks columns {sorted(missing)}")
        rows = []
        for r in reader:
            x, y = float(r["world_x_m"]), float(r["world_y_m"])
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("non-finite coordinate in trajectory CSV")
            rows.append((int(r["frame_index"]), int(r["track_id"]), x, y, r["state"]))
        return rows
