"""Player registry: login/logout bookkeeping and appearance re-identification.

Each frame, tracks that left the top view log their player out; tracks that
entered are paired with a rear-view observation, whose appearance feature is
compared against logged-out players.  A close enough match logs the old
player back in, otherwise a fresh player id is issued.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .features import cosine_similarity
from .geometry import Point2
from .tracker import ENTERED, EXITED, TrackEvent

LOGIN = "login"
LOGOUT = "logout"


class ReidError(ValueError):
    pass


class UnknownTrack(ReidError):
    pass


class TrackAlreadyBound(ReidError):
    pass


class NoObservationForEntry(ReidError):
    pass


@dataclass
class PlayerRecord:
    id: int
    id_state: str
    feature: np.ndarray = field(repr=False)
    position: Point2
    track_id: int | None = None


@dataclass(frozen=True, eq=False)
class RearViewObservation:
    feature: np.ndarray
    image_point: Point2
    world_point: Point2

    def __post_init__(self):
        f = np.asarray(self.feature, dtype=float).ravel()
        if not np.any(f):
            raise ReidError("observation feature is the zero vector")
        f.setflags(write=False)
        object.__setattr__(self, "feature", f)
        object.__setattr__(self, "image_point", Point2(*self.image_point))
        object.__setattr__(self, "world_point", Point2(*self.world_point))


class PlayerSnapshot(NamedTuple):
    id: int
    id_state: str
    position: Point2


def pair_entries(events: Sequence[TrackEvent], observations: Sequence[RearViewObservation], gate: float):
    """Pair entry events with rear observations, nearest world points first.

    Returns ``{track_id: observation index}``; raises NoObservationForEntry
    when an entry has no unused observation within ``gate`` meters.
    """
    cand = []
    for e in events:
        for j, o in enumerate(observations):
            d = float(np.hypot(e.position[0] - o.world_point[0], e.position[1] - o.world_point[1]))
            if d <= gate:
                cand.append((d, e.track_id, j))
    cand.sort()
    pairs, used = {}, set()
    for _, tid, j in cand:
        if tid in pairs or j in used:
            continue
        pairs[tid] = j
        used.add(j)
    for e in events:
        if e.track_id not in pairs:
            raise NoObservationForEntry(
                f"no rear-view observation within {gate} m of track {e.track_id} at {tuple(e.position)}"
            )
    return pairs


@dataclass
class PlayerRegistry:
    """The list of known players and their current track bindings."""

    match_threshold: float = 0.9
    feature_update: float = 0.3
    pairing_gate: float = 2.0
    records: list[PlayerRecord] = field(default_factory=list)
    next_id: int = 0

    def __post_init__(self):
        if not -1.0 < self.match_threshold < 1.0:
            raise ValueError("match_threshold must lie in (-1, 1)")

    def __len__(self):
        return len(self.records)

    def record(self, player_id: int) -> PlayerRecord:
        for r in self.records:
            if r.id == player_id:
                return r
        raise KeyError(player_id)

    def bound(self, track_id) -> PlayerRecord | None:
        for r in self.records:
            if r.id_state == LOGIN and r.track_id == track_id:
                return r
        return None

    def bindings(self) -> dict[int, int]:
        """Current ``track_id -> player id`` map."""
        return {r.track_id: r.id for r in self.records if r.id_state == LOGIN}

    def handle_exit(self, track_id) -> "PlayerRegistry":
        r = self.bound(track_id)
        if r is None:
            raise UnknownTrack(f"no logged-in player on track {track_id}")
        r.id_state = LOGOUT
        r.track_id = None
        return self

    def match_feature(self, feature) -> int | None:
        best_id, best_sim = None, None
        for r in self.records:
            if r.id_state != LOGOUT:
                continue
            sim = cosine_similarity(feature, r.feature)
            if best_sim is None or sim > best_sim or (sim == best_sim and r.id < best_id):
                best_id, best_sim = r.id, sim
        if best_sim is not None and best_sim >= self.match_threshold:
            return best_id
        return None

    def handle_enter(self, track_id, obs: RearViewObservation) -> tuple["PlayerRegistry", int]:
        if self.bound(track_id) is not None:
            raise TrackAlreadyBound(f"track {track_id} already bound")
        feature = np.asarray(obs.feature, dtype=float)
        m = self.match_feature(feature)
        if m is not None:
            r = self.record(m)
            a = self.feature_update
            r.feature = (1.0 - a) * r.feature + a * feature
            r.id_state = LOGIN
            r.track_id = track_id
            r.position = obs.world_point
            return self, m
        new = PlayerRecord(self.next_id, LOGIN, feature.copy(), obs.world_point, track_id)
        self.records.append(new)
        self.next_id += 1
        return self, new.id

    def update_positions(self, track_positions) -> None:
        for r in self.records:
            if r.id_state == LOGIN and r.track_id in track_positions:
                r.position = Point2(*track_positions[r.track_id])

    def process_frame(
        self,
        events: Sequence[TrackEvent],
        rear_obs: Sequence[RearViewObservation],
        track_positions=None,
    ) -> tuple["PlayerRegistry", list[tuple[int, int]]]:
        """One iteration of the login/logout loop for a frame.

        Exits are applied before entries so that a player leaving and coming
        back in the same frame finds their own record logged out.  Returns the
        registry and the sorted ``(track_id, player_id)`` bindings.
        """
        for e in events:
            if e.kind == EXITED:
                r = self.bound(e.track_id)
                if r is not None:
                    r.position = Point2(*e.position)
                self.handle_exit(e.track_id)
        entries = [e for e in events if e.kind == ENTERED]
        if entries:
            pairs = pair_entries(entries, rear_obs, self.pairing_gate)
            pending = list(entries)
            while pending:
                e = pending.pop(0)
                self.handle_enter(e.track_id, rear_obs[pairs[e.track_id]])
        if track_positions:
            self.update_positions(track_positions)
        return self, sorted(self.bindings().items())

    def positions_report(self) -> list[PlayerSnapshot]:
        return [
            PlayerSnapshot(r.id, r.id_state, Point2(*r.position))
            for r in sorted(self.records, key=lambda r: r.id)
        ]

    def to_json(self, with_features: bool = False) -> str:
        out = []
        for r in sorted(self.records, key=lambda r: r.id):
            d = {"id": r.id, "id_state": r.id_state, "position": [r.position.x, r.position.y]}
            if with_features:
                d["feature"] = [float(v) for v in r.feature]
            out.append(d)
        return json.dumps(out, indent=2) + "\n"


def write_binding_log(rows, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("frame_index", "track_id", "player_id"))
        w.writerows(rows)


def save_registry(reg: PlayerRegistry, path, with_features: bool = False) -> None:
    Path(path).write_text(reg.to_json(with_features))
