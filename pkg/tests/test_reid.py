import itertools
import json
import math

import numpy as np
import pytest

from courtfusion.geometry import Point2
from courtfusion.reid import (
    LOGIN,
    LOGOUT,
    NoObservationForEntry,
    PlayerRegistry,
    RearViewObservation,
    TrackAlreadyBound,
    UnknownTrack,
    pair_entries,
    write_binding_log,
)
from courtfusion.tracker import ENTERED, EXITED, TrackEvent

from oracles import vectors_with_cosines
from registry_cases import random_case


def obs(feature, world=(1.0, 1.0)):
    return RearViewObservation(np.asarray(feature, float), (0.0, 0.0), world)


def enter(tid, pos=(1.0, 1.0), frame=0):
    return TrackEvent(ENTERED, tid, frame, Point2(*pos))


def leave(tid, pos=(1.0, 1.0), frame=0):
    return TrackEvent(EXITED, tid, frame, Point2(*pos))


E1, E2 = np.eye(2)


class TestHandleExit:
    def test_logs_out(self):
        reg = PlayerRegistry()
        reg.handle_enter(7, obs(E1, (2, 3)))
        reg.handle_exit(7)
        r = reg.records[0]
        assert (r.id_state, r.track_id, r.position) == (LOGOUT, None, (2, 3))

    def test_unknown(self):
        with pytest.raises(UnknownTrack):
            PlayerRegistry().handle_exit(3)

    def test_only_one_record_changes(self):
        reg = PlayerRegistry()
        reg.handle_enter(0, obs(E1))
        reg.handle_enter(1, obs(E2))
        reg.handle_exit(1)
        assert [(r.id_state, r.track_id) for r in reg.records] == [(LOGIN, 0), (LOGOUT, None)]


class TestMatchFeature:
    def test_empty(self):
        assert PlayerRegistry().match_feature(E1) is None

    def test_identical(self):
        reg = PlayerRegistry(match_threshold=0.9)
        reg.handle_enter(0, obs(E1))
        reg.handle_exit(0)
        assert reg.match_feature(E1) == 0

    def test_best_of_two(self):
        rng = np.random.default_rng(0)
        q, (v95, v80) = vectors_with_cosines([0.95, 0.80], 16, rng)
        reg = PlayerRegistry(match_threshold=0.9)
        reg.handle_enter(0, obs(v80))
        reg.handle_enter(1, obs(v95))
        reg.handle_exit(0)
        reg.handle_exit(1)
        # exhaustive comparison oracle
        sims = {r.id: float(q @ r.feature / np.linalg.norm(r.feature)) for r in reg.records}
        assert sims[1] == pytest.approx(0.95) and sims[0] == pytest.approx(0.80)
        best = max(sims, key=sims.get)
        assert reg.match_feature(q) == best == 1

    def test_logged_in_not_candidate(self):
        reg = PlayerRegistry()
        reg.handle_enter(0, obs(E1))
        assert reg.match_feature(E1) is None

    def test_tie_lowest_id(self):
        reg = PlayerRegistry()
        for tid in (0, 1):
            reg.handle_enter(tid, obs(E1, (tid, 0)))
        reg.handle_exit(1)
        reg.handle_exit(0)
        assert reg.match_feature(E1) == 0


class TestHandleEnter:
    def test_first_player(self):
        reg, pid = PlayerRegistry().handle_enter(0, obs(E1))
        assert pid == 0 and reg.records[0].id_state == LOGIN and reg.next_id == 1

    def test_relogin(self):
        reg = PlayerRegistry()
        reg.handle_enter(0, obs(E1))
        reg.handle_exit(0)
        reg, pid = reg.handle_enter(5, obs(E1, (4, 4)))
        assert pid == 0 and len(reg) == 1
        r = reg.records[0]
        assert (r.id_state, r.track_id, r.position) == (LOGIN, 5, (4, 4))

    def test_orthogonal_gets_new_id(self):
        reg = PlayerRegistry(match_threshold=0.9)
        reg.handle_enter(0, obs(E1))
        reg.handle_exit(0)
        assert float(E1 @ E2) == 0.0
        reg, pid = reg.handle_enter(1, obs(E2))
        assert pid == 1 and len(reg) == 2

    def test_feature_moving_average(self):
        reg = PlayerRegistry(feature_update=0.3)
        a = np.array([1.0, 0.0, 0.0])
        b = np.array([1.0, 0.2, 0.0])
        reg.handle_enter(0, obs(a))
        reg.handle_exit(0)
        reg.handle_enter(1, obs(b))
        np.testing.assert_allclose(reg.records[0].feature, 0.7 * a + 0.3 * b)

    def test_track_already_bound(self):
        reg = PlayerRegistry()
        reg.handle_enter(0, obs(E1))
        with pytest.raises(TrackAlreadyBound):
            reg.handle_enter(0, obs(E2))


class TestProcessFrame:
    def test_empty(self):
        reg = PlayerRegistry()
        reg, b = reg.process_frame([], [])
        assert b == [] and len(reg) == 0

    def test_exit_and_return(self):
        reg = PlayerRegistry()
        reg, b0 = reg.process_frame([enter(0)], [obs(E1)])
        reg, _ = reg.process_frame([leave(0, frame=1)], [])
        assert reg.records[0].id_state == LOGOUT
        reg, b2 = reg.process_frame([enter(1, frame=2)], [obs(E1)])
        assert b0 == [(0, 0)] and b2 == [(1, 0)] and len(reg) == 1
        assert reg.positions_report()[0].id_state == LOGIN

    def test_same_frame_exit_then_enter(self):
        reg = PlayerRegistry()
        reg.process_frame([enter(0)], [obs(E1)])
        reg, b = reg.process_frame([enter(1, frame=1), leave(0, frame=1)], [obs(E1)])
        assert b == [(1, 0)] and len(reg) == 1

    def test_two_entries_nearest_pairing(self):
        positions = [(1.0, 2.0), (4.5, 9.0)]
        observations = [obs(E2, (4.4, 9.2)), obs(E1, (1.3, 1.8))]
        events = [enter(0, positions[0]), enter(1, positions[1])]
        pairs = pair_entries(events, observations, 2.0)
        # brute force over both pairings, minimum total distance
        best = min(
            itertools.permutations(range(2)),
            key=lambda perm: sum(math.dist(positions[i], observations[j].world_point) for i, j in enumerate(perm)),
        )
        assert pairs == {0: best[0], 1: best[1]} == {0: 1, 1: 0}
        reg, b = PlayerRegistry().process_frame(events, observations)
        np.testing.assert_array_equal(reg.record(b[0][1]).feature, E1)

    def test_no_observation(self):
        with pytest.raises(NoObservationForEntry):
            PlayerRegistry().process_frame([enter(0, (1, 1))], [obs(E1, (5, 5))])

    def test_positions_follow_tracks(self):
        reg = PlayerRegistry()
        reg.process_frame([enter(3)], [obs(E1)])
        reg.process_frame([], [], {3: (2.5, 6.0)})
        assert reg.positions_report()[0].position == (2.5, 6.0)


class TestReport:
    def test_empty(self):
        assert PlayerRegistry().positions_report() == []

    def test_sorted_snapshot(self):
        reg = PlayerRegistry()
        reg.handle_enter(0, obs(E1, (1, 2)))
        reg.handle_enter(1, obs(E2, (3, 4)))
        rep = reg.positions_report()
        assert [r.id for r in rep] == [0, 1]
        assert rep[1] == (1, LOGIN, (3, 4))

    def test_json_export(self, tmp_path):
        reg = PlayerRegistry()
        reg.handle_enter(0, obs(E1, (1, 2)))
        d = json.loads(reg.to_json())
        assert d == [{"id": 0, "id_state": "login", "position": [1.0, 2.0]}]
        assert json.loads(reg.to_json(with_features=True))[0]["feature"] == [1.0, 0.0]

    def test_binding_log(self, tmp_path):
        write_binding_log([(0, 1, 2), (1, 1, 2)], tmp_path / "b.csv")
        assert (tmp_path / "b.csv").read_text() == "frame_index,track_id,player_id\n0,1,2\n1,1,2\n"


def check_case(rng):
    """Run one random case; return the list of invariant violations."""
    reg = PlayerRegistry(match_threshold=0.9)
    violations = []
    player_id: dict[int, int] = {}
    issued: list[int] = []
    for events, observations, truth, bounced in random_case(rng):
        size_before = len(reg)
        new_players = {truth[t] for t in truth if truth[t] not in player_id}
        reg, bindings = reg.process_frame(events, observations)
        ids = [r.id for r in reg.records]
        if len(ids) != len(set(ids)) or any(i < j for i, j in zip(ids[1:], ids)):
            violations.append("id reused or out of order")
        if reg.next_id <= max(ids, default=-1):
            violations.append("next_id not above issued ids")
        tracks = [r.track_id for r in reg.records if r.track_id is not None]
        if len(tracks) != len(set(tracks)):
            violations.append("track bound twice")
        if any((r.id_state == LOGIN) != (r.track_id is not None) for r in reg.records):
            violations.append("login/track mismatch")
        if len(reg) - size_before != len(new_players):
            violations.append("registry grew without a new player")
        issued.extend(ids[size_before:])
        bound = dict(bindings)
        for tid, p in truth.items():
            if p in player_id and bound[tid] != player_id[p]:
                violations.append("player changed id" + (" on same-frame return" if p in bounced else ""))
            player_id.setdefault(p, bound[tid])
    if len(issued) != len(set(issued)):
        violations.append("id reissued")
    return violations


def test_registry_invariants_random_sequences():
    rng = np.random.default_rng(1234)
    for _ in range(500):
        assert check_case(rng) == []
