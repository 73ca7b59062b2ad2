"""Regenerate the bundled scenario files in src/courtfusion/scenarios/.

    python scripts/make_scenarios.py
"""

import json
from pathlib import Path

import numpy as np

from courtfusion.features import cosine_similarity
from courtfusion.geometry import CourtModel, calibrate
from courtfusion.sim import ExitEvent, MotionScript, ScenarioSpec, save_scenario

OUT = Path(__file__).resolve().parent.parent / "src" / "courtfusion" / "scenarios"

COURT = CourtModel()
# near-left, near-right, far-right, far-left
TOP_CORNERS = [(160, 700), (470, 705), (455, 30), (175, 28)]
REAR_CORNERS = [(80, 690), (1200, 690), (860, 210), (420, 210)]
FEATURE_DIM = 32


def feature_bases(n, seed=2024, max_cos=0.5):
    rng = np.random.Generator(np.random.PCG64(seed))
    while True:
        b = np.round(rng.normal(size=(n, FEATURE_DIM)), 4)
        cos = [cosine_similarity(b[i], b[j]) for i in range(n) for j in range(i + 1, n)]
        if max(cos) < max_cos:
            return b


def spec(name, players, duration, exits=(), **kw):
    bases = feature_bases(len(players))
    scripts = tuple(
        MotionScript(pname, wps, bases[k], team)
        for k, (pname, team, wps) in enumerate(players)
    )
    return ScenarioSpec(
        name=name,
        court=COURT,
        top_cal=calibrate(TOP_CORNERS, COURT.corners),
        rear_cal=calibrate(REAR_CORNERS, COURT.corners),
        players=scripts,
        duration=duration,
        exit_events=tuple(exits),
        **kw,
    )


def crossing():
    # The paths form an X through (3.05, 6.7); A passes it at t = 1.9 s and
    # B at t = 1.1 s, so around t = 1.5 s they stand 0.64 m apart on one line
    # of sight of the rear camera.
    return spec(
        "crossing",
        [
            ("A", "home", [(0.0, (0.39, 5.18)), (3.0, (4.59, 7.58))]),
            ("B", "home", [(0.0, (4.59, 5.82)), (3.0, (0.39, 8.22))]),
        ],
        duration=3.0,
    )


def exit_return():
    return spec(
        "exit_return",
        [
            ("A", "home", [(0.0, (1.5, 2.5)), (3.0, (2.0, 3.0)), (6.0, (1.5, 2.5))]),
            ("B", "home", [(0.0, (4.6, 4.5)), (3.0, (4.2, 4.0)), (6.0, (4.6, 4.5))]),
            # C walks off the left sideline, is gone from t = 2 s to 4 s, walks back
            ("C", "away", [(0.0, (1.5, 9.5)), (2.0, (0.3, 9.5)), (3.0, (-1.0, 9.5)),
                           (4.0, (0.4, 9.8)), (6.0, (1.8, 10.0))]),
            ("D", "away", [(0.0, (4.5, 11.0)), (3.0, (4.0, 10.5)), (6.0, (4.5, 11.0))]),
        ],
        duration=6.0,
        exits=[ExitEvent("C", 2.0, 4.0)],
    )


def same_side():
    # The home pair drifts onto the left half together, leaving the right open.
    return spec(
        "same_side",
        [
            ("A", "home", [(0.0, (1.5, 2.0)), (2.0, (1.2, 2.5)), (4.0, (1.0, 2.2))]),
            ("B", "home", [(0.0, (4.6, 4.5)), (2.0, (2.8, 4.8)), (4.0, (2.0, 5.0))]),
            ("C", "away", [(0.0, (1.5, 9.0)), (2.0, (1.8, 9.5)), (4.0, (1.6, 9.2))]),
            ("D", "away", [(0.0, (4.6, 11.0)), (2.0, (4.4, 10.8)), (4.0, (4.5, 11.2))]),
        ],
        duration=4.0,
    )


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for make in (crossing, exit_return, same_side):
        s = make()
        save_scenario(s, OUT / f"{s.name}.json")
        print("wrote", OUT / f"{s.name}.json")
    corners = {"image_corners": [list(p) for p in TOP_CORNERS],
               "world_corners": [list(p) for p in COURT.corners]}
    (OUT / "sample_corners.json").write_text(json.dumps(corners, indent=2) + "\n")
    print("wrote", OUT / "sample_corners.json")
