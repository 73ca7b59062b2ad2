"""Frame-by-frame tracking on the court plane: two players walk across, a
third wanders off the side and is dropped."""

from courtfusion import CameraCalibration, CourtModel
from courtfusion.features import Detection
from courtfusion.tracker import TrackerState, step

court = CourtModel()
state = TrackerState(CameraCalibration.identity(court.corners), court, gate_radius=1.0, max_missed=3)

for k in range(12):
    feet = [(1.0 + 0.3 * k, 3.0), (5.0 - 0.3 * k, 9.0)]
    if k < 8:
        feet.append((0.2 - 0.25 * k, 6.0))
    state, events = step(state, k, [Detection.at_foot(p) for p in feet])
    for e in events:
        print(f"frame {k:2d}: track {e.track_id} {e.kind} at ({e.position.x:.2f}, {e.position.y:.2f})")

for t in state.tracks:
    print(t.track_id, t.state, "points:", len(t.points), "last:", tuple(round(v, 2) for v in t.position))
