"""Track the crossing scenario and draw each player's path on the court."""

from pathlib import Path

from courtfusion.plot import court_svg, polylines_from_rows
from courtfusion.sim import load_scenario, run_pipeline

out = Path(__file__).resolve().parent / "_out"
out.mkdir(exist_ok=True)

res = run_pipeline(load_scenario("crossing"), seed=0)
bindings = {(frame, tid): pid for frame, tid, pid in res.binding_log}
lines = polylines_from_rows(res.trajectory_rows, bindings)
for pid, pts in lines.items():
    print(f"player {pid}: {len(pts)} points from {pts[0]} to {pts[-1]}")

(out / "crossing.svg").write_text(court_svg(lines, title="crossing"))
print("wrote", out / "crossing.svg")
