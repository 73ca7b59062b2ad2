"""The player registry: log out on exit, recognise on return."""

import numpy as np

from courtfusion.geometry import Point2
from courtfusion.reid import PlayerRegistry, RearViewObservation
from courtfusion.tracker import ENTERED, EXITED, TrackEvent

rng = np.random.default_rng(1)
look = {name: rng.normal(size=32) for name in "ABC"}


def seen(name, where):
    # a rear-camera sighting with a little appearance noise
    return RearViewObservation(look[name] + rng.normal(0, 0.05, 32), (0, 0), where)


reg = PlayerRegistry(match_threshold=0.9)
spots = {"A": (1.0, 2.0), "B": (4.0, 3.0), "C": (2.0, 10.0)}

# frame 0: everybody walks on
events = [TrackEvent(ENTERED, k, 0, Point2(*spots[n])) for k, n in enumerate("ABC")]
reg, bound = reg.process_frame(events, [seen(n, spots[n]) for n in "CAB"])
print("frame 0 bindings (track, player):", bound)

# frame 50: C leaves, track 2 ends
reg, _ = reg.process_frame([TrackEvent(EXITED, 2, 50, Point2(-0.5, 10.0))], [])
print(reg.to_json())

# frame 110: someone appears on the left; the tracker gives them track 3
back = (0.3, 9.8)
reg, bound = reg.process_frame([TrackEvent(ENTERED, 3, 110, Point2(*back))], [seen("C", back)])
print("frame 110 bindings:", bound, "registry size:", len(reg))
