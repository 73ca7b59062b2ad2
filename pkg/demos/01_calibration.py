"""Calibrate an overhead camera from the four court corners, then move points
between image and court coordinates."""

import numpy as np

from courtfusion import CourtModel, calibrate
from courtfusion.geometry import compose, find_collinear_triple, transform, transform_points

court = CourtModel()
print("court corners (m):", court.corners)

# pixel positions of the same corners, clicked by hand on a frame of the top camera
image = [(160, 700), (470, 705), (455, 30), (175, 28)]
cal = calibrate(image, court.corners)
print("image -> court\n", np.round(cal.to_world.m, 6))
print("worst corner reprojection error:", cal.reprojection_error())

# a player's feet at pixel (300, 400)
feet = transform(cal.to_world, (300, 400))
print("feet on court:", feet, "inside:", court.contains(feet))
print("and back to pixels:", transform(cal.from_world, feet))

# the two directions compose to the identity (up to rounding)
print(np.round(compose(cal.from_world, cal.to_world).m, 12))

# bulk mapping of the court's centre line
line = np.column_stack([np.full(5, court.width / 2), np.linspace(0, court.length, 5)])
print(transform_points(cal.from_world, line))

# three corners on one line cannot define a perspective map
print("collinear triple:", find_collinear_triple([(0, 0), (1, 1), (2, 2), (0, 5)]))
