"""HOG descriptors, a linear scorer and sliding-window detection on a
synthetic frame."""

import numpy as np

from courtfusion.features import HogParams, LinearSvmModel, cosine_similarity, detect, hog, reid_feature

rng = np.random.default_rng(0)
params = HogParams(window_w=16, window_h=32)

# flat grey frame with one textured "player" pasted in
frame = np.full((96, 80), 0.5)
player = rng.uniform(0, 1, (32, 16))
frame[40:72, 30:46] = player

d = hog(frame, (30, 40), params)
print("descriptor length", len(d.values), "(default window gives", HogParams().length, ")")

# a matched filter: weights equal to the player's own descriptor
peak = float(d.values @ d.values)
model = LinearSvmModel(d.values, bias=-0.8 * peak, threshold=0.0, params=params)

for det in detect(frame, model, stride=2, nms_iou=0.3):
    print("box", tuple(det.box), "score %.3f" % det.score, "feet", det.foot_point)

# appearance vectors for re-identification use the default 64x128 window
big = rng.uniform(0, 1, (200, 120))
a = reid_feature(big, (10, 20, 40, 90))
b = reid_feature(big * 0.6, (10, 20, 40, 90))
print("same crop, darker: cosine %.6f" % cosine_similarity(a, b))
