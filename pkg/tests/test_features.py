import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from courtfusion.features import (
    BadGeometry,
    Box,
    Detection,
    GrayImage,
    HogParams,
    ImageTooSmall,
    LengthMismatch,
    LinearSvmModel,
    WindowOutOfBounds,
    ZeroVector,
    cosine_similarity,
    detect,
    gradients,
    hog,
    iou,
    load_svm_model,
    nms,
    read_pgm,
    reid_feature,
    save_svm_model,
    svm_score,
    write_pgm,
)

from oracles import naive_cosine, naive_gradients, naive_hog, seq_dot

SMALL = HogParams(window_w=16, window_h=32, cell=8, block=2, bins=9)


def textured(rng, h, w):
    return rng.uniform(0.0, 1.0, (h, w))


class TestGradients:
    def test_constant(self):
        mag, _ = gradients(np.full((8, 8), 0.4))
        assert not mag.any()

    def test_horizontal_ramp(self):
        w = 16
        img = np.tile(np.arange(w) / w, (10, 1))
        mag, ang = gradients(img)
        np.testing.assert_allclose(ang[1:-1, 1:-1], 0.0)
        np.testing.assert_allclose(mag[1:-1, 1:-1], 2.0 / w)

    def test_matches_naive(self):
        img = textured(np.random.default_rng(0), 16, 16)
        mag, ang = gradients(img)
        nmag, nang = naive_gradients(img)
        np.testing.assert_array_equal(mag, nmag)
        np.testing.assert_allclose(ang, nang, rtol=0, atol=1e-12)

    def test_too_small(self):
        with pytest.raises(ImageTooSmall):
            gradients(np.zeros((2, 5)))

    def test_orientation_range(self):
        _, ang = gradients(textured(np.random.default_rng(2), 20, 20) - 0.5)
        assert ang.min() >= 0.0 and ang.max() < 180.0


class TestHog:
    def test_constant_window(self):
        d = hog(np.full((128, 64), 0.7))
        assert not d.values.any()

    def test_default_length(self):
        p = HogParams()
        assert p.length == 7 * 15 * 4 * 9 == 3780
        assert len(hog(textured(np.random.default_rng(1), 128, 64)).values) == 3780

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(3):
            win = textured(rng, 128, 64)
            np.testing.assert_allclose(hog(win).values, naive_hog(win), rtol=0, atol=1e-12)

    def test_window_offset(self):
        rng = np.random.default_rng(8)
        img = textured(rng, 50, 40)
        d = hog(img, (5, 9), SMALL)
        np.testing.assert_allclose(d.values, naive_hog(img[9:41, 5:21]), atol=1e-12)

    def test_out_of_bounds(self):
        with pytest.raises(WindowOutOfBounds):
            hog(np.zeros((128, 64)), (1, 0))

    def test_bad_geometry(self):
        with pytest.raises(BadGeometry):
            hog(np.zeros((30, 30)), (0, 0), HogParams(window_w=20, window_h=20, cell=8))

    def test_gray_image_input(self):
        win = textured(np.random.default_rng(3), 32, 16)
        np.testing.assert_array_equal(hog(GrayImage(win), None, SMALL).values, hog(win, None, SMALL).values)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (32, 16), elements=st.floats(0, 1)), st.floats(0.01, 1.0))
def test_hog_brightness_scale(win, c):
    mag, _ = gradients(win)
    if not mag.any():
        return
    a = hog(win, None, SMALL).values
    b = hog(win * c, None, SMALL).values
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (32, 16), elements=st.floats(0, 1)))
def test_hog_nonnegative_and_block_norms(win):
    v = hog(win, None, SMALL).values
    assert (v >= 0).all()
    block_len = SMALL.block**2 * SMALL.bins
    norms = np.linalg.norm(v.reshape(-1, block_len), axis=1)
    assert (norms <= 1 + 1e-9).all()


class TestSvm:
    def test_zero_weights(self):
        m = LinearSvmModel(np.zeros(SMALL.length), bias=1.0, params=SMALL)
        d = hog(textured(np.random.default_rng(0), 32, 16), None, SMALL)
        assert svm_score(m, d) == 1.0

    def test_self_dot(self):
        d = hog(textured(np.random.default_rng(1), 32, 16), None, SMALL)
        m = LinearSvmModel(d.values, params=SMALL)
        assert svm_score(m, d) == pytest.approx(float(np.sum(d.values**2)), abs=1e-12)

    def test_matches_sequential_sum(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            w = rng.normal(size=SMALL.length)
            v = rng.uniform(0, 1, SMALL.length)
            b = rng.normal()
            m = LinearSvmModel(w, b, params=SMALL)
            assert svm_score(m, v) == pytest.approx(seq_dot(w, v) + b, abs=1e-12)

    def test_length_mismatch(self):
        m = LinearSvmModel(np.zeros(SMALL.length), params=SMALL)
        with pytest.raises(LengthMismatch):
            svm_score(m, np.zeros(3))
        with pytest.raises(LengthMismatch):
            LinearSvmModel(np.zeros(10), params=SMALL)

    def test_model_file_round_trip(self, tmp_path):
        m = LinearSvmModel(np.arange(SMALL.length, dtype=float), 0.5, 2.0, SMALL)
        save_svm_model(m, tmp_path / "m.json")
        back = load_svm_model(tmp_path / "m.json")
        np.testing.assert_array_equal(back.weights, m.weights)
        assert (back.bias, back.threshold, back.params) == (0.5, 2.0, SMALL)

    def test_model_file_rejects_wrong_length(self, tmp_path):
        (tmp_path / "m.json").write_text('{"weights": [1, 2, 3], "bias": 0, "threshold": 0}')
        with pytest.raises(LengthMismatch):
            load_svm_model(tmp_path / "m.json")


def box(x, y, w=10, h=10):
    return Box(x, y, w, h)


class TestNms:
    def test_empty(self):
        assert nms([], 0.5) == []

    def test_identical_boxes(self):
        a, b = Detection(box(0, 0), 0.9), Detection(box(0, 0), 0.8)
        assert nms([b, a], 0.5) == [a]

    def test_disjoint_kept(self):
        dets = [Detection(box(0, 0), 0.3), Detection(box(50, 0), 0.9), Detection(box(0, 50), 0.6)]
        assert [d.score for d in nms(dets, 0.5)] == [0.9, 0.6, 0.3]

    def test_iou(self):
        assert iou(box(0, 0), box(5, 0)) == pytest.approx(50 / 150)
        assert iou(box(0, 0), box(10, 0)) == 0.0


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(0, 40), st.integers(0, 40), st.integers(1, 20), st.integers(1, 20), st.floats(0, 1)),
        max_size=12,
    ),
    st.floats(0, 0.95),
)
def test_nms_idempotent(raw, t):
    dets = [Detection(Box(x, y, w, h), s) for x, y, w, h, s in raw]
    once = nms(dets, t)
    assert nms(once, t) == once
    for i, a in enumerate(once):
        for b in once[i + 1 :]:
            assert iou(a.box, b.box) <= t


class TestDetect:
    def planted(self):
        rng = np.random.default_rng(42)
        img = np.full((64, 48), 0.5)
        patch = textured(rng, 32, 16)
        img[16:48, 24:40] = patch
        d = hog(img, (24, 16), SMALL).values
        return img, d

    def test_nothing_accepted(self):
        img, d = self.planted()
        m = LinearSvmModel(d, 0.0, math.inf, SMALL)
        assert detect(img, m, stride=8) == []

    def test_single_planted_patch(self):
        img, d = self.planted()
        peak = float(d @ d)
        # every other window scores strictly less (Cauchy-Schwarz on unit blocks)
        others = [
            float(hog(img, (x, y), SMALL).values @ d)
            for y in range(0, 64 - 32 + 1, 8)
            for x in range(0, 48 - 16 + 1, 8)
            if (x, y) != (24, 16)
        ]
        assert max(others) < peak
        thr = (peak + max(others)) / 2
        m = LinearSvmModel(d, -thr, 0.0, SMALL)
        dets = detect(img, m, stride=8, nms_iou=0.5)
        assert len(dets) == 1
        assert tuple(dets[0].box) == (24, 16, 16, 32)
        assert dets[0].foot_point == (32.0, 48.0)

    def test_overlapping_responses_suppressed(self):
        img, d = self.planted()
        m = LinearSvmModel(d, 0.0, -1.0, SMALL)
        dets = detect(img, m, stride=4, nms_iou=0.5)
        assert dets == sorted(dets, key=lambda x: -x.score)
        for i, a in enumerate(dets):
            for b in dets[i + 1 :]:
                assert iou(a.box, b.box) <= 0.5
        assert all(x.score > m.threshold for x in dets)
        assert detect(img, m, stride=4, nms_iou=0.5) == dets

    def test_nms_two_overlapping(self):
        a = Detection(Box(0, 0, 10, 10), 0.9)
        b = Detection(Box(0, 1, 10, 10), 0.7)
        assert iou(a.box, b.box) > 0.8 - 1e-12
        assert nms([b, a], 0.5) == [a]


class TestCosine:
    def test_self(self):
        v = np.array([1.0, -2.0, 3.0])
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-15)

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_matches_naive(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            a, b = rng.normal(size=40), rng.normal(size=40)
            assert cosine_similarity(a, b) == pytest.approx(naive_cosine(a, b), abs=1e-12)

    def test_errors(self):
        with pytest.raises(ZeroVector):
            cosine_similarity([0, 0], [1, 0])
        with pytest.raises(LengthMismatch):
            cosine_similarity([1, 0], [1, 0, 0])


def test_detection_foot_point():
    d = Detection(Box(10, 20, 4, 8))
    assert d.foot_point == (12.0, 28.0)
    assert Detection.at_foot((3.0, 4.0), 2, 2).foot_point == (3.0, 4.0)
    with pytest.raises(BadGeometry):
        Detection(Box(0, 0, 0, 5))


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    img = np.round(rng.uniform(0, 1, (7, 9)) * 255) / 255
    write_pgm(img, tmp_path / "a.pgm")
    back = read_pgm(tmp_path / "a.pgm")
    assert (back.width, back.height) == (9, 7)
    np.testing.assert_allclose(back.data, img, atol=1e-12)


def test_pgm_with_comment(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n3 2\n255\n" + bytes([0, 51, 255, 255, 0, 102]))
    img = read_pgm(tmp_path / "c.pgm")
    np.testing.assert_allclose(img.data, [[0, 0.2, 1], [1, 0, 0.4]])


def test_reid_feature_rescales_box():
    rng = np.random.default_rng(4)
    img = textured(rng, 200, 120)
    f = reid_feature(img, (10, 20, 40, 90))
    assert f.shape == (3780,)
    with pytest.raises(WindowOutOfBounds):
        reid_feature(img, (100, 150, 40, 90))
