"""HOG appearance descriptors, linear SVM scoring and sliding-window detection.

Descriptor layout: blocks in row-major order (block rows top to bottom, then
block columns left to right); inside a block, cells in row-major order; inside
a cell, ``bins`` orientation bins covering [0, 180) degrees.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .geometry import Point2


class FeatureError(ValueError):
    pass


class ImageTooSmall(FeatureError):
    pass


class WindowOutOfBounds(FeatureError):
    pass


class BadGeometry(FeatureError):
    pass


class LengthMismatch(FeatureError):
    pass


class ZeroVector(FeatureError):
    pass


@dataclass(frozen=True)
class HogParams:
    window_w: int = 64
    window_h: int = 128
    cell: int = 8
    block: int = 2
    bins: int = 9
    clip: float = 0.2
    eps: float = 1e-12

    @property
    def cells_x(self) -> int:
        return self.window_w // self.cell

    @property
    def cells_y(self) -> int:
        return self.window_h // self.cell

    @property
    def blocks_x(self) -> int:
        return self.cells_x - self.block + 1

    @property
    def blocks_y(self) -> int:
        return self.cells_y - self.block + 1

    @property
    def length(self) -> int:
        return self.blocks_x * self.blocks_y * self.block * self.block * self.bins

    def validate(self):
        if min(self.window_w, self.window_h, self.cell, self.block, self.bins) < 1:
            raise BadGeometry("HOG parameters must be positive")
        if self.window_w % self.cell or self.window_h % self.cell:
            raise BadGeometry(
                f"window {self.window_w}x{self.window_h} not divisible by cell {self.cell}"
            )
        if self.blocks_x < 1 or self.blocks_y < 1:
            raise BadGeometry("window smaller than one block")


DEFAULT_HOG = HogParams()


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major grayscale image with intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 2:
            raise FeatureError("image data must be 2-D")
        if data.size and (np.nanmin(data) < 0.0 or np.nanmax(data) > 1.0 or np.isnan(data).any()):
            raise FeatureError("intensities must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True, eq=False)
class HogDescriptor:
    values: np.ndarray
    params: HogParams = DEFAULT_HOG

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True, eq=False)
class LinearSvmModel:
    weights: np.ndarray
    bias: float = 0.0
    threshold: float = 0.0
    params: HogParams = DEFAULT_HOG

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "weights", w)
        if len(w) != self.params.length:
            raise LengthMismatch(
                f"model has {len(w)} weights, HOG layout needs {self.params.length}"
            )


class Box(NamedTuple):
    x: float
    y: float
    w: float
    h: float


@dataclass(frozen=True)
class Detection:
    box: Box
    score: float = 1.0
    template: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        box = Box(*map(float, self.box))
        if not (box.w > 0 and box.h > 0):
            raise BadGeometry(f"box must have positive size, got {tuple(box)}")
        object.__setattr__(self, "box", box)

    @property
    def foot_point(self) -> Point2:
        x, y, w, h = self.box
        return Point2(x + w / 2.0, y + h)

    @classmethod
    def at_foot(cls, p, w: float = 1.0, h: float = 1.0, score: float = 1.0, template=None):
        """Detection whose bottom-center sits exactly on ``p``."""
        return cls(Box(p[0] - w / 2.0, p[1] - h, w, h), score, template)


def gradients(img) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel gradient magnitude and unsigned orientation in degrees.

    Central [-1, 0, 1] differences inside, one-sided differences on the border.
    """
    a = img.data if isinstance(img, GrayImage) else np.asarray(img, dtype=float)
    if a.shape[0] < 3 or a.shape[1] < 3:
        raise ImageTooSmall(f"image {a.shape[1]}x{a.shape[0]} smaller than 3x3")
    gx = np.empty_like(a)
    gy = np.empty_like(a)
    gx[:, 1:-1] = a[:, 2:] - a[:, :-2]
    gx[:, 0] = a[:, 1] - a[:, 0]
    gx[:, -1] = a[:, -1] - a[:, -2]
    gy[1:-1, :] = a[2:, :] - a[:-2, :]
    gy[0, :] = a[1, :] - a[0, :]
    gy[-1, :] = a[-1, :] - a[-2, :]
    mag = np.sqrt(gx * gx + gy * gy)
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    ang[ang >= 180.0] = 0.0
    return mag, ang


def _cell_histograms(mag: np.ndarray, ang: np.ndarray, p: HogParams) -> np.ndarray:
    width = 180.0 / p.bins
    pos = ang / width - 0.5
    lo = np.floor(pos)
    frac = pos - lo
    lo = lo.astype(int) % p.bins
    hi = (lo + 1) % p.bins
    cy = np.arange(mag.shape[0])[:, None] // p.cell
    cx = np.arange(mag.shape[1])[None, :] // p.cell
    cell_idx = np.broadcast_to(cy * p.cells_x + cx, mag.shape)
    n = p.cells_x * p.cells_y
    hist = np.zeros(n * p.bins)
    np.add.at(hist, (cell_idx * p.bins + lo).ravel(), (mag * (1.0 - frac)).ravel())
    np.add.at(hist, (cell_idx * p.bins + hi).ravel(), (mag * frac).ravel())
    return hist.reshape(p.cells_y, p.cells_x, p.bins)


def _normalize(v: np.ndarray, eps: float) -> np.ndarray:
    norm = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
    safe = np.where(norm > eps, norm, 1.0)
    return np.where(norm > eps, v / safe, 0.0)


def _l2hys(blocks: np.ndarray, clip: float, eps: float) -> np.ndarray:
    v = _normalize(blocks, eps)
    return _normalize(np.minimum(v, clip), eps)


def hog(img, window=None, params: HogParams = DEFAULT_HOG) -> HogDescriptor:
    """HOG descriptor of ``window = (x, y)`` or ``(x, y, w, h)`` inside ``img``.

    The window size is ``params.window_w x params.window_h``; a given ``w, h``
    must agree with it.  ``window`` defaults to the top-left corner.
    """
    params.validate()
    a = img.data if isinstance(img, GrayImage) else np.asarray(img, dtype=float)
    if window is None:
        window = (0, 0)
    x, y = int(window[0]), int(window[1])
    if len(window) == 4 and (int(window[2]), int(window[3])) != (params.window_w, params.window_h):
        raise BadGeometry(f"window size {window[2:]} does not match HOG params")
    w, h = params.window_w, params.window_h
    if x < 0 or y < 0 or x + w > a.shape[1] or y + h > a.shape[0]:
        raise WindowOutOfBounds(f"window {(x, y, w, h)} outside {a.shape[1]}x{a.shape[0]} image")
    mag, ang = gradients(a[y : y + h, x : x + w])
    cells = _cell_histograms(mag, ang, params)
    b = params.block
    blocks = np.stack(
        [
            cells[by : by + b, bx : bx + b].reshape(-1)
            for by in range(params.blocks_y)
            for bx in range(params.blocks_x)
        ]
    )
    return HogDescriptor(_l2hys(blocks, params.clip, params.eps).ravel(), params)


def svm_score(model: LinearSvmModel, d) -> float:
    values = d.values if isinstance(d, HogDescriptor) else np.asarray(d, dtype=float)
    if len(values) != len(model.weights):
        raise LengthMismatch(f"descriptor length {len(values)} != weights {len(model.weights)}")
    return float(np.dot(model.weights, values) + model.bias)


def iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def nms(dets, iou_threshold: float) -> list[Detection]:
    """Greedy non-maximum suppression; survivors in descending score order."""
    if not 0.0 <= iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in [0, 1)")
    kept: list[Detection] = []
    for d in sorted(dets, key=lambda d: -d.score):
        if all(iou(d.box, k.box) <= iou_threshold for k in kept):
            kept.append(d)
    return kept


def detect(img, model: LinearSvmModel, stride: int = 8, nms_iou: float = 0.5) -> list[Detection]:
    """Single-scale sliding-window detector.

    Windows are scored in row-major order, thresholded strictly above
    ``model.threshold`` and reduced by NMS.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if not 0.0 <= nms_iou < 1.0:
        raise ValueError("nms_iou must lie in [0, 1)")
    a = img.data if isinstance(img, GrayImage) else np.asarray(img, dtype=float)
    p = model.params
    found = []
    for y in range(0, a.shape[0] - p.window_h + 1, stride):
        for x in range(0, a.shape[1] - p.window_w + 1, stride):
            s = svm_score(model, hog(a, (x, y), p))
            if s > model.threshold:
                found.append(Detection(Box(x, y, p.window_w, p.window_h), s))
    return nms(found, nms_iou)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if len(a) != len(b) or len(a) == 0:
        raise LengthMismatch(f"lengths {len(a)} and {len(b)}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity of a zero vector")
    return max(-1.0, min(1.0, float(np.dot(a, b)) / (na * nb)))


def resize_nearest(a: np.ndarray, width: int, height: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    rows = (np.arange(height) * a.shape[0]) // height
    cols = (np.arange(width) * a.shape[1]) // width
    return a[rows][:, cols]


def reid_feature(img, box, params: HogParams = DEFAULT_HOG) -> np.ndarray:
    """Appearance vector for re-identification: HOG of the box resampled to the window size."""
    a = img.data if isinstance(img, GrayImage) else np.asarray(img, dtype=float)
    x, y, w, h = (int(round(v)) for v in box)
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > a.shape[1] or y + h > a.shape[0]:
        raise WindowOutOfBounds(f"box {tuple(box)} outside image")
    patch = resize_nearest(a[y : y + h, x : x + w], params.window_w, params.window_h)
    return hog(patch, None, params).values


def read_pgm(path) -> GrayImage:
    """Read a binary (P5) 8-bit PGM file."""
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FeatureError("truncated PGM header")
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise FeatureError(f"unsupported PGM magic {tokens[0]!r}")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise FeatureError("only 8-bit PGM files are supported")
    pos += 1
    pixels = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
    return GrayImage(pixels.reshape(height, width) / 255.0)


def write_pgm(img, path) -> None:
    a = img.data if isinstance(img, GrayImage) else np.asarray(img, dtype=float)
    pixels = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + pixels.tobytes())


def load_svm_model(path) -> LinearSvmModel:
    d = json.loads(Path(path).read_text())
    params = HogParams(**d.get("hog", {}))
    threshold = d.get("threshold", 0.0)
    return LinearSvmModel(
        np.asarray(d["weights"], dtype=float),
        float(d.get("bias", 0.0)),
        float("inf") if threshold is None else float(threshold),
        params,
    )


def save_svm_model(model: LinearSvmModel, path) -> None:
    threshold = None if math.isinf(model.threshold) else model.threshold
    d = {
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "threshold": threshold,
        "hog": asdict(model.params),
    }
    Path(path).write_text(json.dumps(d) + "\n")
