"""Planar homographies between camera images and the court ground plane.

Three frames are in play: rear-view image pixels, top-view image pixels and
world (court) meters.  A :class:`CameraCalibration` ties one camera's image
plane to the world plane through a pair of mutually inverse homographies.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

EPSILON_W = 1e-12
COLLINEAR_AREA = 1e-9
SINGULAR_DET = 1e-12

# Corner order used by calibration files and CourtModel.corners.
CORNER_NAMES = ("near-left", "near-right", "far-right", "far-left")


class GeometryError(ValueError):
    pass


class DegenerateConfiguration(GeometryError):
    def __init__(self, message, triple=None):
        super().__init__(message)
        self.triple = triple


class PointAtInfinity(GeometryError):
    pass


class SingularMatrix(GeometryError):
    pass


class Point2(NamedTuple):
    x: float
    y: float


class HomogeneousPoint(NamedTuple):
    x: float
    y: float
    w: float


def _as_point(p) -> Point2:
    pt = Point2(float(p[0]), float(p[1]))
    if not (math.isfinite(pt.x) and math.isfinite(pt.y)):
        raise GeometryError(f"non-finite point {tuple(p)!r}")
    return pt


@dataclass(frozen=True, eq=False)
class Homography:
    """A 3x3 projective map, normalized so that ``m[2, 2] == 1`` when possible."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise GeometryError("homography has non-finite entries")
        if m[2, 2] != 0.0:
            m = m / m[2, 2]
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def tolist(self) -> list[list[float]]:
        return self.m.tolist()

    def __eq__(self, other):
        if not isinstance(other, Homography):
            return NotImplemented
        return bool(np.array_equal(self.m, other.m))

    def __hash__(self):
        return hash(self.m.tobytes())

    def __repr__(self):
        return f"Homography({self.m.tolist()!r})"


def triangle_area(a, b, c) -> float:
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def find_collinear_triple(points: Sequence, min_area: float = COLLINEAR_AREA):
    """Return the first index triple whose triangle area is <= ``min_area``, else None."""
    for triple in itertools.combinations(range(len(points)), 3):
        if triangle_area(*(points[i] for i in triple)) <= min_area:
            return triple
    return None


def _solve_gauss(a: list[list[float]], b: list[float]) -> list[float]:
    # Gaussian elimination with partial pivoting on an n x n system.
    n = len(b)
    rows = [list(map(float, a[i])) + [float(b[i])] for i in range(n)]
    scale = max(max(abs(v) for v in row[:n]) for row in rows) or 1.0
    tol = 1e-13 * scale
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(rows[r][col]))
        if abs(rows[pivot][col]) <= tol:
            raise DegenerateConfiguration("rank-deficient homography system")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        prow = rows[col]
        inv = 1.0 / prow[col]
        for r in range(col + 1, n):
            row = rows[r]
            f = row[col] * inv
            if f != 0.0:
                for k in range(col, n + 1):
                    row[k] -= f * prow[k]
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        row = rows[i]
        s = row[n]
        for k in range(i + 1, n):
            s -= row[k] * x[k]
        x[i] = s / row[i]
    return x


def homography_system(src: Sequence, dst: Sequence) -> tuple[list[list[float]], list[float]]:
    """The 8x8 linear system in the eight unknowns of H (with ``m[2][2] = 1``)."""
    a, b = [], []
    for (x, y), (u, v) in zip(src, dst):
        a.append([x, y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u])
        b.append(u)
        a.append([0.0, 0.0, 0.0, x, y, 1.0, -x * v, -y * v])
        b.append(v)
    return a, b


def compute_homography(src: Sequence, dst: Sequence) -> Homography:
    """Exact homography taking four source points onto four destination points.

    Raises DegenerateConfiguration when three points of either set are
    (nearly) collinear or the linear system is rank deficient.
    """
    src = [_as_point(p) for p in src]
    dst = [_as_point(p) for p in dst]
    if len(src) != 4 or len(dst) != 4:
        raise GeometryError("exactly four point correspondences are required")
    for name, pts in (("source", src), ("destination", dst)):
        triple = find_collinear_triple(pts)
        if triple is not None:
            raise DegenerateConfiguration(
                f"{name} points {triple} are collinear", triple=(name, triple)
            )
    a, b = homography_system(src, dst)
    h = _solve_gauss(a, b)
    return Homography(np.array(h + [1.0]).reshape(3, 3))


def apply(h: Homography, p) -> HomogeneousPoint:
    x, y = _as_point(p)
    (a, b, c), (d, e, f), (g, k, l) = h.m.tolist()
    return HomogeneousPoint(a * x + b * y + c, d * x + e * y + f, g * x + k * y + l)


def dehomogenize(hp, eps: float = EPSILON_W) -> Point2:
    x, y, w = hp
    if abs(w) <= eps:
        raise PointAtInfinity(f"w = {w!r} is within {eps} of zero")
    return Point2(x / w, y / w)


def transform(h: Homography, p) -> Point2:
    """``dehomogenize(apply(h, p))``."""
    return dehomogenize(apply(h, p))


def transform_points(h: Homography, pts, eps: float = EPSILON_W) -> np.ndarray:
    """Vectorized :func:`transform` over an ``(n, 2)`` array."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    hom = pts @ h.m[:, :2].T + h.m[:, 2]
    w = hom[:, 2]
    if np.any(np.abs(w) <= eps):
        raise PointAtInfinity("at least one point maps to infinity")
    return hom[:, :2] / w[:, None]


def compose(a: Homography, b: Homography) -> Homography:
    """The map ``p -> a(b(p))``."""
    return Homography(a.m @ b.m)


def invert(h: Homography) -> Homography:
    det = float(np.linalg.det(h.m))
    if abs(det) <= SINGULAR_DET:
        raise SingularMatrix(f"determinant {det!r} too close to zero")
    return Homography(np.linalg.inv(h.m))


@dataclass(frozen=True)
class CameraCalibration:
    image_corners: tuple[Point2, ...]
    world_corners: tuple[Point2, ...]
    to_world: Homography = field(repr=False)
    from_world: Homography = field(repr=False)

    @classmethod
    def identity(cls, corners: Sequence) -> "CameraCalibration":
        """Calibration whose image frame already is the world frame."""
        corners = tuple(_as_point(p) for p in corners)
        return cls(corners, corners, Homography.identity(), Homography.identity())

    def image_to_world(self, p) -> Point2:
        return transform(self.to_world, p)

    def world_to_image(self, p) -> Point2:
        return transform(self.from_world, p)

    def reprojection_error(self) -> float:
        """Largest corner distance after mapping image corners to world."""
        mapped = transform_points(self.to_world, self.image_corners)
        return float(np.max(np.hypot(*(mapped - np.asarray(self.world_corners)).T)))

    def to_dict(self) -> dict:
        return {
            "image_corners": [list(p) for p in self.image_corners],
            "world_corners": [list(p) for p in self.world_corners],
            "to_world": self.to_world.tolist(),
            "from_world": self.from_world.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraCalibration":
        # Homographies are always recomputed from the corners; stored matrices
        # are informational.
        return calibrate(d["image_corners"], d["world_corners"])


def calibrate(image_corners: Sequence, world_corners: Sequence) -> CameraCalibration:
    image_corners = tuple(_as_point(p) for p in image_corners)
    world_corners = tuple(_as_point(p) for p in world_corners)
    to_world = compute_homography(image_corners, world_corners)
    return CameraCalibration(image_corners, world_corners, to_world, invert(to_world))


def load_calibration(path) -> CameraCalibration:
    with open(path) as f:
        return CameraCalibration.from_dict(json.load(f))


def save_calibration(cal: CameraCalibration, path) -> None:
    Path(path).write_text(json.dumps(cal.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class CourtModel:
    """Axis-aligned court rectangle in meters; x spans the width, y the length.

    Defaults are the doubles badminton court, 6.10 m by 13.40 m.
    """

    width: float = 6.10
    length: float = 13.40
    boundary_margin: float = 0.5

    def __post_init__(self):
        if not (self.width > 0 and self.length > 0):
            raise GeometryError("court dimensions must be positive")
        if self.boundary_margin < 0:
            raise GeometryError("boundary_margin must be nonnegative")

    @property
    def corners(self) -> tuple[Point2, ...]:
        w, l = self.width, self.length
        return (Point2(0.0, 0.0), Point2(w, 0.0), Point2(w, l), Point2(0.0, l))

    @property
    def net_y(self) -> float:
        return self.length / 2.0

    def contains(self, p, margin: float = 0.0) -> bool:
        x, y = p
        return -margin <= x <= self.width + margin and -margin <= y <= self.length + margin

    def to_dict(self) -> dict:
        return {"width": self.width, "length": self.length, "boundary_margin": self.boundary_margin}
