"""Planar geometry: limb areas of interest, box overlap, and wall homography.

Image coordinates are pixels with the origin in the top-left corner and y
growing downward. Wall-plane coordinates produced by a homography are in
centimeters unless the calibration file declares another unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class InsufficientPoints(ValueError):
    """Fewer than the four correspondences a homography needs."""


class DegenerateConfiguration(ValueError):
    """Point correspondences admit no unique homography (collinear/duplicated)."""


class PointAtInfinity(ValueError):
    """The homography maps this point to the plane at infinity."""


class EmptyInput(ValueError):
    """At least one point is required."""


@dataclass(frozen=True)
class Point2:
    """A 2D point; pixels in image space or centimeters on the wall plane."""

    x: float
    y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class AABB:
    """Axis-aligned bounding box spanning [min.x, max.x] x [min.y, max.y]."""

    min: Point2
    max: Point2

    def __post_init__(self) -> None:
        if self.min.x > self.max.x or self.min.y > self.max.y:
            raise ValueError(f"box min must not exceed max: {self}")

    @property
    def width(self) -> float:
        return self.max.x - self.min.x

    @property
    def height(self) -> float:
        return self.max.y - self.min.y

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point2:
        return Point2((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)


class FootAnchorKind(Enum):
    """Which foot keypoint a pose model provides."""

    TOE = "toe"
    ANKLE = "ankle"


@dataclass(frozen=True)
class SkeletonConvention:
    """Keypoint names a pose model uses for the four limb anchors.

    Hand anchors sit at the wrist for all common models; foot anchors are
    either toe-level or ankle-level, which decides the foot AOI shape.
    """

    name: str
    left_hand: str
    right_hand: str
    left_foot: str
    right_foot: str
    foot_anchor_kind: FootAnchorKind

    def anchor_name(self, extremity) -> str:
        # extremity is annotations.Extremity; matched on its two-letter code
        # to avoid a circular import.
        return {
            "lh": self.left_hand,
            "rh": self.right_hand,
            "lf": self.left_foot,
            "rf": self.right_foot,
        }[extremity.code]


WRIST_ANKLE = SkeletonConvention(
    name="wrist_ankle",
    left_hand="left_wrist",
    right_hand="right_wrist",
    left_foot="left_ankle",
    right_foot="right_ankle",
    foot_anchor_kind=FootAnchorKind.ANKLE,
)

WRIST_TOE = SkeletonConvention(
    name="wrist_toe",
    left_hand="left_wrist",
    right_hand="right_wrist",
    left_foot="left_toe",
    right_foot="right_toe",
    foot_anchor_kind=FootAnchorKind.TOE,
)

CONVENTIONS = {c.name: c for c in (WRIST_ANKLE, WRIST_TOE)}


def get_convention(name: str) -> SkeletonConvention:
    try:
        return CONVENTIONS[name]
    except KeyError:
        known = ", ".join(sorted(CONVENTIONS))
        raise KeyError(f"unknown skeleton convention {name!r} (known: {known})") from None


# Default AOI extents are calibrated for 720x1280 portrait input and scale
# linearly with frame height for other resolutions.
REFERENCE_HEIGHT = 1280.0


@dataclass(frozen=True)
class AoiConfig:
    """Pixel extents of the overlap areas built around limb keypoints.

    The ankle region must enclose at least the toe region in both axes:
    toe positions stay below the ankle but wander laterally and downward,
    so ankle-only models need the larger, downward-shifted box.
    """

    hand_half_extent: float = 30.0
    toe_half_extent: float = 15.0
    toe_down_extension: float = 25.0
    ankle_half_width: float = 60.0
    ankle_down_offset: float = 0.0
    ankle_down_extension: float = 110.0

    def __post_init__(self) -> None:
        extents = (
            self.hand_half_extent,
            self.toe_half_extent,
            self.toe_down_extension,
            self.ankle_half_width,
            self.ankle_down_extension,
        )
        if any(v <= 0 for v in extents):
            raise ValueError(f"AOI extents must be positive: {self}")
        if self.ankle_down_offset < 0:
            raise ValueError("ankle_down_offset must be >= 0")
        if self.ankle_half_width < self.toe_half_extent:
            raise ValueError("ankle box must be at least as wide as the toe box")
        if self.ankle_down_extension < self.toe_half_extent + self.toe_down_extension:
            raise ValueError("ankle box must be at least as tall as the toe box")

    def scaled_for_height(self, height: float) -> "AoiConfig":
        """Scale every extent linearly for a frame of the given pixel height."""
        if height <= 0:
            raise ValueError("frame height must be positive")
        s = height / REFERENCE_HEIGHT
        return replace(
            self,
            hand_half_extent=self.hand_half_extent * s,
            toe_half_extent=self.toe_half_extent * s,
            toe_down_extension=self.toe_down_extension * s,
            ankle_half_width=self.ankle_half_width * s,
            ankle_down_offset=self.ankle_down_offset * s,
            ankle_down_extension=self.ankle_down_extension * s,
        )

    @property
    def max_half_width(self) -> float:
        """Widest lateral reach of any AOI; useful for clearance computations."""
        return max(self.hand_half_extent, self.toe_half_extent, self.ankle_half_width)


def hand_aoi(anchor: Point2, cfg: AoiConfig) -> AABB:
    """Box centered on the wrist: a gripping hand can extend any direction from it."""
    h = cfg.hand_half_extent
    return AABB(Point2(anchor.x - h, anchor.y - h), Point2(anchor.x + h, anchor.y + h))


def foot_aoi(anchor: Point2, kind: FootAnchorKind, cfg: AoiConfig) -> AABB:
    """Box around a foot keypoint, expanded downward where the foothold sits.

    Toe anchors get a small box reaching slightly above and further below the
    keypoint. Ankle anchors get a much larger box placed entirely at or below
    the keypoint, since toes never rise above ankle height.
    """
    if kind is FootAnchorKind.TOE:
        return AABB(
            Point2(anchor.x - cfg.toe_half_extent, anchor.y - cfg.toe_half_extent),
            Point2(anchor.x + cfg.toe_half_extent, anchor.y + cfg.toe_down_extension),
        )
    top = anchor.y + cfg.ankle_down_offset
    return AABB(
        Point2(anchor.x - cfg.ankle_half_width, top),
        Point2(anchor.x + cfg.ankle_half_width, top + cfg.ankle_down_extension),
    )


def overlaps(a: AABB, b: AABB) -> bool:
    """True iff the boxes share positive area; edge contact does not count."""
    return (
        min(a.max.x, b.max.x) > max(a.min.x, b.min.x)
        and min(a.max.y, b.max.y) > max(a.min.y, b.min.y)
    )


class Homography:
    """Invertible 3x3 projective map from image pixels to wall-plane coordinates."""

    __slots__ = ("m",)

    def __init__(self, m) -> None:
        arr = np.array(m, dtype=float)
        if arr.shape != (3, 3):
            raise ValueError(f"homography matrix must be 3x3, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("homography matrix must be finite")
        if abs(np.linalg.det(arr)) < 1e-14 * max(1.0, float(np.abs(arr).max()) ** 3):
            raise DegenerateConfiguration("homography matrix is singular")
        arr.setflags(write=False)
        self.m = arr

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        inv = np.linalg.inv(self.m)
        if abs(inv[2, 2]) > 1e-12:
            inv = inv / inv[2, 2]
        return Homography(inv)

    def as_rows(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self.m]

    def __repr__(self) -> str:
        return f"Homography({self.as_rows()})"


def _as_xy_array(points) -> np.ndarray:
    pts = np.array([(p.x, p.y) for p in points], dtype=float)
    return pts.reshape(-1, 2)


def _normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity transform moving the centroid to the origin, mean radius to sqrt(2)."""
    centroid = pts.mean(axis=0)
    mean_dist = np.linalg.norm(pts - centroid, axis=1).mean()
    if mean_dist < 1e-12:
        raise DegenerateConfiguration("all points coincide")
    s = math.sqrt(2.0) / mean_dist
    return np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )


def _has_collinear_triple(pts: np.ndarray) -> bool:
    n = len(pts)
    scale = max(1.0, float(np.abs(pts).max()))
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, c = pts[i], pts[j], pts[k]
                area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
                if area2 < 1e-9 * scale * scale:
                    return True
    return False


def estimate_homography(src, dst) -> Homography:
    """Fit the homography mapping src points onto dst points (normalized DLT).

    Works for any n >= 4 correspondences: with exactly four non-degenerate
    pairs the fit is exact, with more it is the algebraic least-squares
    solution. The result is scaled so that m[2][2] == 1.
    """
    s = _as_xy_array(src)
    d = _as_xy_array(dst)
    if len(s) != len(d):
        raise ValueError(f"src and dst must pair up: {len(s)} vs {len(d)}")
    if len(s) < 4:
        raise InsufficientPoints(f"need at least 4 correspondences, got {len(s)}")
    for pts, label in ((s, "src"), (d, "dst")):
        diffs = pts[:, None, :] - pts[None, :, :]
        dup = np.linalg.norm(diffs, axis=2) + np.eye(len(pts)) * 1e9
        if dup.min() < 1e-9:
            raise DegenerateConfiguration(f"duplicate points in {label}")
    if len(s) == 4 and (_has_collinear_triple(s) or _has_collinear_triple(d)):
        raise DegenerateConfiguration("three of the four points are collinear")

    t_src = _normalization(s)
    t_dst = _normalization(d)
    sn = (t_src @ np.column_stack([s, np.ones(len(s))]).T).T
    dn = (t_dst @ np.column_stack([d, np.ones(len(d))]).T).T

    a = np.zeros((2 * len(s), 9))
    for i, ((x, y, _), (u, v, _)) in enumerate(zip(sn, dn)):
        a[2 * i] = [-x, -y, -1, 0, 0, 0, u * x, u * y, u]
        a[2 * i + 1] = [0, 0, 0, -x, -y, -1, v * x, v * y, v]

    _, sv, vt = np.linalg.svd(a)
    # Rank below 8 means the nullspace holds more than one solution.
    if sv[7] <= 1e-10 * sv[0]:
        raise DegenerateConfiguration("correspondences do not determine a unique homography")
    hn = vt[-1].reshape(3, 3)

    h = np.linalg.inv(t_dst) @ hn @ t_src
    if abs(h[2, 2]) < 1e-12 * np.linalg.norm(h):
        raise DegenerateConfiguration("homography cannot be scaled to m[2][2] == 1")
    return Homography(h / h[2, 2])


def project(h: Homography, p: Point2) -> Point2:
    """Apply the homography to a point and perform the perspective divide."""
    v = h.m @ (p.x, p.y, 1.0)
    w = float(v[2])
    if abs(w) <= 1e-12:
        raise PointAtInfinity(f"point ({p.x}, {p.y}) maps to infinity")
    return Point2(float(v[0]) / w, float(v[1]) / w)


def reprojection_error(h: Homography, src, dst) -> float:
    """Mean Euclidean distance between projected src points and dst points."""
    src = list(src)
    dst = list(dst)
    if not src or not dst:
        raise EmptyInput("reprojection error needs at least one correspondence")
    if len(src) != len(dst):
        raise ValueError(f"src and dst must pair up: {len(src)} vs {len(dst)}")
    total = 0.0
    for p, q in zip(src, dst):
        pp = project(h, p)
        total += math.hypot(pp.x - q.x, pp.y - q.y)
    return total / len(src)


def wall_distance(h: Homography, a: Point2, b: Point2) -> float:
    """Real-world distance between two image points, measured on the wall plane."""
    pa = project(h, a)
    pb = project(h, b)
    return math.hypot(pa.x - pb.x, pa.y - pb.y)
