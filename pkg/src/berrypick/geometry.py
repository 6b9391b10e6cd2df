"""Frames, rigid transforms, colored point clouds and axis-aligned boxes.

Every length in this package is expressed in meters and every cloud keeps
its points in insertion order; all operations below preserve that order.
Clouds are stored as numpy arrays internally (positions as float64 Nx3,
colors as uint8 Nx3) so the perception pipeline stays fast, while the
`points` property offers a per-point view for convenience.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, FrameMismatchError

VALID_FRAMES = ("base", "cam1", "cam2", "tool")

# tolerance for rotation-matrix orthonormality / determinant checks
ROTATION_TOL = 1e-9

# the tool tip orientation is fixed and identical to the base frame, so
# roll/pitch/yaw stay zero everywhere; no operation consumes them
FIXED_TOOL_RPY = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ValueError(f"Vec3 components must be finite, got {v!r}")

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> "Vec3":
        return cls(float(a[0]), float(a[1]), float(a[2]))


def distance(a: Vec3, b: Vec3) -> float:
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


@dataclass(frozen=True)
class Rgb:
    r: int
    g: int
    b: int

    def __post_init__(self):
        for v in (self.r, self.g, self.b):
            if not isinstance(v, (int, np.integer)) or not 0 <= v <= 255:
                raise ValueError(f"color channel out of range: {v!r}")


@dataclass(frozen=True)
class ColoredPoint:
    position: Vec3
    color: Rgb


class ColoredPointCloud:
    """Ordered colored point set tagged with the frame it is expressed in."""

    __slots__ = ("frame", "xyz", "rgb")

    def __init__(self, frame: str, xyz: np.ndarray, rgb: np.ndarray):
        if frame not in VALID_FRAMES:
            raise FrameMismatchError(f"unknown frame {frame!r}, expected one of {VALID_FRAMES}")
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        rgb = np.asarray(rgb, dtype=np.uint8).reshape(-1, 3)
        if len(xyz) != len(rgb):
            raise ValueError(f"position/color count mismatch: {len(xyz)} vs {len(rgb)}")
        if len(xyz) and not np.isfinite(xyz).all():
            raise ValueError("cloud contains non-finite positions")
        xyz.setflags(write=False)
        rgb.setflags(write=False)
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "rgb", rgb)

    def __setattr__(self, name, value):
        raise AttributeError("ColoredPointCloud is immutable")

    @classmethod
    def empty(cls, frame: str) -> "ColoredPointCloud":
        return cls(frame, np.empty((0, 3)), np.empty((0, 3), dtype=np.uint8))

    @classmethod
    def from_points(cls, frame: str, points) -> "ColoredPointCloud":
        xyz = np.array([[p.position.x, p.position.y, p.position.z] for p in points], dtype=float)
        rgb = np.array([[p.color.r, p.color.g, p.color.b] for p in points], dtype=np.uint8)
        if len(points) == 0:
            return cls.empty(frame)
        return cls(frame, xyz, rgb)

    @property
    def points(self) -> list[ColoredPoint]:
        return [
            ColoredPoint(Vec3(float(p[0]), float(p[1]), float(p[2])), Rgb(int(c[0]), int(c[1]), int(c[2])))
            for p, c in zip(self.xyz, self.rgb)
        ]

    def __len__(self) -> int:
        return len(self.xyz)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ColoredPointCloud):
            return NotImplemented
        return (
            self.frame == other.frame
            and np.array_equal(self.xyz, other.xyz)
            and np.array_equal(self.rgb, other.rgb)
        )

    def __repr__(self) -> str:
        return f"ColoredPointCloud(frame={self.frame!r}, n={len(self)})"


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation; maps points from `source_frame` to `target_frame`.

    The frame labels are optional and only used for validation when present.
    """

    rotation: np.ndarray
    translation: Vec3
    source_frame: str | None = None
    target_frame: str | None = None

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        rot.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        err = np.abs(rot.T @ rot - np.eye(3)).max()
        if err > ROTATION_TOL:
            raise ValueError(f"rotation is not orthonormal (max deviation {err:.2e})")
        det = float(np.linalg.det(rot))
        if abs(det - 1.0) > ROTATION_TOL:
            raise ValueError(f"rotation determinant is {det}, expected +1")

    @classmethod
    def identity(cls, source_frame: str | None = None, target_frame: str | None = None) -> "RigidTransform":
        return cls(np.eye(3), Vec3(0.0, 0.0, 0.0), source_frame, target_frame)

    def apply(self, p: Vec3) -> Vec3:
        return Vec3.from_array(self.rotation @ p.to_array() + self.translation.to_array())

    def apply_to(self, xyz: np.ndarray) -> np.ndarray:
        return xyz @ self.rotation.T + self.translation.to_array()

    def inverse(self) -> "RigidTransform":
        rot = self.rotation.T
        t = -(rot @ self.translation.to_array())
        return RigidTransform(rot, Vec3.from_array(t), self.target_frame, self.source_frame)


@dataclass(frozen=True)
class Aabb:
    min: Vec3
    max: Vec3

    def __post_init__(self):
        if self.min.x > self.max.x or self.min.y > self.max.y or self.min.z > self.max.z:
            raise ValueError(f"degenerate box: min={self.min} max={self.max}")

    @property
    def center(self) -> Vec3:
        return Vec3(
            (self.min.x + self.max.x) / 2.0,
            (self.min.y + self.max.y) / 2.0,
            (self.min.z + self.max.z) / 2.0,
        )

    def contains(self, p: Vec3) -> bool:
        return (
            self.min.x <= p.x <= self.max.x
            and self.min.y <= p.y <= self.max.y
            and self.min.z <= p.z <= self.max.z
        )

    def inflate(self, margin: float) -> "Aabb":
        return Aabb(
            Vec3(self.min.x - margin, self.min.y - margin, self.min.z - margin),
            Vec3(self.max.x + margin, self.max.y + margin, self.max.z + margin),
        )

    def translate(self, offset: Vec3) -> "Aabb":
        return Aabb(
            Vec3(self.min.x + offset.x, self.min.y + offset.y, self.min.z + offset.z),
            Vec3(self.max.x + offset.x, self.max.y + offset.y, self.max.z + offset.z),
        )


def transform_point(t: RigidTransform, p: Vec3) -> Vec3:
    """Apply R*p + t."""
    return t.apply(p)


def transform_cloud(t: RigidTransform, cloud: ColoredPointCloud, target_frame: str) -> ColoredPointCloud:
    """Re-express a cloud in `target_frame`; order and colors are untouched."""
    if t.source_frame is not None and cloud.frame != t.source_frame:
        raise FrameMismatchError(
            f"cloud is in frame {cloud.frame!r} but transform maps from {t.source_frame!r}"
        )
    if t.target_frame is not None and target_frame != t.target_frame:
        raise FrameMismatchError(
            f"requested target {target_frame!r} but transform maps to {t.target_frame!r}"
        )
    return ColoredPointCloud(target_frame, t.apply_to(cloud.xyz), cloud.rgb)


def merge_clouds(a: ColoredPointCloud, b: ColoredPointCloud) -> ColoredPointCloud:
    """Concatenate two clouds expressed in the same frame, a's points first."""
    if a.frame != b.frame:
        raise FrameMismatchError(f"cannot merge clouds in frames {a.frame!r} and {b.frame!r}")
    return ColoredPointCloud(a.frame, np.concatenate([a.xyz, b.xyz]), np.concatenate([a.rgb, b.rgb]))


def cloud_extent(cloud: ColoredPointCloud, axis: int) -> tuple[float, float]:
    """Exact (min, max) of one coordinate over all points."""
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
    if len(cloud) == 0:
        raise EmptyInputError("cloud_extent of an empty cloud")
    col = cloud.xyz[:, axis]
    return float(col.min()), float(col.max())


def dump_cloud(cloud: ColoredPointCloud, path) -> None:
    """Write the plain-text cloud format: one header line, one line per point."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"frame={cloud.frame} count={len(cloud)}\n")
        for p, c in zip(cloud.xyz, cloud.rgb):
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r} {int(c[0])} {int(c[1])} {int(c[2])}\n")


def load_cloud(path) -> ColoredPointCloud:
    with open(path, "r") as fh:
        header = fh.readline().strip()
        fields = dict(part.split("=", 1) for part in header.split())
        if "frame" not in fields or "count" not in fields:
            raise ValueError(f"malformed cloud header: {header!r}")
        count = int(fields["count"])
        xyz = np.empty((count, 3))
        rgb = np.empty((count, 3), dtype=np.uint8)
        for i in range(count):
            parts = fh.readline().split()
            if len(parts) != 6:
                raise ValueError(f"malformed point line {i + 1}")
            xyz[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
            rgb[i] = [int(parts[3]), int(parts[4]), int(parts[5])]
    return ColoredPointCloud(fields["frame"], xyz, rgb)
