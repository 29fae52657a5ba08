"""Minimal planar/spatial geometry kernel.

Points are plain numpy arrays (shape (2,) or (3,), millimeters). Angles
crossing the public API are in degrees; everything internal is radians.
The palm reference plane is z = 0 throughout the toolkit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParallelAxis, PointInsideCircle

PALM_PLANE_Z = 0.0
_ORTHO_TOL = 1e-9
_UNIT_TOL = 1e-12
_PARALLEL_TOL = 1e-9


class Winding(enum.Enum):
    """Sense in which a cable passes a circular element.

    CCW means the cable wraps counterclockwise (circle center on the left of
    the direction of travel); CW the mirror image.
    """

    CCW = "ccw"
    CW = "cw"

    @property
    def sign(self) -> float:
        return 1.0 if self is Winding.CCW else -1.0


def vec2(x: float, y: float) -> np.ndarray:
    return np.array([x, y], dtype=float)


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=float)


def unit_from_angle(theta_rad):
    """Planar unit vector(s) at angle theta from +x. Broadcasts."""
    theta_rad = np.asarray(theta_rad, dtype=float)
    return np.stack([np.cos(theta_rad), np.sin(theta_rad)], axis=-1)


def rot2(theta_rad: float) -> np.ndarray:
    c, s = math.cos(theta_rad), math.sin(theta_rad)
    return np.array([[c, -s], [s, c]])


def perp2(v: np.ndarray) -> np.ndarray:
    """Rotate planar vector(s) by +90 degrees."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def rotation_matrix_about_axis(direction: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (not necessarily unit) direction."""
    d = np.asarray(direction, dtype=float)
    n = np.linalg.norm(d)
    if n == 0.0:
        raise ValueError("rotation axis direction is zero")
    k = d / n
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    kx, ky, kz = k
    K = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return c * np.eye(3) + s * K + (1.0 - c) * np.outer(k, k)


@dataclass(frozen=True)
class SpatialLine:
    """Infinite line: unit direction + anchor point (mm).

    Canonical form used for comparison: anchor on the palm plane z = 0 and
    direction with positive z component. Lines parallel to the palm plane
    have no canonical form and raise ParallelAxis on canonicalization.
    """

    direction: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0.0:
            raise ValueError("line direction is zero")
        if abs(n - 1.0) > _UNIT_TOL:
            d = d / n
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))

    def point_at(self, t: float) -> np.ndarray:
        return self.anchor + t * self.direction

    def closest_point_to(self, p: np.ndarray) -> np.ndarray:
        w = np.asarray(p, dtype=float) - self.anchor
        return self.anchor + float(w @ self.direction) * self.direction

    def distance_to(self, p: np.ndarray) -> float:
        w = np.asarray(p, dtype=float) - self.anchor
        return float(np.linalg.norm(w - (w @ self.direction) * self.direction))

    def canonical(self) -> "SpatialLine":
        d = self.direction
        if abs(d[2]) < _PARALLEL_TOL:
            raise ParallelAxis("line parallel to the palm plane has no canonical form")
        if d[2] < 0.0:
            d = -d
        anchor = line_plane_intersection(SpatialLine(d, self.anchor))
        return SpatialLine(d, anchor)

    def is_same_line(self, other: "SpatialLine", tol: float = 1e-9) -> bool:
        a, b = self.canonical(), other.canonical()
        return (np.linalg.norm(a.direction - b.direction) <= tol
                and np.linalg.norm(a.anchor - b.anchor) <= tol)


@dataclass(frozen=True)
class RigidTransform3:
    """Rotation (3x3, det +1) + translation (mm). Acts as p -> R p + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3, translation 3-vector")
        if np.max(np.abs(R @ R.T - np.eye(3))) > _ORTHO_TOL:
            raise ValueError("rotation not orthonormal within 1e-9")
        if np.linalg.det(R) < 0.0:
            raise ValueError("rotation must be proper (det +1)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform3":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def rotation_about_line(cls, axis: SpatialLine, angle_deg: float) -> "RigidTransform3":
        R = rotation_matrix_about_axis(axis.direction, angle_deg)
        t = axis.anchor - R @ axis.anchor
        return cls(R, t)

    @classmethod
    def rotation_about_z(cls, angle_deg: float, pivot=None) -> "RigidTransform3":
        axis = SpatialLine(vec3(0, 0, 1), vec3(0, 0, 0) if pivot is None else np.asarray(pivot, float))
        return cls.rotation_about_line(axis, angle_deg)

    def apply(self, points):
        """Transform a point (3,) or batch (..., 3)."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform3") -> "RigidTransform3":
        """self after other: (self.compose(other)).apply(p) == self.apply(other.apply(p))."""
        return RigidTransform3(self.rotation @ other.rotation,
                               self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform3":
        return RigidTransform3(self.rotation.T, -(self.rotation.T @ self.translation))

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


def rotate_about_line(p: np.ndarray, axis: SpatialLine, angle_deg: float) -> np.ndarray:
    """Rotate point(s) about an arbitrary spatial axis. Total function."""
    return RigidTransform3.rotation_about_line(axis, angle_deg).apply(p)


def tangent_points(external: np.ndarray, circle_center: np.ndarray, radius: float,
                   side: Winding) -> np.ndarray:
    """Tangency point on a circle seen from an external planar point.

    The returned point is the one such that a cable traveling from `external`
    to it continues around the circle in the `side` winding sense. The segment
    external->tangent is perpendicular to the radius at the tangent point.

    Raises PointInsideCircle when the point lies on or inside the circle
    (boundary counts as inside: a zero-length tangent would break the
    downstream moment-arm division).
    """
    p = np.asarray(external, dtype=float)
    c = np.asarray(circle_center, dtype=float)
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    w = p - c
    d = float(np.linalg.norm(w))
    if d <= radius:
        raise PointInsideCircle(
            f"point at distance {d:.6g} from center, radius {radius:.6g}")
    u = w / d
    gamma = math.acos(radius / d)
    return c + radius * (rot2(side.sign * gamma) @ u)


def line_plane_intersection(line: SpatialLine) -> np.ndarray:
    """Intersection of a line with the palm reference plane z = 0."""
    dz = line.direction[2]
    if abs(dz) < _PARALLEL_TOL:
        raise ParallelAxis(f"|direction.z| = {abs(dz):.3g} < {_PARALLEL_TOL}")
    t = (PALM_PLANE_Z - line.anchor[2]) / dz
    p = line.point_at(t)
    p[2] = PALM_PLANE_Z
    return p
