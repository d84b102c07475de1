"""
Geometric value types and the generalized-camera data model.

Rays, camera centers and orientations are expressed in the rig (generalized
camera) frame. World points are mapped into the rig frame by a
SimilarityTransform: y = scale * R @ x + t.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from .errors import BehindCamera

Vec3 = npt.NDArray[np.float64]        # shape: (3,)
Pixel = npt.NDArray[np.float64]       # shape: (2,)
Rotation = npt.NDArray[np.float64]    # shape: (3, 3), proper orthonormal

ROTATION_TOL = 1e-10
UNIT_TOL = 1e-12


def as_vec3(value: Sequence[float]) -> Vec3:
    """Convert a 3-sequence to a finite float64 vector."""
    vec = np.asarray(value, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"Vector components must be finite, got {vec}")
    return vec


def as_rotation(matrix: Sequence[Sequence[float]]) -> Rotation:
    """Convert to a 3x3 matrix and check RᵀR = I and det(R) = +1."""
    rot = np.asarray(matrix, dtype=np.float64).reshape(3, 3)
    if not np.allclose(rot.T @ rot, np.eye(3), atol=ROTATION_TOL, rtol=0.0):
        raise ValueError("Rotation matrix is not orthonormal")
    if abs(np.linalg.det(rot) - 1.0) > ROTATION_TOL:
        raise ValueError("Rotation matrix must have determinant +1")
    return rot


def normalize(vec: npt.ArrayLike) -> Vec3:
    vec = np.asarray(vec, dtype=np.float64)
    return vec / np.linalg.norm(vec)


@dataclass(frozen=True)
class Ray:
    """A viewing ray: origin (pinhole) plus unit direction, in the rig frame."""
    origin: Vec3
    direction: Vec3

    def __post_init__(self):
        object.__setattr__(self, "origin", as_vec3(self.origin))
        direction = as_vec3(self.direction)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            raise ValueError("Ray direction must be non-zero")
        if abs(norm - 1.0) > UNIT_TOL:
            direction = direction / norm
        object.__setattr__(self, "direction", direction)

    def point_at(self, depth: float) -> Vec3:
        """Point origin + depth * direction."""
        return self.origin + depth * self.direction

    def closest_depth(self, point: Vec3) -> float:
        """Signed depth of the orthogonal projection of point onto the ray line."""
        return float(self.direction @ (np.asarray(point, dtype=np.float64) - self.origin))


@dataclass(frozen=True)
class SimilarityTransform:
    """x -> scale * rotation @ x + translation."""
    scale: float
    rotation: Rotation
    translation: Vec3

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0.0:
            raise ValueError(f"Similarity scale must be positive, got {self.scale}")
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "rotation", as_rotation(self.rotation))
        object.__setattr__(self, "translation", as_vec3(self.translation))

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points: npt.ArrayLike) -> np.ndarray:
        """Apply to a (3,) point or an (N, 3) array of points."""
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * pts @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        """Homogeneous 4x4 matrix."""
        mat = np.eye(4)
        mat[:3, :3] = self.scale * self.rotation
        mat[:3, 3] = self.translation
        return mat


@dataclass(frozen=True)
class AffineTransform:
    """x -> linear @ x + translation, no orthogonality requirement."""
    linear: np.ndarray
    translation: Vec3

    def __post_init__(self):
        linear = np.asarray(self.linear, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(linear)):
            raise ValueError("Affine linear part must be finite")
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "translation", as_vec3(self.translation))

    def apply(self, points: npt.ArrayLike) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.linear.T + self.translation


Transform = Union[SimilarityTransform, AffineTransform]


@dataclass(frozen=True)
class PinholeCamera:
    """
    A pinhole camera of the rig.

    ``orientation`` maps camera-frame directions into the rig frame, so a rig
    point X has camera coordinates orientationᵀ (X - center). The principal
    point defaults to the image center.
    """
    center: Vec3
    orientation: Rotation
    focal_length: float
    image_width: int
    image_height: int
    principal_point: Optional[Pixel] = None

    def __post_init__(self):
        if not self.focal_length > 0.0:
            raise ValueError(f"Focal length must be positive, got {self.focal_length}")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("Image size must be positive")
        object.__setattr__(self, "center", as_vec3(self.center))
        object.__setattr__(self, "orientation", as_rotation(self.orientation))
        object.__setattr__(self, "focal_length", float(self.focal_length))
        object.__setattr__(self, "image_width", int(self.image_width))
        object.__setattr__(self, "image_height", int(self.image_height))
        if self.principal_point is None:
            pp = np.array([self.image_width / 2.0, self.image_height / 2.0])
        else:
            pp = np.asarray(self.principal_point, dtype=np.float64).reshape(2)
        object.__setattr__(self, "principal_point", pp)

    def to_camera_frame(self, point: npt.ArrayLike) -> np.ndarray:
        """Rig-frame point(s) -> camera-frame coordinates."""
        return (np.asarray(point, dtype=np.float64) - self.center) @ self.orientation

    def in_image(self, pixel: Pixel) -> bool:
        u, v = pixel
        return 0.0 <= u < self.image_width and 0.0 <= v < self.image_height


@dataclass(frozen=True)
class Correspondence:
    """A world point observed at ``pixel`` by camera ``camera_index`` of the rig."""
    world_point: Vec3
    ray: Ray
    camera_index: int
    pixel: Pixel

    def __post_init__(self):
        object.__setattr__(self, "world_point", as_vec3(self.world_point))
        object.__setattr__(self, "pixel", np.asarray(self.pixel, dtype=np.float64).reshape(2))


@dataclass(frozen=True)
class GeneralizedCamera:
    """An ordered rig of pinhole cameras treated as one sensor."""
    cameras: Tuple[PinholeCamera, ...] = field(default_factory=tuple)

    def __post_init__(self):
        cameras = tuple(self.cameras)
        if not cameras:
            raise ValueError("A generalized camera needs at least one pinhole camera")
        object.__setattr__(self, "cameras", cameras)

    def __len__(self) -> int:
        return len(self.cameras)

    def observe(self, world_point: npt.ArrayLike, camera_index: int, pixel: npt.ArrayLike) -> Correspondence:
        """Build a correspondence, back-projecting the pixel through the indexed camera."""
        ray = backproject(self.cameras[camera_index], pixel)
        return Correspondence(world_point=world_point, ray=ray,
                              camera_index=camera_index, pixel=pixel)


def backproject(camera: PinholeCamera, pixel: npt.ArrayLike) -> Ray:
    """Viewing ray of a pixel, with origin at the camera center, in the rig frame."""
    u, v = np.asarray(pixel, dtype=np.float64).reshape(2)
    cx, cy = camera.principal_point
    local = np.array([(u - cx) / camera.focal_length, (v - cy) / camera.focal_length, 1.0])
    direction = camera.orientation @ local
    return Ray(origin=camera.center, direction=direction / np.linalg.norm(direction))


def project(camera: PinholeCamera, point: npt.ArrayLike) -> Pixel:
    """Perspective projection of a rig-frame point to pixels."""
    local = camera.to_camera_frame(point)
    depth = local[2]
    if depth <= 0.0:
        raise BehindCamera(f"Point has non-positive depth {depth:.3g} in the camera frame")
    return camera.focal_length * local[:2] / depth + camera.principal_point


def apply_similarity(transform: SimilarityTransform, x: npt.ArrayLike) -> np.ndarray:
    return transform.apply(x)


def invert_similarity(transform: SimilarityTransform) -> SimilarityTransform:
    """Inverse map: x = (1/c) Rᵀ (y - t)."""
    rot_t = transform.rotation.T
    scale = 1.0 / transform.scale
    return SimilarityTransform(scale, rot_t, -scale * rot_t @ transform.translation)


def compose_similarity(outer: SimilarityTransform, inner: SimilarityTransform) -> SimilarityTransform:
    """The transform x -> outer(inner(x))."""
    return SimilarityTransform(
        scale=outer.scale * inner.scale,
        rotation=outer.rotation @ inner.rotation,
        translation=outer.scale * outer.rotation @ inner.translation + outer.translation,
    )


def look_at(center: npt.ArrayLike, target: npt.ArrayLike, up: npt.ArrayLike) -> Rotation:
    """Orientation whose optical (z) axis points from center towards target."""
    z_axis = normalize(np.asarray(target, dtype=np.float64) - np.asarray(center, dtype=np.float64))
    x_axis = np.cross(up, z_axis)
    if np.linalg.norm(x_axis) < 1e-9:
        x_axis = np.cross([1.0, 0.0, 0.0], z_axis)
        if np.linalg.norm(x_axis) < 1e-9:
            x_axis = np.cross([0.0, 1.0, 0.0], z_axis)
    x_axis = normalize(x_axis)
    y_axis = np.cross(z_axis, x_axis)
    return np.column_stack([x_axis, y_axis, z_axis])
