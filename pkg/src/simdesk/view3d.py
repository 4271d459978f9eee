"""Software 3D math for point-cloud views.

This unit is deliberately self-contained: nothing else in the package
imports it at module level, so a 2D-only deployment can drop the file and
everything except 3D projection keeps working.

Conventions: right-handed look-at camera, NDC x,y in [-1, 1] with y up,
depth in [0, 1] after the perspective divide (0 at the near plane).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

PITCH_LIMIT_DEG = 89.0


class DegenerateCamera(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    eye: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)
    fov_y: float = 60.0  # degrees
    near: float = 0.01
    far: float = 100.0

    def validate(self) -> None:
        eye = np.asarray(self.eye, dtype=float)
        target = np.asarray(self.look_at, dtype=float)
        up = np.asarray(self.up, dtype=float)
        if not (np.all(np.isfinite(eye)) and np.all(np.isfinite(target)) and np.all(np.isfinite(up))):
            raise DegenerateCamera("non-finite camera")
        if np.allclose(eye, target):
            raise DegenerateCamera("eye coincides with look_at")
        if not 0.0 < self.fov_y < 180.0:
            raise DegenerateCamera(f"fov_y {self.fov_y} out of (0, 180)")
        if not 0.0 < self.near < self.far:
            raise DegenerateCamera("need 0 < near < far")
        forward = target - eye
        if np.linalg.norm(np.cross(forward, up)) < 1e-12 * np.linalg.norm(forward) * np.linalg.norm(up):
            raise DegenerateCamera("up is parallel to the view direction")


def view_matrix(camera: Camera) -> np.ndarray:
    """Right-handed look-at: camera looks down its local -z."""
    camera.validate()
    eye = np.asarray(camera.eye, dtype=float)
    fwd = np.asarray(camera.look_at, dtype=float) - eye
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(camera.up, dtype=float))
    right = right / np.linalg.norm(right)
    up = np.cross(right, fwd)
    m = np.eye(4)
    m[0, :3] = right
    m[1, :3] = up
    m[2, :3] = -fwd
    m[:3, 3] = -m[:3, :3] @ eye
    return m


def perspective_matrix(camera: Camera, aspect: float) -> np.ndarray:
    """Perspective with tan(fov_y/2) vertical scaling and depth in [0, 1]."""
    if aspect <= 0 or not math.isfinite(aspect):
        raise DegenerateCamera(f"aspect {aspect}")
    fy = 1.0 / math.tan(math.radians(camera.fov_y) / 2.0)
    near, far = camera.near, camera.far
    m = np.zeros((4, 4))
    m[0, 0] = fy / aspect
    m[1, 1] = fy
    m[2, 2] = far / (near - far)
    m[2, 3] = far * near / (near - far)
    m[3, 2] = -1.0
    return m


def view_projection(camera: Camera, aspect: float) -> np.ndarray:
    return perspective_matrix(camera, aspect) @ view_matrix(camera)


def project_cloud(camera: Camera, aspect: float, positions) -> np.ndarray:
    """Project an (N, 3) cloud; rows are (ndc_x, ndc_y, depth).

    Points outside the frustum (behind the eye, outside [-1, 1] laterally,
    or with depth outside [0, 1]) are culled; retained rows keep input order.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.size == 0:
        return np.empty((0, 3))
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise ValueError("positions must be (N, 3)")
    m = view_projection(camera, aspect)
    hom = np.empty((positions.shape[0], 4))
    hom[:, :3] = positions
    hom[:, 3] = 1.0
    clip = hom @ m.T
    w = clip[:, 3]
    front = w > 1e-12
    ndc = np.empty_like(clip[:, :3])
    ndc[front] = clip[front, :3] / w[front, None]
    keep = front.copy()
    keep[front] &= (
        (np.abs(ndc[front, 0]) <= 1.0)
        & (np.abs(ndc[front, 1]) <= 1.0)
        & (ndc[front, 2] >= 0.0)
        & (ndc[front, 2] <= 1.0)
    )
    return ndc[keep]


def orbit(camera: Camera, dyaw: float, dpitch: float,
          world_up: tuple[float, float, float] = (0.0, 0.0, 1.0)) -> tuple[Camera, bool]:
    """Rotate the eye about look_at on a constant-radius sphere.

    Angles in radians; pitch is clamped inside (-89 deg, 89 deg).  Returns
    the new camera and whether the pitch clamp engaged.
    """
    camera.validate()
    eye = np.asarray(camera.eye, dtype=float)
    target = np.asarray(camera.look_at, dtype=float)
    wup = np.asarray(world_up, dtype=float)
    wup = wup / np.linalg.norm(wup)
    offset = eye - target
    radius = float(np.linalg.norm(offset))

    # Decompose the offset into yaw/pitch relative to world_up.
    z = float(np.dot(offset, wup))
    lateral = offset - z * wup
    lat_norm = float(np.linalg.norm(lateral))
    if lat_norm < 1e-12:
        # Degenerate pole start; synthesize a lateral reference axis.
        ref = np.array([1.0, 0.0, 0.0]) if abs(wup[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        lateral = ref - np.dot(ref, wup) * wup
        lateral /= np.linalg.norm(lateral)
        lat_norm = 0.0
        yaw = 0.0
    else:
        # Yaw measured in the plane perpendicular to world_up.
        ref = np.array([1.0, 0.0, 0.0]) if abs(wup[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = ref - np.dot(ref, wup) * wup
        u /= np.linalg.norm(u)
        v = np.cross(wup, u)
        yaw = math.atan2(float(np.dot(lateral, v)), float(np.dot(lateral, u)))
        lateral /= lat_norm
    pitch = math.atan2(z, lat_norm)

    yaw += dyaw
    limit = math.radians(PITCH_LIMIT_DEG)
    new_pitch = pitch + dpitch
    clamped = False
    if new_pitch > limit:
        new_pitch = limit
        clamped = True
    elif new_pitch < -limit:
        new_pitch = -limit
        clamped = True

    ref = np.array([1.0, 0.0, 0.0]) if abs(wup[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = ref - np.dot(ref, wup) * wup
    u /= np.linalg.norm(u)
    v = np.cross(wup, u)
    horiz = math.cos(yaw) * u + math.sin(yaw) * v
    new_offset = radius * (math.cos(new_pitch) * horiz + math.sin(new_pitch) * wup)
    new_eye = target + new_offset

    # Re-orthogonalize up against the new view direction.
    fwd = target - new_eye
    fwd = fwd / np.linalg.norm(fwd)
    up = wup - np.dot(wup, fwd) * fwd
    up = up / np.linalg.norm(up)
    return (
        replace(camera, eye=tuple(new_eye), up=tuple(up)),
        clamped,
    )
