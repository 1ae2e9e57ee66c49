"""Gravity-aligned two-view geometry over a ground plane.

Frames and conventions
----------------------
* Pixel coordinates are measured from the principal point, so the calibration
  matrix is ``K = diag(f, f, 1)``.
* A camera rotation ``R_i`` maps world vectors into camera ``i``. It factors as
  ``R_i = A_i @ R_yaw(psi_i)``, where ``A_i`` is the IMU attitude (pitch and
  roll only) and ``R_yaw`` rotates about the world y-axis. The y-axis is the
  gravity direction and points towards the floor.
* The *rectified* frame of camera ``i`` is ``A_i^T`` applied to camera
  coordinates. In that frame the floor has normal ``(0, 1, 0)``. The floor
  depth of the first camera is normalised to 1.
* The ground homography ``Hy = R_y(theta) + t' e_y^T`` maps rectified rays of
  view 1 to rectified rays of view 2. It is parameterised by
  ``h = (h1, ..., h5)``::

      [[ h1, h3, h2],
       [  0, h4,  0],
       [-h2, h5, h1]]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    DegenerateScaleError,
    InvalidHomographyError,
    InvalidInputError,
)

GRAVITY_AXIS = np.array([0.0, 1.0, 0.0])
ZERO_TRANSLATION_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    """Rotation about the gravity axis, in the convention used for the yaw."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a rotation of ``angle`` about ``axis``."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


def is_rotation(R, tol: float = 1e-12) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return (
        np.abs(R.T @ R - np.eye(3)).max() <= tol
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def orthonormalize(R) -> np.ndarray:
    """Closest rotation matrix in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PixelPoint:
    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise InvalidInputError(f"non-finite pixel coordinates ({self.u}, {self.v})")

    def homogeneous(self) -> np.ndarray:
        return np.array([self.u, self.v, 1.0])


@dataclass(frozen=True)
class ImuAttitude:
    """Pitch/roll rotation reported by the IMU for one view."""

    matrix: np.ndarray
    tol: float = field(default=1e-12, compare=False, repr=False)

    def __post_init__(self):
        R = np.asarray(self.matrix, dtype=float)
        if not is_rotation(R, self.tol):
            raise InvalidInputError("attitude is not a proper rotation matrix")
        object.__setattr__(self, "matrix", _frozen(R))

    @classmethod
    def from_pitch_roll(cls, pitch: float, roll: float) -> "ImuAttitude":
        """``R = R_z(roll) @ R_x(pitch)``; neither factor moves the yaw."""
        return cls(rot_z(roll) @ rot_x(pitch))

    @classmethod
    def identity(cls) -> "ImuAttitude":
        return cls(np.eye(3))

    def __eq__(self, other):
        return isinstance(other, ImuAttitude) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


@dataclass(frozen=True)
class Intrinsics:
    f: float

    def __post_init__(self):
        if not (math.isfinite(self.f) and self.f > 0):
            raise InvalidInputError(f"focal length must be finite and positive, got {self.f}")

    @property
    def w(self) -> float:
        return 1.0 / self.f

    def K(self) -> np.ndarray:
        return np.diag([self.f, self.f, 1.0])

    def K_inv(self) -> np.ndarray:
        return np.diag([1.0 / self.f, 1.0 / self.f, 1.0])


@dataclass(frozen=True)
class Correspondence:
    x1: PixelPoint
    x2: PixelPoint
    att1: ImuAttitude
    att2: ImuAttitude

    @classmethod
    def from_arrays(cls, x1, x2, R1, R2) -> "Correspondence":
        a1 = R1 if isinstance(R1, ImuAttitude) else ImuAttitude(R1)
        a2 = R2 if isinstance(R2, ImuAttitude) else ImuAttitude(R2)
        return cls(PixelPoint(float(x1[0]), float(x1[1])),
                   PixelPoint(float(x2[0]), float(x2[1])), a1, a2)

    @property
    def attitudes(self) -> tuple[ImuAttitude, ImuAttitude]:
        return self.att1, self.att2


@dataclass(frozen=True)
class GroundHomography:
    h1: float
    h2: float
    h3: float
    h4: float
    h5: float

    @classmethod
    def from_vector(cls, h) -> "GroundHomography":
        h = np.asarray(h, dtype=float).ravel()
        if h.shape != (5,):
            raise InvalidInputError("a ground homography has exactly five parameters")
        return cls(*(float(v) for v in h))

    @classmethod
    def from_motion(cls, yaw: float, t) -> "GroundHomography":
        """Forward construction ``Hy = R_y(yaw) + t e_y^T`` (plane depth 1)."""
        t = np.asarray(t, dtype=float)
        return cls(math.cos(yaw), math.sin(yaw), float(t[0]), 1.0 + float(t[1]), float(t[2]))

    def as_vector(self) -> np.ndarray:
        return np.array([self.h1, self.h2, self.h3, self.h4, self.h5])

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.h1, self.h3, self.h2],
            [0.0, self.h4, 0.0],
            [-self.h2, self.h5, self.h1],
        ])

    def trig_residual(self) -> float:
        return abs(self.h1 * self.h1 + self.h2 * self.h2 - 1.0)

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return self.trig_residual() <= tol

    def __neg__(self) -> "GroundHomography":
        return GroundHomography(-self.h1, -self.h2, -self.h3, -self.h4, -self.h5)


@dataclass(frozen=True)
class RelativePose:
    """Relative motion from view 1 to view 2: ``X2 = R X1 + t``.

    ``t`` is a unit vector, or exactly zero when the motion is a pure rotation.
    ``t_norm`` keeps the magnitude the translation had before normalisation.
    """

    yaw: float
    R: np.ndarray
    t: np.ndarray
    t_norm: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "R", _frozen(self.R))
        object.__setattr__(self, "t", _frozen(self.t))

    @property
    def is_pure_rotation(self) -> bool:
        return not np.any(self.t)

    def __eq__(self, other):
        return (
            isinstance(other, RelativePose)
            and self.yaw == other.yaw
            and np.array_equal(self.R, other.R)
            and np.array_equal(self.t, other.t)
            and self.t_norm == other.t_norm
        )


@dataclass(frozen=True)
class ScenarioConfig:
    """Ground plane setup shared by all scenarios: normal ``e_y``, depth 1."""

    f1: float
    f2: float
    plane_normal: tuple[float, float, float] = (0.0, 1.0, 0.0)
    plane_depth: float = 1.0


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _as_matrix(att) -> np.ndarray:
    return att.matrix if isinstance(att, ImuAttitude) else np.asarray(att, dtype=float)


def _as_focal(intr) -> float:
    return intr.f if isinstance(intr, Intrinsics) else float(intr)


def rectify(x, attitude, intr) -> np.ndarray:
    """Rectified viewing ray ``A^T K^-1 (u, v, 1)`` of a pixel.

    ``x`` may be a :class:`PixelPoint`, a pair ``(u, v)`` or an ``(n, 2)``
    array; the result has shape ``(3,)`` or ``(n, 3)`` accordingly.
    """
    f = _as_focal(intr)
    if not (math.isfinite(f) and f > 0):
        raise InvalidInputError("focal length must be finite and positive")
    if isinstance(x, PixelPoint):
        pts = np.array([[x.u, x.v]])
        single = True
    else:
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
    if pts.shape[-1] != 2 or not np.all(np.isfinite(pts)):
        raise InvalidInputError("pixel coordinates must be finite (u, v) pairs")
    A = _as_matrix(attitude)
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("attitude must be finite")
    rays = np.column_stack([pts / f, np.ones(len(pts))])
    y = rays @ A  # row-wise A^T @ ray
    return y[0] if single else y


def ground_homography_to_pose(h: GroundHomography, tol: float = 1e-6) -> RelativePose:
    """Read rotation and translation of the rectified frame off ``h``."""
    if h.trig_residual() > tol:
        raise InvalidHomographyError(
            f"h1^2 + h2^2 = {h.h1 ** 2 + h.h2 ** 2:.3g}, expected 1"
        )
    R = np.array([[h.h1, 0.0, h.h2], [0.0, 1.0, 0.0], [-h.h2, 0.0, h.h1]])
    t = np.array([h.h3, h.h4 - 1.0, h.h5])
    n = float(np.linalg.norm(t))
    if n < ZERO_TRANSLATION_TOL:
        t, n = np.zeros(3), 0.0
    else:
        t = t / n
    yaw = math.atan2(h.h2, h.h1)
    if yaw == -math.pi:
        yaw = math.pi
    return RelativePose(yaw, R, t, n)


def compose_world_pose(rel: RelativePose, att1, att2) -> RelativePose:
    """Undo the IMU rectification: ``R = A2 Ry A1^T``, ``t = A2 t'``."""
    A1, A2 = _as_matrix(att1), _as_matrix(att2)
    R = A2 @ rel.R @ A1.T
    t = A2 @ rel.t
    n = float(np.linalg.norm(t))
    if n > 0:
        t = t / n
    return RelativePose(rel.yaw, R, t, rel.t_norm)


def normalize_ground_homography(h_raw, prefer_positive_h4: bool = True):
    """Fix the scale of a raw 5-vector with the unit trig constraint.

    Returns ``(chosen, (plus, minus))``: both signed scalings, plus the one
    whose ``h4`` is positive (the floor stays on the same side of both views).
    """
    h = np.asarray(h_raw, dtype=float).ravel()
    if h.shape != (5,) or not np.all(np.isfinite(h)):
        raise InvalidInputError("expected five finite homography parameters")
    s = math.hypot(h[0], h[1])
    if s == 0.0:
        raise DegenerateScaleError("h1 = h2 = 0; the rotation block carries no scale")
    plus = GroundHomography.from_vector(h / s)
    minus = GroundHomography.from_vector(-h / s)
    chosen = plus
    if prefer_positive_h4 and plus.h4 < 0:
        chosen = minus
    return chosen, (plus, minus)


def hy_from_pixel_homography(H, att1, att2, intr1, intr2) -> np.ndarray:
    """Rectified homography ``A2^T K2^-1 H K1 A1`` (not rescaled)."""
    A1, A2 = _as_matrix(att1), _as_matrix(att2)
    f1, f2 = _as_focal(intr1), _as_focal(intr2)
    if not (f1 > 0 and f2 > 0):
        raise InvalidInputError("intrinsics must be positive")
    K1 = np.diag([f1, f1, 1.0])
    K2inv = np.diag([1.0 / f2, 1.0 / f2, 1.0])
    return A2.T @ K2inv @ np.asarray(H, dtype=float) @ K1 @ A1


def pixel_homography(h, att1, att2, intr1, intr2) -> np.ndarray:
    """Pixel-space homography ``K2 A2 Hy A1^T K1^-1`` induced by the floor."""
    Hy = h.matrix() if isinstance(h, GroundHomography) else np.asarray(h, dtype=float)
    A1, A2 = _as_matrix(att1), _as_matrix(att2)
    f1, f2 = _as_focal(intr1), _as_focal(intr2)
    K2 = np.diag([f2, f2, 1.0])
    K1inv = np.diag([1.0 / f1, 1.0 / f1, 1.0])
    return K2 @ A2 @ Hy @ A1.T @ K1inv


def stack_correspondences(cs: Iterable[Correspondence]):
    """Arrays ``(x1, x2, A1, A2)`` for correspondences sharing a view pair."""
    cs = list(cs)
    if not cs:
        raise InvalidInputError("no correspondences given")
    att1, att2 = cs[0].att1, cs[0].att2
    for c in cs[1:]:
        if not (np.allclose(c.att1.matrix, att1.matrix, atol=1e-12)
                and np.allclose(c.att2.matrix, att2.matrix, atol=1e-12)):
            raise InvalidInputError("correspondences come from different view pairs")
    x1 = np.array([[c.x1.u, c.x1.v] for c in cs])
    x2 = np.array([[c.x2.u, c.x2.v] for c in cs])
    return x1, x2, att1.matrix, att2.matrix
