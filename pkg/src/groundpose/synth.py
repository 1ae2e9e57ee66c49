"""Synthetic two-view floor scenes with full ground truth.

Scene points lie on the floor ``y = 0`` (the y-axis points along gravity, so
cameras sit at negative y). Each camera looks roughly down: its IMU attitude
is a pitch near 90 degrees plus a small roll, followed by a uniformly random
yaw. Focal lengths are drawn log-uniformly in [300, 1500] px with the
principal point at the origin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import GenerationFailureError, InvalidInputError
from .geom import (
    Correspondence,
    GroundHomography,
    ImuAttitude,
    RelativePose,
    compose_world_pose,
    ground_homography_to_pose,
    rot_x,
    rot_y,
    rot_z,
)

FOCAL_MODES = ("calibrated", "fhf", "hf", "f1hf2")
FOCAL_RANGE = (300.0, 1500.0)
MAX_ATTEMPTS = 100
MIN_DEPTH = 0.1
JSON_FIELDS = ("points", "attitudes", "pixels", "focals", "sigma", "outlier_mask", "seed")


@dataclass(frozen=True)
class InstanceConfig:
    n_planar: int = 3
    n_nonplanar: int = 0
    sigma: float = 0.0
    outlier_fraction: float = 0.0
    focal_mode: str = "fhf"
    pitch_jitter: float = 0.4
    roll_jitter: float = 0.3
    nonplanar_offset: tuple[float, float] = (0.1, 0.5)

    def __post_init__(self):
        if self.n_planar < 3:
            raise InvalidInputError("need at least three floor points")
        if self.n_nonplanar < 0:
            raise InvalidInputError("n_nonplanar must be non-negative")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise InvalidInputError("outlier_fraction must lie in [0, 1)")
        if self.sigma < 0:
            raise InvalidInputError("sigma must be non-negative")
        if self.focal_mode not in FOCAL_MODES:
            raise InvalidInputError(f"focal_mode must be one of {FOCAL_MODES}")


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    points: np.ndarray
    attitudes: tuple[np.ndarray, np.ndarray]
    focals: tuple[float, float]
    x1: np.ndarray
    x2: np.ndarray
    sigma: float
    outlier_mask: np.ndarray
    seed: Optional[int]
    # ground truth; None for instances read back from JSON
    yaws: Optional[tuple[float, float]] = None
    centers: Optional[tuple[np.ndarray, np.ndarray]] = None
    x1_clean: Optional[np.ndarray] = None
    x2_clean: Optional[np.ndarray] = None
    config: Optional[InstanceConfig] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.x1)

    @property
    def planar_mask(self) -> np.ndarray:
        return self.points[:, 1] == 0.0

    @property
    def inlier_mask(self) -> np.ndarray:
        """Floor points that were not scrambled."""
        return self.planar_mask & ~self.outlier_mask

    @property
    def R1(self) -> np.ndarray:
        return self.attitudes[0]

    @property
    def R2(self) -> np.ndarray:
        return self.attitudes[1]

    @property
    def has_ground_truth(self) -> bool:
        return self.yaws is not None

    def camera_rotation(self, i: int) -> np.ndarray:
        return self.attitudes[i] @ rot_y(self.yaws[i])

    @property
    def gt_homography(self) -> GroundHomography:
        ya, yb = self.yaws
        d = -self.centers[0][1]
        t = rot_y(yb) @ (self.centers[0] - self.centers[1]) / d
        theta = math.atan2(math.sin(yb - ya), math.cos(yb - ya))
        return GroundHomography.from_motion(theta, t)

    @property
    def gt_rectified_pose(self) -> RelativePose:
        return ground_homography_to_pose(self.gt_homography)

    @property
    def gt_pose(self) -> RelativePose:
        return compose_world_pose(self.gt_rectified_pose, self.R1, self.R2)

    def correspondences(self, idx=None) -> list[Correspondence]:
        a1, a2 = ImuAttitude(self.R1), ImuAttitude(self.R2)
        rng = range(self.n) if idx is None else idx
        return [Correspondence.from_arrays(self.x1[i], self.x2[i], a1, a2) for i in rng]

    # -- serialisation ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "attitudes": [a.tolist() for a in self.attitudes],
            "pixels": np.column_stack([self.x1, self.x2]).tolist(),
            "focals": [float(f) for f in self.focals],
            "sigma": float(self.sigma),
            "outlier_mask": [bool(b) for b in self.outlier_mask],
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        missing = [k for k in JSON_FIELDS if k not in d]
        if missing:
            raise InvalidInputError(f"instance JSON lacks fields: {', '.join(missing)}")
        px = np.asarray(d["pixels"], dtype=float).reshape(-1, 4)
        return cls(
            points=np.asarray(d["points"], dtype=float).reshape(-1, 3),
            attitudes=tuple(np.asarray(a, dtype=float) for a in d["attitudes"]),
            focals=tuple(float(f) for f in d["focals"]),
            x1=px[:, :2].copy(),
            x2=px[:, 2:].copy(),
            sigma=float(d["sigma"]),
            outlier_mask=np.asarray(d["outlier_mask"], dtype=bool),
            seed=d["seed"],
        )

    @classmethod
    def from_json(cls, s: str) -> "ProblemInstance":
        return cls.from_dict(json.loads(s))


def _log_uniform(rng, lo, hi) -> float:
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def _project(R, C, X, f):
    Xc = (X - C) @ R.T
    return f * Xc[:, :2] / Xc[:, 2:], Xc[:, 2]


def generate_instance(seed: int, config: InstanceConfig = InstanceConfig()) -> ProblemInstance:
    """Draw a two-view floor scene, deterministically for a given seed."""
    rng = np.random.default_rng(seed)
    f1 = _log_uniform(rng, *FOCAL_RANGE)
    f2 = f1 if config.focal_mode in ("calibrated", "fhf") else _log_uniform(rng, *FOCAL_RANGE)
    n_p, n_np = config.n_planar, config.n_nonplanar
    for _ in range(MAX_ATTEMPTS):
        X = np.zeros((n_p + n_np, 3))
        X[:, 0] = rng.standard_normal(n_p + n_np)
        X[:, 2] = rng.standard_normal(n_p + n_np)
        X[n_p:, 1] = -rng.uniform(*config.nonplanar_offset, size=n_np)
        atts, yaws, centers = [], [], []
        for _cam in range(2):
            pitch = math.pi / 2 + rng.uniform(-config.pitch_jitter, config.pitch_jitter)
            roll = rng.uniform(-config.roll_jitter, config.roll_jitter)
            atts.append(rot_z(roll) @ rot_x(pitch))
            yaws.append(float(rng.uniform(-math.pi, math.pi)))
            height = 1.0 + abs(rng.standard_normal())
            centers.append(np.array([rng.standard_normal(), -height, rng.standard_normal()]))
        R = [a @ rot_y(y) for a, y in zip(atts, yaws)]
        x1, d1 = _project(R[0], centers[0], X, f1)
        x2, d2 = _project(R[1], centers[1], X, f2)
        if min(d1.min(), d2.min()) > MIN_DEPTH:
            break
    else:
        raise GenerationFailureError(
            f"no camera placement with all points in front after {MAX_ATTEMPTS} draws"
        )

    n = n_p + n_np
    outlier_mask = np.zeros(n, dtype=bool)
    x2_obs = x2.copy()
    n_out = int(round(config.outlier_fraction * n))
    if n_out > 0:
        idx = rng.permutation(n)[:n_out]
        outlier_mask[idx] = True
        if n_out >= 2:
            # a cyclic shift of the picked pairs re-pairs every one of them
            x2_obs[idx] = x2[np.roll(idx, 1)]
        else:
            lo, hi = x2.min(axis=0), x2.max(axis=0)
            x2_obs[idx] = rng.uniform(lo, hi, size=(1, 2))

    inst = ProblemInstance(
        points=X,
        attitudes=(atts[0], atts[1]),
        focals=(f1, f2),
        x1=x1.copy(),
        x2=x2_obs,
        sigma=0.0,
        outlier_mask=outlier_mask,
        seed=seed,
        yaws=(yaws[0], yaws[1]),
        centers=(centers[0], centers[1]),
        x1_clean=x1,
        x2_clean=x2,
        config=config,
    )
    if config.sigma > 0:
        inst = perturb(inst, config.sigma, rng=rng)
    return inst


def perturb(instance: ProblemInstance, sigma: float, seed=None, rng=None) -> ProblemInstance:
    """Add independent N(0, sigma^2) noise to every pixel coordinate.

    The noise stream comes from ``rng`` if given, else from ``seed``, else
    from the instance seed. Ground truth is left untouched.
    """
    if sigma < 0:
        raise InvalidInputError("sigma must be non-negative")
    if sigma == 0:
        return instance
    if rng is None:
        rng = np.random.default_rng(seed if seed is not None else [instance.seed or 0, 1])
    n1 = rng.normal(0.0, sigma, size=instance.x1.shape)
    n2 = rng.normal(0.0, sigma, size=instance.x2.shape)
    total = math.sqrt(instance.sigma ** 2 + sigma ** 2)
    return replace(instance, x1=instance.x1 + n1, x2=instance.x2 + n2, sigma=total)
