"""Pose, focal and homography error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .geom import GroundHomography, RelativePose, compose_world_pose, ground_homography_to_pose


@dataclass(frozen=True)
class PoseErrors:
    """Rotation and translation-direction errors in radians, relative focal error.

    ``e_t`` is None when either translation is zero; ``e_f`` is None when no
    focal was estimated.
    """

    e_R: float
    e_t: Optional[float]
    e_f: Optional[float]
    e_H: Optional[float] = None


def rotation_error(R_gt, R_est) -> float:
    """Angle of ``R_gt R_est^T``.

    Equal to ``acos((tr - 1) / 2)`` but evaluated as ``atan2(sin, cos)``,
    which keeps full precision for small angles.
    """
    D = np.asarray(R_gt, dtype=float) @ np.asarray(R_est, dtype=float).T
    c = (np.trace(D) - 1.0) / 2.0
    s = 0.5 * math.sqrt((D[2, 1] - D[1, 2]) ** 2 + (D[0, 2] - D[2, 0]) ** 2
                        + (D[1, 0] - D[0, 1]) ** 2)
    return math.atan2(s, c)


def translation_error(t_gt, t_est) -> Optional[float]:
    """Angle between translation directions, None if either is zero."""
    t_gt = np.asarray(t_gt, dtype=float)
    t_est = np.asarray(t_est, dtype=float)
    if not (np.any(t_gt) and np.any(t_est)):
        return None
    return math.atan2(float(np.linalg.norm(np.cross(t_gt, t_est))), float(t_gt @ t_est))


def focal_error(f_gt: float, f_est: float) -> float:
    """``|f_gt - f_est| / f_gt``; deliberately not symmetric."""
    if not f_gt > 0:
        raise InvalidInputError("ground-truth focal must be positive")
    return abs(f_gt - f_est) / f_gt


def _last_entry_normalized(h) -> np.ndarray:
    H = h.matrix() if isinstance(h, GroundHomography) else GroundHomography.from_vector(h).matrix()
    return H / H[2, 2]


def homography_error(h_est, h_gt) -> float:
    """Max absolute entry difference after scaling both last entries to 1.

    Inputs are :class:`GroundHomography` objects or 5-vectors. A zero last
    entry gives ``inf``.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.abs(_last_entry_normalized(h_est) - _last_entry_normalized(h_gt)).max()
    return float(d) if np.isfinite(d) else math.inf


def pose_errors(gt: RelativePose, est: RelativePose, f_gt: Sequence[float] = (),
                f_est: Sequence[float] = ()) -> PoseErrors:
    """Rotation, translation and focal errors.

    ``f_gt``/``f_est`` list only the estimated focals; with two of them the
    larger relative error is reported.
    """
    if len(f_gt) != len(f_est):
        raise InvalidInputError("focal lists differ in length")
    e_f = max((focal_error(a, b) for a, b in zip(f_gt, f_est)), default=None)
    return PoseErrors(rotation_error(gt.R, est.R), translation_error(gt.t, est.t), e_f)


UNKNOWN_FOCALS = {"2pt": (), "fhf": (1,), "hf": (1,), "f1hf2": (0, 1)}


def solution_errors(instance, solution, kind: str) -> PoseErrors:
    """Errors of a solver candidate against a synthetic instance's ground truth.

    ``solution`` is a :class:`~groundpose.solvers.SolverSolution` or a solver
    row ``h1..h5, f1, f2, ...``.
    """
    if hasattr(solution, "h"):
        h, fs = solution.h, (solution.f1, solution.f2)
    else:
        h, fs = GroundHomography.from_vector(solution[:5]), (solution[5], solution[6])
    est = compose_world_pose(ground_homography_to_pose(h), instance.R1, instance.R2)
    idx = UNKNOWN_FOCALS[kind]
    pe = pose_errors(instance.gt_pose, est,
                     [instance.focals[i] for i in idx], [fs[i] for i in idx])
    return PoseErrors(pe.e_R, pe.e_t, pe.e_f, homography_error(h, instance.gt_homography))


def candidate_error(instance, row, kind: str) -> float:
    """Scalar used to pick the best candidate: homography error, or the focal
    error if that is larger."""
    e = homography_error(row[:5], instance.gt_homography)
    for i in UNKNOWN_FOCALS[kind]:
        e = max(e, focal_error(instance.focals[i], row[5 + i]))
    return e


def best_candidate(instance, rows, kind: str):
    """Index and error of the candidate closest to ground truth (None if empty)."""
    if len(rows) == 0:
        return None, math.inf
    errs = [candidate_error(instance, r, kind) for r in rows]
    i = int(np.argmin(errs))
    return i, errs[i]
