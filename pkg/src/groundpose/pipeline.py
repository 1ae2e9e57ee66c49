"""Frame sequences: JSON-lines I/O, pairwise robust estimation, chaining.

Input format, one JSON object per line::

    {"id": 0,
     "attitude": [[...], [...], [...]],          # IMU pitch/roll, row-major
     "keypoints": [[17, 103.2, -55.0], ...],     # [track id, u, v]
     "gt_pose": {"R": [[...], [...], [...]],     # optional, world -> camera
                 "position": [x, y, z]},         # optional, camera centre
     "gt_focal": 500.0}                          # optional

World y points along gravity and the floor is ``y = 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    InvalidInputError,
    NoModelError,
    ParseError,
)
from .geom import compose_world_pose, ground_homography_to_pose, orthonormalize, rot_x, rot_y, rot_z
from .robust import RansacConfig, RansacResult, ransac_arrays
from .solvers import SAMPLE_SIZE, check_kind

ORTHO_KEEP = 1e-6
ORTHO_REJECT = 1e-3


@dataclass(frozen=True)
class GroundTruthPose:
    R: np.ndarray
    position: np.ndarray


@dataclass(frozen=True, eq=False)
class SequenceFrame:
    id: int
    attitude: np.ndarray
    ids: np.ndarray
    uv: np.ndarray
    gt_pose: Optional[GroundTruthPose] = None
    gt_focal: Optional[float] = None

    def __post_init__(self):
        if len(np.unique(self.ids)) != len(self.ids):
            raise DataError(f"frame {self.id}: duplicate keypoint ids")

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "attitude": self.attitude.tolist(),
            "keypoints": [[int(i), float(u), float(v)] for i, (u, v) in zip(self.ids, self.uv)],
        }
        if self.gt_pose is not None:
            d["gt_pose"] = {"R": self.gt_pose.R.tolist(), "position": self.gt_pose.position.tolist()}
        if self.gt_focal is not None:
            d["gt_focal"] = self.gt_focal
        return d


def _matrix3(v, what: str, frame) -> np.ndarray:
    try:
        M = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise DataError(f"frame {frame}: {what} is not numeric") from None
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise DataError(f"frame {frame}: {what} must be a finite 3x3 array")
    return M


def _checked_rotation(M, what: str, frame) -> np.ndarray:
    dev = float(np.abs(M.T @ M - np.eye(3)).max())
    if dev > ORTHO_REJECT or np.linalg.det(M) < 0:
        raise DataError(f"frame {frame}: {what} is not a rotation (deviation {dev:.2g})")
    return M if dev <= ORTHO_KEEP else orthonormalize(M)


def frame_from_dict(d: dict) -> SequenceFrame:
    for key in ("id", "attitude", "keypoints"):
        if key not in d:
            raise DataError(f"frame is missing field {key!r}")
    fid = d["id"]
    att = _checked_rotation(_matrix3(d["attitude"], "attitude", fid), "attitude", fid)
    kp = d["keypoints"]
    if len(kp) and any(len(k) != 3 for k in kp):
        raise DataError(f"frame {fid}: keypoints must be [id, u, v] triples")
    ids = np.array([int(k[0]) for k in kp], dtype=np.int64)
    uv = np.array([[float(k[1]), float(k[2])] for k in kp]).reshape(-1, 2)
    if not np.all(np.isfinite(uv)):
        raise DataError(f"frame {fid}: non-finite keypoint coordinates")
    gt = None
    if d.get("gt_pose") is not None:
        g = d["gt_pose"]
        R = _checked_rotation(_matrix3(g["R"], "gt_pose.R", fid), "gt_pose.R", fid)
        gt = GroundTruthPose(R, np.asarray(g["position"], dtype=float).reshape(3))
    focal = d.get("gt_focal")
    if focal is not None and not float(focal) > 0:
        raise DataError(f"frame {fid}: gt_focal must be positive")
    return SequenceFrame(fid, att, ids, uv, gt, None if focal is None else float(focal))


def parse_jsonl(text: str) -> list[SequenceFrame]:
    frames = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(d, dict):
            raise ParseError("expected a JSON object", lineno)
        try:
            frames.append(frame_from_dict(d))
        except (DataError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DataError):
                raise
            raise ParseError(f"malformed frame ({exc})", lineno) from None
    return frames


def ingest(path) -> list[SequenceFrame]:
    """Read a JSON-lines frame file."""
    return parse_jsonl(Path(path).read_text(encoding="utf-8"))


def emit_jsonl(frames: Sequence[SequenceFrame]) -> str:
    return "".join(json.dumps(f.to_dict()) + "\n" for f in frames)


def write_jsonl(frames, path) -> Path:
    path = Path(path)
    path.write_text(emit_jsonl(frames), encoding="utf-8")
    return path


# -- estimation --------------------------------------------------------------


@dataclass
class PairEstimate:
    """Result for one frame pair; ``pose`` is None for a gap."""

    first: int
    second: int
    pose: Optional[object] = None
    f1: Optional[float] = None
    f2: Optional[float] = None
    inlier_ids: frozenset = frozenset()
    outlier_ids: frozenset = frozenset()
    ransac: Optional[RansacResult] = field(default=None, repr=False)
    reason: str = ""

    @property
    def is_gap(self) -> bool:
        return self.pose is None


def match(a: SequenceFrame, b: SequenceFrame):
    """Shared track ids and their pixel coordinates in both frames."""
    common, ia, ib = np.intersect1d(a.ids, b.ids, assume_unique=True, return_indices=True)
    return common, a.uv[ia], b.uv[ib]


def estimate_pair(a: SequenceFrame, b: SequenceFrame, kind: str, config: RansacConfig,
                  focal: Optional[float] = None) -> PairEstimate:
    common, x1, x2 = match(a, b)
    if len(common) < SAMPLE_SIZE[kind]:
        return PairEstimate(a.id, b.id, reason=f"{len(common)} shared keypoints")
    f1 = focal if focal is not None else a.gt_focal
    f2 = focal if focal is not None else b.gt_focal
    if kind == "2pt" and (f1 is None or f2 is None):
        raise ConfigurationError("the calibrated solver needs known focal lengths")
    if kind == "hf" and f1 is None:
        raise ConfigurationError("the Hf solver needs the focal length of the first frame")
    try:
        r = ransac_arrays(x1, x2, a.attitude, b.attitude, kind, config, f1, f2)
    except NoModelError as exc:
        return PairEstimate(a.id, b.id, reason=str(exc))
    pose = compose_world_pose(ground_homography_to_pose(r.best.h), a.attitude, b.attitude)
    ins = frozenset(int(i) for i in common[r.inlier_mask])
    outs = frozenset(int(i) for i in common[~r.inlier_mask])
    return PairEstimate(a.id, b.id, pose, r.best.f1, r.best.f2, ins, outs, r)


def estimate_sequence(frames: Sequence[SequenceFrame], kind: str,
                      config: RansacConfig = RansacConfig(), stride: int = 1,
                      focal: Optional[float] = None) -> list[PairEstimate]:
    """Robust relative pose for frame pairs ``(k, k + stride)``.

    Pair ``k`` uses RANSAC seed ``config.seed + k`` so pairs are independent.
    """
    check_kind(kind)
    if len(frames) < 2:
        raise InvalidInputError("need at least two frames")
    if stride < 1:
        raise InvalidInputError("stride must be at least 1")
    out = []
    for k in range(0, len(frames) - stride, stride):
        cfg = RansacConfig(**{**config.__dict__, "seed": config.seed + k})
        out.append(estimate_pair(frames[k], frames[k + stride], kind, cfg, focal))
    return out


# -- chaining ----------------------------------------------------------------


@dataclass
class Trajectory:
    """Absolute poses (world -> camera rotation, camera centre)."""

    ids: list[int]
    rotations: list[np.ndarray]
    positions: list[np.ndarray]
    inliers: dict = field(default_factory=dict)
    outliers: dict = field(default_factory=dict)
    gaps: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "poses": [
                {"id": int(i), "R": R.tolist(), "position": p.tolist()}
                for i, R, p in zip(self.ids, self.rotations, self.positions)
            ],
            "inliers": {str(k): sorted(v) for k, v in self.inliers.items()},
            "outliers": {str(k): sorted(v) for k, v in self.outliers.items()},
            "gaps": list(self.gaps),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def chain_trajectory(pairs: Sequence[PairEstimate], frames: Sequence[SequenceFrame],
                     scale: bool = True) -> Trajectory:
    """Compose relative poses into absolute ones.

    The first pose is the ground-truth pose of the first frame (identity and
    origin if there is none). With ``scale`` each relative translation gets the
    length of the matching ground-truth step. A gap keeps the previous pose.
    """
    by_id = {f.id: f for f in frames}
    if not pairs:
        raise InvalidInputError("no frame pairs to chain")
    first = by_id[pairs[0].first]
    if scale and any(by_id[p.first].gt_pose is None or by_id[p.second].gt_pose is None
                     for p in pairs):
        raise ConfigurationError("scale alignment needs ground-truth poses on every frame")
    if first.gt_pose is not None:
        R, C = first.gt_pose.R.copy(), first.gt_pose.position.copy()
    else:
        R, C = np.eye(3), np.zeros(3)
    traj = Trajectory([first.id], [R], [C])
    for p in pairs:
        if p.is_gap:
            traj.gaps.append(p.second)
            traj.ids.append(p.second)
            traj.rotations.append(R)
            traj.positions.append(C)
            continue
        t = p.pose.t
        if scale:
            a, b = by_id[p.first].gt_pose, by_id[p.second].gt_pose
            t = t * np.linalg.norm(a.position - b.position)
        R = p.pose.R @ R
        # X2 = R_rel X1 + t with X = R_k (X_w - C_k) gives C_k = C_{k-1} - R_k^T t
        C = C - R.T @ t
        traj.ids.append(p.second)
        traj.rotations.append(R)
        traj.positions.append(C)
        traj.inliers[p.second] = p.inlier_ids
        traj.outliers[p.second] = p.outlier_ids
    return traj


def frame_errors(traj: Trajectory, frames: Sequence[SequenceFrame],
                 pairs: Sequence[PairEstimate]) -> list[dict]:
    """Per-frame errors against ground truth.

    ``e_R`` is the absolute rotation error of the chained pose, ``e_t`` the
    direction error of the incoming relative translation, ``e_pos`` the
    position error and ``e_f`` the relative error of the estimated focal.
    """
    from .metrics import focal_error, rotation_error, translation_error

    by_id = {f.id: f for f in frames}
    incoming = {p.second: p for p in pairs}
    rows = []
    for fid, R, C in zip(traj.ids, traj.rotations, traj.positions):
        f = by_id[fid]
        row = {"frame": fid, "e_R": None, "e_t": None, "e_pos": None, "e_f": None}
        if f.gt_pose is not None:
            row["e_R"] = rotation_error(f.gt_pose.R, R)
            row["e_pos"] = float(np.linalg.norm(f.gt_pose.position - C))
        p = incoming.get(fid)
        if p is not None and not p.is_gap:
            a = by_id[p.first]
            if a.gt_pose is not None and f.gt_pose is not None:
                t_gt = f.gt_pose.R @ (a.gt_pose.position - f.gt_pose.position)
                row["e_t"] = translation_error(t_gt, p.pose.t)
            if f.gt_focal is not None and p.f2 is not None:
                row["e_f"] = focal_error(f.gt_focal, p.f2)
        rows.append(row)
    return rows


# -- synthetic sequences -----------------------------------------------------


@dataclass
class SyntheticSequence:
    frames: list[SequenceFrame]
    cluster_ids: frozenset
    outlier_ids: dict
    seed: int


IMAGE_HALF = (320.0, 240.0)


def generate_sequence(seed: int = 0, n_frames: int = 50, focal: float = 500.0,
                      sigma: float = 0.5, outlier_fraction: float = 0.2,
                      cluster_points: int = 20, floor_per_frame: int = 40) -> SyntheticSequence:
    """A drone-like flight over a textured floor with one raised box of points.

    The camera flies at 1.5 to 2.5 m along a gentle curve, looking down with a
    few degrees of pitch and roll jitter. New floor points are seeded under
    every frame, and a compact cluster of points 0.4 to 1.2 m above the floor
    sits in the middle of the path (like a door or a piece of furniture). In
    every frame ``outlier_fraction`` of the keypoints have their positions
    re-paired among themselves.
    """
    rng = np.random.default_rng(seed)
    half = np.array(IMAGE_HALF)
    yaw0 = rng.uniform(-math.pi, math.pi)
    yaws, centers, atts = [], [], []
    pos = np.array([0.0, -2.0, 0.0])
    heading = rng.uniform(-math.pi, math.pi)
    for k in range(n_frames):
        heading += rng.normal(0.0, 0.04)
        step = 0.2 + 0.05 * rng.random()
        pos = pos + step * np.array([math.cos(heading), 0.0, math.sin(heading)])
        pos[1] = -(2.0 + 0.4 * math.sin(0.15 * k)) + rng.normal(0.0, 0.02)
        centers.append(pos.copy())
        yaws.append(yaw0 + 0.02 * k + rng.normal(0.0, 0.01))
        pitch = math.pi / 2 + rng.normal(0.0, 0.05)
        roll = rng.normal(0.0, 0.05)
        atts.append(rot_z(roll) @ rot_x(pitch))
    Rs = [a @ rot_y(y) for a, y in zip(atts, yaws)]

    # floor points back-projected from random pixels of each frame
    pts = []
    for R, C in zip(Rs, centers):
        px = rng.uniform(-1.2, 1.2, size=(floor_per_frame, 2)) * half
        rays = np.column_stack([px / focal, np.ones(len(px))]) @ R  # world directions
        lam = -C[1] / rays[:, 1]
        pts.append(C + lam[:, None] * rays)
    floor = np.vstack(pts)
    floor[:, 1] = 0.0
    mid = centers[n_frames // 2]
    cluster = np.column_stack([
        mid[0] + rng.uniform(-0.5, 0.5, cluster_points),
        -rng.uniform(0.4, 1.2, cluster_points),
        mid[2] + rng.uniform(-0.5, 0.5, cluster_points),
    ])
    X = np.vstack([floor, cluster])
    cluster_ids = frozenset(range(len(floor), len(X)))

    frames, scrambled = [], {}
    for k, (A, R, C) in enumerate(zip(atts, Rs, centers)):
        Xc = (X - C) @ R.T
        front = Xc[:, 2] > 0.1
        uv = np.full((len(X), 2), np.inf)
        uv[front] = focal * Xc[front, :2] / Xc[front, 2:]
        vis = np.flatnonzero(front & np.all(np.abs(uv) <= half, axis=1))
        obs = uv[vis] + rng.normal(0.0, sigma, size=(len(vis), 2))
        n_out = int(round(outlier_fraction * len(vis)))
        bad = rng.permutation(len(vis))[:n_out] if n_out >= 2 else np.empty(0, dtype=int)
        obs[bad] = obs[np.roll(bad, 1)]
        scrambled[k] = frozenset(int(vis[i]) for i in bad)
        frames.append(SequenceFrame(k, A, vis.astype(np.int64), obs,
                                    GroundTruthPose(R, C.copy()), focal))
    return SyntheticSequence(frames, cluster_ids, scrambled, seed)
