"""RANSAC over the minimal solvers.

The 2.5-point solvers leave one equation of their sample unused. Its residual
is available for free on every candidate, so candidates that violate it are
dropped before the (much more expensive) scoring against all points.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _pykernels, backend
from .errors import DegenerateConfigurationError, InvalidInputError, NoModelError
from .geom import Correspondence, GroundHomography, stack_correspondences
from .solvers import (
    SAMPLE_SIZE,
    WITHHOLDS_EQUATION,
    SolverSolution,
    check_kind,
    solve_array,
)


@dataclass(frozen=True)
class RansacConfig:
    """RANSAC settings; thresholds are in pixels.

    ``consistency_threshold`` defaults to ten times ``threshold``.
    ``confidence`` enables the usual adaptive early stop when set.
    """

    max_iterations: int = 200
    threshold: float = 2.0
    consistency_threshold: Optional[float] = None
    consistency_check: bool = True
    confidence: Optional[float] = None
    seed: int = 0
    local_optimization: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be at least 1")
        if not self.threshold >= 0:
            raise InvalidInputError("threshold must be non-negative")
        if self.consistency_threshold is not None and not self.consistency_threshold > 0:
            raise InvalidInputError("consistency_threshold must be positive")
        if self.confidence is not None and not 0 < self.confidence < 1:
            raise InvalidInputError("confidence must lie in (0, 1)")

    @property
    def kappa(self) -> float:
        if self.consistency_threshold is not None:
            return self.consistency_threshold
        return 10.0 * self.threshold


@dataclass
class RansacResult:
    best: SolverSolution
    inlier_mask: np.ndarray
    inlier_count: int
    iterations: int
    skipped: int
    solved: int
    scored: int
    wall_time: float
    residual: float
    best_iteration: int
    history: list[int] = field(default_factory=list, repr=False)


def pixel_homographies(rows: np.ndarray, R1, R2) -> np.ndarray:
    """``K2 R2 Hy R1^T K1^-1`` for each solver row ``h1..h5, f1, f2, ...``."""
    rows = np.atleast_2d(rows)
    k = len(rows)
    Hy = np.zeros((k, 3, 3))
    Hy[:, 0, 0] = Hy[:, 2, 2] = rows[:, 0]
    Hy[:, 0, 2] = rows[:, 1]
    Hy[:, 2, 0] = -rows[:, 1]
    Hy[:, 0, 1] = rows[:, 2]
    Hy[:, 1, 1] = rows[:, 3]
    Hy[:, 2, 1] = rows[:, 4]
    H = np.einsum("ij,kjl,ml->kim", R2, Hy, R1)
    H[:, :2, :] *= rows[:, 6, None, None]
    H[:, :, 2] *= rows[:, 5, None]
    return H


def _score(errors: np.ndarray, tau: float):
    mask = errors < tau
    res = np.where(mask, errors, 0.0).sum(axis=-1)
    return mask, mask.sum(axis=-1), res


def score_model(solution: SolverSolution, correspondences: Sequence[Correspondence], tau: float):
    """Inlier mask and summed inlier residual under symmetric transfer error."""
    x1, x2, R1, R2 = stack_correspondences(correspondences)
    row = np.array([[*solution.h.as_vector(), solution.f1, solution.f2, 0.0]])
    err = backend.kernels().transfer_errors(pixel_homographies(row, R1, R2), x1, x2)[0]
    mask = err < tau
    return mask, float(err[mask].sum())


def _required_iterations(ratio: float, m: int, confidence: float) -> float:
    if ratio >= 1.0:
        return 1.0
    p_good = ratio ** m
    if p_good <= 0.0:
        return math.inf
    return math.log(1.0 - confidence) / math.log(1.0 - p_good)


def _refine(row, x1, x2, R1, R2, mask):
    """Linear re-estimate of ``h`` on the inliers with the candidate's focals."""
    idx = np.flatnonzero(mask)
    if len(idx) < 2:
        return None
    M = _pykernels.dlt_rows(x1[idx] / row[5], x2[idx] / row[6], R1, R2, "cal")
    A = M[0] + M[1]
    h = np.linalg.svd(A)[2][-1]
    if math.hypot(h[0], h[1]) == 0.0:
        return None
    h = h / math.hypot(h[0], h[1])
    h = -h if h[3] < 0 else h
    return np.array([[*h, row[5], row[6], row[7]]])


def ransac_arrays(x1, x2, R1, R2, kind: str, config: RansacConfig = RansacConfig(),
                  f1: Optional[float] = None, f2: Optional[float] = None) -> RansacResult:
    """RANSAC on stacked pixel arrays sharing one attitude pair."""
    check_kind(kind)
    x1 = np.ascontiguousarray(x1, dtype=float)
    x2 = np.ascontiguousarray(x2, dtype=float)
    R1 = np.ascontiguousarray(R1, dtype=float)
    R2 = np.ascontiguousarray(R2, dtype=float)
    n = len(x1)
    m = SAMPLE_SIZE[kind]
    if n < m:
        raise InvalidInputError(f"solver {kind} needs at least {m} correspondences, got {n}")
    K = backend.kernels()
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    samples = np.argsort(rng.random((config.max_iterations, n)), axis=1)[:, :m]
    check = config.consistency_check and WITHHOLDS_EQUATION[kind]
    kappa = config.kappa

    best_row = None
    best_mask = None
    best_count, best_res, best_iter = -1, math.inf, -1
    skipped = solved = scored = 0
    history: list[int] = []
    limit = config.max_iterations
    it = 0
    while it < limit:
        s = samples[it]
        it += 1
        try:
            rows = solve_array(kind, x1[s], x2[s], R1, R2, f1, f2)
        except DegenerateConfigurationError:
            rows = np.empty((0, 8))
        if check and len(rows):
            rows = rows[rows[:, 7] <= kappa]
        if len(rows) == 0:
            skipped += 1
            history.append(max(best_count, 0))
            continue
        solved += 1
        scored += len(rows)
        err = K.transfer_errors(pixel_homographies(rows, R1, R2), x1, x2)
        masks, counts, res = _score(err, config.threshold)
        for j in range(len(rows)):
            c = int(counts[j])
            if c > best_count or (c == best_count and res[j] < best_res):
                best_row, best_mask = rows[j], masks[j]
                best_count, best_res, best_iter = c, float(res[j]), it - 1
        history.append(max(best_count, 0))
        if config.confidence is not None and best_count > 0:
            need = _required_iterations(best_count / n, m, config.confidence)
            limit = min(config.max_iterations, max(it, int(math.ceil(need))))

    if best_row is None:
        raise NoModelError(f"no {kind} candidate survived in {it} iterations")

    if config.local_optimization and best_count >= 2:
        new = _refine(best_row, x1, x2, R1, R2, best_mask)
        if new is not None:
            err = K.transfer_errors(pixel_homographies(new, R1, R2), x1, x2)
            masks, counts, res = _score(err, config.threshold)
            if counts[0] > best_count or (counts[0] == best_count and res[0] < best_res):
                best_row, best_mask = new[0], masks[0]
                best_count, best_res = int(counts[0]), float(res[0])

    known = {"2pt": (True, True), "hf": (True, False)}.get(kind, (False, False))
    best = SolverSolution(GroundHomography.from_vector(best_row[:5]), float(best_row[5]),
                          float(best_row[6]), known, float(best_row[7]))
    return RansacResult(
        best=best,
        inlier_mask=np.asarray(best_mask, dtype=bool),
        inlier_count=int(best_count),
        iterations=it,
        skipped=skipped,
        solved=solved,
        scored=scored,
        wall_time=time.perf_counter() - t0,
        residual=best_res,
        best_iteration=best_iter,
        history=history,
    )


def ransac(correspondences: Sequence[Correspondence], kind: str,
           config: RansacConfig = RansacConfig(), intr1=None, intr2=None) -> RansacResult:
    """RANSAC over correspondences that share one attitude pair.

    ``intr1``/``intr2`` carry the known focal lengths where the solver needs
    them (both for ``2pt``, view 1 for ``hf``).
    """
    if len(correspondences) < SAMPLE_SIZE[check_kind(kind)]:
        raise InvalidInputError(
            f"solver {kind} needs at least {SAMPLE_SIZE[kind]} correspondences"
        )
    x1, x2, R1, R2 = stack_correspondences(correspondences)
    f1 = getattr(intr1, "f", intr1)
    f2 = getattr(intr2, "f", intr2)
    return ransac_arrays(x1, x2, R1, R2, kind, config, f1, f2)
