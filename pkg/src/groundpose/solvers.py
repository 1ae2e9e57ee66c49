"""Minimal solvers for the floor homography with known gravity direction.

Four cases are covered:

===========  ==========  =======================================  ===========
kind         points      unknowns                                 candidates
===========  ==========  =======================================  ===========
``2pt``      2           yaw, translation                         2 (signed)
``fhf``      2.5         yaw, translation, shared focal           <= 4
``hf``       2.5         yaw, translation, focal of view 2        <= 2
``f1hf2``    3           yaw, translation, both focals            <= 5
===========  ==========  =======================================  ===========

"2.5 points" means three correspondences with the v-equation of the third one
held back; that residual is reported on every candidate and lets RANSAC
reject hypotheses before scoring them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import backend, _pykernels
from .errors import DegenerateConfigurationError, InvalidInputError
from .geom import (
    Correspondence,
    GroundHomography,
    Intrinsics,
    pixel_homography,
    stack_correspondences,
)

KINDS = ("2pt", "fhf", "hf", "f1hf2")
SAMPLE_SIZE = {"2pt": 2, "fhf": 3, "hf": 3, "f1hf2": 3}
WITHHOLDS_EQUATION = {"2pt": False, "fhf": True, "hf": True, "f1hf2": False}

# |w| = 1/f below this (after normalisation) is the saturated w = 0 component
SATURATION = 1e-8
DUPLICATE_TOL = 1e-7


def check_kind(kind: str) -> str:
    if kind not in SAMPLE_SIZE:
        raise InvalidInputError(f"unknown solver {kind!r}; expected one of {', '.join(KINDS)}")
    return kind


@dataclass(frozen=True)
class SolverSolution:
    """One candidate: the ground homography and the focal lengths.

    ``known`` marks focals that were inputs rather than estimates.
    ``residual`` is the withheld-equation residual in pixels (0 when the
    solver uses every equation).
    """

    h: GroundHomography
    f1: float
    f2: float
    known: tuple[bool, bool] = (False, False)
    residual: float = 0.0

    def pixel_homography(self, att1, att2) -> np.ndarray:
        return pixel_homography(self.h, att1, att2, self.f1, self.f2)

    def __neg__(self) -> "SolverSolution":
        return replace(self, h=-self.h)


@dataclass(frozen=True)
class NormalizationState:
    """Pixel coordinates were divided by ``scale`` before solving."""

    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidInputError("normalisation scale must be positive")


def normalization_scale(x1, x2) -> float:
    s = float(np.mean(np.abs(np.concatenate([np.ravel(x1), np.ravel(x2)]))))
    if not (s > 0 and math.isfinite(s)):
        return 1.0
    return s


def normalize_inputs(correspondences: Sequence[Correspondence]):
    """Divide every pixel coordinate by the mean absolute coordinate."""
    x1, x2, A1, A2 = stack_correspondences(correspondences)
    state = NormalizationState(normalization_scale(x1, x2))
    s = state.scale
    out = [
        Correspondence.from_arrays(p1 / s, p2 / s, c.att1, c.att2)
        for p1, p2, c in zip(x1, x2, correspondences)
    ]
    return out, state


def denormalize_solution(sol: SolverSolution, state: NormalizationState) -> SolverSolution:
    """Map a solution found on normalised coordinates back to pixels.

    The rectified homography is invariant to a common rescaling of pixels and
    focals, so only the focal lengths and the pixel residual change.
    """
    s = state.scale
    return replace(sol, f1=sol.f1 * s, f2=sol.f2 * s, residual=sol.residual * s)


def _focal_ok(f: float) -> bool:
    return SATURATION < f < 1.0 / SATURATION


def _dedupe(rows: np.ndarray) -> np.ndarray:
    keep: list[np.ndarray] = []
    for r in rows:
        dup = False
        for k in keep:
            if (np.abs(r[:5] - k[:5]).max() < DUPLICATE_TOL
                    and abs(r[5] - k[5]) <= DUPLICATE_TOL * abs(k[5])
                    and abs(r[6] - k[6]) <= DUPLICATE_TOL * abs(k[6])):
                dup = True
                break
        if not dup:
            keep.append(r)
    return np.array(keep).reshape(-1, 8)


def solve_array(kind, x1, x2, R1, R2, f1=None, f2=None, *, normalize=True,
                kernels=None, roots=None) -> np.ndarray:
    """Array-level entry point used by RANSAC and the benchmarks.

    ``x1``, ``x2`` are ``(n, 2)`` pixel arrays (n = sample size). Returns an
    ``(k, 8)`` array ``h1..h5, f1, f2, residual`` in pixel units, already
    filtered for positive, unsaturated focals and with duplicates removed.
    Each row carries the ``h4 >= 0`` sign.
    """
    K = kernels if kernels is not None else backend.kernels()
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    n = SAMPLE_SIZE[check_kind(kind)]
    if x1.shape != (n, 2) or x2.shape != (n, 2):
        raise InvalidInputError(f"solver {kind} needs exactly {n} correspondences")
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
        raise InvalidInputError("non-finite pixel coordinates")
    R1 = np.ascontiguousarray(R1, dtype=float)
    R2 = np.ascontiguousarray(R2, dtype=float)

    if kind == "2pt":
        if f1 is None or f2 is None or not (f1 > 0 and f2 > 0):
            raise InvalidInputError("the calibrated solver needs both focal lengths")
        rows = K.calibrated_kernel(x1 / f1, x2 / f2, R1, R2)
        rows[:, 5] = f1
        rows[:, 6] = f2
        return rows

    s = normalization_scale(x1, x2) if normalize else 1.0
    xn1 = np.ascontiguousarray(x1 / s)
    xn2 = np.ascontiguousarray(x2 / s)
    if kind == "fhf":
        rows = K.fhf_kernel(xn1, xn2, R1, R2) if roots is None else \
            _pykernels.fhf_kernel(xn1, xn2, R1, R2, roots=roots)
        ok = [_focal_ok(r[6]) for r in rows]
    elif kind == "hf":
        if f1 is None or not f1 > 0:
            raise InvalidInputError("the Hf solver needs the focal length of view 1")
        rows = K.hf_kernel(xn1, xn2, R1, R2, f1 / s) if roots is None else \
            _pykernels.hf_kernel(xn1, xn2, R1, R2, f1 / s, roots=roots)
        ok = [_focal_ok(r[6]) for r in rows]
    else:
        rows = K.f1hf2_kernel(xn1, xn2, R1, R2) if roots is None else \
            _pykernels.f1hf2_kernel(xn1, xn2, R1, R2, roots=roots)
        ok = [_focal_ok(r[5]) and _focal_ok(r[6]) for r in rows]
    rows = _dedupe(rows[np.asarray(ok, dtype=bool)])
    rows[:, 5:8] *= s
    if kind == "hf":
        rows[:, 5] = f1
    return rows


def _to_solutions(rows, known, both_signs) -> list[SolverSolution]:
    out = []
    for r in rows:
        sol = SolverSolution(GroundHomography.from_vector(r[:5]), float(r[5]), float(r[6]),
                             known, float(r[7]))
        out.append(sol)
        if both_signs:
            out.append(-sol)
    return out


def solve(kind, x1, x2, R1, R2, f1=None, f2=None, *, both_signs=None,
          normalize=True, roots=None) -> list[SolverSolution]:
    """Array inputs, :class:`SolverSolution` outputs.

    ``both_signs`` defaults to True for the calibrated solver (its two
    candidates differ only by sign) and False otherwise, where the ``h4 > 0``
    candidate is kept.
    """
    rows = solve_array(kind, x1, x2, R1, R2, f1, f2, normalize=normalize, roots=roots)
    known = {"2pt": (True, True), "hf": (True, False)}.get(kind, (False, False))
    if both_signs is None:
        both_signs = kind == "2pt"
    return _to_solutions(rows, known, both_signs)


def _focal(intr) -> float:
    return intr.f if isinstance(intr, Intrinsics) else float(intr)


def solve_calibrated_2pt(c1: Correspondence, c2: Correspondence, intr1, intr2, *,
                         both_signs: bool = True) -> list[SolverSolution]:
    """Linear two-point solver for known focal lengths.

    Four DLT rows in ``h`` leave a one-dimensional nullspace; fixing its
    scale with the unit trig constraint leaves a sign ambiguity, so two
    solutions come back unless ``both_signs`` is False.
    """
    if c1 == c2:
        raise DegenerateConfigurationError("repeated correspondence")
    x1, x2, A1, A2 = stack_correspondences([c1, c2])
    return solve("2pt", x1, x2, A1, A2, _focal(intr1), _focal(intr2), both_signs=both_signs)


def solve_fHf_2_5pt(c1, c2, c3, *, both_signs=False, normalize=True,
                    roots=None) -> list[SolverSolution]:
    """Shared unknown focal length from 2.5 correspondences.

    ``roots`` selects the root stage of the numpy path: ``"quartic"``
    (closed form) or ``"eig"`` (companion-matrix eigenvalues). ``None`` uses
    the active backend.
    """
    x1, x2, A1, A2 = stack_correspondences([c1, c2, c3])
    return solve("fhf", x1, x2, A1, A2, both_signs=both_signs, normalize=normalize, roots=roots)


def solve_Hf_2_5pt(c1, c2, c3, intr1, *, both_signs=False, normalize=True,
                   roots=None) -> list[SolverSolution]:
    """Known focal in view 1, unknown in view 2.

    ``roots``: ``"closed"`` (quadratic formula) or ``"eig"`` (generalised
    eigenvalues of the linear pencil), numpy path only.
    """
    x1, x2, A1, A2 = stack_correspondences([c1, c2, c3])
    return solve("hf", x1, x2, A1, A2, _focal(intr1), both_signs=both_signs,
                 normalize=normalize, roots=roots)


def solve_f1Hf2_3pt(c1, c2, c3, *, both_signs=False, normalize=True,
                    roots=None) -> list[SolverSolution]:
    """Two different unknown focal lengths from three correspondences."""
    x1, x2, A1, A2 = stack_correspondences([c1, c2, c3])
    return solve("f1hf2", x1, x2, A1, A2, both_signs=both_signs, normalize=normalize,
                 roots=roots)


def consistency_residual(sol: SolverSolution, c: Correspondence) -> float:
    """Pixel residual of the v-equation of ``c`` under ``sol``."""
    H = sol.pixel_homography(c.att1, c.att2)
    z = H @ c.x1.homogeneous()
    if z[2] == 0.0:
        return math.inf
    return abs(c.x2.v - z[1] / z[2])
