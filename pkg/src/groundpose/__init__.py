"""Gravity-aligned minimal homography solvers for floor-plane relative pose."""

from . import backend
from .errors import (
    DegenerateConfigurationError,
    DegenerateScaleError,
    GroundPoseError,
    InvalidHomographyError,
    InvalidInputError,
    NoModelError,
)
from .geom import (
    Correspondence,
    GroundHomography,
    ImuAttitude,
    Intrinsics,
    PixelPoint,
    RelativePose,
    compose_world_pose,
    ground_homography_to_pose,
    rectify,
)
from .solvers import (
    SolverSolution,
    solve,
    solve_calibrated_2pt,
    solve_f1Hf2_3pt,
    solve_fHf_2_5pt,
    solve_Hf_2_5pt,
)

__version__ = "0.1.0"

__all__ = [
    "backend",
    "Correspondence",
    "DegenerateConfigurationError",
    "DegenerateScaleError",
    "GroundHomography",
    "GroundPoseError",
    "ImuAttitude",
    "Intrinsics",
    "InvalidHomographyError",
    "InvalidInputError",
    "NoModelError",
    "PixelPoint",
    "RelativePose",
    "SolverSolution",
    "compose_world_pose",
    "ground_homography_to_pose",
    "rectify",
    "solve",
    "solve_calibrated_2pt",
    "solve_f1Hf2_3pt",
    "solve_fHf_2_5pt",
    "solve_Hf_2_5pt",
]
