"""Follow-the-leader particle approximation of scalar conservation laws."""

from .density import PiecewiseConstantDensity, PseudoInverse, cdf, pseudo_inverse, reconstruct
from .ftl import GapDensities, Trajectory, density_rhs, integrate, rhs
from .kernels import BACKEND
from .metrics import entropy_residual, l1_error, local_tv, oleinik, total_variation, wasserstein1
from .model import VelocityModel, flux, validate_assumptions
from .quantile import InitialDatum, ic_paper, partition
from .reference import front_track, solve_riemann
from .state import IntegrityError, Mode, ParticleState

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "GapDensities",
    "InitialDatum",
    "IntegrityError",
    "Mode",
    "ParticleState",
    "PiecewiseConstantDensity",
    "PseudoInverse",
    "Trajectory",
    "VelocityModel",
    "cdf",
    "density_rhs",
    "entropy_residual",
    "flux",
    "front_track",
    "ic_paper",
    "integrate",
    "l1_error",
    "local_tv",
    "oleinik",
    "partition",
    "pseudo_inverse",
    "reconstruct",
    "rhs",
    "solve_riemann",
    "total_variation",
    "validate_assumptions",
    "wasserstein1",
]
