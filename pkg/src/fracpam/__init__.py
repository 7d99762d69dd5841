"""Spectral simulator and verification harness for the renormalized fractional
parabolic Anderson model with periodic white noise."""
from .grid import GridFunction, GridSpec, SpectralFunction
from .kernels import build_G, build_H, renorm_constant, renorm_constant_integral, renorm_constant_spectral
from .noise import STANDARD_BUMP, MollifierSpec, mollify, sample_white_noise
from .coefficients import NonlocalOperator, change_of_variables
from .solver import SolverConfig, reconstruct_u, solve_direct, solve_transformed, xnorm

__version__ = "0.1.0"

__all__ = [
    "GridFunction",
    "GridSpec",
    "SpectralFunction",
    "build_G",
    "build_H",
    "renorm_constant",
    "renorm_constant_integral",
    "renorm_constant_spectral",
    "STANDARD_BUMP",
    "MollifierSpec",
    "mollify",
    "sample_white_noise",
    "NonlocalOperator",
    "change_of_variables",
    "SolverConfig",
    "reconstruct_u",
    "solve_direct",
    "solve_transformed",
    "xnorm",
]
