"""Level-3 rough paths, controlled paths, rough integration and RDE solvers,
plus a Monte Carlo harness for averaging in rough slow-fast systems."""

from roughsf.tensor3 import Tensor3, segment_exp
from roughsf.roughpath import GridRoughPath, TwoParamTensorData, lift_piecewise_linear
from roughsf.controlled import ControlledPath, SmoothMap3
from roughsf.integrate import rough_integral, kappa
from roughsf.rde import RdeProblem, solve_rde, picard_solve
from roughsf.drivers import CrossIntegrals, sample_bm, sample_fbm
from roughsf.anisotropic import AnisotropicRP, assemble_arp, ext
from roughsf.slowfast import SlowFastSystem, simulate_slow_fast, solve_averaged
from roughsf.experiment import ExperimentConfig, averaging_experiment

__all__ = [
    "Tensor3",
    "segment_exp",
    "GridRoughPath",
    "TwoParamTensorData",
    "lift_piecewise_linear",
    "ControlledPath",
    "SmoothMap3",
    "rough_integral",
    "kappa",
    "RdeProblem",
    "solve_rde",
    "picard_solve",
    "CrossIntegrals",
    "sample_bm",
    "sample_fbm",
    "AnisotropicRP",
    "assemble_arp",
    "ext",
    "SlowFastSystem",
    "simulate_slow_fast",
    "solve_averaged",
    "ExperimentConfig",
    "averaging_experiment",
]

__version__ = "0.1.0"
