"""Sparse inverse problems on the 3D ball.

Fourier-Laguerre transforms, directional wavelets on the ball, an analysis
sparsity MAP solver and HPD-based uncertainty quantification.
"""

from .ball import (BallBandProfile, BallCoeffs, BallSamples, ball_forward, ball_forward_adjoint,
                   ball_inverse, ball_inverse_adjoint)
from .experiment import ExperimentConfig, run_experiment, simulate_ground_truth, snr_db
from .io import BallFileError, read_ballfile, write_ballfile
from .operators import LinOp, make_kernel, make_mask, make_sensing, naive_inverse, power_method
from .solver import Objective, forward_backward, solve_map
from .uncertainty import Region, hpd_threshold, hypothesis_test, local_credible_intervals
from .wavelets import Tiling, build_tiling, wavelet_analysis, wavelet_synthesis

__version__ = "0.1.0"

__all__ = [
    "BallBandProfile", "BallCoeffs", "BallSamples", "ball_forward", "ball_inverse",
    "ball_forward_adjoint", "ball_inverse_adjoint", "ExperimentConfig", "run_experiment",
    "simulate_ground_truth", "snr_db", "BallFileError", "read_ballfile", "write_ballfile",
    "LinOp", "make_kernel", "make_mask", "make_sensing", "naive_inverse", "power_method",
    "Objective", "forward_backward", "solve_map", "Region", "hpd_threshold", "hypothesis_test",
    "local_credible_intervals", "Tiling", "build_tiling", "wavelet_analysis", "wavelet_synthesis",
]
