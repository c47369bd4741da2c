"""Wavelet block-thresholding estimation for functional deconvolution.

Submodules
----------
meyer      periodized Meyer basis in the frequency domain
kernels    blurring kernel catalogue, tau and Delta statistics, decay checks
model      continuous and discrete observation simulators, ``fhat_m``
estimator  threshold plans and the block-thresholding estimator
risk       Monte Carlo risk, rate fits and Besov test functions
cli        JSON-config driven command line runner
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CapacityError,
    ConfigError,
    FdeconError,
    HypothesisError,
    IllPosedError,
    NumericalError,
    ParameterError,
    PreconditionError,
    RegimeError,
)
from .estimator import besov_norm, block_energies, block_layout, estimate, make_plan  # noqa: E402
from .kernels import KernelDecay, SamplingDesign, delta_stat, make_kernel, tau, verify_decay  # noqa: E402
from .meyer import FourierSeries, MeyerBasis, WaveletDecomposition, analyze, synthesize  # noqa: E402
from .model import RngSpec, estimate_fm, simulate_continuous, simulate_discrete  # noqa: E402
from .risk import BesovParams, PlanSpec, l2_risk, make_test_function, predicted_rate, rate_slope  # noqa: E402

__all__ = [
    "__version__",
    "BesovParams", "CapacityError", "ConfigError", "FdeconError", "FourierSeries", "HypothesisError",
    "IllPosedError", "KernelDecay", "MeyerBasis", "NumericalError", "ParameterError", "PlanSpec",
    "PreconditionError", "RegimeError", "RngSpec", "SamplingDesign", "WaveletDecomposition",
    "analyze", "besov_norm", "block_energies", "block_layout", "delta_stat", "estimate", "estimate_fm",
    "l2_risk", "make_kernel", "make_plan", "make_test_function", "predicted_rate", "rate_slope",
    "simulate_continuous", "simulate_discrete", "synthesize", "tau", "verify_decay",
]
