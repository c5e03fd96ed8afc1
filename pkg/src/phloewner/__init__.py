"""Passive port-Hamiltonian models from frequency-response data via Loewner interpolation."""

from .errors import (AxisEigenvalueError, CoincidentPointError, IndefiniteLoewnerError, NumericalError,
                     PHLoewnerError, RankError, SingularShiftError, SpectralZeroError, ValidationError)
from .loewner import LoewnerPencil, OrderReport, build_loewner, detect_orders, reduce_realization
from .lti import (DescriptorRealization, PHRealization, TransferSample, classify_passivity, eval_transfer,
                  frequency_response, spectral_density, to_standard)
from .passive import IdentificationResult, identify_ph, spectral_zeros
from .pipeline import ComparisonReport, RunConfig, export_figures, run_pipeline
from .stable import ProjectionResult, p_infinity
from .tangential import LeftData, RightData, SamplingPlan, sample_data, shift_data

__version__ = "0.1.0"

__all__ = [
    "AxisEigenvalueError", "CoincidentPointError", "ComparisonReport", "DescriptorRealization",
    "IdentificationResult", "IndefiniteLoewnerError", "LeftData", "LoewnerPencil", "NumericalError",
    "OrderReport", "PHLoewnerError", "PHRealization", "ProjectionResult", "RankError", "RightData",
    "RunConfig", "SamplingPlan", "SingularShiftError", "SpectralZeroError", "TransferSample",
    "ValidationError", "build_loewner", "classify_passivity", "detect_orders", "eval_transfer",
    "export_figures", "frequency_response", "identify_ph", "p_infinity", "reduce_realization",
    "run_pipeline", "sample_data", "shift_data", "spectral_density", "spectral_zeros", "to_standard",
]
