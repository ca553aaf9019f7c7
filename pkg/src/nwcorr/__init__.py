"""Relativistic EPR spin correlations with Newton-Wigner localization in detectors."""
from .amplitude import SingletAmplitude, amplitude_matrix, trace_ab, trace_plain
from .correlator import (
    CHSHResult,
    CorrelationResult,
    Regime,
    chsh,
    correlation_fixed_directions,
    correlation_general,
    correlation_sharp,
)
from .detector import AllSpace, Ball, Box, delta_kernel, volume
from .estimator import LocalizedCorrelation
from .exceptions import (
    AccuracyError,
    AccuracyWarning,
    DegenerateStateError,
    DistributionalKernelError,
    DomainError,
)
from .integrals import (
    MomentumGrid,
    MomentumIntegrals,
    QuadratureSpec,
    brute_force_pair_moments,
    fixed_direction_integrals,
    general_integrals,
)
from .kinematics import FourMomentum, minkowski_dot, on_shell
from .wavepacket import FactorizedState, Gaussian, GaussianPacket, Rectangular, profile_eval, support_bounds

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "AccuracyWarning",
    "AllSpace",
    "Ball",
    "Box",
    "CHSHResult",
    "CorrelationResult",
    "DegenerateStateError",
    "DistributionalKernelError",
    "DomainError",
    "FactorizedState",
    "FourMomentum",
    "Gaussian",
    "GaussianPacket",
    "LocalizedCorrelation",
    "MomentumGrid",
    "MomentumIntegrals",
    "QuadratureSpec",
    "Rectangular",
    "Regime",
    "SingletAmplitude",
    "amplitude_matrix",
    "brute_force_pair_moments",
    "chsh",
    "correlation_fixed_directions",
    "correlation_general",
    "correlation_sharp",
    "delta_kernel",
    "fixed_direction_integrals",
    "general_integrals",
    "minkowski_dot",
    "on_shell",
    "profile_eval",
    "support_bounds",
    "trace_ab",
    "trace_plain",
    "volume",
]
