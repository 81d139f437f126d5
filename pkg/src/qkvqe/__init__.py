"""Bayesian-optimization VQE with quantum-kernel Gaussian-process surrogates.

Subpackages by concern: ``pauli`` (operators and Hamiltonians), ``circuit``
(ansatz construction and statevector simulation), ``kernels`` (quantum and
classical kernels), ``features`` (explicit feature maps and dimension
bounds), ``gp`` (Gaussian-process regression), ``bo`` (expected-improvement
optimization), ``spsa`` (stochastic baseline), ``mps`` (matrix-product-state
engine), ``experiments``/``cli`` (harness).
"""

from .circuit import (Ansatz, CXGate, EnergyEvaluator, FixedGate, RYGate,
                      build_brickwork_ry_cx, energy, simulate)
from .errors import (CapacityError, ConditioningError, ConfigError,
                     InvalidSizeError, QkvqeError, ShapeError,
                     UndefinedMetricError, UnsupportedError)
from .kernels import KernelSpec, state_kernel, unitary_kernel
from .pauli import PauliString, PauliSum, build_tfim

__all__ = [
    "Ansatz", "CXGate", "EnergyEvaluator", "FixedGate", "RYGate",
    "build_brickwork_ry_cx", "energy", "simulate",
    "KernelSpec", "state_kernel", "unitary_kernel",
    "PauliString", "PauliSum", "build_tfim",
    "QkvqeError", "InvalidSizeError", "ShapeError", "ConfigError",
    "CapacityError", "ConditioningError", "UnsupportedError",
    "UndefinedMetricError",
]

__version__ = "0.1.0"
