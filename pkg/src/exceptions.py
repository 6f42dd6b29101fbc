"""
`exceptions.py`:

This module contains the error types raised by the manifold flow package.
"""

from typing import List, Optional


class FlowError(Exception):
    """Base class for all package errors."""


class DegenerateInput(FlowError, ValueError):
    """Input lies outside the projectable set of the manifold."""


class SingularPolar(FlowError, ArithmeticError):
    """Polar factor derivative is undefined (pairs of singular values sum to ~0)."""


class OffManifold(FlowError, ValueError):
    """Point does not lie on the manifold within tolerance."""


class OutOfSupport(FlowError, ValueError):
    """Point lies outside the support of a distribution."""


class NonDifferentiable(FlowError, ValueError):
    """Density is not differentiable at the requested point."""


class DimensionMismatch(FlowError, ValueError):
    """Array dimensions do not match the network or manifold."""


class ZeroTangent(FlowError, ArithmeticError):
    """Projected tangent noise vanished twice in a row."""


class SingularJacobian(FlowError, ArithmeticError):
    """Tangent Jacobian determinant is below the invertibility threshold."""


class NonFiniteGradient(FlowError, ArithmeticError):
    """Gradient contains NaN or inf."""


class NonFiniteLoss(FlowError, ArithmeticError):
    """Training loss became NaN or inf."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


class SizeMismatch(FlowError, ValueError):
    """Sample sets have incompatible sizes."""


class ParseError(FlowError, ValueError):
    """A dataset row could not be parsed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class OffManifoldRow(FlowError, ValueError):
    """A dataset row is too far from the manifold to be canonicalized."""

    def __init__(self, index: int, distance: float):
        super().__init__(f"row {index} is {distance:.3e} away from the manifold")
        self.index = index
        self.distance = distance


class ConfigError(FlowError, ValueError):
    """Run configuration is invalid; carries every violation found."""

    def __init__(self, violations: List[str]):
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(violations))
        self.violations = list(violations)
