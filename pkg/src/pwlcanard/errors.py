"""Package-level runtime failures, kept separate so every layer can share them."""
from __future__ import annotations

__all__ = ["CaptureError", "ConvergenceError", "NumericalError"]


class NumericalError(RuntimeError):
    """Base class for numerical failures (CLI maps these to exit code 3)."""


class ConvergenceError(NumericalError):
    """An iterative solve ran out of iterations or lost its bracket."""


class CaptureError(NumericalError):
    """An orbit fell into an equilibrium instead of reaching the target section."""
