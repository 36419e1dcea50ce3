"""Signed log-magnitude arithmetic.

Stability functions and cycle multipliers involve products like
``(1+u)**(k/lam)`` with ``lam = O(eps)``, whose float values overflow or
underflow long before the interesting sign structure does.  This module
keeps such quantities as ``(log|x|, sign)`` pairs.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass

__all__ = ["LOG_FLOAT_MAX", "LogReal", "safe_exp"]

#: log of the largest finite double; exponents beyond this overflow.
LOG_FLOAT_MAX = math.log(sys.float_info.max)


def safe_exp(x: float) -> float:
    """exp(x), returning inf instead of raising OverflowError."""
    if x > LOG_FLOAT_MAX:
        return math.inf
    return math.exp(x)


@dataclass(frozen=True)
class LogReal:
    """A real number represented as ``sign * exp(log_abs)``.

    Zero is encoded as ``(-inf, 0)``.  Multiplication, powers of positive
    values, and signed addition/subtraction stay in log space, so values
    like exp(5000) are exact to float precision of the exponent.
    """

    log_abs: float
    sign: int

    def __post_init__(self) -> None:
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if (self.sign == 0) != (self.log_abs == -math.inf):
            raise ValueError("zero must be encoded as (-inf, 0)")
        if math.isnan(self.log_abs):
            raise ValueError("log_abs is NaN")

    @staticmethod
    def from_float(x: float) -> "LogReal":
        if x == 0.0:
            return LogReal(-math.inf, 0)
        return LogReal(math.log(abs(x)), 1 if x > 0 else -1)

    @staticmethod
    def zero() -> "LogReal":
        return LogReal(-math.inf, 0)

    def to_float(self) -> float:
        """Collapse to a float; overflows to +-inf, underflows to 0.0."""
        if self.sign == 0:
            return 0.0
        return self.sign * safe_exp(self.log_abs)

    def __mul__(self, other: "LogReal") -> "LogReal":
        s = self.sign * other.sign
        if s == 0:
            return LogReal.zero()
        return LogReal(self.log_abs + other.log_abs, s)

    def __neg__(self) -> "LogReal":
        return LogReal(self.log_abs, -self.sign)

    def __add__(self, other: "LogReal") -> "LogReal":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        big, small = (self, other) if self.log_abs >= other.log_abs else (other, self)
        d = small.log_abs - big.log_abs  # <= 0
        if self.sign == other.sign:
            return LogReal(big.log_abs + math.log1p(math.exp(d)), big.sign)
        if d == 0.0:
            return LogReal.zero()
        return LogReal(big.log_abs + math.log1p(-math.exp(d)), big.sign)

    def __sub__(self, other: "LogReal") -> "LogReal":
        return self + (-other)

    def pow(self, p: float) -> "LogReal":
        """self**p for positive self (or zero with p > 0)."""
        if self.sign == 0:
            if p <= 0:
                raise ValueError("0**p undefined for p <= 0")
            return LogReal.zero()
        if self.sign < 0:
            raise ValueError("pow of a negative LogReal")
        return LogReal(self.log_abs * p, 1)
