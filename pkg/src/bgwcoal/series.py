"""Truncated power series with non-negative probability coefficients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SolverError

NEGATIVE_TOL = 1e-12


def mul(a, b, order):
    """Product of two series truncated after ``s**order`` (zero padded to ``order + 1`` terms)."""
    out = np.zeros(order + 1)
    full = np.convolve(a[: order + 1], b[: order + 1])[: order + 1]
    out[: full.size] = full
    return out


def power(a, x, order):
    """``a**x`` truncated after ``s**order`` by repeated squaring."""
    result = np.zeros(order + 1)
    result[0] = 1.0
    base = np.array(a[: order + 1], dtype=float)
    while x:
        if x & 1:
            result = mul(result, base, order)
        x >>= 1
        if x:
            base = mul(base, base, order)
    return result


def derivative(a):
    """Termwise derivative; the result has one coefficient fewer."""
    a = np.asarray(a, dtype=float)
    return a[1:] * np.arange(1, a.size)


def reciprocal(a, order):
    """``1 / a`` as a series; needs ``a[0] != 0``."""
    if a[0] == 0.0:
        raise ZeroDivisionError("series with zero constant term has no reciprocal")
    out = np.zeros(order + 1)
    out[0] = 1.0 / a[0]
    for j in range(1, order + 1):
        top = min(j, len(a) - 1)
        out[j] = -np.dot(a[1 : top + 1], out[j - 1 :: -1][:top]) / a[0]
    return out


def evaluate(a, s):
    return np.polynomial.polynomial.polyval(s, a)


@dataclass(frozen=True)
class TruncatedPgf:
    """Coefficients ``c_j ~ P(Z = j)`` for ``j = 0..order``.

    ``truncation_mass`` is the probability left beyond ``order``; check it
    before trusting tail probabilities.
    """

    coeffs: np.ndarray
    truncation_mass: float

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise DomainError("coefficients must be a non-empty vector")
        if np.any(c < -NEGATIVE_TOL):
            raise SolverError(f"negative probability coefficient {c.min()!r}")
        c = np.maximum(c, 0.0)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "truncation_mass", float(self.truncation_mass))

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, s):
        return evaluate(self.coeffs, s)

    def size_biased(self) -> np.ndarray:
        """Coefficients ``j * c_j``."""
        return self.coeffs * np.arange(self.coeffs.size)


def pgf_power(p: TruncatedPgf, x: int) -> TruncatedPgf:
    """Law of the total of ``x`` independent copies: ``P_x(Z = j)`` up to truncation."""
    if int(x) != x or x < 0:
        raise DomainError(f"x must be a non-negative integer, got {x!r}")
    coeffs = power(p.coeffs, int(x), p.order)
    return TruncatedPgf(coeffs, max(0.0, 1.0 - float(coeffs.sum())))
