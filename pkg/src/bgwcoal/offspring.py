"""Reproduction measure of a continuous-time Galton-Watson process.

Each individual lives an exponential time with rate ``mu(N)`` and is then
replaced by ``n`` children with probability ``mu(n) / mu(N)``.  All of the
analytic machinery is driven by the branching mechanism

    Phi(s) = sum_n (s**n - s) * mu(n)

and its derivatives.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import DomainError

CRITICAL_TOL = 1e-12
ETA_GRID = 1e-3
ETA_TOL = 1e-12


class Regime(enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class Criticality:
    regime: Regime
    growth_rate: float

    @property
    def subcritical(self) -> bool:
        return self.regime is Regime.SUBCRITICAL


def _check_unit(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"s must lie in [0, 1], got {s!r}")
    return arr


class OffspringMeasure:
    """Finite rate measure ``mu`` on the non-negative integers.

    >>> m = OffspringMeasure({0: 2.0, 2: 1.0})
    >>> m.phi(0.5)
    0.75
    """

    __slots__ = ("_weights", "_ns", "_rates", "_remainder")

    def __init__(self, weights: Mapping[int, float]):
        clean = {}
        for n, rate in weights.items():
            if isinstance(n, bool) or int(n) != n or n < 0:
                raise DomainError(f"offspring counts must be non-negative integers, got {n!r}")
            rate = float(rate)
            if not math.isfinite(rate) or rate < 0.0:
                raise DomainError(f"rate for n={n} must be finite and >= 0, got {rate!r}")
            if int(n) == 1 and rate != 0.0:
                raise DomainError("mu(1) must be 0: an individual cannot be replaced by one child")
            if rate > 0.0:
                clean[int(n)] = rate
        if clean.get(0, 0.0) <= 0.0:
            raise DomainError("mu(0) must be positive")
        ns = sorted(clean)
        object.__setattr__(self, "_weights", MappingProxyType({n: clean[n] for n in ns}))
        object.__setattr__(self, "_ns", np.array(ns, dtype=np.int64))
        object.__setattr__(self, "_rates", np.array([clean[n] for n in ns], dtype=float))
        object.__setattr__(self, "_remainder", self._remainder_coefficients())

    def __setattr__(self, name, value):
        raise AttributeError("OffspringMeasure is immutable")

    def __repr__(self):
        return f"OffspringMeasure({dict(self._weights)!r})"

    def __eq__(self, other):
        return isinstance(other, OffspringMeasure) and dict(self._weights) == dict(other._weights)

    def __hash__(self):
        return hash(tuple(self._weights.items()))

    def __reduce__(self):
        return (OffspringMeasure, (dict(self._weights),))

    @classmethod
    def from_json(cls, obj) -> "OffspringMeasure":
        """Build from ``{"measure": {"0": 2.0, "2": 1.0}}`` (or the inner mapping, or a JSON string)."""
        if isinstance(obj, str):
            obj = json.loads(obj)
        if isinstance(obj, Mapping) and "measure" in obj:
            obj = obj["measure"]
        if not isinstance(obj, Mapping):
            raise DomainError("measure must be a JSON object mapping offspring counts to rates")
        weights = {}
        for key, value in obj.items():
            if not isinstance(key, str) or not key.isdigit():
                raise DomainError(f"measure keys must be decimal integer strings, got {key!r}")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise DomainError(f"measure value for {key!r} must be a number")
            weights[int(key)] = value
        return cls(weights)

    def to_json(self) -> dict:
        return {"measure": {str(n): r for n, r in self._weights.items()}}

    @property
    def weights(self) -> Mapping[int, float]:
        return self._weights

    @property
    def support(self) -> np.ndarray:
        return self._ns.copy()

    @property
    def max_offspring(self) -> int:
        return int(self._ns[-1])

    @property
    def total_rate(self) -> float:
        return float(self._rates.sum())

    @property
    def growth_rate(self) -> float:
        """``Phi'(1) = sum_n (n - 1) mu(n)``; the mean grows like ``exp(t * growth_rate)``."""
        return float(np.dot(self._ns - 1, self._rates))

    def offspring_law(self) -> dict[int, float]:
        total = self.total_rate
        return {n: r / total for n, r in self._weights.items()}

    @property
    def is_pure_death(self) -> bool:
        return self.max_offspring == 0

    # -- branching mechanism -------------------------------------------------

    def phi(self, s):
        return self._phi(_check_unit(s))

    def phi_d1(self, s):
        return self._phi_d1(_check_unit(s))

    def phi_d2(self, s):
        return self._phi_d2(_check_unit(s))

    def _phi(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for n, rate in zip(self._ns, self._rates):
            # (s**n - s) written so that Phi(1) == 0 in floating point
            out = out + rate * ((1.0 - s) if n == 0 else (s**n - s))
        return out[()] if out.ndim == 0 else out

    def _phi_d1(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for n, rate in zip(self._ns, self._rates):
            out = out + rate * ((n * s ** (n - 1) if n >= 1 else 0.0) - 1.0)
        return out[()] if out.ndim == 0 else out

    def _phi_d2(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for n, rate in zip(self._ns, self._rates):
            if n >= 2:
                out = out + rate * n * (n - 1) * s ** (n - 2)
        return out[()] if out.ndim == 0 else out

    def _deflated_phi(self, u):
        """``Phi(u) / (1 - u)``, strictly decreasing on [0, 1] and equal to ``-Phi'(1)`` at 1."""
        u = np.asarray(u, dtype=float)
        out = np.full_like(u, self._weights[0])
        for n, rate in zip(self._ns, self._rates):
            if n >= 2:
                out = out - rate * u * sum(u**j for j in range(n - 1))
        return out[()] if out.ndim == 0 else out

    def eta(self) -> float:
        """Smallest positive zero of ``Phi``; 1 unless the process is supercritical.

        The scan runs on ``Phi(u) / (1 - u)`` so the trivial zero at 1 does not
        mask a root just below it.
        """
        grid = np.arange(1, int(round(1.0 / ETA_GRID)) + 1) * ETA_GRID
        grid[-1] = 1.0
        values = self._deflated_phi(grid)
        hits = np.flatnonzero(values[:-1] <= 0.0)
        if hits.size:
            i = int(hits[0])
            if values[i] == 0.0:
                return float(grid[i])
            lo, hi = (float(grid[i - 1]) if i else 0.0), float(grid[i])
        elif values[-1] < 0.0:
            lo, hi = float(grid[-2]), 1.0
        else:
            return 1.0
        while hi - lo > ETA_TOL:
            mid = 0.5 * (lo + hi)
            if self._deflated_phi(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def classify(self) -> Criticality:
        rate = self.growth_rate
        if rate < -CRITICAL_TOL:
            regime = Regime.SUBCRITICAL
        elif rate > CRITICAL_TOL:
            regime = Regime.SUPERCRITICAL
        else:
            regime = Regime.CRITICAL
        return Criticality(regime, rate)

    # -- expansion around s = 1 ----------------------------------------------

    def _remainder_coefficients(self) -> np.ndarray:
        # R(u) = Phi(1 - u) + Phi'(1) u = sum_{k>=2} r_k u**k with
        # r_k = (-1)**k sum_n C(n, k) mu(n); returned as array indexed by k.
        top = int(self._ns[-1])
        coeffs = np.zeros(max(top, 1) + 1)
        for k in range(2, top + 1):
            coeffs[k] = (-1) ** k * sum(
                math.comb(int(n), k) * rate for n, rate in zip(self._ns, self._rates) if n >= k
            )
        return coeffs

    @property
    def remainder_coefficients(self) -> np.ndarray:
        """Coefficients ``r_k`` of ``Phi(1 - u) + Phi'(1) u`` in powers of ``u``."""
        return self._remainder.copy()
