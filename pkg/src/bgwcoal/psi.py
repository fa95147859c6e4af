"""The generating function ``psi_t(s) = E_1(s**Z_t)`` and its s-derivatives.

``psi`` solves ``d psi/dt = Phi(psi)`` with ``psi_0(s) = s``; differentiating in
``s`` gives the variational equations

    d psi'/dt  = Phi'(psi) psi'
    d psi''/dt = Phi''(psi) psi'**2 + Phi'(psi) psi''

Numerically the system is integrated in the rescaled variable
``v = (1 - psi) / m_t`` with ``m_t = exp(kappa t)``, ``kappa = min(Phi'(1), 0)``.
Writing ``Phi(1 - u) = -kappa u + R(u)`` gives

    dv/dt = -R(m_t v) / m_t

For a subcritical measure ``m_t = psi'_t(1)`` and ``R(u) = O(u**2)``: this
keeps ``1 - psi`` at full relative precision when ``psi_t(s) -> 1`` (long
horizons) and makes ``v`` converge as ``t -> infinity``.  Otherwise
``1 - psi`` stays of order one and is integrated as it is.  The same change of
variables is applied coefficient-wise for the series.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import series as ps
from ._rk import integrate
from .errors import DomainError, SolverError, UnsupportedMeasureError
from .offspring import OffspringMeasure
from .series import TruncatedPgf

CONVEXITY_TOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    abs_tol: float = 1e-11
    rel_tol: float = 1e-11
    max_step: float = 0.1
    series_order: int = 64

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("solver tolerances must be positive")
        if not self.max_step > 0:
            raise DomainError("max_step must be positive")
        if int(self.series_order) != self.series_order or self.series_order < 2:
            raise DomainError("series_order must be an integer >= 2")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class PsiState:
    t: float
    s: float
    psi: float
    psi_d1: float
    psi_d2: float
    # 1 - psi carried separately; it keeps its relative precision near psi = 1
    one_minus_psi: float


class PsiGrid(NamedTuple):
    """States on a (time, s) grid; every array has shape ``(len(times), len(s))``."""

    times: np.ndarray
    s: np.ndarray
    psi: np.ndarray
    psi_d1: np.ndarray
    psi_d2: np.ndarray
    one_minus_psi: np.ndarray

    def state(self, i, j) -> PsiState:
        return PsiState(
            float(self.times[i]),
            float(self.s[j]),
            float(self.psi[i, j]),
            float(self.psi_d1[i, j]),
            float(self.psi_d2[i, j]),
            float(self.one_minus_psi[i, j]),
        )


def _check_times(times):
    arr = np.atleast_1d(np.asarray(times, dtype=float))
    if arr.ndim != 1 or np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"times must be finite and >= 0, got {times!r}")
    return arr


def _check_s(s):
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    if arr.ndim != 1 or np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise DomainError(f"s must lie in [0, 1], got {s!r}")
    return arr


def _horner(coeffs, x, lo):
    """``sum_{k>=lo} coeffs[k] * x**(k - lo)`` for scalar or array ``x``."""
    acc = np.zeros_like(x) + coeffs[-1] if len(coeffs) > lo else np.zeros_like(x)
    for k in range(len(coeffs) - 2, lo - 1, -1):
        acc = coeffs[k] + x * acc
    return acc


def rescale_rate(m: OffspringMeasure) -> float:
    """``kappa``: the integrated variable is ``(1 - psi_t) exp(-kappa t)``."""
    return min(m.growth_rate, 0.0)


class _Remainder:
    """Polynomial ``R`` and the two derivatives needed by the rescaled equations."""

    def __init__(self, m: OffspringMeasure):
        r = m.remainder_coefficients.copy()
        r[1] = rescale_rate(m) - m.growth_rate
        k = np.arange(r.size, dtype=float)
        self.r = r
        self.dr = (k * r)[1:]  # R'(w) coefficients, index shifted by one
        self.ddr = (k * (k - 1) * r)[2:]  # R''(w)
        self.trivial = not np.any(r)
        self.growth = rescale_rate(m)

    def scale(self, t):
        return math.exp(self.growth * t)


def _pointwise_rhs(rem: _Remainder):
    def rhs(t, y):
        if rem.trivial:
            return np.zeros_like(y)
        m = rem.scale(t)
        v, v1, v2 = y
        w = m * v
        rp = _horner(rem.dr, w, 0)
        rpp = _horner(rem.ddr, w, 0)
        out = np.empty_like(y)
        out[0] = -v * _horner(rem.r, w, 1)
        out[1] = -rp * v1
        out[2] = -(m * rpp * v1 * v1 + rp * v2)
        return out

    return rhs


def psi_grid(m: OffspringMeasure, times: Sequence[float], s, cfg: SolverConfig = DEFAULT_CONFIG) -> PsiGrid:
    """Evaluate ``psi_t(s)``, ``psi_t'(s)``, ``psi_t''(s)`` for every pair of ``times`` and ``s``.

    One integration serves all nodes: the s-values are integrated side by side
    and the solver stops exactly at each requested time.
    """
    times = _check_times(times)
    s = _check_s(s)
    rem = _Remainder(m)
    order = np.argsort(times, kind="stable")
    y0 = np.stack([1.0 - s, -np.ones_like(s), np.zeros_like(s)])

    def project(t, y):
        cap = 1.0 / rem.scale(t)
        v = y[0]
        if np.all((v >= 0.0) & (v <= cap)):
            return y
        y = y.copy()
        y[0] = np.clip(v, 0.0, cap)
        return y

    ys = integrate(
        _pointwise_rhs(rem), 0.0, y0, times[order],
        atol=cfg.abs_tol, rtol=cfg.rel_tol, max_step=cfg.max_step, project=project,
    )
    shape = (times.size, s.size)
    psi, d1, d2, omp = (np.empty(shape) for _ in range(4))
    for idx, y in zip(order, ys):
        scale = rem.scale(times[idx])
        omp[idx] = scale * y[0]
        psi[idx] = 1.0 - omp[idx]
        d1[idx] = -scale * y[1]
        d2[idx] = -scale * y[2]
    if np.any(d2 < -CONVEXITY_TOL):
        raise SolverError(f"psi'' went negative ({d2.min()!r}); integration is corrupted")
    np.maximum(d2, 0.0, out=d2)
    return PsiGrid(times, s, psi, d1, d2, omp)


def psi_at(m: OffspringMeasure, t: float, s: float, cfg: SolverConfig = DEFAULT_CONFIG) -> PsiState:
    if np.ndim(t) or np.ndim(s):
        raise DomainError("psi_at takes scalar t and s; use psi_grid for arrays")
    return psi_grid(m, [t], [s], cfg).state(0, 0)


# -- power series in s -------------------------------------------------------


def _series_rhs(rem: _Remainder, order: int):
    def rhs(t, v):
        if rem.trivial:
            return np.zeros_like(v)
        m = rem.scale(t)
        w = m * v
        # R(w) / m = v * sum_{k>=1} r_k w**(k-1)
        acc = np.zeros(order + 1)
        acc[0] = rem.r[-1]
        for k in range(rem.r.size - 2, 0, -1):
            acc = ps.mul(w, acc, order)
            acc[0] += rem.r[k]
        return -ps.mul(v, acc, order)

    return rhs


def rescaled_series(m: OffspringMeasure, times: Sequence[float], cfg: SolverConfig = DEFAULT_CONFIG,
                    max_step=None) -> list[np.ndarray]:
    """Coefficients of ``v_t(s) = (1 - psi_t(s)) exp(-kappa t)`` at each time, in input order."""
    times = _check_times(times)
    order = cfg.series_order
    rem = _Remainder(m)
    v0 = np.zeros(order + 1)
    v0[0], v0[1] = 1.0, -1.0
    perm = np.argsort(times, kind="stable")
    ys = integrate(
        _series_rhs(rem, order), 0.0, v0, times[perm],
        atol=cfg.abs_tol, rtol=cfg.rel_tol,
        max_step=cfg.max_step if max_step is None else max_step,
    )
    out = [None] * times.size
    for idx, y in zip(perm, ys):
        out[idx] = y
    return out


def iter_rescaled_series(m: OffspringMeasure, horizons, cfg: SolverConfig = DEFAULT_CONFIG, max_step=None):
    """Yield ``(t, v_t)`` for increasing ``horizons``, continuing one integration between them."""
    order = cfg.series_order
    rem = _Remainder(m)
    rhs = _series_rhs(rem, order)
    t = 0.0
    v = np.zeros(order + 1)
    v[0], v[1] = 1.0, -1.0
    step = cfg.max_step if max_step is None else max_step
    for horizon in horizons:
        horizon = float(horizon)
        if horizon < t:
            raise DomainError("horizons must increase")
        (v,) = integrate(rhs, t, v, [horizon], atol=cfg.abs_tol, rtol=cfg.rel_tol, max_step=step)
        t = horizon
        yield t, v.copy()


def _series_from_rescaled(m: OffspringMeasure, t: float, v: np.ndarray) -> TruncatedPgf:
    scale = math.exp(rescale_rate(m) * t)
    coeffs = -scale * v
    coeffs[0] = 1.0 - scale * v[0]
    return TruncatedPgf(coeffs, max(0.0, scale * float(v.sum())))


def psi_series_grid(m: OffspringMeasure, times: Sequence[float], cfg: SolverConfig = DEFAULT_CONFIG) -> list[TruncatedPgf]:
    times = _check_times(times)
    return [_series_from_rescaled(m, t, v) for t, v in zip(times, rescaled_series(m, times, cfg))]


def psi_series(m: OffspringMeasure, t: float, cfg: SolverConfig = DEFAULT_CONFIG) -> TruncatedPgf:
    """Coefficients ``P_1(Z_t = j)``, ``j = 0..cfg.series_order``.

    Coefficient ``j`` of ``Phi(psi)`` only involves coefficients ``<= j`` of
    ``psi``, so the truncated system is exact for the retained terms.
    """
    return psi_series_grid(m, [t], cfg)[0]


# -- closed forms ------------------------------------------------------------


@dataclass(frozen=True)
class PureDeath:
    """``mu = {0: d}``."""

    d: float


@dataclass(frozen=True)
class Binary:
    """``mu = {0: c, 2: b}``."""

    c: float
    b: float


def closed_form_kind(m: OffspringMeasure):
    w = dict(m.weights)
    if set(w) == {0}:
        return PureDeath(w[0])
    if set(w) == {0, 2}:
        return Binary(w[0], w[2])
    raise UnsupportedMeasureError(f"no closed form for {m!r}")


def closed_form_psi(kind, t: float, s: float) -> PsiState:
    """Exact ``psi_t(s)`` and its two s-derivatives for pure death and binary splitting.

    Pure death: ``Phi(s) = d (1 - s)`` is linear, so ``1 - psi = e^{-dt} (1 - s)``.

    Binary: ``Phi(psi) = (1 - psi)(c - b psi)``.  With ``F(s) = int_0^s du/Phi(u)``
    partial fractions give ``F(s) = log((c - b s) / (c (1 - s))) / a`` for
    ``a = c - b != 0``, and ``psi_t(s) = F^{-1}(t + F(s))`` reads

        (c - b psi) / (1 - psi) = e^{a t} (c - b s) / (1 - s).

    Solving for ``u = 1 - psi`` (equivalently the Bernoulli equation
    ``du/dt = -a u - b u**2``) with ``u0 = 1 - s`` and ``E = e^{-a t}``:

        u   = a u0 E / D,          D = a + b u0 (1 - E)
        psi'  = a**2 E / D**2
        psi'' = 2 a**2 b E (1 - E) / D**3

    and the critical limit ``a -> 0`` is ``u = u0 / (1 + b u0 t)``.
    """
    if isinstance(kind, OffspringMeasure):
        kind = closed_form_kind(kind)
    if not (math.isfinite(t) and t >= 0):
        raise DomainError(f"t must be finite and >= 0, got {t!r}")
    if not (0.0 <= s <= 1.0):
        raise DomainError(f"s must lie in [0, 1], got {s!r}")
    u0 = 1.0 - s
    if isinstance(kind, PureDeath):
        decay = math.exp(-kind.d * t)
        return PsiState(t, s, 1.0 - decay * u0, decay, 0.0, decay * u0)
    if isinstance(kind, Binary):
        c, b = kind.c, kind.b
        a = c - b
        if a == 0.0:
            d = 1.0 + b * u0 * t
            u = u0 / d
            return PsiState(t, s, 1.0 - u, 1.0 / d**2, 2.0 * b * t / d**3, u)
        e = math.exp(-a * t)
        one_minus_e = -math.expm1(-a * t)
        d = a + b * u0 * one_minus_e
        u = a * u0 * e / d
        return PsiState(t, s, 1.0 - u, a * a * e / d**2, 2.0 * a * a * b * e * one_minus_e / d**3, u)
    raise UnsupportedMeasureError(f"unsupported closed-form kind {kind!r}")
