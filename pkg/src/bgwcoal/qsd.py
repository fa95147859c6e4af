"""Yaglom limit and quasi-stationary coalescence law of a subcritical process.

Conditioned on survival, ``Z_t`` converges in law to ``(alpha_j)_{j>=1}`` with
generating function

    g(s) = lim (psi_t(s) - psi_t(0)) / (1 - psi_t(0)).

In the rescaled variable ``v_t = (1 - psi_t) / psi_t'(1)`` used by the ODE
engine this ratio is ``1 - v_t(s) / v_t(0)``, and ``v_t(0)`` converges to
``chi(0) = lim P_1(Z_t > 0) / E_1(Z_t)``.  Both limits are read off the
rescaled power series at doubling horizons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import series as ps
from .errors import ConvergenceError, DegenerateQsdError, DomainError, NotSubcriticalError, TruncationError
from .offspring import OffspringMeasure
from .psi import DEFAULT_CONFIG, SolverConfig, iter_rescaled_series, psi_grid, psi_series, rescale_rate
from .quadrature import gauss_kronrod

CONVERGENCE_TOL = 1e-8
HORIZON_SCALE = 200.0
DEGENERACY_TOL = 1e-12
QUAD_ABS_TOL = 1e-9
_CHECK_GRID = np.linspace(0.0, 1.0, 21)


@dataclass(frozen=True)
class YaglomLimit:
    measure: OffspringMeasure
    alphas: np.ndarray
    chi0: float
    t_used: float
    converged: bool
    x: int = 1
    rescaled: np.ndarray = field(default=None, repr=False)

    @property
    def truncation_mass(self) -> float:
        return max(0.0, 1.0 - float(self.alphas.sum()))

    def g(self, s):
        return ps.evaluate(self.alphas, s)

    def g_d1(self, s):
        return ps.evaluate(ps.derivative(self.alphas), s)

    @property
    def g_d1_at_0(self) -> float:
        return float(self.alphas[1])

    @property
    def g_d1_at_1(self) -> float:
        """Limiting conditional mean ``lim E(Z_t | Z_t > 0)`` from the coefficients."""
        return float(np.dot(np.arange(self.alphas.size), self.alphas))

    def chi(self, s):
        """``lim (1 - psi_t(s)) / ((1 - s) psi_t'(1))`` for ``s < 1``; diagnostic only."""
        s = np.asarray(s, dtype=float)
        if np.any(s >= 1.0) or np.any(s < 0.0):
            raise DomainError("chi(s) is evaluated for 0 <= s < 1")
        return ps.evaluate(self.rescaled, s) / (1.0 - s)


def _conditioned_alphas(v, scale, x):
    """Coefficients of ``(psi**x - psi(0)**x) / (1 - psi(0)**x)`` from ``v = (1 - psi) / scale``.

    ``psi**x = sum_k C(x, k) (-scale v)**k``; dividing numerator and denominator
    by ``scale`` keeps everything O(1) however small ``scale`` is.
    """
    order = v.size - 1
    acc = np.zeros(order + 1)
    vk = np.zeros(order + 1)
    vk[0] = 1.0
    for k in range(1, x + 1):
        vk = ps.mul(vk, v, order)
        acc += math.comb(x, k) * (-1.0) ** k * scale ** (k - 1) * vk
    alphas = acc / -acc[0]
    alphas[0] = 0.0
    return alphas


def default_horizon_cap(m: OffspringMeasure) -> float:
    return HORIZON_SCALE / abs(m.growth_rate)


def yaglom(m: OffspringMeasure, cfg: SolverConfig = DEFAULT_CONFIG, *, x: int = 1, t0: float = 1.0,
           horizon_cap: float | None = None, tol: float = CONVERGENCE_TOL) -> YaglomLimit:
    """Yaglom limit by horizon doubling.

    Stops once ``alpha``, ``g`` on a grid of ``s`` and ``chi(0)`` all move by
    less than ``tol`` between successive horizons.  Raises
    :class:`ConvergenceError` (with the last iterate as ``.last``) when the cap
    is reached first.
    """
    crit = m.classify()
    if not crit.subcritical:
        raise NotSubcriticalError(f"Yaglom limit needs a subcritical measure; growth rate is {crit.growth_rate!r}")
    if isinstance(x, bool) or int(x) != x or x < 1:
        raise DomainError(f"x must be a positive integer, got {x!r}")
    cap = default_horizon_cap(m) if horizon_cap is None else float(horizon_cap)
    if not t0 > 0 or not cap >= t0:
        raise DomainError("need 0 < t0 <= horizon cap")
    horizons = []
    h = t0
    while h < cap:
        horizons.append(h)
        h *= 2.0
    horizons.append(cap)

    previous = None
    last = None
    # steps stay bounded by accuracy alone: the rescaled system flattens out
    for t, v in iter_rescaled_series(m, horizons, cfg, max_step=np.inf):
        scale = math.exp(rescale_rate(m) * t)
        alphas = _conditioned_alphas(v, scale, int(x))
        chi0 = float(v[0])
        grid = ps.evaluate(alphas, _CHECK_GRID)
        converged = False
        if previous is not None:
            change = max(
                float(np.max(np.abs(alphas - previous[0]))),
                float(np.max(np.abs(grid - previous[1]))),
                abs(chi0 - previous[2]),
            )
            converged = change < tol
        last = YaglomLimit(m, alphas, chi0, t, converged, int(x), v)
        if converged:
            return last
        previous = (alphas, grid, chi0)
    raise ConvergenceError(
        f"Yaglom ratio not converged to {tol:g} by horizon {cap:g}; raise horizon_cap or check near-criticality",
        last=last,
    )


def epsilon_t(m: OffspringMeasure, t, s, cfg: SolverConfig = DEFAULT_CONFIG):
    """``psi_t'(1) - (1 - psi_t(s)) / (1 - s)``: non-negative, decreasing in ``s``, zero at ``s -> 1``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr >= 1.0) or np.any(s_arr < 0.0):
        raise DomainError("epsilon_t is defined for 0 <= s < 1")
    g = psi_grid(m, [t], np.atleast_1d(s_arr), cfg)
    mean = math.exp(m.growth_rate * float(t))
    out = mean - g.one_minus_psi[0] / (1.0 - np.atleast_1d(s_arr))
    return float(out[0]) if s_arr.ndim == 0 else out


def survival_ratio(m: OffspringMeasure, t, s, cfg: SolverConfig = DEFAULT_CONFIG):
    """``(1 - psi_t(s)) / ((1 - s) psi_t'(1))``, non-increasing in ``t`` towards ``chi(s)``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr >= 1.0) or np.any(s_arr < 0.0):
        raise DomainError("defined for 0 <= s < 1")
    g = psi_grid(m, [t], np.atleast_1d(s_arr), cfg)
    mean = math.exp(m.growth_rate * float(t))
    out = g.one_minus_psi[0] / ((1.0 - np.atleast_1d(s_arr)) * mean)
    return float(out[0]) if s_arr.ndim == 0 else out


def mean_conditioned(m: OffspringMeasure, x, t, cfg: SolverConfig = DEFAULT_CONFIG) -> float:
    """``E_x(Z_t | Z_t > 0) = x psi_t'(1) / (1 - psi_t(0)**x)``; tends to ``g'(1) = 1/chi(0)``."""
    crit = m.classify()
    if not crit.subcritical:
        raise NotSubcriticalError("mean_conditioned is defined here for subcritical measures")
    if isinstance(x, bool) or int(x) != x or x < 1:
        raise DomainError(f"x must be a positive integer, got {x!r}")
    if not (math.isfinite(t) and t >= 0):
        raise DomainError(f"t must be finite and >= 0, got {t!r}")
    g = psi_grid(m, [t], [0.0], cfg)
    extinct_one = float(g.one_minus_psi[0, 0])
    survive = -math.expm1(x * math.log1p(-extinct_one)) if extinct_one < 1.0 else 1.0
    return x * math.exp(m.growth_rate * t) / survive


# -- quasi-stationary coalescence ---------------------------------------------


def _normaliser(ylim: YaglomLimit) -> float:
    mass = 1.0 - ylim.g_d1_at_0
    if mass <= DEGENERACY_TOL:
        raise DegenerateQsdError(
            "the Yaglom limit puts no mass on two or more individuals; the quasi-stationary pair law is undefined"
        )
    return mass


def _check_h(h):
    if not (math.isfinite(h) and h > 0):
        raise DomainError(f"h must be positive and finite, got {h!r}")
    return float(h)


def qsd_pair_pgf(m: OffspringMeasure, ylim: YaglomLimit, h, s, cfg: SolverConfig = DEFAULT_CONFIG):
    """``E^qs(Z(Z-1) s**(Z-2); T <= h) = g'(s) / (1 - g'(0)) * psi_h''(s) / psi_h'(s)``."""
    norm = _normaliser(ylim)
    h = _check_h(h)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr >= 1.0) or np.any(s_arr < 0.0):
        raise DomainError("p.g.f.-weighted quantities need 0 <= s < 1")
    s1 = np.atleast_1d(s_arr)
    g = psi_grid(m, [h], s1, cfg)
    out = ylim.g_d1(s1) / norm * g.psi_d2[0] / g.psi_d1[0]
    return float(out[0]) if s_arr.ndim == 0 else out


def qsd_pair_cdf(m: OffspringMeasure, ylim: YaglomLimit, h, cfg: SolverConfig = DEFAULT_CONFIG,
                 abs_tol=QUAD_ABS_TOL) -> float:
    """``P^qs(T <= h) = 1/(1 - g'(0)) int_0^1 (1-s) psi_h''/psi_h' g'(s) ds``."""
    norm = _normaliser(ylim)
    h = _check_h(h)

    def integrand(s):
        g = psi_grid(m, [h], s, cfg)
        return (1.0 - s) * g.psi_d2[0] / g.psi_d1[0] * ylim.g_d1(s)

    value, _ = gauss_kronrod(integrand, 0.0, 1.0, abs_tol=abs_tol)
    return value / norm


def qsd_pair_point(m: OffspringMeasure, ylim: YaglomLimit, h, p, cfg: SolverConfig = DEFAULT_CONFIG) -> float:
    """``P^qs(Z = p, T <= h)`` by coefficient extraction from the p.g.f. above."""
    norm = _normaliser(ylim)
    h = _check_h(h)
    if isinstance(p, bool) or int(p) != p or p < 2:
        raise DomainError(f"p must be an integer >= 2, got {p!r}")
    order = cfg.series_order
    if p > order - 4:
        raise TruncationError(f"p={p} too close to series order {order}")
    coeffs = psi_series(m, h, cfg).coeffs
    d1 = ps.derivative(coeffs)
    d2 = ps.derivative(d1)
    ratio = ps.mul(d2, ps.reciprocal(d1, order - 2), order - 2)
    weighted = ps.mul(ps.derivative(ylim.alphas), ratio, order - 2)
    return float(weighted[p - 2]) / (p * (p - 1) * norm)


def qsd_population(ylim: YaglomLimit, p) -> float:
    """``P^qs(Z = p) = alpha_p / (1 - alpha_1)`` for ``p >= 2``."""
    norm = _normaliser(ylim)
    if p < 2 or p >= ylim.alphas.size:
        raise DomainError(f"p must lie in 2..{ylim.alphas.size - 1}")
    return float(ylim.alphas[p]) / norm
