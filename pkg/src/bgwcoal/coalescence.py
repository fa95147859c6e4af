"""Analytic laws of coalescence times.

Notation: ``x`` founders at time 0, current time ``t``; ``T`` is the
coalescence time of two individuals drawn without replacement at time ``t``
(``inf`` when they descend from different founders or fewer than two are
alive).  With ``n + 1`` individuals sampled, ``T_k`` is the coalescence time of
the first with the ``(k+1)``-th and ``T*_k`` the ``k``-th smallest coalescence
time.

All p.g.f.-weighted quantities are defined for ``s < 1`` only.  Densities are
per unit time and never pre-multiplied by bin widths.
"""
from __future__ import annotations

import enum
import itertools
import math
from typing import Sequence

import numpy as np

from . import series as ps
from .errors import DomainError, TruncationError
from .offspring import OffspringMeasure
from .psi import DEFAULT_CONFIG, SolverConfig, psi_grid, psi_series_grid
from .quadrature import gauss_kronrod
from .report import CoalescenceReport, ReportRow

QUAD_ABS_TOL = 1e-9
TRUNCATION_TOL = 1e-9
TRUNCATION_MARGIN = 4
CONSERVATION_TOL = 1e-6


class Variant(enum.Enum):
    FIRST_VS_OTHERS = "first_vs_others"
    ORDER_STATISTICS = "order_statistics"


def order_statistics_factor(n: int) -> float:
    """``n! (n+1)! / 2**n``: joint density of ``T*`` over that of ``T`` on ordered times."""
    return math.factorial(n) * math.factorial(n + 1) / 2.0**n


def _check_pgf_s(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"p.g.f.-weighted quantities need 0 <= s < 1, got {s!r}")
    return arr


def _check_pair(t1, t2=None, t=None):
    t1 = float(t1)
    upper = [v for v in (t2, t) if v is not None]
    if not t1 > 0 or not math.isfinite(t1):
        raise DomainError(f"t1 must be positive and finite, got {t1!r}")
    if t2 is not None and not t1 <= t2:
        raise DomainError(f"need t1 <= t2, got t1={t1!r}, t2={t2!r}")
    if t is not None and t2 is not None and not t2 <= t:
        raise DomainError(f"need t2 <= t, got t2={t2!r}, t={t!r}")
    if t is not None and not t1 <= t:
        raise DomainError(f"need t1 <= t, got t1={t1!r}, t={t!r}")
    return [t1] + [float(v) for v in upper]


def _check_count(name, value, low):
    if isinstance(value, bool) or int(value) != value or value < low:
        raise DomainError(f"{name} must be an integer >= {low}, got {value!r}")
    return int(value)


# -- two individuals, conditioned on the population at time t - t2 -----------


def pair_pgf_conditioned(m: OffspringMeasure, t1, t2, y, s, cfg: SolverConfig = DEFAULT_CONFIG, t=None):
    """``E(Z_t (Z_t - 1) s**(Z_t - 2); T <= t1 | Z_{t-t2} = y)``.

    Equals ``y psi'_{t2}(s) psi_{t2}(s)**(y-1) psi''_{t1}(s) / psi'_{t1}(s)``.
    """
    _check_pair(t1, t2, t)
    y = _check_count("y", y, 1)
    s_arr = _check_pgf_s(s)
    g = psi_grid(m, [t1, t2], np.atleast_1d(s_arr), cfg)
    if np.any(g.psi_d1[0] <= 0.0):
        raise DomainError("psi'_{t1}(s) <= 0: solver state is corrupted")
    out = y * g.psi_d1[1] * g.psi[1] ** (y - 1) * g.psi_d2[0] / g.psi_d1[0]
    return float(out[0]) if s_arr.ndim == 0 else out


def pair_pgf_density_conditioned(m: OffspringMeasure, t1, t2, y, s, cfg: SolverConfig = DEFAULT_CONFIG, t=None):
    """t1-derivative of :func:`pair_pgf_conditioned`.

    ``d/dt1 (psi''_{t1} / psi'_{t1}) = Phi''(psi_{t1}) psi'_{t1}``, so this is
    ``y psi'_{t2} psi_{t2}**(y-1) Phi''(psi_{t1}) psi'_{t1}``.
    """
    _check_pair(t1, t2, t)
    y = _check_count("y", y, 1)
    s_arr = _check_pgf_s(s)
    g = psi_grid(m, [t1, t2], np.atleast_1d(s_arr), cfg)
    out = y * g.psi_d1[1] * g.psi[1] ** (y - 1) * m._phi_d2(g.psi[0]) * g.psi_d1[0]
    return float(out[0]) if s_arr.ndim == 0 else out


def pair_density_series(m: OffspringMeasure, t1, t2, y, cfg: SolverConfig = DEFAULT_CONFIG, t=None) -> np.ndarray:
    """``P(Z_t = p, T in dt1 | Z_{t-t2} = y) / dt1`` for ``p = 0..order`` (zero below 2).

    The population at time ``t`` splits into three independent parts: the
    descendants of the ``y - 1`` unmarked individuals (law ``psi_{t2}**(y-1)``),
    a size-biased copy started from one individual run for ``t2``, and a
    size-biased copy started from ``n - 1`` individuals run for ``t1``; the
    marked ancestor splits into ``n`` at rate ``n mu(n)``.  Coefficient ``p``
    of the triple product, divided by ``p (p - 1)``, is the density.
    """
    _check_pair(t1, t2, t)
    y = _check_count("y", y, 1)
    order = cfg.series_order
    s1, s2 = psi_series_grid(m, [t1, t2], cfg)
    worst = max(s1.truncation_mass, s2.truncation_mass)
    if worst > TRUNCATION_TOL:
        raise TruncationError(
            f"series order {order} leaves truncation mass {worst:.3g} > {TRUNCATION_TOL}; raise series_order"
        )
    rest = ps.power(s2.coeffs, y - 1, order)
    marked = s2.size_biased()
    base = ps.mul(rest, marked, order)
    total = np.zeros(order + 1)
    for n, rate in m.weights.items():
        if n < 2:
            continue
        siblings = ps.power(s1.coeffs, n - 1, order) * np.arange(order + 1)
        total += n * rate * ps.mul(base, siblings, order)
    p = np.arange(order + 1, dtype=float)
    out = np.zeros(order + 1)
    out[2:] = y * total[2:] / (p[2:] * (p[2:] - 1.0))
    return out


def pair_density_point(m: OffspringMeasure, p, t1, t2, y, cfg: SolverConfig = DEFAULT_CONFIG, t=None) -> float:
    p = _check_count("p", p, 2)
    if p > cfg.series_order - TRUNCATION_MARGIN:
        raise TruncationError(
            f"p={p} is within {TRUNCATION_MARGIN} of series order {cfg.series_order}; raise series_order"
        )
    return float(pair_density_series(m, t1, t2, y, cfg, t)[p])


# -- unconditional pair laws ------------------------------------------------


def pair_cdf(m: OffspringMeasure, x, t, t1, cfg: SolverConfig = DEFAULT_CONFIG, abs_tol=QUAD_ABS_TOL) -> float:
    """``P_x(T <= t1)`` at current time ``t`` (unconditional; ``T = inf`` when ``Z_t < 2``).

    ``x int_0^1 (1-s) psi''_{t1}/psi'_{t1} psi'_t psi_t**(x-1) ds``: the weight
    ``(1-s)`` turns ``s**(p-2)`` into ``1 / (p (p-1))``, undoing the ordered-pair
    count.  Both time slices come from one ODE pass per batch of nodes.
    """
    x = _check_count("x", x, 1)
    t1, t = _check_pair(t1, None, t)
    if m.is_pure_death:
        return 0.0

    def integrand(s):
        g = psi_grid(m, [t1, t], s, cfg)
        return x * (1.0 - s) * g.psi_d2[0] / g.psi_d1[0] * g.psi_d1[1] * g.psi[1] ** (x - 1)

    value, _ = gauss_kronrod(integrand, 0.0, 1.0, abs_tol=abs_tol)
    return value


def no_common_ancestor(m: OffspringMeasure, x, t, cfg: SolverConfig = DEFAULT_CONFIG, abs_tol=QUAD_ABS_TOL) -> float:
    """``P_x(Z_t >= 2 and the sampled pair descends from different founders)``.

    ``x (x-1) int_0^1 (1-s) psi'_t(s)**2 psi_t(s)**(x-2) ds``; zero for a
    single founder, whose descendants always share it as an ancestor.
    """
    x = _check_count("x", x, 1)
    if not (math.isfinite(t) and t > 0):
        raise DomainError(f"t must be positive and finite, got {t!r}")
    if x == 1:
        return 0.0

    def integrand(s):
        g = psi_grid(m, [t], s, cfg)
        return x * (x - 1) * (1.0 - s) * g.psi_d1[0] ** 2 * g.psi[0] ** (x - 2)

    value, _ = gauss_kronrod(integrand, 0.0, 1.0, abs_tol=abs_tol)
    return value


def at_most_one(m: OffspringMeasure, x, t, cfg: SolverConfig = DEFAULT_CONFIG) -> float:
    """``P_x(Z_t <= 1) = psi_t(0)**x + x psi'_t(0) psi_t(0)**(x-1)``."""
    g = psi_grid(m, [t], [0.0], cfg)
    q, q1 = float(g.psi[0, 0]), float(g.psi_d1[0, 0])
    return q**x + x * q1 * q ** (x - 1)


def conservation_check(m: OffspringMeasure, x, t, cfg: SolverConfig = DEFAULT_CONFIG, tolerance=CONSERVATION_TOL) -> CoalescenceReport:
    """Total probability: coalesced by ``t``, different founders, or fewer than two alive."""
    x = _check_count("x", x, 1)
    coalesced = pair_cdf(m, x, t, t, cfg)
    apart = no_common_ancestor(m, x, t, cfg)
    small = at_most_one(m, x, t, cfg)
    total = coalesced + apart + small
    label = f"x={x},t={t:g}"
    report = CoalescenceReport()
    report.add(ReportRow.info(f"P(T<=t) [{label}]", coalesced))
    report.add(ReportRow.info(f"P(no common ancestor) [{label}]", apart))
    report.add(ReportRow.info(f"P(Z_t<=1) [{label}]", small))
    report.add(ReportRow.absolute(f"conservation total [{label}]", 1.0, total, tolerance))
    return report


# -- several individuals -----------------------------------------------------


def _check_times(times, t):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise DomainError("need at least one coalescence time")
    if not (times[0] > 0 and np.all(np.diff(times) > 0) and times[-1] <= t):
        raise DomainError(f"need 0 < t1 < ... < tn <= t, got {times.tolist()!r} with t={t!r}")
    return times


def multivariate_density_pgf(m: OffspringMeasure, x, t, times: Sequence[float], s,
                             variant: Variant = Variant.FIRST_VS_OTHERS, cfg: SolverConfig = DEFAULT_CONFIG):
    """``E_x(Z_t^(n+1 falling) s**(Z_t-n-1); T_1 in dt_1, ..., T_n in dt_n) / dt``.

    ``x psi'_t psi_t**(x-1) prod_i psi'_{t_i} Phi''(psi_{t_i})``, times
    ``n! (n+1)! / 2**n`` for the order statistics ``T*``.  Valid on the open
    region ``t_1 < ... < t_n``.
    """
    x = _check_count("x", x, 1)
    times = _check_times(times, t)
    variant = Variant(variant)
    s_arr = _check_pgf_s(s)
    g = psi_grid(m, list(times) + [t], np.atleast_1d(s_arr), cfg)
    out = x * g.psi_d1[-1] * g.psi[-1] ** (x - 1)
    for i in range(times.size):
        out = out * g.psi_d1[i] * m._phi_d2(g.psi[i])
    if variant is Variant.ORDER_STATISTICS:
        out = out * order_statistics_factor(times.size)
    return float(out[0]) if s_arr.ndim == 0 else out


def multivariate_joint_density(m: OffspringMeasure, x, t, times: Sequence[float],
                               variant: Variant = Variant.FIRST_VS_OTHERS, cfg: SolverConfig = DEFAULT_CONFIG,
                               abs_tol=QUAD_ABS_TOL) -> float:
    """Unconditional joint density of ``(T_1..T_n)`` (or ``T*``) with ``n+1`` drawn at time ``t``.

    The weight ``(1-s)**n / n!`` integrates ``s**(p-n-1)`` to ``1 / p^(n+1 falling)``.
    """
    times = _check_times(times, t)
    n = times.size
    if m.is_pure_death:
        return 0.0

    def integrand(s):
        return (1.0 - s) ** n / math.factorial(n) * multivariate_density_pgf(m, x, t, times, s, variant, cfg)

    value, _ = gauss_kronrod(integrand, 0.0, 1.0, abs_tol=abs_tol)
    return value


def multivariate_bin_masses(m: OffspringMeasure, x, t, edges: Sequence[float], n: int,
                            variant: Variant = Variant.FIRST_VS_OTHERS, cfg: SolverConfig = DEFAULT_CONFIG,
                            abs_tol=1e-10) -> dict[tuple[int, ...], float]:
    """Probability that ``n + 1`` are drawn and the coalescence vector lands in a bin.

    Covers every bin whose per-coordinate indices are strictly increasing.
    Integrating the density over time uses
    ``int_a^b psi'_u Phi''(psi_u) du = [psi''_u / psi'_u]_a^b``, so each bin
    mass is a single s-integral of a product of such increments.
    """
    x = _check_count("x", x, 1)
    n = _check_count("n", n, 1)
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0) or edges[0] < 0 or edges[-1] > t:
        raise DomainError("bin edges must increase within [0, t]")
    variant = Variant(variant)
    bins = list(itertools.combinations(range(edges.size - 1), n))
    if not bins or m.is_pure_death:
        return {b: 0.0 for b in bins}
    factor = order_statistics_factor(n) if variant is Variant.ORDER_STATISTICS else 1.0
    positive = edges > 0
    slice_times = list(edges[positive]) + [t]

    def integrand(s):
        g = psi_grid(m, slice_times, s, cfg)
        ratio = np.zeros((edges.size, s.size))
        ratio[positive] = g.psi_d2[:-1] / g.psi_d1[:-1]
        increments = np.diff(ratio, axis=0)
        head = (1.0 - s) ** n / math.factorial(n) * x * g.psi_d1[-1] * g.psi[-1] ** (x - 1)
        cols = [head * np.prod(increments[list(b)], axis=0) for b in bins]
        return factor * np.stack(cols, axis=1)

    values, _ = gauss_kronrod(integrand, 0.0, 1.0, abs_tol=abs_tol)
    return {b: float(v) for b, v in zip(bins, np.atleast_1d(values))}
