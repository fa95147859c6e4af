"""Monte Carlo estimates from replica batches, set against the analytic values.

Every aggregate is a sum of integers (counts or integer-valued scores) before
the final division, so the estimates do not depend on replica order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coalescence import (Variant, at_most_one, multivariate_bin_masses, no_common_ancestor,
                          order_statistics_factor, pair_cdf)
from .errors import DomainError
from .offspring import OffspringMeasure
from .psi import DEFAULT_CONFIG, SolverConfig, psi_at, psi_series
from .report import CoalescenceReport, ReportRow
from .series import pgf_power
from .simulate import DEFAULT_CAP, ReplicaBatch, run_replicas

MIN_CELL_COUNT = 10
MIN_BIN_COUNT = 50
DEFAULT_BINS = 4


def _binomial_se(count: int, n: int) -> float:
    p = count / n
    return math.sqrt(p * (1.0 - p) / n)


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step function ``#{values <= x} / n``.

    ``values`` holds the finite observations; replicas without one (``inf``)
    only enter through the denominator ``n``.
    """

    values: np.ndarray
    n: int

    @classmethod
    def from_samples(cls, samples, n: int) -> "EmpiricalCdf":
        samples = np.asarray(samples, dtype=float)
        return cls(np.sort(samples[np.isfinite(samples)]), int(n))

    def count(self, x) -> int:
        return int(np.searchsorted(self.values, x, side="right"))

    def __call__(self, x) -> float:
        return self.count(x) / self.n if self.n else 0.0

    def se(self, x) -> float:
        return _binomial_se(self.count(x), self.n) if self.n else 0.0


def pair_cdfs(batch: ReplicaBatch) -> tuple[EmpiricalCdf, EmpiricalCdf]:
    """Unconditional estimate of ``P(T <= t1)`` and the one given ``Z_t >= 2``."""
    finite = batch.pair_T[np.isfinite(batch.pair_T)]
    return EmpiricalCdf.from_samples(finite, batch.n), EmpiricalCdf.from_samples(finite, int(batch.has_pair.sum()))


def _tag(**kw) -> str:
    return "[" + ",".join(f"{k}={v:g}" for k, v in kw.items()) + "]"


def _check_t1_grid(t1_grid, t):
    grid = [float(v) for v in t1_grid]
    if not grid or any(not (0.0 < v <= t) for v in grid):
        raise DomainError(f"t1 values must lie in (0, t={t:g}]")
    return grid


def pair_report(m: OffspringMeasure, batch: ReplicaBatch, t1_grid: Sequence[float],
                cfg: SolverConfig = DEFAULT_CONFIG) -> CoalescenceReport:
    x, t, n = batch.x, batch.t, batch.n
    grid = _check_t1_grid(t1_grid, t)
    uncond, cond = pair_cdfs(batch)
    report = CoalescenceReport()
    some_pair = 1.0 - at_most_one(m, x, t, cfg)
    for t1 in grid:
        exact = pair_cdf(m, x, t, t1, cfg)
        report.add(ReportRow.z_test(f"P(T<=t1) {_tag(x=x, t=t, t1=t1)}", exact, uncond(t1), uncond.se(t1)))
        if cond.n and some_pair > 0:
            report.add(ReportRow.z_test(f"P(T<=t1 | Z_t>=2) {_tag(x=x, t=t, t1=t1)}",
                                        exact / some_pair, cond(t1), cond.se(t1)))
    cross = int(batch.pair_cross.sum())
    report.add(ReportRow.z_test(f"P(no common ancestor) {_tag(x=x, t=t)}",
                                no_common_ancestor(m, x, t, cfg), cross / n, _binomial_se(cross, n)))
    few = int((~batch.has_pair).sum())
    report.add(ReportRow.z_test(f"P(Z_t<=1) {_tag(x=x, t=t)}", at_most_one(m, x, t, cfg), few / n, _binomial_se(few, n)))
    return report


def empirical_pair_cdf(m: OffspringMeasure, x, t, t1_grid, n, master_seed, *, cfg: SolverConfig = DEFAULT_CONFIG,
                       threads=1, cap=DEFAULT_CAP) -> tuple[EmpiricalCdf, CoalescenceReport]:
    """Simulated ``P(T <= t1)`` (fewer-than-two replicas count as ``T = inf``) and its comparison report."""
    grid = _check_t1_grid(t1_grid, t)
    batch = run_replicas(m, x, t, n, master_seed, k=2, cap=cap, threads=threads)
    return pair_cdfs(batch)[0], pair_report(m, batch, grid, cfg)


def law_report(m: OffspringMeasure, batch: ReplicaBatch, cfg: SolverConfig = DEFAULT_CONFIG,
               min_count=MIN_CELL_COUNT) -> CoalescenceReport:
    """Extinction frequency, mean and histogram of ``Z_t`` against the analytic law."""
    x, t, n = batch.x, batch.t, batch.n
    report = CoalescenceReport()
    z = batch.z
    extinct = int((z == 0).sum())
    report.add(ReportRow.z_test(f"P(Z_t=0) {_tag(x=x, t=t)}", psi_at(m, t, 0.0, cfg).psi ** x,
                                extinct / n, _binomial_se(extinct, n)))
    s1 = int(z.sum())
    s2 = int(np.dot(z, z))
    var = (s2 - s1 * s1 / n) / (n - 1) if n > 1 else 0.0
    report.add(ReportRow.z_test(f"E(Z_t) {_tag(x=x, t=t)}", x * math.exp(t * m.growth_rate),
                                s1 / n, math.sqrt(max(var, 0.0) / n)))
    law = pgf_power(psi_series(m, t, cfg), x).coeffs
    counts = np.bincount(z, minlength=law.size)
    for p, prob in enumerate(law):
        if prob * n >= min_count:
            # null-hypothesis variance: sparse cells make the plug-in one unstable
            se = math.sqrt(prob * (1.0 - prob) / n)
            report.add(ReportRow.z_test(f"P(Z_t={p}) {_tag(x=x, t=t)}", float(prob), counts[p] / n, se))
    return report


# -- several individuals -------------------------------------------------------


@dataclass(frozen=True)
class MultivariateEstimate:
    """Histograms of ``(T_1..T_n)`` and ``(T_1*..T_n*)`` with ``n = k - 1``.

    ``hist_T`` and ``hist_star`` have one axis per coordinate with
    ``len(edges)`` cells: the time bins, then a last cell for ``inf`` (fewer
    than ``k`` alive, or different founders).  ``ties_*`` count replicas whose
    finite coordinates contain a repeated value.
    """

    edges: np.ndarray
    k: int
    n: int
    hist_T: np.ndarray
    hist_star: np.ndarray
    ties_T: int
    ties_star: int
    report: CoalescenceReport


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    nb = edges.size - 1
    idx = np.searchsorted(edges, values, side="right") - 1
    idx[values == edges[-1]] = nb - 1
    idx[~np.isfinite(values) | (values < edges[0]) | (values > edges[-1]) | (idx < 0)] = nb
    return idx


def _tied(rows: np.ndarray) -> np.ndarray:
    out = np.zeros(rows.shape[0], dtype=bool)
    for i, j in itertools.combinations(range(rows.shape[1]), 2):
        out |= np.isfinite(rows[:, i]) & (rows[:, i] == rows[:, j])
    return out


def default_edges(t: float, bins: int = DEFAULT_BINS) -> np.ndarray:
    return np.linspace(0.0, t, bins + 1)


def multivariate_estimate(m: OffspringMeasure, batch: ReplicaBatch, edges=None, cfg: SolverConfig = DEFAULT_CONFIG,
                          min_count=MIN_BIN_COUNT) -> MultivariateEstimate:
    """Histogram the batch and test off-diagonal bins.

    For each bin with strictly increasing coordinates the report holds the
    ratio test ``#T* / #T = n! (n+1)! / 2**n`` (standard error from the
    per-replica score ``1{T* in bin} - factor 1{T in bin}``) and both bin
    frequencies against analytic bin masses; only bins expected to hold at
    least ``min_count`` replicas are tested.  Tie fractions are reported only.
    """
    x, t, n, k = batch.x, batch.t, batch.n, batch.k
    edges = default_edges(t) if edges is None else np.asarray(edges, dtype=float)
    dim = k - 1
    idx_T = np.stack([_bin_index(batch.T_vector[:, i], edges) for i in range(dim)], axis=1)
    idx_S = np.stack([_bin_index(batch.T_star[:, i], edges) for i in range(dim)], axis=1)
    shape = (edges.size,) * dim
    hist_T = np.zeros(shape, dtype=np.int64)
    hist_S = np.zeros(shape, dtype=np.int64)
    np.add.at(hist_T, tuple(idx_T.T), 1)
    np.add.at(hist_S, tuple(idx_S.T), 1)
    ties_T = int(_tied(batch.T_vector).sum())
    ties_S = int(_tied(batch.T_star).sum())

    report = CoalescenceReport()
    factor = order_statistics_factor(dim)
    mass_T = multivariate_bin_masses(m, x, t, edges, dim, Variant.FIRST_VS_OTHERS, cfg)
    mass_S = multivariate_bin_masses(m, x, t, edges, dim, Variant.ORDER_STATISTICS, cfg)
    for b in mass_T:
        label = "(" + ",".join(f"{edges[i]:g}-{edges[i + 1]:g}" for i in b) + ")"
        tag = f"[x={x:g},t={t:g},k={k}] bin {label}"
        in_T = np.all(idx_T == b, axis=1)
        in_S = np.all(idx_S == b, axis=1)
        c_T, c_S = int(in_T.sum()), int(in_S.sum())
        if mass_T[b] * n >= min_count and c_T > 0:
            score = in_S.astype(np.int64) - int(factor) * in_T.astype(np.int64)
            s1, s2 = int(score.sum()), int(np.dot(score, score))
            se_score = math.sqrt(max((s2 - s1 * s1 / n) / (n - 1), 0.0) / n)
            report.add(ReportRow.z_test(f"T*/T ratio {tag}", factor, c_S / c_T, se_score / (c_T / n)))
            report.add(ReportRow.z_test(f"P(T in bin) {tag}", mass_T[b], c_T / n, _binomial_se(c_T, n)))
        else:
            report.add(ReportRow.info(f"P(T in bin) {tag} (not tested)", c_T / n, mass_T[b]))
        if mass_S[b] * n >= min_count:
            report.add(ReportRow.z_test(f"P(T* in bin) {tag}", mass_S[b], c_S / n, _binomial_se(c_S, n)))
        else:
            report.add(ReportRow.info(f"P(T* in bin) {tag} (not tested)", c_S / n, mass_S[b]))
    report.add(ReportRow.info(f"tie fraction T [x={x:g},t={t:g},k={k}]", ties_T / n))
    report.add(ReportRow.info(f"tie fraction T* [x={x:g},t={t:g},k={k}]", ties_S / n))
    inf_all = int(np.all(~np.isfinite(batch.T_vector), axis=1).sum())
    report.add(ReportRow.info(f"fraction with T all inf [x={x:g},t={t:g},k={k}]", inf_all / n))
    return MultivariateEstimate(edges, k, n, hist_T, hist_S, ties_T, ties_S, report)


def empirical_multivariate(m: OffspringMeasure, x, t, k, n, master_seed, *, edges=None,
                           cfg: SolverConfig = DEFAULT_CONFIG, threads=1, cap=DEFAULT_CAP) -> MultivariateEstimate:
    """Simulate ``n`` replicas, sample ``k`` individuals each and histogram ``T`` and ``T*``."""
    if isinstance(k, bool) or int(k) != k or k < 2:
        raise DomainError(f"k must be an integer >= 2, got {k!r}")
    batch = run_replicas(m, x, t, n, master_seed, k=int(k), cap=cap, threads=threads)
    return multivariate_estimate(m, batch, edges, cfg)
