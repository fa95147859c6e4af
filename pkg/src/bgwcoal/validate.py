"""Full cross-check suite: analytic identities and simulation against theory."""
from __future__ import annotations

import numpy as np

from .coalescence import conservation_check
from .empirical import law_report, multivariate_estimate, pair_report
from .offspring import OffspringMeasure
from .psi import DEFAULT_CONFIG, SolverConfig
from .qsd import DEGENERACY_TOL, qsd_pair_cdf, yaglom
from .report import CoalescenceReport, ReportRow
from .simulate import DEFAULT_CAP, run_replicas

QSD_H_GRID = (0.1, 0.5, 1.0, 2.0, 5.0)
IDENTITY_TOL = 1e-4
X_INDEPENDENCE_TOL = 1e-6
QSD_BOUND_TOL = 1e-6


def yaglom_report(m: OffspringMeasure, cfg: SolverConfig = DEFAULT_CONFIG, h_grid=QSD_H_GRID) -> CoalescenceReport:
    """Identities of the limit law conditioned on survival (subcritical measures)."""
    report = CoalescenceReport()
    one = yaglom(m, cfg, x=1)
    three = yaglom(m, cfg, x=3)
    report.add(ReportRow.info("Yaglom chi(0)", one.chi0))
    report.add(ReportRow.info("Yaglom alpha_1", float(one.alphas[1])))
    report.add(ReportRow.info("Yaglom truncated mass", one.truncation_mass))
    report.add(ReportRow.absolute("Yaglom g'(1) chi(0)", 1.0, one.g_d1_at_1 * one.chi0, IDENTITY_TOL))
    size = min(one.alphas.size, three.alphas.size)
    gap = float(np.max(np.abs(one.alphas[:size] - three.alphas[:size])))
    report.add(ReportRow.absolute("Yaglom alpha max |x=1 - x=3|", 0.0, gap, X_INDEPENDENCE_TOL))
    if 1.0 - one.g_d1_at_0 <= DEGENERACY_TOL:
        report.add(ReportRow.info("quasi-stationary pair law (degenerate: no mass on two or more)", 0.0))
        return report
    values = [qsd_pair_cdf(m, one, h, cfg) for h in h_grid]
    for h, v in zip(h_grid, values):
        report.add(ReportRow.info(f"P^qs(T<=h) [h={h:g}]", v))
    drop = max([0.0] + [a - b for a, b in zip(values[:-1], values[1:])])
    report.add(ReportRow.absolute("P^qs(T<=h) largest decrease in h", 0.0, drop, 0.0))
    report.add(ReportRow.absolute("P^qs(T<=h) excess over 1", 0.0, max(0.0, max(values) - 1.0), QSD_BOUND_TOL))
    return report


def run_validation(m: OffspringMeasure, x, t, n, seed, *, k=3, t1_grid=None, edges=None,
                   cfg: SolverConfig = DEFAULT_CONFIG, threads=1, cap=DEFAULT_CAP) -> CoalescenceReport:
    """Conservation, pair and population laws, the ``k``-sample ratio test and, when subcritical, Yaglom identities."""
    report = conservation_check(m, x, t, cfg)
    batch = run_replicas(m, x, t, n, seed, k=k, cap=cap, threads=threads)
    grid = [t / 4, t / 2, t] if t1_grid is None else t1_grid
    report.extend(pair_report(m, batch, grid, cfg))
    report.extend(law_report(m, batch, cfg))
    report.extend(multivariate_estimate(m, batch, edges, cfg).report)
    if m.classify().subcritical:
        report.extend(yaglom_report(m, cfg))
    return report
