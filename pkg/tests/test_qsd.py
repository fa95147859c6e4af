import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bgwcoal import (ConvergenceError, DegenerateQsdError, DomainError, NotSubcriticalError, OffspringMeasure,
                     pair_cdf, qsd_pair_cdf, qsd_pair_point, yaglom)
from bgwcoal.coalescence import at_most_one
from bgwcoal.qsd import epsilon_t, mean_conditioned, qsd_population, survival_ratio

from conftest import BINARY, MIXED

SUB_MIXED = {0: 3.0, 2: 1.0, 3: 0.5}


@pytest.fixture(scope="module")
def ylim():
    return yaglom(OffspringMeasure(BINARY))


def test_binary_geometric_limit(ylim):
    j = np.arange(1, 11)
    assert np.max(np.abs(ylim.alphas[1:11] - 0.5 ** j)) < 1e-9
    assert ylim.chi0 == pytest.approx(0.5, abs=1e-9)
    assert ylim.g_d1_at_1 * ylim.chi0 == pytest.approx(1.0, abs=1e-8)
    assert ylim.converged


def test_x_independence(ylim):
    three = yaglom(OffspringMeasure(BINARY), x=3)
    assert np.max(np.abs(three.alphas - ylim.alphas)) < 1e-9


def test_identity_for_general_measure():
    y = yaglom(OffspringMeasure(SUB_MIXED))
    assert y.g_d1_at_1 * y.chi0 == pytest.approx(1.0, abs=1e-6)
    assert y.alphas[0] == 0.0
    assert np.all(y.alphas >= 0)
    assert y.alphas.sum() == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("c,b", [(3.0, 1.0), (1.5, 1.0), (5.0, 0.5)])
def test_binary_limit_is_geometric(c, b):
    # from the closed form, 1 - g(s) = c (1 - s) / (c - b s) and chi(0) = 1 - b / c
    r = b / c
    y = yaglom(OffspringMeasure({0: c, 2: b}))
    j = np.arange(1, 15)
    assert np.max(np.abs(y.alphas[1:15] - (1 - r) * r ** (j - 1))) < 1e-8
    assert y.chi0 == pytest.approx(1 - r, abs=1e-8)


def test_pure_death_degenerate():
    y = yaglom(OffspringMeasure({0: 1.0}))
    assert y.alphas[1] == 1.0
    assert np.all(y.alphas[2:] == 0.0)
    for s in (0.0, 0.3, 0.9):
        assert y.g(s) == s
    with pytest.raises(DegenerateQsdError):
        qsd_pair_cdf(OffspringMeasure({0: 1.0}), y, 1.0)


@pytest.mark.parametrize("w", [{0: 1.0, 2: 1.0}, MIXED])
def test_not_subcritical(w):
    with pytest.raises(NotSubcriticalError):
        yaglom(OffspringMeasure(w))
    with pytest.raises(NotSubcriticalError):
        mean_conditioned(OffspringMeasure(w), 1, 1.0)


def test_near_critical_hits_horizon_cap():
    with pytest.raises(ConvergenceError) as info:
        yaglom(OffspringMeasure({0: 1.01, 2: 1.0}), horizon_cap=50.0)
    assert info.value.last is not None
    assert not info.value.last.converged


def test_chi_rejects_one(ylim):
    with pytest.raises(DomainError):
        ylim.chi(1.0)


@given(st.floats(0.1, 5.0), st.floats(0.0, 0.95), st.floats(0.0, 0.95))
def test_epsilon_nonnegative_and_decreasing(t, a, b):
    m = OffspringMeasure(SUB_MIXED)
    lo, hi = sorted((a, b))
    e = epsilon_t(m, t, [lo, hi])
    assert e[0] >= -1e-12
    assert e[1] <= e[0] + 1e-12


def test_epsilon_vanishes_near_one():
    assert abs(epsilon_t(OffspringMeasure(BINARY), 1.0, 1 - 1e-7)) < 1e-5


@given(st.floats(0.1, 4.0), st.floats(0.1, 4.0), st.floats(0.0, 0.95))
def test_survival_ratio_nonincreasing(a, b, s):
    m = OffspringMeasure(BINARY)
    lo, hi = sorted((a, b))
    assert survival_ratio(m, hi, s) <= survival_ratio(m, lo, s) + 1e-12


def test_survival_ratio_limit(ylim):
    m = OffspringMeasure(BINARY)
    for s in (0.0, 0.5):
        assert survival_ratio(m, 40.0, s) == pytest.approx(float(ylim.chi(s)), abs=1e-8)


@pytest.mark.parametrize("x", [1, 3])
def test_mean_conditioned_tends_to_limit_mean(ylim, x):
    assert mean_conditioned(OffspringMeasure(BINARY), x, 25.0) == pytest.approx(ylim.g_d1_at_1, abs=1e-6)


def test_mean_conditioned_direct(binary):
    from bgwcoal import psi_series

    law = psi_series(binary, 1.0).coeffs
    direct = np.dot(np.arange(law.size), law) / (1 - law[0])
    assert mean_conditioned(binary, 1, 1.0) == pytest.approx(direct, rel=1e-9)


def test_qsd_cdf_shape(ylim):
    m = OffspringMeasure(BINARY)
    hs = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0]
    values = [qsd_pair_cdf(m, ylim, h) for h in hs]
    assert values[0] < 0.02
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1.0, abs=1e-6)
    assert max(values) <= 1 + 1e-6


def test_qsd_cdf_is_limit_of_conditioned_pair_law(ylim):
    # P(T <= h | Z_t >= 2) with one founder converges to the quasi-stationary law
    m = OffspringMeasure(BINARY)
    t = 20.0
    for h in (0.5, 2.0):
        conditioned = pair_cdf(m, 1, t, h, abs_tol=1e-14) / (1.0 - at_most_one(m, 1, t))
        assert conditioned == pytest.approx(qsd_pair_cdf(m, ylim, h), abs=1e-5)


def test_qsd_point_masses_sum_to_cdf(ylim):
    m = OffspringMeasure(BINARY)
    for h in (0.3, 1.0):
        total = sum(qsd_pair_point(m, ylim, h, p) for p in range(2, 60))
        assert total == pytest.approx(qsd_pair_cdf(m, ylim, h), abs=1e-8)


def test_qsd_population_and_checks(ylim):
    m = OffspringMeasure(BINARY)
    assert qsd_population(ylim, 2) == pytest.approx(0.25 / 0.5, abs=1e-9)
    with pytest.raises(DomainError):
        qsd_pair_cdf(m, ylim, 0.0)
    with pytest.raises(DomainError):
        qsd_pair_point(m, ylim, 1.0, 1)
