import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad

from bgwcoal import DomainError, OffspringMeasure, SolverConfig, TruncationError
from bgwcoal.coalescence import (Variant, at_most_one, conservation_check, multivariate_bin_masses,
                                 multivariate_density_pgf, multivariate_joint_density, no_common_ancestor,
                                 order_statistics_factor, pair_cdf, pair_density_point, pair_density_series,
                                 pair_pgf_conditioned, pair_pgf_density_conditioned)
from oracles import pair_cdf_oracle, pair_pgf_oracle, z_law

from conftest import BINARY, FIXTURES, MIXED


@pytest.mark.parametrize("w,x,t,t1", [
    (BINARY, 2, 1.0, 0.25), (BINARY, 1, 2.0, 1.3), (BINARY, 5, 0.5, 0.5),
    (MIXED, 2, 1.0, 0.5), (MIXED, 1, 0.5, 0.1), (MIXED, 3, 0.8, 0.8),
])
def test_pair_cdf_against_generator_oracle(w, x, t, t1):
    got = pair_cdf(OffspringMeasure(w), x, t, t1)
    assert got == pytest.approx(pair_cdf_oracle(w, x, t, t1, size=250), abs=1e-9)


@pytest.mark.parametrize("w,x,t", [(BINARY, 2, 1.0), (MIXED, 3, 0.7), ({0: 1.0}, 2, 1.0)])
def test_no_common_ancestor_and_small_population_against_oracle(w, x, t):
    m = OffspringMeasure(w)
    law = z_law(w, x, t, size=250)
    assert at_most_one(m, x, t) == pytest.approx(law[0] + law[1], abs=1e-11)
    some_pair = 1.0 - law[0] - law[1]
    coalesced = pair_cdf_oracle(w, x, t, t, size=250)
    assert no_common_ancestor(m, x, t) == pytest.approx(some_pair - coalesced, abs=1e-9)


def test_pure_death_pair_laws(pure_death):
    assert pair_cdf(pure_death, 2, 1.0, 0.5) == 0.0
    assert no_common_ancestor(pure_death, 2, 1.0) == pytest.approx(math.exp(-2.0), abs=1e-10)
    assert no_common_ancestor(pure_death, 1, 1.0) == 0.0


@pytest.mark.parametrize("x", [1, 2, 5])
@pytest.mark.parametrize("t", [0.5, 2.0])
def test_conservation(measure, x, t):
    report = conservation_check(measure, x, t)
    assert report.passed
    assert abs(report[f"conservation total [x={x},t={t:g}]"].empirical - 1.0) < 1e-9


@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_pair_cdf_monotone_in_t1(a, b):
    m = OffspringMeasure(BINARY)
    lo, hi = sorted((a, b))
    assert pair_cdf(m, 2, 1.0, lo) <= pair_cdf(m, 2, 1.0, hi) + 1e-12


@pytest.mark.parametrize("y", [1, 2, 3])
@pytest.mark.parametrize("s", [0.0, 0.3, 0.7])
def test_conditioned_pgf_against_oracle(y, s):
    got = pair_pgf_conditioned(OffspringMeasure(MIXED), 0.4, 0.9, y, s)
    assert got == pytest.approx(pair_pgf_oracle(MIXED, y, 0.9, 0.4, s, size=250), rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("y", [1, 2])
def test_density_is_t1_derivative(binary, y):
    h = 1e-4
    for s in (0.0, 0.5):
        fd = (pair_pgf_conditioned(binary, 0.5 + h, 1.0, y, s) - pair_pgf_conditioned(binary, 0.5 - h, 1.0, y, s)) / (2 * h)
        assert pair_pgf_density_conditioned(binary, 0.5, 1.0, y, s) == pytest.approx(fd, rel=1e-7)


@pytest.mark.parametrize("y", [1, 2])
@pytest.mark.parametrize("t1,t2", [(0.5, 1.0), (0.5, 0.5), (0.2, 1.5)])
@pytest.mark.parametrize("s", [0.0, 0.2, 0.5])
def test_series_inversion_matches_density(binary, y, t1, t2, s):
    dens = pair_density_series(binary, t1, t2, y)
    p = np.arange(dens.size)
    total = np.sum(p * (p - 1) * dens * s ** np.maximum(p - 2, 0))
    assert total == pytest.approx(pair_pgf_density_conditioned(binary, t1, t2, y, s), abs=1e-9)


def test_density_point_guards(binary):
    with pytest.raises(TruncationError):
        pair_density_point(binary, 62, 0.5, 1.0, 1)
    with pytest.raises(DomainError):
        pair_density_point(binary, 1, 0.5, 1.0, 1)
    with pytest.raises(TruncationError):
        pair_density_series(OffspringMeasure({0: 1.0, 2: 3.0}), 1.0, 3.0, 1, SolverConfig(series_order=16))


@pytest.mark.parametrize("kw", [dict(t1=0.0), dict(t1=2.0), dict(t1=-1.0)])
def test_pair_argument_checks(binary, kw):
    with pytest.raises(DomainError):
        pair_pgf_conditioned(binary, kw["t1"], 1.0, 1, 0.5)


def test_pgf_weighted_needs_s_below_one(binary):
    with pytest.raises(DomainError):
        pair_pgf_conditioned(binary, 0.5, 1.0, 1, 1.0)


def test_order_statistics_factor():
    assert order_statistics_factor(1) == 1
    assert order_statistics_factor(2) == 3
    assert order_statistics_factor(3) == 18


@pytest.mark.parametrize("x", [1, 3])
@pytest.mark.parametrize("s", [0.0, 0.4])
def test_single_time_reduces_to_pair_density(binary, x, s):
    t, t1 = 1.5, 0.6
    first = multivariate_density_pgf(binary, x, t, [t1], s, Variant.FIRST_VS_OTHERS)
    order = multivariate_density_pgf(binary, x, t, [t1], s, Variant.ORDER_STATISTICS)
    pair = pair_pgf_density_conditioned(binary, t1, t, x, s)
    assert first == order
    assert first == pytest.approx(pair, abs=1e-10)


def test_single_time_joint_density_is_cdf_derivative(mixed):
    h = 1e-4
    fd = (pair_cdf(mixed, 2, 1.0, 0.5 + h, abs_tol=1e-12) - pair_cdf(mixed, 2, 1.0, 0.5 - h, abs_tol=1e-12)) / (2 * h)
    assert multivariate_joint_density(mixed, 2, 1.0, [0.5], abs_tol=1e-12) == pytest.approx(fd, rel=1e-6)


def test_bin_masses_against_integrated_density(binary):
    edges = [0.0, 0.5, 1.0]
    masses = multivariate_bin_masses(binary, 1, 1.0, edges, 2)
    assert set(masses) == {(0, 1)}
    ref, _ = dblquad(lambda t2, t1: multivariate_joint_density(binary, 1, 1.0, [t1, t2], abs_tol=1e-11),
                     0.0, 0.5, 0.5, 1.0, epsabs=1e-9)
    assert masses[(0, 1)] == pytest.approx(ref, rel=1e-6)
    ordered = multivariate_bin_masses(binary, 1, 1.0, edges, 2, Variant.ORDER_STATISTICS)
    assert ordered[(0, 1)] == pytest.approx(3 * masses[(0, 1)], rel=1e-12)


def test_bin_masses_one_time_match_cdf(mixed):
    edges = [0.0, 0.3, 1.0]
    masses = multivariate_bin_masses(mixed, 2, 1.0, edges, 1)
    assert masses[(0,)] == pytest.approx(pair_cdf(mixed, 2, 1.0, 0.3), abs=1e-9)
    assert masses[(0,)] + masses[(1,)] == pytest.approx(pair_cdf(mixed, 2, 1.0, 1.0), abs=1e-9)


def test_multivariate_time_checks(binary):
    with pytest.raises(DomainError):
        multivariate_density_pgf(binary, 1, 1.0, [0.7, 0.3], 0.0)
    with pytest.raises(DomainError):
        multivariate_bin_masses(binary, 1, 1.0, [0.0, 2.0], 1)


def test_pure_death_multivariate_zero(pure_death):
    assert multivariate_joint_density(pure_death, 3, 1.0, [0.2, 0.5]) == 0.0
    assert all(v == 0.0 for v in multivariate_bin_masses(pure_death, 3, 1.0, [0, 0.5, 1], 2).values())
