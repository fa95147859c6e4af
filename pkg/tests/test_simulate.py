import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bgwcoal import (DomainError, InsufficientPopulationError, OffspringMeasure, PopulationExplosionError,
                     run_replicas, sample_and_trace, simulate)
from bgwcoal.empirical import EmpiricalCdf, empirical_pair_cdf, law_report, multivariate_estimate, pair_report
from bgwcoal.simulate import (Event, GenealogyForest, ReplicaBatch, _draw_ordered, merge_times, pairwise_times,
                              replica_stream)

from conftest import BINARY, MIXED


def build(horizon, founders, events):
    """Forest from ``(time, parent, n)`` triples; children are numbered in birth order."""
    f = GenealogyForest(horizon, tuple(range(founders)))
    for i in range(founders):
        f.parent.append(-1)
        f.birth.append(0.0)
        f.death.append(math.inf)
    alive = list(range(founders))
    for time, who, n in events:
        f.death[who] = time
        kids = tuple(range(len(f.parent), len(f.parent) + n))
        for _ in kids:
            f.parent.append(who)
            f.birth.append(time)
            f.death.append(math.inf)
        alive.remove(who)
        alive.extend(kids)
        f.events.append(Event(time, who, kids, n))
    f.alive.extend(alive)
    return f


def test_no_founders():
    f = simulate(OffspringMeasure(BINARY), 0, 1.0, 1)
    assert f.population == 0 and f.events == []


def test_pure_death_forest():
    f = simulate(OffspringMeasure({0: 1.0}), 3, 2.0, 11)
    assert all(e.offspring_count == 0 for e in f.events)
    assert len(f.events) + f.population == 3
    if f.population >= 2:
        mat = pairwise_times(f, f.alive)
        assert np.all(np.isinf(mat[~np.eye(f.population, dtype=bool)]))


def test_determinism():
    m = OffspringMeasure(BINARY)
    a, b = simulate(m, 5, 1.0, 123), simulate(m, 5, 1.0, 123)
    assert a.events == b.events and a.alive == b.alive
    assert simulate(m, 5, 1.0, 124).events != a.events or not a.events


@given(st.integers(0, 2 ** 32), st.sampled_from([BINARY, MIXED]), st.integers(1, 4))
def test_forest_invariants(seed, w, x):
    f = simulate(OffspringMeasure(w), x, 1.0, seed)
    times = [e.time for e in f.events]
    assert all(a < b for a, b in zip(times, times[1:]))
    assert all(0 < s < 1.0 for s in times)
    born = Counter()
    for e in f.events:
        assert e.offspring_count == len(e.child_ids) != 1
        assert f.death[e.parent_id] == e.time
        for c in e.child_ids:
            born[c] += 1
            assert f.parent[c] == e.parent_id and f.birth[c] == e.time
    assert all(v == 1 for v in born.values())
    assert set(born) == set(range(x, len(f.parent)))
    never_replaced = {i for i in range(len(f.parent)) if math.isinf(f.death[i])}
    assert set(f.alive) == never_replaced
    assert len(f.alive) == len(set(f.alive))
    assert f.alive_set == {(i, f.birth[i]) for i in never_replaced}


def test_explosion_guard():
    with pytest.raises(PopulationExplosionError):
        simulate(OffspringMeasure({0: 0.1, 2: 5.0}), 1, 10.0, 3, cap=100)


def test_argument_checks():
    m = OffspringMeasure(BINARY)
    with pytest.raises(DomainError):
        simulate(m, -1, 1.0)
    with pytest.raises(DomainError):
        simulate(m, 1, -1.0)
    with pytest.raises(DomainError):
        simulate(m, 1, 1.0, -5)


def test_single_split():
    f = build(3.0, 1, [(1.0, 0, 2)])
    r = sample_and_trace(f, 2, 0)
    assert r.pairwise_T[0, 1] == r.pairwise_T[1, 0] == 2.0
    assert set(r.sampled_ids) == {1, 2}


def test_last_divergence_wins():
    # 0 splits at 1, child 1 splits at 2: the pair (3, 4) shares history up to time 2
    f = build(3.0, 1, [(1.0, 0, 2), (2.0, 1, 2)])
    mat = pairwise_times(f, [3, 4, 2])
    assert mat[0, 1] == 1.0
    assert mat[0, 2] == mat[1, 2] == 2.0
    assert list(merge_times(mat)) == [1.0, 2.0]


def test_multiway_split():
    f = build(4.0, 1, [(1.0, 0, 3), (3.0, 1, 2)])
    mat = pairwise_times(f, [4, 5, 2, 3])
    assert mat[0, 1] == 1.0
    assert mat[0, 2] == mat[2, 3] == mat[1, 3] == 3.0
    assert list(merge_times(mat)) == [1.0, 3.0, 3.0]


def test_different_founders():
    f = build(2.0, 2, [(0.5, 0, 2)])
    mat = pairwise_times(f, [2, 3, 1])
    assert mat[0, 1] == 1.5
    assert math.isinf(mat[0, 2]) and math.isinf(mat[1, 2])
    assert list(merge_times(mat)) == [1.5, math.inf]


def test_sample_result_consistency():
    m = OffspringMeasure(MIXED)
    f = simulate(m, 2, 1.5, 8)
    assert f.population >= 4
    r = sample_and_trace(f, 4, 99)
    assert len(set(r.sampled_ids)) == 4
    assert np.all(np.isnan(np.diag(r.pairwise_T)))
    off = ~np.eye(4, dtype=bool)
    assert np.array_equal(r.pairwise_T[off], r.pairwise_T.T[off])
    assert np.array_equal(r.T_vector, r.pairwise_T[0, 1:])
    assert np.all(np.diff(r.T_star) >= 0)


def test_insufficient_population():
    f = build(1.0, 1, [])
    with pytest.raises(InsufficientPopulationError):
        sample_and_trace(f, 2)


def test_ordered_sampling_is_uniform():
    stream = replica_stream(5, 0)
    counts = Counter(tuple(_draw_ordered(stream, 4, 2)) for _ in range(24000))
    assert len(counts) == 12
    expected = 2000
    assert all(abs(c - expected) < 5 * math.sqrt(expected) for c in counts.values())


def test_streams_are_distinct():
    a = [replica_stream(1, 0).next() for _ in range(3)]
    assert a != [replica_stream(1, 1).next() for _ in range(3)]
    assert a != [replica_stream(2, 0).next() for _ in range(3)]


@pytest.fixture(scope="module")
def batch():
    return run_replicas(OffspringMeasure(MIXED), 2, 1.0, 3000, 17, k=3)


def test_parallel_matches_serial(batch):
    other = run_replicas(OffspringMeasure(MIXED), 2, 1.0, 3000, 17, k=3, threads=3)
    for name in ("z", "pair_T", "pair_cross", "T_vector", "T_star"):
        assert np.array_equal(getattr(batch, name), getattr(other, name))


def test_first_marginal_is_pair(batch):
    has = batch.has_k
    assert np.array_equal(batch.T_vector[has, 0], batch.pair_T[has])


def test_concat_requires_contiguous(batch):
    head = replace(batch, z=batch.z[:10])
    with pytest.raises(DomainError):
        ReplicaBatch.concat([head, replace(batch, first=20)])


def test_reports_do_not_depend_on_replica_order(batch):
    m = OffspringMeasure(MIXED)
    perm = np.random.default_rng(0).permutation(batch.n)
    shuffled = replace(batch, z=batch.z[perm], pair_T=batch.pair_T[perm], pair_cross=batch.pair_cross[perm],
                       T_vector=batch.T_vector[perm], T_star=batch.T_star[perm])
    for build_report in (lambda b: pair_report(m, b, [0.5, 1.0]), lambda b: law_report(m, b),
                         lambda b: multivariate_estimate(m, b).report):
        a = [r.cells() for r in build_report(batch)]
        assert a == [r.cells() for r in build_report(shuffled)]


def test_small_batch_reports_pass(batch):
    m = OffspringMeasure(MIXED)
    assert pair_report(m, batch, [0.25, 0.5, 1.0]).passed
    assert law_report(m, batch).passed


@given(st.lists(st.floats(0, 5), max_size=30), st.integers(0, 10), st.floats(-1, 6), st.floats(-1, 6))
def test_empirical_cdf_properties(values, extra, a, b):
    n = len(values) + extra
    if n == 0:
        return
    cdf = EmpiricalCdf.from_samples(values + [math.inf] * extra, n)
    lo, hi = sorted((a, b))
    assert 0.0 <= cdf(lo) <= cdf(hi) <= 1.0
    for v in values:
        assert cdf(v) >= sum(u <= v for u in values) / n - 1e-15
    assert cdf.se(lo) == pytest.approx(math.sqrt(cdf(lo) * (1 - cdf(lo)) / n))


def test_pure_death_pair_estimate_is_zero():
    cdf, report = empirical_pair_cdf(OffspringMeasure({0: 1.0}), 2, 1.0, [0.25, 0.5, 1.0], 2000, 3)
    assert all(cdf(t1) == 0.0 for t1 in (0.25, 0.5, 1.0))
    assert report.passed
