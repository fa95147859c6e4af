"""Exact event-driven simulation of the process with its full genealogy.

Each replica draws from its own Philox stream keyed by ``(master_seed,
replica)``, so replicas can be computed in any order or in parallel and still
reproduce bit for bit.
"""
from __future__ import annotations

import bisect
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InsufficientPopulationError, PopulationExplosionError
from .offspring import OffspringMeasure

DEFAULT_CAP = 1_000_000
_BUFFER = 64
_SEED_MASK = (1 << 64) - 1


class UniformStream:
    """Buffered uniforms on ``[0, 1)`` from a counter-based generator."""

    __slots__ = ("_gen", "_buf", "_i")

    def __init__(self, generator: np.random.Generator):
        self._gen = generator
        self._buf = generator.random(_BUFFER).tolist()
        self._i = 0

    def next(self) -> float:
        if self._i == _BUFFER:
            self._buf = self._gen.random(_BUFFER).tolist()
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u


def _check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0 or seed > _SEED_MASK:
        raise DomainError(f"seeds are integers in [0, 2**64), got {seed!r}")
    return int(seed)


def replica_stream(master_seed: int, replica: int) -> UniformStream:
    """Independent stream for replica ``replica``: Philox keyed by ``(master_seed, replica)``."""
    key = [_check_seed(master_seed), _check_seed(replica)]
    return UniformStream(np.random.Generator(np.random.Philox(key=key)))


def _as_stream(seed) -> UniformStream:
    if isinstance(seed, UniformStream):
        return seed
    return replica_stream(seed, 0)


class Event(NamedTuple):
    time: float
    parent_id: int
    child_ids: tuple
    offspring_count: int


@dataclass
class GenealogyForest:
    """Parent-pointer record of one run up to ``horizon``.

    Individuals are numbered in order of birth; founders are ``0..x-1``.
    ``death[i]`` is the time ``i`` was replaced (``inf`` if alive at the
    horizon) and ``alive`` lists the individuals alive at the horizon.
    """

    horizon: float
    founders: tuple
    parent: list = field(default_factory=list)
    birth: list = field(default_factory=list)
    death: list = field(default_factory=list)
    events: list = field(default_factory=list)
    alive: list = field(default_factory=list)

    @property
    def population(self) -> int:
        return len(self.alive)

    @property
    def alive_set(self) -> set:
        return {(i, self.birth[i]) for i in self.alive}

    def lineage(self, ident: int) -> list:
        """``ident`` followed by its ancestors up to its founder."""
        path = [ident]
        p = self.parent[ident]
        while p >= 0:
            path.append(p)
            p = self.parent[p]
        return path

    def founder_of(self, ident: int) -> int:
        return self.lineage(ident)[-1]


def _offspring_table(m: OffspringMeasure):
    law = m.offspring_law()
    sizes = list(law.keys())
    cum = np.cumsum(list(law.values())).tolist()
    return sizes, cum[:-1]


def _check_run_args(x, t, cap):
    if isinstance(x, bool) or int(x) != x or x < 0:
        raise DomainError(f"x must be a non-negative integer, got {x!r}")
    if not (math.isfinite(t) and t >= 0):
        raise DomainError(f"t must be finite and >= 0, got {t!r}")
    if not cap >= 1:
        raise DomainError(f"population cap must be >= 1, got {cap!r}")
    return int(x), float(t)


def simulate(m: OffspringMeasure, x, t, seed=0, *, cap=DEFAULT_CAP) -> GenealogyForest:
    """Gillespie run from ``x`` founders to time ``t``.

    ``seed`` is an integer (replica 0 of that master seed) or a
    :class:`UniformStream`, which is advanced in place.
    """
    x, t = _check_run_args(x, t, cap)
    stream = _as_stream(seed)
    sizes, cum = _offspring_table(m)
    rate = m.total_rate
    forest = GenealogyForest(t, tuple(range(x)))
    parent, birth, death, events = forest.parent, forest.birth, forest.death, forest.events
    alive = forest.alive
    for i in range(x):
        parent.append(-1)
        birth.append(0.0)
        death.append(math.inf)
        alive.append(i)
    nxt = stream.next
    clock = 0.0
    while alive:
        z = len(alive)
        clock -= math.log1p(-nxt()) / (z * rate)
        if clock >= t:
            break
        slot = min(int(nxt() * z), z - 1)
        who = alive[slot]
        n = sizes[bisect.bisect_right(cum, nxt())]
        death[who] = clock
        first = len(parent)
        children = tuple(range(first, first + n))
        for _ in children:
            parent.append(who)
            birth.append(clock)
            death.append(math.inf)
        last = alive.pop()
        if slot < z - 1:
            alive[slot] = last
        alive.extend(children)
        events.append(Event(clock, who, children, n))
        if len(alive) > cap:
            raise PopulationExplosionError(
                f"population {len(alive)} exceeds cap {cap:g} at time {clock:.6g}; lower t or raise the cap"
            )
    return forest


@dataclass(frozen=True)
class SampleResult:
    sampled_ids: tuple
    pairwise_T: np.ndarray
    T_vector: np.ndarray
    T_star: np.ndarray


def _draw_ordered(stream: UniformStream, population: int, k: int) -> list:
    """``k`` distinct positions in ``range(population)``, uniformly ordered (partial Fisher-Yates)."""
    swaps = {}
    out = []
    for j in range(k):
        r = j + min(int(stream.next() * (population - j)), population - j - 1)
        vr = swaps.get(r, r)
        swaps[r] = swaps.get(j, j)
        out.append(vr)
    return out


def pairwise_times(forest: GenealogyForest, ids: Sequence[int]) -> np.ndarray:
    """Coalescence times between ``ids``; the diagonal is NaN (undefined)."""
    k = len(ids)
    paths = [forest.lineage(i) for i in ids]
    lookups = [{a: None for a in p} for p in paths]
    out = np.full((k, k), np.nan)
    for i in range(k):
        for j in range(i + 1, k):
            value = math.inf
            if paths[i][-1] == paths[j][-1]:
                anc = lookups[i]
                for a in paths[j]:
                    if a in anc:
                        value = forest.horizon - forest.death[a]
                        break
            out[i, j] = out[j, i] = value
    return out


def merge_times(pairwise: np.ndarray) -> np.ndarray:
    """Sorted merge heights of the sample tree (single linkage), ``inf`` across founders."""
    k = pairwise.shape[0]
    root = list(range(k))

    def find(a):
        while root[a] != a:
            root[a] = root[root[a]]
            a = root[a]
        return a

    pairs = sorted((pairwise[i, j], i, j) for i in range(k) for j in range(i + 1, k))
    heights = []
    for value, i, j in pairs:
        a, b = find(i), find(j)
        if a != b:
            root[b] = a
            heights.append(value)
    return np.array(heights, dtype=float)


def sample_and_trace(forest: GenealogyForest, k: int, seed=0) -> SampleResult:
    """Draw ``k`` alive individuals without replacement and trace their lineages."""
    if isinstance(k, bool) or int(k) != k or k < 2:
        raise DomainError(f"k must be an integer >= 2, got {k!r}")
    z = forest.population
    if z < k:
        raise InsufficientPopulationError(z, int(k))
    stream = _as_stream(seed)
    ids = tuple(forest.alive[p] for p in _draw_ordered(stream, z, int(k)))
    mat = pairwise_times(forest, ids)
    return SampleResult(ids, mat, mat[0, 1:].copy(), merge_times(mat))


# -- replica engine ------------------------------------------------------------


@dataclass(frozen=True)
class ReplicaBatch:
    """Per-replica records.

    ``pair_T`` is the first two draws' coalescence time (``inf`` when fewer
    than two are alive or they have different founders); ``T_vector`` and
    ``T_star`` rows are ``inf`` when fewer than ``k`` are alive.
    """

    x: int
    t: float
    k: int
    master_seed: int
    first: int
    z: np.ndarray
    pair_T: np.ndarray
    pair_cross: np.ndarray
    T_vector: np.ndarray
    T_star: np.ndarray

    @property
    def n(self) -> int:
        return int(self.z.size)

    @property
    def has_pair(self) -> np.ndarray:
        return self.z >= 2

    @property
    def has_k(self) -> np.ndarray:
        return self.z >= self.k

    @staticmethod
    def concat(batches: Sequence["ReplicaBatch"]) -> "ReplicaBatch":
        """Join contiguous batches of the same run, in replica order."""
        batches = sorted(batches, key=lambda b: b.first)
        head = batches[0]
        pos = head.first
        for b in batches:
            if (b.x, b.t, b.k, b.master_seed) != (head.x, head.t, head.k, head.master_seed) or b.first != pos:
                raise DomainError("batches do not form one contiguous run")
            pos += b.n
        return ReplicaBatch(
            head.x, head.t, head.k, head.master_seed, head.first,
            np.concatenate([b.z for b in batches]),
            np.concatenate([b.pair_T for b in batches]),
            np.concatenate([b.pair_cross for b in batches]),
            np.concatenate([b.T_vector for b in batches]),
            np.concatenate([b.T_star for b in batches]),
        )


def _run_range(weights, x, t, k, master_seed, lo, hi, cap) -> ReplicaBatch:
    m = OffspringMeasure(weights)
    count = hi - lo
    z = np.zeros(count, dtype=np.int64)
    pair_T = np.full(count, np.inf)
    pair_cross = np.zeros(count, dtype=bool)
    t_vec = np.full((count, k - 1), np.inf)
    t_star = np.full((count, k - 1), np.inf)
    for i, r in enumerate(range(lo, hi)):
        stream = replica_stream(master_seed, r)
        forest = simulate(m, x, t, stream, cap=cap)
        pop = forest.population
        z[i] = pop
        if pop < 2:
            continue
        draw = min(k, pop)
        ids = [forest.alive[p] for p in _draw_ordered(stream, pop, draw)]
        mat = pairwise_times(forest, ids)
        pair_T[i] = mat[0, 1]
        pair_cross[i] = math.isinf(mat[0, 1])
        if draw == k:
            t_vec[i] = mat[0, 1:]
            t_star[i] = merge_times(mat)
    return ReplicaBatch(x, t, k, master_seed, lo, z, pair_T, pair_cross, t_vec, t_star)


def run_replicas(m: OffspringMeasure, x, t, n, master_seed, *, k=2, cap=DEFAULT_CAP, threads=1) -> ReplicaBatch:
    """``n`` independent replicas; replica ``r`` uses :func:`replica_stream` ``(master_seed, r)``.

    ``threads`` worker processes split the replica range (0 picks the CPU
    count); results are identical for any value.
    """
    x, t = _check_run_args(x, t, cap)
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"replica count must be a positive integer, got {n!r}")
    if isinstance(k, bool) or int(k) != k or k < 2:
        raise DomainError(f"k must be an integer >= 2, got {k!r}")
    if isinstance(threads, bool) or int(threads) != threads or threads < 0:
        raise DomainError(f"threads must be a non-negative integer, got {threads!r}")
    n, k = int(n), int(k)
    master_seed = _check_seed(master_seed)
    workers = (os.cpu_count() or 1) if threads == 0 else int(threads)
    workers = max(1, min(workers, n))
    weights = dict(m.weights)
    if workers == 1:
        return _run_range(weights, x, t, k, master_seed, 0, n, cap)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_range, weights, x, t, k, master_seed, int(lo), int(hi), cap)
            for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
        return ReplicaBatch.concat([f.result() for f in futures])
