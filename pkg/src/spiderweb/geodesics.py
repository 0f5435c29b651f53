"""Gromov products, four-point hyperbolicity, and standard geodesics.

Gromov products of integer hop distances are half-integers; all comparisons
run on doubled integers, so results are exact. A standard geodesic between x
and y climbs from x to the minimum level reached by some shortest path, moves
horizontally inside that level, and descends to y.
"""
from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graphs import SpiderWeb, UNREACHED, bfs_distances
from .seeds import stream

EXHAUSTIVE_VERTEX_LIMIT = 60  # all-quadruple mode is O(n^4); larger inputs must sample
SAMPLE_CHUNK = 1 << 16


def gromov_product_doubled(g: SpiderWeb, y: int, z: int, w: int) -> int:
    """2 * (y, z)_w, exact."""
    from_w = bfs_distances(g, w).dist
    d_yz = bfs_distances(g, y).d(z)
    return int(from_w[y]) + int(from_w[z]) - d_yz


def gromov_product(g: SpiderWeb, y: int, z: int, w: int) -> float:
    """(y, z)_w = (d(w,y) + d(w,z) - d(y,z)) / 2; halves are exact in floats."""
    return gromov_product_doubled(g, y, z, w) / 2.0


@dataclass(frozen=True)
class DeltaEstimate:
    """Four-point hyperbolicity constant; a half-integer stored doubled."""
    delta_doubled: int
    mode: str
    quadruples_checked: int
    witness: tuple[int, int, int, int] | None = None
    base: int | None = None

    @property
    def delta(self) -> float:
        return self.delta_doubled / 2.0


def _exhaustive_delta(g: SpiderWeb, base: int | None) -> DeltaEstimate:
    n = g.n_vertices
    if n > EXHAUSTIVE_VERTEX_LIMIT:
        raise ValueError(
            f"exhaustive mode supports at most {EXHAUSTIVE_VERTEX_LIMIT} vertices "
            f"(got {n}); use mode='sampled'")
    D = np.vstack([bfs_distances(g, s).dist for s in range(n)]).astype(np.int64)
    if (D == UNREACHED).any():
        raise ValueError("graph is disconnected")
    bases = range(n) if base is None else [int(base)]
    best = 0
    witness = None
    tmp = np.empty((n, n), dtype=np.int64)
    for w in bases:
        row = D[w]
        G = row[:, None] + row[None, :] - D  # doubled products with base w
        M = np.full((n, n), np.iinfo(np.int64).min, dtype=np.int64)
        for y in range(n):
            np.minimum(G[:, y, None], G[None, y, :], out=tmp)
            np.maximum(M, tmp, out=M)
        gap = M - G
        local = int(gap.max())
        if local > best:
            xi, zi = np.unravel_index(int(gap.argmax()), gap.shape)
            yi = int(np.argmax(np.minimum(G[xi, :], G[:, zi])))
            best = local
            witness = (int(xi), yi, int(zi), int(w))
    checked = n ** 3 * (1 if base is not None else n)
    return DeltaEstimate(delta_doubled=max(best, 0), mode="exhaustive",
                         quadruples_checked=checked, witness=witness, base=base)


def _eval_chunk(rows: np.ndarray, srcs: np.ndarray,
                quad: np.ndarray) -> tuple[int, tuple[int, int, int, int] | None]:
    x, y, z, w = quad
    ix = np.searchsorted(srcs, x)
    iy = np.searchsorted(srcs, y)
    iw = np.searchsorted(srcs, w)
    xy_w = rows[iw, x] + rows[iw, y] - rows[ix, y]
    yz_w = rows[iw, y] + rows[iw, z] - rows[iy, z]
    xz_w = rows[iw, x] + rows[iw, z] - rows[ix, z]
    gap = np.minimum(xy_w, yz_w) - xz_w
    i = int(gap.argmax())
    best = int(gap[i])
    if best <= 0:
        return 0, None
    return best, (int(x[i]), int(y[i]), int(z[i]), int(w[i]))


def four_point_delta(g: SpiderWeb, mode: str = "exhaustive",
                     sample_size: int = 1_000_000, seed: int = 0,
                     base: int | None = None, threads: int = 1) -> DeltaEstimate:
    """Empirical four-point constant.

    mode="exhaustive" scans every ordered quadruple (vertex count capped);
    mode="sampled" draws quadruples uniformly in fixed-size chunks with
    per-chunk derived seeds, merged by max, so the result is independent of
    thread count.
    """
    if mode == "exhaustive":
        return _exhaustive_delta(g, base)
    if mode != "sampled":
        raise ValueError("mode must be 'exhaustive' or 'sampled'")
    if sample_size < 1:
        raise ValueError("sample_size must be positive")
    n = g.n_vertices
    n_chunks = (sample_size + SAMPLE_CHUNK - 1) // SAMPLE_CHUNK
    quads = []
    needed: set[int] = set()
    for i in range(n_chunks):
        count = min(SAMPLE_CHUNK, sample_size - i * SAMPLE_CHUNK)
        q = stream(seed, f"delta:chunk:{i}").integers(0, n, size=(4, count))
        quads.append(q)
        needed.update(np.unique(q[[0, 1, 3]]).tolist())
    srcs = np.array(sorted(needed), dtype=np.int64)
    rows = np.vstack([bfs_distances(g, int(s)).dist.astype(np.int32)
                      for s in srcs])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda q: _eval_chunk(rows, srcs, q), quads))
    else:
        results = [_eval_chunk(rows, srcs, q) for q in quads]
    best, witness = 0, None
    for val, wit in results:
        if val > best:
            best, witness = val, wit
    return DeltaEstimate(delta_doubled=best, mode="sampled",
                         quadruples_checked=sample_size, witness=witness)


# --- standard geodesics --------------------------------------------------------

@dataclass(frozen=True)
class StandardGeodesic:
    """Shortest path in ascending / horizontal / descending form.

    Segments share their junction vertices: ascending ends where horizontal
    starts, horizontal ends where descending starts. min_level is the level
    the horizontal segment lives on.
    """
    x: int
    y: int
    min_level: int
    ascending: list[int]
    horizontal: list[int]
    descending: list[int]

    @property
    def total_length(self) -> int:
        return (len(self.ascending) - 1 + len(self.horizontal) - 1
                + len(self.descending) - 1)

    @property
    def horizontal_length(self) -> int:
        return len(self.horizontal) - 1

    def vertices(self) -> list[int]:
        return self.ascending[:-1] + self.horizontal + self.descending[1:]


def _python_adjacency(g: SpiderWeb) -> list[list[int]]:
    adj = getattr(g, "_pyadj", None)
    if adj is None:
        idx = g.indices.tolist()
        ptr = g.indptr.tolist()
        adj = [idx[ptr[v]:ptr[v + 1]] for v in range(g.n_vertices)]
        g._pyadj = adj
    return adj


class GeodesicFactory:
    """Standard geodesics from one source, sharing a single level-aware BFS.

    The BFS tracks, per vertex, the least min-level achievable by a shortest
    path from the source, breaking length ties toward smaller min-level (then
    smaller predecessor id), and records the predecessor realizing it.
    """

    def __init__(self, g: SpiderWeb, x: int):
        g.ensure_valid()
        if not 0 <= x < g.n_vertices:
            raise ValueError(f"vertex {x} out of range")
        self.g = g
        self.x = int(x)
        adj = _python_adjacency(g)
        levels = g.levels.tolist()
        n = g.n_vertices
        dist = [-1] * n
        minlvl = [0] * n
        pred = [-1] * n
        dist[x] = 0
        minlvl[x] = levels[x]
        queue = deque([x])
        while queue:
            u = queue.popleft()
            mu = minlvl[u]
            lu = levels[u]
            if mu > lu:  # fold in u's own level exactly once, at pop time
                mu = minlvl[u] = lu
            du1 = dist[u] + 1
            for v in adj[u]:
                dv = dist[v]
                if dv == -1:
                    dist[v] = du1
                    minlvl[v] = mu
                    pred[v] = u
                    queue.append(v)
                elif dv == du1 and (mu < minlvl[v]
                                    or (mu == minlvl[v] and u < pred[v])):
                    minlvl[v] = mu
                    pred[v] = u
        self._dist = dist
        self._minlvl = minlvl
        self._pred = pred
        self._levels = levels
        self._parents = g.parents.tolist()

    def distance(self, y: int) -> int:
        return self._dist[y]

    def _project(self, v: int, target_level: int) -> int:
        parents = self._parents
        lv = self._levels[v]
        while lv > target_level:
            v = parents[v]
            lv -= 1
        return v

    def geodesic(self, y: int) -> StandardGeodesic:
        g = self.g
        x = self.x
        d = self._dist[y]
        if d == -1:
            raise ValueError(f"vertex {y} unreachable from {x}")
        levels = self._levels
        parents = self._parents
        nstar = min(self._minlvl[y], levels[y])
        path = [y]
        v = y
        while v != x:
            v = self._pred[v]
            path.append(v)
        path.reverse()
        ascending = [x]
        v = x
        while levels[v] > nstar:
            v = parents[v]
            ascending.append(v)
        cur = ascending[-1]
        horizontal = [cur]
        for a, b in zip(path, path[1:]):
            if levels[a] != levels[b]:
                continue  # vertical step, projection unchanged
            pb = self._project(b, nstar)
            if pb != cur:
                if not g.adjacent(cur, pb):
                    raise AssertionError(
                        f"internal consistency: projected vertices {cur}, {pb} "
                        "are not adjacent")
                horizontal.append(pb)
                cur = pb
        descending = [y]
        v = y
        while levels[v] > nstar:
            v = parents[v]
            descending.append(v)
        descending.reverse()
        if descending[0] != cur:
            raise AssertionError("internal consistency: segment junction mismatch")
        geo = StandardGeodesic(x=x, y=int(y), min_level=nstar,
                               ascending=ascending, horizontal=horizontal,
                               descending=descending)
        if geo.total_length != d:
            raise AssertionError(
                f"internal consistency: standard geodesic length {geo.total_length} "
                f"!= distance {d} for pair ({x}, {y})")
        return geo


def standard_geodesic(g: SpiderWeb, x: int, y: int) -> StandardGeodesic:
    """Standard-form shortest path from x to y."""
    return GeodesicFactory(g, x).geodesic(y)


def verify_geodesic_lengths(g: SpiderWeb) -> int:
    """Build standard geodesics for every ordered pair and check each against
    BFS; returns the number of pairs checked. Raises on any mismatch."""
    n = g.n_vertices
    checked = 0
    for x in range(n):
        fac = GeodesicFactory(g, x)
        ref = bfs_distances(g, x).dist
        for y in range(n):
            geo = fac.geodesic(y)
            if geo.total_length != int(ref[y]):
                raise AssertionError(f"length mismatch at pair ({x}, {y})")
            checked += 1
    return checked


@dataclass
class HorizontalBoundReport:
    """Horizontal-segment lengths against the 4*delta + 1 bound.

    When delta came from sampling it is only a lower bound, so over-bound
    lengths are inconclusive rather than hard failures.
    """
    delta: float
    delta_mode: str
    bound: float
    pairs_checked: int
    max_horizontal: int
    over_bound: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def hard_failures(self) -> int:
        return len(self.over_bound) if self.delta_mode == "exhaustive" else 0

    @property
    def inconclusive(self) -> int:
        return len(self.over_bound) if self.delta_mode != "exhaustive" else 0


def horizontal_bound_report(g: SpiderWeb, delta: DeltaEstimate,
                            pairs: int | None = None, seed: int = 0,
                            keep: int = 32) -> HorizontalBoundReport:
    """Check sampled (or all, when pairs is None) vertex pairs against the
    horizontal-length bound 4*delta + 1."""
    g.ensure_valid()
    n = g.n_vertices
    if pairs is None:
        xs = np.repeat(np.arange(n), n)
        ys = np.tile(np.arange(n), n)
    else:
        rng = stream(seed, "horizontal-pairs")
        xs = rng.integers(0, n, size=pairs)
        ys = rng.integers(0, n, size=pairs)
    bound = 4 * delta.delta + 1
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    max_h = 0
    over: list[tuple[int, int, int]] = []
    i = 0
    while i < len(xs):
        j = i
        x = int(xs[i])
        fac = GeodesicFactory(g, x)
        while j < len(xs) and xs[j] == x:
            geo = fac.geodesic(int(ys[j]))
            h = geo.horizontal_length
            if h > max_h:
                max_h = h
            if h > bound and len(over) < keep:
                over.append((x, int(ys[j]), h))
            j += 1
        i = j
    return HorizontalBoundReport(delta=delta.delta, delta_mode=delta.mode,
                                 bound=bound, pairs_checked=len(xs),
                                 max_horizontal=max_h, over_bound=over)
