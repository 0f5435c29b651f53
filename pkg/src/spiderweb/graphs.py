"""Rooted trees, spider's web graphs, distances, and the graph file format.

A spider's web is a rooted tree plus "horizontal" edges between vertices of
equal level, where the endpoints' predecessors either coincide or are
themselves joined by an edge. Vertices are stored level-major (all of level 0,
then level 1, ...) so level queries are range checks and per-level slices are
contiguous. Both graph classes are immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Sentinel distance for unreachable vertices. Valid inputs are connected, so
#: seeing this value downstream is a bug signal, not a condition to handle.
UNREACHED = np.int32(np.iinfo(np.int32).max)


class GraphStructureError(ValueError):
    """Malformed vertex/edge arrays, distinct from web-rule violations."""


class GraphFormatError(ValueError):
    """Invalid graph file content."""


def _as_int_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int32)
    if arr.ndim != 1:
        raise GraphStructureError(f"{name} must be one-dimensional")
    return arr


def levels_from_parents(parents: np.ndarray) -> np.ndarray:
    """Depth of each vertex in the parent forest; parent ids must precede children."""
    n = len(parents)
    levels = np.full(n, -1, dtype=np.int32)
    levels[0] = 0
    order = np.argsort(parents[1:], kind="stable") + 1
    sorted_parents = parents[order]
    # children of v occupy one contiguous run of `order`
    starts = np.searchsorted(sorted_parents, np.arange(n))
    ends = np.searchsorted(sorted_parents, np.arange(n), side="right")
    frontier = np.array([0], dtype=np.int64)
    depth = 0
    seen = 1
    while frontier.size:
        depth += 1
        counts = ends[frontier] - starts[frontier]
        total = int(counts.sum())
        if total == 0:
            break
        idx = np.repeat(starts[frontier] - np.cumsum(counts) + counts, counts) + np.arange(total)
        frontier = order[idx]
        levels[frontier] = depth
        seen += total
    if seen != n:
        raise GraphStructureError("parent array does not describe a single rooted tree")
    return levels


def _csr_from_edges(src: np.ndarray, dst: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(src, kind="stable")
    indices = dst[order].astype(np.int32)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, indices


def _gather_csr(indptr: np.ndarray, indices: np.ndarray, frontier: np.ndarray) -> np.ndarray:
    """All CSR neighbors of `frontier`, concatenated (with repeats)."""
    counts = indptr[frontier + 1] - indptr[frontier]
    total = int(counts.sum())
    if total == 0:
        return indices[:0]
    idx = np.repeat(indptr[frontier] - np.cumsum(counts) + counts, counts) + np.arange(total)
    return indices[idx]


def encode_pairs(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Order-free 64-bit codes for vertex pairs."""
    lo = np.minimum(u, v).astype(np.int64)
    hi = np.maximum(u, v).astype(np.int64)
    return (lo << 32) | hi


def decode_pairs(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return (codes >> 32).astype(np.int32), (codes & 0xFFFFFFFF).astype(np.int32)


class RootedTree:
    """Immutable rooted tree with level-major vertex ids; vertex 0 is the root."""

    def __init__(self, parents, levels=None):
        parents = _as_int_array(parents, "parents")
        n = len(parents)
        if n == 0 or parents[0] != -1:
            raise GraphStructureError("vertex 0 must be the root (parent -1)")
        if n > 1:
            body = parents[1:]
            if body.min() < 0 or (body >= np.arange(1, n)).any():
                raise GraphStructureError("every parent id must precede its child")
        if levels is None:
            levels = levels_from_parents(parents)
        else:
            levels = _as_int_array(levels, "levels")
            if len(levels) != n or levels[0] != 0:
                raise GraphStructureError("levels array does not match parents")
            if n > 1 and (levels[1:] != levels[parents[1:]] + 1).any():
                raise GraphStructureError("levels inconsistent with parents")
        if (np.diff(levels) < 0).any():
            raise GraphStructureError("vertex ids are not level-major")
        self.parents = parents
        self.levels = levels
        self.depth = int(levels[-1]) if n else 0
        # level n occupies ids [level_offsets[n], level_offsets[n+1])
        self.level_offsets = np.searchsorted(levels, np.arange(self.depth + 2))
        src = np.concatenate([parents[1:], np.arange(1, n)])
        dst = np.concatenate([np.arange(1, n), parents[1:]])
        self.tree_indptr, self.tree_indices = _csr_from_edges(src, dst, n)
        for arr in (self.parents, self.levels, self.level_offsets,
                    self.tree_indptr, self.tree_indices):
            arr.setflags(write=False)
        self._web: SpiderWeb | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.parents)

    def vertices_at_level(self, n: int) -> np.ndarray:
        if not 0 <= n <= self.depth:
            return np.arange(0, dtype=np.int32)
        return np.arange(self.level_offsets[n], self.level_offsets[n + 1], dtype=np.int32)

    def children(self, v: int) -> np.ndarray:
        nbrs = self.tree_indices[self.tree_indptr[v]:self.tree_indptr[v + 1]]
        return nbrs[self.levels[nbrs] > self.levels[v]]

    def ancestor(self, v: int, k: int) -> int:
        """k-th predecessor of v; k must not exceed level(v)."""
        if k > self.levels[v]:
            raise ValueError(f"vertex {v} has no {k}-th predecessor")
        for _ in range(k):
            v = int(self.parents[v])
        return v

    def web(self) -> "SpiderWeb":
        """This tree viewed as a spider's web with no horizontal edges."""
        if self._web is None:
            self._web = SpiderWeb(self, np.empty((0, 2), dtype=np.int32))
        return self._web


def as_web(g) -> "SpiderWeb":
    """Accept a SpiderWeb, or a bare RootedTree as its edge-free web."""
    return g.web() if isinstance(g, RootedTree) else g


class SpiderWeb:
    """A rooted tree plus same-level horizontal edges.

    Horizontal edges are held both as a sorted global code array (membership
    queries) and inside the combined adjacency CSR (traversal). Construction
    checks structure only; rule conformance is `validate_spiderweb`'s job.
    """

    def __init__(self, tree: RootedTree, horizontal):
        if not isinstance(tree, RootedTree):
            raise GraphStructureError("tree must be a RootedTree")
        pairs = np.asarray(horizontal, dtype=np.int64)
        if pairs.size == 0:
            pairs = np.empty((0, 2), dtype=np.int64)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise GraphStructureError("horizontal edges must be an (m, 2) array")
        n = tree.n_vertices
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
            raise GraphStructureError("horizontal edge endpoint out of range")
        if pairs.size and (pairs[:, 0] == pairs[:, 1]).any():
            raise GraphStructureError("horizontal self-loop")
        codes = np.unique(encode_pairs(pairs[:, 0], pairs[:, 1]))
        if len(codes) != len(pairs):
            raise GraphStructureError("duplicate horizontal edge")
        self.tree = tree
        self.hcodes = codes
        hu, hv = decode_pairs(codes)
        src = np.concatenate([tree.parents[1:], np.arange(1, n), hu, hv]).astype(np.int64)
        dst = np.concatenate([np.arange(1, n), tree.parents[1:], hv, hu]).astype(np.int64)
        self.indptr, self.indices = _csr_from_edges(src, dst, n)
        for arr in (self.hcodes, self.indptr, self.indices):
            arr.setflags(write=False)
        self._valid: bool | None = None

    # --- structural accessors -------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return self.tree.n_vertices

    @property
    def depth(self) -> int:
        return self.tree.depth

    @property
    def parents(self) -> np.ndarray:
        return self.tree.parents

    @property
    def levels(self) -> np.ndarray:
        return self.tree.levels

    @property
    def n_horizontal(self) -> int:
        return len(self.hcodes)

    def horizontal_edges(self) -> np.ndarray:
        """(m, 2) array of horizontal edges, canonically ordered."""
        hu, hv = decode_pairs(self.hcodes)
        return np.column_stack([hu, hv])

    def vertices_at_level(self, n: int) -> np.ndarray:
        return self.tree.vertices_at_level(n)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_horizontal_edge(self, u, v) -> np.ndarray | bool:
        u = np.asarray(u)
        v = np.asarray(v)
        codes = encode_pairs(u, v)
        pos = np.searchsorted(self.hcodes, codes)
        pos = np.minimum(pos, max(len(self.hcodes) - 1, 0))
        found = (self.hcodes[pos] == codes) if len(self.hcodes) else np.zeros(codes.shape, bool)
        return bool(found) if np.isscalar(u) or u.ndim == 0 else found

    def adjacent(self, u: int, v: int) -> bool:
        if self.parents[u] == v or self.parents[v] == u:
            return True
        return bool(self.has_horizontal_edge(u, v))

    def degree_array(self) -> np.ndarray:
        return (self.indptr[1:] - self.indptr[:-1]).astype(np.int64)

    def ensure_valid(self) -> None:
        """Precondition gate for operations that assume web rules hold."""
        if self._valid is None:
            self._valid = not validate_spiderweb(self)
        if not self._valid:
            raise GraphStructureError("graph violates the spider's web rules")


# --- validation ----------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    """One broken web rule, attached to the offending edge."""
    rule: str
    edge: tuple[int, int]
    level: int
    detail: str = ""


def _horizontal_member(g: SpiderWeb, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    if len(g.hcodes) == 0 or len(u) == 0:
        return np.zeros(len(u), dtype=bool)
    codes = encode_pairs(u, v)
    pos = np.searchsorted(g.hcodes, codes)
    pos = np.minimum(pos, len(g.hcodes) - 1)
    return g.hcodes[pos] == codes


def validate_spiderweb(g: SpiderWeb) -> list[Violation]:
    """All horizontal-edge rule violations (empty means g is a spider's web)."""
    if g.n_horizontal == 0:
        return []
    hu, hv = decode_pairs(g.hcodes)
    lvl = g.levels
    out: list[Violation] = []
    same = lvl[hu] == lvl[hv]
    for i in np.flatnonzero(~same):
        out.append(Violation("equal-level", (int(hu[i]), int(hv[i])),
                             int(lvl[hu[i]]),
                             f"levels {int(lvl[hu[i]])} and {int(lvl[hv[i]])} differ"))
    su, sv = hu[same], hv[same]
    pu, pv = g.parents[su], g.parents[sv]
    ok = (pu == pv) | _horizontal_member(g, pu, pv)
    for j in np.flatnonzero(~ok):
        out.append(Violation("predecessor-adjacency", (int(su[j]), int(sv[j])),
                             int(lvl[su[j]]),
                             f"predecessors {int(pu[j])} and {int(pv[j])} "
                             "neither coincide nor share an edge"))
    return out


def validate_quasi_spiderweb(g: SpiderWeb, m: int) -> list[Violation]:
    """Violations of the relaxed rule: for edges at level n >= m, every k-th
    predecessor pair with k in {m, ..., n} must coincide or share an edge."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    if g.n_horizontal == 0:
        return []
    hu, hv = decode_pairs(g.hcodes)
    lvl = g.levels
    elvl = lvl[hu]
    bad_levels = np.flatnonzero(lvl[hu] != lvl[hv])
    out = [Violation("equal-level", (int(hu[i]), int(hv[i])), int(lvl[hu[i]]),
                     "levels differ") for i in bad_levels]
    same = lvl[hu] == lvl[hv]
    au, av = hu.copy(), hv.copy()
    for k in range(1, g.depth + 1):
        act = same & (elvl >= k)
        if not act.any():
            break
        au[act] = g.parents[au[act]]
        av[act] = g.parents[av[act]]
        if k < m:
            continue
        sel = np.flatnonzero(act)
        cu, cv = au[sel], av[sel]
        ok = (cu == cv) | _horizontal_member(g, cu, cv)
        for j in np.flatnonzero(~ok):
            e = sel[j]
            out.append(Violation(
                "quasi-predecessor-adjacency", (int(hu[e]), int(hv[e])), int(elvl[e]),
                f"{k}-th predecessors {int(cu[j])} and {int(cv[j])} "
                "neither coincide nor share an edge"))
    return out


# --- distances -------------------------------------------------------------------

@dataclass
class DistanceField:
    """BFS distances from one source; UNREACHED marks disconnection (a bug
    signal on valid inputs, never an expected value)."""
    source: int
    dist: np.ndarray = field(repr=False)

    def d(self, v: int) -> int:
        return int(self.dist[v])

    @property
    def complete(self) -> bool:
        return bool((self.dist != UNREACHED).all())


def _bfs(indptr: np.ndarray, indices: np.ndarray, n: int, source: int,
         r_max: int | None = None) -> np.ndarray:
    dist = np.full(n, UNREACHED, dtype=np.int32)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    d = 0
    while frontier.size and (r_max is None or d < r_max):
        nbrs = _gather_csr(indptr, indices, frontier)
        nbrs = nbrs[dist[nbrs] == UNREACHED]
        if nbrs.size == 0:
            break
        frontier = np.unique(nbrs).astype(np.int64)
        d += 1
        dist[frontier] = d
    return dist


def bfs_distances(g: SpiderWeb, source: int, edges: str = "all",
                  r_max: int | None = None) -> DistanceField:
    """Exact hop distances from `source`.

    edges="all" walks the full web; edges="tree" restricts to tree edges.
    r_max truncates the search; vertices beyond it keep the UNREACHED sentinel.
    """
    if not 0 <= source < g.n_vertices:
        raise ValueError(f"source {source} out of range")
    if edges == "all":
        dist = _bfs(g.indptr, g.indices, g.n_vertices, source, r_max)
    elif edges == "tree":
        dist = _bfs(g.tree.tree_indptr, g.tree.tree_indices, g.n_vertices, source, r_max)
    else:
        raise ValueError("edges must be 'all' or 'tree'")
    return DistanceField(source=source, dist=dist)


def ball(g: SpiderWeb, x: int, r: int) -> np.ndarray:
    """Closed ball: vertices within hop distance r of x, ascending ids."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    dist = _bfs(g.indptr, g.indices, g.n_vertices, x, r)
    return np.flatnonzero(dist != UNREACHED).astype(np.int32)

def sphere_slice(g: SpiderWeb, x: int, p: int, k: int) -> np.ndarray:
    """Vertices at hop distance exactly p from x lying on level k."""
    if p < 0:
        raise ValueError("radius must be nonnegative")
    dist = _bfs(g.indptr, g.indices, g.n_vertices, x, p)
    hit = (dist == p) & (g.levels == k)
    return np.flatnonzero(hit).astype(np.int32)


# --- file format ------------------------------------------------------------------
# Header "spiderweb v1 <vertex_count>", then one "v <id> <parent>" line per
# non-root vertex in id order, then "h <u> <v>" lines in canonical order.

FORMAT_MAGIC = "spiderweb v1"


def save_graph(g: SpiderWeb, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{FORMAT_MAGIC} {g.n_vertices}\n")
        parents = g.parents
        lines = [f"v {i} {parents[i]}\n" for i in range(1, g.n_vertices)]
        fh.writelines(lines)
        hu, hv = decode_pairs(g.hcodes)
        fh.writelines(f"h {u} {v}\n" for u, v in zip(hu.tolist(), hv.tolist()))


def load_graph(path) -> SpiderWeb:
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split()
        if parts[:2] != ["spiderweb", "v1"] or len(parts) != 3:
            raise GraphFormatError(f"bad header: {header!r}")
        try:
            n = int(parts[2])
        except ValueError:
            raise GraphFormatError(f"bad vertex count in header: {header!r}") from None
        if n < 1:
            raise GraphFormatError("vertex count must be at least 1")
        parents = np.full(n, -1, dtype=np.int64)
        hpairs: list[tuple[int, int]] = []
        next_v = 1
        for lineno, raw in enumerate(fh, start=2):
            tok = raw.split()
            if not tok:
                continue
            if tok[0] == "v":
                if len(tok) != 3:
                    raise GraphFormatError(f"line {lineno}: malformed vertex line")
                vid, pid = int(tok[1]), int(tok[2])
                if vid != next_v:
                    raise GraphFormatError(
                        f"line {lineno}: vertex ids must run 1..{n - 1} in order")
                if not 0 <= pid < vid:
                    raise GraphFormatError(
                        f"line {lineno}: parent {pid} must precede vertex {vid}")
                parents[vid] = pid
                next_v += 1
            elif tok[0] == "h":
                if len(tok) != 3:
                    raise GraphFormatError(f"line {lineno}: malformed edge line")
                u, v = int(tok[1]), int(tok[2])
                if not (0 <= u < n and 0 <= v < n) or u == v:
                    raise GraphFormatError(f"line {lineno}: bad edge endpoints")
                hpairs.append((min(u, v), max(u, v)))
            else:
                raise GraphFormatError(f"line {lineno}: unknown record {tok[0]!r}")
        if next_v != n:
            raise GraphFormatError(f"expected {n - 1} vertex lines, got {next_v - 1}")
        if len(set(hpairs)) != len(hpairs):
            raise GraphFormatError("duplicate horizontal edge")
        try:
            tree = RootedTree(parents)
            return SpiderWeb(tree, np.array(hpairs, dtype=np.int64).reshape(-1, 2))
        except GraphStructureError as exc:
            raise GraphFormatError(str(exc)) from exc
