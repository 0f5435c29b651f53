"""Graph generators: dyadic web, homogeneous and random trees, random webs.

All randomness is drawn from named Philox streams derived from the caller's
seed, so every generator is deterministic per (family, params, seed) and file
output is byte-identical across runs and platforms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .graphs import RootedTree, SpiderWeb
from .seeds import stream


def gen_dyadic_web(depth: int) -> SpiderWeb:
    """Binary-word web: level n holds the 2^n words of length n, tree edges
    append a letter, horizontal edges join lexicographically consecutive words
    plus the all-0s-to-all-1s wrap edge on each level."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    offsets = (1 << np.arange(depth + 2)) - 1  # level n starts at 2^n - 1
    parents = np.full(offsets[depth + 1], -1, dtype=np.int64)
    levels = np.zeros_like(parents, dtype=np.int32)
    hor = []
    for n in range(1, depth + 1):
        words = np.arange(1 << n, dtype=np.int64)
        ids = offsets[n] + words
        parents[ids] = offsets[n - 1] + (words >> 1)
        levels[ids] = n
        u = ids[:-1]
        hor.append(np.column_stack([u, u + 1]))
        if (1 << n) > 2:
            hor.append(np.array([[ids[0], ids[-1]]], dtype=np.int64))
    tree = RootedTree(parents, levels)
    return SpiderWeb(tree, np.concatenate(hor))


def gen_homogeneous_tree(q: int, depth: int) -> RootedTree:
    """Rooted tree where every vertex has exactly q successors."""
    if q < 2:
        raise ValueError("q must be at least 2")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    counts = [np.array([q], dtype=np.int64)]
    for _ in range(depth - 1):
        counts.append(np.full(int(counts[-1].sum()), q, dtype=np.int64))
    return _tree_from_counts(counts)


def _tree_from_counts(counts_per_level: list[np.ndarray]) -> RootedTree:
    """Assemble a level-major tree from per-level successor counts."""
    sizes = [1] + [int(c.sum()) for c in counts_per_level]
    n = sum(sizes)
    parents = np.full(n, -1, dtype=np.int64)
    levels = np.zeros(n, dtype=np.int32)
    start = 1
    parent_start = 0
    for lvl, counts in enumerate(counts_per_level, start=1):
        parent_ids = np.arange(parent_start, parent_start + len(counts), dtype=np.int64)
        ids = np.arange(start, start + int(counts.sum()))
        parents[ids] = np.repeat(parent_ids, counts)
        levels[ids] = lvl
        parent_start = start
        start = ids[-1] + 1 if ids.size else start
    return RootedTree(parents, levels)


def gen_random_ab_tree(a: int, b: int, depth: int, seed: int) -> RootedTree:
    """Random tree where each vertex draws its successor count uniformly from
    {a, ..., b}; a >= 2 means no internal vertex is ever successor-free."""
    if not 2 <= a <= b:
        raise ValueError("need 2 <= a <= b")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    rng = stream(seed, "ab-tree")
    counts = []
    width = 1
    for _ in range(depth):
        counts.append(rng.integers(a, b + 1, size=width).astype(np.int64))
        width = int(counts[-1].sum())
    return _tree_from_counts(counts)


def _sibling_pairs(child_start: np.ndarray, child_count: np.ndarray) -> np.ndarray:
    """All same-parent vertex pairs, as an (m, 2) array."""
    chunks = []
    for k in np.unique(child_count):
        if k < 2:
            continue
        starts = child_start[child_count == k]
        combo = np.array(list(combinations(range(int(k)), 2)), dtype=np.int64)
        u = starts[:, None] + combo[None, :, 0]
        v = starts[:, None] + combo[None, :, 1]
        chunks.append(np.column_stack([u.ravel(), v.ravel()]))
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(chunks)


def _cross_pairs(edges: np.ndarray, child_start: np.ndarray,
                 child_count: np.ndarray, level_base: int) -> np.ndarray:
    """children(s) x children(t) for each previous-level edge (s, t)."""
    if edges.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    s = edges[:, 0] - level_base
    t = edges[:, 1] - level_base
    ks, kt = child_count[s], child_count[t]
    tot = ks * kt
    rep = np.repeat(np.arange(len(edges)), tot)
    offs = np.arange(int(tot.sum())) - np.repeat(np.cumsum(tot) - tot, tot)
    i = offs // kt[rep]
    j = offs % kt[rep]
    return np.column_stack([child_start[s][rep] + i, child_start[t][rep] + j])


def gen_random_spiderweb(a: int, b: int, depth: int, density: float,
                         seed: int) -> SpiderWeb:
    """Random web over a random (a, b)-tree.

    Admissible pairs (same level, predecessors equal or already joined) are
    enumerated level by level, top-down, in canonical order; each is kept with
    probability `density`.
    """
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    tree = gen_random_ab_tree(a, b, depth, seed)
    count_stream = stream(seed, "ab-tree")  # replay the tree's count draws
    hor: list[np.ndarray] = []
    prev_edges = np.empty((0, 2), dtype=np.int64)
    width = 1
    parent_base = 0
    for lvl in range(1, depth + 1):
        counts = count_stream.integers(a, b + 1, size=width).astype(np.int64)
        level_base = parent_base + width
        child_start = level_base + np.concatenate([[0], np.cumsum(counts)[:-1]])
        cand = np.concatenate([
            _sibling_pairs(child_start, counts),
            _cross_pairs(prev_edges, child_start, counts, parent_base),
        ])
        if cand.size:
            lo = np.minimum(cand[:, 0], cand[:, 1])
            hi = np.maximum(cand[:, 0], cand[:, 1])
            order = np.unique(lo << 32 | hi)
            cand = np.column_stack([order >> 32, order & 0xFFFFFFFF])
        draws = stream(seed, f"web:level:{lvl}").random(len(cand))
        kept = cand[draws < density]
        hor.append(kept)
        prev_edges = kept
        parent_base = level_base
        width = int(counts.sum())
    edges = np.concatenate(hor) if hor else np.empty((0, 2), dtype=np.int64)
    return SpiderWeb(tree, edges)


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for one graph: family name, family parameters, seed."""
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    FAMILIES = ("dyadic", "homogeneous", "ab-tree", "web")

    def build(self) -> SpiderWeb:
        p = self.params
        if self.family == "dyadic":
            return gen_dyadic_web(int(p["depth"]))
        if self.family == "homogeneous":
            return gen_homogeneous_tree(int(p["q"]), int(p["depth"])).web()
        if self.family == "ab-tree":
            return gen_random_ab_tree(int(p["a"]), int(p["b"]), int(p["depth"]),
                                      self.seed).web()
        if self.family == "web":
            return gen_random_spiderweb(int(p["a"]), int(p["b"]), int(p["depth"]),
                                        float(p["density"]), self.seed)
        raise ValueError(f"unknown family {self.family!r}")
