"""Turn a hyperbolic metric space into a spider's web graph.

The pipeline: greedy 1-separated nets on concentric unit spheres, a
predecessor tree linking each net point to its nearest point one sphere in,
horizontal edges between same-level points within oracle distance theta, and
a completion pass that copies every horizontal edge onto all predecessor
pairs. The result is measured against the source space (rough-isometry
deviations, overlap numbers) rather than certified.

All randomness flows through the config seed; rebuilding with the same
config reproduces the web bit for bit.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import (RootedTree, SpiderWeb, Violation, decode_pairs, encode_pairs,
                     validate_quasi_spiderweb, validate_spiderweb)

THETA_FLOOR = 15.0
PARENT_DISTANCE_LIMIT = 2.1  # beyond this the sphere nets were too sparse
PAIR_BLOCK = 2048


class DiscretizeError(RuntimeError):
    """Pipeline failure with a diagnosis, not a bug."""


class NetQualityError(DiscretizeError):
    """Sphere nets too sparse for a sound predecessor tree."""


class ValenceCeilingError(DiscretizeError):
    """theta admits so many edges the web stops being bounded-valence."""


class QuasiPreconditionError(DiscretizeError):
    """Completion requested on a graph that is not a quasi web at depth K."""

    def __init__(self, msg: str, violations: list[Violation]):
        super().__init__(msg)
        self.violations = violations


@dataclass(frozen=True)
class DiscretizationConfig:
    max_radius: int
    theta: float = THETA_FLOOR
    completion_k: int = 20
    sphere_oversample: int = 8
    seed: int = 0
    allow_small_theta: bool = False

    def __post_init__(self):
        if self.max_radius < 1:
            raise ValueError("max_radius must be at least 1")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.theta < THETA_FLOOR and not self.allow_small_theta:
            raise ValueError(
                f"theta {self.theta} is below the floor {THETA_FLOOR}; "
                "pass allow_small_theta to override")
        if self.completion_k < 1:
            raise ValueError("completion depth must be at least 1")
        if self.sphere_oversample < 1:
            raise ValueError("sphere_oversample must be at least 1")


# --- sphere nets ---------------------------------------------------------------------

def _circle_greedy(oracle, samples: np.ndarray, sep: float) -> list:
    """Greedy net on a common circle: the nearest kept point is always one of
    the two angular neighbors, so each sample needs at most two distance
    checks. Decisions use true distances; angles only locate the neighbors."""
    angles: list[float] = []
    points: list[complex] = []
    for z in samples:
        z = complex(z)
        phi = math.atan2(z.imag, z.real) % (2.0 * math.pi)
        if not points:
            angles.append(phi)
            points.append(z)
            continue
        i = bisect.bisect_left(angles, phi)
        ok = True
        for j in {(i - 1) % len(points), i % len(points)}:
            if oracle.distance(z, points[j]) < sep:
                ok = False
                break
        if ok:
            angles.insert(i, phi)
            points.insert(i, z)
    return points


def _matrix_greedy(oracle, samples: list, sep: float) -> list:
    dm = oracle.pairwise_distances(samples, samples)
    kept: list[int] = []
    for i in range(len(samples)):
        if not kept or (dm[i, kept] >= sep).all():
            kept.append(i)
    return [samples[i] for i in kept]


def _scan_greedy(oracle, samples: list, sep: float) -> list:
    kept: list = []
    for s in samples:
        if all(oracle.distance(s, k) >= sep for k in kept):
            kept.append(s)
    return kept


def greedy_net(oracle, samples, sep: float = 1.0, circle_level: int | None = None) -> list:
    """Maximal separated subset of `samples` in iteration order: a sample is
    kept iff it lies at distance >= sep from every kept point, so every
    rejected sample is within sep of some kept one."""
    samples = list(np.asarray(samples)) if isinstance(samples, np.ndarray) \
        else list(samples)
    if circle_level is not None and hasattr(oracle, "min_gap_angle"):
        return _circle_greedy(oracle, samples, sep)
    if hasattr(oracle, "pairwise_distances") and len(samples) <= 6000:
        return _matrix_greedy(oracle, samples, sep)
    return _scan_greedy(oracle, samples, sep)


def _net_size_estimate(oracle, n: int) -> int:
    if hasattr(oracle, "min_gap_angle"):  # circle circumference in the disk
        return int(2.0 * math.pi * math.sinh(n)) + 1
    if hasattr(oracle, "tree"):
        return max(1, len(oracle.tree.vertices_at_level(n))
                   if n <= oracle.tree.depth else 0)
    return 256


def build_sphere_nets(oracle, max_radius: int, oversample: int, seed: int) -> list[list]:
    """One greedy 1-separated net per sphere radius 1..max_radius."""
    nets = []
    for n in range(1, max_radius + 1):
        count = max(8, _net_size_estimate(oracle, n)) * oversample
        samples = oracle.sample_sphere(n, count, seed)
        if len(samples) == 0:
            raise NetQualityError(f"sphere at radius {n} produced no samples")
        is_circle = isinstance(samples, np.ndarray) and \
            np.issubdtype(samples.dtype, np.complexfloating)
        net = greedy_net(oracle, samples, sep=1.0,
                         circle_level=n if is_circle else None)
        if not net:
            raise NetQualityError(f"empty net at radius {n}")
        nets.append(net)
    return nets


# --- predecessor tree ----------------------------------------------------------------

def build_tree(oracle, nets: list[list]) -> tuple[RootedTree, list, np.ndarray]:
    """Root at the basepoint; each net point parented to the closest point on
    the previous sphere (ties to the lowest id). Returns the tree, the
    embedding (vertex id -> source point), and per-vertex parent distances."""
    sizes = [len(net) for net in nets]
    n_vertices = 1 + sum(sizes)
    parents = np.full(n_vertices, -1, dtype=np.int32)
    levels = np.zeros(n_vertices, dtype=np.int32)
    embedding: list = [oracle.basepoint()]
    parent_dist = np.zeros(n_vertices, dtype=np.float64)
    base = 1
    prev_base = 0
    for lvl, net in enumerate(nets, start=1):
        ids = np.arange(base, base + len(net))
        levels[ids] = lvl
        embedding.extend(net)
        if lvl == 1:
            parents[ids] = 0
            pd = np.array([oracle.distance(oracle.basepoint(), p) for p in net])
        else:
            prev = nets[lvl - 2]
            pd = np.empty(len(net))
            arg = np.empty(len(net), dtype=np.int64)
            for lo in range(0, len(net), PAIR_BLOCK):
                hi = min(len(net), lo + PAIR_BLOCK)
                dm = oracle.pairwise_distances(net[lo:hi], prev)
                arg[lo:hi] = np.argmin(dm, axis=1)  # first minimum = lowest id
                pd[lo:hi] = dm[np.arange(hi - lo), arg[lo:hi]]
            parents[ids] = prev_base + arg
        parent_dist[ids] = pd
        if pd.max() > PARENT_DISTANCE_LIMIT:
            k = int(np.argmax(pd))
            raise NetQualityError(
                f"parent distance {pd[k]:.4f} at level {lvl} exceeds "
                f"{PARENT_DISTANCE_LIMIT}; raise sphere_oversample")
        prev_base = base
        base += len(net)
    tree = RootedTree(parents, levels)
    return tree, embedding, parent_dist


# --- horizontal edges ----------------------------------------------------------------

@dataclass
class GammaStats:
    level_sizes: list[int]
    level_edge_counts: list[int]
    valence_median: float
    valence_max: int
    edge_length_min: float
    edge_length_max: float
    parent_distance_max: float


def build_gamma(tree: RootedTree, embedding: list, oracle, theta: float,
                valence_factor: float = 10.0) -> tuple[SpiderWeb, GammaStats]:
    """Join same-level vertices at oracle distance <= theta."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    level_sizes = []
    level_counts = []
    chunks = []
    len_min, len_max = math.inf, 0.0
    for lvl in range(1, tree.depth + 1):
        ids = tree.vertices_at_level(lvl)
        pts = embedding[ids[0]:ids[-1] + 1] if len(ids) else []
        level_sizes.append(len(ids))
        count = 0
        for lo in range(0, len(ids), PAIR_BLOCK):
            hi = min(len(ids), lo + PAIR_BLOCK)
            for lo2 in range(lo, len(ids), PAIR_BLOCK):
                hi2 = min(len(ids), lo2 + PAIR_BLOCK)
                dm = oracle.pairwise_distances(pts[lo:hi], pts[lo2:hi2])
                mask = dm <= theta
                if lo2 == lo:
                    mask &= np.triu(np.ones_like(mask, dtype=bool), k=1)
                ii, jj = np.nonzero(mask)
                if ii.size:
                    sel = dm[ii, jj]
                    len_min = min(len_min, float(sel.min()))
                    len_max = max(len_max, float(sel.max()))
                    chunks.append(np.stack(
                        [ids[0] + lo + ii, ids[0] + lo2 + jj],
                        axis=1).astype(np.int32))
                    count += ii.size
        level_counts.append(count)
    horizontal = np.concatenate(chunks, axis=0) if chunks \
        else np.empty((0, 2), dtype=np.int32)
    web = SpiderWeb(tree, horizontal)
    degrees = web.degree_array()
    med = float(np.median(degrees))
    vmax = int(degrees.max())
    if vmax > valence_factor * max(med, 1.0):
        raise ValenceCeilingError(
            f"max valence {vmax} exceeds {valence_factor} x median {med}; "
            "theta too large for the net density")
    stats = GammaStats(level_sizes=level_sizes, level_edge_counts=level_counts,
                       valence_median=med, valence_max=vmax,
                       edge_length_min=len_min if len_max else 0.0,
                       edge_length_max=len_max,
                       parent_distance_max=0.0)
    return web, stats


# --- completion -----------------------------------------------------------------------

@dataclass
class CompletionReport:
    added_count: int
    per_level_added: dict[int, int]
    length_min: float = 0.0
    length_max: float = 0.0
    length_mean: float = 0.0


def calibrate_k(web: SpiderWeb) -> int:
    """Smallest completion depth at which the graph is a quasi spider's web.
    Passing at m implies passing at every deeper m, so this is well-defined;
    depth itself always passes (all predecessors reach the root)."""
    for m in range(1, max(web.depth, 1) + 1):
        if not validate_quasi_spiderweb(web, m):
            return m
    return max(web.depth, 1)


def complete_to_spiderweb(web: SpiderWeb, k: int, oracle=None, embedding=None,
                          ) -> tuple[SpiderWeb, CompletionReport]:
    """Add {p^j(v), p^j(w)} for every horizontal edge {v, w} and every j >= 1
    with distinct endpoints. Requires the quasi property at depth k first;
    the completed graph always passes the full validator."""
    violations = validate_quasi_spiderweb(web, k)
    if violations:
        v = violations[0]
        raise QuasiPreconditionError(
            f"not a quasi spider's web at depth {k}: edge {tuple(v.edge)} "
            f"at level {v.level} ({v.detail})", violations)
    horiz = web.horizontal_edges()
    parents = web.parents
    u, v = horiz[:, 0].astype(np.int64), horiz[:, 1].astype(np.int64)
    new_codes = []
    while True:
        alive = (u > 0) & (v > 0)
        if not alive.any():
            break
        u, v = parents[u[alive]].astype(np.int64), parents[v[alive]].astype(np.int64)
        distinct = u != v
        if distinct.any():
            new_codes.append(encode_pairs(
                np.minimum(u[distinct], v[distinct]).astype(np.int32),
                np.maximum(u[distinct], v[distinct]).astype(np.int32)))
    if new_codes:
        codes = np.unique(np.concatenate(new_codes))
        codes = codes[~np.isin(codes, web.hcodes, assume_unique=False)]
    else:
        codes = np.empty(0, dtype=np.int64)
    added = np.stack(decode_pairs(codes), axis=1).astype(np.int32) if codes.size \
        else np.empty((0, 2), dtype=np.int32)
    combined = np.concatenate([horiz, added], axis=0) if added.size else horiz
    completed = SpiderWeb(web.tree, combined)
    leftover = validate_spiderweb(completed)
    if leftover:
        raise AssertionError(f"completion left violations: {leftover[:3]}")
    per_level = {}
    if added.size:
        lvls, cnts = np.unique(web.levels[added[:, 0]], return_counts=True)
        per_level = {int(a): int(b) for a, b in zip(lvls, cnts)}
    report = CompletionReport(added_count=int(len(added)), per_level_added=per_level)
    if added.size and oracle is not None and embedding is not None:
        lengths = np.array([oracle.distance(embedding[int(a)], embedding[int(b)])
                            for a, b in added])
        report.length_min = float(lengths.min())
        report.length_max = float(lengths.max())
        report.length_mean = float(lengths.mean())
    return completed, report


# --- the pipeline ---------------------------------------------------------------------

@dataclass
class Discretization:
    config: DiscretizationConfig
    tree: RootedTree
    web: SpiderWeb  # completed
    gamma_edges: np.ndarray  # horizontal edges before completion
    completion: CompletionReport
    embedding: list
    stats: GammaStats
    minimal_k: int
    parent_distances: np.ndarray = field(repr=False, default=None)

    @property
    def max_radius(self) -> int:
        return self.config.max_radius


def discretize(oracle, config: DiscretizationConfig) -> Discretization:
    nets = build_sphere_nets(oracle, config.max_radius, config.sphere_oversample,
                             config.seed)
    tree, embedding, parent_dist = build_tree(oracle, nets)
    gamma, stats = build_gamma(tree, embedding, oracle, config.theta)
    stats.parent_distance_max = float(parent_dist.max())
    minimal_k = calibrate_k(gamma)
    completed, completion = complete_to_spiderweb(gamma, config.completion_k,
                                                  oracle=oracle, embedding=embedding)
    base = oracle.basepoint()
    radial = np.array([oracle.distance(base, p) for p in embedding])
    if not np.array_equal(np.round(radial).astype(np.int64),
                          tree.levels.astype(np.int64)):
        bad = int(np.argmax(np.round(radial) != tree.levels))
        raise DiscretizeError(
            f"vertex {bad}: level {tree.levels[bad]} but radial distance {radial[bad]}")
    return Discretization(config=config, tree=tree, web=completed,
                          gamma_edges=gamma.horizontal_edges(),
                          completion=completion, embedding=embedding, stats=stats,
                          minimal_k=minimal_k, parent_distances=parent_dist)


# --- fidelity reports ------------------------------------------------------------------

@dataclass
class RoughIsometryReport:
    max_abs_deviation: float
    mean_abs_deviation: float
    pairs: int
    margin: int
    per_radius: list[tuple[int, int, float, float]]  # (radius, count, max, mean)


def rough_isometry_report(disc: Discretization, oracle, pairs: int, seed: int,
                          margin: int = 2) -> RoughIsometryReport:
    """Compare graph distance with oracle distance on sampled interior pairs.

    Interior means level <= max_radius - margin: vertices near the truncation
    frontier lack the outward edges their infinite counterparts would carry.
    Adds one widest-separation same-level pair per level so the far regime is
    always represented."""
    from .graphs import bfs_distances
    from .seeds import stream
    if pairs < 1:
        raise ValueError("pairs must be at least 1")
    web, emb = disc.web, disc.embedding
    interior = np.flatnonzero(web.levels <= disc.max_radius - margin)
    if interior.size < 2:
        raise DiscretizeError(f"margin {margin} leaves no interior pairs")
    rng = stream(seed, "rough-isometry")
    n_src = max(1, min(48, int(interior.size), pairs))
    srcs = interior[rng.integers(0, interior.size, size=n_src)]
    per = -(-pairs // n_src)
    wanted: set[tuple[int, int]] = set()
    for s in srcs:
        for d in interior[rng.integers(0, interior.size, size=per)]:
            if s != d:
                wanted.add((int(s), int(d)))
    # far stratum: widest pair among sampled same-level candidates
    for lvl in range(1, disc.max_radius - margin + 1):
        ids = web.tree.vertices_at_level(lvl)
        if len(ids) < 2:
            continue
        cand = np.unique(ids[rng.integers(0, len(ids), size=min(24, len(ids)))])
        if len(cand) < 2:
            continue
        dm = oracle.pairwise_distances([emb[i] for i in cand],
                                       [emb[i] for i in cand])
        i, j = np.unravel_index(int(np.argmax(dm)), dm.shape)
        if cand[i] != cand[j]:
            wanted.add((int(cand[i]), int(cand[j])))
    by_src: dict[int, list[int]] = {}
    for s, d in wanted:
        by_src.setdefault(s, []).append(d)
    devs = []
    by_radius: dict[int, list[float]] = {}
    for s, dsts in by_src.items():
        dist = bfs_distances(web, s).dist
        for d in dsts:
            d_graph = float(dist[d])
            d_oracle = oracle.distance(emb[s], emb[d])
            dev = abs(d_graph - d_oracle)
            devs.append(dev)
            by_radius.setdefault(int(round(d_oracle)), []).append(dev)
    table = [(r, len(v), max(v), sum(v) / len(v))
             for r, v in sorted(by_radius.items())]
    return RoughIsometryReport(max_abs_deviation=max(devs),
                               mean_abs_deviation=sum(devs) / len(devs),
                               pairs=len(devs), margin=margin, per_radius=table)


def overlap_number(disc: Discretization, oracle, probes: int, seed: int) -> int:
    """Max over sampled probe points of how many embedded vertices sit within
    oracle distance 2. Probe sets grow by prefix, so doubling `probes` can
    only raise the answer."""
    if probes < 1:
        raise ValueError("probes must be at least 1")
    r_probe = max(disc.max_radius - 2, 1)
    cloud = oracle.sample_interior(r_probe, probes, seed)
    emb = disc.embedding
    best = 0
    for lo in range(0, len(cloud), 256):
        block = list(cloud[lo:lo + 256])
        dm = oracle.pairwise_distances(block, emb)
        best = max(best, int((dm < 2.0).sum(axis=1).max()))
    return best


def project_function(disc: Discretization, oracle, cloud_points, weights) -> np.ndarray:
    """Push a weighted point cloud onto the web: each vertex receives the
    total weight landing within oracle distance 2 of its embedded point."""
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != len(cloud_points):
        raise ValueError("one weight per cloud point")
    if (weights < 0).any():
        raise ValueError("weights must be nonnegative")
    f = np.zeros(len(disc.embedding))
    for lo in range(0, len(cloud_points), 256):
        block = list(cloud_points[lo:lo + 256])
        dm = oracle.pairwise_distances(block, disc.embedding)
        f += weights[lo:lo + len(block)] @ (dm < 2.0)
    return f
