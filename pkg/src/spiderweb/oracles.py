"""Metric-space backends behind one oracle interface.

Two concrete spaces: the Poincaré disk model of the hyperbolic plane, and
metric trees with unit edge lengths. Both expose basepoint, distance,
geodesic points, and seeded sphere sampling; the discretizer consumes only
this surface, never backend internals.

Tolerances are named once here: EPS_EQ for coincidence, EPS_SPHERE for the
radius of constructed sphere samples, EPS_TRI for triangle-inequality slack
on sampled triples. Double precision near the disk boundary is the binding
constraint, hence the construction-time boundary margin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .graphs import RootedTree
from .seeds import stream

EPS_EQ = 1e-12
EPS_SPHERE = 1e-9
EPS_TRI = 1e-9
BOUNDARY_MARGIN = 1e-6  # reject |p| > 1 - this at construction


class OracleDomainError(ValueError):
    """A point fell outside the oracle's domain."""


@runtime_checkable
class MetricOracle(Protocol):
    """What the discretizer needs from a metric space."""

    def basepoint(self): ...

    def distance(self, p, q) -> float: ...

    def sample_sphere(self, n: int, count: int, seed: int) -> list: ...

    def geodesic_point(self, p, q, t: float): ...


# --- Poincaré disk ------------------------------------------------------------------

def _mobius_to_origin(p: complex, z: complex) -> complex:
    """The disk isometry sending p to 0."""
    return (z - p) / (1.0 - p.conjugate() * z)


def _mobius_from_origin(p: complex, z: complex) -> complex:
    return (z + p) / (1.0 + p.conjugate() * z)


class DiskOracle:
    """Poincaré disk: points are complex numbers strictly inside the unit circle.

    distance(p, q) = arccosh(1 + 2|p-q|^2 / ((1-|p|^2)(1-|q|^2))), computed in
    the equivalent Möbius form 2 atanh |(p-q)/(1 - conj(p) q)| which stays
    accurate for nearly coincident points.
    """

    coord_names = ("u", "v")

    def basepoint(self) -> complex:
        return 0j

    def check(self, p: complex) -> complex:
        p = complex(p)
        if abs(p) > 1.0 - BOUNDARY_MARGIN:
            raise OracleDomainError(f"point {p} too close to the unit circle")
        return p

    def distance(self, p, q) -> float:
        p, q = self.check(p), self.check(q)
        # canonical argument order makes d(p,q) == d(q,p) exact, not just close
        if (q.real, q.imag) < (p.real, p.imag):
            p, q = q, p
        return 2.0 * math.atanh(abs((p - q) / (1.0 - p.conjugate() * q)))

    def pairwise_distances(self, ps, qs) -> np.ndarray:
        """Distance matrix, shape (len(ps), len(qs))."""
        pa = np.asarray(ps, dtype=np.complex128)
        qa = np.asarray(qs, dtype=np.complex128)
        if (np.abs(pa) > 1.0 - BOUNDARY_MARGIN).any() or \
           (np.abs(qa) > 1.0 - BOUNDARY_MARGIN).any():
            raise OracleDomainError("point too close to the unit circle")
        shape = (len(pa), len(qa))
        a = np.broadcast_to(pa.reshape(-1, 1), shape)
        b = np.broadcast_to(qa.reshape(1, -1), shape)
        swap = (a.real > b.real) | ((a.real == b.real) & (a.imag > b.imag))
        lo = np.where(swap, b, a)
        hi = np.where(swap, a, b)
        return 2.0 * np.arctanh(np.abs((lo - hi) / (1.0 - np.conj(lo) * hi)))

    def geodesic_point(self, p, q, t: float) -> complex:
        p, q = self.check(p), self.check(q)
        d = self.distance(p, q)
        if not -EPS_SPHERE <= t <= d + EPS_SPHERE:
            raise OracleDomainError(f"arclength {t} outside [0, {d}]")
        t = min(max(t, 0.0), d)
        if d < EPS_EQ:
            return p
        w = _mobius_to_origin(p, q)  # geodesic from 0 to w is radial
        z = math.tanh(t / 2.0) * (w / abs(w))
        return _mobius_from_origin(p, z)

    def sample_sphere(self, n: int, count: int, seed: int) -> np.ndarray:
        """Jittered equal-angle sectors on the circle of hyperbolic radius n,
        in increasing-angle order. Euclidean radius is tanh(n/2)."""
        if n < 1:
            raise OracleDomainError("sphere radius must be a positive integer")
        if count <= 0:
            return np.empty(0, dtype=np.complex128)
        rng = stream(seed, f"disk:sphere:{n}")
        angles = (np.arange(count) + rng.random(count)) * (2.0 * math.pi / count)
        rho = math.tanh(n / 2.0)
        return rho * np.exp(1j * angles)

    def sample_interior(self, r_max: float, count: int, seed: int) -> np.ndarray:
        """Area-uniform points of the ball of hyperbolic radius r_max.

        Draws are per-point, so the first N points of a count-2N call equal
        the count-N call: growing a probe set keeps its prefix."""
        rng = stream(seed, f"disk:interior:{r_max}")
        u = rng.random((count, 2))
        # hyperbolic area of B_r is 2 pi (cosh r - 1); invert the radial CDF
        radii = np.arccosh(1.0 + u[:, 0] * (math.cosh(r_max) - 1.0))
        angles = u[:, 1] * 2.0 * math.pi
        return np.tanh(radii / 2.0) * np.exp(1j * angles)

    def min_gap_angle(self, n: int, sep: float = 1.0) -> float:
        """Angle g with: two points on the radius-n circle are < sep apart
        iff their angular gap is < g. Distance on a common circle is monotone
        in the gap (cosh d = cosh^2 n - sinh^2 n cos gap)."""
        c = (math.cosh(n) ** 2 - math.cosh(sep)) / math.sinh(n) ** 2
        return math.acos(min(1.0, max(-1.0, c)))

    def point_coords(self, p) -> tuple[float, float]:
        return (p.real, p.imag)


# --- metric trees -------------------------------------------------------------------

@dataclass(frozen=True)
class TreePoint:
    """Point on the metric tree: `offset` along the edge from parent(edge) to
    `edge`, measured from the parent. offset = 1 is the vertex `edge` itself;
    the root is TreePoint(0, 1.0)."""
    edge: int
    offset: float

    def is_vertex(self) -> bool:
        return self.offset == 1.0


class MetricTreeOracle:
    """A rooted tree with unit edge lengths as a geodesic metric space."""

    coord_names = ("edge", "offset")

    def __init__(self, tree: RootedTree):
        self.tree = tree
        self._parents = tree.parents
        self._levels = tree.levels

    def basepoint(self) -> TreePoint:
        return TreePoint(0, 1.0)

    def vertex_point(self, v: int) -> TreePoint:
        if not 0 <= v < self.tree.n_vertices:
            raise OracleDomainError(f"vertex {v} out of range")
        return TreePoint(int(v), 1.0)

    def _canon(self, p: TreePoint) -> TreePoint:
        if not isinstance(p, TreePoint):
            raise OracleDomainError(f"not a tree point: {p!r}")
        if not 0 <= p.edge < self.tree.n_vertices:
            raise OracleDomainError(f"edge id {p.edge} out of range")
        if not 0.0 <= p.offset <= 1.0:
            raise OracleDomainError(f"offset {p.offset} outside [0, 1]")
        if p.edge == 0 and p.offset != 1.0:
            raise OracleDomainError("the root vertex carries no edge")
        if p.offset == 0.0:  # the parent end is the parent's own vertex point
            return TreePoint(int(self._parents[p.edge]), 1.0)
        return p

    def _vertex_distance(self, u: int, v: int) -> int:
        lu, lv = int(self._levels[u]), int(self._levels[v])
        d = 0
        while lu > lv:
            u = int(self._parents[u]); lu -= 1; d += 1
        while lv > lu:
            v = int(self._parents[v]); lv -= 1; d += 1
        while u != v:
            u = int(self._parents[u]); v = int(self._parents[v]); d += 2
        return d

    def _anchors(self, p: TreePoint) -> list[tuple[int, float]]:
        """(vertex, arclength from p) pairs through which any path must exit."""
        if p.is_vertex():
            return [(p.edge, 0.0)]
        return [(int(self._parents[p.edge]), p.offset), (p.edge, 1.0 - p.offset)]

    def distance(self, p, q) -> float:
        p, q = self._canon(p), self._canon(q)
        if p.edge == q.edge and not p.is_vertex() and not q.is_vertex():
            return abs(p.offset - q.offset)
        return min(pa + self._vertex_distance(pv, qv) + qa
                   for pv, pa in self._anchors(p)
                   for qv, qa in self._anchors(q))

    def _vertex_path(self, u: int, v: int) -> list[int]:
        up, down = [u], [v]
        lu, lv = int(self._levels[u]), int(self._levels[v])
        while lu > lv:
            u = int(self._parents[u]); lu -= 1; up.append(u)
        while lv > lu:
            v = int(self._parents[v]); lv -= 1; down.append(v)
        while u != v:
            u = int(self._parents[u]); up.append(u)
            v = int(self._parents[v]); down.append(v)
        return up + down[::-1][1:]

    def _edge_point(self, a: int, b: int, frac: float) -> TreePoint:
        """Point at arclength frac from a along the edge {a, b}."""
        if frac == 0.0:
            return TreePoint(a, 1.0)
        if frac == 1.0:
            return TreePoint(b, 1.0)
        if int(self._parents[b]) == a:
            return TreePoint(b, frac)
        if int(self._parents[a]) == b:
            return TreePoint(a, 1.0 - frac)
        raise AssertionError("not an edge")

    def geodesic_point(self, p, q, t: float):
        p, q = self._canon(p), self._canon(q)
        d = self.distance(p, q)
        if not -EPS_SPHERE <= t <= d + EPS_SPHERE:
            raise OracleDomainError(f"arclength {t} outside [0, {d}]")
        t = min(max(t, 0.0), d)
        if p.edge == q.edge and not p.is_vertex() and not q.is_vertex():
            s = p.offset + math.copysign(t, q.offset - p.offset)
            return TreePoint(p.edge, s)
        (pv, pa), (qv, qa) = min(
            ((ap, aq) for ap in self._anchors(p) for aq in self._anchors(q)),
            key=lambda pair: pair[0][1] + self._vertex_distance(pair[0][0], pair[1][0])
            + pair[1][1])
        if t <= pa:  # still on p's edge, moving toward the exit vertex pv
            if p.is_vertex():  # then pa == 0, so t == 0
                return p
            if pv == int(self._parents[p.edge]):
                return self._canon(TreePoint(p.edge, p.offset - t))
            return self._canon(TreePoint(p.edge, p.offset + t))
        t2 = t - pa
        path = self._vertex_path(pv, qv)
        d_mid = len(path) - 1
        if t2 <= d_mid:
            k = int(math.floor(t2))
            frac = t2 - k
            if k == d_mid:
                return TreePoint(path[k], 1.0)
            return self._edge_point(path[k], path[k + 1], frac)
        t3 = t2 - d_mid  # remaining arclength into q's edge
        if qv == int(self._parents[q.edge]):
            return self._canon(TreePoint(q.edge, min(t3, q.offset)))
        return self._canon(TreePoint(q.edge, max(1.0 - t3, q.offset)))

    def sample_sphere(self, n: int, count: int, seed: int) -> list[TreePoint]:
        """All points at integer distance n from the root: exactly the level-n
        vertices on a unit-edge tree. count and seed are accepted for
        interface parity; enumeration is already exhaustive and deterministic."""
        if n < 1:
            raise OracleDomainError("sphere radius must be a positive integer")
        if n > self.tree.depth:
            return []
        return [TreePoint(int(v), 1.0) for v in self.tree.vertices_at_level(n)]

    def sample_interior(self, r_max: float, count: int, seed: int) -> list[TreePoint]:
        """Points spread over edges with root-distance at most r_max. Prefix
        property as for the disk: growing the count keeps earlier points."""
        rng = stream(seed, f"tree:interior:{r_max}")
        eligible = np.flatnonzero(self._levels[1:] - 1 < r_max) + 1
        if eligible.size == 0:
            return [self.basepoint() for _ in range(count)]
        u = rng.random((count, 2))
        picks = eligible[(u[:, 0] * eligible.size).astype(np.int64)]
        out = []
        for v, w in zip(picks, u[:, 1]):
            cap = min(1.0, r_max - (int(self._levels[v]) - 1))
            out.append(TreePoint(int(v), max(w * cap, 1e-9)))
        return out

    def _anchor_arrays(self, pts: list[TreePoint]) -> tuple[np.ndarray, np.ndarray]:
        """Per point: two (vertex, arclength) anchors; vertex points pad the
        second slot with an infinite arc so it never wins the minimum."""
        av = np.zeros((len(pts), 2), dtype=np.int64)
        ar = np.full((len(pts), 2), np.inf)
        for i, p in enumerate(pts):
            for j, (v, arc) in enumerate(self._anchors(p)):
                av[i, j] = v
                ar[i, j] = arc
        return av, ar

    def pairwise_distances(self, ps, qs) -> np.ndarray:
        """Distance matrix via anchor vertices, vectorized and row-chunked."""
        ps = [self._canon(p) for p in ps]
        qs = [self._canon(q) for q in qs]
        if not ps or not qs:
            return np.zeros((len(ps), len(qs)))
        av, ar = self._anchor_arrays(ps)
        bv, br = self._anchor_arrays(qs)
        n, m = len(ps), len(qs)
        out = np.empty((n, m))
        step = max(1, (1 << 18) // (4 * m))  # caps the anchor matrix size
        for lo in range(0, n, step):
            hi = min(n, lo + step)
            d = self._vertex_distance_matrix(av[lo:hi].ravel(), bv.ravel())
            d = d.reshape(hi - lo, 2, m, 2).astype(np.float64)
            tot = ar[lo:hi, :, None, None] + d + br[None, None, :, :]
            out[lo:hi] = tot.min(axis=(1, 3))
        # interior points sharing an edge: the path stays on the edge
        p_int = np.array([not p.is_vertex() for p in ps])
        q_int = np.array([not q.is_vertex() for q in qs])
        if p_int.any() and q_int.any():
            pe = np.array([p.edge for p in ps])
            qe = np.array([q.edge for q in qs])
            po = np.array([p.offset for p in ps])
            qo = np.array([q.offset for q in qs])
            mask = p_int[:, None] & q_int[None, :] & (pe[:, None] == qe[None, :])
            if mask.any():
                gaps = np.abs(po[:, None] - qo[None, :])
                out[mask] = gaps[mask]
        return out

    def _vertex_distance_matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        u = np.repeat(a, len(b)).reshape(len(a), len(b))
        v = np.tile(b, len(a)).reshape(len(a), len(b))
        d = np.zeros_like(u)
        lu, lv = self._levels[u].astype(np.int64), self._levels[v].astype(np.int64)
        parents = self._parents
        while True:
            step_u = lu > lv
            if step_u.any():
                u[step_u] = parents[u[step_u]]
                lu[step_u] -= 1
                d[step_u] += 1
            step_v = lv > lu
            if step_v.any():
                v[step_v] = parents[v[step_v]]
                lv[step_v] -= 1
                d[step_v] += 1
            both = (lu == lv) & (u != v)
            if not (step_u.any() or step_v.any() or both.any()):
                break
            if both.any():
                u[both] = parents[u[both]]
                v[both] = parents[v[both]]
                d[both] += 2
        return d

    def point_coords(self, p) -> tuple[int, float]:
        return (p.edge, p.offset)
