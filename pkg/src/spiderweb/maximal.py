"""Averaging and maximal operators over closed graph balls.

A_r f(x) is the mean of f over the closed ball of radius r at x (counting
measure). M_inf takes the sup over integer radii r >= 1, realized here as a
max over 1 <= r <= r_max. On unit-separated graphs every radius in (0, 1]
sees only the center, so the small-radii operator M_0 is the identity.

Truncation matters: a ball crosses the frontier of a depth-D graph exactly
when level(x) + r > D. "full" mode evaluates those averages anyway and flags
them; "interior" mode (the asserting mode) caps r per vertex so only
truncation-free balls enter the sup.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import SpiderWeb, UNREACHED, _bfs, _gather_csr, as_web

ORDER_MATRIX_LIMIT = 3000  # below this, keep a full BFS-order matrix per graph
RELATIVE_EPS = 2.0 ** -20  # lambda is swept at distinct values minus this, relatively


def _bfs_rings(g: SpiderWeb, source: int, r_max: int,
               f: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Cumulative ball sizes (and f-sums) at radii 0..r_max from one source."""
    indptr, indices = g.indptr, g.indices
    n = g.n_vertices
    dist = np.full(n, UNREACHED, dtype=np.int32)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    sizes = np.zeros(r_max + 1, dtype=np.int64)
    sums = np.zeros(r_max + 1, dtype=np.float64) if f is not None else None
    sizes[0] = 1
    if f is not None:
        sums[0] = f[source]
    for r in range(1, r_max + 1):
        nbrs = _gather_csr(indptr, indices, frontier)
        nbrs = nbrs[dist[nbrs] == UNREACHED]
        if nbrs.size == 0:
            sizes[r:] = sizes[r - 1]
            if sums is not None:
                sums[r:] = sums[r - 1]
            break
        frontier = np.unique(nbrs).astype(np.int64)
        dist[frontier] = r
        sizes[r] = sizes[r - 1] + len(frontier)
        if sums is not None:
            sums[r] = sums[r - 1] + float(f[frontier].sum())
    return sizes, sums


class MaximalEngine:
    """Shared ball tables for one graph and radius cap.

    Small graphs keep a per-source BFS-order matrix so evaluating many
    functions costs one cumsum each; large graphs fall back to per-source
    sweeps, with a fast path for small-support functions (the f-sums then
    need one BFS per support vertex instead of one per graph vertex).
    """

    def __init__(self, g: SpiderWeb, r_max: int):
        if r_max < 1:
            raise ValueError("r_max must be at least 1")
        self.g = g = as_web(g)
        self.r_max = int(r_max)
        self.n = g.n_vertices
        self._order: np.ndarray | None = None
        self._boundary: np.ndarray | None = None
        self._sizes: np.ndarray | None = None

    # --- tables ----------------------------------------------------------------
    def _build_order_matrix(self) -> None:
        n, r_max = self.n, self.r_max
        order = np.empty((n, n), dtype=np.int32)
        boundary = np.empty((n, r_max + 1), dtype=np.int64)
        for x in range(n):
            dist = _bfs(self.g.indptr, self.g.indices, n, x)
            order[x] = np.argsort(dist, kind="stable")
            counts = np.bincount(np.minimum(dist, r_max + 1),
                                 minlength=r_max + 2)[:r_max + 1]
            boundary[x] = np.cumsum(counts)
        self._order = order
        self._boundary = boundary
        self._sizes = boundary

    def ball_sizes(self) -> np.ndarray:
        """|B_r(x)| for all x, r <= r_max, shape (n, r_max + 1)."""
        if self._sizes is None:
            if self.n <= ORDER_MATRIX_LIMIT:
                self._build_order_matrix()
            else:
                sizes = np.empty((self.n, self.r_max + 1), dtype=np.int64)
                for x in range(self.n):
                    sizes[x], _ = _bfs_rings(self.g, x, self.r_max)
                self._sizes = sizes
        return self._sizes

    def ball_sums(self, f: np.ndarray) -> np.ndarray:
        """Sum of f over B_r(x) for all x, r <= r_max."""
        f = self._check_function(f)
        n, r_max = self.n, self.r_max
        if self.n <= ORDER_MATRIX_LIMIT:
            self.ball_sizes()
            fo = np.cumsum(f[self._order], axis=1)
            idx = np.clip(self._boundary - 1, 0, n - 1)
            return np.take_along_axis(fo, idx, axis=1)
        support = np.flatnonzero(f)
        if len(support) <= max(8, n // 64):
            rings = np.zeros((n, r_max + 2), dtype=np.float64)
            for s in support:
                dist = _bfs(self.g.indptr, self.g.indices, n, int(s), r_max)
                hit = dist != UNREACHED
                rings[hit, dist[hit]] += f[s]
            return np.cumsum(rings[:, :r_max + 1], axis=1)
        sums = np.empty((n, r_max + 1), dtype=np.float64)
        for x in range(n):
            _, row = _bfs_rings(self.g, x, r_max, f)
            sums[x] = row
        return sums

    def _check_function(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        if f.shape != (self.n,):
            raise ValueError(f"function must have one value per vertex ({self.n})")
        if (f < 0).any() or not np.isfinite(f).all():
            raise ValueError("function values must be finite and nonnegative")
        return f

    # --- operators ---------------------------------------------------------------
    def average(self, f: np.ndarray, x: int, r: int) -> "BallAverage":
        """A_r f(x) with its truncation flag."""
        f = self._check_function(f)
        if not 1 <= r <= self.r_max:
            raise ValueError(f"radius must lie in [1, {self.r_max}]")
        sizes, sums = _bfs_rings(self.g, x, r, f)
        truncated = int(self.g.levels[x]) + r > self.g.depth
        return BallAverage(value=float(sums[r] / sizes[r]), x=int(x), r=int(r),
                           truncated=truncated)

    def infty(self, f: np.ndarray, mode: str = "full") -> np.ndarray:
        """M f = max over admissible radii r >= 1 of A_r f.

        mode="full" admits every r <= r_max; mode="interior" admits only
        truncation-free radii (r <= depth - level(x)), yielding 0 where no
        radius qualifies.
        """
        f = self._check_function(f)
        sizes = self.ball_sizes()
        sums = self.ball_sums(f)
        averages = sums[:, 1:] / sizes[:, 1:]
        if mode == "full":
            return averages.max(axis=1)
        if mode != "interior":
            raise ValueError("mode must be 'full' or 'interior'")
        caps = (self.g.depth - self.g.levels).astype(np.int64)
        radii = np.arange(1, self.r_max + 1)
        masked = np.where(radii[None, :] <= caps[:, None], averages, -1.0)
        return np.maximum(masked.max(axis=1), 0.0)

    def truncation_flags(self) -> np.ndarray:
        """True where some admissible radius crosses the truncation frontier."""
        return (self.g.levels.astype(np.int64) + self.r_max) > self.g.depth


@dataclass(frozen=True)
class BallAverage:
    value: float
    x: int
    r: int
    truncated: bool


def ball_average(g: SpiderWeb, f, x: int, r: int) -> BallAverage:
    return MaximalEngine(g, r).average(np.asarray(f, dtype=np.float64), x, r)


def maximal_zero(g: SpiderWeb, f) -> np.ndarray:
    """Small-radii maximal operator; the identity on unit-separated graphs."""
    g = as_web(g)
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (g.n_vertices,):
        raise ValueError("function must have one value per vertex")
    return f.copy()


def maximal_infty(g: SpiderWeb, f, r_max: int, mode: str = "full") -> np.ndarray:
    return MaximalEngine(g, r_max).infty(np.asarray(f, dtype=np.float64), mode)


def maximal(g: SpiderWeb, f, r_max: int, mode: str = "full") -> np.ndarray:
    """Full maximal operator: pointwise max of M_0 f and M_inf f."""
    return np.maximum(maximal_zero(g, f), maximal_infty(g, f, r_max, mode))


# --- weak-type sweep -------------------------------------------------------------

@dataclass
class WeakTypeReport:
    """Empirical weak-(tau, tau) constant of M_inf for one function.

    The sweep evaluates lambda^tau * #{M > lambda} at each distinct positive
    value of M shifted down by a relative 2^-20, so `constant` sits within a
    relative tau * 2^-20 of the true sup over all lambda."""
    tau: float
    mode: str
    r_max: int
    constant: float
    worst_lambda: float
    norm_tau: float
    positive_values: int
    function_label: str = ""


def weak_type_constant(g: SpiderWeb, f, tau: float, r_max: int,
                       mode: str = "interior", label: str = "",
                       engine: MaximalEngine | None = None) -> WeakTypeReport:
    """Sweep lambda over the distinct positive values of M_inf f (each reduced
    by a relative 2^-20) and return the exact sup of
    lambda^tau * |{M_inf f > lambda}| / ||f||_tau^tau."""
    f = np.asarray(f, dtype=np.float64)
    if not 0 < tau <= 2:
        raise ValueError("tau must lie in (0, 2]")
    if not f.any():
        raise ValueError("weak-type sweep needs a nonzero function")
    if engine is None:
        engine = MaximalEngine(g, r_max)
    m = engine.infty(f, mode=mode)
    # compensated summation keeps the norm exact enough for the sweep
    norm = math.fsum(abs(v) ** tau for v in f[f != 0].tolist())
    values = np.unique(m[m > 0])
    if len(values) == 0:
        return WeakTypeReport(tau=tau, mode=mode, r_max=engine.r_max, constant=0.0,
                              worst_lambda=0.0, norm_tau=norm, positive_values=0,
                              function_label=label)
    m_sorted = np.sort(m)
    lambdas = values * (1.0 - RELATIVE_EPS)
    counts = len(m) - np.searchsorted(m_sorted, lambdas, side="right")
    ratios = lambdas ** tau * counts / norm
    i = int(np.argmax(ratios))
    return WeakTypeReport(tau=tau, mode=mode, r_max=engine.r_max,
                          constant=float(ratios[i]), worst_lambda=float(lambdas[i]),
                          norm_tau=norm, positive_values=int(len(values)),
                          function_label=label)


# --- pair counting ----------------------------------------------------------------

@dataclass
class PairCountReport:
    """U_r = #{(x, y) in E x F : d(x, y) <= r} with growth-normalized ratios.

    ratio = a^-r * U_r / ((sqrt(b)/a)^r * sqrt(|E| |F|)), which reduces to
    U_r / (b^(r/2) sqrt(|E| |F|)); shell p holds G_p = U_p - U_{p-1} and its
    normalization C_p = G_p / (b^(p/2) sqrt(|E||F|)).
    """
    r: int
    a: float
    b: float
    sizes: tuple[int, int]
    u_counts: np.ndarray  # U_p for p = 0..r
    ratio: float
    shell_counts: np.ndarray  # G_p for p = 0..r
    shell_ratios: np.ndarray

    @property
    def u_r(self) -> int:
        return int(self.u_counts[-1])


def pair_count(g: SpiderWeb, E, F, r: int, a: float = 2.0,
               b: float = 2.0) -> PairCountReport:
    """Count near pairs between the vertex sets E and F by truncated BFS from
    the smaller side. a and b are the graph's growth parameters; only b enters
    the normalization, a is carried for reporting."""
    g = as_web(g)
    E = np.unique(np.asarray(E, dtype=np.int64))
    F = np.unique(np.asarray(F, dtype=np.int64))
    if E.size == 0 or F.size == 0:
        raise ValueError("E and F must be nonempty")
    if not 1.0 <= a <= b:
        raise ValueError("growth parameters need 1 <= a <= b")
    if r < 0:
        raise ValueError("radius must be nonnegative")
    for side in (E, F):
        if side.min() < 0 or side.max() >= g.n_vertices:
            raise ValueError("vertex set out of range")
    if len(E) <= len(F):
        src, dst = E, F
    else:
        src, dst = F, E
    in_dst = np.zeros(g.n_vertices, dtype=bool)
    in_dst[dst] = True
    u = np.zeros(r + 1, dtype=np.int64)
    for s in src:
        dist = _bfs(g.indptr, g.indices, g.n_vertices, int(s), r)
        hit = in_dst & (dist != UNREACHED)
        u += np.cumsum(np.bincount(dist[hit], minlength=r + 1)[:r + 1])
    size_term = math.sqrt(len(E) * len(F))
    ratio = float(u[-1]) / (b ** (r / 2.0) * size_term) if size_term else 0.0
    shells = np.diff(u, prepend=0)
    p = np.arange(r + 1)
    shell_ratios = shells / (np.power(b, p / 2.0) * size_term) if size_term \
        else np.zeros(r + 1)
    return PairCountReport(r=r, a=a, b=b, sizes=(len(E), len(F)), u_counts=u,
                           ratio=ratio, shell_counts=shells,
                           shell_ratios=shell_ratios)


@dataclass
class SliceBoundReport:
    """Size of one sphere-slice against the C * b^((p + k - j)/2) envelope."""
    x: int
    p: int
    k: int
    b: float
    count: int
    bound: float
    ratio: float


def slice_count_bound(g: SpiderWeb, x: int, p: int, k: int, b: float,
                      c: float = 1.0) -> SliceBoundReport:
    from .graphs import sphere_slice
    g = as_web(g)
    j = int(g.levels[x])
    count = len(sphere_slice(g, x, p, k))
    bound = c * b ** ((p + k - j) / 2.0)
    return SliceBoundReport(x=x, p=p, k=k, b=b, count=count, bound=bound,
                            ratio=count / bound if bound > 0 else float("inf"))


# --- level-set decomposition --------------------------------------------------------

@dataclass
class LevelsetDecomposition:
    """Cover of the graph by {f <= 1/2}, dyadic bands, and the top tail.

    Band n holds 2^(n-1) < f <= 2^n for n = 0..N where N is the largest
    integer with 2^N <= a^r; the tail is {f > a^r / 2}. The pointwise bound
    f <= (1/2) 1_Omega + sum 2^n 1_band + f 1_tail is checked exactly.
    """
    a: float
    r: int
    n_max: int
    omega: np.ndarray
    bands: list[tuple[int, np.ndarray]]
    tail: np.ndarray
    dominates: bool
    max_gap: float


def levelset_decomposition(g: SpiderWeb, f, r: int, a: float) -> LevelsetDecomposition:
    g = as_web(g)
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (g.n_vertices,):
        raise ValueError("function must have one value per vertex")
    if a < 1 or r < 0:
        raise ValueError("need a >= 1 and r >= 0")
    top = a ** r
    n_max = int(math.floor(math.log2(top) + 1e-12)) if top >= 1 else 0
    omega = f <= 0.5
    bands = [(n, (f > 2.0 ** (n - 1)) & (f <= 2.0 ** n)) for n in range(n_max + 1)]
    tail = f > top / 2.0
    envelope = 0.5 * omega.astype(np.float64)
    for n, mask in bands:
        envelope += 2.0 ** n * mask
    envelope += f * tail
    gap = f - envelope
    return LevelsetDecomposition(a=a, r=r, n_max=n_max, omega=omega, bands=bands,
                                 tail=tail, dominates=bool((gap <= 1e-12).all()),
                                 max_gap=float(gap.max()))


def vn_membership(g: SpiderWeb, f, r: int, tau: float, a: float,
                  engine: MaximalEngine | None = None) -> list[tuple[int, np.ndarray]]:
    """Optional diagnostic: per band n, the set where the averaged band
    indicator clears its dyadic threshold.

    Membership: 2^n * A_r(1_band)(x) >= 2^(n*beta - 1) * alpha, with
    beta = (2 - tau)/4 and alpha = a^(-beta*r) * (1 - 2^-beta).
    """
    if not 0 < tau < 2:
        raise ValueError("tau must lie in (0, 2) for the band diagnostic")
    g = as_web(g)
    beta = (2.0 - tau) / 4.0
    alpha = a ** (-beta * r) * (1.0 - 2.0 ** -beta)
    dec = levelset_decomposition(g, f, r, a)
    if engine is None:
        engine = MaximalEngine(g, max(r, 1))
    out = []
    for n, mask in dec.bands:
        if not mask.any():
            out.append((n, np.zeros(g.n_vertices, dtype=bool)))
            continue
        sizes = engine.ball_sizes()
        sums = engine.ball_sums(mask.astype(np.float64))
        avg = sums[:, r] / sizes[:, r]
        out.append((n, 2.0 ** n * avg >= 2.0 ** (n * beta - 1) * alpha))
    return out


# --- function families ----------------------------------------------------------------

def point_mass(g: SpiderWeb, v: int) -> np.ndarray:
    g = as_web(g)
    f = np.zeros(g.n_vertices, dtype=np.float64)
    f[v] = 1.0
    return f


def level_point_masses(g: SpiderWeb) -> list[tuple[str, np.ndarray]]:
    """One point mass per level, at the level's first vertex."""
    out = []
    for lvl in range(g.depth + 1):
        v = int(g.vertices_at_level(lvl)[0])
        out.append((f"point:{v}", point_mass(g, v)))
    return out


def ball_indicator(g: SpiderWeb, center: int, radius: int) -> np.ndarray:
    from .graphs import ball
    g = as_web(g)
    f = np.zeros(g.n_vertices, dtype=np.float64)
    f[ball(g, center, radius)] = 1.0
    return f


def geometric_profile(g: SpiderWeb, a: float, alpha: float) -> np.ndarray:
    """Radial profile a^(-alpha * level)."""
    g = as_web(g)
    return np.power(float(a), -alpha * g.levels.astype(np.float64))


def function_family(g: SpiderWeb, name: str, a: float = 2.0,
                    seed: int = 0) -> list[tuple[str, np.ndarray]]:
    """Named sweep families used by reports and the command line."""
    if name == "point_masses":
        return level_point_masses(g)
    if name == "ball_indicators":
        out = []
        for lvl in range(0, g.depth + 1, 2):
            v = int(g.vertices_at_level(lvl)[0])
            out.append((f"ball:{v}:2", ball_indicator(g, v, 2)))
        return out
    if name == "geometric":
        return [(f"geom:{alpha}", geometric_profile(g, a, alpha))
                for alpha in (0.5, 1.0, 2.0)]
    raise ValueError(f"unknown function family {name!r}")
