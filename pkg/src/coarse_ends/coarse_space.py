"""Finite metric spaces, coarse components and truncated Hausdorff distances.

A :class:`FiniteSpace` is a finite sample of a (usually infinite) metric space:
a Cayley ball, a sampled planar figure, or a point set with a custom metric.
Every point is within ``radius`` of the basepoint; "unbounded" is therefore
approximated from the truncation (see :class:`TruncationRule`).

Point sets are sorted ``int64`` index arrays into the space's point order.
The point order is canonical, so the minimal member of a component is used as
its id and labels do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

from .errors import ConsistencyError, DomainError, OrderError

EPS = 1e-9
_BLOCK = 1024


###############################################################################
#                               union-find                                    #
###############################################################################


class UnionFind:
    """Disjoint sets over ``range(n)``; the root of a set is always its minimal element."""

    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb
        return True

    def union_pairs(self, I, J):
        for a, b in zip(I, J):
            self.union(a, b)

    def roots(self, points):
        find = self.find
        return np.fromiter((find(p) for p in points), dtype=np.int64, count=len(points))


###############################################################################
#                               spaces                                        #
###############################################################################


def as_points(points, n=None):
    """Normalize a point set (index iterable or boolean mask) to a sorted unique index array."""
    arr = np.asarray(points)
    if arr.dtype == bool:
        return np.flatnonzero(arr)
    arr = np.unique(arr.astype(np.int64, copy=False))
    if n is not None and arr.size and (arr[0] < 0 or arr[-1] >= n):
        raise DomainError("point index outside the space")
    return arr


class FiniteSpace:
    """Base class.  Subclasses provide the metric oracle.

    Attributes: ``n`` points, ``basepoint`` index, truncation ``radius``,
    ``base_distance`` (distance of every point to the basepoint),
    ``unit_scale`` (graph edge length or sampling step), ``payload`` (a list
    of human-readable point descriptions) and ``metric_kind``.
    """

    metric_kind = "abstract"

    def __init__(self, base_distance, radius, basepoint=0, unit_scale=1.0, payload=None, name=""):
        self.base_distance = np.asarray(base_distance, dtype=float)
        self.n = len(self.base_distance)
        self.radius = float(radius)
        self.basepoint = int(basepoint)
        self.unit_scale = float(unit_scale)
        self.payload = payload
        self.name = name
        self._pair_cache = {}
        if self.n and self.base_distance.max() > self.radius + EPS:
            raise DomainError("a point lies outside the truncation radius")

    # subclasses implement these three
    def distances_from(self, i):
        """Distances from point ``i`` to every point."""
        raise NotImplementedError

    def _distance_to_set(self, C):
        raise NotImplementedError

    def _pairs(self, sigma):
        raise NotImplementedError

    def distances_from_many(self, sources):
        """Matrix of distances, one row per source point."""
        sources = np.asarray(sources, dtype=np.int64)
        if sources.size == 0:
            return np.zeros((0, self.n))
        return np.vstack([self.distances_from(int(i)) for i in sources])

    def dist(self, i, j):
        return float(self.distances_from(i)[j])

    def distance_to_set(self, C):
        """Vector of ``dist(p, C)`` over all points; ``inf`` when C is empty."""
        C = as_points(C, self.n)
        if C.size == 0:
            return np.full(self.n, np.inf)
        return self._distance_to_set(C)

    def nearest_in_set(self, C):
        """``(distance, nearest member)`` of C for every point; ties are broken deterministically."""
        C = as_points(C, self.n)
        if C.size == 0:
            return np.full(self.n, np.inf), np.full(self.n, -1, dtype=np.int64)
        D = self.distances_from_many(C)
        k = np.argmin(D, axis=0)
        return D[k, np.arange(self.n)], C[k]

    def proximity_pairs(self, sigma):
        """All pairs ``i < j`` with ``dist(i, j) <= sigma``, lexicographically sorted."""
        key = self._pair_key(sigma)
        hit = self._pair_cache.get(key)
        if hit is None:
            I, J = self._pairs(sigma)
            order = np.lexsort((J, I))
            hit = (np.ascontiguousarray(I[order]), np.ascontiguousarray(J[order]))
            self._pair_cache[key] = hit
        return hit

    def _pair_key(self, sigma):
        return float(sigma)

    def describe_point(self, i):
        return self.payload[i] if self.payload is not None else int(i)

    def validate(self, n_triples=1000, seed=0):
        """Spot-check the metric axioms on random triples; raises ``DomainError`` on failure."""
        if self.n < 2:
            return
        rng = np.random.default_rng(seed)
        k = min(self.n, 12)
        probe = rng.choice(self.n, size=k, replace=False)
        rows = {int(i): self.distances_from(int(i)) for i in probe}
        for i in probe:
            if abs(rows[int(i)][i]) > EPS:
                raise DomainError(f"metric is not zero on the diagonal at point {i}")
        for _ in range(n_triples):
            a, b = (int(x) for x in rng.choice(probe, size=2))
            c = int(rng.integers(self.n))
            dab, dac, dbc = rows[a][b], rows[a][c], rows[b][c]
            if abs(dab - rows[b][a]) > EPS:
                raise DomainError(f"metric is not symmetric on ({a}, {b})")
            if a != b and dab <= 0:
                raise DomainError(f"metric vanishes off the diagonal on ({a}, {b})")
            if dab > dac + dbc + EPS:
                raise DomainError(f"triangle inequality fails on ({a}, {b}, {c})")


class GraphSpace(FiniteSpace):
    """Vertices of a connected unit-edge graph with the path metric of the (truncated) graph."""

    metric_kind = "graph-bfs"

    def __init__(self, adjacency, radius, basepoint=0, payload=None, name="", base_distance=None):
        adjacency = sp.csr_matrix(adjacency, dtype=np.int8)
        adjacency.data[:] = 1
        self.adjacency = adjacency
        if base_distance is None:
            base_distance = csgraph.shortest_path(adjacency, unweighted=True, indices=[basepoint])[0]
        super().__init__(base_distance, radius, basepoint, 1.0, payload, name)

    @classmethod
    def from_ball(cls, ball, name=""):
        payload = [ball.model.format(g) for g in ball.elements]
        sp_ = cls(ball.adjacency, ball.radius, 0, payload, name, base_distance=ball.lengths)
        sp_.ball = ball
        return sp_

    def distances_from(self, i):
        return csgraph.shortest_path(self.adjacency, unweighted=True, indices=[int(i)])[0]

    def distances_from_many(self, sources):
        return csgraph.shortest_path(self.adjacency, unweighted=True, indices=np.asarray(sources))

    def _distance_to_set(self, C):
        n = self.n
        src = sp.csr_matrix((np.ones(C.size, dtype=np.int8), (np.zeros(C.size, dtype=np.int64), C)),
                            shape=(1, n + 1))
        aug = sp.vstack([sp.hstack([self.adjacency, sp.csr_matrix((n, 1), dtype=np.int8)]), src]).tocsr()
        d = csgraph.shortest_path(aug, unweighted=True, directed=True, indices=[n])[0, :n]
        return d - 1

    def nearest_in_set(self, C):
        C = as_points(C, self.n)
        if C.size == 0:
            return np.full(self.n, np.inf), np.full(self.n, -1, dtype=np.int64)
        d, _, src = csgraph.dijkstra(self.adjacency, indices=C, min_only=True, return_predecessors=True)
        return d, np.where(np.isfinite(d), src, -1).astype(np.int64)

    def _pair_key(self, sigma):
        return int(math.floor(sigma + EPS))

    def _pairs(self, sigma):
        k = self._pair_key(sigma)
        if k < 1:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        step = (self.adjacency + sp.identity(self.n, dtype=np.int8, format="csr")).astype(bool).tocsr()
        reach = step
        for _ in range(k - 1):
            reach = (reach @ step).astype(bool).tocsr()
        upper = sp.triu(reach, k=1).tocoo()
        return upper.row.astype(np.int64), upper.col.astype(np.int64)


class CoordinateSpace(FiniteSpace):
    """Sampled points of the plane (or R^d) with the Euclidean or Manhattan metric."""

    def __init__(self, coords, radius, basepoint=None, metric="euclidean", unit_scale=1.0, name=""):
        if metric not in ("euclidean", "manhattan"):
            raise DomainError(f"unknown coordinate metric {metric!r}")
        self.metric_kind = metric
        self.p = 2 if metric == "euclidean" else 1
        coords = np.unique(np.asarray(coords, dtype=float).round(9), axis=0)
        base = np.zeros(coords.shape[1]) if basepoint is None else np.asarray(basepoint, dtype=float)
        bd = self._norm(coords - base)
        keep = bd <= radius + EPS
        coords, bd = coords[keep], bd[keep]
        order = np.lexsort(tuple(coords[:, k] for k in reversed(range(coords.shape[1]))) + (bd.round(9),))
        self.coords, bd = coords[order], bd[order]
        hits = np.flatnonzero(bd <= EPS)
        if hits.size == 0:
            raise DomainError("the basepoint is not one of the sampled points")
        self._tree = cKDTree(self.coords)
        payload = [tuple(float(x) for x in c) for c in self.coords]
        super().__init__(bd, radius, int(hits[0]), unit_scale, payload, name)

    def _norm(self, v):
        return np.abs(v).sum(axis=-1) if self.p == 1 else np.sqrt((v * v).sum(axis=-1))

    def distances_from(self, i):
        return self._norm(self.coords - self.coords[int(i)])

    def _distance_to_set(self, C):
        d, _ = cKDTree(self.coords[C]).query(self.coords, p=self.p)
        return d

    def nearest_in_set(self, C):
        C = as_points(C, self.n)
        if C.size == 0:
            return np.full(self.n, np.inf), np.full(self.n, -1, dtype=np.int64)
        d, k = cKDTree(self.coords[C]).query(self.coords, p=self.p)
        return d, C[k]

    def _pairs(self, sigma):
        pairs = self._tree.query_pairs(sigma + EPS, p=self.p, output_type="ndarray").astype(np.int64)
        if pairs.size == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return pairs.min(axis=1), pairs.max(axis=1)

    def find(self, point):
        d, i = self._tree.query(np.asarray(point, dtype=float), p=self.p)
        if d > EPS:
            raise DomainError(f"{point} is not a sampled point")
        return int(i)


class FormulaSpace(FiniteSpace):
    """Points given by payload rows with a vectorized metric ``formula(P, Q)``.

    ``formula`` receives two broadcastable arrays of payload rows (trailing
    axis = coordinates) and returns the pairwise distances.
    """

    metric_kind = "custom-formula"

    def __init__(self, rows, formula, radius, basepoint=0, unit_scale=1.0, name=""):
        self.rows = np.asarray(rows, dtype=float)
        self.formula = formula
        bd = formula(self.rows, self.rows[basepoint][None, :])
        super().__init__(bd, radius, basepoint, unit_scale, [tuple(float(x) for x in r) for r in self.rows], name)

    def distances_from(self, i):
        return self.formula(self.rows, self.rows[int(i)][None, :])

    def _distance_to_set(self, C):
        out = np.empty(self.n)
        for s in range(0, self.n, _BLOCK):
            block = self.formula(self.rows[s:s + _BLOCK, None, :], self.rows[None, C, :])
            out[s:s + _BLOCK] = block.min(axis=1)
        return out

    def _pairs(self, sigma):
        I, J = [], []
        for s in range(0, self.n, _BLOCK):
            block = self.formula(self.rows[s:s + _BLOCK, None, :], self.rows[None, :, :])
            ii, jj = np.nonzero(block <= sigma + EPS)
            ii = ii + s
            keep = ii < jj
            I.append(ii[keep])
            J.append(jj[keep])
        return np.concatenate(I).astype(np.int64), np.concatenate(J).astype(np.int64)


def product_row_metric(P, Q):
    """Distance on R x A: ``|m - n|`` within a column, ``|a - b| + |m| + |n|`` across columns."""
    a, m = P[..., 0], P[..., 1]
    b, n = Q[..., 0], Q[..., 1]
    same = np.abs(a - b) <= EPS
    return np.where(same, np.abs(m - n), np.abs(a - b) + np.abs(m) + np.abs(n))


class ProductRowSpace(FormulaSpace):
    """Sample of ``X = R x A`` with ``A = {0} ∪ {n >= m}`` and the column/row metric above.

    Columns are sampled at ``step``; the basepoint is ``(0, 0)``.
    """

    def __init__(self, m, step, radius, name=""):
        if m < 2:
            raise DomainError("product-row needs m > 1")
        self.m, self.step = int(m), float(step)
        k = int(math.floor(radius / step + EPS))
        alphas = np.arange(-k, k + 1) * step
        rows = [(a, 0.0) for a in alphas]
        for level in range(self.m, int(math.floor(radius)) + 1):
            for a in alphas:
                if abs(a) + level <= radius + EPS:
                    rows.append((a, float(level)))
        rows = np.asarray(rows)
        bd = product_row_metric(rows, np.zeros((1, 2)))
        order = np.lexsort((rows[:, 1], rows[:, 0], bd.round(9)))
        super().__init__(rows[order], product_row_metric, radius, 0, step, name)

    def _pairs(self, sigma):
        r = sigma + EPS
        I, J = [], []
        # same column: |m - n| <= sigma
        cols = {}
        for i, (a, lvl) in enumerate(self.rows):
            cols.setdefault(round(a / self.step), []).append(i)
        for members in cols.values():
            members = np.asarray(members)
            lv = self.rows[members, 1]
            ii, jj = np.nonzero(np.abs(lv[:, None] - lv[None, :]) <= r)
            keep = members[ii] < members[jj]
            I.append(members[ii][keep])
            J.append(members[jj][keep])
        # across columns only low points can be close: |a - b| + |m| + |n| <= sigma
        low = np.flatnonzero(self.rows[:, 1] <= r)
        if low.size:
            P = self.rows[low]
            d = product_row_metric(P[:, None, :], P[None, :, :])
            diff = np.abs(P[:, None, 0] - P[None, :, 0]) > EPS
            ii, jj = np.nonzero((d <= r) & diff)
            keep = low[ii] < low[jj]
            I.append(low[ii][keep])
            J.append(low[jj][keep])
        return np.concatenate(I).astype(np.int64), np.concatenate(J).astype(np.int64)


class MatrixSpace(FiniteSpace):
    """Explicit finite metric given by a full distance table."""

    metric_kind = "custom-formula"

    def __init__(self, distances, radius=None, basepoint=0, unit_scale=1.0, payload=None, name=""):
        self.D = np.asarray(distances, dtype=float)
        if self.D.ndim != 2 or self.D.shape[0] != self.D.shape[1]:
            raise DomainError("distance table must be square")
        bd = self.D[basepoint]
        super().__init__(bd, bd.max() if radius is None else radius, basepoint, unit_scale, payload, name)

    def distances_from(self, i):
        return self.D[int(i)]

    def _distance_to_set(self, C):
        return self.D[:, C].min(axis=1)

    def _pairs(self, sigma):
        ii, jj = np.nonzero(np.triu(self.D <= sigma + EPS, k=1))
        return ii.astype(np.int64), jj.astype(np.int64)


###############################################################################
#                               scales and partitions                         #
###############################################################################


@dataclass(frozen=True)
class ScalePair:
    """A point ``(sigma, mu)`` of the directed set of scales."""

    sigma: float
    mu: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if self.mu < 0:
            raise DomainError("mu must be non-negative")

    def precedes(self, other):
        """``self ⪯ other``: coarser components (larger sigma) of a larger alive set (smaller mu)."""
        return self.sigma <= other.sigma + EPS and self.mu >= other.mu - EPS


@dataclass(frozen=True)
class TruncationRule:
    """How a truncated computation decides unboundedness and trust.

    A component is unbounded when it reaches the outer shell
    (``base distance >= R - margin``, margin defaulting to sigma) and also
    reaches the core (``base distance <= R - depth``, depth defaulting to
    ``depth_frac * R``).  The second condition discards small pieces that
    merely sit on the shell.  A cell ``(sigma, mu)`` is trusted when
    ``mu <= mu_frac * R`` and ``sigma <= max(sigma_frac * R, unit_scale)``.
    """

    margin: float | None = None
    depth: float | None = None
    depth_frac: float = 0.25
    mu_frac: float = 0.5
    sigma_frac: float = 0.1

    def shell(self, space, sigma):
        return space.radius - (sigma if self.margin is None else self.margin)

    def core(self, space):
        return space.radius - (self.depth_frac * space.radius if self.depth is None else self.depth)

    def sigma_trusted(self, space, sigma):
        return sigma <= max(self.sigma_frac * space.radius, space.unit_scale) + EPS

    def mu_trusted(self, space, mu):
        return mu <= self.mu_frac * space.radius + EPS

    def trusted(self, space, sigma, mu):
        return self.sigma_trusted(space, sigma) and self.mu_trusted(space, mu)


DEFAULT_RULE = TruncationRule()


@dataclass(frozen=True, eq=False)
class ComponentPartition:
    """sigma-components of an alive set, with unbounded flags.

    ``labels[p]`` is the id (minimal member) of the component of ``p``, or
    ``-1`` when ``p`` is not alive.
    """

    scale: ScalePair
    alive: np.ndarray
    labels: np.ndarray
    ids: np.ndarray
    unbounded: frozenset = field(default_factory=frozenset)
    trusted: bool = True

    @property
    def alive_points(self):
        return np.flatnonzero(self.alive)

    @property
    def component_count(self):
        return int(self.ids.size)

    @property
    def unbounded_ids(self):
        return sorted(self.unbounded)

    @property
    def unbounded_count(self):
        return len(self.unbounded)

    def members(self, cid):
        return np.flatnonzero(self.labels == cid)

    def component_of(self, p):
        return int(self.labels[p])


def _partition_from_roots(space, scale, alive, roots_of_alive, rule):
    labels = np.full(space.n, -1, dtype=np.int64)
    alive_idx = np.flatnonzero(alive)
    labels[alive_idx] = roots_of_alive
    ids = np.unique(roots_of_alive)
    unbounded = frozenset()
    if ids.size:
        bd = space.base_distance[alive_idx]
        hi = np.full(space.n, -np.inf)
        lo = np.full(space.n, np.inf)
        np.maximum.at(hi, roots_of_alive, bd)
        np.minimum.at(lo, roots_of_alive, bd)
        shell = rule.shell(space, scale.sigma) - EPS
        core = rule.core(space) + EPS
        flags = (hi[ids] >= shell) & (lo[ids] <= core)
        unbounded = frozenset(int(c) for c in ids[flags])
    trusted = rule.trusted(space, scale.sigma, scale.mu)
    return ComponentPartition(scale, alive, labels, ids, unbounded, trusted)


###############################################################################
#                               operations                                    #
###############################################################################


def distance_to_subset(space, p, C):
    """``min_{c in C} dist(p, c)``."""
    C = as_points(C, space.n)
    if C.size == 0:
        raise DomainError("distance to an empty set")
    return float(space.distance_to_set(C)[p])


def alive_mask(dC, mu):
    """Points outside the open mu-neighborhood: ``dist(p, C) >= mu``."""
    return dC >= mu - EPS


def complement_of_neighborhood(space, C, mu):
    """Points ``p`` with ``dist(p, C) >= mu`` (the open mu-neighborhood of C removed)."""
    if mu < 0:
        raise DomainError("mu must be non-negative")
    dC = space.distance_to_set(C)
    return np.flatnonzero(alive_mask(dC, mu))


def sigma_components(space, alive, sigma, mu=0.0, rule=DEFAULT_RULE):
    """sigma-coarse components of the alive set by union-find over the proximity pairs."""
    scale = ScalePair(sigma, mu)
    mask = np.zeros(space.n, dtype=bool)
    mask[as_points(alive, space.n)] = True
    I, J = space.proximity_pairs(sigma)
    keep = mask[I] & mask[J]
    uf = UnionFind(space.n)
    uf.union_pairs(I[keep].tolist(), J[keep].tolist())
    return _partition_from_roots(space, scale, mask, uf.roots(np.flatnonzero(mask).tolist()), rule)


def sweep_partitions(space, dC, sigma, mus, rule=DEFAULT_RULE):
    """Partitions at ``(sigma, mu)`` for every mu, sharing one union-find.

    Levels are visited from the largest mu down; lowering mu only adds alive
    points, so each pair is unioned once, when its later endpoint appears.
    Returns a dict ``mu -> ComponentPartition``.
    """
    I, J = space.proximity_pairs(sigma)
    act = np.minimum(dC[I], dC[J])
    order = np.argsort(-act, kind="stable")
    I, J, act = I[order].tolist(), J[order].tolist(), act[order]
    uf = UnionFind(space.n)
    out = {}
    k = 0
    for mu in sorted(set(mus), reverse=True):
        while k < len(I) and act[k] >= mu - EPS:
            uf.union(I[k], J[k])
            k += 1
        mask = alive_mask(dC, mu)
        roots = uf.roots(np.flatnonzero(mask).tolist())
        out[mu] = _partition_from_roots(space, ScalePair(sigma, mu), mask, roots, rule)
    return out


def transition_map(src, dst):
    """The map sending each component of ``src`` to the component of ``dst`` containing it.

    Requires ``src.scale ⪯ dst.scale`` (sigma grows, mu shrinks).
    """
    if not src.scale.precedes(dst.scale):
        raise OrderError(f"{src.scale} does not precede {dst.scale}")
    out = {}
    for cid in src.ids.tolist():
        t = int(dst.labels[cid])
        if t < 0:
            raise ConsistencyError(f"component {cid} at {src.scale} is not alive at {dst.scale}")
        out[cid] = t
    return out


def is_bijection_on_unbounded(src, dst, rho=None):
    """Whether the transition map restricts to a bijection between unbounded components."""
    rho = transition_map(src, dst) if rho is None else rho
    image = [rho[c] for c in src.unbounded_ids]
    return len(set(image)) == len(image) and set(image) == set(dst.unbounded)


def truncated_hausdorff(space, A, B, window=None, dA=None, dB=None):
    """Hausdorff distance between two point sets of the truncated space.

    With ``window`` set, only points within that distance of the basepoint
    contribute to the two directed suprema; nearest points are still searched
    in the whole of the other set.  This keeps truncation of the far ends of
    the sets from inflating the value.  Returns ``inf`` when no point
    contributes.
    """
    A, B = as_points(A, space.n), as_points(B, space.n)
    if A.size == 0 or B.size == 0:
        raise DomainError("Hausdorff distance of an empty set")
    dA = space.distance_to_set(A) if dA is None else dA
    dB = space.distance_to_set(B) if dB is None else dB
    if window is not None:
        A = A[space.base_distance[A] <= window + EPS]
        B = B[space.base_distance[B] <= window + EPS]
        if A.size == 0 and B.size == 0:
            return math.inf
    h1 = float(dB[A].max()) if A.size else 0.0
    h2 = float(dA[B].max()) if B.size else 0.0
    return max(h1, h2)


def thicken(space, C, r):
    """Closed r-neighborhood ``{p : dist(p, C) <= r}`` of a point set (empty stays empty)."""
    C = as_points(C, space.n)
    if C.size == 0:
        return C
    return np.flatnonzero(space.distance_to_set(C) <= r + EPS)
