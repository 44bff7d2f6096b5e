"""Coset families, quasi-isometries of pairs, commensurator probes and coarse stabilizers.

Everything here is evaluated inside Cayley balls.  Hausdorff distances are
windowed (see :func:`coarse_ends.coarse_space.truncated_hausdorff`) so that
far ends of the sets, which the truncation cuts off, do not inflate values.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .coarse_space import EPS, GraphSpace, UnionFind, as_points, truncated_hausdorff
from .errors import CapacityError, ConfigurationError, DomainError
from .group_models import (
    DEFAULT_CAP,
    ConjugateSubgroup,
    IntersectionSubgroup,
    SubsetSpec,
    build_cayley_ball,
    trace_subset,
)

log = logging.getLogger(__name__)

_BALLS = {}


def cached_ball(model, R, cap=DEFAULT_CAP):
    """Balls are immutable, so one per (model, radius) is shared."""
    key = (type(model).__name__, json.dumps(model.describe(), sort_keys=True), int(R))
    ball = _BALLS.get(key)
    if ball is not None and len(ball) > cap:
        raise CapacityError(cap)
    if ball is None:
        ball = _BALLS[key] = build_cayley_ball(model, R, cap)
    return ball


def ball_space(ball):
    space = getattr(ball, "_space", None)
    if space is None:
        space = GraphSpace.from_ball(ball)
        object.__setattr__(ball, "_space", space)
    return space


def trace_predicate(ball, contains):
    """Ball points satisfying a membership predicate."""
    return np.asarray([i for i, g in enumerate(ball.elements) if contains(g)], dtype=np.int64)


###############################################################################
#                               coset families                                #
###############################################################################


@dataclass(frozen=True)
class Coset:
    family: int  # index into the subgroup list
    rep: object  # minimal element of the coset in the ball
    rep_index: int
    points: np.ndarray


@dataclass(eq=False)
class PairFamily:
    ball: object
    specs: list
    cosets: list

    def of_family(self, k):
        return [c for c in self.cosets if c.family == k]

    def trusted(self, window=None):
        """Cosets whose representative lies in the trust window (half the radius by default)."""
        w = self.ball.radius / 2 if window is None else window
        return [i for i, c in enumerate(self.cosets) if self.ball.lengths[c.rep_index] <= w + EPS]


def enumerate_cosets(ball, specs):
    """All left cosets gP meeting the ball, for each subgroup spec.

    Cosets are discovered in ball order, so each representative is the
    minimal element of its coset; membership is decided by ``P.contains(g^-1 h)``.
    """
    model = ball.model
    cosets = []
    for k, spec in enumerate(specs):
        P = spec.subgroup(model)
        unassigned = list(range(len(ball)))
        while unassigned:
            r = unassigned[0]
            g = ball.elements[r]
            ginv = model.invert(g)
            inside, rest = [], []
            for i in unassigned:
                (inside if P.contains(model.multiply(ginv, ball.elements[i])) else rest).append(i)
            cosets.append(Coset(k, g, r, np.asarray(inside, dtype=np.int64)))
            unassigned = rest
    return PairFamily(ball, list(specs), cosets)


###############################################################################
#                               quasi-isometry samples                        #
###############################################################################


def map_between_balls(src, dst, fn):
    """Index array of ``fn`` from one ball to another; ``-1`` where the image leaves ``dst``."""
    return np.asarray([dst.index.get(fn(g), -1) for g in src.elements], dtype=np.int64)


def left_translation(ball, g, points=None):
    """Indices of ``g h`` for ball points ``h`` (``-1`` outside the ball)."""
    model = ball.model
    points = range(len(ball)) if points is None else points
    return np.asarray([ball.index.get(model.multiply(g, ball.elements[i]), -1) for i in points], dtype=np.int64)


@dataclass(eq=False)
class QIMapSample:
    """A point map ``q`` between two finite spaces with measured constants.

    ``L`` and ``C`` satisfy ``d'(qx, qy) <= L d(x, y) + C`` and
    ``d(x, y) <= L d'(qx, qy) + C`` on all pairs of the sampled window.
    ``qbar`` is a quasi-inverse sample (target point to source point) and
    ``defect`` bounds how far ``q qbar`` and ``qbar q`` move window points.
    """

    source: object
    target: object
    f: np.ndarray
    L: float
    C: float
    qbar: np.ndarray
    defect: float
    window: float


def measure_qi(source, target, f, window=None):
    """Measure the constants of a point map on source points within ``window`` of the basepoint."""
    f = np.asarray(f, dtype=np.int64)
    w = source.radius / 2 if window is None else window
    pts = np.flatnonzero((source.base_distance <= w + EPS) & (f >= 0))
    if pts.size == 0:
        raise DomainError("no mapped source point in the window")
    D = source.distances_from_many(pts)[:, pts]
    img = f[pts]
    D2 = target.distances_from_many(img)[:, img]
    off = D > 0
    ratios = [D2[off] / D[off]]
    spread = off & (D2 > 0)
    ratios.append(D[spread] / D2[spread])
    L = float(max(1.0, *(r.max() for r in ratios if r.size)))
    C = float(max(0.0, (D2 - L * D).max(), (D - L * D2).max()))
    # quasi-inverse: each target point goes to a mapped source point whose image is nearest
    mapped = np.flatnonzero(f >= 0)
    _, nearest = target.nearest_in_set(f[mapped])
    qbar = _preimage(f, mapped, nearest)
    tw = np.flatnonzero(target.base_distance <= target.radius / 2 + EPS)
    d_back = source.distances_from_many(pts)
    defect1 = float(d_back[np.arange(pts.size), qbar[img]].max())
    fq = f[qbar[tw]]
    d_fwd = target.distances_from_many(tw)
    defect2 = float(d_fwd[np.arange(tw.size), fq].max()) if tw.size else 0.0
    return QIMapSample(source, target, f, L, C, qbar, max(defect1, defect2), w)


def _preimage(f, mapped, targets):
    """Smallest mapped source point with each given image (``-1`` for ``-1``)."""
    first = np.full(int(f.max()) + 1, -1, dtype=np.int64)
    order = mapped[::-1]
    first[f[order]] = order
    out = np.full(len(targets), -1, dtype=np.int64)
    ok = targets >= 0
    out[ok] = first[targets[ok]]
    return out


def identity_sample(space):
    n = space.n
    ids = np.arange(n, dtype=np.int64)
    return QIMapSample(space, space, ids, 1.0, 0.0, ids.copy(), 0.0, space.radius / 2)


###############################################################################
#                               pair checks                                   #
###############################################################################


@dataclass(eq=False)
class PairCheckReport:
    M: float | None  # least grid value with both projections surjective, None on failure
    M_grid: list
    hausdorff: np.ndarray  # trusted source cosets x target cosets
    source_cosets: list
    target_cosets: list
    matches: dict
    unmatched_source: list
    unmatched_target: list

    @property
    def ok(self):
        return self.M is not None


def default_M_grid(R):
    return [0.5] + list(range(1, int(R // 2) + 1))


def pair_qi_check(q, source, target, M_grid=None):
    """Least M for which ``{(A, B) : Hdist(q(A), B) < M}`` projects onto both trusted coset sets.

    Hausdorff distances are taken in the target with window ``R'/2``.  Source
    cosets are matched against all visible target cosets and the other way
    round, but only trusted cosets must be covered.
    """
    tspace = q.target
    M_grid = default_M_grid(tspace.radius) if M_grid is None else sorted(M_grid)
    window = tspace.radius / 2
    s_trusted = set(source.trusted())
    t_trusted = set(target.trusted())
    images = []
    for c in source.cosets:
        img = q.f[c.points]
        images.append(as_points(img[img >= 0]))
    d_t = [tspace.distance_to_set(c.points) for c in target.cosets]
    ns, nt = len(source.cosets), len(target.cosets)
    H = np.full((ns, nt), np.inf)
    for i in range(ns):
        if images[i].size == 0:
            continue
        d_img = None
        for j in range(nt):
            if i not in s_trusted and j not in t_trusted:
                continue
            if d_img is None:
                d_img = tspace.distance_to_set(images[i])
            H[i, j] = truncated_hausdorff(tspace, images[i], target.cosets[j].points, window, d_img, d_t[j])
    s_idx, t_idx = sorted(s_trusted), sorted(t_trusted)
    best = None
    for M in M_grid:
        rel = H < M
        if all(rel[i].any() for i in s_idx) and all(rel[:, j].any() for j in t_idx):
            best = M
            break
    M_eval = best if best is not None else M_grid[-1]
    rel = H < M_eval
    matches = {i: np.flatnonzero(rel[i]).tolist() for i in s_idx}
    return PairCheckReport(
        best, list(M_grid), H, s_idx, t_idx, matches,
        [i for i in s_idx if not rel[i].any()],
        [j for j in t_idx if not rel[:, j].any()],
    )


###############################################################################
#                               stabilizers                                   #
###############################################################################


@dataclass(eq=False)
class StabilizerResult:
    elements: list  # ball indices of the accepted g
    candidates: list  # ball indices tested (the trusted region)
    values: dict  # ball index -> windowed Hausdorff distance
    displacement: float
    M: float

    @property
    def inconclusive(self):
        return not self.candidates


def stabilizer_window(R, length, disp):
    """Radius inside which both directed distances of ``Hdist(q_g(A), A)`` are computed exactly.

    A point within ``rho`` of the basepoint has its nearest partner within
    ``2 rho + |g|``, whose preimage has length at most ``2 rho + 2|g|``; that
    must fit in the cut-down set of radius ``R - |g| - disp``.
    """
    return (R - disp - 3 * length) / 2


def approx_stabilizer(q, A, M, ball):
    """``{g : Hdist(q_g(A), A) <= M}`` over the trusted part of the ball, with ``q_g = q g qbar``.

    ``q`` maps the Cayley ball space into X and ``A`` is a point set of X.
    Only g with ``|g| <= (R - disp) / 4`` are tested, where ``disp`` is the
    measured displacement of ``q qbar``.  For each g, A is cut down to the
    ball of radius ``R - |g| - disp`` so every translate stays visible, and
    the Hausdorff distance is windowed by :func:`stabilizer_window`.
    """
    X = q.target
    A = as_points(A, X.n)
    if A.size == 0:
        raise DomainError("A is empty")
    R = ball.radius
    disp = float(q.defect)
    dA = X.distance_to_set(A)
    cands = np.flatnonzero(ball.lengths <= (R - disp) / 4 + EPS)
    out, values = [], {}
    for gi in cands.tolist():
        ell = float(ball.lengths[gi])
        keep = A[X.base_distance[A] <= R - ell - disp + EPS]
        src = q.qbar[keep]
        src = src[src >= 0]
        moved = left_translation(ball, ball.elements[gi], src)
        moved = moved[moved >= 0]
        img = q.f[moved]
        img = as_points(img[img >= 0])
        if img.size == 0:
            values[gi] = math.inf
            continue
        h = truncated_hausdorff(X, img, A, stabilizer_window(R, ell, disp), None, dA)
        values[gi] = h
        if h <= M + EPS:
            out.append(gi)
    return StabilizerResult(out, cands.tolist(), values, disp, M)


def closure_threshold(q, M):
    """Relaxed threshold under which a product of two stabilizer elements is again accepted."""
    return q.L * 2 * M + q.L * q.C + q.C


###############################################################################
#                               commensurator probe                           #
###############################################################################


@dataclass(frozen=True)
class ProbeVerdict:
    kind: str  # bounded | diverging | inconclusive
    value: float | None
    radii: tuple
    distances: tuple
    slope: float | None = None

    def __str__(self):
        if self.kind == "bounded":
            return f"bounded({self.value:g})"
        if self.kind == "diverging":
            return f"diverging(slope={self.slope:.3g})"
        return "inconclusive"


def classify_growth(radii, values, run=3):
    """Bounded when the last ``run`` values agree; diverging when they strictly increase past ``R/2``."""
    radii, values = list(radii), list(values)
    slope = float(np.polyfit(radii, values, 1)[0]) if len(radii) >= 2 and all(map(math.isfinite, values)) else None
    tail = values[-run:]
    if len(tail) == run and all(math.isfinite(v) for v in tail):
        if max(tail) - min(tail) <= EPS:
            return ProbeVerdict("bounded", tail[-1], tuple(radii), tuple(values), slope)
        if all(b > a + EPS for a, b in zip(tail, tail[1:])) and tail[-1] > radii[-1] / 2 + EPS:
            return ProbeVerdict("diverging", None, tuple(radii), tuple(values), slope)
    return ProbeVerdict("inconclusive", None, tuple(radii), tuple(values), slope)


def commensurator_probe(model, P, g, R_list, cap=DEFAULT_CAP):
    """Hausdorff distance between P and gP in growing balls, classified as bounded or diverging.

    Bounded values suggest g commensurates P; diverging values suggest it does not.
    """
    R_list = sorted(R_list)
    gens = tuple(P.generators) if isinstance(P, SubsetSpec) else tuple(P)
    values = []
    for R in R_list:
        ball = cached_ball(model, R, cap)
        space = ball_space(ball)
        A = trace_subset(ball, SubsetSpec("subgroup", gens))
        B = trace_subset(ball, SubsetSpec("coset", gens, element=g))
        if B.size == 0:
            values.append(math.inf)
            continue
        values.append(truncated_hausdorff(space, A, B, R / 2))
    return classify_growth(R_list, values)


###############################################################################
#                               coarse connectedness and perpendicularity     #
###############################################################################


def coarse_connectedness_scale(space, S):
    """Least sigma making S a single sigma-component: the bottleneck of a minimum spanning tree."""
    S = as_points(S, space.n)
    if S.size == 0:
        raise DomainError("S is empty")
    if S.size == 1:
        return 0.0
    D = space.distances_from_many(S)[:, S]
    iu, ju = np.triu_indices(S.size, k=1)
    w = D[iu, ju]
    order = np.argsort(w, kind="stable")
    uf = UnionFind(S.size)
    merged = 0
    for e in order.tolist():
        if uf.union(int(iu[e]), int(ju[e])):
            merged += 1
            if merged == S.size - 1:
                return float(w[e])
    return math.inf


def perpendicularity_bound(space, B, C, k, BC=None):
    """Least M with ``B ∩ N_k(C) ⊆ N_M(B ∩ C)`` over the sampled points.

    When ``B ∩ C`` is not given it is the intersection of the traces; an
    empty intersection is replaced by the basepoint (the identity).
    """
    B, C = as_points(B, space.n), as_points(C, space.n)
    BC = np.intersect1d(B, C) if BC is None else as_points(BC, space.n)
    if BC.size == 0:
        BC = np.asarray([space.basepoint], dtype=np.int64)
    near = B[space.distance_to_set(C)[B] <= k + EPS]
    if near.size == 0:
        return 0.0
    return float(space.distance_to_set(BC)[near].max())


def perpendicularity_profile(model, B_spec, C_spec, k, R_list, cap=DEFAULT_CAP):
    """``perpendicularity_bound`` per radius, to expose (in)stability in R."""
    out = {}
    for R in sorted(R_list):
        ball = cached_ball(model, R, cap)
        space = ball_space(ball)
        out[R] = perpendicularity_bound(space, trace_subset(ball, B_spec), trace_subset(ball, C_spec), k)
    return out


###############################################################################
#                               finite-index induction                        #
###############################################################################


@dataclass(frozen=True)
class InducedSubgroup:
    family: int  # which P
    rep: object  # g_i
    Q: object  # membership predicate for g_i P g_i^-1 ∩ H
    cosets: tuple  # right cosets H x making up the double coset H g_i P
    D1: float  # Hdist(Q_i, g_i P g_i^-1)
    D2: float  # |g_i|
    witness: float  # Hdist(Q_i, g_i P)


def induce_finite_index_collection(model, H, P_specs, ball):
    """The collection ``Q_i = g_i P_i g_i^-1 ∩ H`` induced on a finite-index subgroup H.

    H must carry a coset table.  The orbits of H on G/P are the double
    cosets ``H g P``; they are found by letting the generators of P act on
    the right cosets ``H\\G``.  Each representative is the minimal ball
    element of its double coset.  Hausdorff values are windowed at ``R/2``.
    """
    if not isinstance(H, SubsetSpec) or H.kind != "finite-index" or H.table is None:
        raise ConfigurationError("H needs a coset table (a finite-index subset spec)")
    table = H.table
    space = ball_space(ball)
    window = ball.radius / 2
    right_coset = [table.coset_of(g) for g in ball.elements]
    out = []
    for k, spec in enumerate(P_specs):
        P = spec.subgroup(model)
        uf = UnionFind(table.index)
        for p in spec.generators:
            for c in range(table.index):
                uf.union(c, table.act(c, p))
        orbits = {}
        for c in range(table.index):
            orbits.setdefault(uf.find(c), []).append(c)
        for root in sorted(orbits):
            members = set(orbits[root])
            rep_i = next((i for i, c in enumerate(right_coset) if c in members), None)
            if rep_i is None:
                raise ConfigurationError(f"the ball misses the double coset of right coset {root}; enlarge R")
            g = ball.elements[rep_i]
            Q = IntersectionSubgroup(model, g, P, table)
            q_pts = trace_predicate(ball, Q.contains)
            conj = trace_predicate(ball, ConjugateSubgroup(model, g, P).contains)
            gP = trace_subset(ball, SubsetSpec("coset", tuple(spec.generators), element=g))
            out.append(InducedSubgroup(
                k, g, Q, tuple(sorted(members)),
                truncated_hausdorff(space, q_pts, conj, window),
                float(ball.lengths[rep_i]),
                truncated_hausdorff(space, q_pts, gP, window),
            ))
    return out
