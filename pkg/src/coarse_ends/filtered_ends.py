"""Ends of a pair (X, C) computed on a truncated space.

For a fixed sigma the unbounded sigma-components of ``X - C^{+mu}`` form an
inverse system over mu (larger mu, smaller alive set).  An
:class:`EndsDiagram` realizes that system on a finite mu grid; a verdict is
read off the tail of the grid.  :func:`filtered_ends` repeats this over a
sigma grid and compares neighbouring sigmas through the maps induced by
coarsening.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .coarse_space import (
    DEFAULT_RULE,
    EPS,
    ComponentPartition,
    GraphSpace,
    alive_mask,
    as_points,
    is_bijection_on_unbounded,
    sigma_components,
    sweep_partitions,
    transition_map,
)
from .errors import ConsistencyError, DomainError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EndsConfig:
    window: int = 3  # consecutive stable trusted levels needed for an exact verdict
    n_max: int = 64
    rule: object = DEFAULT_RULE


DEFAULT_CONFIG = EndsConfig()


@dataclass(frozen=True)
class Verdict:
    kind: str  # exact | at_least | empty | inconclusive
    n: int | None = None

    def __str__(self):
        if self.kind in ("exact", "at_least"):
            return f"{self.kind}({self.n})"
        return self.kind

    @property
    def value(self):
        return 0 if self.kind == "empty" else self.n

    @property
    def stabilized(self):
        return self.kind in ("exact", "empty")


INCONCLUSIVE = Verdict("inconclusive")


def default_mu_grid(space):
    """Integers ``1..R/2`` for graphs; multiples of the sampling step up to ``R/2`` otherwise."""
    step = 1.0 if isinstance(space, GraphSpace) else space.unit_scale
    k = int(math.floor(space.radius / 2 / step + EPS))
    grid = [round(i * step, 12) for i in range(1, k + 1)]
    return [int(m) if float(m).is_integer() else m for m in grid]


###############################################################################
#                               diagrams                                      #
###############################################################################


@dataclass(eq=False)
class EndsDiagram:
    """Partitions of ``X - C^{+mu}`` at one sigma over an increasing mu grid.

    ``transitions[k]`` maps components at ``mu_grid[k+1]`` to components at
    ``mu_grid[k]`` (the direction of the order on scales).
    """

    space: object
    C: np.ndarray
    sigma: float
    mu_grid: list
    partitions: list
    transitions: list
    dC: np.ndarray = field(repr=False)
    config: EndsConfig = DEFAULT_CONFIG

    @property
    def trusted(self):
        return [p.trusted for p in self.partitions]

    @property
    def trusted_levels(self):
        return [k for k, p in enumerate(self.partitions) if p.trusted]

    @property
    def sigma_trusted(self):
        return self.config.rule.sigma_trusted(self.space, self.sigma)

    def counts(self):
        return [p.unbounded_count for p in self.partitions]

    def level(self, mu):
        for k, m in enumerate(self.mu_grid):
            if abs(m - mu) <= EPS:
                return k
        raise DomainError(f"mu = {mu} is not on the grid")

    def partition(self, mu):
        return self.partitions[self.level(mu)]

    def bijective(self, k):
        """Whether the transition from level ``k+1`` to level ``k`` is a bijection on unbounded components."""
        return is_bijection_on_unbounded(self.partitions[k + 1], self.partitions[k], self.transitions[k])

    def composite(self, i, j):
        """Composite of consecutive transitions from level ``j`` down to level ``i <= j``."""
        if i > j:
            raise DomainError("composite runs from a larger mu to a smaller one")
        out = {c: c for c in self.partitions[j].ids.tolist()}
        for k in range(j - 1, i - 1, -1):
            step = self.transitions[k]
            out = {c: step[t] for c, t in out.items()}
        return out

    def stable_window(self):
        """Longest tail run of trusted levels with equal counts and bijective transitions.

        Returns ``(first, last)`` level indices or ``None``.
        """
        levels = self.trusted_levels
        if not levels:
            return None
        last = levels[-1]
        first = last
        counts = self.counts()
        while first - 1 in levels and counts[first - 1] == counts[last] and self.bijective(first - 1):
            first -= 1
        return first, last


def ends_diagram(space, C, sigma, mu_grid=None, config=DEFAULT_CONFIG, allow_empty=False, dC=None):
    """Build the sigma-ends system of ``(space, C)`` on ``mu_grid``.

    An empty C is rejected unless ``allow_empty`` is set, in which case the
    system is constant and describes the unbounded sigma-components of the
    whole space.
    """
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    C = as_points(C, space.n)
    if C.size == 0 and not allow_empty:
        raise DomainError("C is empty")
    mu_grid = default_mu_grid(space) if mu_grid is None else sorted(set(mu_grid))
    if not mu_grid:
        raise DomainError("mu grid is empty")
    if mu_grid[0] < 0 or mu_grid[-1] > space.radius + EPS:
        raise DomainError("mu values must lie in [0, R]")
    dC = space.distance_to_set(C) if dC is None else dC
    by_mu = sweep_partitions(space, dC, sigma, mu_grid, config.rule)
    partitions = [by_mu[m] for m in mu_grid]
    transitions = [transition_map(partitions[k + 1], partitions[k]) for k in range(len(mu_grid) - 1)]
    return EndsDiagram(space, C, float(sigma), list(mu_grid), partitions, transitions, dC, config)


@dataclass(frozen=True)
class SigmaVerdict:
    sigma: float
    verdict: Verdict
    window: tuple | None = None  # (mu_1, mu_2) on which the count was stable


def diagram_verdict(diagram):
    """Read a verdict off the tail of a diagram."""
    cfg = diagram.config
    levels = diagram.trusted_levels
    if not diagram.sigma_trusted or not levels:
        return SigmaVerdict(diagram.sigma, INCONCLUSIVE)
    counts = diagram.counts()
    if any(counts[k] > cfg.n_max for k in levels):
        return SigmaVerdict(diagram.sigma, Verdict("at_least", cfg.n_max))
    first, last = diagram.stable_window()
    window = (diagram.mu_grid[first], diagram.mu_grid[last])
    if last - first + 1 >= cfg.window:
        n = counts[last]
        return SigmaVerdict(diagram.sigma, Verdict("exact", n) if n else Verdict("empty", 0), window)
    if len(levels) >= 2 and counts[levels[-1]] > counts[levels[-2]]:
        return SigmaVerdict(diagram.sigma, Verdict("at_least", counts[last]))
    return SigmaVerdict(diagram.sigma, INCONCLUSIVE)


###############################################################################
#                               across sigma                                  #
###############################################################################


@dataclass(frozen=True)
class CrossMap:
    """Map between unbounded components at ``sigma`` and ``sigma2`` at a shared level ``mu``."""

    sigma: float
    sigma2: float
    mu: float | None
    mapping: dict
    bijective: bool


@dataclass(eq=False)
class FilteredEndsReport:
    sigma_grid: list
    mu_grid: list
    diagrams: dict
    verdicts: list
    cross: list
    final: Verdict
    cross_bijective: bool

    def verdict(self, sigma):
        for v in self.verdicts:
            if abs(v.sigma - sigma) <= EPS:
                return v.verdict
        raise DomainError(f"sigma = {sigma} is not on the grid")

    def summary(self):
        return {
            "sigma_grid": self.sigma_grid,
            "mu_grid": self.mu_grid,
            "verdicts": {f"{v.sigma:g}": str(v.verdict) for v in self.verdicts},
            "windows": {f"{v.sigma:g}": list(v.window) if v.window else None for v in self.verdicts},
            "cross_bijective": self.cross_bijective,
            "final": str(self.final),
        }


def cross_sigma_map(d1, d2):
    """Coarsening map from the unbounded components at ``d1.sigma`` to those at ``d2.sigma``.

    Evaluated at the largest mu trusted in both diagrams; ``None`` level when
    there is none.
    """
    if d2.sigma < d1.sigma - EPS:
        raise DomainError("cross-sigma maps go from a finer to a coarser sigma")
    shared = [m for k, m in enumerate(d1.mu_grid) if d1.partitions[k].trusted
              and any(abs(m - m2) <= EPS and d2.partitions[j].trusted for j, m2 in enumerate(d2.mu_grid))]
    if not shared:
        return CrossMap(d1.sigma, d2.sigma, None, {}, False)
    mu = shared[-1]
    p1, p2 = d1.partition(mu), d2.partition(mu)
    rho = transition_map(p1, p2)
    mapping = {c: rho[c] for c in p1.unbounded_ids}
    return CrossMap(d1.sigma, d2.sigma, mu, mapping, is_bijection_on_unbounded(p1, p2, rho))


def _run(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def filtered_ends(space, C, sigma_grid, mu_grid=None, config=DEFAULT_CONFIG, allow_empty=False, threads=1):
    """Per-sigma verdicts, cross-sigma comparison and a final estimate of the number of filtered ends.

    The final verdict is the one at the largest trusted sigma; ``cross_bijective``
    says whether every coarsening map between neighbouring sigmas was a
    bijection, i.e. whether the counts agree across the grid.
    """
    sigma_grid = sorted(set(sigma_grid))
    if not sigma_grid:
        raise DomainError("sigma grid is empty")
    C = as_points(C, space.n)
    if C.size == 0 and not allow_empty:
        raise DomainError("C is empty")
    mu_grid = default_mu_grid(space) if mu_grid is None else sorted(set(mu_grid))
    dC = space.distance_to_set(C)
    diagrams = _run(lambda s: ends_diagram(space, C, s, mu_grid, config, allow_empty, dC), sigma_grid, threads)
    verdicts = [diagram_verdict(d) for d in diagrams]
    cross = [cross_sigma_map(a, b) for a, b in zip(diagrams, diagrams[1:])]
    cross_ok = all(c.bijective for c in cross)
    trusted = [v for v, d in zip(verdicts, diagrams) if d.sigma_trusted]
    final = trusted[-1].verdict if trusted else INCONCLUSIVE
    return FilteredEndsReport(sigma_grid, mu_grid, dict(zip(sigma_grid, diagrams)), verdicts, cross, final, cross_ok)


def classical_ends(space, sigma_grid=None, mu_grid=None, config=DEFAULT_CONFIG, threads=1):
    """Ends of the space itself: filtered ends relative to the basepoint."""
    if sigma_grid is None:
        sigma_grid = [space.unit_scale]
    return filtered_ends(space, [space.basepoint], sigma_grid, mu_grid, config, threads=threads)


def coends(ball, C, sigma_grid=(1, 2, 3), mu_grid=None, config=DEFAULT_CONFIG, threads=1):
    """Number of coends of a pair (G, P) through its mu-neighborhood subsystem.

    ``C`` is the trace of P in the ball.  The neighborhoods ``P^{+mu}`` are
    cofinal among P-invariant neighborhoods, so this is the filtered-ends
    computation on the Cayley ball.
    """
    space = GraphSpace.from_ball(ball)
    return filtered_ends(space, C, list(sigma_grid), mu_grid, config, threads=threads)


###############################################################################
#                               ray witnesses                                 #
###############################################################################


@dataclass(frozen=True)
class RayWitness:
    """A sigma-path from C to the outer shell for one end class.

    ``end`` is the class's component id at the deepest stable level;
    ``designated`` maps each window level mu to the component the path must
    stay in; ``clean`` is true when it does.
    """

    end: int
    path: tuple
    designated: dict
    clean: bool


def ray_witnesses(diagram):
    """One witness path per stable end class; empty list when no level is stable."""
    window = diagram.stable_window()
    if window is None:
        return []
    first, last = window
    deep = diagram.partitions[last]
    space = diagram.space
    I, J = space.proximity_pairs(diagram.sigma)
    out = []
    for end in deep.unbounded_ids:
        designated = {}
        allowed = np.ones(space.n, dtype=bool)
        for k in range(first, last + 1):
            target = diagram.composite(k, last)[end]
            part = diagram.partitions[k]
            designated[diagram.mu_grid[k]] = target
            allowed &= (part.labels < 0) | (part.labels == target)
        members = deep.members(end)
        bd = space.base_distance[members]
        goal = int(members[np.flatnonzero(bd == bd.max())[0]])
        path = _cheapest_path(space.n, I, J, allowed, diagram.C, goal)
        clean = bool(allowed[list(path)].all())
        out.append(RayWitness(end, tuple(path), designated, clean))
    return out


def _cheapest_path(n, I, J, allowed, sources, goal):
    """Path from a source to ``goal`` over proximity pairs, avoiding disallowed points where possible."""
    cost = np.where(allowed, 1e-6, 1.0)
    rows = np.concatenate([I, J])
    cols = np.concatenate([J, I])
    w = cost[cols]
    # a super source feeding every point of C
    s = n
    rows = np.concatenate([rows, np.full(len(sources), s)])
    cols = np.concatenate([cols, sources])
    w = np.concatenate([w, cost[sources]])
    graph = sp.csr_matrix((w, (rows, cols)), shape=(n + 1, n + 1))
    _, pred = csgraph.dijkstra(graph, directed=True, indices=s, return_predecessors=True)
    if pred[goal] < 0:
        raise ConsistencyError("the end class is not sigma-connected to C inside the ball")
    path = [goal]
    while pred[path[-1]] != s:
        path.append(int(pred[path[-1]]))
    return path[::-1]


###############################################################################
#                               induced maps                                  #
###############################################################################


def _class_of(diagram, partition, cid, base):
    """End class (component id at the window's shallowest level ``base``) of component ``cid``."""
    base_part = diagram.partitions[base]
    if partition.scale.mu >= base_part.scale.mu - EPS:
        return transition_map(partition, base_part)[cid]
    # a level below the window: invert the (injective) map down to it
    rho = transition_map(base_part, partition)
    pre = [c for c in base_part.unbounded_ids if rho[c] == cid]
    if len(pre) != 1:
        raise ConsistencyError(f"level mu = {partition.scale.mu:g} does not separate the end classes")
    return pre[0]


@dataclass(frozen=True)
class InducedEndMap:
    mapping: dict  # source class -> target class
    levels: tuple  # (source mu, target mu) pairs used
    bijective: bool


def induced_end_map(f, source, target, lam, eps, r=None):
    """Map on end classes induced by a coarse map ``f`` between two ends diagrams.

    ``f[i]`` is the target point of source point ``i`` (``-1`` when the image
    left the target ball).  A source component at level mu lands in the
    target at level ``mu / lam - eps - r``, where ``r`` bounds the distance
    from the target set to the image of the source set (measured when not
    given).  Raises ``ConsistencyError`` when an image meets two target
    components or none.
    """
    f = np.asarray(f, dtype=np.int64)
    if target.sigma < lam * source.sigma + eps - EPS:
        raise DomainError(f"target sigma {target.sigma:g} is below lam*sigma+eps = {lam * source.sigma + eps:g}")
    sw, tw = source.stable_window(), target.stable_window()
    if sw is None or tw is None:
        raise ConsistencyError("both diagrams need a stable window")
    tspace = target.space
    if r is None:
        fC = f[source.C]
        fC = fC[fC >= 0]
        if fC.size == 0:
            raise ConsistencyError("the image of C left the target ball")
        d = tspace.distance_to_set(fC)[target.C]
        near = tspace.base_distance[target.C] <= tspace.radius / 2 + EPS
        r = float(d[near].max()) if near.any() else float(d.max())
    mapping, used = {}, []
    for k in range(sw[0], sw[1] + 1):
        part = source.partitions[k]
        mu_t = part.scale.mu / lam - eps - r
        if mu_t < target.mu_grid[tw[0]] - EPS:
            continue
        alive = np.flatnonzero(alive_mask(target.dC, mu_t))
        tpart = sigma_components(tspace, alive, target.sigma, mu_t, target.config.rule)
        for cid in part.unbounded_ids:
            img = f[part.members(cid)]
            img = img[img >= 0]
            labels = np.unique(tpart.labels[img]) if img.size else np.zeros(0, dtype=np.int64)
            if labels.size != 1 or labels[0] < 0:
                raise ConsistencyError(
                    f"image of component {cid} at mu = {part.scale.mu:g} meets {labels.tolist()} at target "
                    f"mu = {mu_t:g}; (lam, eps, r) = ({lam:g}, {eps:g}, {r:g}) are too small")
            s_cls = _class_of(source, part, cid, sw[0])
            t_cls = _class_of(target, tpart, int(labels[0]), tw[0])
            if mapping.setdefault(s_cls, t_cls) != t_cls:
                raise ConsistencyError(f"end class {s_cls} maps to two target classes")
        used.append((part.scale.mu, mu_t))
    if not used:
        raise ConsistencyError("no source level lands inside the target's stable window; extend the mu grid")
    targets = list(mapping.values())
    n_src = source.partitions[sw[0]].unbounded_count
    n_tgt = target.partitions[tw[0]].unbounded_count
    bij = len(mapping) == n_src and len(set(targets)) == len(targets) == n_tgt
    return InducedEndMap(mapping, tuple(used), bij)
