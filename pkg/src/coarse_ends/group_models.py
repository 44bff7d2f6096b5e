"""Finitely generated groups with exact normal forms, and their word-metric balls.

Four concrete models are provided: free abelian groups ``Z^n`` (elements are
integer vectors), free groups ``F_k`` (freely reduced words), direct products
(component tuples) and free products (alternating syllable sequences).
Elements are plain hashable tuples, so the canonical key of an element is the
element itself and sorting by ``(word length, element)`` is well defined.

Free group words use letters ``a, b, c, ...`` with upper case for inverses,
so ``"aB"`` is ``a b^-1``.  Internally a letter is a non-zero integer,
``+i`` for the i-th generator and ``-i`` for its inverse.
"""

from __future__ import annotations

import logging
from collections import namedtuple
from dataclasses import dataclass, field
from string import ascii_lowercase

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import CapacityError, ConfigurationError, DomainError

log = logging.getLogger(__name__)

DEFAULT_CAP = 2_000_000

WordDistance = namedtuple("WordDistance", ["value", "exact"])


###############################################################################
#                               group models                                  #
###############################################################################


class GroupModel:
    """Common surface of the concrete models.

    Subclasses set ``generators`` (symmetric, deduplicated, sorted) and
    implement ``identity``, ``multiply``, ``invert``, ``parse``, ``format``,
    ``subgroup`` and ``basis_word``.
    """

    kind = "abstract"
    generators: tuple = ()

    def key(self, g):
        return g

    def power(self, g, k):
        if k < 0:
            g, k = self.invert(g), -k
        out = self.identity
        for _ in range(k):
            out = self.multiply(out, g)
        return out

    def conjugate(self, g, x):
        """Return ``g x g^-1``."""
        return self.multiply(self.multiply(g, x), self.invert(g))

    def _symmetrize(self, gens):
        gens = [g for g in gens if g != self.identity]
        if not gens:
            raise ConfigurationError(f"{self.kind}: generating set is empty")
        closed = set(gens) | {self.invert(g) for g in gens}
        if len(closed) != len(set(gens)):
            log.warning("%s: generating set was not symmetric; inverses added", self.kind)
        return tuple(sorted(closed, key=self.key))

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()})"


class FreeAbelian(GroupModel):
    kind = "free-abelian"

    def __init__(self, rank, generators=None):
        if rank < 1:
            raise ConfigurationError("free-abelian rank must be positive")
        self.rank = rank
        if generators is None:
            generators = [tuple(s * int(i == j) for j in range(rank)) for i in range(rank) for s in (1, -1)]
        gens = []
        for g in generators:
            g = tuple(int(x) for x in g)
            if len(g) != rank:
                raise ConfigurationError(f"generator {list(g)} does not have {rank} coordinates")
            gens.append(g)
        self.generators = self._symmetrize(gens)

    @property
    def identity(self):
        return (0,) * self.rank

    def multiply(self, g, h):
        return tuple(a + b for a, b in zip(g, h))

    def invert(self, g):
        return tuple(-a for a in g)

    def parse(self, desc):
        if isinstance(desc, int) and self.rank == 1:
            desc = [desc]
        if not isinstance(desc, (list, tuple)) or len(desc) != self.rank:
            raise ConfigurationError(f"expected an integer vector of length {self.rank}, got {desc!r}")
        return tuple(int(x) for x in desc)

    def format(self, g):
        return list(g)

    def subgroup(self, generators):
        return LatticeSubgroup(self, list(generators))

    def basis_word(self, g):
        return [(i, a) for i, a in enumerate(g) if a]

    @property
    def basis_size(self):
        return self.rank

    def describe(self):
        return {"kind": self.kind, "rank": self.rank, "generators": [list(g) for g in self.generators]}


def _reduce_word(letters):
    out = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


class FreeGroup(GroupModel):
    kind = "free"

    def __init__(self, rank):
        if not 1 <= rank <= len(ascii_lowercase):
            raise ConfigurationError("free group rank must be between 1 and 26")
        self.rank = rank
        self.generators = self._symmetrize([(s * i,) for i in range(1, rank + 1) for s in (1, -1)])

    identity = ()

    def multiply(self, g, h):
        i = 0
        while i < min(len(g), len(h)) and g[len(g) - 1 - i] == -h[i]:
            i += 1
        return g[: len(g) - i] + h[i:]

    def invert(self, g):
        return tuple(-x for x in reversed(g))

    def parse(self, desc):
        if isinstance(desc, (list, tuple)):
            letters = [int(x) for x in desc]
        elif isinstance(desc, str):
            letters = []
            for ch in desc.replace(" ", ""):
                i = ascii_lowercase.find(ch.lower()) + 1
                if i == 0:
                    raise ConfigurationError(f"bad letter {ch!r} in word {desc!r}")
                letters.append(i if ch.islower() else -i)
        else:
            raise ConfigurationError(f"expected a word, got {desc!r}")
        if any(x == 0 or abs(x) > self.rank for x in letters):
            raise ConfigurationError(f"word {desc!r} uses letters outside F_{self.rank}")
        return _reduce_word(letters)

    def format(self, g):
        return "".join(ascii_lowercase[x - 1] if x > 0 else ascii_lowercase[-x - 1].upper() for x in g)

    def subgroup(self, generators):
        return FoldedSubgroup(self, list(generators))

    def basis_word(self, g):
        return [(abs(x) - 1, 1 if x > 0 else -1) for x in g]

    @property
    def basis_size(self):
        return self.rank

    def describe(self):
        return {"kind": self.kind, "rank": self.rank}


class DirectProduct(GroupModel):
    kind = "direct-product"

    def __init__(self, factors):
        if len(factors) < 2:
            raise ConfigurationError("a direct product needs at least two factors")
        self.factors = tuple(factors)
        gens = []
        for i, f in enumerate(self.factors):
            for s in f.generators:
                g = list(self.identity)
                g[i] = s
                gens.append(tuple(g))
        self.generators = self._symmetrize(gens)

    @property
    def identity(self):
        return tuple(f.identity for f in self.factors)

    def multiply(self, g, h):
        return tuple(f.multiply(a, b) for f, a, b in zip(self.factors, g, h))

    def invert(self, g):
        return tuple(f.invert(a) for f, a in zip(self.factors, g))

    def parse(self, desc):
        if not isinstance(desc, (list, tuple)) or len(desc) != len(self.factors):
            raise ConfigurationError(f"expected {len(self.factors)} components, got {desc!r}")
        return tuple(f.parse(d) for f, d in zip(self.factors, desc))

    def format(self, g):
        return [f.format(a) for f, a in zip(self.factors, g)]

    def subgroup(self, generators):
        per_factor = [[] for _ in self.factors]
        for g in generators:
            support = [i for i, (f, a) in enumerate(zip(self.factors, g)) if a != f.identity]
            if len(support) > 1:
                raise ConfigurationError(
                    "direct-product subgroups must be generated by elements supported on one factor")
            if support:
                per_factor[support[0]].append(g[support[0]])
        return ProductSubgroup(self, [f.subgroup(p) for f, p in zip(self.factors, per_factor)])

    def basis_word(self, g):
        out, offset = [], 0
        for f, a in zip(self.factors, g):
            out += [(offset + i, e) for i, e in f.basis_word(a)]
            offset += f.basis_size
        return out

    @property
    def basis_size(self):
        return sum(f.basis_size for f in self.factors)

    def describe(self):
        return {"kind": self.kind, "factors": [f.describe() for f in self.factors]}


class FreeProduct(GroupModel):
    """Free product; an element is a tuple of ``(factor index, non-trivial factor element)``
    syllables with adjacent syllables in distinct factors."""

    kind = "free-product"

    def __init__(self, factors):
        if len(factors) < 2:
            raise ConfigurationError("a free product needs at least two factors")
        self.factors = tuple(factors)
        self.generators = self._symmetrize(
            [((i, s),) for i, f in enumerate(self.factors) for s in f.generators])

    identity = ()

    def multiply(self, g, h):
        out = list(g)
        for i, a in h:
            if out and out[-1][0] == i:
                b = self.factors[i].multiply(out.pop()[1], a)
                if b != self.factors[i].identity:
                    out.append((i, b))
            else:
                out.append((i, a))
        return tuple(out)

    def invert(self, g):
        return tuple((i, self.factors[i].invert(a)) for i, a in reversed(g))

    def parse(self, desc):
        if not isinstance(desc, (list, tuple)):
            raise ConfigurationError(f"expected a list of [factor, element] syllables, got {desc!r}")
        out = ()
        for syl in desc:
            if not isinstance(syl, (list, tuple)) or len(syl) != 2 or not isinstance(syl[0], int):
                raise ConfigurationError(f"bad syllable {syl!r}")
            i, d = syl
            if not 0 <= i < len(self.factors):
                raise ConfigurationError(f"factor index {i} out of range")
            a = self.factors[i].parse(d)
            if a != self.factors[i].identity:
                out = self.multiply(out, ((i, a),))
        return out

    def format(self, g):
        return [[i, self.factors[i].format(a)] for i, a in g]

    def subgroup(self, generators):
        per_factor = [[] for _ in self.factors]
        for g in generators:
            if len(g) > 1:
                raise ConfigurationError("free-product subgroups must be generated by single syllables")
            if g:
                per_factor[g[0][0]].append(g[0][1])
        return FreeProductSubgroup(self, [f.subgroup(p) for f, p in zip(self.factors, per_factor)])

    def basis_word(self, g):
        offsets = np.cumsum([0] + [f.basis_size for f in self.factors])
        return [(int(offsets[i]) + j, e) for i, a in g for j, e in self.factors[i].basis_word(a)]

    @property
    def basis_size(self):
        return sum(f.basis_size for f in self.factors)

    def describe(self):
        return {"kind": self.kind, "factors": [f.describe() for f in self.factors]}


def model_from_description(desc):
    """Build a model from its JSON descriptor (see the cli schema)."""
    kind = desc.get("kind")
    if kind == "free-abelian":
        return FreeAbelian(desc["rank"], desc.get("generators"))
    if kind == "free":
        return FreeGroup(desc["rank"])
    if kind == "direct-product":
        return DirectProduct([model_from_description(f) for f in desc["factors"]])
    if kind == "free-product":
        return FreeProduct([model_from_description(f) for f in desc["factors"]])
    raise ConfigurationError(f"unknown group kind {kind!r}")


###############################################################################
#                               subgroups                                     #
###############################################################################


class LatticeSubgroup:
    """Subgroup of Z^n spanned by integer vectors; membership by integer echelon reduction."""

    def __init__(self, model, generators):
        self.model = model
        self.generators = tuple(generators)
        self.basis = _integer_echelon([list(g) for g in generators], model.rank)

    def contains(self, v):
        v = list(v)
        for row in self.basis:
            c = next(i for i, x in enumerate(row) if x)
            if v[c] % row[c]:
                return False
            q = v[c] // row[c]
            v = [a - q * b for a, b in zip(v, row)]
        return not any(v)


def _integer_echelon(rows, n):
    rows = [r for r in rows if any(r)]
    basis = []
    for col in range(n):
        piv = [r for r in rows if r[col]]
        rest = [r for r in rows if not r[col]]
        while len(piv) > 1:
            piv.sort(key=lambda r: abs(r[col]))
            p, kept = piv[0], [piv[0]]
            for r in piv[1:]:
                q = r[col] // p[col]
                r2 = [a - q * b for a, b in zip(r, p)]
                if r2[col]:
                    kept.append(r2)
                elif any(r2):
                    rest.append(r2)
            piv = kept
        if piv:
            p = piv[0]
            basis.append([-a for a in p] if p[col] < 0 else p)
        rows = rest
    return basis


class FoldedSubgroup:
    """Finitely generated subgroup of a free group, via its folded (Stallings) graph."""

    def __init__(self, model, generators):
        self.model = model
        self.generators = tuple(generators)
        edges = set()
        nxt = 1
        for w in self.generators:
            if not w:
                continue
            path = [0] + list(range(nxt, nxt + len(w) - 1)) + [0]
            nxt += len(w) - 1
            for (u, v), x in zip(zip(path, path[1:]), w):
                edges.add((u, x, v) if x > 0 else (v, -x, u))
        self._out, self._base = _fold(edges)

    def contains(self, g):
        v = self._base
        for x in g:
            v = self._out.get((v, x))
            if v is None:
                return False
        return v == self._base


def _fold(edges):
    parent = {}

    def find(a):
        while parent.get(a, a) != a:
            a = parent[a]
        return a

    changed = True
    out = {}
    while changed:
        changed = False
        out = {}
        for u, x, v in sorted(edges):
            u, v = find(u), find(v)
            for a, y, b in ((u, x, v), (v, -x, u)):
                c = out.get((a, y))
                if c is not None and find(c) != find(b):
                    r1, r2 = sorted((find(c), find(b)))
                    parent[r2] = r1
                    changed = True
                else:
                    out[(a, y)] = b
        edges = {(find(u), x, find(v)) for u, x, v in edges}
    out = {(find(a), y): find(b) for (a, y), b in out.items()}
    return out, find(0)


class ProductSubgroup:
    def __init__(self, model, parts):
        self.model = model
        self.parts = parts

    def contains(self, g):
        return all(p.contains(a) for p, a in zip(self.parts, g))


class FreeProductSubgroup:
    """Free product of subgroups of the factors (one per factor, possibly trivial)."""

    def __init__(self, model, parts):
        self.model = model
        self.parts = parts

    def contains(self, g):
        return all(self.parts[i].contains(a) for i, a in g)


class CosetTable:
    """Right action of the basis generators on the right cosets ``H\\G`` of a finite-index subgroup.

    ``actions[i]`` is the permutation of ``range(index)`` induced by the i-th
    basis generator (unit vector of Z^n, letter of F_k, factor bases
    concatenated for products).  Coset 0 is ``H`` itself.
    """

    def __init__(self, model, index, actions):
        self.model = model
        self.index = int(index)
        if len(actions) != model.basis_size:
            raise ConfigurationError(
                f"coset table needs {model.basis_size} permutations, got {len(actions)}")
        self.actions = []
        for perm in actions:
            perm = [int(x) for x in perm]
            if sorted(perm) != list(range(self.index)):
                raise ConfigurationError(f"{perm} is not a permutation of {self.index} cosets")
            inv = [0] * self.index
            for i, j in enumerate(perm):
                inv[j] = i
            self.actions.append((perm, inv))

    def act(self, coset, g):
        for i, e in self.model.basis_word(g):
            perm = self.actions[i][0 if e > 0 else 1]
            for _ in range(abs(e)):
                coset = perm[coset]
        return coset

    def coset_of(self, g):
        return self.act(0, g)

    def contains(self, g):
        return self.coset_of(g) == 0


class IntersectionSubgroup:
    """``g P g^-1 ∩ H`` as a membership predicate."""

    def __init__(self, model, g, P, H):
        self.model, self.g, self.P, self.H = model, g, P, H
        self._ginv = model.invert(g)

    def contains(self, x):
        if not self.H.contains(x):
            return False
        return self.P.contains(self.model.multiply(self.model.multiply(self._ginv, x), self.g))


class ConjugateSubgroup:
    """``g P g^-1``."""

    def __init__(self, model, g, P):
        self.model, self.g, self.P = model, g, P
        self._ginv = model.invert(g)

    def contains(self, x):
        return self.P.contains(self.model.multiply(self.model.multiply(self._ginv, x), self.g))


###############################################################################
#                               balls and traces                              #
###############################################################################


@dataclass(frozen=True, eq=False)
class Ball:
    """All elements at word distance at most ``radius`` from the identity.

    ``elements`` is sorted by ``(word length, canonical key)``; ``adjacency``
    is the Cayley graph restricted to the ball (edges ``g -- g s``).
    """

    model: GroupModel
    radius: int
    elements: tuple
    lengths: np.ndarray
    adjacency: sp.csr_matrix
    index: dict = field(repr=False)

    @property
    def center(self):
        return self.model.identity

    def __len__(self):
        return len(self.elements)

    def __contains__(self, g):
        return g in self.index

    def idx(self, g):
        try:
            return self.index[g]
        except KeyError:
            raise DomainError(f"{self.model.format(g)!r} is outside the ball of radius {self.radius}") from None

    def length(self, g):
        return int(self.lengths[self.idx(g)])

    def layer_sizes(self):
        return np.bincount(self.lengths, minlength=self.radius + 1).tolist()


def build_cayley_ball(model, R, cap=DEFAULT_CAP):
    """Breadth-first enumeration of the radius-``R`` word-metric ball of ``model``."""
    if R < 0:
        raise DomainError("ball radius must be non-negative")
    if not model.generators:
        raise ConfigurationError("generating set is empty")
    e = model.identity
    index = {e: 0}
    elements, lengths = [e], [0]
    layer = [e]
    for ell in range(1, R + 1):
        new = set()
        for g in layer:
            for s in model.generators:
                h = model.multiply(g, s)
                if h not in index and h not in new:
                    new.add(h)
        if len(elements) + len(new) > cap:
            raise CapacityError(cap)
        layer = sorted(new, key=model.key)
        for h in layer:
            index[h] = len(elements)
            elements.append(h)
            lengths.append(ell)
        if not layer:
            break
    rows, cols = [], []
    for i, g in enumerate(elements):
        for s in model.generators:
            j = index.get(model.multiply(g, s))
            if j is not None and j != i:
                rows.append(i)
                cols.append(j)
    n = len(elements)
    adj = sp.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    adj.data[:] = 1
    return Ball(model, int(R), tuple(elements), np.asarray(lengths, dtype=np.int64), adj, index)


@dataclass(frozen=True)
class SubsetSpec:
    """What subset of a group (or space) to trace.

    kind is one of ``subgroup``, ``coset``, ``basepoint``, ``explicit``,
    ``predicate`` or ``finite-index``.  Group elements are given already parsed.
    """

    kind: str
    generators: tuple = ()
    element: object = None
    points: tuple = ()
    name: str = ""
    table: CosetTable | None = None

    def subgroup(self, model):
        if self.kind == "finite-index":
            if self.table is None:
                raise ConfigurationError("finite-index subgroup needs a coset table")
            return self.table
        if self.kind not in ("subgroup", "coset"):
            raise ConfigurationError(f"subset kind {self.kind!r} is not a subgroup")
        return model.subgroup(list(self.generators))


GROUP_PREDICATES = {
    "all": lambda ball, g: True,
    "identity": lambda ball, g: g == ball.model.identity,
    "sphere": lambda ball, g: ball.lengths[ball.index[g]] == ball.radius,
}


def trace_subset(ball, spec):
    """Indices (in ball order) of the ball points belonging to ``spec``."""
    model = ball.model
    if spec.kind in ("subgroup", "finite-index"):
        P = spec.subgroup(model)
        hits = [i for i, g in enumerate(ball.elements) if P.contains(g)]
    elif spec.kind == "coset":
        P = spec.subgroup(model)
        ginv = model.invert(spec.element)
        hits = [i for i, g in enumerate(ball.elements) if P.contains(model.multiply(ginv, g))]
    elif spec.kind == "basepoint":
        hits = [0]
    elif spec.kind == "explicit":
        hits = sorted({ball.idx(g) for g in spec.points})
    elif spec.kind == "predicate":
        pred = GROUP_PREDICATES.get(spec.name)
        if pred is None:
            raise ConfigurationError(f"unknown predicate {spec.name!r} for Cayley balls")
        hits = [i for i, g in enumerate(ball.elements) if pred(ball, g)]
    else:
        raise ConfigurationError(f"unknown subset kind {spec.kind!r}")
    return np.asarray(hits, dtype=np.int64)


def word_distance(ball, p, q):
    """Word distance between two ball elements.

    Exact when ``p^-1 q`` lies in the ball (its BFS length is then the true
    word length) or when the ball-restricted BFS distance is short enough that
    every competing geodesic would have stayed visible.  Otherwise the
    ball-restricted distance is returned with ``exact=False``.
    """
    i, j = ball.idx(p), ball.idx(q)
    g = ball.model.multiply(ball.model.invert(p), q)
    k = ball.index.get(g)
    if k is not None:
        return WordDistance(int(ball.lengths[k]), True)
    d = csgraph.shortest_path(ball.adjacency, unweighted=True, indices=[i])[0, j]
    if not np.isfinite(d):
        return WordDistance(float("inf"), False)
    d = int(d)
    visible = d <= ball.radius - max(ball.lengths[i], ball.lengths[j])
    return WordDistance(d, bool(visible))
