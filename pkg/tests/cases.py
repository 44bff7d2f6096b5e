"""Shared generators of random spaces and dense reference data for the tests."""

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from coarse_ends.coarse_space import CoordinateSpace, GraphSpace, MatrixSpace

from oracles import dense_components, pairwise


def random_space(rng, kind, n_max=500):
    """Return ``(space, dense distance matrix)`` for one random space of the given kind."""
    n = int(rng.integers(5, n_max + 1))
    if kind in ("euclidean", "manhattan"):
        pts = np.round(rng.uniform(-10, 10, size=(n, 2)), 3)
        pts[0] = 0.0
        space = CoordinateSpace(pts, radius=40.0, basepoint=(0, 0), metric=kind)
        D = pairwise(space.coords, 2 if kind == "euclidean" else 1)
        return space, D
    if kind == "graph":
        # random connected graph: a random tree plus extra edges
        parent = [int(rng.integers(0, i)) for i in range(1, n)]
        rows = list(range(1, n))
        extra = int(rng.integers(0, n))
        a = rng.integers(0, n, size=extra)
        b = rng.integers(0, n, size=extra)
        I = np.concatenate([rows, a])
        J = np.concatenate([parent, b])
        keep = I != J
        A = sp.coo_matrix((np.ones(keep.sum()), (I[keep], J[keep])), shape=(n, n)).tocsr()
        A = ((A + A.T) > 0).astype(np.int8)
        D = csgraph.shortest_path(A, unweighted=True)
        return GraphSpace(A, radius=D[0].max(), basepoint=0), D
    # explicit metric: shortest paths of a random weighted complete graph
    W = rng.uniform(0.2, 5.0, size=(n, n))
    W = np.triu(W, 1)
    W = W + W.T
    D = csgraph.shortest_path(W, directed=False)
    return MatrixSpace(D), D


KINDS = ("euclidean", "manhattan", "graph", "explicit")


def component_mismatches(n_spaces=200, seed=7, n_max=500):
    """Count partitions where sigma_components disagrees with dense BFS."""
    from coarse_ends.coarse_space import sigma_components

    rng = np.random.default_rng(seed)
    bad = 0
    for k in range(n_spaces):
        kind = KINDS[k % len(KINDS)]
        space, D = random_space(rng, kind, n_max)
        sigma = float(rng.choice([0.5, 1.0, 1.5, 2.0, 3.0]))
        C = rng.choice(space.n, size=int(rng.integers(1, 4)), replace=False)
        mu = float(rng.uniform(0, 4))
        dC = D[:, C].min(axis=1)
        alive = dC >= mu - 1e-9
        got = sigma_components(space, np.flatnonzero(alive), sigma, mu)
        want = dense_components(D, alive, sigma)
        if got.labels.tolist() != want:
            bad += 1
    return bad
