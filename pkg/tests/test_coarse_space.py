import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarse_ends.coarse_space import (
    CoordinateSpace,
    GraphSpace,
    MatrixSpace,
    ProductRowSpace,
    ScalePair,
    TruncationRule,
    UnionFind,
    complement_of_neighborhood,
    distance_to_subset,
    is_bijection_on_unbounded,
    product_row_metric,
    sigma_components,
    sweep_partitions,
    thicken,
    transition_map,
    truncated_hausdorff,
)
from coarse_ends.errors import ConsistencyError, DomainError, OrderError
from coarse_ends.group_models import FreeAbelian, FreeGroup, SubsetSpec, build_cayley_ball, trace_subset

from cases import KINDS, component_mismatches, random_space
from oracles import dense_components, hausdorff, l1, pairwise


@pytest.fixture(scope="module")
def z2():
    ball = build_cayley_ball(FreeAbelian(2), 12)
    space = GraphSpace.from_ball(ball)
    axis = trace_subset(ball, SubsetSpec("subgroup", ((1, 0),)))
    return ball, space, axis


def test_union_find_minimal_root():
    uf = UnionFind(6)
    uf.union(4, 2)
    uf.union(5, 4)
    uf.union(1, 3)
    assert list(uf.roots([0, 1, 2, 3, 4, 5])) == [0, 1, 2, 1, 2, 2]


def test_graph_distances_are_word_lengths(z2):
    ball, space, _ = z2
    for i in (0, 5, 40, 100):
        d = space.distances_from(i)
        for j in range(0, space.n, 17):
            # inside the ball the truncated path metric can exceed l1 only near the boundary
            if ball.lengths[i] + ball.lengths[j] <= ball.radius:
                assert d[j] == l1(ball.elements[i], ball.elements[j])


def test_distance_to_subset(z2):
    ball, space, axis = z2
    p = ball.index[(3, -4)]
    assert distance_to_subset(space, p, axis) == 4
    with pytest.raises(DomainError):
        distance_to_subset(space, p, [])
    assert np.isinf(space.distance_to_set([])).all()


def test_nearest_in_set_matches_distance(z2):
    _, space, axis = z2
    d, k = space.nearest_in_set(axis)
    assert np.array_equal(d, space.distance_to_set(axis))
    for p in range(0, space.n, 23):
        assert space.dist(p, int(k[p])) == d[p]
        assert int(k[p]) in set(axis.tolist())


def test_complement_of_neighborhood(z2):
    ball, space, axis = z2
    alive = complement_of_neighborhood(space, axis, 2)
    assert all(abs(ball.elements[i][1]) >= 2 for i in alive)
    assert len(alive) == sum(1 for g in ball.elements if abs(g[1]) >= 2)
    with pytest.raises(DomainError):
        complement_of_neighborhood(space, axis, -1)


def test_z2_axis_components(z2):
    ball, space, axis = z2
    part = sigma_components(space, complement_of_neighborhood(space, axis, 2), 1, 2)
    assert part.component_count == 2
    assert part.unbounded_count == 2
    half = sigma_components(space, complement_of_neighborhood(space, axis, 2), 0.5, 2)
    assert half.unbounded_count == 0
    assert half.component_count == len(half.alive_points)


def test_component_ids_are_minimal_members(z2):
    _, space, axis = z2
    part = sigma_components(space, complement_of_neighborhood(space, axis, 3), 2, 3)
    for cid in part.ids.tolist():
        assert part.members(cid).min() == cid
        assert part.component_of(cid) == cid


def test_random_spaces_match_bfs_quick():
    assert component_mismatches(n_spaces=40, seed=11, n_max=200) == 0


@pytest.mark.parametrize("kind", KINDS)
def test_proximity_pairs_match_dense(kind):
    rng = np.random.default_rng(5)
    space, D = random_space(rng, kind, 120)
    for sigma in (0.5, 1.0, 2.5):
        I, J = space.proximity_pairs(sigma)
        ii, jj = np.nonzero(np.triu(D <= sigma + 1e-9, 1))
        assert sorted(zip(I.tolist(), J.tolist())) == sorted(zip(ii.tolist(), jj.tolist()))
        assert list(zip(I.tolist(), J.tolist())) == sorted(zip(I.tolist(), J.tolist()))


@pytest.mark.parametrize("kind", KINDS)
def test_metric_axioms(kind):
    rng = np.random.default_rng(9)
    space, D = random_space(rng, kind, 80)
    space.validate(200)
    assert np.allclose(D, D.T)


def test_validate_rejects_broken_metric():
    D = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    with pytest.raises(DomainError, match="triangle"):
        MatrixSpace(D).validate(500)


def test_sweep_matches_direct(z2):
    _, space, axis = z2
    dC = space.distance_to_set(axis)
    mus = [1, 2, 3, 4, 5]
    for sigma in (1, 2):
        sweep = sweep_partitions(space, dC, sigma, mus)
        for mu in mus:
            direct = sigma_components(space, np.flatnonzero(dC >= mu), sigma, mu)
            assert np.array_equal(sweep[mu].labels, direct.labels)
            assert sweep[mu].unbounded == direct.unbounded


def test_sweep_matches_bfs_random():
    rng = np.random.default_rng(21)
    for k in range(12):
        space, D = random_space(rng, KINDS[k % 4], 150)
        C = [0, int(rng.integers(space.n))]
        dC = D[:, C].min(axis=1)
        mus = [0.0, 0.5, 1.0, 2.0, 3.0]
        sweep = sweep_partitions(space, dC, 1.5, mus)
        for mu in mus:
            assert sweep[mu].labels.tolist() == dense_components(D, dC >= mu - 1e-9, 1.5)


def test_scale_order():
    a, b = ScalePair(1, 4), ScalePair(2, 3)
    assert a.precedes(b) and not b.precedes(a)
    assert a.precedes(a)
    assert not ScalePair(1, 3).precedes(ScalePair(2, 4))
    with pytest.raises(DomainError):
        ScalePair(0, 1)
    with pytest.raises(DomainError):
        ScalePair(1, -1)


def test_transition_map(z2):
    _, space, axis = z2
    dC = space.distance_to_set(axis)
    src = sigma_components(space, np.flatnonzero(dC >= 3), 1, 3)
    dst = sigma_components(space, np.flatnonzero(dC >= 2), 2, 2)
    rho = transition_map(src, dst)
    assert set(rho) == set(src.ids.tolist())
    for cid, t in rho.items():
        assert dst.labels[src.members(cid)].tolist() == [t] * len(src.members(cid))
    assert is_bijection_on_unbounded(src, dst, rho)
    with pytest.raises(OrderError):
        transition_map(dst, src)


def test_transition_inconsistent_alive_sets(z2):
    _, space, axis = z2
    dC = space.distance_to_set(axis)
    src = sigma_components(space, np.flatnonzero(dC >= 3), 1, 3)
    fake = sigma_components(space, np.flatnonzero(dC >= 5), 1, 2)
    with pytest.raises(ConsistencyError):
        transition_map(src, fake)


def test_functoriality_grid(z2):
    _, space, axis = z2
    dC = space.distance_to_set(axis)
    parts = {}
    for s in (1, 2, 3):
        for mu, part in sweep_partitions(space, dC, s, [1, 2, 3, 4]).items():
            parts[(s, mu)] = part
    keys = list(parts)
    checked = 0
    for a in keys:
        for b in keys:
            for c in keys:
                pa, pb, pc = parts[a], parts[b], parts[c]
                if pa.scale.precedes(pb.scale) and pb.scale.precedes(pc.scale):
                    ab, bc, ac = transition_map(pa, pb), transition_map(pb, pc), transition_map(pa, pc)
                    assert {k: bc[v] for k, v in ab.items()} == ac
                    checked += 1
        assert transition_map(parts[a], parts[a]) == {c: c for c in parts[a].ids.tolist()}
    assert checked > 50


def test_truncation_rule():
    rule = TruncationRule()
    space = CoordinateSpace([[0, 0], [1, 0]], radius=20, unit_scale=0.25)
    assert rule.shell(space, 2) == 18
    assert rule.core(space) == 15
    assert rule.trusted(space, 2, 10)
    assert not rule.trusted(space, 2.5, 10)
    assert not rule.trusted(space, 1, 10.5)
    tiny = CoordinateSpace([[0, 0], [1, 0]], radius=2, unit_scale=0.25)
    assert rule.sigma_trusted(tiny, 0.25)


def test_shell_fragment_is_not_unbounded():
    # a point sitting alone on the shell is bounded: it never reaches the core
    pts = [[x, 0] for x in range(11)] + [[0, 9.5]]
    space = CoordinateSpace(pts, radius=10, metric="manhattan")
    part = sigma_components(space, np.arange(space.n), 1)
    assert part.component_count == 2
    assert part.unbounded_count == 1


def test_product_row_metric_and_pairs():
    P = np.array([[0.0, 0.0], [0.0, 3.0], [1.0, 3.0]])
    D = product_row_metric(P[:, None, :], P[None, :, :])
    assert D.tolist() == [[0, 3, 4], [3, 0, 7], [4, 7, 0]]
    space = ProductRowSpace(3, 0.5, 8)
    full = product_row_metric(space.rows[:, None, :], space.rows[None, :, :])
    for sigma in (0.5, 2, 3):
        I, J = space.proximity_pairs(sigma)
        ii, jj = np.nonzero(np.triu(full <= sigma + 1e-9, 1))
        assert sorted(zip(I.tolist(), J.tolist())) == sorted(zip(ii.tolist(), jj.tolist()))
    with pytest.raises(DomainError):
        ProductRowSpace(1, 0.5, 8)


def test_coordinate_space_ordering_and_find():
    space = CoordinateSpace([[3, 0], [0, 0], [1, 0], [1, 0], [50, 0]], radius=10)
    assert space.n == 3
    assert space.basepoint == 0
    assert space.base_distance.tolist() == [0, 1, 3]
    assert space.find((1, 0)) == 1
    with pytest.raises(DomainError):
        space.find((2, 0))
    with pytest.raises(DomainError):
        CoordinateSpace([[1, 0]], radius=5)
    with pytest.raises(DomainError):
        CoordinateSpace([[0, 0]], radius=5, metric="chebyshev")


def test_truncated_hausdorff_against_oracle():
    ball = build_cayley_ball(FreeGroup(2), 6)
    space = GraphSpace.from_ball(ball)
    F2 = ball.model
    A = trace_subset(ball, SubsetSpec("subgroup", (F2.parse("a"),)))
    B = trace_subset(ball, SubsetSpec("coset", (F2.parse("a"),), element=F2.parse("b")))
    D = space.distances_from_many(np.arange(space.n))
    dist = lambda i, j: D[i, j]
    base = lambda i: space.base_distance[i]
    assert truncated_hausdorff(space, A, B) == hausdorff(A, B, dist)
    for w in (1, 2, 3):
        assert truncated_hausdorff(space, A, B, window=w) == hausdorff(A, B, dist, base, w)
    # a^w is at distance w + 1 from b<a>, so the windowed value keeps growing
    assert [truncated_hausdorff(space, A, B, window=w) for w in (1, 2, 3)] == [2, 3, 4]
    assert truncated_hausdorff(space, A, A) == 0
    assert truncated_hausdorff(space, [space.n - 1], [space.n - 2], window=0.5) == math.inf
    with pytest.raises(DomainError):
        truncated_hausdorff(space, [], B)


def test_thicken(z2):
    ball, space, axis = z2
    t = thicken(space, axis, 1)
    assert set(t.tolist()) == {i for i, g in enumerate(ball.elements) if abs(g[1]) <= 1}
    assert thicken(space, [], 2).size == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from(["euclidean", "manhattan"]))
def test_components_refine_under_sigma(seed, sigma, metric):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-5, 5, size=(60, 2)).round(3)
    pts[0] = 0
    space = CoordinateSpace(pts, radius=20, metric=metric)
    D = pairwise(space.coords, 2 if metric == "euclidean" else 1)
    fine = sigma_components(space, np.arange(space.n), sigma)
    coarse = sigma_components(space, np.arange(space.n), 2 * sigma)
    assert fine.labels.tolist() == dense_components(D, np.ones(space.n, bool), sigma)
    rho = transition_map(fine, coarse)
    assert all(coarse.labels[c] == t for c, t in rho.items())
    assert coarse.component_count <= fine.component_count


def test_free_distance_to_axis_uses_left_invariant_metric():
    # d(g, h) = |g^-1 h|: ba^2 is 3 from <a>, while a^2 b is 1 away
    ball = build_cayley_ball(FreeGroup(2), 8)
    space = GraphSpace.from_ball(ball)
    F2 = ball.model
    C = trace_subset(ball, SubsetSpec("subgroup", (F2.parse("a"),)))
    assert distance_to_subset(space, ball.index[F2.parse("baa")], C) == 3
    assert distance_to_subset(space, ball.index[F2.parse("aab")], C) == 1
    assert distance_to_subset(space, int(C[3]), C) == 0


def test_mu_extremes(z2):
    _, space, axis = z2
    assert len(complement_of_neighborhood(space, axis, 0)) == space.n
    assert len(complement_of_neighborhood(space, axis, space.radius + 1)) == 0


def test_components_examples():
    ball = build_cayley_ball(FreeAbelian(2), 20)
    space = GraphSpace.from_ball(ball)
    alive = [i for i, g in enumerate(ball.elements) if abs(g[1]) >= 2]
    part = sigma_components(space, alive, 1, 2)
    assert part.component_count == part.unbounded_count == 2
    fball = build_cayley_ball(FreeGroup(2), 8)
    assert sigma_components(GraphSpace.from_ball(fball), range(len(fball)), 1).component_count == 1


@pytest.fixture(scope="module")
def hash_space():
    from coarse_ends import catalog
    from coarse_ends.descriptions import build_space

    return build_space(catalog.get("hash-lines")["space"]).space


def test_hash_shape_components(hash_space):
    space = hash_space
    dC = space.distance_to_set([space.basepoint])
    # mu = 1 leaves three crossings joining the lines; mu = 3 removes all of them
    assert sigma_components(space, np.flatnonzero(dC >= 1), 0.5, 1).unbounded_count == 3
    fine = sigma_components(space, np.flatnonzero(dC >= 3), 0.5, 3)
    coarse = sigma_components(space, np.flatnonzero(dC >= 3), 1.5, 3)
    assert fine.unbounded_count == 8
    rho = transition_map(fine, coarse)
    assert len({rho[c] for c in fine.unbounded_ids}) == 6 == coarse.unbounded_count


def test_axis_transition_is_bijective():
    ball = build_cayley_ball(FreeAbelian(2), 20)
    space = GraphSpace.from_ball(ball)
    dC = space.distance_to_set(trace_subset(ball, SubsetSpec("subgroup", ((1, 0),))))
    src = sigma_components(space, np.flatnonzero(dC >= 5), 1, 5)
    dst = sigma_components(space, np.flatnonzero(dC >= 2), 1, 2)
    assert src.unbounded_count == dst.unbounded_count == 2
    assert is_bijection_on_unbounded(src, dst)


def test_shifted_axis_hausdorff():
    ball = build_cayley_ball(FreeAbelian(2), 10)
    space = GraphSpace.from_ball(ball)
    A = trace_subset(ball, SubsetSpec("subgroup", ((1, 0),)))
    B = trace_subset(ball, SubsetSpec("coset", ((1, 0),), element=(0, 3)))
    assert truncated_hausdorff(space, A, B, window=5) == 3


def test_free_hausdorff_grows_with_radius():
    F2 = FreeGroup(2)
    vals = []
    for R in (4, 6, 8):
        ball = build_cayley_ball(F2, R)
        space = GraphSpace.from_ball(ball)
        A = trace_subset(ball, SubsetSpec("subgroup", (F2.parse("a"),)))
        B = trace_subset(ball, SubsetSpec("coset", (F2.parse("a"),), element=F2.parse("b")))
        vals.append(truncated_hausdorff(space, A, B, window=R / 2))
    assert vals == sorted(vals) and vals[0] < vals[-1]
