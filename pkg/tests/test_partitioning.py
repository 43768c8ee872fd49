import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pivotal_relabel.chain_store import MixtureChain
from pivotal_relabel.partitioning import (
    Partition,
    adjusted_rand,
    canonical_labels,
    default_candidates,
    enumerate_partitions,
    expected_binder_loss,
    expected_distance_mcmc,
    hclust_complete,
    load_partition_csv,
    partition_distance,
    save_partition_csv,
    select_partition,
)
from pivotal_relabel.similarity import SimilarityMatrix, estimate_similarity

from _chains import random_chain


def naive_complete_linkage(d, G_hat):
    """Recompute every inter-cluster distance at each merge."""
    n = d.shape[0]
    clusters = [[i] for i in range(n)]
    while len(clusters) > G_hat:
        best = None
        for x, y in itertools.combinations(range(len(clusters)), 2):
            dist = max(d[i, j] for i in clusters[x] for j in clusters[y])
            key = (dist, min(clusters[x]), min(clusters[y]))
            if best is None or key < best[0]:
                best = (key, x, y)
        _, x, y = best
        clusters[x] = clusters[x] + clusters[y]
        del clusters[y]
        clusters.sort(key=min)
    labels = np.empty(n, dtype=int)
    for g, members in enumerate(clusters):
        labels[members] = g + 1
    return Partition(labels)


def random_dissim(rng, n, grid=None):
    x = rng.uniform(size=(n, n))
    if grid:
        x = np.round(x * grid) / grid
    d = np.triu(x, 1)
    d = d + d.T
    return d


def test_hclust_example():
    s = np.array([[0, .1, .9, 1], [.1, 0, 1, .9], [.9, 1, 0, .2], [1, .9, .2, 0]])
    part, merges = hclust_complete(s, 2)
    assert part == Partition([1, 1, 2, 2])
    assert [m.height for m in merges] == [0.1, 0.2, 1.0]


def test_hclust_extremes():
    s = random_dissim(np.random.default_rng(0), 6)
    assert hclust_complete(s, 6)[0] == Partition(np.arange(1, 7))
    assert hclust_complete(s, 1)[0] == Partition(np.ones(6, dtype=int))
    with pytest.raises(ValueError):
        hclust_complete(s, 0)
    with pytest.raises(ValueError):
        hclust_complete(s, 7)
    with pytest.raises(NotImplementedError):
        hclust_complete(s, 2, linkage="average")


def test_hclust_rejects_bad_matrix():
    with pytest.raises(ValueError):
        hclust_complete(np.array([[0, 0.2], [0.3, 0]]), 1)
    with pytest.raises(ValueError):
        hclust_complete(np.array([[0.1, 0.2], [0.2, 0]]), 1)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 12), grid=st.sampled_from([None, 4, 10]),
       data=st.data())
def test_hclust_matches_naive(seed, n, grid, data):
    d = random_dissim(np.random.default_rng(seed), n, grid)
    G_hat = data.draw(st.integers(1, n))
    part, merges = hclust_complete(d, G_hat)
    assert part == naive_complete_linkage(d, G_hat)
    heights = [m.height for m in merges]
    assert len(merges) == n - 1
    assert all(a <= b for a, b in zip(heights, heights[1:]))


def test_partition_canonical_form():
    p = Partition([3, 3, 1, 2])
    assert p.labels.tolist() == [1, 1, 2, 3]
    assert p.G_hat == 3
    assert [g.tolist() for g in p.groups()] == [[0, 1], [2], [3]]
    assert canonical_labels([5, 2, 5]).tolist() == [1, 2, 1]


def test_partition_distance():
    assert partition_distance([1, 1, 2], [1, 1, 2]) == 0
    assert partition_distance([1, 1, 2], [1, 2, 2]) == 2
    assert partition_distance([1, 1, 2], [1, 2, 2], d1=3, d2=1) == 4
    with pytest.raises(ValueError):
        partition_distance([1, 1], [1, 1, 2])


@settings(max_examples=40, deadline=None)
@given(a=st.lists(st.integers(1, 4), min_size=1, max_size=10), data=st.data())
def test_partition_distance_symmetric(a, data):
    b = data.draw(st.lists(st.integers(1, 4), min_size=len(a), max_size=len(a)))
    assert partition_distance(a, b) == partition_distance(b, a)
    assert partition_distance(a, b, 2, 5) == partition_distance(b, a, 5, 2)


def test_binder_loss_examples():
    assert expected_binder_loss([1, 2, 3], SimilarityMatrix.from_matrix(np.eye(3))) == 0
    assert expected_binder_loss([1, 1, 1], SimilarityMatrix.from_matrix(np.ones((3, 3)))) == 0
    c = np.array([[1, .5, 0], [.5, 1, .5], [0, .5, 1]])
    assert expected_binder_loss([1, 1, 2], SimilarityMatrix.from_matrix(c)) == 1.0


def test_expected_distance_examples():
    z_star = [1, 1, 2]
    same = MixtureChain(z=np.array([z_star, z_star]), mu=np.zeros((2, 2, 1)),
                        pi=np.full((2, 2), 0.5))
    assert expected_distance_mcmc(z_star, same) == 0
    mixed = MixtureChain(z=np.array([[1, 2, 2], z_star]), mu=np.zeros((2, 2, 1)),
                         pi=np.full((2, 2), 0.5))
    assert expected_distance_mcmc(z_star, mixed) == 1.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), H=st.integers(1, 40), n=st.integers(2, 10), G=st.integers(1, 4))
def test_expected_distance_equals_binder(seed, H, n, G):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, H=H, n=n, G=G)
    z_star = rng.integers(1, 4, size=n)
    a = expected_distance_mcmc(z_star, chain)
    b = expected_binder_loss(z_star, estimate_similarity(chain))
    assert abs(a - b) <= 1e-10


def test_select_partition_examples():
    c = np.array([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]], dtype=float)
    sim = SimilarityMatrix.from_matrix(c)
    only = Partition([1, 2, 1, 2])
    assert select_partition([only], sim) is only
    cands = list(enumerate_partitions(4, 2))
    assert len(cands) == 8
    assert select_partition(cands, sim) == Partition([1, 1, 2, 2])
    first, second = Partition([1, 1, 1, 2]), Partition([1, 2, 2, 2])
    sim2 = SimilarityMatrix.from_matrix(np.full((4, 4), 0.5) + 0.5 * np.eye(4))
    assert select_partition([first, second], sim2) is first
    with pytest.raises(ValueError):
        select_partition([], sim)


def _bell(n):
    # Bell numbers by the triangle
    row = [1]
    for _ in range(n - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]


def test_enumeration_counts():
    for n in range(1, 8):
        assert sum(1 for _ in enumerate_partitions(n)) == _bell(n)
    with pytest.raises(ValueError):
        next(enumerate_partitions(11))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 8), G_hat=st.integers(1, 3))
def test_select_partition_matches_exhaustive(seed, n, G_hat):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, H=15, n=n, G=3)
    sim = estimate_similarity(chain)
    cands = list(enumerate_partitions(n, G_hat))
    best = select_partition(cands, sim)
    losses = [expected_binder_loss(p, sim) for p in cands]
    assert expected_binder_loss(best, sim) == min(losses)
    assert best == cands[int(np.argmin(losses))]


def test_default_candidates_not_worse_than_any_member():
    rng = np.random.default_rng(3)
    chain = random_chain(rng, H=25, n=9, G=3)
    sim = estimate_similarity(chain)
    cands = default_candidates(chain, sim, 3)
    assert len(cands) == chain.H + 1
    best = select_partition(cands, sim)
    assert all(expected_binder_loss(best, sim) <= expected_binder_loss(c, sim) for c in cands)


def test_adjusted_rand_examples():
    assert adjusted_rand([1, 1, 2, 2], [2, 2, 1, 1]) == 1.0
    # pair counts: index 0, rows 2, cols 2, total 6 -> (0 - 2/3) / (2 - 2/3)
    assert adjusted_rand([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        adjusted_rand([1, 2], [1, 2, 3])


@settings(max_examples=40, deadline=None)
@given(a=st.lists(st.integers(1, 4), min_size=2, max_size=12), data=st.data())
def test_adjusted_rand_symmetric(a, data):
    b = data.draw(st.lists(st.integers(1, 4), min_size=len(a), max_size=len(a)))
    assert adjusted_rand(a, b) == pytest.approx(adjusted_rand(b, a), abs=1e-12)
    assert adjusted_rand(a, a) == 1.0


def test_partition_csv_round_trip(tmp_path):
    p = Partition([2, 2, 1, 3])
    path = tmp_path / "p.csv"
    save_partition_csv(p, path)
    assert path.read_text() == "1,1,2,3\n"
    assert load_partition_csv(path) == p
