"""Reference partitions of the units: complete-linkage clustering and
expected-loss selection among candidate partitions."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .chain_store import MixtureChain
from .similarity import SimilarityMatrix, dissimilarity

EXHAUSTIVE_MAX_N = 10


def canonical_labels(labels) -> np.ndarray:
    """Renumber labels ``1..K`` in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse].astype(np.int64) + 1


@dataclass(frozen=True, eq=False)
class Partition:
    """Hard grouping of ``n`` units with canonical labels ``1..G_hat``."""

    labels: np.ndarray
    source: str = "external"

    def __post_init__(self):
        labels = canonical_labels(np.asarray(self.labels).ravel())
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def G_hat(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def groups(self) -> list[np.ndarray]:
        """0-based member indices of each group, in label order."""
        return [np.flatnonzero(self.labels == g) for g in range(1, self.G_hat + 1)]

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())

    def __repr__(self):
        return f"Partition({self.labels.tolist()}, source={self.source!r})"


@dataclass(frozen=True)
class Merge:
    """One agglomeration step.

    Clusters are named by their smallest member (0-based unit index), so
    ``a < b`` always and the merged cluster keeps the name ``a``.
    """

    a: int
    b: int
    height: float
    size: int


def _check_dissim(dissim: np.ndarray) -> np.ndarray:
    d = np.asarray(dissim, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("dissimilarity must be a square matrix")
    if not np.array_equal(d, d.T):
        raise ValueError("dissimilarity must be symmetric")
    if np.any(np.diag(d) != 0):
        raise ValueError("dissimilarity must have a zero diagonal")
    if np.any(d < 0) or np.any(d > 1) or not np.all(np.isfinite(d)):
        raise ValueError("dissimilarities must lie in [0, 1]")
    return d


def hclust_complete(dissim, G_hat: int, linkage: str = "complete"
                    ) -> tuple[Partition, list[Merge]]:
    """Agglomerative clustering with complete linkage, cut at ``G_hat`` groups.

    Returns the partition after ``n - G_hat`` merges together with the full
    merge sequence (``n - 1`` steps). Among equally close cluster pairs the
    lexicographically smallest ``(a, b)`` is merged first.
    """
    if linkage != "complete":
        raise NotImplementedError(f"linkage {linkage!r} is not available; use 'complete'")
    d = _check_dissim(dissim)
    n = d.shape[0]
    if not 1 <= G_hat <= n:
        raise ValueError(f"G_hat must be in 1..{n}, got {G_hat}")

    work = d.copy()
    np.fill_diagonal(work, np.inf)
    owner = np.arange(n)
    sizes = np.ones(n, dtype=np.int64)
    merges: list[Merge] = []
    cut = None
    for step in range(n - 1):
        if n - step == G_hat:
            cut = owner.copy()
        # full symmetric matrix: the first row-major minimum is the
        # lexicographically smallest (a, b) pair with a < b
        flat = int(np.argmin(work))
        a, b = divmod(flat, n)
        height = work[a, b]
        merged = np.maximum(work[a], work[b])
        work[a] = merged
        work[:, a] = merged
        work[a, a] = np.inf
        work[b] = np.inf
        work[:, b] = np.inf
        owner[owner == b] = a
        sizes[a] += sizes[b]
        merges.append(Merge(a, b, float(height), int(sizes[a])))
    if cut is None:
        cut = owner.copy()
    return Partition(cut, source="hclust"), merges


def partition_distance(z_star, z, d1: float = 1.0, d2: float = 1.0) -> float:
    """Weighted count of unit pairs on which two partitions disagree.

    ``d1`` weighs pairs split by ``z_star`` but joined by ``z``; ``d2``
    weighs pairs joined by ``z_star`` but split by ``z``.
    """
    a = np.asarray(getattr(z_star, "labels", z_star))
    b = np.asarray(getattr(z, "labels", z))
    if a.shape != b.shape:
        raise ValueError(f"partitions have different lengths {a.size} and {b.size}")
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    iu = np.triu_indices(a.size, k=1)
    same_a, same_b = same_a[iu], same_b[iu]
    return float(d1 * np.count_nonzero(~same_a & same_b) + d2 * np.count_nonzero(same_a & ~same_b))


def expected_binder_loss(z_star, sim: SimilarityMatrix) -> float:
    """``sum_{i<k} |1[z*_i == z*_k] - c_ik|``."""
    labels = np.asarray(getattr(z_star, "labels", z_star))
    if labels.size != sim.n:
        raise ValueError(f"partition has {labels.size} units, similarity has {sim.n}")
    iu = np.triu_indices(labels.size, k=1)
    together = (labels[:, None] == labels[None, :])[iu]
    return float(np.abs(together - sim.c[iu]).sum())


def expected_distance_mcmc(z_star, chain: MixtureChain, d1: float = 1.0,
                           d2: float = 1.0) -> float:
    """Posterior expected :func:`partition_distance`, averaged over the chain."""
    labels = np.asarray(getattr(z_star, "labels", z_star))
    if labels.size != chain.n:
        raise ValueError(f"partition has {labels.size} units, chain has {chain.n}")
    total = 0.0
    for h in range(chain.H):
        total += partition_distance(labels, chain.z[h], d1, d2)
    return total / chain.H


def default_candidates(chain: MixtureChain, sim: SimilarityMatrix,
                       G_hat: int) -> list[Partition]:
    """The chain's own allocations followed by the complete-linkage cut."""
    cands = [Partition(chain.z[h], source=f"chain-iteration {h}") for h in range(chain.H)]
    cands.append(hclust_complete(dissimilarity(sim), G_hat)[0])
    return cands


def select_partition(candidates: Sequence[Partition], sim: SimilarityMatrix) -> Partition:
    """Candidate with the smallest expected Binder loss; earliest wins ties."""
    if not candidates:
        raise ValueError("candidate list is empty")
    iu = np.triu_indices(sim.n, k=1)
    c_upper = sim.c[iu]
    best, best_loss = None, np.inf
    for cand in candidates:
        labels = cand.labels
        if labels.size != sim.n:
            raise ValueError(f"candidate has {labels.size} units, similarity has {sim.n}")
        together = (labels[:, None] == labels[None, :])[iu]
        loss = float(np.abs(together - c_upper).sum())
        if loss < best_loss:
            best, best_loss = cand, loss
    return best


def enumerate_partitions(n: int, max_groups: int | None = None) -> Iterator[Partition]:
    """Every partition of ``n`` units into at most ``max_groups`` groups.

    Exhaustive, so only offered for ``n <= 10``.
    """
    if n > EXHAUSTIVE_MAX_N:
        raise ValueError(f"exhaustive enumeration is limited to n <= {EXHAUSTIVE_MAX_N}")
    k_max = n if max_groups is None else max_groups
    labels = [0] * n

    def rec(i: int, used: int):
        if i == n:
            yield Partition(np.array(labels) + 1, source="enumerated")
            return
        for g in range(min(used + 1, k_max)):
            labels[i] = g
            yield from rec(i + 1, max(used, g + 1))

    if n == 0:
        return
    yield from rec(0, 0)


def adjusted_rand(p1, p2) -> float:
    """Adjusted Rand index from the contingency table of two partitions."""
    a = np.asarray(getattr(p1, "labels", p1))
    b = np.asarray(getattr(p2, "labels", p2))
    if a.shape != b.shape:
        raise ValueError(f"partitions have different lengths {a.size} and {b.size}")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def pairs(x):
        return (x * (x - 1) // 2).sum()

    index = pairs(table)
    rows, cols = pairs(table.sum(axis=1)), pairs(table.sum(axis=0))
    total = a.size * (a.size - 1) // 2
    if total == 0:
        return 1.0
    expected = rows * cols / total
    maximum = (rows + cols) / 2
    if maximum == expected:
        return 1.0 if np.array_equal(canonical_labels(a), canonical_labels(b)) else 0.0
    return float((index - expected) / (maximum - expected))


def save_partition_csv(part: Partition, path) -> None:
    """One line of comma-separated labels."""
    Path(path).write_text(",".join(str(v) for v in part.labels) + "\n", encoding="utf-8")


def load_partition_csv(path) -> Partition:
    text = Path(path).read_text(encoding="utf-8").strip()
    return Partition(np.array([int(v) for v in text.split(",")]), source="external")
