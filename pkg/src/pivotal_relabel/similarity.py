"""Co-clustering similarity and group-membership probabilities from allocations."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .chain_store import MixtureChain

# rows of the one-hot allocation matrix processed per matmul block
_BLOCK = 256


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Estimated probabilities that two units share a component.

    ``counts[i, j]`` is the number of iterations in which units ``i`` and
    ``j`` were allocated together; ``c = counts / H_used`` is formed by a
    single division, so every entry is an exact multiple of ``1 / H_used``.
    """

    counts: np.ndarray
    H_used: int

    def __post_init__(self):
        self.counts.setflags(write=False)

    @cached_property
    def c(self) -> np.ndarray:
        c = self.counts / self.H_used
        c.setflags(write=False)
        return c

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @classmethod
    def from_matrix(cls, c, H_used: int | None = None) -> "SimilarityMatrix":
        """Wrap an explicit similarity matrix.

        With ``H_used`` given, entries are snapped to the nearest multiple of
        ``1 / H_used``. Without it, ``H_used`` is taken as 1 and the counts
        hold the (possibly fractional) similarities themselves.
        """
        c = np.asarray(c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("similarity matrix must be square")
        if not np.array_equal(c, c.T):
            raise ValueError("similarity matrix must be symmetric")
        if np.any(c < 0) or np.any(c > 1) or not np.all(np.diag(c) == 1):
            raise ValueError("similarities must lie in [0, 1] with a unit diagonal")
        if H_used is None:
            return cls(c.copy(), 1)
        return cls(np.rint(c * H_used), int(H_used))


def _onehot_blocks(z0: np.ndarray, G: int):
    H, n = z0.shape
    for start in range(0, H, _BLOCK):
        block = z0[start:start + _BLOCK]
        rows = block.shape[0]
        onehot = np.zeros((n, rows * G))
        cols = (np.arange(rows)[None, :] * G + block.T)
        onehot[np.arange(n)[:, None], cols] = 1.0
        yield onehot


def estimate_similarity(chain: MixtureChain) -> SimilarityMatrix:
    """``c[i, j] = #{h : z[h, i] == z[h, j]} / H``.

    Counts are accumulated as sums of 0/1 products. Every partial sum is an
    integer far below 2**53, so the float64 matmul is exact and the result
    does not depend on block order.
    """
    if chain.H < 1:
        raise ValueError("cannot estimate similarity from an empty chain")
    z0 = chain.z - 1
    counts = np.zeros((chain.n, chain.n))
    for onehot in _onehot_blocks(z0, chain.G):
        counts += onehot @ onehot.T
    return SimilarityMatrix(counts, chain.H)


@dataclass(frozen=True, eq=False)
class GroupProbMatrix:
    """``q[i, g]``: estimated probability that unit ``i`` is in group ``g + 1``."""

    q: np.ndarray
    iterations_used: np.ndarray
    normalized: bool


def estimate_group_probs(chain: MixtureChain, iterations=None, *,
                         normalize: bool = False) -> GroupProbMatrix:
    """Average allocation indicators over a set of iterations.

    The sum always runs over ``iterations`` (all of them by default). The
    divisor is the full chain length ``H`` unless ``normalize`` is set, in
    which case it is ``len(iterations)``. With the full-length divisor,
    rows of a subset sum to less than one, which is how discarded
    iterations show up in the group probabilities.
    """
    if iterations is None:
        iterations = np.arange(chain.H)
    iterations = np.unique(np.asarray(iterations, dtype=np.int64))
    if iterations.size == 0:
        raise ValueError("iteration set is empty")
    if iterations[0] < 0 or iterations[-1] >= chain.H:
        raise IndexError(f"iterations must lie in 0..{chain.H - 1}")
    z0 = chain.z[iterations] - 1
    counts = np.zeros((chain.n, chain.G), dtype=np.int64)
    for g in range(chain.G):
        counts[:, g] = (z0 == g).sum(axis=0)
    divisor = iterations.size if normalize else chain.H
    return GroupProbMatrix(counts / divisor, iterations, normalize)


def dissimilarity(sim: SimilarityMatrix) -> np.ndarray:
    """``1 - c`` with an exactly zero diagonal."""
    s = 1.0 - sim.c
    np.fill_diagonal(s, 0.0)
    return s


def save_similarity_csv(sim: SimilarityMatrix, path) -> None:
    """Header-less CSV, one row of ``n`` values per unit."""
    np.savetxt(Path(path), sim.c, delimiter=",", fmt="%.17g")
