"""Pivot selection, iteration filtering and relabelling by pivot membership.

One unit per group of a reference partition is chosen as its *pivot*. In
every kept iteration, the component holding pivot ``g`` is renamed ``g``.
This is only well defined when the pivots sit in distinct components and no
other component is occupied, so iterations violating either condition are
discarded first.

Pivot criteria, for a candidate unit ``i`` of group ``G_g`` (sums and
extrema over ``j``; the candidate itself is left out of within-group
aggregates):

====  =========================================  =========
tag   score                                      optimum
====  =========================================  =========
a     max over j in G_g of c_ij                  maximise
b     sum over j in G_g of c_ij                  maximise
c     min over j in G_g of c_ij                  minimise
d     min over j outside G_g of c_ij             minimise
e     sum over j outside G_g of c_ij             minimise
f     (sum in G_g) - (sum outside G_g)           maximise
====  =========================================  =========

``mus`` (maxima units search) instead looks for the unit tuple whose
similarity submatrix is most often the identity; see
:func:`select_pivots_mus`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .chain_store import PHI_COMPONENT, MixtureChain
from .partitioning import Partition
from .similarity import SimilarityMatrix

CRITERIA = ("a", "b", "c", "d", "e", "f")
ALL_CRITERIA = CRITERIA + ("mus",)
MUS_MAX_GROUPS = 6

_MAXIMISE = {"a": True, "b": True, "c": False, "d": False, "e": False, "f": True}


class NoValidIterationsError(RuntimeError):
    """Every iteration was discarded by the pivot filter."""


class MUSError(RuntimeError):
    """Maxima units search found no tuple of separated pivots."""


@dataclass(frozen=True, eq=False)
class PivotSet:
    """0-based unit index of the pivot of each group, in group order."""

    pivots: np.ndarray
    criterion: str

    def __post_init__(self):
        p = np.asarray(self.pivots, dtype=np.int64).ravel()
        if np.unique(p).size != p.size:
            raise ValueError(f"pivots must be distinct, got {p.tolist()}")
        p.setflags(write=False)
        object.__setattr__(self, "pivots", p)

    def __len__(self):
        return self.pivots.size

    def __eq__(self, other):
        if not isinstance(other, PivotSet):
            return NotImplemented
        return self.criterion == other.criterion and np.array_equal(self.pivots, other.pivots)

    def __repr__(self):
        return f"PivotSet({self.pivots.tolist()}, criterion={self.criterion!r})"


def _check_inputs(sim: SimilarityMatrix, part: Partition) -> list[np.ndarray]:
    if part.n != sim.n:
        raise ValueError(f"partition has {part.n} units, similarity has {sim.n}")
    groups = part.groups()
    if any(m.size == 0 for m in groups):
        raise ValueError("partition has an empty group")
    return groups


def _scores(counts: np.ndarray, members: np.ndarray, inside: np.ndarray,
            criterion: str) -> np.ndarray:
    rows = counts[members]
    within = rows[:, inside].copy()
    outside = rows[:, ~inside]
    # drop self-similarity from within-group aggregates
    self_pos = np.searchsorted(np.flatnonzero(inside), members)
    if criterion == "a":
        within[np.arange(members.size), self_pos] = -np.inf
        return within.max(axis=1)
    if criterion == "c":
        within[np.arange(members.size), self_pos] = np.inf
        return within.min(axis=1)
    if criterion == "d":
        if outside.shape[1] == 0:
            return np.zeros(members.size)
        return outside.min(axis=1)
    within[np.arange(members.size), self_pos] = 0
    if criterion == "b":
        return within.sum(axis=1)
    if criterion == "e":
        return outside.sum(axis=1)
    return within.sum(axis=1) - outside.sum(axis=1)


def select_pivots_criterion(sim: SimilarityMatrix, part: Partition,
                            criterion: str) -> PivotSet:
    """One pivot per group, optimising the tagged score within the group.

    Scores are computed on the integer co-clustering counts, so ties are
    exact; the lowest unit index wins them.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
    groups = _check_inputs(sim, part)
    pivots = []
    for g, members in enumerate(groups, start=1):
        if members.size == 1:
            pivots.append(members[0])
            continue
        inside = part.labels == g
        score = _scores(sim.counts, members, inside, criterion)
        best = np.argmax(score) if _MAXIMISE[criterion] else np.argmin(score)
        pivots.append(members[best])
    return PivotSet(np.array(pivots), criterion)


def mus_candidates(sim: SimilarityMatrix, part: Partition, M: int,
                   eps: float = 0.0) -> list[np.ndarray]:
    """Per group, the ``M`` units with the most near-zero similarities to
    units of other groups (ties to the lowest index)."""
    groups = _check_inputs(sim, part)
    c = sim.c
    out = []
    for g, members in enumerate(groups, start=1):
        outside = part.labels != g
        zeros = (c[np.ix_(members, np.flatnonzero(outside))] <= eps).sum(axis=1)
        order = np.argsort(-zeros, kind="stable")
        out.append(members[order[:M]])
    return out


def mus_tuple_counts(sim: SimilarityMatrix, candidates: list[np.ndarray],
                     eps: float = 0.0) -> list[np.ndarray]:
    """For each candidate, how many one-per-group candidate tuples through it
    have an identity similarity submatrix (off-diagonal entries ``<= eps``)."""
    c = sim.c
    sizes = [len(cs) for cs in candidates]
    # separated[g][k][a, b]: candidate a of group g vs candidate b of group k
    ok = np.ones(sizes, dtype=bool)
    K = len(candidates)
    for g, k in itertools.combinations(range(K), 2):
        block = c[np.ix_(candidates[g], candidates[k])] <= eps
        shape = [1] * K
        shape[g], shape[k] = sizes[g], sizes[k]
        ok &= block.reshape(shape)
    counts = []
    for g in range(K):
        axes = tuple(a for a in range(K) if a != g)
        counts.append(ok.sum(axis=axes).astype(np.int64))
    return counts


def select_pivots_mus(sim: SimilarityMatrix, part: Partition, M: int = 5,
                      eps: float = 0.0) -> PivotSet:
    """Maxima units search.

    1. per group, keep the ``M`` units with the most near-zero similarities
       to units outside the group;
    2. for each kept unit, count the one-per-group tuples of kept units whose
       similarity submatrix is the identity up to ``eps``;
    3. per group, the unit with the largest count is the pivot (lowest index
       on ties).

    Raises :class:`MUSError` when no such tuple exists.
    """
    G_hat = part.G_hat
    if G_hat < 2:
        raise ValueError("maxima units search needs at least two groups")
    if G_hat > MUS_MAX_GROUPS:
        raise ValueError(f"MUS capped at G_hat <= {MUS_MAX_GROUPS}, got {G_hat}")
    if M < 1:
        raise ValueError("M must be at least 1")
    cands = mus_candidates(sim, part, M, eps)
    counts = mus_tuple_counts(sim, cands, eps)
    if all(int(cnt.max()) == 0 for cnt in counts):
        raise MUSError("MUS found no separated pivots: no identity submatrix among candidates")
    pivots = []
    for units, cnt in zip(cands, counts):
        top = units[cnt == cnt.max()]
        pivots.append(int(top.min()))
    return PivotSet(np.array(pivots), "mus")


def select_pivots(sim: SimilarityMatrix, part: Partition, criterion: str,
                  M: int = 5, eps: float = 0.0) -> PivotSet:
    if criterion == "mus":
        return select_pivots_mus(sim, part, M, eps)
    return select_pivots_criterion(sim, part, criterion)


@dataclass(frozen=True, eq=False)
class IterationFilter:
    """Which iterations survive the pivot conditions (0-based indices).

    ``H1``: more occupied components than ``G_hat``. ``H2``: fewer.
    ``H3``: two pivots share a component, with members of ``H1`` removed so
    that ``H0``, ``H1`` and ``H3`` partition the iterations. ``H2`` is a
    subset of ``H3``.
    """

    H0: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    H3: np.ndarray
    occupied: np.ndarray
    G_hat: int

    @property
    def H(self) -> int:
        return self.occupied.size


def compute_filter(chain: MixtureChain, pivots: PivotSet, G_hat: int) -> IterationFilter:
    p = pivots.pivots
    if p.size and (p.min() < 0 or p.max() >= chain.n):
        raise IndexError(f"pivot indices must lie in 0..{chain.n - 1}")
    z = chain.z
    present = np.zeros((chain.H, chain.G), dtype=bool)
    present[np.arange(chain.H)[:, None], z - 1] = True
    occupied = present.sum(axis=1)
    piv = np.sort(z[:, p], axis=1)
    clash = np.any(piv[:, 1:] == piv[:, :-1], axis=1) if p.size > 1 else np.zeros(chain.H, bool)
    in_h1 = occupied > G_hat
    in_h3 = clash & ~in_h1
    kept = ~(in_h1 | clash)
    return IterationFilter(
        H0=np.flatnonzero(kept), H1=np.flatnonzero(in_h1),
        H2=np.flatnonzero(occupied < G_hat), H3=np.flatnonzero(in_h3),
        occupied=occupied, G_hat=G_hat)


def kept_proportion(filt: IterationFilter, H: int | None = None) -> float:
    """``|H0| / H``."""
    H = filt.H if H is None else H
    if H == 0:
        raise ValueError("chain has no iterations")
    return filt.H0.size / H


@dataclass(frozen=True, eq=False)
class RelabelResult:
    chain: MixtureChain
    filter: IterationFilter
    kept_proportion: float
    pivots: PivotSet
    extra: dict = field(default_factory=dict)

    def report(self) -> dict:
        """Sidecar summary, JSON-serialisable."""
        return {
            "method": "pivotal",
            "criterion": self.pivots.criterion,
            "pivots": self.pivots.pivots.tolist(),
            "kept_proportion": self.kept_proportion,
            "H": self.filter.H,
            "H0": int(self.filter.H0.size),
            "H1": int(self.filter.H1.size),
            "H3": int(self.filter.H3.size),
            **self.extra,
        }


def relabel(chain: MixtureChain, pivots: PivotSet, filt: IterationFilter) -> RelabelResult:
    """Rename, in every kept iteration, the component holding pivot ``g`` as ``g``.

    Means, weights and component-wise dispersions follow their component.
    Components holding no pivot are empty on kept iterations and are
    dropped, so the output has exactly ``len(pivots)`` components.
    """
    keep = filt.H0
    if keep.size == 0:
        raise NoValidIterationsError("no valid iterations; relabelling impossible")
    G_hat = len(pivots)
    z = chain.z[keep]
    raw = z[:, pivots.pivots]                       # (H0, G_hat), labels 1..G
    rows = np.arange(keep.size)[:, None]
    table = np.zeros((keep.size, chain.G + 1), dtype=np.int64)
    table[rows, raw] = np.arange(1, G_hat + 1)[None, :]
    new_z = np.take_along_axis(table, z, axis=1)
    if np.any(new_z == 0):
        raise ValueError("filter does not match this chain: a kept iteration has unpivoted units")
    src = raw - 1
    mu = chain.mu[keep][rows, src]
    pi = chain.pi[keep][rows, src]
    phi = None
    if chain.phi is not None:
        phi = chain.phi[keep]
        if chain.phi_layout == PHI_COMPONENT:
            phi = chain.phi_blocks()[keep][rows, src].reshape(keep.size, -1)
    meta = dict(chain.meta)
    meta["relabelled"] = "pivotal"
    if G_hat < chain.G or meta.get("partial_weights"):
        meta["partial_weights"] = True
    out = MixtureChain(z=new_z, mu=mu, pi=pi, phi=phi, meta=meta, phi_layout=chain.phi_layout)
    return RelabelResult(out, filt, kept_proportion(filt, chain.H), pivots)


def pivotal_relabel(chain: MixtureChain, sim: SimilarityMatrix, part: Partition,
                    criterion: str = "b", M: int = 5, eps: float = 0.0,
                    pivots: PivotSet | None = None) -> RelabelResult:
    """Select pivots (unless given), filter and relabel in one call."""
    if pivots is None:
        pivots = select_pivots(sim, part, criterion, M, eps)
    filt = compute_filter(chain, pivots, part.G_hat)
    return relabel(chain, pivots, filt)
