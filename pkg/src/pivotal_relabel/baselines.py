"""Competing relabelling methods used as benchmarks.

* :func:`pk_em` / :func:`pk_relabel`: Bernoulli-mixture EM over the
  component-indicator rows of the chain, read out as per-iteration
  permutations.
* :func:`classification_probs` / :func:`stephens_kl`: Kullback-Leibler
  relabelling of per-iteration classification probabilities.
* :func:`relabel_by_ordering`: identifiability constraint by sorting
  components on a scalar key.

Permutations are 0-based arrays ``nu`` with ``nu[k]`` the new name of raw
component ``k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .chain_store import PHI_COMPONENT, Dataset, MixtureChain

# exhaustive permutation search up to this many components
EXHAUSTIVE_MAX_G = 6
# bound keeping Bernoulli log-probabilities finite
Q_EPS = 1e-10
PROB_FLOOR = 1e-300

UNIVARIATE = "univariate-gaussian"
MULTIVARIATE = "multivariate-gaussian"
SCALE_MIXTURE = "gaussian-scale-mixture"
FAMILIES = (UNIVARIATE, MULTIVARIATE, SCALE_MIXTURE)


def _all_perms(G: int) -> np.ndarray:
    # lexicographic order, identity first
    return np.array(list(itertools.permutations(range(G))), dtype=np.int64)


def best_assignment(score: np.ndarray, maximize: bool = True) -> np.ndarray:
    """Optimal one-to-one assignment of rows to columns of a square matrix.

    For ``G <= 6`` all ``G!`` assignments are scored and the
    lexicographically first optimum is returned, which makes ties
    deterministic. Larger problems use the Hungarian algorithm.
    """
    G = score.shape[0]
    if G > EXHAUSTIVE_MAX_G:
        _, cols = linear_sum_assignment(score, maximize=maximize)
        return cols.astype(np.int64)
    perms = _all_perms(G)
    totals = score[np.arange(G)[None, :], perms].sum(axis=1)
    best = np.argmax(totals) if maximize else np.argmin(totals)
    return perms[best]


# --------------------------------------------------------------------------
# Bernoulli-mixture EM on allocation indicators

@dataclass(frozen=True, eq=False)
class EMState:
    """Result of :func:`pk_em`.

    ``q[i, g]`` is the fitted probability that unit ``i`` is in group ``g``;
    ``gamma[r, g]`` the responsibility of group ``g`` for indicator row
    ``r = G * h + k`` (raw component ``k`` at iteration ``h``).
    """

    q: np.ndarray
    gamma: np.ndarray
    loglik: float
    history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def indicator_rows(chain: MixtureChain) -> np.ndarray:
    """``(H * G, n)`` 0/1 matrix, row ``G*h + k`` marking units in component ``k``."""
    H, G, n = chain.H, chain.G, chain.n
    rows = np.zeros((H * G, n))
    r = G * np.arange(H)[:, None] + (chain.z - 1)
    rows[r, np.arange(n)[None, :]] = 1.0
    return rows


def _row_logliks(Zp: np.ndarray, q: np.ndarray) -> np.ndarray:
    logq, log1mq = np.log(q), np.log1p(-q)
    return Zp @ (logq - log1mq) + log1mq.sum(axis=0)[None, :]


def pk_em(chain: MixtureChain, max_iter: int = 500, tol: float = 1e-8,
          seed: int = 0, init_q=None) -> EMState:
    """Fit the Bernoulli mixture over indicator rows by EM.

    ``q`` is kept inside ``[Q_EPS, 1 - Q_EPS]``; the M-step maximises the
    weighted Bernoulli likelihood on that box, so the log-likelihood stays
    monotone. Initial ``q`` is uniform random with rows normalised, unless
    ``init_q`` is supplied. Stops when the gain drops below ``tol``.
    """
    if chain.H < 1:
        raise ValueError("empty chain")
    if chain.G < 2:
        raise ValueError("EM relabelling needs G >= 2")
    Zp = indicator_rows(chain)
    if init_q is None:
        rng = np.random.default_rng(seed)
        q = rng.uniform(size=(chain.n, chain.G))
        q /= q.sum(axis=1, keepdims=True)
    else:
        q = np.array(init_q, dtype=float)
    q = np.clip(q, Q_EPS, 1 - Q_EPS)

    history = []
    converged = False
    gamma = None
    it = 0
    for it in range(1, max_iter + 1):
        ll_rg = _row_logliks(Zp, q)
        norm = logsumexp(ll_rg, axis=1, keepdims=True)
        loglik = float(norm.sum())
        history.append(loglik)
        gamma = np.exp(ll_rg - norm)
        if len(history) > 1 and history[-1] - history[-2] < tol:
            converged = True
            break
        weight = gamma.sum(axis=0)
        q = (Zp.T @ gamma) / np.where(weight > 0, weight, 1.0)[None, :]
        q = np.clip(q, Q_EPS, 1 - Q_EPS)
    return EMState(q=q, gamma=gamma, loglik=history[-1], history=history,
                   iterations=it, converged=converged)


def pk_permutations(chain: MixtureChain, em: EMState) -> np.ndarray:
    """Per-iteration permutation read off the EM responsibilities.

    Raw component ``k`` takes the group with the largest responsibility for
    its indicator row; when that is not a bijection the maximum-total
    one-to-one matching over the ``G x G`` responsibility block is used.
    """
    G = chain.G
    gam = em.gamma.reshape(chain.H, G, G)
    perms = np.empty((chain.H, G), dtype=np.int64)
    for h in range(chain.H):
        pick = np.argmax(gam[h], axis=1)
        if np.unique(pick).size == G:
            perms[h] = pick
        else:
            perms[h] = best_assignment(gam[h], maximize=True)
    return perms


def pk_relabel(chain: MixtureChain, em: EMState) -> MixtureChain:
    out = chain.permute_labels(pk_permutations(chain, em))
    return _tag(out, "pk")


def _tag(chain: MixtureChain, method: str) -> MixtureChain:
    meta = dict(chain.meta)
    meta["relabelled"] = method
    return MixtureChain(chain.z, chain.mu, chain.pi, chain.phi, meta, chain.phi_layout)


# --------------------------------------------------------------------------
# Kullback-Leibler relabelling

@dataclass(frozen=True, eq=False)
class ClassificationProbs:
    """``p[h, i, g] = P(Z_i = g | y, theta_h)``."""

    p: np.ndarray


def _component_covariances(chain: MixtureChain, family: str) -> np.ndarray:
    """``(H, G, d, d)`` covariance draws reconstructed from ``phi``."""
    H, G, d = chain.H, chain.G, chain.d
    if chain.phi is None:
        raise ValueError(f"family {family!r} needs dispersion draws but the chain has no phi")
    if family == UNIVARIATE:
        if d != 1:
            raise ValueError("univariate family requires d == 1")
        width = 1
    elif family == MULTIVARIATE:
        width = d * d
    else:
        raise ValueError(f"unknown family {family!r}")
    if chain.phi_layout == PHI_COMPONENT:
        if chain.phi.shape[1] != G * width:
            raise ValueError(f"expected {G * width} component phi values, got {chain.phi.shape[1]}")
        cov = chain.phi.reshape(H, G, d, d)
    else:
        if chain.phi.shape[1] != width:
            raise ValueError(f"expected {width} shared phi values, got {chain.phi.shape[1]}")
        cov = np.broadcast_to(chain.phi.reshape(H, 1, d, d), (H, G, d, d))
    return cov


def classification_probs(data: Dataset, chain: MixtureChain,
                         family: str = MULTIVARIATE) -> ClassificationProbs:
    """Posterior allocation probabilities of every unit at every iteration."""
    if data.n != chain.n:
        raise ValueError(f"dataset has {data.n} units, chain has {chain.n}")
    y = data.observations
    H, G, d = chain.H, chain.G, chain.d
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if chain.G == 1:
        return ClassificationProbs(np.ones((H, data.n, 1)))
    if family == SCALE_MIXTURE:
        return ClassificationProbs(_scale_mixture_probs(y, chain))
    cov = _component_covariances(chain, family)
    chol = np.linalg.cholesky(cov)                                 # (H, G, d, d)
    diff = y[None, None, :, :] - chain.mu[:, :, None, :]           # (H, G, n, d)
    sol = np.linalg.solve(chol, np.swapaxes(diff, -1, -2))         # (H, G, d, n)
    maha = (sol ** 2).sum(axis=-2)                                 # (H, G, n)
    logdet = 2 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(axis=-1)
    with np.errstate(divide="ignore"):
        logpi = np.log(chain.pi)
    logf = (logpi[:, :, None] - 0.5 * (maha + logdet[:, :, None] + d * math.log(2 * math.pi)))
    logp = logf - logsumexp(logf, axis=1, keepdims=True)
    return ClassificationProbs(np.exp(np.swapaxes(logp, 1, 2)))


def _scale_mixture_probs(y: np.ndarray, chain: MixtureChain) -> np.ndarray:
    """Components ``sum_s p_s N(mu_g, v_s I)``; ``phi`` rows hold the shared
    ``v_s`` and ``meta["sub_weights"]`` the ``p_s``."""
    if chain.phi is None or "sub_weights" not in chain.meta:
        raise ValueError("scale-mixture family needs phi sub-variances and meta['sub_weights']")
    p_s = np.asarray(chain.meta["sub_weights"], dtype=float)
    v = chain.phi                                                  # (H, S)
    if v.shape[1] != p_s.size:
        raise ValueError("phi width does not match the number of sub-weights")
    d = chain.d
    dist2 = ((y[None, None, :, :] - chain.mu[:, :, None, :]) ** 2).sum(axis=-1)   # (H, G, n)
    log_sub = (np.log(p_s)[None, :] - 0.5 * d * np.log(2 * math.pi * v))          # (H, S)
    logf = logsumexp(log_sub[:, None, None, :]
                     - 0.5 * dist2[..., None] / v[:, None, None, :], axis=-1)     # (H, G, n)
    with np.errstate(divide="ignore"):
        logf = logf + np.log(chain.pi)[:, :, None]
    logp = logf - logsumexp(logf, axis=1, keepdims=True)
    return np.exp(np.swapaxes(logp, 1, 2))


@dataclass(frozen=True, eq=False)
class KLResult:
    nu: np.ndarray          # (H, G) permutations
    Q: np.ndarray           # (n, G)
    losses: list
    iterations: int
    converged: bool


def permute_probs(p: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Rename components of ``p[h]`` by ``nu[h]``."""
    H, n, G = p.shape
    out = np.empty_like(p)
    out[np.arange(H)[:, None], :, nu] = np.swapaxes(p, 1, 2)
    return out


def _kl_total(p: np.ndarray, logp: np.ndarray, nu: np.ndarray, logQ: np.ndarray) -> float:
    pp = permute_probs(p, nu)
    lp = permute_probs(logp, nu)
    return float((pp * (lp - logQ[None])).sum())


def _best_perms(cost: np.ndarray, perms: np.ndarray | None) -> np.ndarray:
    """Per-iteration permutation minimising ``sum_k cost[h, k, nu[k]]``."""
    H, G, _ = cost.shape
    if perms is None:
        return np.array([linear_sum_assignment(cost[h])[1] for h in range(H)], dtype=np.int64)
    totals = cost[:, np.arange(G)[None, :], perms].sum(axis=2)             # (H, G!)
    return perms[np.argmin(totals, axis=1)]


def stephens_kl(probs: ClassificationProbs, max_iter: int = 100) -> KLResult:
    """Alternate between the mean classification matrix ``Q`` and the
    per-iteration permutations minimising ``KL(p_h || Q)``.

    Each iteration starts aligned to the first one (the permutation
    minimising its cross-entropy against ``p[0]``); from identity
    permutations a sample split evenly between two labellings is already a
    fixed point. A permutation only changes when another one is strictly
    better, so the loop ends at a fixed point. ``losses`` holds the total
    KL loss after each sweep; it never increases.
    """
    p = probs.p
    H, n, G = p.shape
    logp = np.log(np.maximum(p, PROB_FLOOR))
    perms = _all_perms(G) if G <= EXHAUSTIVE_MAX_G else None
    nu = _best_perms(-np.einsum("hik,ig->hkg", p, logp[0]), perms)
    losses = []
    converged = False
    it = 0
    logQ = None
    for it in range(1, max_iter + 1):
        Q = permute_probs(p, nu).mean(axis=0)
        logQ = np.log(np.maximum(Q, PROB_FLOOR))
        # cost[h, k, g]: cross-entropy of raw component k against group g
        cost = -np.einsum("hik,ig->hkg", p, logQ)
        current = cost[np.arange(H)[:, None], np.arange(G)[None, :], nu].sum(axis=1)
        best = _best_perms(cost, perms)
        best_cost = cost[np.arange(H)[:, None], np.arange(G)[None, :], best].sum(axis=1)
        better = best_cost < current
        losses.append(_kl_total(p, logp, nu, logQ))
        if not np.any(better):
            converged = True
            break
        nu = np.where(better[:, None], best, nu)
    Q = permute_probs(p, nu).mean(axis=0)
    return KLResult(nu=nu, Q=Q, losses=losses, iterations=it, converged=converged)


def stephens_relabel(chain: MixtureChain, result: KLResult) -> MixtureChain:
    return _tag(chain.permute_labels(result.nu), "stephens")


# --------------------------------------------------------------------------
# ordering constraint

def ordering_permutations(chain: MixtureChain, key: str = "mu-dim-1") -> np.ndarray:
    if key == "pi":
        values = chain.pi
    elif key.startswith("mu-dim-"):
        k = int(key[len("mu-dim-"):])
        if not 1 <= k <= chain.d:
            raise ValueError(f"mean dimension {k} outside 1..{chain.d}")
        values = chain.mu[:, :, k - 1]
    else:
        raise ValueError(f"unknown ordering key {key!r}; use 'pi' or 'mu-dim-K'")
    order = np.argsort(values, axis=1, kind="stable")
    perms = np.empty_like(order)
    perms[np.arange(chain.H)[:, None], order] = np.arange(chain.G)[None, :]
    return perms


def relabel_by_ordering(chain: MixtureChain, key: str = "mu-dim-1") -> MixtureChain:
    """Sort components ascending by ``key`` in every iteration (stable on ties)."""
    return _tag(chain.permute_labels(ordering_permutations(chain, key)), "ordering")
