"""Evaluation of relabelled chains against known component means."""

from __future__ import annotations

import numpy as np

from ..baselines import best_assignment
from ..chain_store import MixtureChain


def match_components(estimates, truth) -> np.ndarray:
    """Row ``k`` of the result is the index of the estimate matched to ``truth[k]``,
    chosen to minimise the total Euclidean distance."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    tru = np.atleast_2d(np.asarray(truth, dtype=float))
    if est.shape != tru.shape:
        raise ValueError(f"{est.shape[0]} estimates cannot be matched to {tru.shape[0]} true means")
    dist = np.linalg.norm(tru[:, None, :] - est[None, :, :], axis=2)
    return best_assignment(dist, maximize=False)


def component_mse(estimates, truth) -> np.ndarray:
    """``||mu_g - mu_hat_g||`` per true component after optimal matching."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    tru = np.atleast_2d(np.asarray(truth, dtype=float))
    match = match_components(est, tru)
    return np.linalg.norm(tru - est[match], axis=1)


def estimate_component_means(chain: MixtureChain) -> np.ndarray:
    """Coordinatewise posterior median of each component mean, ``(G, d)``."""
    if chain.H == 0:
        raise ValueError("empty chain")
    return np.median(chain.mu, axis=0)


def _key_values(chain: MixtureChain, key: str) -> np.ndarray:
    if key == "pi":
        return chain.pi
    if key.startswith("mu-dim-"):
        k = int(key[len("mu-dim-"):])
        return chain.mu[:, :, k - 1]
    raise ValueError(f"unknown key {key!r}")


def switch_rate(chain: MixtureChain, key: str = "mu-dim-1") -> float:
    """Fraction of consecutive iterations whose component ranking by ``key`` changes."""
    if chain.H < 2:
        raise ValueError("switch rate needs at least two iterations")
    order = np.argsort(_key_values(chain, key), axis=1, kind="stable")
    changed = np.any(order[1:] != order[:-1], axis=1)
    return float(changed.mean())
