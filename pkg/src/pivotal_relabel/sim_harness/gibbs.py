"""Conjugate Gibbs samplers for finite Gaussian mixtures.

Each component has a normal-inverse-gamma (univariate) or
normal-inverse-Wishart (multivariate) prior, ``mu | Sigma ~ N(m0, Sigma / kappa0)``,
and the weights a symmetric Dirichlet prior. One sweep draws

1. allocations given parameters,
2. weights given allocations,
3. ``(mu_g, Sigma_g)`` jointly from their conjugate posterior given allocations
   (a prior draw when the component is empty).

With ``permute_move`` a uniformly random relabelling of all component
quantities follows every sweep. The posterior is invariant under it, so the
chain visits all label permutations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp

from ..chain_store import PHI_COMPONENT, Dataset, MixtureChain


@dataclass(frozen=True)
class PriorSpec:
    """Conjugate hyperparameters.

    ``dof`` is the inverse-gamma shape ``a0`` (d = 1) or the inverse-Wishart
    degrees of freedom ``nu0`` (d >= 2). ``scale`` is ``b0`` or ``Psi0``.
    """

    mean: np.ndarray
    kappa: float
    dof: float
    scale: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        scale = np.asarray(self.scale, dtype=float)
        d = mean.size
        if scale.ndim == 0:
            scale = scale.reshape(1, 1)
        if scale.shape != (d, d):
            raise ValueError(f"scale must be {d}x{d}")
        if self.kappa <= 0 or self.alpha <= 0:
            raise ValueError("kappa and alpha must be strictly positive")
        if d == 1 and self.dof <= 0:
            raise ValueError("inverse-gamma shape must be strictly positive")
        if d > 1 and self.dof <= d - 1:
            raise ValueError(f"inverse-Wishart dof must exceed {d - 1}")
        if np.any(np.linalg.eigvalsh(scale) <= 0):
            raise ValueError("scale must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def default(cls, data: Dataset, kappa: float = 0.01, alpha: float = 1.0) -> "PriorSpec":
        """Weakly informative prior centred on the data.

        Prior mean of ``mu`` is the sample mean and the prior mean of each
        component covariance is the sample covariance.
        """
        y = data.observations
        d = data.d
        cov = np.atleast_2d(np.cov(y, rowvar=False))
        if d == 1:
            a0 = 2.0
            return cls(y.mean(axis=0), kappa, a0, cov * (a0 - 1), alpha)
        nu0 = d + 2.0
        cov = cov + 1e-9 * np.trace(cov) / d * np.eye(d)
        return cls(y.mean(axis=0), kappa, nu0, cov * (nu0 - d - 1), alpha)

    @classmethod
    def range_based(cls, data: Dataset, share: float = 0.02, alpha: float = 1.0) -> "PriorSpec":
        """Prior scaled by the data range ``R`` (per coordinate).

        Means are centred on the midrange. The prior mean of each component
        variance is ``share * R**2`` with two degrees of freedom' worth of
        weight, and ``kappa = share`` so that the marginal prior spread of a
        mean is about ``R``. Suited to well separated, narrow components,
        where a scale taken from the pooled data variance swamps the
        within-component spread.
        """
        y = data.observations
        lo, hi = y.min(axis=0), y.max(axis=0)
        R2 = np.maximum((hi - lo) ** 2, 1e-12)
        d = data.d
        if d == 1:
            return cls((lo + hi) / 2, share, 2.0, np.diag(share * R2), alpha)
        dof = d + 2.0
        return cls((lo + hi) / 2, share, dof, np.diag(share * R2) * (dof - d - 1), alpha)

    def posterior(self, n_g: int, ybar: np.ndarray, scatter: np.ndarray):
        """Conjugate update given ``n_g`` points with mean ``ybar`` and scatter matrix."""
        k0, m0 = self.kappa, self.mean
        kn = k0 + n_g
        mn = (k0 * m0 + n_g * ybar) / kn
        dev = (ybar - m0)[:, None]
        if self.mean.size == 1:
            dofn = self.dof + n_g / 2
            scalen = self.scale + scatter / 2 + k0 * n_g / (2 * kn) * dev @ dev.T
        else:
            dofn = self.dof + n_g
            scalen = self.scale + scatter + k0 * n_g / kn * dev @ dev.T
        return mn, kn, dofn, scalen


def _draw_cov(rng: np.random.Generator, dof: float, scale: np.ndarray) -> np.ndarray:
    d = scale.shape[0]
    if d == 1:
        # inverse gamma(shape=dof, rate=scale)
        return np.array([[scale[0, 0] / rng.gamma(dof)]])
    # Bartlett: Sigma^{-1} ~ Wishart(dof, scale^{-1})
    L = np.linalg.cholesky(np.linalg.inv(scale))
    A = np.zeros((d, d))
    A[np.diag_indices(d)] = np.sqrt(rng.chisquare(dof - np.arange(d)))
    A[np.tril_indices(d, -1)] = rng.standard_normal(d * (d - 1) // 2)
    LA = L @ A
    prec = LA @ LA.T
    cov = np.linalg.inv(prec)
    return (cov + cov.T) / 2


def _log_densities(y: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """``(n, G)`` Gaussian log-densities."""
    d = y.shape[1]
    chol = np.linalg.cholesky(cov)                              # (G, d, d)
    diff = y[None, :, :] - mu[:, None, :]                       # (G, n, d)
    sol = np.linalg.solve(chol, np.swapaxes(diff, 1, 2))        # (G, d, n)
    maha = (sol ** 2).sum(axis=1)
    logdet = 2 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
    return (-0.5 * (maha + logdet[:, None] + d * math.log(2 * math.pi))).T


def _sample_allocations(rng, logw: np.ndarray) -> np.ndarray:
    logw = logw - logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    cum = np.cumsum(w, axis=1)
    u = rng.uniform(size=(w.shape[0], 1)) * cum[:, -1:]
    z = (cum < u).sum(axis=1)
    return np.minimum(z, w.shape[1] - 1)


def _initial_means(rng: np.random.Generator, y: np.ndarray, G: int) -> np.ndarray:
    # k-means++ start; falls back to distinct data points on degenerate data
    try:
        centres, _ = kmeans2(y, G, minit="++", seed=rng)
    except (ValueError, np.linalg.LinAlgError):
        centres = None
    if centres is None or not np.all(np.isfinite(centres)):
        centres = y[rng.choice(y.shape[0], size=G, replace=False)]
    return np.array(centres, dtype=float)


def _gibbs(data: Dataset, G: int, H: int, burnin: int, prior: PriorSpec | None,
           permute_move: bool, seed: int, sampler: str) -> MixtureChain:
    if G < 1:
        raise ValueError("G must be positive")
    if G > data.n:
        raise ValueError(f"G = {G} exceeds the number of units n = {data.n}")
    if burnin < 0 or H <= burnin:
        raise ValueError(f"need H > burnin >= 0, got H={H}, burnin={burnin}")
    y = data.observations
    n, d = y.shape
    prior = PriorSpec.default(data) if prior is None else prior
    if prior.mean.size != d:
        raise ValueError(f"prior is {prior.mean.size}-dimensional, data is {d}-dimensional")
    rng = np.random.default_rng(seed)

    mu = _initial_means(rng, y, G)
    cov = np.repeat(np.atleast_2d(np.cov(y, rowvar=False))[None] + 1e-9 * np.eye(d), G, axis=0)
    if d == 1 and np.all(cov == 1e-9):
        cov[:] = 1.0
    pi = np.full(G, 1.0 / G)
    alpha = np.full(G, prior.alpha)

    keep = H - burnin
    Z = np.empty((keep, n), dtype=np.int64)
    MU = np.empty((keep, G, d))
    PI = np.empty((keep, G))
    COV = np.empty((keep, G, d, d))
    for t in range(H):
        with np.errstate(divide="ignore"):
            logw = np.log(pi)[None, :] + _log_densities(y, mu, cov)
        z = _sample_allocations(rng, logw)
        counts = np.bincount(z, minlength=G)
        pi = rng.dirichlet(alpha + counts)
        for g in range(G):
            members = y[z == g]
            n_g = members.shape[0]
            if n_g:
                ybar = members.mean(axis=0)
                dev = members - ybar
                scatter = dev.T @ dev
            else:
                ybar = np.zeros(d)
                scatter = np.zeros((d, d))
            mn, kn, dofn, scalen = prior.posterior(n_g, ybar, scatter)
            cov[g] = _draw_cov(rng, dofn, scalen)
            mu[g] = mn + np.linalg.cholesky(cov[g] / kn) @ rng.standard_normal(d)
        if permute_move:
            perm = rng.permutation(G)       # old component k -> perm[k]
            inv = np.argsort(perm)
            z = perm[z]
            mu, pi, cov = mu[inv], pi[inv], cov[inv]
        if t >= burnin:
            k = t - burnin
            Z[k] = z + 1
            MU[k] = mu
            PI[k] = pi
            COV[k] = cov
    meta = {"sampler": sampler, "seed": int(seed), "burnin_removed": True,
            "burnin": int(burnin), "permute_move": bool(permute_move)}
    return MixtureChain(z=Z, mu=MU, pi=PI, phi=COV.reshape(keep, G * d * d),
                        meta=meta, phi_layout=PHI_COMPONENT)


def gibbs_univariate(data: Dataset, G: int, H: int, burnin: int = 0,
                     prior: PriorSpec | None = None, permute_move: bool = False,
                     seed: int = 0) -> MixtureChain:
    """Gibbs sampler for a univariate Gaussian mixture with component variances.

    ``H`` counts all sweeps including burn-in; the returned chain holds the
    last ``H - burnin``. ``phi`` stores the component variances.
    """
    if data.d != 1:
        raise ValueError("gibbs_univariate needs one-dimensional data")
    return _gibbs(data, G, H, burnin, prior, permute_move, seed, "gibbs-univariate")


def gibbs_multivariate(data: Dataset, G: int, H: int, burnin: int = 0,
                       prior: PriorSpec | None = None, permute_move: bool = False,
                       seed: int = 0) -> MixtureChain:
    """Gibbs sampler for a multivariate Gaussian mixture with full component
    covariances (flattened row-major into ``phi``, one ``d x d`` block per
    component).

    A degenerate sample scatter is harmless because the inverse-Wishart
    scale ``Psi0`` is added to it before every covariance draw.
    """
    if data.d < 2:
        raise ValueError("gibbs_multivariate needs d >= 2")
    return _gibbs(data, G, H, burnin, prior, permute_move, seed, "gibbs-multivariate")


def conjugate_posterior_mean(data: Dataset, prior: PriorSpec) -> np.ndarray:
    """Closed-form posterior mean of ``mu`` for a single-component model."""
    y = data.observations
    return (prior.kappa * prior.mean + y.shape[0] * y.mean(axis=0)) / (prior.kappa + y.shape[0])


def gibbs_scale_mixture(data: Dataset, G: int, H: int, burnin: int = 0,
                        sub_weights=(0.2, 0.8), sub_variances=(1.0, 200.0),
                        prior_mean=None, prior_var: float | None = None,
                        alpha: float = 1.0, permute_move: bool = False,
                        seed: int = 0, restarts: int = 5, pilot: int = 50) -> MixtureChain:
    """Gibbs sampler for a mixture of spherical Gaussian scale mixtures.

    Component ``g`` has density ``sum_s p_s N(mu_g, v_s I)`` with the
    sub-weights ``p_s`` and sub-variances ``v_s`` held fixed; means and
    weights are sampled. Each unit carries a latent ``(group, sub-component)``
    pair drawn jointly. Means get independent ``N(prior_mean, prior_var I)``
    priors, by default centred on the data with the average coordinate
    variance as ``prior_var``.

    A tight sub-component can lock onto a chance clump of wide-sub-component
    points and stay there, so ``restarts`` k-means++ starts are each run for
    ``pilot`` sweeps and the chain continues from the one with the highest
    log-likelihood.

    ``phi`` holds the (shared, fixed) sub-variances; the sub-weights are
    recorded in ``meta``.
    """
    if G < 1 or G > data.n:
        raise ValueError(f"G must be in 1..{data.n}")
    if burnin < 0 or H <= burnin:
        raise ValueError(f"need H > burnin >= 0, got H={H}, burnin={burnin}")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    y = data.observations
    n, d = y.shape
    p_s = np.asarray(sub_weights, dtype=float)
    v_s = np.asarray(sub_variances, dtype=float)
    if p_s.shape != v_s.shape or np.any(v_s <= 0) or not np.isclose(p_s.sum(), 1):
        raise ValueError("sub_weights must sum to one and sub_variances be positive")
    m0 = y.mean(axis=0) if prior_mean is None else np.asarray(prior_mean, dtype=float)
    tau2 = float(y.var(axis=0).mean()) if prior_var is None else float(prior_var)
    if tau2 <= 0:
        raise ValueError("prior_var must be positive")
    rng = np.random.default_rng(seed)
    S = p_s.size
    log_ps = np.log(p_s) - 0.5 * d * np.log(2 * np.pi * v_s)
    sq = (y ** 2).sum(axis=1)

    def log_weights(mu, pi):
        dist2 = sq[:, None] - 2 * y @ mu.T + (mu ** 2).sum(axis=1)[None, :]   # (n, G)
        with np.errstate(divide="ignore"):
            return (np.log(pi)[None, :, None] + log_ps[None, None, :]
                    - 0.5 * dist2[:, :, None] / v_s[None, None, :]).reshape(n, G * S)

    def sweep(mu, pi):
        flat = _sample_allocations(rng, log_weights(mu, pi))
        z, s = np.divmod(flat, S)
        pi = rng.dirichlet(alpha + np.bincount(z, minlength=G))
        w = 1.0 / v_s[s]
        prec = np.bincount(z, weights=w, minlength=G) + 1.0 / tau2
        wsum = np.stack([np.bincount(z, weights=w * y[:, j], minlength=G) for j in range(d)], axis=1)
        mean = (wsum + m0[None, :] / tau2) / prec[:, None]
        mu = mean + rng.standard_normal((G, d)) / np.sqrt(prec)[:, None]
        return z, mu, pi

    best = None
    for _ in range(restarts):
        mu, pi = _initial_means(rng, y, G), np.full(G, 1.0 / G)
        for _ in range(pilot):
            _, mu, pi = sweep(mu, pi)
        ll = float(logsumexp(log_weights(mu, pi), axis=1).sum())
        if best is None or ll > best[0]:
            best = (ll, mu, pi)
    _, mu, pi = best

    keep = H - burnin
    Z = np.empty((keep, n), dtype=np.int64)
    MU = np.empty((keep, G, d))
    PI = np.empty((keep, G))
    for t in range(H):
        z, mu, pi = sweep(mu, pi)
        if permute_move:
            perm = rng.permutation(G)
            inv = np.argsort(perm)
            z = perm[z]
            mu, pi = mu[inv], pi[inv]
        if t >= burnin:
            k = t - burnin
            Z[k] = z + 1
            MU[k] = mu
            PI[k] = pi
    meta = {"sampler": "gibbs-scale-mixture", "seed": int(seed), "burnin_removed": True,
            "burnin": int(burnin), "permute_move": bool(permute_move),
            "sub_weights": p_s.tolist()}
    phi = np.tile(v_s, (keep, 1))
    return MixtureChain(z=Z, mu=MU, pi=PI, phi=phi, meta=meta)
