"""Acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (visible even without
``-s``) and then asserts. Run on its own with::

    pytest tests/test_acceptance.py -v

Items 1-3 share one set of simulation runs (three scenarios, ten
replications each), computed once per session.
"""

import functools
import itertools
import time

import numpy as np
import pytest

from pivotal_relabel import baselines as bl
from pivotal_relabel.chain_store import Dataset
from pivotal_relabel.partitioning import (
    Partition,
    enumerate_partitions,
    expected_binder_loss,
    expected_distance_mcmc,
    hclust_complete,
    select_partition,
)
from pivotal_relabel.pipeline import PipelineConfig, run_replication
from pivotal_relabel.pivotal import (
    ALL_CRITERIA,
    MUSError,
    NoValidIterationsError,
    PivotSet,
    pivotal_relabel,
    select_pivots,
    select_pivots_mus,
)
from pivotal_relabel.similarity import dissimilarity, estimate_group_probs, estimate_similarity
from pivotal_relabel.sim_harness import (
    PriorSpec,
    component_mse,
    conjugate_posterior_mean,
    estimate_component_means,
    generate_fishery_like,
    gibbs_multivariate,
    gibbs_univariate,
    switch_rate,
)

from _chains import block_chain, random_chain, random_perms
from test_partitioning import naive_complete_linkage, random_dissim
from test_pivotal import brute_force_mus

N, ITERS, BURNIN, B = 500, 1800, 300, 10     # 1500 retained iterations
MASTER_SEED = 0
MUS_EPS = 0.01

pytestmark = pytest.mark.slow


@pytest.fixture(autouse=True)
def _report(capsys, request):
    lines = []
    yield lines
    with capsys.disabled():
        for line in lines:
            print(f"\n{line}", end="")


def _verdict(lines, item, ok, detail):
    lines.append(f"{'PASS' if ok else 'FAIL'} [{item}] {detail}")
    return ok


def _anchored(result):
    p = result.pivots.pivots
    z_ok = np.all(result.chain.z[:, p] == np.arange(1, len(p) + 1)[None, :])
    q = estimate_group_probs(result.chain, normalize=True).q
    return bool(z_ok and np.all(np.abs(q.sum(axis=1) - 1) <= 1e-12))


@functools.lru_cache(maxsize=None)
def scenario_runs(scenario):
    """Per replication: kept proportion and per-component error of every
    criterion, plus PK errors in Scenario B."""
    cfg = PipelineConfig(scenario=scenario, n=N, iters=ITERS, burnin=BURNIN, seed=MASTER_SEED,
                         criterion="b", mus_eps=MUS_EPS)
    kept = {k: [] for k in ALL_CRITERIA}
    mse = {k: [] for k in ALL_CRITERIA}
    mse["pk"] = []
    anchored = True
    start = time.perf_counter()
    for r in range(B):
        rep = run_replication(cfg, r)
        sim = estimate_similarity(rep.chain)
        for k in ALL_CRITERIA:
            try:
                res = pivotal_relabel(rep.chain, sim, rep.partition, k, 5, MUS_EPS)
            except (NoValidIterationsError, MUSError):
                kept[k].append(0.0)
                mse[k].append(np.full(4, np.nan))
                continue
            anchored &= _anchored(res)
            kept[k].append(res.kept_proportion)
            est = estimate_component_means(res.chain)
            mse[k].append(component_mse(est, rep.truth) if est.shape == rep.truth.shape
                          else np.full(4, np.nan))
        if scenario == "B":
            em = bl.pk_em(rep.chain, seed=r)
            pk = bl.pk_relabel(rep.chain, em)
            mse["pk"].append(component_mse(estimate_component_means(pk), rep.truth))
    return {"kept": {k: float(np.mean(v)) for k, v in kept.items()},
            "mse": {k: np.mean(v, axis=0) for k, v in mse.items() if v},
            "anchored": anchored, "seconds": time.perf_counter() - start}


def test_item1_kept_proportion_ordering(_report):
    runs = {s: scenario_runs(s) for s in "ABC"}
    checks = []
    for s in "AB":
        for k in "bef":
            checks.append(runs[s]["kept"][k] >= 0.95)
    for s in "ABC":
        kp = runs[s]["kept"]
        checks.append(all(kp["c"] < kp[k] for k in ALL_CRITERIA if k != "c"))
    checks.append(runs["C"]["kept"]["c"] < 0.25)
    secs = sum(r["seconds"] for r in runs.values())
    table = "; ".join(f"{s}: " + " ".join(f"{k}={runs[s]['kept'][k]:.3f}" for k in ALL_CRITERIA)
                      for s in "ABC")
    ok = all(checks) and secs <= 15 * 60
    _verdict(_report, "1 kept-proportion ordering", ok, f"{table}; {secs:.0f}s")
    assert ok


def test_item2_mse_separation(_report):
    m = scenario_runs("B")["mse"]
    ratio = m["c"] / m["b"]
    sep = int(np.sum(ratio >= 2))
    group = np.vstack([m[k] for k in ("b", "e", "f", "mus")])
    spread = group.max(axis=0) / group.min(axis=0)
    ok = sep >= 3 and bool(np.all(spread <= 1.25))
    detail = (f"c/b ratio per component {np.round(ratio, 2).tolist()} ({sep}/4 >= 2); "
              f"max/min over b,e,f,mus {np.round(spread, 3).tolist()}")
    _verdict(_report, "2 MSE separation", ok, detail)
    assert ok


def test_item3_pk_gap(_report):
    m = scenario_runs("B")["mse"]
    worse = int(np.sum(m["pk"] > m["b"]))
    ok = worse >= 3
    detail = (f"PK {np.round(m['pk'], 3).tolist()} vs b {np.round(m['b'], 3).tolist()}; "
              f"PK worse on {worse}/4")
    _verdict(_report, "3 PK baseline gap", ok, detail)
    assert ok


def test_item4_fishery_pipeline(_report):
    start = time.perf_counter()
    sample = generate_fishery_like(256, seed=MASTER_SEED)
    prior = PriorSpec.range_based(sample.data)
    chain = gibbs_univariate(sample.data, 5, 3000 + 300, 300, prior=prior,
                             permute_move=True, seed=1)
    sim = estimate_similarity(chain)
    part = hclust_complete(dissimilarity(sim), 5)[0]
    res = pivotal_relabel(chain, sim, part, "b")
    raw, post = switch_rate(chain), switch_rate(res.chain)
    secs = time.perf_counter() - start
    ok = raw >= 0.01 and post == 0 and res.kept_proportion >= 0.8 and secs <= 120
    detail = (f"raw switch rate {raw:.3f}, relabelled {post:.3f}, "
              f"kept {res.kept_proportion:.3f}, {secs:.1f}s")
    _verdict(_report, "4 fishery-style pipeline", ok, detail)
    assert ok


def _valid_small_chain(rng):
    n = int(rng.integers(4, 11))
    G = int(rng.integers(2, 5))
    H = int(rng.integers(2, 51))
    groups = rng.integers(1, G + 1, size=n)
    groups[:G] = np.arange(1, G + 1)
    return block_chain(rng, groups, H=H, noise=0.1), groups


def test_item5_equivariance(_report):
    rng = np.random.default_rng(5)
    failures, relabelled = 0, 0
    for _ in range(100):
        chain, groups = _valid_small_chain(rng)
        swapped = chain.permute_labels(random_perms(rng, chain.H, chain.G))
        s1, s2 = estimate_similarity(chain), estimate_similarity(swapped)
        if not np.array_equal(s1.c, s2.c):
            failures += 1
            continue
        part = Partition(groups)
        try:
            a = pivotal_relabel(chain, s1, part, "b")
        except NoValidIterationsError:
            try:
                pivotal_relabel(swapped, s2, part, "b")
                failures += 1
            except NoValidIterationsError:
                pass
            continue
        b = pivotal_relabel(swapped, s2, part, "b")
        relabelled += 1
        same = (a.chain.equals(b.chain) and a.pivots == b.pivots
                and np.array_equal(a.filter.H0, b.filter.H0)
                and a.kept_proportion == b.kept_proportion)
        failures += not same
    ok = failures == 0 and relabelled >= 50
    _verdict(_report, "5 equivariance", ok,
             f"100 chains, {relabelled} relabelled, {failures} mismatches")
    assert ok


def test_item6_oracles(_report):
    rng = np.random.default_rng(6)
    bad = {"hclust": 0, "mus": 0, "partition": 0, "binder": 0}
    for _ in range(100):
        n = int(rng.integers(1, 13))
        d = random_dissim(rng, n, grid=int(rng.choice([4, 10, 1000])))
        G_hat = int(rng.integers(1, n + 1))
        bad["hclust"] += hclust_complete(d, G_hat)[0] != naive_complete_linkage(d, G_hat)

    mus_cases = 0
    for _ in range(100):
        G_hat = int(rng.integers(2, 4))
        n = int(rng.integers(G_hat, 13))
        groups = rng.integers(1, G_hat + 1, size=n)
        groups[:G_hat] = np.arange(1, G_hat + 1)
        sim = estimate_similarity(block_chain(rng, groups, H=12, noise=0.3))
        part = Partition(groups)
        M = int(rng.integers(1, 5))
        eps = float(rng.choice([0.0, 0.1, 0.25]))
        want = brute_force_mus(sim.c, part.labels, M, eps)
        try:
            got = select_pivots_mus(sim, part, M, eps).pivots.tolist()
        except MUSError:
            got = None
        bad["mus"] += got != want
        mus_cases += want is not None

    for _ in range(50):
        n = int(rng.integers(2, 9))
        G_hat = int(rng.integers(1, 4))
        sim = estimate_similarity(random_chain(rng, H=15, n=n, G=3))
        cands = list(enumerate_partitions(n, G_hat))
        losses = [expected_binder_loss(p, sim) for p in cands]
        bad["partition"] += select_partition(cands, sim) != cands[int(np.argmin(losses))]

    for _ in range(100):
        n = int(rng.integers(2, 11))
        chain = random_chain(rng, H=int(rng.integers(1, 40)), n=n, G=int(rng.integers(1, 5)))
        z_star = rng.integers(1, 4, size=n)
        gap = abs(expected_distance_mcmc(z_star, chain)
                  - expected_binder_loss(z_star, estimate_similarity(chain)))
        bad["binder"] += gap > 1e-10

    ok = not any(bad.values())
    _verdict(_report, "6 oracle equivalence", ok,
             f"mismatches {bad}; MUS cases with a solution {mus_cases}/100")
    assert ok


def test_item7_monotonicity(_report):
    rng = np.random.default_rng(7)
    em_bad = kl_bad = 0
    for s in range(50):
        chain = random_chain(rng, H=int(rng.integers(2, 40)), n=int(rng.integers(2, 12)),
                             G=int(rng.integers(2, 5)))
        em = bl.pk_em(chain, seed=s, tol=0.0, max_iter=100)
        em_bad += bool(np.any(np.diff(em.history) < -1e-9))
        p = rng.dirichlet(np.full(chain.G, 0.5), size=(chain.H, chain.n))
        kl = bl.stephens_kl(bl.ClassificationProbs(p))
        kl_bad += bool(np.any(np.diff(kl.losses) > 0))
    ok = em_bad == 0 and kl_bad == 0
    _verdict(_report, "7 monotonicity", ok,
             f"50 chains: EM decreases {em_bad}, KL increases {kl_bad}")
    assert ok


def test_item8_anchoring_and_normalisation(_report):
    rng = np.random.default_rng(8)
    outputs = bad = 0
    for _ in range(100):
        chain, groups = _valid_small_chain(rng)
        sim = estimate_similarity(chain)
        for k in ALL_CRITERIA:
            try:
                res = pivotal_relabel(chain, sim, Partition(groups), k, 5, 0.2)
            except (NoValidIterationsError, MUSError):
                continue
            outputs += 1
            bad += not _anchored(res)
    scen = all(scenario_runs(s)["anchored"] for s in "ABC")
    ok = bad == 0 and outputs > 0 and scen
    _verdict(_report, "8 anchoring and normalisation", ok,
             f"{outputs} random outputs, {bad} violations; scenario outputs ok={scen}")
    assert ok


def test_item9_conjugacy(_report):
    rng = np.random.default_rng(9)
    uni = Dataset(rng.normal(3.0, 2.0, size=40))
    p1 = PriorSpec(mean=[0.0], kappa=0.5, dof=3.0, scale=[[2.0]])
    bi = Dataset(rng.multivariate_normal([1.0, -2.0], [[1.0, 0.5], [0.5, 2.0]], size=30))
    p2 = PriorSpec(mean=[0.0, 0.0], kappa=1.0, dof=4.0, scale=np.eye(2))
    zs = []
    for chain, data, prior in ((gibbs_univariate(uni, 1, 4000, 100, prior=p1, seed=1), uni, p1),
                               (gibbs_multivariate(bi, 1, 4000, 100, prior=p2, seed=2), bi, p2)):
        draws = chain.mu[:, 0, :]
        se = draws.std(axis=0, ddof=1) / np.sqrt(draws.shape[0])
        zs.extend(((draws.mean(axis=0) - conjugate_posterior_mean(data, prior)) / se).tolist())
    ok = all(abs(z) <= 3 for z in zs)
    _verdict(_report, "9 conjugacy", ok, f"z-scores {np.round(zs, 2).tolist()}")
    assert ok
