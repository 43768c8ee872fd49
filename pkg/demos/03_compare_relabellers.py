"""Pivotal relabelling against three benchmark relabellers on one chain.

* ordering: sort components by their first mean coordinate,
* pk: EM on the Bernoulli mixture of allocation indicators,
* stephens: Kullback-Leibler relabelling of classification probabilities.

Run:  python demos/03_compare_relabellers.py
"""

import time

import numpy as np

from pivotal_relabel import baselines as bl
from pivotal_relabel import dissimilarity, estimate_similarity, hclust_complete, pivotal_relabel
from pivotal_relabel.sim_harness import (
    ScenarioSpec,
    component_mse,
    estimate_component_means,
    generate_scenario,
    gibbs_scale_mixture,
    switch_rate,
)

sample = generate_scenario(ScenarioSpec("C", n=400), seed=2)
chain = gibbs_scale_mixture(sample.data, 4, 1300, 300, permute_move=True, seed=8)


def pivotal(c):
    sim = estimate_similarity(c)
    return pivotal_relabel(c, sim, hclust_complete(dissimilarity(sim), 4)[0], "f").chain


methods = {
    "pivotal (f)": pivotal,
    "ordering": bl.relabel_by_ordering,
    "pk": lambda c: bl.pk_relabel(c, bl.pk_em(c, seed=0)),
    "stephens": lambda c: bl.stephens_relabel(
        c, bl.stephens_kl(bl.classification_probs(sample.data, c, bl.SCALE_MIXTURE))),
}

print(f"{'method':12} {'seconds':>8} {'switch':>7}  per-component error")
for name, fn in methods.items():
    t = time.perf_counter()
    out = fn(chain)
    secs = time.perf_counter() - t
    err = component_mse(estimate_component_means(out), sample.true_means)
    print(f"{name:12} {secs:8.2f} {switch_rate(out):7.3f}  {np.round(err, 2).tolist()}")
