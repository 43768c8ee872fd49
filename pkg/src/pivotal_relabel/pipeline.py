"""End-to-end runs: simulate or load data, sample, relabel, evaluate, write reports.

Stage seeds are derived from the master seed as
``SeedSequence([seed, replication, stage]).generate_state(1)[0]`` with
``stage`` 0 for data generation, 1 for the sampler and 2 for EM
initialisation. Re-running one stage with the same master seed therefore
reproduces its inputs exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .chain_store import Dataset, MixtureChain, load_dataset, save_chain
from .partitioning import Partition, default_candidates, hclust_complete, select_partition
from .pivotal import (
    ALL_CRITERIA,
    MUS_MAX_GROUPS,
    MUSError,
    NoValidIterationsError,
    RelabelResult,
    pivotal_relabel,
)
from .similarity import dissimilarity, estimate_group_probs, estimate_similarity
from .sim_harness.gibbs import (
    PriorSpec,
    gibbs_multivariate,
    gibbs_scale_mixture,
    gibbs_univariate,
)
from .sim_harness.metrics import component_mse, estimate_component_means, switch_rate
from .sim_harness.scenarios import SCENARIO_MEANS, ScenarioSpec, generate_scenario

log = logging.getLogger(__name__)

BASELINES = ("pk", "stephens", "ordering")
MODELS = ("auto", "scale-mixture", "gaussian")
PRIORS = ("data", "range")
STAGE_DATA, STAGE_SAMPLER, STAGE_EM = 0, 1, 2


class ConfigError(ValueError):
    """Invalid pipeline configuration (exit code 1)."""


class StageError(RuntimeError):
    """A pipeline stage failed; the message starts with the stage name."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage
        self.cause = exc


def stage_seed(seed: int, replication: int, stage: int) -> int:
    return int(np.random.SeedSequence([seed, replication, stage]).generate_state(1)[0])


@dataclass
class PipelineConfig:
    """Parameters of one pipeline or comparison run.

    ``iters`` counts all sampler sweeps; the first ``burnin`` are dropped.
    ``G_hat`` defaults to ``G``.
    """

    scenario: str | None = None
    data: str | None = None
    n: int = 1000
    G: int = 4
    G_hat: int | None = None
    iters: int = 3000
    burnin: int = 500
    seed: int = 0
    criterion: str = "b"
    mus_M: int = 5
    mus_eps: float = 0.0
    linkage: str = "complete"
    partition: str = "hclust"
    model: str = "auto"
    prior: str = "data"
    permute_move: bool = True
    baselines: list = field(default_factory=list)
    ordering_key: str = "mu-dim-1"
    reps: int = 1
    out: str | None = None
    normalize_q: bool = False

    def __post_init__(self):
        if self.G_hat is None:
            self.G_hat = self.G

    def validate(self) -> None:
        if (self.scenario is None) == (self.data is None):
            raise ConfigError("give exactly one of --scenario or --data")
        if self.scenario is not None and self.scenario not in SCENARIO_MEANS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.data is not None and not Path(self.data).is_file():
            raise ConfigError(f"data file {self.data!r} does not exist")
        for name in ("n", "G", "G_hat", "iters", "reps", "mus_M"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.burnin < 0 or self.iters <= self.burnin:
            raise ConfigError("need iters > burnin >= 0")
        if self.criterion not in ALL_CRITERIA:
            raise ConfigError(f"unknown criterion {self.criterion!r}")
        if self.criterion == "mus" and self.G_hat > MUS_MAX_GROUPS:
            raise ConfigError(f"MUS capped at G_hat <= {MUS_MAX_GROUPS}, got {self.G_hat}")
        if self.criterion == "mus" and self.G_hat < 2:
            raise ConfigError("MUS needs G_hat >= 2")
        if self.linkage != "complete":
            raise ConfigError(f"unsupported linkage {self.linkage!r}; only 'complete'")
        if self.partition not in ("hclust", "binder"):
            raise ConfigError(f"unknown partition method {self.partition!r}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.prior not in PRIORS:
            raise ConfigError(f"unknown prior {self.prior!r}; expected one of {PRIORS}")
        if self.mus_eps < 0:
            raise ConfigError("mus_eps must be non-negative")
        bad = [b for b in self.baselines if b not in BASELINES]
        if bad:
            raise ConfigError(f"unknown baseline(s) {bad}; expected {BASELINES}")


@dataclass
class Replication:
    """Everything one replication produced."""

    replication: int
    data: Dataset
    truth: np.ndarray | None
    chain: MixtureChain
    partition: Partition
    result: RelabelResult | None
    error: str | None
    family: str
    seconds: dict


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (NoValidIterationsError, MUSError, ConfigError):
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise StageError(name, exc) from exc


def load_or_generate(cfg: PipelineConfig, replication: int):
    """``(dataset, true means or None)`` for one replication."""
    if cfg.scenario is not None:
        sample = generate_scenario(ScenarioSpec(cfg.scenario, n=cfg.n),
                                   stage_seed(cfg.seed, replication, STAGE_DATA))
        return sample.data, sample.true_means
    data, _ = load_dataset(cfg.data)
    return data, None


def sample_chain(cfg: PipelineConfig, data: Dataset, replication: int):
    """Run the configured sampler; returns ``(chain, classification family)``."""
    seed = stage_seed(cfg.seed, replication, STAGE_SAMPLER)
    model = cfg.model
    if model == "auto":
        model = "scale-mixture" if cfg.scenario is not None else "gaussian"
    if model == "scale-mixture":
        spec = ScenarioSpec(cfg.scenario or "A")
        chain = gibbs_scale_mixture(data, cfg.G, cfg.iters, cfg.burnin,
                                    sub_weights=spec.sub_weights, sub_variances=spec.sub_scales,
                                    permute_move=cfg.permute_move, seed=seed)
        return chain, baselines.SCALE_MIXTURE
    prior = PriorSpec.range_based(data) if cfg.prior == "range" else PriorSpec.default(data)
    if data.d == 1:
        chain = gibbs_univariate(data, cfg.G, cfg.iters, cfg.burnin, prior=prior,
                                 permute_move=cfg.permute_move, seed=seed)
        return chain, baselines.UNIVARIATE
    chain = gibbs_multivariate(data, cfg.G, cfg.iters, cfg.burnin, prior=prior,
                               permute_move=cfg.permute_move, seed=seed)
    return chain, baselines.MULTIVARIATE


def reference_partition(cfg: PipelineConfig, chain: MixtureChain, sim) -> Partition:
    if cfg.partition == "binder":
        return select_partition(default_candidates(chain, sim, cfg.G_hat), sim)
    return hclust_complete(dissimilarity(sim), cfg.G_hat, cfg.linkage)[0]


def run_replication(cfg: PipelineConfig, replication: int) -> Replication:
    seconds = {}
    t0 = time.perf_counter()
    data, truth = _stage("simulate", load_or_generate, cfg, replication)
    chain, family = _stage("sample", sample_chain, cfg, data, replication)
    seconds["sample"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    sim = _stage("similarity", estimate_similarity, chain)
    part = _stage("cluster", reference_partition, cfg, chain, sim)
    error, result = None, None
    try:
        result = _stage("relabel", pivotal_relabel, chain, sim, part, cfg.criterion,
                        cfg.mus_M, cfg.mus_eps)
    except (NoValidIterationsError, MUSError) as exc:
        error = str(exc)
    seconds["pivotal"] = time.perf_counter() - t1
    return Replication(replication, data, truth, chain, part, result, error, family, seconds)


def _method_metrics(chain: MixtureChain | None, truth, key: str) -> dict:
    out = {"estimates": None, "mse": None, "switch_rate": None}
    if chain is None or chain.H == 0:
        return out
    est = estimate_component_means(chain)
    out["estimates"] = est
    if truth is not None and est.shape == truth.shape:
        out["mse"] = component_mse(est, truth)
    if chain.H >= 2:
        out["switch_rate"] = switch_rate(chain, key)
    return out


def run_baseline(name: str, cfg: PipelineConfig, rep: Replication) -> MixtureChain:
    chain = rep.chain
    if name == "ordering":
        return baselines.relabel_by_ordering(chain, cfg.ordering_key)
    if name == "pk":
        em = baselines.pk_em(chain, seed=stage_seed(cfg.seed, rep.replication, STAGE_EM))
        return baselines.pk_relabel(chain, em)
    if name == "stephens":
        probs = baselines.classification_probs(rep.data, chain, rep.family)
        return baselines.stephens_relabel(chain, baselines.stephens_kl(probs))
    raise ConfigError(f"unknown baseline {name!r}")


def _label(cfg: PipelineConfig) -> str:
    return cfg.scenario if cfg.scenario is not None else Path(cfg.data).stem


def _map(fn, items):
    threads = int(os.environ.get("PIVOTAL_THREADS", "1") or 1)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class _RepRunner:
    # picklable callable for process pools
    def __init__(self, cfg, compare):
        self.cfg, self.compare = cfg, compare

    def __call__(self, r):
        rep = run_replication(self.cfg, r)
        rows = {}
        rows["pivotal"] = _pivotal_rows(self.cfg, rep)
        if self.compare:
            for name in self.cfg.baselines:
                t = time.perf_counter()
                out = _stage(f"baseline:{name}", run_baseline, name, self.cfg, rep)
                m = _method_metrics(out, rep.truth, self.cfg.ordering_key)
                m["seconds"] = time.perf_counter() - t
                m["kept_proportion"] = 1.0
                rows[name] = m
        return rep, rows


def _pivotal_rows(cfg: PipelineConfig, rep: Replication) -> dict:
    chain = rep.result.chain if rep.result is not None else None
    m = _method_metrics(chain, rep.truth, cfg.ordering_key)
    m["seconds"] = rep.seconds["pivotal"]
    m["kept_proportion"] = rep.result.kept_proportion if rep.result is not None else 0.0
    m["error"] = rep.error
    return m


def _write_outputs(cfg: PipelineConfig, reps: list, rows: list, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    label = _label(cfg)
    metrics_path = out / "metrics.csv"
    summary_path = out / "summary.csv"
    estimates_path = out / "estimates.csv"
    timing_path = out / "timing.csv"
    with metrics_path.open("w", newline="") as fm, summary_path.open("w", newline="") as fs, \
            estimates_path.open("w", newline="") as fe, timing_path.open("w", newline="") as ft:
        wm, ws, we, wt = csv.writer(fm), csv.writer(fs), csv.writer(fe), csv.writer(ft)
        wm.writerow(["scenario", "method", "replication", "component", "value"])
        ws.writerow(["scenario", "method", "replication", "kept_proportion", "switch_rate"])
        we.writerow(["scenario", "method", "replication", "component", "coordinate", "estimate"])
        wt.writerow(["scenario", "method", "replication", "seconds"])
        for rep, methods in zip(reps, rows):
            for name, m in methods.items():
                method = f"pivotal-{cfg.criterion}" if name == "pivotal" else name
                if m["mse"] is not None:
                    for g, v in enumerate(m["mse"], start=1):
                        wm.writerow([label, method, rep.replication, g, repr(float(v))])
                sr = "" if m["switch_rate"] is None else repr(float(m["switch_rate"]))
                ws.writerow([label, method, rep.replication, repr(float(m["kept_proportion"])), sr])
                if m["estimates"] is not None:
                    for g, row in enumerate(m["estimates"], start=1):
                        for j, v in enumerate(row, start=1):
                            we.writerow([label, method, rep.replication, g, j, repr(float(v))])
                wt.writerow([label, method, rep.replication, f"{m['seconds']:.4f}"])

    first = reps[0]
    report = {"config": asdict(cfg), "replications": []}
    for rep in reps:
        entry = {"replication": rep.replication, "error": rep.error,
                 "raw_switch_rate": switch_rate(rep.chain, cfg.ordering_key) if rep.chain.H > 1 else None}
        if rep.result is not None:
            entry.update(rep.result.report())
        report["replications"].append(entry)
    if first.result is not None:
        save_chain(first.result.chain, out / "relabelled_chain.ndjson")
        q = estimate_group_probs(first.result.chain, normalize=True) if cfg.normalize_q else \
            estimate_group_probs(first.result.chain)
        np.savetxt(out / "group_probs.csv", q.q, delimiter=",", fmt="%.17g")
        _write_trace(first.result.chain, out / "trace_relabelled.csv")
    _write_trace(first.chain, out / "trace_raw.csv")
    (out / "report.json").write_text(json.dumps(report, indent=2, default=_json_default) + "\n")
    return report


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def _write_trace(chain: MixtureChain, path: Path) -> None:
    """Long-format mean traces for plotting: iteration, component, coordinate, value."""
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "component", "coordinate", "value"])
        for h in range(chain.H):
            for g in range(chain.G):
                for j in range(chain.d):
                    w.writerow([h + 1, g + 1, j + 1, repr(float(chain.mu[h, g, j]))])


@dataclass
class RunOutcome:
    replications: list
    rows: list
    report: dict | None
    exit_code: int


def _run(cfg: PipelineConfig, compare: bool) -> RunOutcome:
    cfg.validate()
    if compare and not cfg.baselines:
        raise ConfigError("compare needs at least one --baseline")
    results = _map(_RepRunner(cfg, compare), list(range(cfg.reps)))
    reps = [r for r, _ in results]
    rows = [m for _, m in results]
    report = None
    if cfg.out is not None:
        report = _write_outputs(cfg, reps, rows, Path(cfg.out))
    code = 2 if all(r.result is None for r in reps) else 0
    for r in reps:
        if r.error:
            log.warning("replication %d: %s", r.replication, r.error)
    return RunOutcome(reps, rows, report, code)


def run_pipeline(cfg: PipelineConfig) -> RunOutcome:
    """Generate or load data, sample, cluster, select pivots, relabel and
    evaluate, for ``cfg.reps`` replications. Exit code 2 means no replication
    had any valid iteration."""
    return _run(cfg, compare=False)


def run_compare(cfg: PipelineConfig) -> RunOutcome:
    """Like :func:`run_pipeline`, plus each baseline on the same chains,
    with per-method estimates, errors, switch rates and wall-clock times."""
    return _run(cfg, compare=True)
