"""Command-line interface: ``pivotal-relabel <subcommand> [options]``.

Exit codes: 0 on success, 1 on configuration or input errors, 2 when
relabelling is impossible (no valid iterations, or no separated MUS pivots).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines
from .chain_store import ChainFormatError, load_chain, load_dataset, save_chain, save_dataset
from .partitioning import save_partition_csv
from .pipeline import (
    BASELINES,
    MODELS,
    PRIORS,
    ConfigError,
    PipelineConfig,
    StageError,
    _json_default,
    reference_partition,
    run_compare,
    run_pipeline,
    sample_chain,
    stage_seed,
    STAGE_DATA,
    STAGE_EM,
)
from .pivotal import ALL_CRITERIA, MUS_MAX_GROUPS, MUSError, NoValidIterationsError, pivotal_relabel
from .similarity import estimate_group_probs, estimate_similarity
from .sim_harness.metrics import component_mse, estimate_component_means, switch_rate
from .sim_harness.scenarios import SCENARIO_MEANS, ScenarioSpec, generate_scenario

log = logging.getLogger("pivotal_relabel")


def _source(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", choices=sorted(SCENARIO_MEANS))
    src.add_argument("--data", metavar="PATH", help="CSV with columns y1..yd[,true_label]")


def _sampler(p):
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--G", type=int, default=4)
    p.add_argument("--iters", type=int, default=3000, help="total sweeps, burn-in included")
    p.add_argument("--burnin", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", choices=MODELS, default="auto")
    p.add_argument("--prior", choices=PRIORS, default="data",
                   help="Gaussian-model prior: pooled data scatter or data range")
    p.add_argument("--no-permute-move", dest="permute_move", action="store_false")


def _relabeller(p, g_hat_required=False):
    p.add_argument("--G-hat", dest="G_hat", type=int, required=g_hat_required)
    p.add_argument("--criterion", choices=ALL_CRITERIA, default="b")
    p.add_argument("--mus-M", dest="mus_M", type=int, default=5)
    p.add_argument("--mus-eps", dest="mus_eps", type=float, default=0.0)
    p.add_argument("--linkage", default="complete")
    p.add_argument("--partition", choices=("hclust", "binder"), default="hclust")
    p.add_argument("--normalize-q", dest="normalize_q", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pivotal-relabel",
                                     description="Relabel MCMC output of finite mixtures by pivotal units.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a scenario dataset")
    p.add_argument("--scenario", choices=sorted(SCENARIO_MEANS), required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sample", help="run a Gibbs sampler and write a chain file")
    _source(p)
    _sampler(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("relabel", help="pivotal relabelling of a chain file")
    p.add_argument("--chain", required=True)
    _relabeller(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("baseline", help="relabel a chain file with a baseline method")
    p.add_argument("--chain", required=True)
    p.add_argument("--baseline", choices=BASELINES, action="append", required=True)
    p.add_argument("--data", help="dataset the chain was fitted to (stephens)")
    p.add_argument("--family", choices=baselines.FAMILIES)
    p.add_argument("--ordering-key", default="mu-dim-1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("metrics", help="summarise a chain file")
    p.add_argument("--chain", required=True)
    p.add_argument("--scenario", choices=sorted(SCENARIO_MEANS), help="compare with true means")
    p.add_argument("--key", default="mu-dim-1")

    for name, text in (("pipeline", "simulate, sample, relabel and evaluate"),
                       ("compare", "pipeline plus baseline methods")):
        p = sub.add_parser(name, help=text)
        _source(p)
        _sampler(p)
        _relabeller(p)
        p.add_argument("--baseline", choices=None, action="append", default=[],
                       help=f"one of {', '.join(BASELINES)}; repeatable")
        p.add_argument("--ordering-key", default="mu-dim-1")
        p.add_argument("--reps", type=int, default=1)
        p.add_argument("--out")
    return parser


def _config(args) -> PipelineConfig:
    return PipelineConfig(
        scenario=args.scenario, data=args.data, n=args.n, G=args.G, G_hat=args.G_hat,
        iters=args.iters, burnin=args.burnin, seed=args.seed, criterion=args.criterion,
        mus_M=args.mus_M, mus_eps=args.mus_eps, linkage=args.linkage, partition=args.partition,
        model=args.model, prior=args.prior, permute_move=args.permute_move, baselines=list(args.baseline),
        ordering_key=args.ordering_key, reps=args.reps, out=args.out, normalize_q=args.normalize_q)


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sample = generate_scenario(ScenarioSpec(args.scenario, n=args.n),
                               stage_seed(args.seed, 0, STAGE_DATA))
    save_dataset(sample.data, out / "data.csv", sample.true_labels)
    np.savetxt(out / "true_means.csv", sample.true_means, delimiter=",", fmt="%.17g")
    return 0


def cmd_sample(args) -> int:
    cfg = PipelineConfig(scenario=args.scenario, data=args.data, n=args.n, G=args.G,
                         iters=args.iters, burnin=args.burnin, seed=args.seed,
                         model=args.model, prior=args.prior, permute_move=args.permute_move)
    cfg.validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.scenario is not None:
        sample = generate_scenario(ScenarioSpec(cfg.scenario, n=cfg.n),
                                   stage_seed(cfg.seed, 0, STAGE_DATA))
        data = sample.data
        save_dataset(data, out / "data.csv", sample.true_labels)
    else:
        data, _ = load_dataset(cfg.data)
    chain, family = sample_chain(cfg, data, 0)
    chain = chain.__class__(z=chain.z, mu=chain.mu, pi=chain.pi, phi=chain.phi,
                            meta={**chain.meta, "family": family}, phi_layout=chain.phi_layout)
    save_chain(chain, out / "chain.ndjson")
    return 0


def cmd_relabel(args) -> int:
    chain = load_chain(args.chain)
    G_hat = args.G_hat or chain.G
    if args.criterion == "mus" and G_hat > MUS_MAX_GROUPS:
        raise ConfigError(f"MUS capped at G_hat <= {MUS_MAX_GROUPS}, got {G_hat}")
    if args.linkage != "complete":
        raise ConfigError(f"unsupported linkage {args.linkage!r}; only 'complete'")
    cfg = PipelineConfig(scenario="A", G=chain.G, G_hat=G_hat, partition=args.partition)
    sim = estimate_similarity(chain)
    part = reference_partition(cfg, chain, sim)
    result = pivotal_relabel(chain, sim, part, args.criterion, args.mus_M, args.mus_eps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_chain(result.chain, out / "relabelled_chain.ndjson")
    save_partition_csv(part, out / "partition.csv")
    q = estimate_group_probs(result.chain, normalize=args.normalize_q)
    np.savetxt(out / "group_probs.csv", q.q, delimiter=",", fmt="%.17g")
    _write_json(result.report(), out / "report.json")
    print(json.dumps(result.report(), sort_keys=True, default=_json_default))
    return 0


def cmd_baseline(args) -> int:
    chain = load_chain(args.chain)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {}
    for name in args.baseline:
        if name == "ordering":
            res = baselines.relabel_by_ordering(chain, args.ordering_key)
            info = {"key": args.ordering_key}
        elif name == "pk":
            em = baselines.pk_em(chain, seed=stage_seed(args.seed, 0, STAGE_EM))
            res = baselines.pk_relabel(chain, em)
            info = {"em_iterations": em.iterations, "converged": em.converged,
                    "loglik": em.loglik}
        else:
            if args.data is None:
                raise ConfigError("stephens needs --data")
            data, _ = load_dataset(args.data)
            family = args.family or chain.meta.get("family")
            if family is None:
                family = baselines.UNIVARIATE if chain.d == 1 else baselines.MULTIVARIATE
            kl = baselines.stephens_kl(baselines.classification_probs(data, chain, family))
            res = baselines.stephens_relabel(chain, kl)
            info = {"iterations": kl.iterations, "converged": kl.converged,
                    "losses": kl.losses}
        save_chain(res, out / f"{name}_chain.ndjson")
        report[name] = info
    _write_json(report, out / "baseline_report.json")
    return 0


def cmd_metrics(args) -> int:
    chain = load_chain(args.chain)
    est = estimate_component_means(chain)
    report = {"H": chain.H, "G": chain.G, "estimates": est.tolist()}
    if chain.H >= 2:
        report["switch_rate"] = switch_rate(chain, args.key)
    if args.scenario is not None:
        truth = ScenarioSpec(args.scenario).mean_array
        if est.shape == truth.shape:
            report["mse"] = component_mse(est, truth).tolist()
    print(json.dumps(report, sort_keys=True, default=_json_default))
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    outcome = run_compare(cfg) if args.command == "compare" else run_pipeline(cfg)
    for rep, methods in zip(outcome.replications, outcome.rows):
        for name, m in methods.items():
            mse = None if m["mse"] is None else np.round(m["mse"], 3).tolist()
            print(f"rep={rep.replication} method={name} kept={m['kept_proportion']:.3f} "
                  f"mse={mse} seconds={m['seconds']:.2f}")
        if rep.error:
            print(f"rep={rep.replication} error: {rep.error}", file=sys.stderr)
    return outcome.exit_code


COMMANDS = {"simulate": cmd_simulate, "sample": cmd_sample, "relabel": cmd_relabel,
            "baseline": cmd_baseline, "metrics": cmd_metrics,
            "pipeline": cmd_run, "compare": cmd_run}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (NoValidIterationsError, MUSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ChainFormatError, StageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
