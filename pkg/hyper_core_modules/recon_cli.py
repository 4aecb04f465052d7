#!/usr/bin/env python3
"""
hyper_core_modules/recon_cli.py

Command-line driver:
    generate   <kind>    synthetic (or bipartite-derived) hypergraph file
    observe              Poisson pair counts from a structure file
    infer                MH-within-Gibbs fit, writes a result bundle
    evaluate             metrics JSON + plot-ready TSV against a ground truth
    experiment           rate-sweep grid with replicate aggregation

Exit codes: 0 success, 1 runtime/data error, 2 usage error.
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from hyper_core_modules.estimators import (
    N_PRED,
    edge_triangle_fraction,
    edgewise_estimate,
    evaluate_labels,
    map_estimate,
    marginal_label_estimate,
    posterior_predictive_residuals,
)
from hyper_core_modules.experiment import run_experiment
from hyper_core_modules.generators import (
    bipartite_to_hypergraph,
    generate_structure,
)
from hyper_core_modules.gibbs import run_inference
from hyper_core_modules.io_formats import (
    build_result_bundle,
    dump_json,
    read_bipartite,
    read_hypergraph,
    read_observations,
    read_result_bundle,
    read_structure,
    write_hypergraph,
    write_observations,
    write_result_bundle,
)
from hyper_core_modules.likelihood import generate_observations
from hyper_core_modules.structures import Hypergraph, RateParams, check_same_n, labels_of, model_of
from stat_modules.config import (
    MODELS,
    PACKAGE_VERSION,
    GeneratorSpec,
    McmcConfig,
    ObservationSpec,
    RunConfig,
    load_experiment_spec,
    load_run_config,
    validate_config,
)
from stat_modules.errors import ConfigError, ReconstructionError
from stat_modules.math_core import make_rng

logger = logging.getLogger("hyperrecon")

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2
LOG_FORMAT = "[%(name)s] %(levelname)s %(message)s"

EVAL_TSV_COLUMNS = ("metric", "i", "j", "value")

# flag → McmcConfig field
MCMC_FLAGS = {
    "seed": "master_seed",
    "chains": "n_chains",
    "window": "window_w",
    "iter_min": "iter_min",
    "iter_max": "iter_max",
    "samples": "n_samples",
    "stride": "sample_stride",
    "workers": "n_workers",
}


class UsageError(Exception):
    """Bad flag values detected after argparse (mapped to exit 2)."""


# ─── Helpers ──────────────────────────────────────────────────────────────────
def _mcmc_overrides(args) -> dict:
    over = {field: getattr(args, flag) for flag, field in MCMC_FLAGS.items()
            if getattr(args, flag, None) is not None}
    if getattr(args, "unit", None):
        over["iteration_unit"] = args.unit
    if getattr(args, "sweep_size", None) is not None:
        over["proposals_per_sweep"] = args.sweep_size
    return over


def _apply_mcmc(base: McmcConfig, args, desk: bool = False) -> McmcConfig:
    data = McmcConfig.desk().model_dump() if desk else base.model_dump()
    if desk:
        # explicit config values still win over the preset
        data.update({k: v for k, v in base.model_dump(exclude_defaults=True).items()})
    return validate_config(McmcConfig, data, _mcmc_overrides(args))


def _print_summary(h: Hypergraph) -> None:
    parts = [f"n={h.n}", f"h1={h.h1}", f"h2={h.h2}"]
    if h.h1:
        parts.append(f"E_delta={edge_triangle_fraction(h):.4f}")
        parts.append(f"E_delta_triangles={edge_triangle_fraction(h, within='triangles'):.4f}")
    else:
        parts.append("E_delta=undefined")
    print(" ".join(parts))


def _json_params(text: Optional[str]) -> dict:
    if not text:
        return {}
    try:
        params = json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"--params is not valid JSON ({e})") from e
    if not isinstance(params, dict):
        raise UsageError("--params must be a JSON object")
    return params


# ─── generate ─────────────────────────────────────────────────────────────────
def cmd_generate(args) -> int:
    if args.kind == "bipartite":
        if not args.input:
            raise UsageError("generate bipartite needs --input")
        h, mapping = bipartite_to_hypergraph(read_bipartite(args.input), args.max_group)
        if args.mapping:
            with open(args.mapping, "w", encoding="utf-8", newline="") as f:
                w = csv.writer(f, delimiter="\t", lineterminator="\n")
                w.writerow(["entity", "vertex"])
                for entity, v in sorted(mapping.items(), key=lambda kv: kv[1]):
                    w.writerow([entity, v])
    else:
        params = {}
        if args.kind == "sbm" and args.n is not None:
            raise UsageError("generate sbm takes its size from --params sizes, not --n")
        if args.kind in ("prior", "best"):
            for name in ("n", "p", "q"):
                if getattr(args, name) is None:
                    raise UsageError(f"generate {args.kind} needs --{name}")
            params = {"n": args.n, "p": args.p, "q": args.q}
        elif args.kind == "worst":
            params = {"n_cliques": args.cliques, "clique_size": args.size, "promote_prob": args.promote}
            if args.n is not None:
                params["n"] = args.n
        elif args.kind == "cm":
            params = {"n": args.n if args.n is not None else 100, "mean2": args.mean2, "mean3": args.mean3}
        elif args.kind == "beta":
            params = {"n": args.n if args.n is not None else 100}
        params.update(_json_params(args.params))
        try:
            spec = GeneratorSpec(kind=args.kind, params=params, seed=args.seed)
            h = generate_structure(spec)
        except (ConfigError, ValueError) as e:
            raise UsageError(str(e)) from e
    write_hypergraph(h, args.out)
    logger.info("wrote %s", args.out)
    _print_summary(h)
    return EXIT_OK


# ─── observe ──────────────────────────────────────────────────────────────────
def cmd_observe(args) -> int:
    structure = read_structure(args.structure)
    spec = validate_config(ObservationSpec, {"mu": args.mu, "seed": args.seed})
    mu = RateParams(*spec.mu)
    model = model_of(structure)
    if not mu.satisfies_order(model):
        raise ConfigError(f"rates {mu.as_tuple()} violate the {model} ordering")
    x = generate_observations(labels_of(structure), mu, make_rng(spec.seed))
    write_observations(x, args.out)
    logger.info("wrote %s (%d nonzero pairs, total count %d)", args.out,
                sum(1 for _ in x.nonzero_pairs()), x.total)
    return EXIT_OK


# ─── infer ────────────────────────────────────────────────────────────────────
def _run_config(args) -> RunConfig:
    base = load_run_config(args.config) if args.config else RunConfig()
    over = {"model": args.model}
    if args.init:
        over["init_mode"] = args.init
    if args.true_mu:
        over["true_mu"] = tuple(args.true_mu)
    cfg = validate_config(RunConfig, base.model_dump(), over)
    mcmc = _apply_mcmc(cfg.mcmc, args, desk=args.desk)
    return cfg.model_copy(update={"mcmc": mcmc})


def cmd_infer(args) -> int:
    cfg = _run_config(args)
    x = read_observations(args.observations)
    truth = true_mu = None
    if cfg.init_mode == "ground_truth":
        if not args.truth or cfg.true_mu is None:
            raise ConfigError("ground_truth initialization needs --truth and --true-mu (or config true_mu)")
        truth = read_structure(args.truth)
        check_same_n(truth, x)
        true_mu = RateParams(*cfg.true_mu)
    trace = run_inference(cfg.model, x, cfg.mcmc, cfg.hyperparams, cfg.init_mode,
                          truth=truth, true_mu=true_mu)
    marginal = marginal_label_estimate(trace, make_rng(cfg.mcmc.master_seed))
    bundle = build_result_bundle(cfg, trace, x.n, map_estimate(trace), edgewise_estimate(trace), marginal)
    write_result_bundle(bundle, args.out)
    print(f"model={trace.model} chain_seed={trace.seed} converged={trace.converged} "
          f"samples={len(trace.samples)} mean_loglik={trace.mean_sample_log_likelihood():.4f}")
    return EXIT_OK


# ─── evaluate ─────────────────────────────────────────────────────────────────
def metrics_rows(report) -> List[tuple]:
    """Long-format rows (metric, i, j, value) for plotting."""
    rows = [("epsilon", "", "", report.epsilon), ("entropy", "", "", report.entropy)]
    rows += [("rho", k, "", v) for k, v in enumerate(report.rho)]
    if report.e_delta is not None:
        rows.append(("e_delta", "", "", report.e_delta))
        rows.append(("e_delta_triangles", "", "", report.e_delta_triangles))
    if report.residuals is not None:
        rows += [("R", k, "median", v) for k, v in enumerate(report.residuals["median"])]
        for p, vals in report.residuals["percentiles"].items():
            rows += [("R", k, f"p{float(p):g}", v) for k, v in enumerate(vals)]
    for r, row in enumerate(report.confusion):
        rows += [("confusion", r, s, v) for s, v in enumerate(row)]
    for r, row in enumerate(report.normalized_confusion):
        rows += [("normalized_confusion", r, s, v) for s, v in enumerate(row)]
    return rows


def cmd_evaluate(args) -> int:
    bundle = read_result_bundle(args.result)
    truth = read_structure(args.truth)
    predicted = bundle.marginal_label_matrix()
    check_same_n(truth, predicted)
    true_mu = RateParams(*args.true_mu) if args.true_mu else (
        RateParams(*bundle.config.true_mu) if bundle.config.true_mu else None)
    bands = None
    if args.observations:
        x = read_observations(args.observations)
        check_same_n(x, predicted)
        bands = posterior_predictive_residuals(x, bundle.to_trace(), args.n_pred, make_rng(args.seed))
    report = evaluate_labels(labels_of(truth), predicted, bundle.model, true_mu, truth, bands)
    dump_json({"metrics": report.to_dict(), "result": str(args.result), "truth": str(args.truth),
               "config_hash": bundle.provenance.config_hash}, args.out_json)
    if args.out_tsv:
        with open(args.out_tsv, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, delimiter="\t", lineterminator="\n")
            w.writerow(EVAL_TSV_COLUMNS)
            w.writerows(metrics_rows(report))
    print(f"epsilon={report.epsilon:.4f} entropy={report.entropy:.4f}")
    bundle.metrics = report.to_dict()
    if args.update:
        write_result_bundle(bundle, args.result)
    return EXIT_OK


# ─── experiment ───────────────────────────────────────────────────────────────
def cmd_experiment(args) -> int:
    over = {}
    if args.replicates is not None:
        over["replicates"] = args.replicates
    if args.sweep:
        over["sweep"] = args.sweep
    if args.values:
        over["sweep_values"] = args.values
    if args.grid_workers is not None:
        over["n_workers"] = args.grid_workers
    if args.seed is not None:
        over["master_seed"] = args.seed
    spec = load_experiment_spec(args.spec, over)
    spec = spec.model_copy(update={"mcmc": _apply_mcmc(spec.mcmc, args)})
    if spec.structure_file:
        structure = read_hypergraph(spec.structure_file)
    else:
        structure = generate_structure(spec.generator)
    _print_summary(structure)
    result = run_experiment(spec, structure, Path(args.out))
    print(f"cells={len(result.records)} failed={result.n_failed} out={args.out}")
    return EXIT_OK


# ─── Parser ───────────────────────────────────────────────────────────────────
def _add_mcmc_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("sampler overrides")
    g.add_argument("--seed", type=int, help="master seed (chain k uses seed+k)")
    g.add_argument("--chains", type=int)
    g.add_argument("--window", type=int, help="convergence window W")
    g.add_argument("--iter-min", dest="iter_min", type=int)
    g.add_argument("--iter-max", dest="iter_max", type=int)
    g.add_argument("--samples", type=int, help="retained samples per chain")
    g.add_argument("--stride", type=int, help="gibbs iterations between retained samples")
    g.add_argument("--workers", type=int, help="processes for the chains")
    g.add_argument("--unit", choices=("proposal", "sweep"), help="convergence counting unit")
    g.add_argument("--sweep-size", dest="sweep_size", type=int, help="structure proposals per gibbs iteration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperrecon",
                                     description="Hypergraph reconstruction from pairwise interaction counts.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {PACKAGE_VERSION}")
    parser.add_argument("--log-level", default="INFO",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a hypergraph file")
    g.add_argument("kind", choices=("prior", "sbm", "cm", "beta", "best", "worst", "bipartite"))
    g.add_argument("-o", "--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=float, help="3-edge probability")
    g.add_argument("--q", type=float, help="2-edge probability")
    g.add_argument("--cliques", type=int, default=20)
    g.add_argument("--size", type=int, default=5)
    g.add_argument("--promote", type=float, default=0.19)
    g.add_argument("--mean2", type=float, default=2.0)
    g.add_argument("--mean3", type=float, default=3.0)
    g.add_argument("--input", help="entity,group CSV for kind=bipartite")
    g.add_argument("--max-group", dest="max_group", type=int, default=5)
    g.add_argument("--mapping", help="write the entity → vertex table here")
    g.add_argument("--params", help="JSON object of generator parameters, e.g. SBM sizes/q/p_in/p_out "
                                    "or beta-model mean2/sd2/mean3/sd3; overrides the flags above")
    g.set_defaults(func=cmd_generate)

    o = sub.add_parser("observe", help="sample Poisson counts for a structure")
    o.add_argument("--structure", required=True)
    o.add_argument("--mu", type=float, nargs=3, required=True, metavar=("MU0", "MU1", "MU2"))
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("-o", "--out", required=True)
    o.set_defaults(func=cmd_observe)

    i = sub.add_parser("infer", help="run the sampler on an observation CSV")
    i.add_argument("--observations", required=True)
    i.add_argument("--model", choices=MODELS, required=True)
    i.add_argument("--config", help="RunConfig JSON")
    i.add_argument("--init", choices=("mixture", "ground_truth"))
    i.add_argument("--truth", help="structure file for ground-truth initialization")
    i.add_argument("--true-mu", dest="true_mu", type=float, nargs=3, metavar=("MU0", "MU1", "MU2"))
    i.add_argument("--desk", action="store_true", help="reduced convergence windows")
    i.add_argument("-o", "--out", required=True)
    _add_mcmc_flags(i)
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("evaluate", help="metrics for a result bundle against a ground truth")
    e.add_argument("--result", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--observations", help="observation CSV for posterior-predictive residuals")
    e.add_argument("--true-mu", dest="true_mu", type=float, nargs=3, metavar=("MU0", "MU1", "MU2"))
    e.add_argument("--n-pred", dest="n_pred", type=int, default=N_PRED)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out-json", dest="out_json", required=True)
    e.add_argument("--out-tsv", dest="out_tsv")
    e.add_argument("--update", action="store_true", help="store the metrics in the result bundle")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="rate-sweep grid")
    x.add_argument("--spec", required=True, help="ExperimentSpec JSON")
    x.add_argument("--out", required=True, help="run directory")
    x.add_argument("--replicates", type=int)
    x.add_argument("--sweep", choices=("mu1", "mu2"))
    x.add_argument("--values", type=float, nargs="+")
    x.add_argument("--grid-workers", dest="grid_workers", type=int, help="processes across cells")
    _add_mcmc_flags(x)
    x.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ReconstructionError, OSError, ValueError) as e:
        print(f"{parser.prog}: {e}", file=sys.stderr)
        logger.debug("command failed", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
