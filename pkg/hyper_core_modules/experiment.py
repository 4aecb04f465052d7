#!/usr/bin/env python3
"""
hyper_core_modules/experiment.py

Grid runner: for every swept rate value and replicate, synthesize one
observation matrix from a fixed hypergraph, fit each model on it, evaluate
against the truth, then aggregate medians and percentile bands.

Run directory layout:
    cells.jsonl      one record per (value, replicate, model) cell
    aggregated.tsv   medians and 2.5/25/75/97.5 bands per (model, value)
    manifest.json    spec, structure summary, provenance
"""
import csv
import json
import logging
import multiprocessing
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from hyper_core_modules.estimators import PERCENTILES, evaluate_trace
from hyper_core_modules.gibbs import run_inference
from hyper_core_modules.io_formats import dump_json, structure_to_dict
from hyper_core_modules.likelihood import generate_observations
from hyper_core_modules.structures import Hypergraph, RateParams, project_labels
from stat_modules.config import PACKAGE_VERSION, ExperimentSpec
from stat_modules.math_core import make_rng

logger = logging.getLogger(__name__)

AGG_METRICS = ("epsilon", "entropy", "R0", "R1", "R2")


@dataclass(frozen=True)
class Cell:
    index: int
    model: str
    value_index: int
    value: float
    replicate: int
    obs_seed: int
    mcmc_seed: int


def derive_seed(master_seed: int, *key: int) -> int:
    """Deterministic 32-bit seed from the master seed and an index key."""
    return int(np.random.SeedSequence([int(master_seed), *map(int, key)]).generate_state(1)[0])


def plan_cells(spec: ExperimentSpec) -> List[Cell]:
    """
    Cells ordered by (value, replicate, model). Both models at one
    (value, replicate) share the observation seed, so they fit the same data.
    """
    cells = []
    for vi, value in enumerate(spec.sweep_values):
        for rep in range(spec.replicates):
            obs_seed = derive_seed(spec.master_seed, 0, vi, rep)
            for model in spec.models:
                idx = len(cells)
                cells.append(Cell(idx, model, vi, float(value), rep, obs_seed,
                                  derive_seed(spec.master_seed, 1, idx)))
    return cells


def run_cell(args: Tuple[ExperimentSpec, Hypergraph, Cell]) -> Dict:
    """One cell; failures are returned as records rather than raised."""
    spec, structure, cell = args
    record = {"cell": asdict(cell), "status": "ok", "error": None,
              "timestamp": datetime.now(timezone.utc).isoformat()}
    try:
        mu = RateParams(*spec.grid_mu(cell.value))
        x = generate_observations(project_labels(structure), mu, make_rng(cell.obs_seed))
        # pool workers are daemonic and cannot spawn the per-chain pool
        inner = spec.mcmc.n_workers if spec.n_workers == 1 else 1
        cfg = spec.mcmc.model_copy(update={"master_seed": cell.mcmc_seed, "n_workers": inner})
        trace = run_inference(cell.model, x, cfg, spec.hyperparams, spec.init_mode,
                              truth=structure, true_mu=mu)
        report = evaluate_trace(trace, x, structure, mu, make_rng(cell.mcmc_seed), spec.n_pred)
        record.update({
            "mu": list(mu.as_tuple()),
            "converged": trace.converged,
            "epsilon": report.epsilon,
            "entropy": report.entropy,
            "rho": report.rho,
            "residual_median": report.residuals["median"],
            "confusion": report.confusion,
            "single_type_rule": report.single_type_rule,
            "relabeled": report.relabeled,
        })
    except Exception as e:
        logger.warning("cell %d (%s, %s=%g, replicate %d) failed: %r",
                       cell.index, cell.model, spec.sweep, cell.value, cell.replicate, e)
        record.update({"status": "failed", "error": f"{type(e).__name__}: {e}"})
    return record


# ─── Aggregation ──────────────────────────────────────────────────────────────
def _metric_values(records: List[Dict], name: str) -> np.ndarray:
    if name.startswith("R"):
        k = int(name[1])
        vals = [r["residual_median"][k] for r in records]
    else:
        vals = [r[name] for r in records]
    vals = np.asarray(vals, dtype=float)
    return vals[np.isfinite(vals)]


def aggregate(records: List[Dict]) -> List[Dict]:
    """
    One row per (model, value): counts of ok/failed cells, then median and
    percentile bands of each metric over the ok replicates. A single replicate
    collapses every band onto its median.
    """
    groups: Dict[Tuple[str, float], List[Dict]] = {}
    for r in records:
        key = (r["cell"]["model"], r["cell"]["value"])
        groups.setdefault(key, []).append(r)
    rows = []
    for (model, value), recs in sorted(groups.items()):
        ok = [r for r in recs if r["status"] == "ok"]
        row = {"model": model, "value": value, "n_ok": len(ok), "n_failed": len(recs) - len(ok)}
        for name in AGG_METRICS:
            vals = _metric_values(ok, name) if ok else np.zeros(0)
            row[f"{name}_median"] = float(np.median(vals)) if vals.size else float("nan")
            for p in PERCENTILES:
                row[f"{name}_p{p:g}"] = float(np.percentile(vals, p)) if vals.size else float("nan")
        rows.append(row)
    return rows


def tsv_columns() -> List[str]:
    cols = ["model", "value", "n_ok", "n_failed"]
    for name in AGG_METRICS:
        cols.append(f"{name}_median")
        cols += [f"{name}_p{p:g}" for p in PERCENTILES]
    return cols


def write_aggregated_tsv(rows: List[Dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=tsv_columns(), delimiter="\t", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})


# ─── Orchestration ────────────────────────────────────────────────────────────
@dataclass
class ExperimentResult:
    records: List[Dict]
    rows: List[Dict]
    out_dir: Optional[Path] = None

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.records if r["status"] != "ok")


def run_experiment(spec: ExperimentSpec, structure: Hypergraph,
                   out_dir: Optional[Path] = None) -> ExperimentResult:
    """
    Run every cell (in a spawn pool when spec.n_workers > 1), append each
    record to cells.jsonl as it completes, then write the aggregate and manifest.
    """
    cells = plan_cells(spec)
    logger.info("experiment: %d cells (%d values x %d replicates x %d models), sweep %s",
                len(cells), len(spec.sweep_values), spec.replicates, len(spec.models), spec.sweep)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        cells_path = out_dir / "cells.jsonl"
        cells_path.write_text("", encoding="utf-8")

    jobs = [(spec, structure, c) for c in cells]
    records: List[Dict] = []

    def _keep(rec: Dict) -> None:
        records.append(rec)
        if out_dir is not None:
            with open(cells_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(rec, sort_keys=True) + "\n")

    if spec.n_workers > 1:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(processes=spec.n_workers) as pool:
            for rec in pool.imap(run_cell, jobs):
                _keep(rec)
    else:
        for job in jobs:
            _keep(run_cell(job))

    rows = aggregate(records)
    result = ExperimentResult(records, rows, out_dir)
    if result.n_failed:
        logger.warning("%d of %d cells failed", result.n_failed, len(records))
    if out_dir is not None:
        write_aggregated_tsv(rows, out_dir / "aggregated.tsv")
        dump_json({
            "spec": spec.model_dump(mode="json"),
            "structure": {"n": structure.n, "h1": structure.h1, "h2": structure.h2,
                          "edges": structure_to_dict(structure)},
            "n_cells": len(records),
            "n_failed": result.n_failed,
            "package_version": PACKAGE_VERSION,
            "created": datetime.now(timezone.utc).isoformat(),
            "files": ["cells.jsonl", "aggregated.tsv"],
        }, out_dir / "manifest.json")
    return result
