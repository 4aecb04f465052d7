#!/usr/bin/env python3
"""
hyper_core_modules/io_formats.py

Text formats for hypergraphs, categorical graphs, sparse observation CSVs and
bipartite edge lists, plus the JSON run-config and result-bundle documents.

Hypergraph file:
    # format_version=1
    n 34
    e2 0 1
    e3 0 1 2

Observation CSV (zero counts implicit):
    # format_version=1
    # n=34
    i,j,count
    0,1,41
"""
import csv
import hashlib
import io
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from dateutil.parser import isoparse
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from hyper_core_modules.structures import (
    CategoricalGraph,
    GraphProbs,
    Hypergraph,
    HypergraphProbs,
    LabelMatrix,
    ObservationMatrix,
    RateParams,
    Structure,
    n_pairs,
    pair_index,
)
from hyper_core_modules.trace import ChainTrace, PosteriorSample
from stat_modules.config import FORMAT_VERSION, PACKAGE_VERSION, RunConfig, load_run_config
from stat_modules.errors import FormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
VERSION_TAG = "format_version="


# ─── Shared line handling ─────────────────────────────────────────────────────
def _read_text(path: PathLike) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _write_text(path: PathLike, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _check_version_comment(body: str, lineno: int) -> None:
    body = body.strip()
    if not body.startswith(VERSION_TAG):
        return
    value = body[len(VERSION_TAG):].strip()
    if value != str(FORMAT_VERSION):
        raise FormatError(f"unsupported format_version {value!r} (expected {FORMAT_VERSION})", lineno)


def _parse_int(token: str, lineno: int, column: Optional[int], what: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise FormatError(f"{what} {token!r} is not an integer", lineno, column) from None
    if value < 0:
        raise FormatError(f"{what} {value} is negative", lineno, column)
    return value


def _parse_vertices(tokens: List[str], n: int, lineno: int) -> Tuple[int, ...]:
    vs = []
    for col, tok in enumerate(tokens, start=2):
        v = _parse_int(tok, lineno, col, "vertex")
        if v >= n:
            raise FormatError(f"vertex {v} out of range for n={n}", lineno, col)
        vs.append(v)
    if len(set(vs)) != len(vs):
        raise FormatError(f"repeated vertex in {tuple(vs)}", lineno)
    return tuple(sorted(vs))


def _parse_edge_records(text: str, kinds: Dict[str, int]) -> Tuple[int, Dict[str, List[tuple]]]:
    """
    Shared parser for "n <count>" headed edge lists. `kinds` maps each record
    keyword to its arity.
    """
    n: Optional[int] = None
    seen: Dict[tuple, int] = {}
    records: Dict[str, List[tuple]] = {k: [] for k in kinds}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            _check_version_comment(line[1:], lineno)
            continue
        tokens = line.split()
        key = tokens[0]
        if key == "n":
            if n is not None:
                raise FormatError("duplicate 'n' header", lineno)
            if len(tokens) != 2:
                raise FormatError("header must read 'n <count>'", lineno)
            n = _parse_int(tokens[1], lineno, 2, "vertex count")
            continue
        if key not in kinds:
            raise FormatError(f"unknown record {key!r}", lineno, 1)
        if n is None:
            raise FormatError("edge record before the 'n' header", lineno)
        if len(tokens) != kinds[key] + 1:
            raise FormatError(f"'{key}' takes {kinds[key]} vertices, got {len(tokens) - 1}", lineno)
        edge = _parse_vertices(tokens[1:], n, lineno)
        if edge in seen:
            raise FormatError(f"duplicate edge {edge} (first on line {seen[edge]})", lineno)
        seen[edge] = lineno
        records[key].append(edge)
    if n is None:
        raise FormatError("missing 'n <count>' header")
    return n, records


# ─── Hypergraph / categorical graph ───────────────────────────────────────────
def format_hypergraph(h: Hypergraph) -> str:
    lines = [f"# {VERSION_TAG}{FORMAT_VERSION}", f"n {h.n}"]
    lines += [f"e2 {i} {j}" for i, j in sorted(h.two_edges)]
    lines += [f"e3 {i} {j} {k}" for i, j, k in sorted(h.three_edges)]
    return "\n".join(lines) + "\n"


def parse_hypergraph(text: str) -> Hypergraph:
    n, rec = _parse_edge_records(text, {"e2": 2, "e3": 3})
    return Hypergraph(n, rec["e2"], rec["e3"])


def format_categorical(g: CategoricalGraph) -> str:
    lines = [f"# {VERSION_TAG}{FORMAT_VERSION}", f"n {g.n}"]
    lines += [f"weak {i} {j}" for i, j in sorted(g.weak_edges)]
    lines += [f"strong {i} {j}" for i, j in sorted(g.strong_edges)]
    return "\n".join(lines) + "\n"


def parse_categorical(text: str) -> CategoricalGraph:
    # a pair may carry one label only, so weak/strong share the duplicate check
    n, rec = _parse_edge_records(text, {"weak": 2, "strong": 2})
    return CategoricalGraph(n, rec["weak"], rec["strong"])


def read_structure(path: PathLike) -> Structure:
    """Hypergraph or categorical graph, detected from the record keywords."""
    text = _read_text(path)
    for raw in text.splitlines():
        tok = raw.split()
        if tok and tok[0] in ("weak", "strong"):
            return parse_categorical(text)
    return parse_hypergraph(text)


def write_structure(s: Structure, path: PathLike) -> None:
    text = format_hypergraph(s) if isinstance(s, Hypergraph) else format_categorical(s)
    _write_text(path, text)


def read_hypergraph(path: PathLike) -> Hypergraph:
    return parse_hypergraph(_read_text(path))


def write_hypergraph(h: Hypergraph, path: PathLike) -> None:
    _write_text(path, format_hypergraph(h))


# ─── Observation CSV ──────────────────────────────────────────────────────────
def format_observations(x: ObservationMatrix) -> str:
    buf = io.StringIO()
    buf.write(f"# {VERSION_TAG}{FORMAT_VERSION}\n# n={x.n}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "count"])
    for i, j, c in x.nonzero_pairs():
        w.writerow([i, j, c])
    return buf.getvalue()


def parse_observations(text: str) -> ObservationMatrix:
    n: Optional[int] = None
    header_seen = False
    rows_seen = set()
    values = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            _check_version_comment(body, lineno)
            if body.startswith("n="):
                if n is not None:
                    raise FormatError("duplicate '# n=' declaration", lineno)
                n = _parse_int(body[2:].strip(), lineno, None, "vertex count")
                values = np.zeros(n_pairs(n), dtype=np.int64)
            continue
        row = next(csv.reader([line]))
        if not header_seen:
            if [c.strip() for c in row] != ["i", "j", "count"]:
                raise FormatError("expected header 'i,j,count'", lineno)
            header_seen = True
            continue
        if n is None:
            raise FormatError("data row before the '# n=<count>' declaration", lineno)
        if len(row) != 3:
            raise FormatError(f"expected 3 fields, got {len(row)}", lineno)
        i = _parse_int(row[0].strip(), lineno, 1, "i")
        j = _parse_int(row[1].strip(), lineno, 2, "j")
        c = _parse_int(row[2].strip(), lineno, 3, "count")
        if i >= j:
            raise FormatError(f"pair ({i}, {j}) must satisfy i < j", lineno, 2)
        if j >= n:
            raise FormatError(f"vertex {j} out of range for n={n}", lineno, 2)
        idx = pair_index(n, i, j)
        if idx in rows_seen:
            raise FormatError(f"duplicate row for pair ({i}, {j})", lineno)
        rows_seen.add(idx)
        values[idx] = c
    if n is None:
        raise FormatError("missing '# n=<count>' declaration")
    if not header_seen:
        raise FormatError("missing 'i,j,count' header")
    return ObservationMatrix(n, values)


def read_observations(path: PathLike) -> ObservationMatrix:
    return parse_observations(_read_text(path))


def write_observations(x: ObservationMatrix, path: PathLike) -> None:
    _write_text(path, format_observations(x))


# ─── Bipartite edge list ──────────────────────────────────────────────────────
def parse_bipartite(text: str) -> List[Tuple[str, str]]:
    """
    "entity,group" rows with an optional header; '#' lines are comments.
    Repeated (entity, group) records are rejected.
    """
    records: List[Tuple[str, str]] = []
    seen: Dict[Tuple[str, str], int] = {}
    first = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        row = [c.strip() for c in next(csv.reader([line]))]
        if first and row == ["entity", "group"]:
            first = False
            continue
        first = False
        if len(row) != 2:
            raise FormatError(f"expected 2 fields, got {len(row)}", lineno)
        for col, v in enumerate(row, start=1):
            if not v:
                raise FormatError("empty field", lineno, col)
        rec = (row[0], row[1])
        if rec in seen:
            raise FormatError(f"duplicate record {rec} (first on line {seen[rec]})", lineno)
        seen[rec] = lineno
        records.append(rec)
    return records


def read_bipartite(path: PathLike) -> List[Tuple[str, str]]:
    return parse_bipartite(_read_text(path))


# ─── JSON documents ───────────────────────────────────────────────────────────
def dump_json(data, path: PathLike) -> None:
    _write_text(path, json.dumps(data, sort_keys=True, indent=2) + "\n")


def load_json(path: PathLike):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", e.lineno, e.colno) from e


def config_hash(cfg: RunConfig) -> str:
    """sha256 of the canonical (sorted-key, compact) JSON of the config."""
    canon = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_run_config(cfg: RunConfig, path: PathLike) -> None:
    dump_json(cfg.model_dump(mode="json"), path)


def structure_to_dict(s: Structure) -> dict:
    if isinstance(s, Hypergraph):
        return {"kind": "hypergraph", "n": s.n,
                "two_edges": [list(e) for e in sorted(s.two_edges)],
                "three_edges": [list(e) for e in sorted(s.three_edges)]}
    return {"kind": "categorical", "n": s.n,
            "weak_edges": [list(e) for e in sorted(s.weak_edges)],
            "strong_edges": [list(e) for e in sorted(s.strong_edges)]}


def structure_from_dict(d: dict) -> Structure:
    try:
        if d["kind"] == "hypergraph":
            return Hypergraph(d["n"], [tuple(e) for e in d["two_edges"]], [tuple(e) for e in d["three_edges"]])
        if d["kind"] == "categorical":
            return CategoricalGraph(d["n"], [tuple(e) for e in d["weak_edges"]],
                                    [tuple(e) for e in d["strong_edges"]])
    except (KeyError, TypeError) as e:
        raise FormatError(f"malformed structure record: {e}") from e
    raise FormatError(f"unknown structure kind {d.get('kind')!r}")


def _probs_to_dict(p) -> dict:
    if isinstance(p, HypergraphProbs):
        return {"q": p.q, "p": p.p}
    return {"q1": p.q1, "q2": p.q2}


def _probs_from_dict(d: dict):
    if "p" in d:
        return HypergraphProbs(d["q"], d["p"])
    return GraphProbs(d["q1"], d["q2"])


def sample_to_dict(s: PosteriorSample) -> dict:
    return {"structure": structure_to_dict(s.structure), "mu": list(s.mu.as_tuple()),
            "probs": _probs_to_dict(s.probs), "log_joint": s.log_joint,
            "log_likelihood": s.log_likelihood}


def sample_from_dict(d: dict) -> PosteriorSample:
    return PosteriorSample(structure_from_dict(d["structure"]), RateParams(*d["mu"]),
                           _probs_from_dict(d["probs"]), d["log_joint"], d["log_likelihood"])


class Provenance(BaseModel):
    model_config = ConfigDict(extra="forbid")

    package_version: str = PACKAGE_VERSION
    config_hash: str
    seed: int
    created: str

    def created_at(self) -> datetime:
        return isoparse(self.created)


class ResultBundle(BaseModel):
    """
    Output of `infer`: the exact config, the chosen chain's samples and trace
    summaries, the estimators, and provenance. Optional evaluation metrics.
    """
    model_config = ConfigDict(extra="forbid")

    format_version: int = FORMAT_VERSION
    config: RunConfig
    provenance: Provenance
    model: str
    n: int
    chain_seed: Optional[int] = None
    converged: bool = False
    converged_at: Optional[int] = None
    iterations: int = 0
    acceptance: Dict[str, List[int]] = Field(default_factory=dict)
    loglik_history: List[float] = Field(default_factory=list)
    samples: List[dict] = Field(default_factory=list)
    map_estimate: Optional[dict] = None
    edgewise_estimate: Optional[dict] = None
    marginal_labels: Optional[List[int]] = None
    metrics: Optional[dict] = None

    def to_trace(self) -> ChainTrace:
        """Rebuild the chain trace (history is the stored, possibly thinned, one)."""
        return ChainTrace(model=self.model, seed=self.chain_seed,
                          loglik_history=list(self.loglik_history),
                          samples=[sample_from_dict(s) for s in self.samples],
                          converged_at=self.converged_at, converged=self.converged,
                          iterations=self.iterations,
                          acceptance={k: list(v) for k, v in self.acceptance.items()})

    def marginal_label_matrix(self) -> LabelMatrix:
        if self.marginal_labels is None:
            raise FormatError("result bundle holds no marginal labels")
        return LabelMatrix(self.n, np.asarray(self.marginal_labels, dtype=np.int8))


def build_result_bundle(cfg: RunConfig, trace: ChainTrace, n: int, map_sample: PosteriorSample,
                        edgewise: Structure, marginal: LabelMatrix, max_history: int = 2000) -> ResultBundle:
    prov = Provenance(config_hash=config_hash(cfg), seed=cfg.mcmc.master_seed,
                      created=datetime.now(timezone.utc).isoformat())
    return ResultBundle(
        config=cfg,
        provenance=prov,
        model=trace.model,
        n=n,
        chain_seed=trace.seed,
        converged=trace.converged,
        converged_at=trace.converged_at,
        iterations=trace.iterations,
        acceptance={k: list(v) for k, v in trace.acceptance.items()},
        loglik_history=trace.downsampled_history(max_history),
        samples=[sample_to_dict(s) for s in trace.samples],
        map_estimate=sample_to_dict(map_sample),
        edgewise_estimate=structure_to_dict(edgewise),
        marginal_labels=marginal.values.astype(int).tolist(),
    )


def write_result_bundle(bundle: ResultBundle, path: PathLike) -> None:
    dump_json(bundle.model_dump(mode="json"), path)


def read_result_bundle(path: PathLike) -> ResultBundle:
    data = load_json(path)
    if data.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported result format_version {data.get('format_version')!r}")
    try:
        bundle = ResultBundle.model_validate(data)
    except ValidationError as e:
        raise FormatError(f"invalid result bundle: {e}") from e
    isoparse(bundle.provenance.created)
    return bundle


def read_run_config(path: PathLike) -> RunConfig:
    return load_run_config(str(path))


__all__ = [
    "format_hypergraph", "parse_hypergraph", "read_hypergraph", "write_hypergraph",
    "format_categorical", "parse_categorical", "read_structure", "write_structure",
    "format_observations", "parse_observations", "read_observations", "write_observations",
    "parse_bipartite", "read_bipartite",
    "dump_json", "load_json", "config_hash", "write_run_config", "read_run_config",
    "structure_to_dict", "structure_from_dict", "sample_to_dict", "sample_from_dict",
    "Provenance", "ResultBundle", "build_result_bundle", "write_result_bundle", "read_result_bundle",
]
