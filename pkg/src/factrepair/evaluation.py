"""Metrics, baselines and parameter sweeps."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import platform
import re
import statistics
import subprocess
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Collection, Iterable, Sequence

from . import __version__
from .datagen import GenConfig, Instance, atomic_write_text, derive_seed, generate_many
from .factlang import Fact, Verdict, ground_truth_consistent
from .oracle import (
    AuditOracle,
    CountingOracle,
    Oracle,
    majority_error_bound,
    oracle_chain,
    parse_oracle_spec,
)
from .repair import RepairPolicy, qxr, qxr_query_budget

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    n_surviving: int
    n_gold: int
    overlap: int


def metrics(surviving: Collection[int], gold: Collection[int]) -> Metrics:
    """Precision/recall of the surviving facts against the gold consistent subset.

    An empty surviving set has precision 1 (it asserts nothing false).
    """
    gold = set(gold)
    if not gold:
        raise ValueError("gold consistent subset is empty")
    surviving = set(surviving)
    overlap = len(surviving & gold)
    p = overlap / len(surviving) if surviving else 1.0
    r = overlap / len(gold)
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return Metrics(p, r, f1, len(surviving), len(gold), overlap)


def metrics_digest(surviving: Iterable[int], gold: Iterable[int], m: Metrics) -> str:
    payload = json.dumps(
        [sorted(surviving), sorted(gold), [round(m.precision, 12), round(m.recall, 12), round(m.f1, 12)]]
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def check_metrics_record(record: dict) -> bool:
    """Recompute metrics from the raw id lists stored in a report record."""
    m = metrics(record["surviving"], record["gold_consistent"])
    stored = record["metrics"]
    same = all(math.isclose(stored[k], getattr(m, k), abs_tol=1e-12) for k in ("precision", "recall", "f1"))
    return same and record["metrics_digest"] == metrics_digest(record["surviving"], record["gold_consistent"], m)


# --------------------------------------------------------------------------
# baselines


@dataclass
class PairwiseResult:
    surviving: frozenset[int]
    removed: frozenset[int]
    queries: int
    edges: list[tuple[int, int]]


def pairwise_baseline(oracle: Oracle, facts: Sequence[Fact]) -> PairwiseResult:
    """Query every pair, then delete max-degree facts until no contradiction edge remains."""
    facts = sorted(facts, key=lambda f: f.id)
    if len(facts) < 2:
        raise ValueError("pairwise baseline needs at least two facts")
    queries = 0
    edges = []
    for i, a in enumerate(facts):
        for b in facts[i + 1:]:
            queries += 1
            if oracle.query([a, b]) is Verdict.INCONS:
                edges.append((a.id, b.id))
    alive = set(edges)
    removed: set[int] = set()
    while alive:
        degree: dict[int, int] = defaultdict(int)
        for a, b in alive:
            degree[a] += 1
            degree[b] += 1
        victim = min(degree, key=lambda x: (-degree[x], x))
        removed.add(victim)
        alive = {e for e in alive if victim not in e}
    surviving = frozenset(f.id for f in facts) - removed
    return PairwiseResult(surviving, frozenset(removed), queries, edges)


_PUNCT = re.compile(r"[^\w\s]")


def normalize_text(text: str) -> str:
    return " ".join(_PUNCT.sub(" ", text.lower()).split())


@dataclass
class DirectResult:
    surviving: frozenset[int]
    unmatched: list[str]


def direct_llm_baseline(judge, facts: Sequence[Fact]) -> DirectResult:
    """Ask a subset-returning judge for a consistent subset and map its strings back to facts."""
    returned = judge.select(list(facts))
    exact = {f.text: f.id for f in facts}
    loose = {normalize_text(f.text): f.id for f in facts}
    keep: set[int] = set()
    unmatched = []
    for text in returned:
        fid = exact.get(text)
        if fid is None:
            fid = loose.get(normalize_text(text))
        if fid is None:
            log.warning("direct baseline returned unknown fact %r", text)
            unmatched.append(text)
        else:
            keep.add(fid)
    return DirectResult(frozenset(keep), unmatched)


# --------------------------------------------------------------------------
# sweeps

ROW_COLUMNS = (
    "instance_id", "algorithm", "oracle", "alpha", "beta", "r", "n_facts", "k", "patterns",
    "precision", "recall", "f1", "rounds", "queries", "base_queries", "converged", "sound",
    "budget", "budget_ok", "agg_calls", "agg_errors", "error_rate", "error_bound", "error",
)


@dataclass
class SweepRow:
    instance_id: str
    algorithm: str
    oracle: str
    alpha: float
    beta: float
    r: int
    n_facts: int
    k: int
    patterns: str
    precision: float = math.nan
    recall: float = math.nan
    f1: float = math.nan
    rounds: int = 0
    queries: int = 0
    base_queries: int = 0
    converged: bool = True
    sound: bool = True
    budget: int = 0
    budget_ok: bool = True
    agg_calls: int = 0
    agg_errors: int = 0
    error_rate: float = math.nan
    error_bound: float = math.nan
    error: str = ""


@dataclass
class SweepSpec:
    n_facts: tuple[int, ...] = (30,)
    planted: tuple[tuple[str, int], ...] = (("negation_pair", 2),)
    instances: int = 20
    oracles: tuple[str, ...] = ("perfect",)
    algorithms: tuple[str, ...] = ("qxr", "pairwise")
    seed: int = 0
    offtopic_fraction: float = 0.1
    scope_mode: str = "single_scope"
    round_cap: int | None = None
    retry_limit: int = 3
    workers: int = 1

    def validate(self) -> None:
        if not self.n_facts or not self.oracles or not self.algorithms or self.instances < 1:
            raise ValueError("sweep grid is empty")
        bad = set(self.algorithms) - {"qxr", "pairwise"}
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}")
        for o in self.oracles:
            if parse_oracle_spec(o).uses_llm:
                raise ValueError("sweeps run on simulated oracles only")


def _scope_consistent(inst: Instance, surviving: Collection[int]) -> bool:
    keep = set(surviving)
    return all(
        ground_truth_consistent(inst.subset(set(scope) & keep)) is Verdict.CONS for scope in inst.scopes
    )


def run_cell(inst: Instance, spec_text: str, algorithm: str, run_seed: int = 0,
             policy: RepairPolicy | None = None) -> SweepRow:
    """Run one algorithm on one instance under one oracle setting."""
    spec = parse_oracle_spec(spec_text)
    alpha, beta = spec.noise()
    r = spec.votes if spec.kind == "majority" else 1
    row = SweepRow(
        instance_id=inst.id, algorithm=algorithm, oracle=spec_text, alpha=alpha, beta=beta, r=r,
        n_facts=len(inst.facts), k=max((len(u) for u in inst.gold_mus), default=0),
        patterns="+".join(inst.patterns),
    )
    try:
        base_seed = derive_seed(spec.root_seed(run_seed), inst.id)
        audited = AuditOracle(spec.build(base_seed))
        counting = CountingOracle(audited)
        if algorithm == "qxr":
            res = qxr(counting, list(inst.facts), inst.scopes, policy)
            surviving = res.surviving
            row.rounds, row.converged = res.rounds, res.converged
            row.budget = qxr_query_budget(res.rounds, res.n_scopes, res.k_max, len(inst.facts))
        elif algorithm == "pairwise":
            res = pairwise_baseline(counting, list(inst.facts))
            surviving = res.surviving
            row.budget = math.comb(len(inst.facts), 2)
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        row.queries = counting.calls
        row.base_queries = list(oracle_chain(counting))[-1].calls
        row.budget_ok = row.queries <= row.budget
        m = metrics(surviving, inst.gold_consistent)
        row.precision, row.recall, row.f1 = m.precision, m.recall, m.f1
        row.sound = _scope_consistent(inst, surviving)
        row.agg_calls, row.agg_errors = audited.calls, audited.errors
        row.error_rate = audited.errors / audited.calls if audited.calls else 0.0
        eps = max(alpha, beta)
        row.error_bound = majority_error_bound(r, eps) if eps < 0.5 else 1.0
    except Exception as exc:  # recorded, the sweep goes on
        log.exception("cell failed: %s %s %s", inst.id, spec_text, algorithm)
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def _cell(args) -> SweepRow:
    return run_cell(*args)


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    spec.validate()
    policy = RepairPolicy(round_cap=spec.round_cap, retry_limit=spec.retry_limit)
    cells = []
    for n in spec.n_facts:
        cfg = GenConfig(
            n_facts=n, planted=spec.planted, distractor_offtopic_fraction=spec.offtopic_fraction,
            seed=derive_seed(spec.seed, "n_facts", n), scope_mode=spec.scope_mode,
        )
        for inst in generate_many(cfg, spec.instances):
            for oracle in spec.oracles:
                for algorithm in spec.algorithms:
                    cells.append((inst, oracle, algorithm, spec.seed, policy))
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            rows = list(pool.map(_cell, cells, chunksize=8))
    else:
        rows = [_cell(c) for c in cells]
    rows.sort(key=lambda r: (r.algorithm, r.oracle, r.n_facts, r.instance_id))
    return rows


def _mean_se(xs: Sequence[float]) -> tuple[float, float]:
    xs = [x for x in xs if not math.isnan(x)]
    if not xs:
        return math.nan, math.nan
    mean = statistics.fmean(xs)
    se = statistics.stdev(xs) / math.sqrt(len(xs)) if len(xs) > 1 else 0.0
    return mean, se


SUMMARY_COLUMNS = (
    "algorithm", "oracle", "n_facts", "cells", "failed",
    "precision_mean", "precision_se", "recall_mean", "recall_se", "f1_mean", "f1_se",
    "queries_mean", "queries_se", "rounds_mean", "sound_rate", "budget_ok_rate",
    "agg_calls", "agg_errors", "error_rate", "error_se", "error_bound", "bound_ok",
)


def summarize(rows: Sequence[SweepRow]) -> list[dict]:
    groups: dict[tuple, list[SweepRow]] = defaultdict(list)
    for row in rows:
        groups[(row.algorithm, row.oracle, row.n_facts)].append(row)
    out = []
    for (algorithm, oracle, n), group in sorted(groups.items()):
        ok = [r for r in group if not r.error]
        rec: dict = {"algorithm": algorithm, "oracle": oracle, "n_facts": n,
                     "cells": len(group), "failed": len(group) - len(ok)}
        for name in ("precision", "recall", "f1", "queries"):
            rec[f"{name}_mean"], rec[f"{name}_se"] = _mean_se([float(getattr(r, name)) for r in ok])
        rec["rounds_mean"] = _mean_se([float(r.rounds) for r in ok])[0]
        rec["sound_rate"] = sum(r.sound for r in ok) / len(ok) if ok else math.nan
        rec["budget_ok_rate"] = sum(r.budget_ok for r in ok) / len(ok) if ok else math.nan
        calls = sum(r.agg_calls for r in ok)
        errors = sum(r.agg_errors for r in ok)
        p = errors / calls if calls else math.nan
        se = math.sqrt(p * (1 - p) / calls) if calls else math.nan
        bound = ok[0].error_bound if ok else math.nan
        rec.update(agg_calls=calls, agg_errors=errors, error_rate=p, error_se=se, error_bound=bound,
                   bound_ok=bool(calls) and p <= bound + 3 * se)
        out.append(rec)
    return out


def scaling_points(rows: Sequence[SweepRow]) -> list[tuple[int, str, float]]:
    """(N, algorithm, mean queries) over perfect-and-noisy cells alike."""
    acc: dict[tuple[int, str], list[int]] = defaultdict(list)
    for r in rows:
        if not r.error:
            acc[(r.n_facts, r.algorithm)].append(r.queries)
    return [(n, alg, statistics.fmean(qs)) for (n, alg), qs in sorted(acc.items())]


def _csv(columns: Sequence[str], records: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for rec in records:
        w.writerow(rec)
    return buf.getvalue()


def rows_csv(rows: Sequence[SweepRow]) -> str:
    return _csv(ROW_COLUMNS, (asdict(r) for r in rows))


def summary_csv(summary: Sequence[dict]) -> str:
    return _csv(SUMMARY_COLUMNS, summary)


def plot_data_csv(points: Sequence[tuple[int, str, float]]) -> str:
    return _csv(("n_facts", "algorithm", "mean_queries"),
                ({"n_facts": n, "algorithm": a, "mean_queries": q} for n, a, q in points))


def _git_revision() -> str | None:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


def manifest(spec: SweepSpec, **extra) -> dict:
    return {
        "package_version": __version__,
        "git_revision": _git_revision(),
        "python": platform.python_version(),
        "created_unix": int(time.time()),
        "spec": asdict(spec),
        **extra,
    }


def write_sweep_outputs(out_dir: str | Path, spec: SweepSpec, rows: Sequence[SweepRow]) -> dict:
    out = Path(out_dir)
    summary = summarize(rows)
    atomic_write_text(out / "rows.csv", rows_csv(rows))
    atomic_write_text(out / "summary.csv", summary_csv(summary))
    atomic_write_text(out / "scaling.csv", plot_data_csv(scaling_points(rows)))
    atomic_write_text(out / "manifest.json", json.dumps(manifest(spec), indent=2) + "\n")
    return {"summary": summary}
