"""Command-line entry point: ``factrepair {gen,check,sweep,verify,direct}``.

Exit codes: 0 success, 1 a verified property failed, 2 usage/config/IO
or LLM transport error, 3 at least one repair hit its round cap.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .datagen import (
    GenConfig,
    InfeasibleConfig,
    Instance,
    InstanceFormatError,
    atomic_write_text,
    derive_seed,
    generate,
    generate_many,
    load_instances,
    save_instances,
)
from .evaluation import (
    SweepSpec,
    direct_llm_baseline,
    metrics,
    metrics_digest,
    run_sweep,
    write_sweep_outputs,
)
from .factlang import Verdict, ground_truth_consistent
from .llm import LLMError
from .oracle import PerfectOracle, parse_oracle_spec
from .quickxplain import verify_mus
from .repair import RepairPolicy, qxr

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2, 3

log = logging.getLogger("factrepair")


class UsageError(Exception):
    pass


def _plant(text: str) -> tuple[str, int]:
    name, _, count = text.partition(":")
    try:
        return name, int(count or 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected PATTERN[:COUNT], got {text!r}") from None


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="factrepair", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate synthetic instances")
    g.add_argument("--n-facts", type=int, default=30)
    g.add_argument("--plant", type=_plant, action="append", default=None,
                   help="PATTERN:COUNT, repeatable (negation_pair, temporal_cycle, exactly_one)")
    g.add_argument("--offtopic", type=float, default=0.1, help="off-topic distractor fraction")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--scope-mode", default="single_scope", choices=["single_scope", "per_cluster"])
    g.add_argument("--cluster-size", type=int, default=30)
    g.add_argument("--overlap", action="store_true", help="let exactly_one patterns share a fact")
    g.add_argument("-o", "--out", default="instances.jsonl")
    g.add_argument("--config", help="JSON file whose keys override these flags")

    c = sub.add_parser("check", help="repair every instance in a file with QXR")
    c.add_argument("input")
    c.add_argument("--oracle", default="perfect",
                   help="perfect | noisy:A,B[,seed=S] | majority:R:<spec> | llm:CONFIG.json")
    c.add_argument("--assume-independent", action="store_true",
                   help="allow majority voting over an LLM judge")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--round-cap", type=int, default=None)
    c.add_argument("--retry-limit", type=int, default=3)
    c.add_argument("--hitting-set", default="greedy", choices=["greedy", "exact"])
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("-o", "--out", default=None, help="report path (default: <input>.report.jsonl)")
    c.add_argument("--config")

    s = sub.add_parser("sweep", help="run parameter sweeps and write CSV tables")
    s.add_argument("--n-facts", type=_int_list, default=[30])
    s.add_argument("--plant", type=_plant, action="append", default=None)
    s.add_argument("--instances", type=int, default=20)
    s.add_argument("--oracle", action="append", default=None, help="repeatable oracle spec")
    s.add_argument("--algorithms", type=_str_list, default=["qxr", "pairwise"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--offtopic", type=float, default=0.1)
    s.add_argument("--scope-mode", default="single_scope", choices=["single_scope", "per_cluster"])
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("-o", "--out", default="sweep_out")
    s.add_argument("--config")

    v = sub.add_parser("verify", help="brute-force property checks")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--max-size", type=int, default=14, help="cap for exhaustive checks")
    v.add_argument("--small-count", type=int, default=64)
    v.add_argument("--suite-count", type=int, default=100)
    v.add_argument("--suite-n", type=int, default=30)
    v.add_argument("--mutate", action="store_true", help="test hook: flip one oracle verdict")
    v.add_argument("--config")

    d = sub.add_parser("direct", help="direct one-shot LLM baseline (needs an LLM endpoint)")
    d.add_argument("input")
    d.add_argument("--llm-config", required=True)
    d.add_argument("-o", "--out", default=None)
    return p


def _apply_config(args: argparse.Namespace) -> None:
    path = getattr(args, "config", None)
    if not path:
        return
    try:
        data = json.loads(Path(path).read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for key, value in data.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"config key {key!r} is not an option of {args.command}")
        if attr == "plant":
            value = [tuple(v) if isinstance(v, list) else _plant(v) for v in value]
        setattr(args, attr, value)


def cmd_gen(args) -> int:
    planted = tuple(args.plant) if args.plant else (("negation_pair", 2),)
    try:
        cfg = GenConfig(
            n_facts=args.n_facts, planted=planted, distractor_offtopic_fraction=args.offtopic,
            seed=args.seed, scope_mode=args.scope_mode, cluster_size=args.cluster_size,
            allow_overlap=args.overlap,
        )
    except InfeasibleConfig as exc:
        raise UsageError(str(exc)) from exc
    if args.count < 1:
        raise UsageError("--count must be positive")
    instances = generate_many(cfg, args.count) if args.count > 1 else [generate(cfg)]
    save_instances(instances, args.out)
    print(f"wrote {len(instances)} instance(s) to {args.out}")
    return EXIT_OK


def check_instance(inst: Instance, oracle, oracle_name: str, policy: RepairPolicy) -> dict:
    res = qxr(oracle, list(inst.facts), inst.scopes, policy)
    perfect = PerfectOracle()
    keep = set(res.surviving)
    record = {"instance_id": inst.id, "oracle": oracle_name, **res.to_dict()}
    for entry in record["mus_family"]:
        entry["exact_oracle"] = entry.pop("verified")
        entry["verified"] = verify_mus(perfect, inst.subset(entry["fact_ids"]))
    record["scopes_consistent"] = all(
        ground_truth_consistent(inst.subset(set(s) & keep)) is Verdict.CONS for s in inst.scopes
    )
    if inst.gold_consistent:
        m = metrics(keep, inst.gold_consistent)
        record["gold_consistent"] = list(inst.gold_consistent)
        record["metrics"] = {"precision": m.precision, "recall": m.recall, "f1": m.f1}
        record["metrics_digest"] = metrics_digest(keep, inst.gold_consistent, m)
    return record


def cmd_check(args) -> int:
    try:
        spec = parse_oracle_spec(args.oracle)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    instances = _load(args.input)
    policy = RepairPolicy(round_cap=args.round_cap, retry_limit=args.retry_limit,
                          hitting_set=args.hitting_set, max_workers=args.workers)
    shared = None
    if spec.uses_llm:
        try:
            shared = spec.build(assume_independent=args.assume_independent)
        except Exception as exc:
            raise UsageError(str(exc)) from exc
    records = []
    nonconverged = 0
    for inst in instances:
        oracle = shared or spec.build(derive_seed(spec.root_seed(args.seed), inst.id))
        rec = check_instance(inst, oracle, str(spec), policy)
        records.append(rec)
        nonconverged += not rec["converged"]
        line = (f"{inst.id}: kept {len(rec['surviving'])}/{len(inst.facts)} rounds={rec['rounds']} "
                f"queries={rec['stats']['total_calls']} consistent={rec['scopes_consistent']}")
        if "metrics" in rec:
            m = rec["metrics"]
            line += f" P={m['precision']:.3f} R={m['recall']:.3f} F1={m['f1']:.3f}"
        if not rec["converged"]:
            line += " NON-CONVERGED"
        print(line)
    out = args.out or f"{args.input}.report.jsonl"
    atomic_write_text(out, "".join(json.dumps(r) + "\n" for r in records))
    print(f"wrote {len(records)} report record(s) to {out}")
    return EXIT_NONCONVERGED if nonconverged else EXIT_OK


def cmd_sweep(args) -> int:
    planted = tuple(args.plant) if args.plant else (("negation_pair", 1),)
    spec = SweepSpec(
        n_facts=tuple(args.n_facts), planted=planted, instances=args.instances,
        oracles=tuple(args.oracle or ["perfect"]), algorithms=tuple(args.algorithms),
        seed=args.seed, offtopic_fraction=args.offtopic, scope_mode=args.scope_mode,
        workers=args.workers,
    )
    try:
        spec.validate()
        for n in spec.n_facts:
            GenConfig(n_facts=n, planted=spec.planted)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = run_sweep(spec)
    summary = write_sweep_outputs(args.out, spec, rows)["summary"]
    for rec in summary:
        print(f"{rec['algorithm']:8s} {rec['oracle']:28s} N={rec['n_facts']:<4d} "
              f"F1={rec['f1_mean']:.3f} queries={rec['queries_mean']:.1f} "
              f"err={rec['error_rate']:.4f} bound={rec['error_bound']:.4f} bound_ok={rec['bound_ok']}")
    print(f"wrote rows.csv, summary.csv, scaling.csv, manifest.json to {args.out}")
    failed = sum(1 for r in rows if r.error)
    return EXIT_PROPERTY if rows and failed == len(rows) else EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_all

    results = run_all(seed=args.seed, max_size=args.max_size, mutate=args.mutate,
                      small_count=args.small_count, suite_count=args.suite_count, suite_n=args.suite_n)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY


def cmd_direct(args) -> int:
    from .llm import DirectLLMJudge, LLMConfig

    instances = _load(args.input)
    try:
        judge = DirectLLMJudge(LLMConfig.load(args.llm_config))
    except LLMError as exc:
        raise UsageError(str(exc)) from exc
    records = []
    for inst in instances:
        res = direct_llm_baseline(judge, list(inst.facts))
        rec = {"instance_id": inst.id, "surviving": sorted(res.surviving), "unmatched": res.unmatched}
        if inst.gold_consistent:
            m = metrics(res.surviving, inst.gold_consistent)
            rec["metrics"] = {"precision": m.precision, "recall": m.recall, "f1": m.f1}
            print(f"{inst.id}: P={m.precision:.3f} R={m.recall:.3f} F1={m.f1:.3f}")
        records.append(rec)
    out = args.out or f"{args.input}.direct.jsonl"
    atomic_write_text(out, "".join(json.dumps(r) + "\n" for r in records))
    return EXIT_OK


def _load(path: str) -> list[Instance]:
    try:
        return load_instances(path)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {path}") from exc
    except (OSError, InstanceFormatError) as exc:
        raise UsageError(str(exc)) from exc


COMMANDS = {"gen": cmd_gen, "check": cmd_check, "sweep": cmd_sweep, "verify": cmd_verify,
            "direct": cmd_direct}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _apply_config(args)
        return COMMANDS[args.command](args)
    except (UsageError, LLMError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
