import csv
import io
import json
import math

import pytest

from conftest import distractors, facts_from
from factrepair.datagen import GenConfig, generate
from factrepair.evaluation import (
    SweepSpec, check_metrics_record, metrics, metrics_digest, normalize_text, pairwise_baseline,
    run_cell, run_sweep, scaling_points, summarize, write_sweep_outputs,
)
from factrepair.factlang import Unary, Verdict, ground_truth_consistent
from factrepair.oracle import CountingOracle, PerfectOracle
from factrepair.repair import qxr
from factrepair.verification import xor_triple


def test_metrics_examples():
    m = metrics({1, 2, 3}, {1, 2, 3})
    assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)
    m = metrics(set(), {1, 2})
    assert (m.precision, m.recall) == (1.0, 0.0)
    surviving = set(range(9)) | {100}
    gold = set(range(12))
    m = metrics(surviving, gold)
    assert m.precision == pytest.approx(0.9)
    assert m.recall == pytest.approx(0.75)
    assert m.f1 == pytest.approx(2 * 0.9 * 0.75 / 1.65)
    assert round(m.f1, 3) == 0.818
    with pytest.raises(ValueError):
        metrics({1}, set())


def test_metrics_digest_round_trip():
    m = metrics({1, 2}, {1, 2, 3})
    rec = {"surviving": [1, 2], "gold_consistent": [1, 2, 3],
           "metrics": {"precision": m.precision, "recall": m.recall, "f1": m.f1},
           "metrics_digest": metrics_digest([1, 2], [1, 2, 3], m)}
    assert check_metrics_record(rec)
    rec["metrics"]["f1"] = 0.5
    assert not check_metrics_record(rec)


def test_pairwise_misses_xor_triple():
    facts, _ = xor_triple()
    for i in range(3):
        assert ground_truth_consistent(facts[:i] + facts[i + 1:]) is Verdict.CONS
    assert ground_truth_consistent(facts) is Verdict.INCONS
    res = pairwise_baseline(PerfectOracle(), facts)
    assert res.edges == [] and res.surviving == {0, 1, 2} and res.queries == 3
    repaired = qxr(PerfectOracle(), facts)
    assert len(repaired.surviving) == 2
    assert ground_truth_consistent([f for f in facts if f.id in repaired.surviving]) is Verdict.CONS


def test_pairwise_removes_one_of_pair():
    facts = facts_from([Unary("IsTiger", "Rex", True), Unary("IsTiger", "Rex", False)]) + distractors(8, start=2)
    res = pairwise_baseline(PerfectOracle(), facts)
    assert res.edges == [(0, 1)]
    assert res.removed == {0}
    assert res.queries == 45


def test_pairwise_query_count_n30():
    inst = generate(GenConfig(n_facts=30, seed=1))
    counting = CountingOracle(PerfectOracle())
    res = pairwise_baseline(counting, list(inst.facts))
    assert res.queries == counting.calls == 435


def test_normalize_text():
    assert normalize_text("  Rex IS a Tiger!! ") == "rex is a tiger"


def test_run_cell_perfect():
    inst = generate(GenConfig(n_facts=30, planted=(("negation_pair", 2),), seed=2))
    row = run_cell(inst, "perfect", "qxr")
    assert not row.error
    assert row.f1 == 1.0 and row.sound and row.budget_ok and row.error_rate == 0.0
    assert row.queries == row.base_queries
    row = run_cell(inst, "perfect", "pairwise")
    assert row.queries == 435 and row.budget == 435


def test_run_cell_majority_counts_base_calls():
    inst = generate(GenConfig(n_facts=16, planted=(("negation_pair", 1),), seed=2))
    row = run_cell(inst, "majority:3:noisy:0.1,0.1", "pairwise")
    assert row.r == 3 and row.alpha == 0.1
    assert row.base_queries == 3 * row.queries
    assert row.error_bound == pytest.approx(math.exp(-2 * 3 * 0.4**2))


def test_run_cell_records_failure():
    inst = generate(GenConfig(n_facts=10, seed=2))
    row = run_cell(inst, "perfect", "bogus")
    assert row.error.startswith("ValueError")


def test_sweep_outputs(tmp_path):
    spec = SweepSpec(n_facts=(16, 32), instances=3, oracles=("perfect", "noisy:0.05,0.05"), seed=1)
    rows = run_sweep(spec)
    assert len(rows) == 2 * 3 * 2 * 2
    assert rows == run_sweep(spec)
    for r in rows:
        if r.algorithm == "pairwise":
            assert r.queries == r.n_facts * (r.n_facts - 1) // 2
        if r.oracle == "perfect" and r.algorithm == "qxr":
            assert r.f1 == 1.0 and r.budget_ok
    summary = summarize(rows)
    assert all(rec["bound_ok"] for rec in summary)
    points = scaling_points(rows)
    assert {(n, a) for n, a, _ in points} == {(16, "qxr"), (16, "pairwise"), (32, "qxr"), (32, "pairwise")}
    write_sweep_outputs(tmp_path, spec, rows)
    got = list(csv.DictReader(io.StringIO((tmp_path / "rows.csv").read_text())))
    assert len(got) == len(rows)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["spec"]["seed"] == 1 and "package_version" in man


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(oracles=()).validate()
    with pytest.raises(ValueError):
        SweepSpec(algorithms=("direct",)).validate()
    with pytest.raises(ValueError):
        SweepSpec(oracles=("llm:cfg.json",)).validate()


def test_sweep_with_process_pool():
    spec = SweepSpec(n_facts=(16,), instances=4, oracles=("noisy:0.1,0.1",), workers=2, seed=3)
    assert run_sweep(spec) == run_sweep(SweepSpec(**{**spec.__dict__, "workers": 1}))
