import json

import pytest

from factrepair.datagen import (
    GenConfig, InfeasibleConfig, InstanceFormatError, dumps_instance, generate, generate_many,
    instance_to_dict, load_instance, load_instances, save_instance, save_instances,
)
from factrepair.factlang import Verdict, enumerate_all_mus, ground_truth_consistent
from factrepair.oracle import PerfectOracle
from factrepair.quickxplain import verify_mus


def test_two_negation_pairs():
    inst = generate(GenConfig(n_facts=30, planted=(("negation_pair", 2),), seed=7))
    assert len(inst.facts) == 30
    assert [len(u) for u in inst.gold_mus] == [2, 2]
    assert len(inst.gold_consistent) == 28
    oracle = PerfectOracle()
    for u in inst.gold_mus:
        assert verify_mus(oracle, inst.subset(u))
    assert ground_truth_consistent(inst.subset(inst.gold_consistent)) is Verdict.CONS


def test_no_planted_patterns():
    inst = generate(GenConfig(n_facts=25, planted=(), seed=1))
    assert inst.gold_mus == ()
    assert inst.gold_consistent == tuple(range(25))
    assert ground_truth_consistent(list(inst.facts)) is Verdict.CONS


def test_same_seed_byte_identical():
    cfg = GenConfig(n_facts=30, planted=(("negation_pair", 1), ("exactly_one", 1)), seed=3)
    assert dumps_instance(generate(cfg)) == dumps_instance(generate(cfg))
    assert dumps_instance(generate(cfg)) != dumps_instance(generate(GenConfig(n_facts=30, seed=4)))


@pytest.mark.parametrize("pattern", ["negation_pair", "temporal_cycle", "exactly_one"])
def test_gold_mus_are_the_only_mus(pattern):
    for inst in generate_many(GenConfig(n_facts=12, planted=((pattern, 1),), seed=5), 8):
        assert set(enumerate_all_mus(list(inst.facts))) == {frozenset(u) for u in inst.gold_mus}


def test_mixed_patterns_are_verified_and_gold_is_consistent():
    cfg = GenConfig(n_facts=30, planted=(("negation_pair", 2), ("temporal_cycle", 1), ("exactly_one", 1)),
                    seed=2)
    oracle = PerfectOracle()
    for inst in generate_many(cfg, 20):
        assert len({f.text for f in inst.facts}) == 30
        for u in inst.gold_mus:
            assert verify_mus(oracle, inst.subset(u))
        assert ground_truth_consistent(inst.subset(inst.gold_consistent)) is Verdict.CONS
        assert inst.has_size3_pattern


def test_overlap_mode_shares_a_fact():
    cfg = GenConfig(n_facts=20, planted=(("negation_pair", 1), ("exactly_one", 1)), allow_overlap=True, seed=1)
    inst = generate(cfg)
    a, b = (set(u) for u in inst.gold_mus)
    assert a & b
    assert len(inst.gold_consistent) == 19


def test_per_cluster_scopes_partition_facts():
    cfg = GenConfig(n_facts=90, planted=(("negation_pair", 3),), scope_mode="per_cluster", seed=6)
    inst = generate(cfg)
    flat = [i for s in inst.scopes for i in s]
    assert sorted(flat) == list(range(90))
    for u in inst.gold_mus:
        assert any(set(u) <= set(s) for s in inst.scopes)


def test_generate_many_distinct_seeds():
    insts = generate_many(GenConfig(n_facts=20, seed=0), 100)
    assert len({i.seed for i in insts}) == 100
    assert len({i.id for i in insts}) == 100


@pytest.mark.parametrize("kwargs", [
    {"n_facts": 3, "planted": (("negation_pair", 2),)},
    {"planted": (("liar", 1),)},
    {"scope_mode": "random"},
    {"distractor_offtopic_fraction": 1.5},
])
def test_infeasible_configs(kwargs):
    with pytest.raises(InfeasibleConfig):
        GenConfig(**kwargs)


def test_round_trip_100(tmp_path):
    cfg = GenConfig(n_facts=30, planted=(("negation_pair", 1), ("temporal_cycle", 1)), seed=11)
    insts = generate_many(cfg, 100)
    path = tmp_path / "insts.jsonl"
    save_instances(insts, path)
    assert load_instances(path) == insts
    save_instance(insts[0], tmp_path / "one.jsonl")
    assert load_instance(tmp_path / "one.jsonl") == insts[0]


def test_truncated_file(tmp_path):
    path = tmp_path / "bad.jsonl"
    save_instances(generate_many(GenConfig(n_facts=10, seed=1), 2), path)
    text = path.read_text()
    path.write_text(text[: len(text) - 40])
    with pytest.raises(InstanceFormatError, match=r":2: invalid JSON at column \d+"):
        load_instances(path)


def test_missing_gold_mus(tmp_path):
    d = instance_to_dict(generate(GenConfig(n_facts=10, seed=1)))
    del d["gold_mus"]
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(d) + "\n")
    with pytest.raises(InstanceFormatError, match="gold_mus"):
        load_instances(path)


def test_text_mismatch_names_field(tmp_path):
    d = instance_to_dict(generate(GenConfig(n_facts=10, seed=1)))
    d["facts"][3]["text"] = "Something else."
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(d) + "\n")
    with pytest.raises(InstanceFormatError, match=r"facts\[3\]\.text"):
        load_instances(path)


def test_load_instance_requires_one(tmp_path):
    path = tmp_path / "two.jsonl"
    save_instances(generate_many(GenConfig(n_facts=10, seed=1), 2), path)
    with pytest.raises(InstanceFormatError):
        load_instance(path)
