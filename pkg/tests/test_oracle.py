import math
import subprocess
import sys

import pytest

from conftest import distractors, facts_from
from factrepair.factlang import Unary, Verdict, ground_truth_consistent
from factrepair.oracle import (
    CountingOracle, MajorityOracle, NoiseParams, NoisyOracle, PerfectOracle, VoteParams,
    binomial_majority_error, majority_error_bound, parse_oracle_spec,
)
from factrepair.verification import random_fact_set, xor_triple

CONS, INCONS = Verdict.CONS, Verdict.INCONS


def test_perfect_matches_ground_truth():
    import random

    rng = random.Random(4)
    oracle = PerfectOracle(memoize=True)
    for _ in range(200):
        facts = random_fact_set(rng, 8)
        assert oracle.query(facts) is ground_truth_consistent(facts)


def test_zero_noise_is_identity():
    facts, _ = xor_triple()
    noisy = NoisyOracle(PerfectOracle(), NoiseParams(0.0, 0.0, seed=1))
    assert noisy.exact
    for sub in (facts, facts[:2], facts[1:]):
        assert noisy.query(sub) is ground_truth_consistent(sub)


def test_forced_flip():
    cons = distractors(5)
    noisy = NoisyOracle(PerfectOracle(), NoiseParams(1.0, 0.0))
    assert all(noisy.query(cons) is INCONS for _ in range(50))


def test_flip_frequency():
    cons = distractors(5)
    noisy = NoisyOracle(PerfectOracle(), NoiseParams(0.2, 0.0, seed=11))
    flips = sum(noisy.query(cons) is INCONS for _ in range(10_000))
    assert abs(flips / 10_000 - 0.2) <= 0.01


def test_beta_flips_only_inconsistent():
    incons = facts_from([Unary("IsDog", "Rex", True), Unary("IsDog", "Rex", False)])
    noisy = NoisyOracle(PerfectOracle(), NoiseParams(0.0, 0.3, seed=2))
    rate = sum(noisy.query(incons) is CONS for _ in range(5000)) / 5000
    assert abs(rate - 0.3) < 0.03
    assert all(noisy.query(distractors(4)) is CONS for _ in range(200))


def _stream(seed):
    facts = distractors(6)
    noisy = NoisyOracle(PerfectOracle(), NoiseParams(0.4, 0.4, seed=seed))
    return "".join("1" if noisy.query(facts[: 1 + i % 6]) is INCONS else "0" for i in range(120))


def test_noise_deterministic_across_processes():
    here = _stream(99)
    assert here == _stream(99)
    assert here != _stream(100)
    code = "import sys; sys.path.insert(0, 'tests'); from test_oracle import _stream; print(_stream(99))"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True,
                         cwd=__file__.rsplit("/tests/", 1)[0])
    assert out.stdout.strip() == here


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(1.5, 0.0)
    with pytest.raises(ValueError):
        VoteParams(4)


def test_majority_r1_is_inner():
    facts = distractors(6)
    a = NoisyOracle(PerfectOracle(), NoiseParams(0.3, 0.3, seed=5))
    b = MajorityOracle(NoisyOracle(PerfectOracle(), NoiseParams(0.3, 0.3, seed=5)), VoteParams(1))
    for i in range(300):
        sub = facts[: 1 + i % 6]
        assert a.query(sub) is b.query(sub)


def test_majority_zero_noise():
    facts, _ = xor_triple()
    maj = MajorityOracle(NoisyOracle(PerfectOracle(), NoiseParams(0, 0)), VoteParams(7))
    assert maj.query(facts) is INCONS
    assert maj.query(facts[:2]) is CONS


def test_binomial_examples():
    assert binomial_majority_error(1, 0.3) == pytest.approx(0.3)
    assert binomial_majority_error(3, 0.3) == pytest.approx(3 * 0.09 * 0.7 + 0.027)
    for r in (1, 3, 5, 11):
        assert binomial_majority_error(r, 0.0) == 0.0
    tail = sum(math.comb(11, t) * 0.3**t * 0.7 ** (11 - t) for t in range(6, 12))
    assert binomial_majority_error(11, 0.3) == pytest.approx(tail)
    assert binomial_majority_error(11, 0.3) <= math.exp(-2 * 11 * 0.2**2)
    assert majority_error_bound(11, 0.3) == pytest.approx(math.exp(-2 * 11 * 0.2**2))


def test_counting_wrapper():
    facts = distractors(5)
    inner = PerfectOracle()
    counting = CountingOracle(inner, trace=True)
    verdicts = [counting.query(facts[: i + 1]) for i in range(5)]
    assert verdicts == [inner.query(facts[: i + 1]) for i in range(5)]
    stats = counting.stats()
    assert stats.total_calls == 5
    assert dict(stats.calls_by_subset_size) == {1: 1, 2: 1, 3: 1, 4: 1, 5: 1}
    assert len(counting.trace) == 5


def test_parse_oracle_spec():
    assert str(parse_oracle_spec("perfect")) == "perfect"
    spec = parse_oracle_spec("noisy:0.1,0.2,seed=5")
    assert (spec.alpha, spec.beta, spec.seed) == (0.1, 0.2, 5)
    maj = parse_oracle_spec("majority:3:noisy:0.1,0.1")
    assert maj.votes == 3 and maj.noise() == (0.1, 0.1)
    assert isinstance(maj.build(1), MajorityOracle)
    for bad in ("", "noisy:", "majority:4:perfect", "noisy:2,0", "oracle"):
        with pytest.raises(ValueError):
            parse_oracle_spec(bad)


def test_majority_over_llm_needs_flag():
    spec = parse_oracle_spec("majority:3:llm:/nonexistent.json")
    assert spec.uses_llm
    with pytest.raises(ValueError, match="assume-independent"):
        spec.build()
