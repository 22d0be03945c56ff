"""Global fact-consistency checking: MUS localisation and hitting-set repair."""

__version__ = "0.1.0"

from .factlang import (  # noqa: E402
    Fact,
    Verdict,
    brute_force_consistent,
    enumerate_all_mus,
    ground_truth_consistent,
    render_text,
)
from .oracle import (  # noqa: E402
    CountingOracle,
    MajorityOracle,
    NoiseParams,
    NoisyOracle,
    PerfectOracle,
    VoteParams,
    binomial_majority_error,
)
from .quickxplain import MUS, qx, split, verify_mus  # noqa: E402
from .repair import RepairPolicy, RepairResult, exact_hitting_set, greedy_hitting_set, qxr  # noqa: E402

__all__ = [
    "Fact", "Verdict", "brute_force_consistent", "enumerate_all_mus", "ground_truth_consistent",
    "render_text", "CountingOracle", "MajorityOracle", "NoiseParams", "NoisyOracle",
    "PerfectOracle", "VoteParams", "binomial_majority_error", "MUS", "qx", "split",
    "verify_mus", "RepairPolicy", "RepairResult", "exact_hitting_set", "greedy_hitting_set", "qxr",
]
