"""Subset-consistency oracles.

Every oracle exposes ``query(facts) -> Verdict``.  Wrappers compose:
``CountingOracle(MajorityOracle(NoisyOracle(PerfectOracle(), ...), ...))``.
All oracles are safe to call from several threads.
"""

from __future__ import annotations

import hashlib
import math
import struct
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Collection, Iterator, Protocol

from .factlang import Fact, Verdict, ground_truth_consistent


class Oracle(Protocol):
    exact: bool

    def query(self, facts: Collection[Fact]) -> Verdict: ...


def subset_key(facts: Collection[Fact]) -> tuple[int, ...]:
    return tuple(sorted(f.id for f in facts))


class _Counted:
    """Mixin keeping a thread-safe call counter."""

    label = "oracle"

    def __init__(self):
        self._lock = threading.Lock()
        self.calls = 0

    def _tick(self) -> None:
        with self._lock:
            self.calls += 1


class PerfectOracle(_Counted):
    """Answers with the ground-truth consistency function.

    ``memoize`` caches verdicts by subset content (ids and logical forms).
    Only this oracle may memoize, since noisy layers need fresh draws on
    every call.
    """

    label = "perfect"
    exact = True

    def __init__(self, memoize: bool = False):
        super().__init__()
        self._cache: dict[frozenset, Verdict] | None = {} if memoize else None

    def query(self, facts: Collection[Fact]) -> Verdict:
        self._tick()
        if self._cache is None:
            return ground_truth_consistent(facts)
        key = frozenset((f.id, f.logic) for f in facts)
        v = self._cache.get(key)
        if v is None:
            v = self._cache[key] = ground_truth_consistent(facts)
        return v


@dataclass(frozen=True)
class NoiseParams:
    alpha: float
    beta: float
    seed: int = 0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} is not a probability")

    @property
    def eps(self) -> float:
        return max(self.alpha, self.beta)


def keyed_uniform(seed: int, key: tuple[int, ...], counter: int) -> float:
    """Uniform draw in [0, 1) fixed by (seed, subset, call index)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<qq", seed & 0x7FFFFFFFFFFFFFFF, counter))
    h.update(struct.pack(f"<{len(key)}q", *key))
    return int.from_bytes(h.digest(), "little") / 2.0**64


class NoisyOracle(_Counted):
    """Flips cons->incons with probability alpha and incons->cons with beta.

    The random stream is keyed by (seed, subset ids, per-subset call count),
    so results do not depend on thread scheduling or process boundaries.
    """

    label = "noisy"

    def __init__(self, inner: Oracle, params: NoiseParams):
        super().__init__()
        self.inner = inner
        self.params = params
        self._seen: Counter = Counter()

    @property
    def exact(self) -> bool:
        return self.inner.exact and self.params.alpha == 0 and self.params.beta == 0

    def query(self, facts: Collection[Fact]) -> Verdict:
        self._tick()
        key = subset_key(facts)
        with self._lock:
            counter = self._seen[key]
            self._seen[key] += 1
        v = self.inner.query(facts)
        p = self.params.alpha if v is Verdict.CONS else self.params.beta
        if p > 0 and keyed_uniform(self.params.seed, key, counter) < p:
            return v.flipped()
        return v


@dataclass(frozen=True)
class VoteParams:
    r: int

    def __post_init__(self):
        if self.r < 1 or self.r % 2 == 0:
            raise ValueError(f"repetitions must be a positive odd integer, got {self.r}")


def vote_margin(alpha: float, beta: float) -> float:
    """gamma = 1/2 - max(alpha, beta)."""
    return 0.5 - max(alpha, beta)


def majority_error_bound(r: int, eps: float) -> float:
    """Hoeffding bound exp(-2 r gamma^2) on the majority-vote error."""
    gamma = 0.5 - eps
    if gamma <= 0:
        raise ValueError("bound needs eps < 1/2")
    return math.exp(-2.0 * r * gamma * gamma)


def binomial_majority_error(r: int, eps: float) -> float:
    """Exact probability that at least half of r independent eps-noisy votes are wrong."""
    if r < 1 or r % 2 == 0:
        raise ValueError("r must be a positive odd integer")
    if not 0.0 <= eps < 0.5:
        raise ValueError("eps must lie in [0, 1/2)")
    return math.fsum(
        math.comb(r, t) * eps**t * (1.0 - eps) ** (r - t) for t in range((r + 1) // 2, r + 1)
    )


class MajorityOracle(_Counted):
    label = "majority"

    def __init__(self, inner: Oracle, params: VoteParams):
        super().__init__()
        self.inner = inner
        self.params = params

    @property
    def exact(self) -> bool:
        return self.inner.exact

    def query(self, facts: Collection[Fact]) -> Verdict:
        self._tick()
        incons = sum(self.inner.query(facts) is Verdict.INCONS for _ in range(self.params.r))
        return Verdict.INCONS if 2 * incons > self.params.r else Verdict.CONS


@dataclass
class OracleStats:
    total_calls: int = 0
    calls_by_subset_size: Counter = field(default_factory=Counter)
    per_wrapper: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total_calls": self.total_calls,
            "calls_by_subset_size": {str(k): v for k, v in sorted(self.calls_by_subset_size.items())},
            "per_wrapper": dict(self.per_wrapper),
        }


def oracle_chain(oracle) -> Iterator:
    while oracle is not None:
        yield oracle
        oracle = getattr(oracle, "inner", None)


class CountingOracle(_Counted):
    """Transparent wrapper recording call totals and a subset-size histogram."""

    label = "counting"

    def __init__(self, inner: Oracle, trace: bool = False):
        super().__init__()
        self.inner = inner
        self.by_size: Counter = Counter()
        self.trace: list[tuple[tuple[int, ...], Verdict]] | None = [] if trace else None

    @property
    def exact(self) -> bool:
        return self.inner.exact

    def query(self, facts: Collection[Fact]) -> Verdict:
        v = self.inner.query(facts)
        with self._lock:
            self.calls += 1
            self.by_size[len(facts)] += 1
            if self.trace is not None:
                self.trace.append((subset_key(facts), v))
        return v

    def stats(self) -> OracleStats:
        with self._lock:
            per = {}
            for layer in oracle_chain(self.inner):
                label = getattr(layer, "label", type(layer).__name__)
                per[label] = per.get(label, 0) + getattr(layer, "calls", 0)
            return OracleStats(self.calls, Counter(self.by_size), per)


class AuditOracle(_Counted):
    """Compares every verdict of ``inner`` with a reference oracle and counts errors."""

    label = "audit"

    def __init__(self, inner: Oracle, reference: Oracle | None = None):
        super().__init__()
        self.inner = inner
        self.reference = reference or PerfectOracle()
        self.errors = 0

    @property
    def exact(self) -> bool:
        return self.inner.exact

    def query(self, facts: Collection[Fact]) -> Verdict:
        v = self.inner.query(facts)
        wrong = v is not self.reference.query(facts)
        with self._lock:
            self.calls += 1
            self.errors += wrong
        return v


# --------------------------------------------------------------------------
# textual oracle specs: perfect | noisy:A,B[,seed=S] | majority:R:<spec> | llm:PATH


@dataclass(frozen=True)
class OracleSpec:
    kind: str
    alpha: float = 0.0
    beta: float = 0.0
    seed: int | None = None
    votes: int = 1
    inner: "OracleSpec | None" = None
    llm_config: str | None = None

    def __str__(self) -> str:
        if self.kind == "perfect":
            return "perfect"
        if self.kind == "noisy":
            tail = f",seed={self.seed}" if self.seed is not None else ""
            return f"noisy:{self.alpha:g},{self.beta:g}{tail}"
        if self.kind == "majority":
            return f"majority:{self.votes}:{self.inner}"
        return f"llm:{self.llm_config}"

    @property
    def uses_llm(self) -> bool:
        return self.kind == "llm" or (self.inner is not None and self.inner.uses_llm)

    def root_seed(self, default: int) -> int:
        """First seed written anywhere in the spec chain, else ``default``."""
        spec = self
        while spec is not None:
            if spec.seed is not None:
                return spec.seed
            spec = spec.inner
        return default

    def noise(self) -> tuple[float, float]:
        if self.kind == "noisy":
            return self.alpha, self.beta
        if self.inner is not None:
            return self.inner.noise()
        return 0.0, 0.0

    def build(self, seed: int | None = None, *, assume_independent: bool = False, memoize: bool = False):
        """Instantiate the oracle stack.

        ``seed``, when given, overrides the seed written in the spec; callers
        use it to give each instance its own derived noise stream.
        """
        if self.kind == "perfect":
            return PerfectOracle(memoize=memoize)
        if self.kind == "noisy":
            s = seed if seed is not None else (self.seed or 0)
            return NoisyOracle(PerfectOracle(memoize=memoize), NoiseParams(self.alpha, self.beta, s))
        if self.kind == "majority":
            if self.inner.uses_llm and self.votes > 1 and not assume_independent:
                raise ValueError(
                    "majority voting over an LLM judge assumes independent repeated calls; "
                    "pass --assume-independent to accept that modelling assumption"
                )
            inner = self.inner.build(seed, assume_independent=assume_independent, memoize=memoize)
            return MajorityOracle(inner, VoteParams(self.votes))
        if self.kind == "llm":
            from .llm import LLMConfig, LLMOracle

            return LLMOracle(LLMConfig.load(self.llm_config))
        raise ValueError(f"unknown oracle kind {self.kind!r}")


def parse_oracle_spec(text: str) -> OracleSpec:
    text = text.strip()
    head, _, rest = text.partition(":")
    if head == "perfect" and not rest:
        return OracleSpec("perfect")
    if head == "noisy":
        parts = [p.strip() for p in rest.split(",") if p.strip()]
        seed = None
        nums = []
        for p in parts:
            if p.startswith("seed="):
                seed = int(p[5:])
            else:
                nums.append(float(p))
        if len(nums) == 1:
            nums *= 2
        if len(nums) != 2:
            raise ValueError(f"noisy oracle needs alpha,beta: {text!r}")
        NoiseParams(nums[0], nums[1])
        return OracleSpec("noisy", alpha=nums[0], beta=nums[1], seed=seed)
    if head == "majority":
        r, _, inner = rest.partition(":")
        if not inner:
            raise ValueError(f"majority oracle needs an inner spec: {text!r}")
        VoteParams(int(r))
        return OracleSpec("majority", votes=int(r), inner=parse_oracle_spec(inner))
    if head == "llm" and rest:
        return OracleSpec("llm", llm_config=rest)
    raise ValueError(f"unrecognised oracle spec {text!r}")
