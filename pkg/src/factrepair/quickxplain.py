"""Divide-and-conquer localisation of a minimal unsatisfiable subset."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .factlang import Fact, Verdict
from .oracle import Oracle


@dataclass(frozen=True)
class MUS:
    fact_ids: tuple[int, ...]
    source_scope: int = 0
    verified: bool = False

    def __post_init__(self):
        object.__setattr__(self, "fact_ids", tuple(sorted(self.fact_ids)))

    def __len__(self) -> int:
        return len(self.fact_ids)

    def as_set(self) -> frozenset[int]:
        return frozenset(self.fact_ids)


def split(facts: Sequence[Fact]) -> tuple[list[Fact], list[Fact]]:
    """Ceil-split in ascending id order: first half gets the extra element."""
    if len(facts) < 2:
        raise ValueError("split needs at least two facts")
    ordered = sorted(facts, key=lambda f: f.id)
    mid = (len(ordered) + 1) // 2
    return ordered[:mid], ordered[mid:]


def _union(a: Sequence[Fact], b: Sequence[Fact]) -> list[Fact]:
    ids = {f.id for f in a}
    return list(a) + [f for f in b if f.id not in ids]


def qx(oracle: Oracle, facts: Sequence[Fact], background: Sequence[Fact] = (),
       variant: str = "guarded") -> list[Fact]:
    """Return a subset-minimal Δ ⊆ ``facts`` with ``background ∪ Δ`` inconsistent.

    Returns ``[]`` when ``background ∪ facts`` is judged consistent.  The
    caller vouches for ``background`` being consistent; it is never queried
    alone at the top level.

    ``variant="guarded"`` (default) checks, on every recursive call that
    enlarged the background, whether the background alone is already
    inconsistent, in which case nothing from the candidate half is needed.
    ``variant="literal"`` follows the bare recursion without that check; it
    can return non-minimal sets when the conflict lies wholly in the second
    half, and is kept only for comparison.
    """
    if variant not in ("guarded", "literal"):
        raise ValueError(f"unknown qx variant {variant!r}")
    facts = sorted(facts, key=lambda f: f.id)
    if variant == "literal":
        return sorted(_qx_literal(oracle, facts, list(background)), key=lambda f: f.id)
    if not facts:
        return []
    if oracle.query(_union(background, facts)) is Verdict.CONS:
        return []
    return sorted(_qx_guarded(oracle, facts, list(background), added=False), key=lambda f: f.id)


def _qx_guarded(oracle: Oracle, facts: list[Fact], background: list[Fact], added: bool) -> list[Fact]:
    # invariant: background ∪ facts is inconsistent
    if added and oracle.query(background) is Verdict.INCONS:
        return []
    if len(facts) == 1:
        return facts
    s1, s2 = split(facts)
    d1 = _qx_guarded(oracle, s1, _union(background, s2), added=True)
    d2 = _qx_guarded(oracle, s2, _union(background, d1), added=bool(d1))
    return d1 + d2


def _qx_literal(oracle: Oracle, facts: list[Fact], background: list[Fact]) -> list[Fact]:
    if not facts:
        return []
    if oracle.query(_union(background, facts)) is Verdict.CONS:
        return []
    if len(facts) == 1:
        return facts
    s1, s2 = split(facts)
    d1 = _qx_literal(oracle, s1, _union(background, s2))
    d2 = _qx_literal(oracle, s2, _union(background, d1))
    return _union(d1, d2)


def verify_mus(oracle: Oracle, facts: Sequence[Fact]) -> bool:
    """True iff ``facts`` is judged inconsistent and every one-smaller subset consistent."""
    facts = list(facts)
    if not facts:
        raise ValueError("verify_mus needs a nonempty set")
    if oracle.query(facts) is not Verdict.INCONS:
        return False
    # no short-circuit: the cost is always |U| + 1 queries
    results = [oracle.query(facts[:i] + facts[i + 1:]) is Verdict.CONS for i in range(len(facts))]
    return all(results)


def qx_query_budget(k: int, n: int) -> int:
    """Explicit constant for the O(k log N) claim: 2k(ceil(log2 N) + 2)."""
    return 2 * k * (max(n - 1, 0).bit_length() + 2)
