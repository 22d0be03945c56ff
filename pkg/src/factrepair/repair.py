"""Hitting-set repair and the extract-then-repair outer loop."""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Collection, Iterable, Sequence

from .factlang import BudgetExceeded, Fact, Verdict
from .oracle import CountingOracle, Oracle, OracleStats
from .quickxplain import MUS, qx, qx_query_budget

log = logging.getLogger(__name__)

MAX_EXACT_UNIVERSE = 20


def _check_family(family: Iterable[Collection[int]]) -> list[frozenset[int]]:
    sets = [frozenset(s) for s in family]
    if any(not s for s in sets):
        raise ValueError("family contains an empty set, which no hitting set can hit")
    return sets


def greedy_hitting_set(family: Iterable[Collection[int]]) -> set[int]:
    """Repeatedly take the element in the most unhit sets (smallest id on ties)."""
    open_sets = _check_family(family)
    chosen: set[int] = set()
    while open_sets:
        counts = Counter(x for s in open_sets for x in s)
        best = min(counts, key=lambda x: (-counts[x], x))
        chosen.add(best)
        open_sets = [s for s in open_sets if best not in s]
    return chosen


def exact_hitting_set(family: Iterable[Collection[int]]) -> set[int]:
    """Minimum-cardinality hitting set by exhaustive search.

    Candidates of each size are tried in lexicographic order, so the first
    hit is the lexicographically smallest optimum.
    """
    sets = _check_family(family)
    universe = sorted(set().union(*sets)) if sets else []
    if len(universe) > MAX_EXACT_UNIVERSE:
        raise BudgetExceeded(f"universe of {len(universe)} elements is beyond the exact solver's budget")
    for size in range(len(universe) + 1):
        for combo in itertools.combinations(universe, size):
            c = set(combo)
            if all(s & c for s in sets):
                return c
    raise AssertionError("unreachable: the whole universe hits every set")


def all_minimum_hitting_sets(family: Iterable[Collection[int]]) -> list[set[int]]:
    sets = _check_family(family)
    best = exact_hitting_set(sets)
    universe = sorted(set().union(*sets)) if sets else []
    return [set(c) for c in itertools.combinations(universe, len(best)) if all(s & set(c) for s in sets)]


HITTING_SET_SOLVERS = {"greedy": greedy_hitting_set, "exact": exact_hitting_set}


@dataclass
class RepairPolicy:
    round_cap: int | None = None  # default 4 * number of scopes
    retry_limit: int = 3
    hitting_set: str = "greedy"
    qx_variant: str = "guarded"
    max_workers: int = 1


@dataclass
class RetryState:
    limit: int = 3
    attempts: int = 0
    warnings: list[str] = field(default_factory=list)


def handle_empty_extraction(oracle: Oracle, scope: Sequence[Fact], state: RetryState) -> str:
    """Decide what to do after extraction came back empty on an inconsistent-looking scope.

    Returns ``"treat_as_cons"`` or ``"requery"`` (run extraction again).
    """
    if state.attempts >= state.limit:
        msg = f"scope of {len(scope)} facts: extraction stayed empty after {state.limit} retries"
        state.warnings.append(msg)
        log.warning(msg)
        return "treat_as_cons"
    state.attempts += 1
    if oracle.query(scope) is Verdict.CONS:
        return "treat_as_cons"
    return "requery"


@dataclass
class RepairResult:
    surviving: frozenset[int]
    removed: frozenset[int]
    mus_family: list[MUS]
    rounds: int
    converged: bool
    stats: OracleStats
    n_scopes: int
    warnings: list[str] = field(default_factory=list)

    @property
    def k_max(self) -> int:
        return max((len(u) for u in self.mus_family), default=0)

    def to_dict(self) -> dict:
        return {
            "surviving": sorted(self.surviving),
            "removed": sorted(self.removed),
            "mus_family": [
                {"fact_ids": list(u.fact_ids), "scope": u.source_scope, "verified": u.verified}
                for u in self.mus_family
            ],
            "rounds": self.rounds,
            "converged": self.converged,
            "n_scopes": self.n_scopes,
            "stats": self.stats.to_dict(),
            "warnings": list(self.warnings),
        }


def qxr_query_budget(rounds: int, n_scopes: int, k_max: int, n_facts: int) -> int:
    """rounds * m * (2k(ceil(log2 N)+2) + 1), with rounds floored at 1.

    The floor covers the closing pass that confirms every scope consistent,
    which costs m queries even when no round runs.
    """
    return max(rounds, 1) * n_scopes * (qx_query_budget(k_max, n_facts) + 1)


def qxr(
    oracle: Oracle,
    facts: Sequence[Fact],
    scopes: Sequence[Collection[int]] | None = None,
    policy: RepairPolicy | None = None,
) -> RepairResult:
    """Extract one MUS per inconsistent scope, remove a hitting set, repeat."""
    policy = policy or RepairPolicy()
    hitting = HITTING_SET_SOLVERS[policy.hitting_set]
    counting = oracle if isinstance(oracle, CountingOracle) else CountingOracle(oracle)
    by_id = {f.id: f for f in facts}
    if len(by_id) != len(facts):
        raise ValueError("duplicate fact ids")
    scope_sets = [set(s) for s in scopes] if scopes is not None else [set(by_id)]
    for s in scope_sets:
        if not s <= by_id.keys():
            raise ValueError("scope refers to unknown fact ids")
    n_scopes = len(scope_sets)
    cap = policy.round_cap if policy.round_cap is not None else 4 * max(n_scopes, 1)

    surviving = set(by_id)
    removed: set[int] = set()
    family: list[MUS] = []
    warnings: list[str] = []
    rounds = 0
    converged = False

    def members(scope: set[int]) -> list[Fact]:
        return [by_id[i] for i in sorted(scope)]

    def extract(j: int) -> MUS | None:
        scope = members(scope_sets[j])
        origin = scope_index[j]
        state = RetryState(policy.retry_limit)
        while True:
            found = qx(counting, scope, (), policy.qx_variant)
            if found:
                warnings.extend(state.warnings)
                return MUS(tuple(f.id for f in found), origin, verified=counting.exact)
            if handle_empty_extraction(counting, scope, state) == "treat_as_cons":
                warnings.extend(state.warnings)
                return None

    scope_index = list(range(n_scopes))
    while True:
        keep = [j for j, s in enumerate(scope_sets) if s]
        scope_sets = [scope_sets[j] for j in keep]
        scope_index = [scope_index[j] for j in keep]
        incons = [j for j, s in enumerate(scope_sets)
                  if counting.query(members(s)) is Verdict.INCONS]
        if not incons:
            converged = True
            break
        if rounds >= cap:
            warnings.append(f"round cap {cap} reached with {len(incons)} scope(s) still inconsistent")
            break
        rounds += 1
        if policy.max_workers > 1 and len(incons) > 1:
            with ThreadPoolExecutor(policy.max_workers) as pool:
                extracted = list(pool.map(extract, incons))
        else:
            extracted = [extract(j) for j in incons]
        round_family = [u for u in extracted if u is not None]
        if not round_family:
            # every flagged scope was resolved as consistent on re-query
            converged = True
            break
        h = hitting([u.fact_ids for u in round_family])
        surviving -= h
        removed |= h
        scope_sets = [s - h for s in scope_sets]
        family.extend(round_family)

    return RepairResult(
        surviving=frozenset(surviving),
        removed=frozenset(removed),
        mus_family=family,
        rounds=rounds,
        converged=converged,
        stats=counting.stats(),
        n_scopes=n_scopes,
        warnings=warnings,
    )
