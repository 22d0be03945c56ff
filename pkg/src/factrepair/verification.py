"""Brute-force property checks at desk scale.

Each check returns a :class:`PropertyResult`; :func:`run_all` runs the
default suite that backs the ``verify`` subcommand.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable

from .datagen import GenConfig, Instance, derive_seed, generate, generate_many
from .factlang import (
    Atom,
    Before,
    Binary,
    BudgetExceeded,
    Entity,
    ExactlyOne,
    Fact,
    Kind,
    NumericBound,
    Unary,
    UNARY_PREDICATES,
    Verdict,
    brute_force_consistent,
    enumerate_all_mus,
    ground_truth_consistent,
    make_fact,
)
from .oracle import PerfectOracle
from .quickxplain import qx, verify_mus
from .repair import RepairPolicy, exact_hitting_set, greedy_hitting_set, qxr

_RANDOM_ENTITIES = {
    "Rex": Kind.ANIMAL, "Fido": Kind.ANIMAL, "Ann": Kind.PERSON,
    "Acme": Kind.ORG, "Oslo": Kind.LOC,
    "Summit": Kind.EVENT, "Election": Kind.EVENT, "Gala": Kind.EVENT, "Expo": Kind.EVENT,
}
RANDOM_ENTITY_TABLE = {n: Entity(n, k) for n, k in _RANDOM_ENTITIES.items()}


def random_fact_set(rng: random.Random, n: int) -> list[Fact]:
    """A small random fact set over a tight vocabulary, so conflicts are common.

    Unary atoms range over three entities and five predicates (15 atoms) and
    binary atoms over three pairs, keeping brute force within budget.
    """
    subjects = ["Rex", "Fido", "Ann"]
    events = ["Summit", "Election", "Gala", "Expo"]
    binaries = [("WorksFor", "Ann", "Acme"), ("LocatedIn", "Acme", "Oslo"), ("LocatedIn", "Ann", "Oslo")]
    atoms = [Atom(p, e) for p in UNARY_PREDICATES for e in subjects]
    forms = []
    while len(forms) < n:
        roll = rng.random()
        if roll < 0.4:
            lf = Unary(rng.choice(UNARY_PREDICATES), rng.choice(subjects), rng.random() < 0.7)
        elif roll < 0.55:
            rel, s, o = rng.choice(binaries)
            lf = Binary(rel, s, o, rng.random() < 0.5)
        elif roll < 0.75:
            a, b = rng.sample(events, 2) if rng.random() < 0.97 else [rng.choice(events)] * 2
            lf = Before(a, b)
        elif roll < 0.9:
            lf = ExactlyOne(tuple(rng.sample(atoms, 3)))
        else:
            lf = NumericBound(rng.choice(["Oslo", "Acme"]), rng.choice(["at_least", "at_most"]),
                              rng.randint(0, 10))
        if lf not in forms:
            forms.append(lf)
    return [make_fact(i, lf, RANDOM_ENTITY_TABLE) for i, lf in enumerate(forms)]


def xor_triple() -> tuple[list[Fact], dict[str, Entity]]:
    """Three facts, every pair consistent, all three jointly inconsistent.

    Parity encoding: the rule "exactly one of X, Y, Z" plus the assertions X
    and Y.
    """
    entities = {"Rex": Entity("Rex", Kind.ANIMAL)}
    forms = [
        ExactlyOne((Atom("IsTiger", "Rex"), Atom("IsDog", "Rex"), Atom("IsActor", "Rex"))),
        Unary("IsTiger", "Rex", True),
        Unary("IsDog", "Rex", True),
    ]
    return [make_fact(i, lf, entities) for i, lf in enumerate(forms)], entities


@dataclass
class PropertyResult:
    name: str
    passed: bool
    checked: int = 0
    skipped: int = 0
    failures: list[str] = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f", skipped {self.skipped} over size cap" if self.skipped else ""
        head = f"{status} {self.name}: {self.checked} checked{extra}"
        return head + (f"; first failure: {self.failures[0]}" if self.failures else "")


def _result(name: str, checked: int, failures: list[str], skipped: int = 0) -> PropertyResult:
    return PropertyResult(name, not failures, checked, skipped, failures)


def check_oracle_agreement(samples: int = 1000, size: int = 12, seed: int = 0) -> PropertyResult:
    rng = random.Random(seed)
    failures, skipped, checked = [], 0, 0
    for i in range(samples):
        facts = random_fact_set(rng, size)
        try:
            brute = brute_force_consistent(facts)
        except BudgetExceeded:
            skipped += 1
            continue
        checked += 1
        if brute is not ground_truth_consistent(facts):
            failures.append(f"sample {i}: {[f.text for f in facts]}")
    return _result("oracle agreement (ground truth vs brute force)", checked, failures, skipped)


def check_monotonicity(samples: int = 500, size: int = 10, seed: int = 1) -> PropertyResult:
    rng = random.Random(seed)
    failures, checked = [], 0
    for i in range(samples):
        facts = random_fact_set(rng, size + 1)
        base, extra = facts[:-1], facts[-1]
        if ground_truth_consistent(base) is Verdict.INCONS:
            checked += 1
            if ground_truth_consistent(facts) is not Verdict.INCONS:
                failures.append(f"sample {i}: adding {extra.text!r} restored consistency")
    return _result("monotonicity", checked, failures)


def check_mus_existence(samples: int = 200, size: int = 10, seed: int = 2) -> PropertyResult:
    rng = random.Random(seed)
    failures, checked = [], 0
    for i in range(samples):
        facts = random_fact_set(rng, size)
        if ground_truth_consistent(facts) is Verdict.INCONS:
            checked += 1
            if not enumerate_all_mus(facts):
                failures.append(f"sample {i}: inconsistent but no MUS found")
    return _result("MUS existence", checked, failures)


def small_suite(count: int, seed: int, max_size: int = 14) -> list[Instance]:
    """Generated instances with 6..max_size facts and a rotating pattern mix."""
    mixes = [
        (("negation_pair", 1),),
        (("negation_pair", 2),),
        (("temporal_cycle", 1),),
        (("exactly_one", 1),),
        (("negation_pair", 1), ("temporal_cycle", 1)),
        (("negation_pair", 1), ("exactly_one", 1)),
        (("temporal_cycle", 1), ("exactly_one", 1)),
        (),
    ]
    out = []
    for i in range(count):
        mix = mixes[i % len(mixes)]
        need = sum(3 if p != "negation_pair" else 2 for p, c in mix for _ in range(c))
        rng = random.Random(derive_seed(seed, "small", i))
        n = rng.randint(max(need, 6), max_size)
        cfg = GenConfig(n_facts=n, planted=mix, seed=derive_seed(seed, "small-cfg", i))
        out.append(generate(cfg, instance_id=f"small{seed}-{i}"))
    return out


def check_qx_minimality(instances: list[Instance], max_size: int = 14) -> PropertyResult:
    failures, checked, skipped = [], 0, 0
    oracle = PerfectOracle()
    for inst in instances:
        if len(inst.facts) > max_size:
            skipped += 1
            continue
        facts = list(inst.facts)
        if ground_truth_consistent(facts) is Verdict.CONS:
            continue
        checked += 1
        found = frozenset(f.id for f in qx(oracle, facts))
        if found not in set(enumerate_all_mus(facts)):
            failures.append(f"{inst.id}: qx returned {sorted(found)}, not a MUS")
        elif not verify_mus(oracle, inst.subset(found)):
            failures.append(f"{inst.id}: verify_mus rejected {sorted(found)}")
    return _result("qx minimality vs brute-force MUS enumeration", checked, failures, skipped)


class _FlipFirst:
    """Test hook: inverts the very first verdict, then behaves perfectly."""

    exact = False
    label = "mutant"

    def __init__(self):
        self.inner = PerfectOracle()
        self.calls = 0

    def query(self, facts):
        self.calls += 1
        v = self.inner.query(facts)
        return v.flipped() if self.calls == 1 else v


def min_deletion_brute_force(inst: Instance) -> int:
    """Smallest removal set R with every scope of F minus R consistent, by enumeration."""
    ids = [f.id for f in inst.facts]
    for size in range(len(ids) + 1):
        for removal in itertools.combinations(ids, size):
            keep = set(ids) - set(removal)
            if all(ground_truth_consistent(inst.subset(set(s) & keep)) is Verdict.CONS
                   for s in inst.scopes):
                return size
    raise AssertionError("unreachable")


def check_duality(instances: list[Instance], max_size: int = 14, mutate: bool = False) -> PropertyResult:
    """|F'| under exact repair == |F| - min hitting set of all MUSes == brute-force optimum."""
    failures, checked, skipped = [], 0, 0
    for inst in instances:
        n = len(inst.facts)
        if n > max_size:
            skipped += 1
            continue
        checked += 1
        facts = list(inst.facts)
        all_mus = set()
        for scope in inst.scopes:
            all_mus.update(enumerate_all_mus(inst.subset(scope)))
        hs = exact_hitting_set(all_mus)
        oracle = _FlipFirst() if mutate else PerfectOracle()
        res = qxr(oracle, facts, inst.scopes, RepairPolicy(hitting_set="exact"))
        best = min_deletion_brute_force(inst)
        if not (len(res.surviving) == n - len(hs) == n - best):
            failures.append(
                f"{inst.id}: |F'|={len(res.surviving)}, |F|-|H*|={n - len(hs)}, brute optimum {n - best}"
            )
    return _result("hitting-set duality", checked, failures, skipped)


def check_soundness(instances: list[Instance]) -> PropertyResult:
    failures = []
    for inst in instances:
        res = qxr(PerfectOracle(), list(inst.facts), inst.scopes)
        keep = set(res.surviving)
        if not all(ground_truth_consistent(inst.subset(set(s) & keep)) is Verdict.CONS for s in inst.scopes):
            failures.append(f"{inst.id}: a scope is inconsistent after repair")
        if any(u.as_set() <= keep for u in res.mus_family):
            failures.append(f"{inst.id}: an extracted MUS survived")
    return _result("soundness under the perfect oracle", len(instances), failures)


def random_family(rng: random.Random, max_m: int = 12, universe: int = 15) -> list[set[int]]:
    m = rng.randint(1, max_m)
    return [set(rng.sample(range(universe), rng.randint(1, 4))) for _ in range(m)]


def check_greedy_bound(samples: int = 500, seed: int = 3) -> PropertyResult:
    rng = random.Random(seed)
    failures = []
    for i in range(samples):
        fam = random_family(rng)
        g, h = greedy_hitting_set(fam), exact_hitting_set(fam)
        if len(g) > (1 + math.log(len(fam))) * len(h) + 1e-9:
            failures.append(f"family {i}: greedy {len(g)} vs optimum {len(h)}, m={len(fam)}")
    return _result("greedy hitting-set approximation bound", samples, failures)


def run_all(seed: int = 0, max_size: int = 14, mutate: bool = False,
            small_count: int = 64, suite_count: int = 100, suite_n: int = 30) -> list[PropertyResult]:
    # the suite keeps its own size range so a lower cap shows up as skips
    small = small_suite(small_count, seed, max_size=max(max_size, 14))
    suite = generate_many(
        GenConfig(n_facts=suite_n, planted=(("negation_pair", 1), ("temporal_cycle", 1), ("exactly_one", 1)),
                  seed=derive_seed(seed, "suite")),
        suite_count,
    )
    checks: list[Callable[[], PropertyResult]] = [
        lambda: check_oracle_agreement(seed=seed),
        lambda: check_monotonicity(seed=seed + 1),
        lambda: check_mus_existence(seed=seed + 2),
        lambda: check_qx_minimality(small, max_size),
        lambda: check_duality(small, max_size, mutate=mutate),
        lambda: check_soundness(suite),
        lambda: check_greedy_bound(seed=seed + 3),
    ]
    return [c() for c in checks]
