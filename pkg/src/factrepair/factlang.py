"""Synthetic fact language and its ground-truth consistency semantics.

Facts are built structurally (never parsed from text).  Each fact carries a
logical form and a deterministic English rendering.  Two independent
decision procedures are provided: :func:`ground_truth_consistent`
(propagation plus a small search over "exactly one" rules) and
:func:`brute_force_consistent` (truth-table enumeration).  They must agree on
every input within the brute-force budget.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

import numpy as np


class Verdict(str, Enum):
    CONS = "cons"
    INCONS = "incons"

    @classmethod
    def of(cls, consistent: bool) -> "Verdict":
        return cls.CONS if consistent else cls.INCONS

    def flipped(self) -> "Verdict":
        return Verdict.INCONS if self is Verdict.CONS else Verdict.CONS


class Kind(str, Enum):
    PERSON = "PERSON"
    ORG = "ORG"
    LOC = "LOC"
    EVENT = "EVENT"
    ANIMAL = "ANIMAL"


@dataclass(frozen=True)
class Entity:
    name: str
    kind: Kind


UNARY_PREDICATES = ("IsTiger", "IsDog", "IsActor", "IsPolitician", "IsAnimal")
RELATIONS = ("WorksFor", "LocatedIn")
BOUND_KINDS = ("at_least", "at_most")

# Taxonomy closure: subtype -> supertype.  No other cross-predicate rules.
IMPLIES = {"IsTiger": "IsAnimal", "IsDog": "IsAnimal"}


class BudgetExceeded(ValueError):
    """A brute-force routine was asked to work beyond its size cap."""


class UnknownEntityError(KeyError):
    pass


class Atom(NamedTuple):
    """A unary ground atom, e.g. ``IsTiger(Rex)``."""

    predicate: str
    entity: str


@dataclass(frozen=True)
class Unary:
    predicate: str
    entity: str
    positive: bool = True

    def __post_init__(self):
        if self.predicate not in UNARY_PREDICATES:
            raise ValueError(f"unknown unary predicate {self.predicate!r}")

    @property
    def atom(self) -> Atom:
        return Atom(self.predicate, self.entity)


@dataclass(frozen=True)
class Binary:
    relation: str
    subject: str
    object: str
    positive: bool = True

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")


@dataclass(frozen=True)
class Before:
    first: str
    second: str


@dataclass(frozen=True)
class ExactlyOne:
    atoms: tuple[Atom, Atom, Atom]

    def __post_init__(self):
        atoms = tuple(Atom(*a) for a in self.atoms)
        if len(atoms) != 3 or len(set(atoms)) != 3:
            raise ValueError("ExactlyOne needs three distinct atoms")
        for a in atoms:
            if a.predicate not in UNARY_PREDICATES:
                raise ValueError(f"unknown unary predicate {a.predicate!r}")
        object.__setattr__(self, "atoms", atoms)


@dataclass(frozen=True)
class NumericBound:
    entity: str
    bound: str
    value: int

    def __post_init__(self):
        if self.bound not in BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.bound!r}")
        if self.value < 0:
            raise ValueError("numeric bound must be non-negative")


LogicalForm = Union[Unary, Binary, Before, ExactlyOne, NumericBound]


@dataclass(frozen=True)
class Fact:
    id: int
    text: str
    logic: LogicalForm


# --------------------------------------------------------------------------
# rendering

_CATEGORY_NOUN = {
    "IsTiger": "a tiger",
    "IsDog": "a dog",
    "IsActor": "an actor",
    "IsPolitician": "a politician",
    "IsAnimal": "an animal",
}


def _entities_of(logic: LogicalForm) -> list[str]:
    if isinstance(logic, Unary):
        return [logic.entity]
    if isinstance(logic, Binary):
        return [logic.subject, logic.object]
    if isinstance(logic, Before):
        return [logic.first, logic.second]
    if isinstance(logic, ExactlyOne):
        return [a.entity for a in logic.atoms]
    if isinstance(logic, NumericBound):
        return [logic.entity]
    raise TypeError(f"not a logical form: {logic!r}")


def _clause(predicate: str, name: str, positive: bool) -> str:
    return f"{name} is {'' if positive else 'not '}{_CATEGORY_NOUN[predicate]}"


def render_text(logic: LogicalForm, entities: Mapping[str, Entity]) -> str:
    """Render a logical form as one English sentence.

    Raises :class:`UnknownEntityError` if the form mentions an entity that is
    not in ``entities``.
    """
    for name in _entities_of(logic):
        if name not in entities:
            raise UnknownEntityError(name)

    if isinstance(logic, Unary):
        return _clause(logic.predicate, logic.entity, logic.positive) + "."
    if isinstance(logic, Binary):
        s, o = logic.subject, logic.object
        if logic.relation == "WorksFor":
            verb = "works for" if logic.positive else "does not work for"
        else:
            verb = "is located in" if logic.positive else "is not located in"
        return f"{s} {verb} {o}."
    if isinstance(logic, Before):
        return f"{logic.first} happened before {logic.second}."
    if isinstance(logic, ExactlyOne):
        a, b, c = (_clause(p, e, True) for p, e in logic.atoms)
        return f"Exactly one of the following holds: {a}, {b}, or {c}."
    if isinstance(logic, NumericBound):
        phrase = "at least" if logic.bound == "at_least" else "at most"
        return f"{logic.entity} has {phrase} {logic.value} cases."
    raise TypeError(f"not a logical form: {logic!r}")


def make_fact(fact_id: int, logic: LogicalForm, entities: Mapping[str, Entity]) -> Fact:
    return Fact(fact_id, render_text(logic, entities), logic)


def logic_to_dict(logic: LogicalForm) -> dict:
    if isinstance(logic, Unary):
        return {"type": "unary", "predicate": logic.predicate,
                "entity": logic.entity, "positive": logic.positive}
    if isinstance(logic, Binary):
        return {"type": "binary", "relation": logic.relation, "subject": logic.subject,
                "object": logic.object, "positive": logic.positive}
    if isinstance(logic, Before):
        return {"type": "before", "first": logic.first, "second": logic.second}
    if isinstance(logic, ExactlyOne):
        return {"type": "exactly_one", "atoms": [[a.predicate, a.entity] for a in logic.atoms]}
    if isinstance(logic, NumericBound):
        return {"type": "numeric_bound", "entity": logic.entity,
                "bound": logic.bound, "value": logic.value}
    raise TypeError(f"not a logical form: {logic!r}")


def logic_from_dict(d: Mapping) -> LogicalForm:
    """Inverse of :func:`logic_to_dict`.  Raises KeyError/ValueError on bad input."""
    kind = d["type"]
    if kind == "unary":
        return Unary(d["predicate"], d["entity"], bool(d["positive"]))
    if kind == "binary":
        return Binary(d["relation"], d["subject"], d["object"], bool(d["positive"]))
    if kind == "before":
        return Before(d["first"], d["second"])
    if kind == "exactly_one":
        return ExactlyOne(tuple(Atom(p, e) for p, e in d["atoms"]))
    if kind == "numeric_bound":
        return NumericBound(d["entity"], d["bound"], int(d["value"]))
    raise ValueError(f"unknown logical form type {kind!r}")


# --------------------------------------------------------------------------
# ground truth


def _before_acyclic(edges: Iterable[tuple[str, str]]) -> bool:
    succ: dict[str, set[str]] = defaultdict(set)
    indeg: dict[str, int] = defaultdict(int)
    nodes: set[str] = set()
    for a, b in edges:
        if a == b:
            return False
        nodes.update((a, b))
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    ready = [n for n in nodes if indeg[n] == 0]
    seen = 0
    while ready:
        n = ready.pop()
        seen += 1
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    return seen == len(nodes)


def _propagate(assign: dict, pending: list, rules: Sequence[tuple], rules_of: Mapping) -> bool:
    """Unit propagation over literals, taxonomy closure and exactly-one rules.

    Mutates ``assign``; returns False on conflict.
    """
    while pending:
        atom, value = pending.pop()
        have = assign.get(atom)
        if have is not None:
            if have != value:
                return False
            continue
        assign[atom] = value
        if atom[0] == "u":
            _, pred, ent = atom
            if value and pred in IMPLIES:
                pending.append((("u", IMPLIES[pred], ent), True))
            if not value:
                for sub, sup in IMPLIES.items():
                    if sup == pred:
                        pending.append((("u", sub, ent), False))
        for ri in rules_of.get(atom, ()):
            vals = [assign.get(a) for a in rules[ri]]
            n_true = vals.count(True)
            n_false = vals.count(False)
            if n_true >= 2 or n_false == 3:
                return False
            if n_true == 1:
                pending.extend((a, False) for a, v in zip(rules[ri], vals) if v is None)
            elif n_false == 2:
                pending.extend((a, True) for a, v in zip(rules[ri], vals) if v is None)
    return True


def _rules_satisfiable(assign: dict, rules: Sequence[tuple], rules_of: Mapping) -> bool:
    open_rule = next((r for r in rules if not any(assign.get(a) for a in r)), None)
    if open_rule is None:
        return True
    # An open rule has no true atom and at most one false one: branch on a free atom.
    atom = next(a for a in open_rule if assign.get(a) is None)
    for value in (True, False):
        trial = dict(assign)
        if _propagate(trial, [(atom, value)], rules, rules_of) and \
                _rules_satisfiable(trial, rules, rules_of):
            return True
    return False


def ground_truth_consistent(facts: Iterable[Fact]) -> Verdict:
    """The reference consistency function over a set of facts."""
    pending: list = []
    rules: list[tuple] = []
    edges: list[tuple[str, str]] = []
    lower: dict[str, int] = {}
    upper: dict[str, int] = {}
    for f in facts:
        lf = f.logic
        if isinstance(lf, Unary):
            pending.append((("u", lf.predicate, lf.entity), lf.positive))
        elif isinstance(lf, Binary):
            pending.append((("b", lf.relation, lf.subject, lf.object), lf.positive))
        elif isinstance(lf, Before):
            edges.append((lf.first, lf.second))
        elif isinstance(lf, ExactlyOne):
            rules.append(tuple(("u", p, e) for p, e in lf.atoms))
        elif isinstance(lf, NumericBound):
            if lf.bound == "at_least":
                lower[lf.entity] = max(lower.get(lf.entity, 0), lf.value)
            else:
                upper[lf.entity] = min(upper.get(lf.entity, lf.value), lf.value)
        else:
            raise TypeError(f"not a fact: {f!r}")

    if any(lower.get(e, 0) > hi for e, hi in upper.items()):
        return Verdict.INCONS
    if edges and not _before_acyclic(edges):
        return Verdict.INCONS

    rules_of: dict = defaultdict(list)
    for i, r in enumerate(rules):
        for a in r:
            rules_of[a].append(i)
    assign: dict = {}
    if not _propagate(assign, pending, rules, rules_of):
        return Verdict.INCONS
    return Verdict.of(_rules_satisfiable(assign, rules, rules_of))


# --------------------------------------------------------------------------
# brute force

MAX_BRUTE_ATOMS = 22
MAX_BRUTE_EVENTS = 9


def brute_force_consistent(facts: Iterable[Fact], domain_bound: int | None = None) -> Verdict:
    """Decide consistency by enumerating every model.

    Boolean atoms are enumerated as a vectorised truth table, Before edges by
    trying every ordering of the events involved, and numeric bounds by trying
    every integer in ``[0, domain_bound]``.
    """
    facts = list(facts)
    atoms: dict[tuple, int] = {}

    def index(atom: tuple) -> int:
        if atom not in atoms:
            atoms[atom] = len(atoms)
        return atoms[atom]

    literals: list[tuple[int, bool]] = []
    rules: list[tuple[int, int, int]] = []
    edges: list[tuple[str, str]] = []
    bounds: dict[str, list[tuple[str, int]]] = defaultdict(list)
    for f in facts:
        lf = f.logic
        if isinstance(lf, Unary):
            literals.append((index(("u", lf.predicate, lf.entity)), lf.positive))
        elif isinstance(lf, Binary):
            literals.append((index(("b", lf.relation, lf.subject, lf.object)), lf.positive))
        elif isinstance(lf, ExactlyOne):
            rules.append(tuple(index(("u", p, e)) for p, e in lf.atoms))
        elif isinstance(lf, Before):
            edges.append((lf.first, lf.second))
        elif isinstance(lf, NumericBound):
            bounds[lf.entity].append((lf.bound, lf.value))
    closure = []
    for atom in list(atoms):
        if atom[0] == "u" and atom[1] in IMPLIES:
            closure.append((atoms[atom], index(("u", IMPLIES[atom[1]], atom[2]))))
    n = len(atoms)
    if n > MAX_BRUTE_ATOMS:
        raise BudgetExceeded(f"{n} atoms exceeds brute-force budget of {MAX_BRUTE_ATOMS}")

    models = np.arange(1 << n, dtype=np.int64)
    ok = np.ones(1 << n, dtype=bool)
    bit = [((models >> i) & 1).astype(bool) for i in range(n)]
    for i, positive in literals:
        ok &= bit[i] if positive else ~bit[i]
    for a, b, c in rules:
        ok &= (bit[a].astype(np.int8) + bit[b] + bit[c]) == 1
    for sub, sup in closure:
        ok &= ~bit[sub] | bit[sup]
    if not ok.any():
        return Verdict.INCONS

    if edges:
        events = sorted({e for edge in edges for e in edge})
        if len(events) > MAX_BRUTE_EVENTS:
            raise BudgetExceeded(f"{len(events)} events exceeds ordering budget")
        if not any(
            all(order.index(a) < order.index(b) for a, b in edges)
            for order in itertools.permutations(events)
        ):
            return Verdict.INCONS

    for ent, bs in bounds.items():
        top = domain_bound if domain_bound is not None else max(v for _, v in bs) + 1
        if not any(
            all(x >= v if kind == "at_least" else x <= v for kind, v in bs)
            for x in range(top + 1)
        ):
            return Verdict.INCONS
    return Verdict.CONS


# --------------------------------------------------------------------------
# MUS enumeration


def enumerate_all_mus(facts: Sequence[Fact], k_max: int | None = None) -> list[frozenset[int]]:
    """Every minimal unsatisfiable subset of ``facts`` with at most ``k_max`` members.

    Subsets are scanned by increasing size; supersets of MUSes already found
    are skipped, so any inconsistent subset reached is minimal.
    """
    facts = sorted(facts, key=lambda f: f.id)
    n = len(facts)
    k_max = n if k_max is None else min(k_max, n)
    if n > 16 and k_max > 4:
        raise BudgetExceeded(f"|S|={n} with k_max={k_max} is beyond the enumeration budget")
    found: list[int] = []
    result: list[frozenset[int]] = []
    for size in range(1, k_max + 1):
        for combo in itertools.combinations(range(n), size):
            mask = 0
            for i in combo:
                mask |= 1 << i
            if any(m & mask == m for m in found):
                continue
            if ground_truth_consistent(facts[i] for i in combo) is Verdict.INCONS:
                found.append(mask)
                result.append(frozenset(facts[i].id for i in combo))
    return result
