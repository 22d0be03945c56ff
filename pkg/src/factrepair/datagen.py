"""Synthetic benchmark instances with planted conflicts and gold annotations.

Each instance is a shuffled list of facts made of three parts:

* planted patterns, each a known minimal unsatisfiable subset built on entities
  used nowhere else;
* on-topic distractors, i.e. literals that are true in one hidden world model, so
  they are jointly consistent;
* off-topic distractors, i.e. negated relations between fresh entities.

Instances are stored as JSON lines, one instance per line.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import tempfile
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .factlang import (
    Atom,
    Before,
    Binary,
    Entity,
    ExactlyOne,
    Fact,
    Kind,
    LogicalForm,
    NumericBound,
    Unary,
    _entities_of,
    logic_from_dict,
    logic_to_dict,
    make_fact,
    render_text,
)
from .repair import greedy_hitting_set

SCHEMA_VERSION = 1
PATTERNS = ("negation_pair", "temporal_cycle", "exactly_one")
PATTERN_SIZE = {"negation_pair": 2, "temporal_cycle": 3, "exactly_one": 3}
SCOPE_MODES = ("single_scope", "per_cluster")

_BASE_NAMES = {
    Kind.PERSON: ["Ann", "Ben", "Cara", "Dev", "Eli", "Fay", "Gus", "Hana", "Ivan", "Jade",
                  "Kai", "Lena", "Milo", "Nora", "Omar", "Pia", "Quinn", "Rosa", "Sam",
                  "Tess", "Uma", "Vic", "Wes", "Yuri", "Zoe"],
    Kind.ORG: ["Acme", "Globex", "Initech", "Hooli", "Vandelay", "Cyberdyne", "Tyrell",
               "Soylent", "Wonka", "Oscorp", "Aperture", "Monarch"],
    Kind.LOC: ["Paris", "Oslo", "Lima", "Cairo", "Delhi", "Quito", "Rome", "Seoul", "Tokyo",
               "Accra", "Bern", "Dublin", "Hanoi", "Riga"],
    Kind.EVENT: ["Summit", "Election", "Festival", "Parade", "Conference", "Tournament",
                 "Concert", "Expo", "Gala", "Marathon", "Regatta", "Symposium"],
    Kind.ANIMAL: ["Rex", "Fido", "Shadow", "Bella", "Rocky", "Coco", "Simba", "Nala",
                  "Bruno", "Ziggy", "Pepper", "Mochi"],
}
_QUALIFIERS = ["North", "South", "East", "West", "Prime", "Nova", "Minor", "Major",
               "Grand", "Little", "Old", "New", "Upper", "Lower", "Central", "Royal"]

# Rule atoms avoid IsAnimal so taxonomy closure cannot shrink a planted rule conflict.
_RULE_PREDICATES = ("IsTiger", "IsDog", "IsActor", "IsPolitician")


class InfeasibleConfig(ValueError):
    pass


class InstanceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    n_facts: int = 30
    planted: tuple[tuple[str, int], ...] = (("negation_pair", 2),)
    distractor_offtopic_fraction: float = 0.1
    seed: int = 0
    scope_mode: str = "single_scope"
    cluster_size: int = 30
    allow_overlap: bool = False

    def __post_init__(self):
        object.__setattr__(self, "planted", tuple((p, int(c)) for p, c in self.planted))
        for pattern, count in self.planted:
            if pattern not in PATTERNS:
                raise InfeasibleConfig(f"unknown pattern {pattern!r}")
            if count < 0:
                raise InfeasibleConfig(f"negative count for {pattern}")
        if self.scope_mode not in SCOPE_MODES:
            raise InfeasibleConfig(f"unknown scope mode {self.scope_mode!r}")
        if not 0.0 <= self.distractor_offtopic_fraction <= 1.0:
            raise InfeasibleConfig("off-topic fraction must lie in [0, 1]")
        if self.n_facts < 0 or self.cluster_size < 1:
            raise InfeasibleConfig("sizes must be positive")
        if self.planted_size > self.n_facts:
            raise InfeasibleConfig(
                f"planted patterns need {self.planted_size} facts but n_facts={self.n_facts}"
            )

    @property
    def planted_size(self) -> int:
        return sum(PATTERN_SIZE[p] * c for p, c in self.planted)


@dataclass(frozen=True)
class Instance:
    id: str
    seed: int
    entities: tuple[Entity, ...]
    facts: tuple[Fact, ...]
    scopes: tuple[tuple[int, ...], ...]
    gold_mus: tuple[tuple[int, ...], ...]
    gold_consistent: tuple[int, ...]
    patterns: tuple[str, ...] = ()

    @property
    def entity_table(self) -> dict[str, Entity]:
        return {e.name: e for e in self.entities}

    def fact_map(self) -> dict[int, Fact]:
        return {f.id: f for f in self.facts}

    def subset(self, ids: Iterable[int]) -> list[Fact]:
        m = self.fact_map()
        return [m[i] for i in sorted(ids)]

    @property
    def has_size3_pattern(self) -> bool:
        return any(PATTERN_SIZE[p] == 3 for p in self.patterns)


def derive_seed(seed: int, *labels) -> int:
    """Stable 63-bit child seed."""
    h = hashlib.blake2b(repr((seed,) + labels).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


class _Names:
    """Hands out unused entity names: plain bases first, then qualified variants."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.queues: dict[Kind, list[str]] = defaultdict(list)
        self.level: dict[Kind, int] = defaultdict(int)
        self.entities: dict[str, Entity] = {}

    def _refill(self, kind: Kind) -> None:
        level = self.level[kind]
        bases = _BASE_NAMES[kind]
        if level == 0:
            names = list(bases)
        else:
            names = [f"{b} {x}" for b in bases for x in _QUALIFIERS]
            if level > 1:
                names = [f"{n} {level}" for n in names]
        self.level[kind] = level + 1
        self.rng.shuffle(names)
        self.queues[kind] = names

    def fresh(self, kind: Kind) -> str:
        if not self.queues[kind]:
            self._refill(kind)
        name = self.queues[kind].pop()
        self.entities[name] = Entity(name, kind)
        return name


def _plant(pattern: str, names: _Names, rng: random.Random, overlap_pool: list) -> list[LogicalForm]:
    if pattern == "negation_pair":
        variant = rng.choice(["unary", "works_for", "located_in"]) if overlap_pool is None else "unary"
        if variant == "unary":
            if overlap_pool is not None or rng.random() < 0.5:
                e = names.fresh(Kind.ANIMAL)
                pred = rng.choice(_RULE_PREDICATES if overlap_pool is not None else
                                  ("IsTiger", "IsDog", "IsAnimal"))
            else:
                e = names.fresh(Kind.PERSON)
                pred = rng.choice(("IsActor", "IsPolitician"))
            pos = Unary(pred, e, True)
            if overlap_pool is not None:
                overlap_pool.append(pos)
            return [pos, Unary(pred, e, False)]
        if variant == "works_for":
            p, o = names.fresh(Kind.PERSON), names.fresh(Kind.ORG)
            return [Binary("WorksFor", p, o, True), Binary("WorksFor", p, o, False)]
        o, loc = names.fresh(Kind.ORG), names.fresh(Kind.LOC)
        return [Binary("LocatedIn", o, loc, True), Binary("LocatedIn", o, loc, False)]
    if pattern == "temporal_cycle":
        a, b, c = (names.fresh(Kind.EVENT) for _ in range(3))
        return [Before(a, b), Before(b, c), Before(c, a)]
    if pattern == "exactly_one":
        if overlap_pool:
            shared = overlap_pool.pop(0)
            others = [p for p in _RULE_PREDICATES if p != shared.predicate]
            q, r = rng.sample(others, 2)
            atoms = (Atom(shared.predicate, shared.entity), Atom(q, shared.entity), Atom(r, shared.entity))
            # the shared positive literal is already among the facts
            return [ExactlyOne(atoms), shared, Unary(q, shared.entity, True)]
        e = names.fresh(Kind.ANIMAL)
        preds = rng.sample(_RULE_PREDICATES, 3)
        x, y = rng.sample(preds, 2)
        return [ExactlyOne(tuple(Atom(p, e) for p in preds)), Unary(x, e, True), Unary(y, e, True)]
    raise InfeasibleConfig(f"unknown pattern {pattern!r}")


def _world_candidates(names: _Names, rng: random.Random, scale: int) -> list[LogicalForm]:
    """Literals that all hold in one randomly drawn world."""
    people = [names.fresh(Kind.PERSON) for _ in range(max(2, scale // 5))]
    orgs = [names.fresh(Kind.ORG) for _ in range(max(2, scale // 12))]
    locs = [names.fresh(Kind.LOC) for _ in range(max(2, scale // 12))]
    events = [names.fresh(Kind.EVENT) for _ in range(max(3, scale // 8))]
    animals = [names.fresh(Kind.ANIMAL) for _ in range(max(2, scale // 10))]
    out: list[LogicalForm] = []
    for p in people:
        out.append(Unary("IsActor", p, rng.random() < 0.5))
        out.append(Unary("IsPolitician", p, rng.random() < 0.3))
        out.append(Unary("IsAnimal", p, False))
        employer = rng.choice(orgs)
        out.append(Binary("WorksFor", p, employer, True))
        out.extend(Binary("WorksFor", p, o, False) for o in orgs if o != employer)
        home = rng.choice(locs)
        out.append(Binary("LocatedIn", p, home, True))
        out.extend(Binary("LocatedIn", p, loc, False) for loc in locs if loc != home)
    for o in orgs:
        out.append(Binary("LocatedIn", o, rng.choice(locs), True))
    for a in animals:
        species = rng.choice(["IsTiger", "IsDog"])
        out.append(Unary("IsAnimal", a, True))
        out.append(Unary(species, a, True))
        out.append(Unary("IsDog" if species == "IsTiger" else "IsTiger", a, False))
        out.append(Unary("IsPolitician", a, False))
    rng.shuffle(events)
    for i in range(len(events)):
        for j in range(i + 1, len(events)):
            out.append(Before(events[i], events[j]))
    for loc in locs:
        count = rng.randint(10, 500)
        out.append(NumericBound(loc, "at_least", rng.randint(0, count)))
        out.append(NumericBound(loc, "at_most", rng.randint(count, 1000)))
    return out


def _offtopic(names: _Names, rng: random.Random) -> LogicalForm:
    if rng.random() < 0.5:
        return Binary("WorksFor", names.fresh(Kind.PERSON), names.fresh(Kind.ORG), False)
    return Binary("LocatedIn", names.fresh(Kind.ORG), names.fresh(Kind.LOC), False)


def _cluster_scopes(facts: Sequence[Fact], cluster_size: int) -> list[tuple[int, ...]]:
    """Group facts into connected components by shared entities, then pack components."""
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for f in facts:
        ents = _entities_of(f.logic)
        for e in ents[1:]:
            parent[find(e)] = find(ents[0])
    comps: dict[str, list[int]] = defaultdict(list)
    for f in sorted(facts, key=lambda f: f.id):
        comps[find(_entities_of(f.logic)[0])].append(f.id)
    scopes: list[list[int]] = []
    for comp in sorted(comps.values(), key=lambda c: c[0]):
        if scopes and len(scopes[-1]) + len(comp) <= cluster_size:
            scopes[-1].extend(comp)
        else:
            scopes.append(list(comp))
    return [tuple(sorted(s)) for s in scopes]


def generate(config: GenConfig, instance_id: str | None = None) -> Instance:
    rng = random.Random(config.seed)
    names = _Names(rng)
    overlap_pool: list | None = [] if config.allow_overlap else None

    groups: list[tuple[str, list[LogicalForm]]] = []
    order = [p for p, c in config.planted for _ in range(c)]
    if config.allow_overlap:
        order.sort(key=lambda p: p != "negation_pair")
    for pattern in order:
        groups.append((pattern, _plant(pattern, names, rng, overlap_pool)))

    planted_forms: list[LogicalForm] = []
    for _, forms in groups:
        planted_forms.extend(f for f in forms if f not in planted_forms)
    n_distract = config.n_facts - len(planted_forms)
    n_off = round(config.distractor_offtopic_fraction * n_distract)
    n_on = n_distract - n_off

    on_topic: list[LogicalForm] = []
    scale = max(n_on, 1)
    while n_on:
        pool = _world_candidates(names, rng, scale)
        if len(pool) >= n_on:
            on_topic = rng.sample(pool, n_on)
            break
        scale *= 2
    off_topic = [_offtopic(names, rng) for _ in range(n_off)]

    forms = planted_forms + on_topic + off_topic
    rng.shuffle(forms)
    # only entities that occur in some fact are kept
    used = {e for lf in forms for e in _entities_of(lf)}
    entities = {n: e for n, e in names.entities.items() if n in used}
    facts = tuple(make_fact(i, lf, entities) for i, lf in enumerate(forms))
    id_of = {lf: i for i, lf in enumerate(forms)}

    gold_mus = tuple(tuple(sorted(id_of[lf] for lf in g)) for _, g in groups)
    hit = greedy_hitting_set(gold_mus)
    gold_consistent = tuple(i for i in range(len(facts)) if i not in hit)
    if config.scope_mode == "single_scope":
        scopes = (tuple(range(len(facts))),)
    else:
        scopes = tuple(_cluster_scopes(facts, config.cluster_size))

    return Instance(
        id=instance_id or f"s{config.seed}",
        seed=config.seed,
        entities=tuple(sorted(entities.values(), key=lambda e: e.name)),
        facts=facts,
        scopes=scopes,
        gold_mus=gold_mus,
        gold_consistent=gold_consistent,
        patterns=tuple(p for p, _ in groups),
    )


def generate_many(config: GenConfig, count: int) -> list[Instance]:
    """``count`` instances with per-instance seeds derived from ``config.seed``."""
    out = []
    for i in range(count):
        child = GenConfig(
            n_facts=config.n_facts,
            planted=config.planted,
            distractor_offtopic_fraction=config.distractor_offtopic_fraction,
            seed=derive_seed(config.seed, "instance", i),
            scope_mode=config.scope_mode,
            cluster_size=config.cluster_size,
            allow_overlap=config.allow_overlap,
        )
        out.append(generate(child, instance_id=f"s{config.seed}-{i}"))
    return out


# --------------------------------------------------------------------------
# JSON-lines storage


def instance_to_dict(inst: Instance) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": inst.id,
        "seed": inst.seed,
        "entities": [{"name": e.name, "kind": e.kind.value} for e in inst.entities],
        "facts": [{"id": f.id, "text": f.text, "logic": logic_to_dict(f.logic)} for f in inst.facts],
        "scopes": [list(s) for s in inst.scopes],
        "gold_mus": [list(u) for u in inst.gold_mus],
        "gold_consistent": list(inst.gold_consistent),
        "patterns": list(inst.patterns),
    }


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), ensure_ascii=False, separators=(",", ":"))


_REQUIRED = ("schema_version", "id", "entities", "facts", "scopes", "gold_mus", "gold_consistent")


def instance_from_dict(d: dict, where: str = "record") -> Instance:
    def fail(fieldname: str, msg: str):
        raise InstanceFormatError(f"{where}: field {fieldname!r}: {msg}")

    if not isinstance(d, dict):
        raise InstanceFormatError(f"{where}: expected a JSON object")
    for key in _REQUIRED:
        if key not in d:
            fail(key, "missing")
    if d["schema_version"] != SCHEMA_VERSION:
        fail("schema_version", f"unsupported version {d['schema_version']!r}")
    try:
        entities = tuple(Entity(e["name"], Kind(e["kind"])) for e in d["entities"])
    except (KeyError, TypeError, ValueError) as exc:
        fail("entities", f"malformed entity ({exc})")
    table = {e.name: e for e in entities}
    facts = []
    for i, rec in enumerate(d["facts"]):
        try:
            logic = logic_from_dict(rec["logic"])
            fact = Fact(int(rec["id"]), rec["text"], logic)
        except (KeyError, TypeError, ValueError) as exc:
            fail(f"facts[{i}]", f"malformed fact ({exc!r})")
        try:
            rendered = render_text(logic, table)
        except KeyError as exc:
            fail(f"facts[{i}].logic", f"unknown entity {exc}")
        if rendered != fact.text:
            fail(f"facts[{i}].text", f"does not match rendering {rendered!r}")
        facts.append(fact)
    ids = {f.id for f in facts}
    if len(ids) != len(facts):
        fail("facts", "duplicate fact ids")

    def id_lists(key: str) -> tuple[tuple[int, ...], ...]:
        try:
            out = tuple(tuple(int(x) for x in group) for group in d[key])
        except (TypeError, ValueError):
            fail(key, "expected a list of id lists")
        if any(x not in ids for g in out for x in g):
            fail(key, "refers to unknown fact ids")
        return out

    scopes = id_lists("scopes")
    gold_mus = id_lists("gold_mus")
    try:
        gold_consistent = tuple(int(x) for x in d["gold_consistent"])
    except (TypeError, ValueError):
        fail("gold_consistent", "expected a list of ids")
    return Instance(
        id=str(d["id"]),
        seed=int(d.get("seed", 0)),
        entities=entities,
        facts=tuple(facts),
        scopes=scopes,
        gold_mus=gold_mus,
        gold_consistent=gold_consistent,
        patterns=tuple(d.get("patterns", ())),
    )


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def save_instances(instances: Iterable[Instance], path: str | Path) -> None:
    atomic_write_text(path, "".join(dumps_instance(i) + "\n" for i in instances))


def save_instance(instance: Instance, path: str | Path) -> None:
    save_instances([instance], path)


def load_instances(path: str | Path) -> list[Instance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InstanceFormatError(
                    f"{path}:{lineno}: invalid JSON at column {exc.colno}: {exc.msg}"
                ) from exc
            out.append(instance_from_dict(d, where=f"{path}:{lineno}"))
    return out


def load_instance(path: str | Path) -> Instance:
    instances = load_instances(path)
    if len(instances) != 1:
        raise InstanceFormatError(f"{path}: expected one instance, found {len(instances)}")
    return instances[0]
