import pytest

from factrepair.factlang import Before, Binary, Entity, Kind, Unary, make_fact

ENTITIES = {
    "Rex": Entity("Rex", Kind.ANIMAL),
    "Fido": Entity("Fido", Kind.ANIMAL),
    "Ann": Entity("Ann", Kind.PERSON),
    "Bob": Entity("Bob", Kind.PERSON),
    "Acme": Entity("Acme", Kind.ORG),
    "Oslo": Entity("Oslo", Kind.LOC),
    "Summit": Entity("Summit", Kind.EVENT),
    "Election": Entity("Election", Kind.EVENT),
    "Gala": Entity("Gala", Kind.EVENT),
    "Expo": Entity("Expo", Kind.EVENT),
}


def facts_from(forms, start=0):
    return [make_fact(start + i, lf, ENTITIES) for i, lf in enumerate(forms)]


def distractors(count, start=0):
    """Mutually consistent facts that share no atoms with the fixtures' conflicts."""
    forms = []
    people = ["Ann", "Bob"]
    for p in people:
        forms.append(Binary("WorksFor", p, "Acme", True))
        forms.append(Binary("LocatedIn", p, "Oslo", True))
        forms.append(Unary("IsActor", p, False))
        forms.append(Unary("IsPolitician", p, True))
    forms.append(Unary("IsDog", "Fido", True))
    forms.append(Before("Summit", "Election"))
    forms.append(Before("Election", "Gala"))
    forms.append(Binary("LocatedIn", "Acme", "Oslo", True))
    forms.append(Unary("IsTiger", "Fido", False))
    forms.append(Unary("IsAnimal", "Fido", True))
    assert count <= len(forms)
    return facts_from(forms[:count], start)


@pytest.fixture
def table():
    return ENTITIES


# acceptance lines are collected here and printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
