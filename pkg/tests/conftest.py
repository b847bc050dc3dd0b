import pytest

from bkb import fixtures
from bkb.core import Term
from bkb.generator import generate_network
from bkb.parser import parse_bqe, parse_kb

HOLMES_NODES = {
    "Neighborhood(Holmes)",
    "Burglary(Holmes)",
    "Quake",
    "Radio",
    "Alarm(Holmes)",
    "Neighbor(Watson,Holmes)",
    "Phone-call(Watson,Holmes)",
    "Neighbor(Moriarty,Holmes)",
    "Phone-call(Moriarty,Holmes)",
}

HOLMES_EDGES = {
    ("Neighborhood(Holmes)", "Burglary(Holmes)"),
    ("Burglary(Holmes)", "Alarm(Holmes)"),
    ("Quake", "Alarm(Holmes)"),
    ("Quake", "Radio"),
    ("Alarm(Holmes)", "Phone-call(Watson,Holmes)"),
    ("Neighbor(Watson,Holmes)", "Phone-call(Watson,Holmes)"),
    ("Alarm(Holmes)", "Phone-call(Moriarty,Holmes)"),
    ("Neighbor(Moriarty,Holmes)", "Phone-call(Moriarty,Holmes)"),
}

HOLMES_EVIDENCE = (
    "Radio=+, Neighbor(Watson,Holmes)=+, Phone-call(Watson,Holmes)=+, "
    "Neighbor(Moriarty,Holmes)=+, Phone-call(Moriarty,Holmes)=+"
)


def T(text: str) -> Term:
    """Ground term from text like 'Neighbor(Watson,Holmes)'."""
    if "(" not in text:
        return Term(text)
    head, rest = text.split("(", 1)
    return Term.ground(head, *rest.rstrip(")").split(","))


@pytest.fixture(scope="session")
def burglary_text():
    return fixtures.read("burglary.bkb")


@pytest.fixture(scope="session")
def burglary_kb(burglary_text):
    return parse_kb(burglary_text)


@pytest.fixture(scope="session")
def holmes_net(burglary_kb):
    query, evidence = parse_bqe(fixtures.read("burglary.bqe"), burglary_kb)
    return generate_network(burglary_kb, query, evidence)


_criteria: dict = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = getattr(report, "criterion", None)
    if crit is not None:
        _criteria[crit] = report.outcome


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (n, title), outcome in sorted(_criteria.items()):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {n}. {title}")
