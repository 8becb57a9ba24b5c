"""Per-criterion PASS/FAIL summary for tests marked ``@pytest.mark.criterion(n)``."""

import pytest

CRITERIA = {
    1: "lower bound at n = 2048",
    2: "upper bound at n = 1024",
    3: "small-board sanity (n = 17 lower, n = 12 upper)",
    4: "lower <= upper for every solved pair",
    5: "agreement with a generic convex solver and a dense KKT solve",
    6: "derivatives against finite differences and quadrature",
    7: "Newton method invariants over all logged solves",
    8: "lower-problem duality gap for n <= 64",
    9: "MINRES against dense direct solves",
    10: "warm start needs fewer exact-phase iterations",
}

_outcomes: dict[int, list[bool]] = {}
_details: dict[int, list[str]] = {}


@pytest.fixture
def detail(request):
    """Attach a one-line note to the criterion summary."""
    marker = request.node.get_closest_marker("criterion")

    def add(text):
        if marker is not None:
            _details.setdefault(marker.args[0], []).append(text)

    return add


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            item.user_properties.append(("criterion", marker.args[0]))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or report.outcome == "failed":
        _outcomes.setdefault(crit, []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit, title in CRITERIA.items():
        results = _outcomes.get(crit)
        if not results:
            tr.write_line(f"criterion {crit:2d}: NOT RUN  {title}")
            continue
        verdict = "PASS" if all(results) else "FAIL"
        tr.write_line(f"criterion {crit:2d}: {verdict}  {title}  ({sum(results)}/{len(results)} checks)")
        for note in _details.get(crit, []):
            tr.write_line(f"    {note}")
