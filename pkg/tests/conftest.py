import numpy as np
import pytest

from syncsim.waveform import generate_two_tone


@pytest.fixture(scope="session")
def pulse():
    """Two-tone pulse: 40 MHz tone separation, 10 us, 200 MSa/s."""
    return generate_two_tone(40e6, 10e-6, 200e6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance reporting -----------------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line each in the
# terminal summary, plus whatever measurements they recorded via ``note``.

_ACCEPTANCE: dict[int, dict] = {}


@pytest.fixture
def note(request):
    marker = request.node.get_closest_marker("criterion")
    entry = _ACCEPTANCE.setdefault(marker.args[0], {"title": marker.args[1], "notes": [], "outcome": None})

    def add(text: str) -> None:
        entry["notes"].append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = _ACCEPTANCE.setdefault(marker.args[0], {"title": marker.args[1], "notes": [], "outcome": None})
    if rep.when == "call" or rep.failed or rep.skipped:
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        if entry["outcome"] in (None, "PASS") or status == "FAIL":
            entry["outcome"] = status


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {e['outcome'] or 'NOT RUN'}  {e['title']}")
        for text in e["notes"]:
            terminalreporter.write_line(f"    {text}")
