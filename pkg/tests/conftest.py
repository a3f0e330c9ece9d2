import pytest

from cogscript import search
from invariants import ACCEPTANCE, SEARCH_STATS, check_engine


@pytest.fixture(scope="session", autouse=True)
def _watch_every_search():
    """Check Dijkstra order and baseline growth on every search in the session."""
    original = search._Engine.close

    def close(self):
        pops, hist = check_engine(self)
        SEARCH_STATS["runs"] += 1
        SEARCH_STATS["pops"] += len(self.pops)
        SEARCH_STATS["restarts"] += len(self.history)
        if pops or hist:
            SEARCH_STATS["violations"].append((self.concept.name, pops[:3], hist[:3]))
        original(self)

    search._Engine.close = close
    yield
    search._Engine.close = original


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
    s = SEARCH_STATS
    if not s["runs"]:
        return
    ok = not s["violations"]
    terminalreporter.write_line(
        f"criterion 5 (all searches in this session): {'PASS' if ok else 'FAIL'} "
        f"runs={s['runs']} pops={s['pops']} restarts={s['restarts']} "
        f"violations={len(s['violations'])}")
    for v in s["violations"][:5]:
        terminalreporter.write_line(f"  violation: {v}")


def pytest_sessionfinish(session, exitstatus):
    if SEARCH_STATS["violations"] and exitstatus == 0:
        session.exitstatus = 1
