import pytest

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}


@pytest.fixture
def record(request):
    """record(criterion, part, passed, detail) stores one acceptance outcome."""
    store = request.config.stash[_ACCEPTANCE_KEY]

    def _record(criterion, part, passed, detail):
        store.setdefault(criterion, []).append((part, bool(passed), detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(store):
        parts = store[criterion]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p}: {d}" + ("" if ok else " [failed]") for p, ok, d in parts)
        terminalreporter.write_line(f"criterion {criterion}: {status} | {detail}")
