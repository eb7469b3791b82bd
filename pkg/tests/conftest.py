import pytest

from pmmfp.streams import stream


@pytest.fixture
def rng():
    return stream(12345, 0)


def make_rng(*key):
    return stream(2024, *key)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the terminal summary prints them all."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
