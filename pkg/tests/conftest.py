import pytest

_ACCEPTANCE: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo checks")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, echoed in the terminal summary."""
    def record(number, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(20240611)
