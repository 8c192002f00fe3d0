import pytest

# criterion label -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_REPORT: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_REPORT, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE_REPORT[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
