import pytest

ACCEPTANCE_LINES = []


def record(criterion: int, passed: bool, text: str):
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sphere3():
    from ghflat.manifold import round_sphere
    return round_sphere(3)
