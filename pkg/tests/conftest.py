import pytest

from hypbvp.problem import ProblemSpec

ACCEPTANCE = []


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)


def scalar_spec(a="1", b="0", f="0", mu="0", m=1, reflections=None):
    return ProblemSpec.build(1, m, [a], b={(0, 0): b}, f=[f], mu=[mu], reflections=reflections)


@pytest.fixture
def variable_speed():
    return ProblemSpec.build(1, 1, ["2 + 0.5*sin(t)"], b={(0, 0): "cos(t)"})
