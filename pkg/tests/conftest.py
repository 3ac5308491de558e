import pytest

from ssbfs.model import Configuration, Phase, ProcessState, Status


def state(p=None, ts=None, c=0, s="Idle", ph="a"):
    return ProcessState(p, ts, c, Status.from_label(s), Phase.from_label(ph))


def config(*states):
    return Configuration.from_states(list(states))


@pytest.fixture
def make_state():
    return state


# PASS/FAIL lines from the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
