import pytest

from donverify.experiments import example_donations, example_trees
from donverify.tree import DonorRecord


# ids in the worked example: d=0 e=1 f=2 g=3 b=4 c=5 a=6
NODE = {"d": 0, "e": 1, "f": 2, "g": 3, "b": 4, "c": 5, "a": 6}


@pytest.fixture
def donations():
    return example_donations()


@pytest.fixture
def honest():
    return example_trees()[0]


@pytest.fixture
def tampered():
    return example_trees()[1]


def records(amounts, prefix="p"):
    return [DonorRecord(f"{prefix}{i}", a) for i, a in enumerate(amounts)]


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one status line per acceptance criterion for the end-of-run summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
