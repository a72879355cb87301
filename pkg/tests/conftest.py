import pytest

from coopagents.world import load_level

# Two rooms joined by a door at (4, 2); the button sits in the west room.
TWO_ROOMS = """\
LEVEL v1
size: 9 5
grid:
#########
#...#...#
#.......#
#...#...#
#########
door d0 4 2 10
button b0 2 1
connect b0 d0
agent 1 2
"""

# The button for d1 hides behind d0.
CHAINED = """\
LEVEL v1
size: 11 5
grid:
###########
#...#...#.#
#.........#
#...#...#.#
###########
door d0 4 2 1
door d1 8 2 10
button b0 3 1
button b1 7 1
connect b0 d0
connect b1 d1
agent 1 2
"""


@pytest.fixture
def two_rooms():
    return load_level(TWO_ROOMS)


@pytest.fixture
def chained():
    return load_level(CHAINED)


# One line per acceptance criterion, printed after the test session.
VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
