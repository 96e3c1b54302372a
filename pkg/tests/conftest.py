import os

import pytest

from src.services.gamespec import builtin_specs, parse

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# hero at the bottom, a rock falling onto it, a gem two cells to the left
TINY = """\
[game]
name = tiny
actions = none left right
max_score = 10

[grid]
width = 5
height = 5

[classes]
hero color=255,255,255 size=1x1 sprite=hero
rock color=200,0,0 size=1x1 sprite=rock
gem color=0,200,0 size=1x1 sprite=gem

[dynamics]
player hero left=-1,0 right=1,0 edge=clamp
fall rock speed=1

[rewards]
contact hero rock reward=0 kill=first
contact hero gem reward=1 kill=second

[termination]
win = survive
timeout = 10

[levels]
level 0
place hero 2 4
place rock 2 0
place gem 0 4
"""

STAIRS = """\
[game]
name = stairs
actions = none left right
max_score = 14

[grid]
width = 5
height = 5

[classes]
hero color=255,255,255 size=1x1 sprite=hero

[dynamics]
player hero left=-1,0 right=1,0

[rewards]
survive reward=1

[termination]
win = survive
timeout = 2
level_bonus = 5

[levels]
level 0
place hero 0 4
level 1
place hero 4 4
"""

PARADE = """\
[game]
name = parade
actions = none left right
max_score = 1

[grid]
width = 4
height = 4

[classes]
hero color=255,255,255 size=1x1 sprite=hero
drone color=0,0,255 size=1x1 sprite=drone

[dynamics]
player hero left=-1,0 right=1,0
march drone dx=1 period=1 drop=1

[rewards]

[termination]
win = clear drone
timeout = 50

[levels]
level 0
place hero 1 3
place drone 2 0
"""

GALLERY = """\
[game]
name = gallery
actions = none fire
max_score = 15

[grid]
width = 3
height = 4

[classes]
hero color=255,255,255 size=1x1 sprite=hero
shot color=255,255,0 size=1x1 sprite=shot
target color=255,0,0 size=1x1 sprite=target

[dynamics]
player hero fire=fire:shot
rise shot speed=1

[rewards]
contact shot target reward=10 kill=both

[termination]
win = clear target
timeout = 20
level_bonus = 5

[levels]
level 0
place hero 1 3
place target 1 1
"""


@pytest.fixture(scope="session")
def specs():
    return builtin_specs()


@pytest.fixture
def tiny():
    return parse(TINY)


@pytest.fixture
def stairs():
    return parse(STAIRS)


@pytest.fixture
def parade():
    return parse(PARADE)


@pytest.fixture
def gallery():
    return parse(GALLERY)
