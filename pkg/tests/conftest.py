import numpy as np
import pytest
from hypothesis import settings

from maskreg import synth
from maskreg.depthimage import CameraModel

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def camera():
    return CameraModel()


@pytest.fixture(scope="session")
def box_scene():
    return synth.tabletop_scene("box")


@pytest.fixture(scope="session")
def box_image(box_scene, camera):
    return synth.render(box_scene, camera, sigma=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
