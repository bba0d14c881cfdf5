import hypothesis
import numpy as np
import pytest

from eip.material import MaterialParams
from eip.mpm import make_state
from eip.voxelize import pad_frame, seed_sensor_pad

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("thorough", deadline=None, max_examples=500)
hypothesis.settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pad_state(
    grid_nodes=32,
    width=0.25,
    height=0.25,
    thickness=0.0625,
    center=(0.5, 0.5, 0.5),
    velocity=None,
    params=None,
    **kwargs,
):
    """A sensor pad (particle spacing dx/2) centred in the unit domain."""
    h = 0.5 / grid_nodes
    pad = seed_sensor_pad(width, height, thickness, h, density=1.0)
    pad.positions = pad.positions + np.asarray(center)
    kwargs.setdefault("frame", pad_frame((0.0, 0.0, -1.0)))
    kwargs.setdefault("face_size", (width, height))
    return make_state(pad, grid_nodes, params or MaterialParams(), velocity=velocity, **kwargs)


@pytest.fixture
def small_pad():
    return pad_state()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
