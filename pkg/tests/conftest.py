import numpy as np
import pytest

from vgswarm import create_app
from vgswarm.core.camera import Detection
from vgswarm.core.grn import GrnParams, compute_fields
from vgswarm.core.world import BodyKind


@pytest.fixture
def app():
    return create_app({"TESTING": True, "VGSWARM_MAX_TICKS_CAP": 10})


@pytest.fixture
def client(app):
    return app.test_client()


@pytest.fixture(scope="session")
def lone_target_fields():
    """Fields of one agent at the origin seeing a single target 6 m ahead."""
    return compute_fields([np.array([0.0, 6.0, 0.0])], [], [], GrnParams())


@pytest.fixture(scope="session")
def centered_target_fields():
    return compute_fields([np.array([0.0, 0.0, 0.0])], [], [], GrnParams())


def make_detection(cx=0.0, cy=0.0, w=40.0, h=30.0, kind=BodyKind.TARGET, camera_index=0, tick=0):
    bbox = (cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    return Detection(camera_index, cx, cy, w, h, kind, tick, bbox)
