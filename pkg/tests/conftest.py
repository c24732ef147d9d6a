import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from capx.cnn import build_paper_architecture, gen_random_weights  # noqa: E402
from capx.core import Frame, GrayImage  # noqa: E402


# criterion number -> (title, outcome, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, outcome, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2} {outcome:<4} {title}: {detail}")


def stub_model(prefer_capillary=True, input_size=64):
    """Zero weights with a final bias that fixes the predicted class."""
    arch = build_paper_architecture(input_size)
    params = {}
    for layer in arch.weighted_layers():
        kshape, bshape = layer.param_shapes()
        params[layer.name] = (np.zeros(kshape, np.float32), np.zeros(bshape, np.float32))
    bias = np.array([4.0, 0.0] if prefer_capillary else [0.0, 4.0], np.float32)
    params["dense3"] = (params["dense3"][0], bias)
    return arch.with_params(params)


def blob_frame(width=48, height=40, center=(20, 18), radius=6, level=200, blob=60, frame_id="blob"):
    yy, xx = np.mgrid[0:height, 0:width]
    img = np.full((height, width), level, np.uint8)
    img[(yy - center[1]) ** 2 + (xx - center[0]) ** 2 <= radius * radius] = blob
    return Frame(frame_id, np.repeat(img[:, :, None], 3, axis=2))


@pytest.fixture(scope="session")
def model42():
    return gen_random_weights(42)


@pytest.fixture(scope="session")
def capillary_stub():
    return stub_model(True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def gray(arr):
    return GrayImage(np.asarray(arr, dtype=np.uint8))
