import os

import numpy as np
import pytest

from ifvc import (
    KeyFrameSemantics,
    SemanticTrace,
    SemanticVector,
    make_synthetic_model,
    make_synthetic_portrait,
    neutral_key_for,
)

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


@pytest.fixture(scope="session")
def model():
    return make_synthetic_model()


@pytest.fixture(scope="session")
def neutral_key(model):
    return neutral_key_for(model)


@pytest.fixture(scope="session")
def key_image():
    return make_synthetic_portrait(128, 128, seed=0)


@pytest.fixture(scope="session")
def golden_dir():
    return GOLDEN_DIR


@pytest.fixture(scope="session")
def golden_stream_path(golden_dir):
    return os.path.join(golden_dir, "golden.ifvc")


def random_vector(rng: np.random.Generator) -> SemanticVector:
    return SemanticVector(
        mouth=tuple(rng.normal(0.0, 0.4, 6)),
        eye=float(rng.uniform(0.0, 5.0)),
        rot=tuple(rng.uniform(-np.pi, np.pi, 3)),
        trans=tuple(rng.normal(0.0, 1.0, 3)),
        loc=float(rng.normal(0.0, 0.5)),
    )


def random_trace(rng: np.random.Generator, n_frames: int,
                 key: KeyFrameSemantics | None = None) -> SemanticTrace:
    """Smooth random-walk trace: per-frame deltas sized like real motion."""
    state = np.zeros(14)
    state[12] = 3.0  # park the head in front of the camera
    frames = []
    for _ in range(n_frames):
        state[:6] += rng.normal(0.0, 0.05, 6)
        state[6] = np.clip(state[6] + rng.normal(0.0, 0.3), 0.0, 5.0)
        state[7:10] = np.clip(state[7:10] + rng.normal(0.0, 0.01, 3), -np.pi, np.pi)
        state[10:13] += rng.normal(0.0, 0.01, 3)
        state[13] += rng.normal(0.0, 0.01)
        frames.append(SemanticVector(
            mouth=tuple(state[:6]), eye=float(state[6]),
            rot=tuple(state[7:10]), trans=tuple(state[10:13]),
            loc=float(state[13])))
    if key is None:
        key = KeyFrameSemantics.neutral(pose=frames[0])
    return SemanticTrace(fps=25.0, frames=tuple(frames), key=key)
