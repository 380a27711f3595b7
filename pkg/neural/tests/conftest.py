import numpy as np
import pytest

from stf_neural.io import write_sequence


def textured_video(n_frames, size=96, seed=0):
    """Synthetic HR frames with drifting structure, values in [0, 1]."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    phases = rng.uniform(0, 2 * np.pi, size=3)
    frames = {}
    for t in range(n_frames):
        img = (0.5
               + 0.18 * np.sin(xx / 5.0 + 0.4 * t + phases[0]) * np.cos(yy / 7.0)
               + 0.12 * np.sin((xx + yy) / 3.0 + phases[1])
               + 0.08 * np.cos((xx - 0.8 * t) / 11.0 + phases[2]))
        frames[t] = np.clip(img, 0.0, 1.0).astype(np.float32)
    return frames


@pytest.fixture(scope="session")
def video_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "video"
    write_sequence(textured_video(8), path, role="HR")
    return path
