import pytest

from xfuse.frames import write_manifest
from xfuse.phantom import PhantomConfig, gen_phantom


@pytest.fixture(scope="session")
def small_truth_dir(tmp_path_factory):
    """24-frame 64x64 phantom shared by harness-level tests."""
    cfg = PhantomConfig(width=64, height=64, n_frames=24, n_particles=3,
                        particle_radius=4.0, particle_speed=0.9,
                        keyhole_depth_amplitude=0.3, seed=11)
    path = tmp_path_factory.mktemp("truth") / "hr"
    write_manifest(gen_phantom(cfg), path)
    return path
