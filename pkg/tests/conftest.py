import numpy as np
import pytest

from ssmrecon import mesh as mesh_mod
from ssmrecon import register, synth


@pytest.fixture(scope="session")
def centered_cube():
    """Edge-10 cube centred at the origin."""
    return mesh_mod.cube(10.0, origin=(-5.0, -5.0, -5.0))


@pytest.fixture(scope="session")
def icosphere10():
    return mesh_mod.icosphere(10.0, 3)


@pytest.fixture(scope="session")
def blob_pair():
    """Two liver-scale blobs with different tessellation levels."""
    cfg = synth.SynthConfig(n=2, seed=3, jitter_levels=(3,))
    meshes, _ = synth.generate_population(cfg)
    cfg2 = synth.SynthConfig(n=2, seed=9, jitter_levels=(4,))
    meshes2, _ = synth.generate_population(cfg2)
    return meshes[0], meshes2[1]


@pytest.fixture(scope="session")
def aligned_population_20():
    """20 same-topology blobs, Procrustes aligned; shared by SSM tests."""
    cfg = synth.SynthConfig(n=20, seed=7, jitter_levels=(3,))
    meshes, _ = synth.generate_population(cfg)
    return register.generalized_procrustes(meshes)


def rotation_about_z(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
