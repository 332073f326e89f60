"""Deterministic synthetic organ-scale mesh populations.

Each subject is a subdivided icosphere with a seeded sum of smooth
low-order radial displacement modes, squashed to a liver-like 1.6:1.2:1.0
aspect and scaled so its volume lands at a draw from the configured range.
Displacements stay below half the radius, so every shape remains
star-shaped (hence closed and self-intersection free). Tessellation level
varies per subject so downstream registration is genuinely exercised.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, NumericalError
from .mesh import Plane, TriMesh, icosphere, save_mesh, signed_volume
from .slicer import cross_section, loop_area

_ASPECT = np.array([1.6, 1.2, 1.0])
_MAX_RETRIES = 10


@dataclass(frozen=True)
class SynthConfig:
    n: int = 20
    seed: int = 0
    base_subdivision: int = 3
    mode_count: int = 6
    amplitude: float = 0.10
    volume_range: tuple = (800.0, 1600.0)
    jitter_levels: tuple = None  # subdivision levels drawn per subject; None = base only

    def __post_init__(self):
        if self.n < 2:
            raise DataError("population size must be >= 2")
        if not (0.0 <= self.amplitude < 0.5):
            raise DataError("amplitude must lie in [0, 0.5)")
        lo, hi = self.volume_range
        if not (0.0 < lo < hi):
            raise DataError("volume range must be positive and increasing")
        levels = self.jitter_levels if self.jitter_levels is not None else (self.base_subdivision,)
        if not levels:
            raise DataError("jitter level set must be non-empty")
        object.__setattr__(self, "volume_range", (float(lo), float(hi)))
        object.__setattr__(self, "jitter_levels", tuple(int(v) for v in levels))


def _radial_modes(rng: np.random.Generator, count: int, amplitude: float, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Sum of products of low-order (<= 3) trig functions, bounded by amplitude."""
    if count == 0 or amplitude == 0.0:
        return np.zeros_like(theta)
    p = rng.integers(0, 4, size=count)
    q = rng.integers(0, 4, size=count)
    psi = rng.uniform(0.0, 2.0 * np.pi, size=count)
    chi = rng.uniform(0.0, 2.0 * np.pi, size=count)
    raw = rng.uniform(-1.0, 1.0, size=count)
    coeff = amplitude * raw / (np.abs(raw).sum() + 1e-12)
    total = np.zeros_like(theta)
    for m in range(count):
        factor = np.cos(p[m] * theta + psi[m])
        if q[m] > 0:
            factor = factor * np.sin(theta) ** q[m] * np.cos(q[m] * phi + chi[m])
        else:
            factor = factor * np.cos(chi[m])
        total += coeff[m] * factor
    return total


def _sections_look_sane(mesh: TriMesh) -> bool:
    """Reject self-intersection: every section loop must have positive area."""
    lo, hi = mesh.bounds()
    for f in (0.3, 0.5, 0.7):
        loops = cross_section(mesh, Plane(float(lo[0] + f * (hi[0] - lo[0]))))
        if any(loop_area(loop) <= 0 for loop in loops):
            return False
    return True


def _generate_subject(cfg: SynthConfig, index: int) -> TriMesh:
    rng = np.random.default_rng(cfg.seed + index)
    level = cfg.jitter_levels[int(rng.integers(len(cfg.jitter_levels)))]
    target_volume = rng.uniform(*cfg.volume_range)

    amplitude = cfg.amplitude
    for _ in range(_MAX_RETRIES):
        base = icosphere(1.0, level)
        v = base.vertices.copy()
        radius = np.linalg.norm(v, axis=1)
        theta = np.arccos(np.clip(v[:, 2] / radius, -1.0, 1.0))
        phi = np.arctan2(v[:, 1], v[:, 0])
        r_new = 1.0 + _radial_modes(rng, cfg.mode_count, amplitude, theta, phi)
        v = v * r_new[:, None] * _ASPECT
        mesh = TriMesh(v, base.faces)
        v0 = signed_volume(mesh)
        scale = (target_volume / v0) ** (1.0 / 3.0)
        mesh = mesh.with_vertices(mesh.vertices * scale)
        if _sections_look_sane(mesh):
            return mesh
        amplitude *= 0.5
    raise NumericalError(f"subject {index}: could not generate a sane mesh in {_MAX_RETRIES} tries")


def generate_population(cfg: SynthConfig) -> tuple[list[TriMesh], list[float]]:
    """Generate ``cfg.n`` meshes and their ground-truth volumes (cm^3)."""
    meshes = [_generate_subject(cfg, i) for i in range(cfg.n)]
    volumes = [signed_volume(m) for m in meshes]
    return meshes, volumes


def subject_id(index: int) -> str:
    return f"s{index:03d}"


def write_population(meshes: list[TriMesh], volumes: list[float], cfg: SynthConfig, directory) -> Path:
    """Emit one OBJ per subject plus a ground-truth JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    subjects = {}
    for i, (mesh, vol) in enumerate(zip(meshes, volumes)):
        sid = subject_id(i)
        save_mesh(mesh, directory / f"{sid}.obj")
        subjects[sid] = {"volume_cm3": vol, "seed": cfg.seed + i}
    manifest = {
        "format_version": 1,
        "seed": cfg.seed,
        "subjects": subjects,
    }
    manifest_path = directory / "population.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, separators=(",", ":"))
    return manifest_path


def load_population_manifest(directory) -> dict:
    path = Path(directory) / "population.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read population manifest {path}: {exc}") from exc
