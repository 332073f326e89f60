"""Population registration: rigid alignment and non-rigid template fitting.

Fitting drags a closed template mesh onto an arbitrarily tessellated target
surface so every population member ends up with the template's topology;
rigid alignment then removes pose. Scale is deliberately never touched:
subject size carries the volume signal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import factorized
from scipy.spatial import cKDTree

from .errors import DataError, NumericalError
from .mesh import TriMesh, validate_closed
from .spatial import SurfaceIndex

_DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion x -> R @ x + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9):
            raise NumericalError("rotation is not orthonormal")
        if not np.isclose(np.linalg.det(r), 1.0, atol=1e-9):
            raise NumericalError("rotation determinant is not +1 (reflection?)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the non-rigid template fit."""

    iterations: int = 50
    smoothness: float = 1.0
    damping: float = 0.5
    tol_mm: float = 0.01

    def __post_init__(self):
        if self.iterations < 1:
            raise DataError("iterations must be >= 1")
        if self.smoothness < 0:
            raise DataError("smoothness must be >= 0")
        if not (0.0 < self.damping <= 1.0):
            raise DataError("damping must be in (0, 1]")


def rigid_align(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Least-squares rigid motion taking ``source`` onto ``target`` (Kabsch).

    Minimises sum ||R s_i + t - t_i||^2 over proper rotations and
    translations. No scaling. Raises NumericalError for degenerate (rank < 2)
    configurations, where the rotation is not determined.
    """
    s = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if len(s) != len(t):
        raise DataError(f"point lists differ in length ({len(s)} vs {len(t)})")
    if len(s) < 3:
        raise DataError("need at least 3 point pairs")
    sc = s.mean(axis=0)
    tc = t.mean(axis=0)
    h = (s - sc).T @ (t - tc)
    u, sing, vt = np.linalg.svd(h)
    if sing[1] <= _DEGENERATE_RTOL * max(sing[0], 1.0):
        raise NumericalError("degenerate configuration: correspondence covariance has rank < 2")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(r, tc - r @ sc)


# ---------------------------------------------------------------------------
# Non-rigid fitting


def _uniform_laplacian(mesh: TriMesh) -> sp.csr_matrix:
    """Umbrella operator L = I - D^-1 A over the template's edge graph."""
    f = mesh.faces
    i = np.concatenate([f[:, 0], f[:, 1], f[:, 1], f[:, 2], f[:, 2], f[:, 0]])
    j = np.concatenate([f[:, 1], f[:, 0], f[:, 2], f[:, 1], f[:, 0], f[:, 2]])
    a = sp.coo_matrix((np.ones(len(i)), (i, j)), shape=(mesh.n_vertices, mesh.n_vertices))
    a = (a.tocsr() > 0).astype(np.float64)
    deg = np.asarray(a.sum(axis=1)).ravel()
    if (deg == 0).any():
        raise DataError("template has an isolated vertex")
    dinv = sp.diags(1.0 / deg)
    return (sp.identity(mesh.n_vertices, format="csr") - dinv @ a).tocsr()


@dataclass
class FitLog:
    """Per-iteration diagnostics from nonrigid_fit."""

    mean_surface_distance: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    iterations_run: int = 0


def _kabsch_rounds(v: np.ndarray, match_fn, tol: float, max_rounds: int) -> np.ndarray:
    """Iterate Kabsch alignment onto ``match_fn(v)`` until improvement stalls."""
    prev = np.inf
    for _ in range(max_rounds):
        matched, dist = match_fn(v)
        mean_d = float(dist.mean())
        if not np.isfinite(mean_d):
            raise NumericalError("non-finite distances during rigid initialisation")
        if prev - mean_d < 0.01 * tol:
            break
        prev = mean_d
        try:
            v = rigid_align(v, matched).apply(v)
        except NumericalError:
            break  # near-degenerate correspondences: keep current pose
    return v


def _rigid_icp_init(vertices: np.ndarray, index: SurfaceIndex, tol: float, max_rounds: int = 60) -> np.ndarray:
    """Centroid shift plus Kabsch rounds over nearest-point pairs.

    Surface-foot correspondences drive the broad descent but slide
    tangentially on smooth shapes, so a nearest-vertex phase follows; once
    the pose error drops under the vertex spacing those pairs become the
    true correspondence and the remaining motion is recovered essentially
    exactly.
    """
    v = vertices + (index.mesh.centroid() - vertices.mean(axis=0))
    v = _kabsch_rounds(v, index.query, tol, max_rounds)
    vertex_tree = cKDTree(index.mesh.vertices)

    def match_vertices(x):
        dist, idx = vertex_tree.query(x)
        return index.mesh.vertices[idx], dist

    return _kabsch_rounds(v, match_vertices, tol, max_rounds)


def nonrigid_fit(
    template: TriMesh,
    target: TriMesh,
    cfg: FitConfig = FitConfig(),
    return_log: bool = False,
):
    """Deform ``template`` onto the surface of ``target``.

    Returns a mesh with the template's topology. Each iteration matches every
    template vertex to its nearest point on the target surface and solves

        min_d  sum ||d_i - c_i||^2 + smoothness * sum ||(L d)_i||^2

    for the displacement field d (L the uniform graph Laplacian of the
    template), then applies ``damping * d``. Stops at the iteration cap or
    when the mean applied displacement drops below ``tol_mm``.
    """
    if template.is_empty or target.is_empty:
        raise DataError("template and target must be non-empty")
    validate_closed(template)

    index = SurfaceIndex(target)
    v = _rigid_icp_init(template.vertices.copy(), index, cfg.tol_mm)

    lap = _uniform_laplacian(template)
    system = (sp.identity(template.n_vertices, format="csc") + cfg.smoothness * (lap.T @ lap).tocsc())
    solve = factorized(system)

    log = FitLog()
    for it in range(cfg.iterations):
        matched, dist = index.query(v)
        c = matched - v
        if not np.isfinite(c).all():
            raise NumericalError(f"non-finite correspondence at iteration {it}")
        d = np.column_stack([solve(c[:, k]) for k in range(3)])
        if not np.isfinite(d).all():
            raise NumericalError(f"non-finite displacement solve at iteration {it}")
        residual = d - c
        objective = float((residual**2).sum() + cfg.smoothness * np.asarray((lap @ d) ** 2).sum())
        log.mean_surface_distance.append(float(dist.mean()))
        log.objective.append(objective)
        step = cfg.damping * d
        v = v + step
        log.iterations_run = it + 1
        if float(np.linalg.norm(step, axis=1).mean()) < cfg.tol_mm:
            break

    fitted = template.with_vertices(v)
    if return_log:
        return fitted, log
    return fitted


# ---------------------------------------------------------------------------
# Generalized Procrustes


def generalized_procrustes(population: list[TriMesh], max_rounds: int = 50) -> list[TriMesh]:
    """Rigidly align a same-topology population to its evolving mean shape.

    Output meshes all have centroid at the origin. Iterates until the mean
    shape moves less than 1e-6 mm between rounds.
    """
    if len(population) < 2:
        raise DataError("need at least 2 meshes")
    ref = population[0]
    for m in population[1:]:
        if not ref.same_topology(m):
            raise DataError("population topology mismatch")

    stacks = [m.vertices - m.vertices.mean(axis=0) for m in population]
    for _ in range(max_rounds):
        mean = np.mean(stacks, axis=0)
        new_stacks = [rigid_align(v, mean).apply(v) for v in stacks]
        change = float(np.abs(np.mean(new_stacks, axis=0) - mean).max())
        stacks = new_stacks
        if change < 1e-6:
            break
    return [ref.with_vertices(v) for v in stacks]
