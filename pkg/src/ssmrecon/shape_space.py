"""PCA shape space over an aligned, same-topology mesh population.

A population of N meshes with M shared vertices is flattened to an
N x 3M matrix, centred on its mean row, and decomposed with a thin SVD.
The space keeps the mean, the first K right-singular vectors and the
per-component score spread, so shape parameters are dimensionless
standardized scores throughout the toolkit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, NumericalError
from .mesh import TriMesh

FORMAT_VERSION = 1

# Score scales use the population std (divisor N): with centred rows the
# k-th singular value satisfies sigma_k = s_k / sqrt(N).
_SCORE_STD_DIVISOR_NOTE = "population std, divisor N"


@dataclass(frozen=True)
class ShapeSpace:
    """Mean shape plus orthonormal variation directions.

    Attributes
    ----------
    mean : (3M,) float64
        Flattened mean shape (x0, y0, z0, x1, ...), millimetres.
    components : (3M, K) float64
        Orthonormal columns, one per retained mode.
    score_scale : (K,) float64
        Std of the training scores along each mode (divisor N), > 0 and
        non-increasing.
    faces : (F, 3) int array of the reference topology.
    n_population : int
        Number of training meshes.
    """

    mean: np.ndarray
    components: np.ndarray
    score_scale: np.ndarray
    faces: np.ndarray
    n_population: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).ravel()
        comp = np.asarray(self.components, dtype=np.float64)
        scale = np.asarray(self.score_scale, dtype=np.float64).ravel()
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if mean.size % 3:
            raise DataError("mean length must be a multiple of 3")
        if comp.shape != (mean.size, scale.size):
            raise DataError(
                f"component matrix shape {comp.shape} inconsistent with mean ({mean.size}) "
                f"and score scales ({scale.size})"
            )
        if scale.size == 0:
            raise DataError("at least one component is required")
        if scale.size > max(self.n_population - 1, 0):
            raise DataError("K must be <= N - 1")
        if not (scale > 0).all():
            raise NumericalError("score scales must be positive")
        if (np.diff(scale) > 1e-12 * scale[0]).any():
            raise NumericalError("score scales must be non-increasing")
        gram = comp.T @ comp
        if not np.allclose(gram, np.eye(scale.size), atol=1e-9):
            raise NumericalError("components are not orthonormal")
        for arr in (mean, comp, scale, faces):
            arr.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comp)
        object.__setattr__(self, "score_scale", scale)
        object.__setattr__(self, "faces", faces)

    @property
    def n_vertices(self) -> int:
        return self.mean.size // 3

    @property
    def n_components(self) -> int:
        return self.score_scale.size

    def mean_mesh(self) -> TriMesh:
        return TriMesh(self.mean.reshape(-1, 3), self.faces)


def _flatten(mesh: TriMesh) -> np.ndarray:
    return mesh.vertices.ravel()


def build_ssm(population: list[TriMesh], n_components: int) -> ShapeSpace:
    """Fit a ShapeSpace to an aligned population.

    The population rows are centred on their mean before the SVD; adding the
    mean back at reconstruction time is only consistent with centred PCA.
    Component signs are fixed so the largest-magnitude entry of each column
    is positive, making builds deterministic across SVD backends.
    """
    if len(population) < 2:
        raise DataError("need at least 2 meshes to build a shape space")
    ref = population[0]
    for m in population[1:]:
        if not ref.same_topology(m):
            raise DataError("population topology mismatch")
    n = len(population)
    if n_components > n - 1:
        raise DataError(f"K={n_components} too large for population of {n} (max {n - 1})")
    if n_components < 1:
        raise DataError("K must be >= 1")

    rows = np.stack([_flatten(m) for m in population])
    mean = rows.mean(axis=0)
    centred = rows - mean
    _, sing, vt = np.linalg.svd(centred, full_matrices=False)

    # floor scaled to the shape itself, so identical populations whose only
    # "variance" is mean-rounding noise are caught
    floor = 1e-10 * max(1.0, float(np.linalg.norm(mean)))
    if sing.size == 0 or not (sing[:n_components] > floor).all():
        raise NumericalError(
            "degenerate population: not enough shape variation for "
            f"{n_components} components"
        )
    components = vt[:n_components].T.copy()
    # deterministic sign: largest-magnitude entry of each column positive
    for k in range(n_components):
        col = components[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            components[:, k] = -col
    scores = centred @ components
    score_scale = scores.std(axis=0)  # divisor N, matches sigma_k / sqrt(N)
    return ShapeSpace(mean, components, score_scale, ref.faces, n)


def project(space: ShapeSpace, mesh: TriMesh) -> np.ndarray:
    """Standardized shape parameters of a reference-topology mesh."""
    if mesh.n_vertices != space.n_vertices or not np.array_equal(mesh.faces, space.faces):
        raise DataError("mesh does not have the shape space's reference topology")
    centred = _flatten(mesh) - space.mean
    return (centred @ space.components) / space.score_scale


def reconstruct(space: ShapeSpace, params: np.ndarray) -> TriMesh:
    """Mesh for the given standardized shape parameters.

    vertices = mean + sum_k component_k * scale_k * alpha_k, reshaped to
    the reference topology.
    """
    alpha = np.asarray(params, dtype=np.float64).ravel()
    if alpha.size != space.n_components:
        raise DataError(f"expected {space.n_components} shape parameters, got {alpha.size}")
    if not np.isfinite(alpha).all():
        raise DataError("shape parameters must be finite")
    flat = space.mean + space.components @ (space.score_scale * alpha)
    return TriMesh(flat.reshape(-1, 3), space.faces)


# ---------------------------------------------------------------------------
# Persistence: JSON manifest + little-endian float64 binary sidecar
# (<stem>.ssm.json / <stem>.ssm.bin). The sidecar holds mean, components
# (column-major) and score scales at the byte offsets named in the manifest.


def _ssm_paths(path) -> tuple[Path, Path]:
    p = Path(path)
    name = p.name
    for suffix in (".ssm.json", ".ssm.bin", ".ssm"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
            break
    stem = p.with_name(name)
    return stem.with_name(stem.name + ".ssm.json"), stem.with_name(stem.name + ".ssm.bin")


def save_ssm(space: ShapeSpace, path) -> tuple[Path, Path]:
    """Write the manifest/sidecar pair; ``path`` may be a stem or either file."""
    manifest_path, payload_path = _ssm_paths(path)
    arrays = [
        ("mean", space.mean),
        ("components", np.asfortranarray(space.components).ravel(order="F")),
        ("score_scale", space.score_scale),
    ]
    offsets = {}
    cursor = 0
    blob = bytearray()
    for name, arr in arrays:
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        offsets[name] = {"offset": cursor, "count": int(arr.size)}
        blob.extend(data)
        cursor += len(data)
    manifest = {
        "format_version": FORMAT_VERSION,
        "n_vertices": space.n_vertices,
        "n_population": space.n_population,
        "n_components": space.n_components,
        "faces": space.faces.tolist(),
        "payload": offsets,
        "dtype": "<f8",
    }
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, separators=(",", ":"))
    with open(payload_path, "wb") as fh:
        fh.write(bytes(blob))
    return manifest_path, payload_path


def load_ssm(path) -> ShapeSpace:
    """Load a manifest/sidecar pair written by save_ssm.

    Fails loudly (no partial object) on version mismatch, truncated payload
    or manifest/payload dimension inconsistencies.
    """
    manifest_path, payload_path = _ssm_paths(path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read shape space manifest {manifest_path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"unsupported shape space format_version {manifest.get('format_version')!r} "
            f"(expected {FORMAT_VERSION})"
        )
    m = int(manifest["n_vertices"])
    n = int(manifest["n_population"])
    k = int(manifest["n_components"])
    expected = {"mean": 3 * m, "components": 3 * m * k, "score_scale": k}
    payload = manifest["payload"]
    for name, count in expected.items():
        if name not in payload:
            raise DataError(f"manifest payload missing {name!r}")
        if int(payload[name]["count"]) != count:
            raise DataError(
                f"manifest inconsistency: {name} holds {payload[name]['count']} values, "
                f"dimensions require {count}"
            )
    try:
        raw = payload_path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read shape space payload {payload_path}: {exc}") from exc
    total_bytes = 8 * sum(expected.values())
    if len(raw) != total_bytes:
        raise DataError(
            f"payload {payload_path} is {len(raw)} bytes, expected {total_bytes} (truncated or stale)"
        )

    def read_array(name: str) -> np.ndarray:
        off = int(payload[name]["offset"])
        cnt = int(payload[name]["count"])
        if off < 0 or off + 8 * cnt > len(raw):
            raise DataError(f"payload slice for {name!r} out of bounds")
        return np.frombuffer(raw, dtype="<f8", count=cnt, offset=off).astype(np.float64)

    mean = read_array("mean")
    components = read_array("components").reshape(3 * m, k, order="F")
    score_scale = read_array("score_scale")
    faces = np.asarray(manifest["faces"], dtype=np.int64).reshape(-1, 3)
    return ShapeSpace(mean, components, score_scale, faces, n)
