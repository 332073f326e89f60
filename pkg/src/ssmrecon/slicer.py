"""Planar cross-sections of closed meshes, rasterized into binary masks.

Sections are cut by sagittal (x-normal) planes placed at fractions of a
physical window that is shared by every subject in a dataset, so the masks
preserve absolute organ size. Masks are stored as binary PGM files plus a
JSON stack manifest; externally produced masks can enter the pipeline
through the same files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .mesh import Plane, TriMesh, validate_closed

_CHAIN_TOL = 1e-6


@dataclass(frozen=True)
class Window:
    """Axis-aligned 3D box (mm) shared by all subjects of a dataset."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if not (hi > lo).all():
            raise DataError("window must have positive extent on every axis")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    def plane_at(self, fraction: float) -> Plane:
        return Plane(float(self.lo[0] + fraction * self.extent[0]))

    def as_dict(self) -> dict:
        return {"lo": [float(v) for v in self.lo], "hi": [float(v) for v in self.hi]}

    @staticmethod
    def from_dict(d: dict) -> "Window":
        return Window(np.asarray(d["lo"], dtype=np.float64), np.asarray(d["hi"], dtype=np.float64))


def window_for_population(meshes, margin: float = 0.10, square_yz: bool = True) -> Window:
    """Bounding box of a mesh population, padded by ``margin`` per axis.

    The y/z extents are expanded to a common size by default so pixels come
    out isotropic.
    """
    los = np.stack([m.bounds()[0] for m in meshes])
    his = np.stack([m.bounds()[1] for m in meshes])
    lo = los.min(axis=0)
    hi = his.max(axis=0)
    ext = hi - lo
    lo = lo - margin * ext
    hi = hi + margin * ext
    if square_yz:
        centre = 0.5 * (lo + hi)
        half = 0.5 * max(hi[1] - lo[1], hi[2] - lo[2])
        for ax in (1, 2):
            lo[ax] = centre[ax] - half
            hi[ax] = centre[ax] + half
    return Window(lo, hi)


@dataclass(frozen=True)
class SliceProtocol:
    """Where to cut and how finely to rasterize.

    ``offsets`` are 2 or 3 strictly increasing fractions in (0, 1) of the
    window's x extent; ``resolution`` is the square mask side in pixels.
    """

    offsets: tuple
    window: Window
    resolution: int = 192

    def __post_init__(self):
        offs = tuple(float(o) for o in self.offsets)
        if len(offs) not in (2, 3):
            raise DataError("protocol needs 2 or 3 plane offsets")
        if any(not (0.0 < o < 1.0) for o in offs):
            raise DataError("plane offsets must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(offs, offs[1:])):
            raise DataError("plane offsets must be strictly increasing")
        if self.resolution < 16:
            raise DataError("resolution must be >= 16")
        object.__setattr__(self, "offsets", offs)


@dataclass(frozen=True)
class MaskStack:
    """Binary cross-section masks of one subject in the shared window.

    ``masks`` holds 2 or 3 arrays of shape (R, R) with values in {0, 1};
    axis 0 indexes y, axis 1 indexes z, pixel (0, 0) sits at the window's
    (y, z) minimum corner.
    """

    masks: tuple
    spacing: tuple  # (mm/px in y, mm/px in z)
    origin: tuple   # window (y, z) minimum corner, mm

    def __post_init__(self):
        masks = tuple(np.ascontiguousarray(np.asarray(m, dtype=np.uint8)) for m in self.masks)
        if len(masks) not in (2, 3):
            raise DataError("a stack holds 2 or 3 masks")
        r = masks[0].shape
        for m in masks:
            if m.ndim != 2 or m.shape != r or m.shape[0] != m.shape[1]:
                raise DataError("all masks must be square and share one resolution")
            if not np.isin(m, (0, 1)).all():
                raise DataError("masks must be binary (0/1)")
            m.flags.writeable = False
        sy, sz = (float(s) for s in self.spacing)
        if sy <= 0 or sz <= 0:
            raise DataError("pixel spacing must be positive")
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "spacing", (sy, sz))
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    @property
    def resolution(self) -> int:
        return self.masks[0].shape[0]

    def flatten(self) -> np.ndarray:
        """Slice-major then row-major {0,1} vector, the regressor's input layout."""
        return np.concatenate([m.ravel() for m in self.masks]).astype(np.float64)


# ---------------------------------------------------------------------------
# Cross-sections


def cross_section(mesh: TriMesh, plane: Plane) -> list[np.ndarray]:
    """Intersect a closed mesh with an x-normal plane.

    Returns a list of closed loops as (n, 2) arrays of (y, z) coordinates.
    Outer loops wind counter-clockwise for outward-oriented meshes; holes
    wind the other way. Empty list when the plane misses the mesh.
    """
    validate_closed(mesh)
    if mesh.is_empty:
        return []
    v = mesh.vertices
    f = mesh.faces
    side = np.where(v[:, 0] >= plane.offset, 1, -1)  # on-plane vertices count as positive
    tri_sides = side[f]
    crossing = np.abs(tri_sides.sum(axis=1)) != 3
    if not crossing.any():
        return []

    def edge_point(a: int, b: int) -> tuple:
        # canonical direction so shared edges evaluate bit-identically
        if a > b:
            a, b = b, a
        sa = v[a, 0] - plane.offset
        sb = v[b, 0] - plane.offset
        t = sa / (sa - sb)
        p = v[a] + t * (v[b] - v[a])
        return (p[1], p[2])

    segments = []
    for fi in np.nonzero(crossing)[0]:
        ia, ib, ic = f[fi]
        pts = []
        for a, b in ((ia, ib), (ib, ic), (ic, ia)):
            if side[a] != side[b]:
                pts.append(edge_point(a, b))
        if len(pts) != 2:
            continue
        p, q = pts
        if p == q:
            continue  # crossing through a single vertex
        # orient along plane_normal x triangle_normal so loops wind consistently
        ta, tb, tc = v[ia], v[ib], v[ic]
        n = np.cross(tb - ta, tc - ta)
        d = (-n[2], n[1])  # (1,0,0) x n restricted to the (y, z) plane
        if (q[0] - p[0]) * d[0] + (q[1] - p[1]) * d[1] < 0:
            p, q = q, p
        segments.append((p, q))

    if not segments:
        return []

    start_of: dict[tuple, list[int]] = {}
    for i, (p, _) in enumerate(segments):
        start_of.setdefault(p, []).append(i)

    def pop_start(point: tuple) -> int | None:
        bucket = start_of.get(point)
        if bucket:
            return bucket.pop()
        # tolerance fallback for platforms that break bit-exact matching
        best, best_d = None, _CHAIN_TOL
        for key, idxs in start_of.items():
            if not idxs:
                continue
            d = max(abs(key[0] - point[0]), abs(key[1] - point[1]))
            if d < best_d:
                best, best_d = key, d
        if best is None:
            return None
        return start_of[best].pop()

    used = np.zeros(len(segments), dtype=bool)
    loops = []
    for i in range(len(segments)):
        if used[i]:
            continue
        first = pop_start(segments[i][0])
        if first is None:
            continue  # start consumed by a tolerance fallback on another chain
        loop = [segments[first][0]]
        cursor = segments[first][1]
        used[first] = True
        while cursor != loop[0]:
            nxt = pop_start(cursor)
            if nxt is None:
                if max(abs(cursor[0] - loop[0][0]), abs(cursor[1] - loop[0][1])) < _CHAIN_TOL:
                    break
                raise DataError(
                    f"cross-section loop failed to close near (y={cursor[0]:.6f}, z={cursor[1]:.6f})"
                )
            loop.append(segments[nxt][0])
            cursor = segments[nxt][1]
            used[nxt] = True
        if len(loop) >= 3:
            loops.append(np.asarray(loop, dtype=np.float64))
    return loops


def loop_area(loop: np.ndarray) -> float:
    """Signed shoelace area of one loop (positive = counter-clockwise)."""
    y = loop[:, 0]
    z = loop[:, 1]
    return 0.5 * float(np.sum(y * np.roll(z, -1) - np.roll(y, -1) * z))


def section_area(loops: list[np.ndarray]) -> float:
    """Net enclosed area of a section: outer loops add, holes subtract."""
    return sum(loop_area(loop) for loop in loops)


# ---------------------------------------------------------------------------
# Rasterization


def rasterize(polygons: list[np.ndarray], window_2d, resolution: int) -> np.ndarray:
    """Even-odd scanline fill of loops into a binary (R, R) grid.

    ``window_2d`` is ((y_lo, z_lo), (y_hi, z_hi)). A pixel is on iff its
    centre is inside the polygon set under the even-odd rule; pixel (0, 0)
    sits at the window's minimum corner. Geometry outside the window is
    clipped silently.
    """
    if resolution < 16:
        raise DataError("resolution must be >= 16")
    (y_lo, z_lo), (y_hi, z_hi) = window_2d
    r = int(resolution)
    grid = np.zeros((r, r), dtype=np.uint8)
    if not polygons:
        return grid
    dy = (y_hi - y_lo) / r
    dz = (z_hi - z_lo) / r
    y_centres = y_lo + (np.arange(r) + 0.5) * dy

    edges = []
    for loop in polygons:
        nxt = np.roll(loop, -1, axis=0)
        keep = loop[:, 0] != nxt[:, 0]  # horizontal edges never cross a scanline
        edges.append(np.concatenate([loop[keep], nxt[keep]], axis=1))
    e = np.concatenate(edges, axis=0)
    if not len(e):
        return grid
    y1, z1, y2, z2 = e[:, 0], e[:, 1], e[:, 2], e[:, 3]
    z_centres = z_lo + (np.arange(r) + 0.5) * dz

    for i, yc in enumerate(y_centres):
        hits = (y1 <= yc) != (y2 <= yc)  # half-open so shared vertices count once
        if not hits.any():
            continue
        t = (yc - y1[hits]) / (y2[hits] - y1[hits])
        zs = np.sort(z1[hits] + t * (z2[hits] - z1[hits]))
        for a, b in zip(zs[0::2], zs[1::2]):
            lo = np.searchsorted(z_centres, a, side="left")
            hi = np.searchsorted(z_centres, b, side="left")
            grid[i, lo:hi] = 1
    return grid


def make_mask_stack(mesh: TriMesh, protocol: SliceProtocol) -> MaskStack:
    """Cut and rasterize one subject with the dataset's shared protocol."""
    win = protocol.window
    window_2d = ((win.lo[1], win.lo[2]), (win.hi[1], win.hi[2]))
    r = protocol.resolution
    masks = []
    for off in protocol.offsets:
        loops = cross_section(mesh, win.plane_at(off))
        masks.append(rasterize(loops, window_2d, r))
    spacing = ((win.hi[1] - win.lo[1]) / r, (win.hi[2] - win.lo[2]) / r)
    return MaskStack(tuple(masks), spacing, (float(win.lo[1]), float(win.lo[2])))


# ---------------------------------------------------------------------------
# Mask and stack files


def save_mask(mask: np.ndarray, path) -> None:
    """Write a {0,1} mask as binary PGM (P5, maxval 255, values 0/255)."""
    m = np.asarray(mask, dtype=np.uint8)
    if m.ndim != 2:
        raise DataError("mask must be 2-D")
    if not np.isin(m, (0, 1)).all():
        raise DataError("mask values must be 0 or 1")
    h, w = m.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write((m * np.uint8(255)).tobytes())


def load_mask(path) -> np.ndarray:
    """Read a binary PGM written by save_mask back to a {0,1} array."""
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if len(parts) < 4 or parts[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM (P5) file")
    try:
        w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    except ValueError as exc:
        raise DataError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise DataError(f"{path}: PGM maxval must be 255, got {maxval}")
    header_len = len(raw) - len(parts[4]) if len(parts) == 5 else len(raw)
    data = raw[header_len : header_len + w * h]
    if len(data) != w * h:
        raise DataError(f"{path}: PGM payload truncated ({len(data)} of {w * h} bytes)")
    img = np.frombuffer(data, dtype=np.uint8).reshape(h, w)
    if not np.isin(img, (0, 255)).all():
        raise DataError(f"{path}: binary masks must be 0 or 255")
    return (img == 255).astype(np.uint8)


def save_mask_stack(stack: MaskStack, directory, plane_offsets, window: Window, stem: str = "slice") -> Path:
    """Write one PGM per mask plus a JSON manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    members = []
    for i, mask in enumerate(stack.masks):
        name = f"{stem}_{i}.pgm"
        save_mask(mask, directory / name)
        members.append(name)
    manifest = {
        "format_version": 1,
        "members": members,
        "plane_offsets": [float(o) for o in plane_offsets],
        "window": window.as_dict(),
        "spacing": [stack.spacing[0], stack.spacing[1]],
        "origin": [stack.origin[0], stack.origin[1]],
    }
    manifest_path = directory / "stack.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, separators=(",", ":"))
    return manifest_path


def load_mask_stack(manifest_path) -> tuple[MaskStack, dict]:
    """Read a stack manifest; returns (stack, manifest dict)."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read stack manifest {manifest_path}: {exc}") from exc
    if manifest.get("format_version") != 1:
        raise DataError(f"{manifest_path}: unsupported stack format_version")
    masks = [load_mask(manifest_path.parent / name) for name in manifest["members"]]
    stack = MaskStack(tuple(masks), tuple(manifest["spacing"]), tuple(manifest["origin"]))
    return stack, manifest
