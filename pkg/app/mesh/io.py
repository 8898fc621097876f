"""
Mesh export: stereographic OFF / OBJ for viewing, raw 4D coordinates as
CSV, and a lossless ``.npz`` round-trip format used as flow input.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from app.domain.errors import PreconditionError
from app.mesh.trimesh import TriMesh

logger = logging.getLogger(__name__)

DEFAULT_POLE = (0.1, 0.2, 0.3, 0.9273618495495703)
POLE_GUARD = 1e-12


def stereographic(X: np.ndarray, pole: Optional[Sequence[float]] = None) -> np.ndarray:
    """Project rows of X from the pole onto the orthogonal 3-space."""
    p = np.asarray(pole if pole is not None else DEFAULT_POLE, dtype=np.float64)
    norm = np.linalg.norm(p)
    if norm == 0.0:
        raise PreconditionError("stereographic pole must be non-zero")
    p = p / norm
    # orthonormal basis of the complement of p
    _, _, vt = np.linalg.svd(p[None, :])
    basis = vt[1:]
    t = X @ p
    denom = 1.0 - t
    near = denom < POLE_GUARD
    if np.any(near):
        logger.warning("%d vertices sit at the projection pole; clamping", int(near.sum()))
        denom = np.where(near, POLE_GUARD, denom)
    return (X @ basis.T) / denom[:, None]


def write_off(path: Path, mesh: TriMesh, pole: Optional[Sequence[float]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Y = stereographic(mesh.vertices, pole)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}\n")
        np.savetxt(fh, Y, fmt="%.17g")
        np.savetxt(fh, np.column_stack([np.full(mesh.n_faces, 3), mesh.faces]), fmt="%d")
    return path


def write_obj(path: Path, mesh: TriMesh, pole: Optional[Sequence[float]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Y = stereographic(mesh.vertices, pole)
    with path.open("w", encoding="utf-8") as fh:
        if mesh.name:
            fh.write(f"o {mesh.name}\n")
        np.savetxt(fh, Y, fmt="v %.17g %.17g %.17g")
        np.savetxt(fh, mesh.faces + 1, fmt="f %d %d %d")
    return path


def write_csv4(path: Path, mesh: TriMesh) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "w"])
        writer.writerows((repr(float(a)) for a in row) for row in mesh.vertices)
    return path


def read_off_faces(path: Path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0].strip() != "OFF":
        raise PreconditionError("not an OFF file", {"path": str(path)})
    n_v, n_f = (int(x) for x in lines[1].split()[:2])
    rows = [ln.split() for ln in lines[2 + n_v: 2 + n_v + n_f]]
    return np.array([[int(x) for x in r[1:4]] for r in rows], dtype=np.int64)


def read_csv4(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)


def save_mesh4(path: Path, mesh: TriMesh) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, vertices=mesh.vertices, faces=mesh.faces, boundary_flags=mesh.boundary_flags)
    return path


def load_mesh4(path: Path) -> TriMesh:
    """
    Load a mesh from ``.npz`` (vertices, faces) or from an OFF file whose
    4D coordinates sit in a sibling ``.csv`` with the same stem.
    """
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as data:
            flags = data["boundary_flags"] if "boundary_flags" in data else None
            return TriMesh(data["vertices"], data["faces"], flags, name=path.stem)
    if path.suffix == ".off":
        sidecar = path.with_suffix(".csv")
        if not sidecar.exists():
            raise PreconditionError("OFF input needs a 4D CSV sidecar", {"expected": str(sidecar)})
        return TriMesh(read_csv4(sidecar), read_off_faces(path), name=path.stem)
    raise PreconditionError("unsupported mesh format", {"path": str(path)})


def save_mesh(path: Path, mesh: TriMesh, pole: Optional[Sequence[float]] = None) -> Path:
    """
    Write by suffix: ``.off`` (plus the 4D ``.csv`` sidecar that
    ``load_mesh4`` reads back), ``.obj``, or ``.npz``.
    """
    path = Path(path)
    if path.suffix == ".off":
        write_csv4(path.with_suffix(".csv"), mesh)
        return write_off(path, mesh, pole)
    if path.suffix == ".obj":
        return write_obj(path, mesh, pole)
    if path.suffix == ".npz":
        return save_mesh4(path, mesh)
    raise PreconditionError("unsupported mesh format", {"path": str(path)})
