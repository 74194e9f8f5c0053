"""Tetrahedral meshes: structured Kuhn boxes, native ASCII I/O, quality audit."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

# off-diagonal stiffness entries up to this value still count as non-positive
AUDIT_TOL = 1e-12

NATIVE_MAGIC = "tetmesh 1"


class MeshError(ValueError):
    """Raised for invalid mesh data (bad indices, inverted tets, non-conformity)."""


@dataclass(frozen=True)
class BoxInfo:
    """Grid description kept for meshes produced by :func:`build_box_mesh`."""

    shape: tuple[int, int, int]
    lengths: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def spacing(self) -> np.ndarray:
        return np.asarray(self.lengths) / np.asarray(self.shape)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming tetrahedral mesh.

    ``vertices`` is ``(N, 3)`` float, ``tets`` is ``(K, 4)`` int with positive
    orientation. Construction validates indices, volumes and face conformity.
    """

    vertices: np.ndarray
    tets: np.ndarray
    box: BoxInfo | None = field(default=None, compare=False)

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=float)
        tets = np.ascontiguousarray(self.tets, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise MeshError(f"vertices must have shape (N, 3), got {verts.shape}")
        if tets.ndim != 2 or tets.shape[1] != 4:
            raise MeshError(f"tets must have shape (K, 4), got {tets.shape}")
        if not np.all(np.isfinite(verts)):
            raise MeshError("non-finite vertex coordinates")
        if tets.size and (tets.min() < 0 or tets.max() >= len(verts)):
            bad = np.flatnonzero((tets < 0).any(1) | (tets >= len(verts)).any(1))[0]
            raise MeshError(
                f"tet {bad} has vertex index out of range [0, {len(verts)}): {tets[bad].tolist()}"
            )
        verts.setflags(write=False)
        tets.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "tets", tets)

        vol = signed_volumes(verts, tets)
        if np.any(vol <= 0):
            bad = int(np.flatnonzero(vol <= 0)[0])
            raise MeshError(f"tet {bad} has non-positive signed volume {vol[bad]:.3e}")
        vol.setflags(write=False)
        object.__setattr__(self, "volumes", vol)
        _check_conformity(tets)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_tets(self) -> int:
        return len(self.tets)

    @property
    def h(self) -> float:
        """Mesh size: largest tet diameter (longest edge)."""
        p = self.vertices[self.tets]
        return float(
            max(
                np.linalg.norm(p[:, a] - p[:, b], axis=1).max()
                for a, b in itertools.combinations(range(4), 2)
            )
        )

    @property
    def total_volume(self) -> float:
        return float(self.volumes.sum())


def signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = vertices[tets]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    e3 = p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", np.cross(e1, e2), e3) / 6.0


def _faces(tets):
    return np.concatenate([tets[:, [1, 2, 3]], tets[:, [0, 2, 3]], tets[:, [0, 1, 3]], tets[:, [0, 1, 2]]])


def _check_conformity(tets: np.ndarray) -> None:
    if len(tets) == 0:
        return
    faces = np.sort(_faces(tets), axis=1)
    _, counts = np.unique(faces, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError(f"non-conforming mesh: a face is shared by {counts.max()} tets")


def boundary_vertices(mesh: Mesh) -> np.ndarray:
    """Indices of vertices lying on a face shared by exactly one tet."""
    faces = np.sort(_faces(mesh.tets), axis=1)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    return np.unique(uniq[counts == 1])


# Freudenthal/Kuhn split: one tet per permutation, all sharing the (0,0,0)-(1,1,1) diagonal
_KUHN_PERMS = list(itertools.permutations(range(3)))


def build_box_mesh(nx: int, ny: int, nz: int, lengths=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> Mesh:
    """Structured mesh of a box with each cell split into six Kuhn tetrahedra.

    All dihedral angles are 45, 60 or 90 degrees, so every off-diagonal stiffness
    entry is non-positive.
    """
    shape = (int(nx), int(ny), int(nz))
    if min(shape) < 1:
        raise ValueError(f"cell counts must be >= 1, got {shape}")
    lengths = tuple(float(v) for v in lengths)
    if len(lengths) != 3 or min(lengths) <= 0:
        raise ValueError(f"box lengths must be three positive numbers, got {lengths}")
    origin = tuple(float(v) for v in origin)

    axes = [np.linspace(o, o + L, n + 1) for o, L, n in zip(origin, lengths, shape)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (shape[1] + 1) + j) * (shape[2] + 1) + k

    I, J, K = np.meshgrid(*(np.arange(n) for n in shape), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    tets = []
    for perm in _KUHN_PERMS:
        corner = np.zeros(3, dtype=int)
        path = [corner.copy()]
        for ax in perm:
            corner[ax] = 1
            path.append(corner.copy())
        cols = [vid(I + c[0], J + c[1], K + c[2]) for c in path]
        tets.append(np.column_stack(cols))
    tets = np.concatenate(tets)
    # odd permutations give negative orientation
    vol = signed_volumes(vertices, tets)
    neg = vol < 0
    tets[neg] = tets[neg][:, [0, 2, 1, 3]]
    return Mesh(vertices, tets, box=BoxInfo(shape, lengths, origin))


def load_mesh_native(path) -> Mesh:
    """Read the ``tetmesh 1`` ASCII format (``#`` comment lines ignored)."""
    path = Path(path)
    lines = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            s = raw.strip()
            if not s or s.startswith("#"):
                continue
            lines.append((lineno, s))
    if not lines or lines[0][1].split() != NATIVE_MAGIC.split():
        where = lines[0][0] if lines else 1
        raise MeshError(f"{path}:{where}: expected header '{NATIVE_MAGIC}'")
    if len(lines) < 2:
        raise MeshError(f"{path}: missing size line")
    lineno, s = lines[1]
    try:
        nv, nt = (int(t) for t in s.split())
    except ValueError:
        raise MeshError(f"{path}:{lineno}: expected '<N_vertices> <N_tets>', got {s!r}") from None
    body = lines[2:]
    if len(body) < nv + nt:
        raise MeshError(f"{path}: expected {nv} vertex and {nt} tet lines, found {len(body)} lines")
    if len(body) > nv + nt:
        raise MeshError(f"{path}:{body[nv + nt][0]}: unexpected trailing data")

    verts = np.empty((nv, 3))
    tets = np.empty((nt, 4), dtype=np.int64)
    for row, (lineno, s) in enumerate(body[:nv]):
        parts = s.split()
        try:
            if len(parts) != 3:
                raise ValueError
            verts[row] = [float(t) for t in parts]
        except ValueError:
            raise MeshError(f"{path}:{lineno}: expected 'x y z', got {s!r}") from None
    for row, (lineno, s) in enumerate(body[nv:]):
        parts = s.split()
        try:
            if len(parts) != 4:
                raise ValueError
            tets[row] = [int(t) for t in parts]
        except ValueError:
            raise MeshError(f"{path}:{lineno}: expected 'i j k l', got {s!r}") from None
        if tets[row].min() < 0 or tets[row].max() >= nv:
            raise MeshError(f"{path}:{lineno}: vertex index out of range [0, {nv}): {s!r}")
    return Mesh(verts, tets)


def write_mesh_native(mesh: Mesh, path) -> None:
    with Path(path).open("w") as fh:
        fh.write(f"{NATIVE_MAGIC}\n{mesh.num_vertices} {mesh.num_tets}\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for t in mesh.tets:
            fh.write(" ".join(str(int(i)) for i in t) + "\n")


@dataclass
class MeshAuditReport:
    max_offdiag: float
    violations: list[tuple[int, int]]
    min_dihedral: float
    max_dihedral: float
    satisfies_condition: bool

    def summary(self) -> str:
        return (
            f"max off-diagonal stiffness entry: {self.max_offdiag:.6e}\n"
            f"positive off-diagonal pairs: {len(self.violations)}\n"
            f"dihedral angles: min {np.degrees(self.min_dihedral):.4f} deg, "
            f"max {np.degrees(self.max_dihedral):.4f} deg\n"
            f"non-obtuse stiffness condition: {'satisfied' if self.satisfies_condition else 'VIOLATED'}"
        )


def dihedral_angles(mesh: Mesh) -> np.ndarray:
    """``(K, 6)`` interior dihedral angles, one per tet edge."""
    from .fem import tet_gradients

    g = tet_gradients(mesh)
    n = g / np.linalg.norm(g, axis=2, keepdims=True)
    # the angle along the edge opposite to faces a, b is pi minus the angle between their normals
    out = np.empty((mesh.num_tets, 6))
    for col, (a, b) in enumerate(itertools.combinations(range(4), 2)):
        c = np.clip(np.einsum("ij,ij->i", n[:, a], n[:, b]), -1.0, 1.0)
        out[:, col] = np.pi - np.arccos(c)
    return out


def audit_mesh(mesh: Mesh) -> MeshAuditReport:
    from .fem import assemble_stiffness

    K = sp.coo_matrix(assemble_stiffness(mesh))
    off = K.row != K.col
    rows, cols, vals = K.row[off], K.col[off], K.data[off]
    max_off = float(vals.max()) if vals.size else 0.0
    bad = (vals > AUDIT_TOL) & (rows < cols)
    violations = sorted(zip(rows[bad].tolist(), cols[bad].tolist()))
    ang = dihedral_angles(mesh)
    return MeshAuditReport(
        max_offdiag=max_off,
        violations=violations,
        min_dihedral=float(ang.min()),
        max_dihedral=float(ang.max()),
        satisfies_condition=max_off <= AUDIT_TOL,
    )


def embed_in_padded_box(mesh: Mesh, padding_factor: float) -> tuple[Mesh, np.ndarray]:
    """Embed a box mesh in a larger concentric Kuhn box of the same spacing.

    The number of padding cells per side is rounded up so grid lines match,
    making the actual padding at least ``padding_factor``. Returns the padded
    mesh and an index array mapping sample vertices to padded vertices.
    """
    if padding_factor < 1:
        raise ValueError(f"padding_factor must be >= 1, got {padding_factor}")
    if mesh.box is None:
        raise ValueError("padded embedding is only supported for meshes built by build_box_mesh")
    box = mesh.box
    if padding_factor == 1:
        return mesh, np.arange(mesh.num_vertices)

    shape = np.asarray(box.shape)
    pad = np.ceil((padding_factor - 1.0) * shape / 2.0 - 1e-9).astype(int)
    spacing = box.spacing
    big_shape = shape + 2 * pad
    big_origin = np.asarray(box.origin) - pad * spacing
    big = build_box_mesh(*big_shape, lengths=big_shape * spacing, origin=big_origin)

    I, J, K = np.meshgrid(*(np.arange(n + 1) for n in shape), indexing="ij")
    bi, bj, bk = I.ravel() + pad[0], J.ravel() + pad[1], K.ravel() + pad[2]
    mapping = (bi * (big_shape[1] + 1) + bj) * (big_shape[2] + 1) + bk
    return big, mapping
