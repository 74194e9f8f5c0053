"""P1 finite-element primitives on tetrahedral meshes."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


def p1_gradients(points) -> np.ndarray:
    """Gradients of the four barycentric basis functions of one tet.

    >>> p1_gradients([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])[0]
    array([-1., -1., -1.])
    """
    p = np.asarray(points, dtype=float)
    if p.shape != (4, 3):
        raise ValueError(f"expected 4 points in 3D, got shape {p.shape}")
    return _gradients(p[None])[0]


def _gradients(p: np.ndarray) -> np.ndarray:
    # p: (K, 4, 3); rows of inv(J) are gradients of barycentrics 1..3
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]], axis=1)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        bad = int(np.flatnonzero(det <= 0)[0])
        raise ValueError(f"degenerate or inverted tet {bad} (6*volume = {det[bad]:.3e})")
    Jinv = np.linalg.inv(J)  # columns are gradients
    g = np.empty_like(p)
    g[:, 1:] = np.transpose(Jinv, (0, 2, 1))
    g[:, 0] = -g[:, 1:].sum(axis=1)
    return g


def tet_gradients(mesh: Mesh) -> np.ndarray:
    """``(K, 4, 3)`` basis gradients for every tet of ``mesh``."""
    return _gradients(mesh.vertices[mesh.tets])


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """Scalar stiffness ``K_ij = sum_T |T| grad(phi_i).grad(phi_j)``."""
    g = tet_gradients(mesh)
    local = np.einsum("k,kad,kbd->kab", mesh.volumes, g, g)
    rows = np.repeat(mesh.tets, 4, axis=1).ravel()
    cols = np.tile(mesh.tets, (1, 4)).ravel()
    n = mesh.num_vertices
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    # exact symmetry regardless of summation order
    return ((K + K.T) * 0.5).tocsr()


def lumped_mass(mesh: Mesh) -> np.ndarray:
    """Vertex weights ``V_i = sum_{T containing i} |T| / 4``."""
    return np.bincount(
        mesh.tets.ravel(), weights=np.repeat(mesh.volumes / 4.0, 4), minlength=mesh.num_vertices
    )


def consistent_mass(mesh: Mesh) -> sp.csr_matrix:
    """Exact P1 mass matrix (``|T|/10`` diagonal, ``|T|/20`` off-diagonal)."""
    local = np.full((4, 4), 1.0 / 20.0) + np.eye(4) / 20.0
    vals = mesh.volumes[:, None, None] * local[None]
    rows = np.repeat(mesh.tets, 4, axis=1).ravel()
    cols = np.tile(mesh.tets, (1, 4)).ravel()
    n = mesh.num_vertices
    return sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def interpolate_nodal(f, mesh: Mesh) -> np.ndarray:
    """Nodal interpolant: evaluate ``f`` at every vertex.

    ``f`` receives the ``(N, 3)`` vertex array and must return ``(N, 3)``
    (or ``(N,)`` for scalar fields).
    """
    vals = np.asarray(f(mesh.vertices), dtype=float)
    if vals.shape[0] != mesh.num_vertices:
        raise ValueError(f"f returned {vals.shape[0]} rows for {mesh.num_vertices} vertices")
    return vals


def h1_seminorm_sq(field: np.ndarray, K: sp.spmatrix) -> float:
    u = np.asarray(field, dtype=float).reshape(K.shape[0], -1)
    return float(np.einsum("ic,ic->", u, K @ u))


def norms(field: np.ndarray, mesh: Mesh, K=None, M=None) -> dict:
    """L2 (exact P1 integration), H1 seminorm and nodal max norm of a field."""
    K = assemble_stiffness(mesh) if K is None else K
    M = consistent_mass(mesh) if M is None else M
    u = np.asarray(field, dtype=float).reshape(mesh.num_vertices, -1)
    l2 = np.sqrt(max(float(np.einsum("ic,ic->", u, M @ u)), 0.0))
    h1 = np.sqrt(max(h1_seminorm_sq(u, K), 0.0))
    return {"l2": l2, "h1_semi": h1, "linf_nodal": float(np.linalg.norm(u, axis=1).max())}


def lumped_inner(u: np.ndarray, w: np.ndarray, V: np.ndarray) -> float:
    """``sum_i V_i u_i . w_i``."""
    return float(np.einsum("i,ic,ic->", V, u, w))
