"""Effective field: exchange, stray field, Zeeman and uniaxial anisotropy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import assemble_stiffness, lumped_mass, tet_gradients
from .mesh import Mesh, boundary_vertices, embed_in_padded_box


class StrayFieldError(RuntimeError):
    """The potential solve did not reach the requested residual."""

    def __init__(self, msg, iterations=None, residual=None):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual


@dataclass
class MaterialParams:
    """Dimensionless material constants; the gyromagnetic ratio is scaled to 1."""

    alpha: float
    d2: float = 0.0
    Q: float = 0.0
    e_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    H_ext: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.e_axis = np.asarray(self.e_axis, dtype=float).reshape(3)
        self.H_ext = np.asarray(self.H_ext, dtype=float).reshape(3)
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.d2 < 0:
            raise ValueError(f"d2 must be >= 0, got {self.d2}")
        if self.Q < 0:
            raise ValueError(f"Q must be >= 0, got {self.Q}")
        if abs(np.linalg.norm(self.e_axis) - 1.0) > 1e-12:
            raise ValueError(f"e_axis must be a unit vector, got {self.e_axis}")


@dataclass
class StrayFieldBackend:
    mode: str = "none"  # "none" | "truncated_fem"
    padding_factor: float = 4.0
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.mode not in ("none", "truncated_fem"):
            raise ValueError(f"unknown stray field mode {self.mode!r}")
        if self.mode == "truncated_fem" and self.padding_factor < 2:
            raise ValueError(f"padding_factor must be >= 2 for truncated_fem, got {self.padding_factor}")


class StrayFieldSolver:
    """Scalar-potential stray field on a padded box with ``u = 0`` on its boundary.

    Solves ``int_D grad(u).grad(w) = int_Omega m.grad(w)`` and returns the lumped
    L2 projection of ``-grad(u)`` onto the sample vertices. The interior
    stiffness block is factorized once; each call is two triangular solves.
    """

    def __init__(self, mesh: Mesh, backend: StrayFieldBackend):
        self.mesh = mesh
        self.backend = backend
        big, mapping = embed_in_padded_box(mesh, backend.padding_factor)
        self.padded = big
        self.mapping = mapping
        self.grads = tet_gradients(mesh)
        self.V = lumped_mass(mesh)

        K = assemble_stiffness(big)
        free = np.ones(big.num_vertices, dtype=bool)
        free[boundary_vertices(big)] = False
        self.free = np.flatnonzero(free)
        self.A = K[self.free][:, self.free].tocsc()
        self._lu = spla.splu(self.A)
        # sample vertex -> position among free unknowns (sample never touches the outer boundary)
        pos = np.full(big.num_vertices, -1)
        pos[self.free] = np.arange(len(self.free))
        self.sample_dof = pos[mapping]
        if np.any(self.sample_dof < 0):
            raise ValueError("sample touches the truncation boundary; increase padding_factor")

    def load(self, m: np.ndarray) -> np.ndarray:
        """Right-hand side ``int_Omega m.grad(w)`` restricted to free unknowns."""
        mbar = m[self.mesh.tets].mean(axis=1)  # exact integral of P1 m is |T| * mean
        local = np.einsum("k,kad,kd->ka", self.mesh.volumes, self.grads, mbar)
        b_sample = np.bincount(self.mesh.tets.ravel(), weights=local.ravel(), minlength=self.mesh.num_vertices)
        b = np.zeros(len(self.free))
        np.add.at(b, self.sample_dof, b_sample)
        return b

    def potential(self, m: np.ndarray) -> np.ndarray:
        b = self.load(m)
        u = self._lu.solve(b)
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(self.A @ u - b)
        if bnorm > 0 and res > self.backend.tolerance * bnorm:
            raise StrayFieldError(
                f"potential solve residual {res:.3e} exceeds {self.backend.tolerance:.1e} * |b|",
                iterations=1,
                residual=res,
            )
        return u

    def weighted_field(self, m: np.ndarray) -> np.ndarray:
        """``V_i * H_d(m)_i``, i.e. the load ``int_Omega -grad(u) phi_i``."""
        u = np.zeros(self.padded.num_vertices)
        u[self.free] = self.potential(m)
        us = u[self.mapping][self.mesh.tets]  # (K, 4)
        grad_u = np.einsum("ka,kad->kd", us, self.grads)
        contrib = -(self.mesh.volumes / 4.0)[:, None] * grad_u
        out = np.zeros((self.mesh.num_vertices, 3))
        for a in range(4):
            np.add.at(out, self.mesh.tets[:, a], contrib)
        return out

    def __call__(self, m: np.ndarray) -> np.ndarray:
        return self.weighted_field(m) / self.V[:, None]


class FieldModel:
    """Effective field for a fixed mesh, material and stray-field backend.

    All fields are nodal ``(N, 3)`` arrays. Zeroth-order terms use vertex
    (lumped) quadrature; the exchange field is the lumped Riesz representative
    ``-d2 (K m)_i / V_i`` of the weak Laplacian with natural boundary condition.
    """

    def __init__(self, mesh: Mesh, params: MaterialParams, backend: StrayFieldBackend | None = None):
        self.mesh = mesh
        self.params = params
        self.backend = backend or StrayFieldBackend()
        self.K = assemble_stiffness(mesh)
        self.V = lumped_mass(mesh)
        self.stray_solver = StrayFieldSolver(mesh, self.backend) if self.backend.mode == "truncated_fem" else None

    @property
    def has_stray(self) -> bool:
        return self.stray_solver is not None

    def exchange_field(self, m):
        if self.params.d2 == 0:
            return np.zeros_like(m)
        return -self.params.d2 * (self.K @ m) / self.V[:, None]

    def stray_field(self, m):
        if self.stray_solver is None:
            return np.zeros_like(m)
        return self.stray_solver(m)

    def anisotropy_field(self, m):
        e = self.params.e_axis
        return self.params.Q * (m @ e)[:, None] * e[None, :]

    def lower_order_field(self, m):
        """Stray + applied + anisotropy field."""
        return self.stray_field(m) + self.params.H_ext[None, :] + self.anisotropy_field(m)

    def effective_field(self, m):
        return self.exchange_field(m) + self.lower_order_field(m)

    def field_dot_m(self, m, H=None):
        """Nodal ``H_eff(m)_i . m_i``."""
        H = self.effective_field(m) if H is None else H
        return np.einsum("ic,ic->i", H, m)


def exchange_field_nodal(m, model: FieldModel):
    return model.exchange_field(m)


def stray_field(m, model: FieldModel):
    return model.stray_field(m)


def lower_order_field(m, model: FieldModel):
    return model.lower_order_field(m)


def effective_field_nodal(m, model: FieldModel):
    return model.effective_field(m)


def phi_tilde(x, alpha: float, tau: float, M: float):
    """Cut-off damping coefficient.

    ``alpha + tau/2 min(x, M)`` for ``x >= 0`` and ``alpha / (1 + tau/2 min(-x, M))``
    otherwise; bounded between ``alpha / (1 + tau M / 2)`` and ``alpha + tau M / 2``.
    """
    if not M > 0 or not tau > 0:
        raise ValueError(f"M and tau must be positive, got M={M}, tau={tau}")
    x = np.asarray(x, dtype=float)
    pos = alpha + 0.5 * tau * np.minimum(np.maximum(x, 0.0), M)
    neg = alpha / (1.0 + 0.5 * tau * np.minimum(np.maximum(-x, 0.0), M))
    return np.where(x >= 0, pos, neg)


def phi_M_coefficients(m, H_eff, alpha: float, tau: float, M: float) -> np.ndarray:
    """Per-node cut-off coefficient evaluated at ``x_i = H_eff,i . m_i``."""
    x = np.einsum("ic,ic->i", np.asarray(H_eff, dtype=float), np.asarray(m, dtype=float))
    return phi_tilde(x, alpha, tau, M)
