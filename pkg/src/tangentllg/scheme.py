"""Tangent-plane time integrators for the LLG equation.

Both integrators solve one linear problem per step for an update ``v`` that is
node-wise orthogonal to ``m`` and then renormalize ``m + tau v`` at each vertex.
``theta`` is first order; ``order2`` adds the half-step corrections (cut-off
damping coefficient, implicit lower-order fields, optional extra exchange
damping ``rho``) that make the update consistent to second order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .field import FieldModel, phi_M_coefficients
from .mesh import Mesh

log = logging.getLogger(__name__)

TANGENCY_REJECT = 1e-8


class SchemeError(RuntimeError):
    pass


class KrylovError(SchemeError):
    def __init__(self, msg, iterations, residual):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual


class CoercivityError(SchemeError):
    pass


class StepFailure(SchemeError):
    """A time step failed; carries the step index and the state before it."""

    def __init__(self, step, m, cause):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.m = m
        self.cause = cause


# ---------------------------------------------------------------------------
# configuration


@dataclass
class SchemeConfig:
    variant: str = "order2"  # "theta" | "order2"
    tau: float = 1e-3
    T_final: float = 0.0
    theta: float = 0.5
    rho_mode: str = "tau_log_tau"  # "zero" | "tau_log_tau" | "constant"
    rho_value: float = 0.0
    M_mode: str = "inv_sqrt_tau"  # "fixed" | "inv_sqrt_tau"
    M_value: float = 1.0
    krylov_tol: float = 1e-10
    krylov_maxiter: int = 500
    coupling: str = "full"  # "full" | "drop_lower_order_implicit"
    c_regime: float = 1.0
    energy_budget: float = 0.0  # C_budget of the per-step energy law

    def __post_init__(self):
        if self.variant not in ("theta", "order2"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.T_final < 0:
            raise ValueError(f"T_final must be >= 0, got {self.T_final}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.rho_mode not in ("zero", "tau_log_tau", "constant"):
            raise ValueError(f"unknown rho mode {self.rho_mode!r}")
        if self.rho_mode == "constant" and self.rho_value < 0:
            raise ValueError(f"rho must be >= 0, got {self.rho_value}")
        if self.M_mode not in ("fixed", "inv_sqrt_tau"):
            raise ValueError(f"unknown M mode {self.M_mode!r}")
        if self.M_mode == "fixed" and not self.M_value > 0:
            raise ValueError(f"M must be > 0, got {self.M_value}")
        if self.coupling not in ("full", "drop_lower_order_implicit"):
            raise ValueError(f"unknown coupling {self.coupling!r}")

    @property
    def rho(self) -> float:
        if self.rho_mode == "zero":
            return 0.0
        if self.rho_mode == "tau_log_tau":
            return self.tau * abs(math.log(self.tau))
        return float(self.rho_value)

    @property
    def M(self) -> float:
        return self.tau ** -0.5 if self.M_mode == "inv_sqrt_tau" else float(self.M_value)

    @property
    def num_steps(self) -> int:
        return int(round(self.T_final / self.tau))

    def beta(self, alpha: float) -> float:
        """Uniform lower bound of the damping coefficient."""
        if self.variant == "theta":
            return alpha
        return alpha / (1.0 + 0.5 * self.tau * self.M)


@dataclass
class ConfigValidation:
    regime: str | None
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_config(config: SchemeConfig, mesh: Mesh | None = None, h: float | None = None) -> ConfigValidation:
    """Check an order-2 configuration against the two convergent parameter regimes.

    Regime (i): ``rho/tau -> inf`` and ``tau M -> 0`` (``rho = tau |ln tau|`` with
    ``M = tau^-1/2``, or a fixed ``M`` with ``tau M < 0.5``).
    Regime (ii): ``rho = 0`` and ``tau <= c_regime h``.
    """
    if config.variant == "theta":
        return ConfigValidation(regime="theta")
    if h is None and mesh is not None:
        h = mesh.h
    tau = config.tau
    if config.rho_mode == "tau_log_tau":
        if config.M_mode == "inv_sqrt_tau" or tau * config.M < 0.5:
            out = ConfigValidation(regime="i")
            if tau >= 1:
                out.violations.append(f"rho = tau|ln tau| requires tau < 1, got {tau}")
            return out
        return ConfigValidation(
            regime=None,
            violations=[f"regime (i) needs tau*M -> 0; tau*M = {tau * config.M:.3g} >= 0.5"],
        )
    if config.rho_mode == "zero":
        if h is None:
            return ConfigValidation(regime="ii", warnings=["mesh size unknown; tau << h not checked"])
        if tau <= config.c_regime * h:
            return ConfigValidation(regime="ii")
        return ConfigValidation(
            regime=None,
            violations=[f"regime (ii) needs tau <= {config.c_regime:g} h; tau = {tau:.3g}, h = {h:.3g}"],
        )
    return ConfigValidation(
        regime=None,
        violations=[
            f"constant rho = {config.rho_value:g} does not vanish as tau -> 0; "
            "use rho=zero (with tau <= c h) or rho=tau_log_tau"
        ],
    )


# ---------------------------------------------------------------------------
# tangent planes


@dataclass
class TangentBasis:
    t1: np.ndarray
    t2: np.ndarray

    def to_tangent(self, y: np.ndarray) -> np.ndarray:
        """``(N, 2)`` coordinates -> ``(N, 3)`` vectors."""
        return y[:, 0, None] * self.t1 + y[:, 1, None] * self.t2

    def coords(self, w: np.ndarray) -> np.ndarray:
        """Project ``(N, 3)`` vectors to ``(N, 2)`` tangent coordinates."""
        return np.column_stack([np.einsum("ic,ic->i", w, self.t1), np.einsum("ic,ic->i", w, self.t2)])

    def project(self, w: np.ndarray) -> np.ndarray:
        return self.to_tangent(self.coords(w))

    def matrix(self) -> sp.csr_matrix:
        """Sparse ``3N x 2N`` embedding matrix."""
        n = len(self.t1)
        rows = (3 * np.arange(n)[:, None] + np.arange(3)[None, :]).ravel()
        data = np.stack([self.t1, self.t2], axis=2)  # (N, 3, 2)
        r = np.repeat(rows, 2)
        c = np.tile(np.stack([2 * np.arange(n), 2 * np.arange(n) + 1], axis=1), (1, 3)).reshape(-1)
        return sp.csr_matrix((data.ravel(), (r, c)), shape=(3 * n, 2 * n))


def tangent_basis(m: np.ndarray) -> TangentBasis:
    """Orthonormal pair ``t1, t2`` spanning the plane orthogonal to each ``m_i``.

    ``t1 = normalize(a x m_i)`` with ``a`` the coordinate axis of the smallest
    ``|m_i|`` component (lowest index on ties), ``t2 = m_i x t1``.
    """
    m = np.asarray(m, dtype=float)
    axis = np.argmin(np.abs(m), axis=1)
    a = np.zeros_like(m)
    a[np.arange(len(m)), axis] = 1.0
    t1 = np.cross(a, m)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(m, t1)
    return TangentBasis(t1, t2)


# ---------------------------------------------------------------------------
# linear step


@dataclass
class StepSolution:
    v: np.ndarray
    coords: np.ndarray  # (N, 2) tangent coordinates
    basis: TangentBasis
    iterations: int
    residual: float  # max-abs residual of the variational identity on K_m
    phi: np.ndarray  # per-node damping coefficient used


class TangentOperator:
    """Discrete operator of one step, restricted to the tangent space of ``m``.

    Applied to ``v`` it gives, per node (as a load, i.e. weighted by ``V_i``),
    ``V_i (coef_i v_i + m_i x v_i) + c_ex d2 (K v)_i - c_lo V_i (H_d(v)_i + Q (e.v_i) e)``.
    """

    def __init__(self, model: FieldModel, m, basis: TangentBasis, coef, c_ex: float, c_lo: float):
        self.model, self.m, self.basis = model, m, basis
        self.coef = np.broadcast_to(np.asarray(coef, dtype=float), (len(m),))
        self.c_ex, self.c_lo = c_ex, c_lo
        p = model.params
        V = model.V
        n = len(m)

        # 2x2 node blocks: coefficient (diagonal) and cross product m x t1 = t2, m x t2 = -t1
        idx = np.arange(n)
        main = sp.diags(np.repeat(V * self.coef, 2))
        cross = sp.csr_matrix(
            (np.concatenate([-V, V]), (np.concatenate([2 * idx, 2 * idx + 1]), np.concatenate([2 * idx + 1, 2 * idx]))),
            shape=(2 * n, 2 * n),
        )
        S = main + cross
        T = basis.matrix()
        if c_ex != 0 and p.d2 != 0:
            K3 = sp.kron(model.K, sp.identity(3), format="csr")
            S = S + (c_ex * p.d2) * (T.T @ K3 @ T)
        if c_lo != 0 and p.Q != 0:
            ec = np.column_stack([basis.t1 @ p.e_axis, basis.t2 @ p.e_axis])  # (N, 2)
            vals = V[:, None, None] * ec[:, :, None] * ec[:, None, :]
            r = np.repeat(2 * idx[:, None] + np.arange(2)[None, :], 2, axis=1).ravel()
            c = np.tile(2 * idx[:, None] + np.arange(2)[None, :], (1, 2)).ravel()
            S = S - (c_lo * p.Q) * sp.csr_matrix((vals.ravel(), (r, c)), shape=(2 * n, 2 * n))
        self.S = S.tocsr()
        self.T = T
        self.implicit_stray = c_lo != 0 and model.has_stray
        self.diagonal = self.S.diagonal()

    def matvec(self, y):
        y = np.asarray(y).ravel()
        out = self.S @ y
        if self.implicit_stray:
            v = self.basis.to_tangent(y.reshape(-1, 2))
            hd = self.model.stray_solver.weighted_field(v)
            out = out - self.c_lo * self.basis.coords(hd).ravel()
        return out

    def as_linear_operator(self):
        n = self.S.shape[0]
        return spla.LinearOperator((n, n), matvec=self.matvec, dtype=float)

    def apply3(self, v):
        """Full 3N load of the operator applied to ``v`` (no tangent projection)."""
        p, V = self.model.params, self.model.V
        out = V[:, None] * (self.coef[:, None] * v + np.cross(self.m, v))
        if self.c_ex != 0 and p.d2 != 0:
            out += self.c_ex * p.d2 * (self.model.K @ v)
        if self.c_lo != 0:
            lo = p.Q * (v @ p.e_axis)[:, None] * p.e_axis[None, :]
            out -= self.c_lo * V[:, None] * lo
            if self.model.has_stray:
                out -= self.c_lo * self.model.stray_solver.weighted_field(v)
        return out


def _rhs3(model: FieldModel, m, H_lower=None):
    """Load ``-d2 K m + V (H_d(m) + H_ext + H_aniso(m))``."""
    p = model.params
    H_lower = model.lower_order_field(m) if H_lower is None else H_lower
    b = model.V[:, None] * H_lower
    if p.d2 != 0:
        b = b - p.d2 * (model.K @ m)
    return b


def _krylov(op: TangentOperator, b: np.ndarray, tol: float, maxiter: int):
    if not np.any(b):
        return np.zeros_like(b), 0
    A = op.as_linear_operator()
    dinv = 1.0 / op.diagonal
    P = spla.LinearOperator(A.shape, matvec=lambda x: dinv * np.asarray(x).ravel(), dtype=float)
    bnorm = np.linalg.norm(b)
    restart = min(50, len(b))
    count = [0]

    def cb(_):
        count[0] += 1

    x = np.zeros_like(b)
    res = bnorm
    while count[0] < maxiter:
        budget = maxiter - count[0]
        x, _ = spla.gmres(
            A, b, x0=x, rtol=tol * 0.1, atol=0.0, restart=min(restart, budget),
            maxiter=max(1, -(-budget // restart)), M=P, callback=cb, callback_type="pr_norm",
        )
        res = np.linalg.norm(b - A @ x)
        if res <= tol * bnorm:
            return x, count[0]
    raise KrylovError(
        f"GMRES did not converge in {count[0]} iterations (relative residual {res / bnorm:.3e} > {tol:.1e})",
        iterations=count[0],
        residual=res,
    )


def _solve(op: TangentOperator, b3, config: SchemeConfig, phi):
    basis = op.basis
    b = basis.coords(b3).ravel()
    y, its = _krylov(op, b, config.krylov_tol, config.krylov_maxiter)
    coords = y.reshape(-1, 2)
    v = basis.to_tangent(coords)
    r = basis.coords(op.apply3(v) - b3)
    return StepSolution(v, coords, basis, its, float(np.abs(r).max()) if r.size else 0.0, phi)


def solve_theta_step(m, model: FieldModel, theta: float, tau: float, config: SchemeConfig | None = None) -> StepSolution:
    """First-order step: ``alpha <v,psi> + <m x v,psi> + theta tau d2 (grad v, grad psi) = rhs(m)``."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    config = config or SchemeConfig(variant="theta", tau=tau, theta=theta)
    basis = tangent_basis(m)
    alpha = model.params.alpha
    op = TangentOperator(model, m, basis, alpha, c_ex=theta * tau, c_lo=0.0)
    return _solve(op, _rhs3(model, m), config, np.full(len(m), alpha))


def solve_order2_step(m, model: FieldModel, tau: float, rho: float, M: float, config: SchemeConfig | None = None) -> StepSolution:
    """Second-order step with cut-off damping and half-step implicit fields.

    ``<phi_M v,psi> + <m x v,psi> + tau/2 [(1+rho) d2 (grad v, grad psi) - <H_d(v) + Q(e.v)e, psi>] = rhs(m)``
    """
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    config = config or SchemeConfig(variant="order2", tau=tau, rho_mode="constant", rho_value=rho, M_mode="fixed", M_value=M)
    p = model.params
    beta = p.alpha / (1.0 + 0.5 * tau * M)
    c_lo = 0.0 if config.coupling == "drop_lower_order_implicit" else 0.5 * tau
    if c_lo and beta - 0.5 * tau * p.Q <= 0:
        raise CoercivityError(
            f"beta - tau Q / 2 = {beta - 0.5 * tau * p.Q:.3e} <= 0 (beta = {beta:.3e}); reduce tau or M"
        )
    H_lower = model.lower_order_field(m)
    H_eff = model.exchange_field(m) + H_lower
    phi = phi_M_coefficients(m, H_eff, p.alpha, tau, M)
    basis = tangent_basis(m)
    op = TangentOperator(model, m, basis, phi, c_ex=0.5 * tau * (1.0 + rho), c_lo=c_lo)
    return _solve(op, _rhs3(model, m, H_lower), config, phi)


def renormalize_update(m, v, tau: float) -> np.ndarray:
    """``m_i <- (m_i + tau v_i) / |m_i + tau v_i|``."""
    dots = np.einsum("ic,ic->i", m, v)
    worst = float(np.abs(dots).max()) if dots.size else 0.0
    if worst > TANGENCY_REJECT:
        raise SchemeError(f"update is not tangent: max |v_i . m_i| = {worst:.3e}")
    w = m + tau * v
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def step(m, model: FieldModel, config: SchemeConfig) -> StepSolution:
    if config.variant == "theta":
        return solve_theta_step(m, model, config.theta, config.tau, config)
    return solve_order2_step(m, model, config.tau, config.rho, config.M, config)


# ---------------------------------------------------------------------------
# time loop


@dataclass
class StepRecord:
    t: float
    energy: "object"  # EnergyBreakdown
    v_l2: float
    tangency_residual: float
    variational_residual: float
    energy_law_slack: float
    iterations: int


@dataclass
class RunResult:
    config: SchemeConfig
    records: list[StepRecord]
    snapshots: list[tuple[int, float, np.ndarray]]
    m: np.ndarray
    ms: list[np.ndarray] | None = None
    vs: list[np.ndarray] | None = None
    renormalization_checks: list[tuple[float, float]] | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy.total for r in self.records])


def run(
    config: SchemeConfig,
    m0: np.ndarray,
    model: FieldModel,
    stride: int = 1,
    keep_all: bool = False,
    check_renormalization: bool = False,
    strict: bool = False,
) -> RunResult:
    """Integrate from ``m0`` for ``config.num_steps`` steps.

    Records energies and per-step diagnostics; keeps a snapshot every
    ``stride`` steps (plus the final state). With ``keep_all`` every ``m^n`` and
    ``v^n`` is retained, which the weak-residual diagnostic needs.
    """
    from .diagnostics import energy

    m = np.array(m0, dtype=float, copy=True)
    norms = np.linalg.norm(m, axis=1)
    if np.abs(norms - 1.0).max() > 1e-12:
        raise ValueError(f"initial magnetization is not unit length (max defect {np.abs(norms - 1).max():.3e})")
    check = validate_config(config, model.mesh)
    if not check.ok:
        if strict:
            raise SchemeError("; ".join(check.violations))
        for msg in check.violations:
            log.warning("config outside convergent regime: %s", msg)

    V, K, d2 = model.V, model.K, model.params.d2
    beta = config.beta(model.params.alpha)
    E = energy(m, model)
    records = [StepRecord(0.0, E, 0.0, 0.0, 0.0, 0.0, 0)]
    snapshots = [(0, 0.0, m.copy())]
    ms = [m.copy()] if keep_all else None
    vs = [] if keep_all else None
    checks = [] if check_renormalization else None

    n_steps = config.num_steps
    for n in range(n_steps):
        try:
            sol = step(m, model, config)
            m_new = renormalize_update(m, sol.v, config.tau)
        except Exception as exc:
            raise StepFailure(n, m.copy(), exc) from exc
        if check_renormalization:
            w = m + config.tau * sol.v
            checks.append((float(np.einsum("ic,ic->", m_new, K @ m_new)), float(np.einsum("ic,ic->", w, K @ w))))
        v_l2sq = float(np.einsum("i,ic,ic->", V, sol.v, sol.v))
        E_new = energy(m_new, model)
        slack = E.total + config.tau * config.energy_budget - E_new.total - beta * config.tau * v_l2sq
        t = (n + 1) * config.tau
        records.append(
            StepRecord(
                t, E_new, math.sqrt(v_l2sq),
                float(np.abs(np.einsum("ic,ic->i", sol.v, m)).max()),
                sol.residual, slack, sol.iterations,
            )
        )
        m, E = m_new, E_new
        if keep_all:
            ms.append(m.copy())
            vs.append(sol.v.copy())
        if (n + 1) % stride == 0 or n + 1 == n_steps:
            snapshots.append((n + 1, t, m.copy()))
    return RunResult(config, records, snapshots, m, ms, vs, checks)
