"""Energy bookkeeping, analytic macrospin reference and verification harnesses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fem import assemble_stiffness, tet_gradients
from .field import FieldModel
from .mesh import Mesh, audit_mesh


@dataclass(frozen=True)
class EnergyBreakdown:
    exchange: float
    stray: float
    zeeman: float
    aniso: float

    @property
    def total(self) -> float:
        return self.exchange + self.stray + self.zeeman + self.aniso


def energy(m, model: FieldModel) -> EnergyBreakdown:
    """Micromagnetic energy; zeroth-order terms use vertex quadrature.

    With this quadrature the gradient of the energy with respect to the nodal
    values is exactly ``-V_i H_eff(m)_i``.
    """
    p, V = model.params, model.V
    exch = 0.5 * p.d2 * float(np.einsum("ic,ic->", m, model.K @ m)) if p.d2 else 0.0
    stray = -0.5 * float(np.einsum("ic,ic->", model.stray_solver.weighted_field(m), m)) if model.has_stray else 0.0
    zeeman = -float(V @ (m @ p.H_ext))
    aniso = -0.5 * p.Q * float(V @ (m @ p.e_axis) ** 2) if p.Q else 0.0
    return EnergyBreakdown(exch, stray, zeeman, aniso)


@dataclass
class EnergyLawRecord:
    E_before: float
    E_after: float
    dissipation: float  # beta tau |v|_L^2
    rho_term: float  # tau^2 rho d2 |grad v|^2
    slack: float


def energy_law(run_result, model: FieldModel) -> list[EnergyLawRecord]:
    """Per-step energy-law bookkeeping of a run made with ``keep_all=True``."""
    cfg = run_result.config
    beta = cfg.beta(model.params.alpha)
    rho = cfg.rho if cfg.variant == "order2" else 0.0
    out = []
    for n, v in enumerate(run_result.vs):
        Eb = run_result.records[n].energy.total
        Ea = run_result.records[n + 1].energy.total
        diss = beta * cfg.tau * float(np.einsum("i,ic,ic->", model.V, v, v))
        rterm = cfg.tau**2 * rho * model.params.d2 * float(np.einsum("ic,ic->", v, model.K @ v))
        out.append(EnergyLawRecord(Eb, Ea, diss, rterm, Eb + cfg.tau * cfg.energy_budget - Ea - diss))
    return out


# ---------------------------------------------------------------------------
# macrospin


def macrospin_reference(alpha: float, H, m0, t: float) -> np.ndarray:
    """Exact solution of ``(1 + alpha^2) m' = -m x H - alpha m x (m x H)`` for constant ``H``.

    In a frame with ``H = |H| e_z``: ``m_z = tanh(alpha |H| t / (1 + alpha^2) + artanh(m_z(0)))``
    and the azimuth advances by ``|H| t / (1 + alpha^2)`` (counter-clockwise about ``H``).
    """
    H = np.asarray(H, dtype=float)
    m0 = np.asarray(m0, dtype=float)
    Hn = np.linalg.norm(H)
    if Hn == 0 or t == 0:
        return m0.copy()
    ez = H / Hn
    # orthonormal frame (ex, ey, ez) around the field axis
    trial = np.eye(3)[np.argmin(np.abs(ez))]
    ex = np.cross(trial, ez)
    ex /= np.linalg.norm(ex)
    ey = np.cross(ez, ex)
    z0 = float(np.clip(m0 @ ez, -1.0, 1.0))
    phi0 = math.atan2(m0 @ ey, m0 @ ex)
    k = 1.0 + alpha**2
    if abs(z0) == 1.0:
        return m0.copy()
    z = math.tanh(alpha * Hn * t / k + math.atanh(z0))
    phi = phi0 + Hn * t / k
    s = math.sqrt(max(0.0, 1.0 - z * z))
    out = s * math.cos(phi) * ex + s * math.sin(phi) * ey + z * ez
    return out / np.linalg.norm(out)


def macrospin_rhs(alpha: float, H):
    """Right-hand side ``m -> m'`` of the macrospin ODE (for adaptive-integrator oracles)."""
    H = np.asarray(H, dtype=float)

    def f(_t, m):
        mxH = np.cross(m, H)
        return -(mxH + alpha * np.cross(m, mxH)) / (1.0 + alpha**2)

    return f


@dataclass
class ConvergenceRow:
    tau: float
    error: float
    order: float | None


def _l2_distance(a, b, model: FieldModel) -> float:
    from .fem import consistent_mass

    d = a - b
    M = consistent_mass(model.mesh)
    return math.sqrt(max(float(np.einsum("ic,ic->", d, M @ d)), 0.0))


def convergence_study(model: FieldModel, m0, config, tau_list, reference=None, norm: str = "l2") -> list[ConvergenceRow]:
    """Errors at ``config.T_final`` for a sequence of time steps.

    ``reference`` is a nodal field (e.g. the analytic macrospin state broadcast
    to all nodes) or ``None``, in which case a run with ``tau_list[-1] / 8`` on
    the same mesh serves as reference. ``norm`` is ``"l2"`` (P1 L2 norm over the
    sample) or ``"max"`` (largest nodal error). Orders are ``log2`` of successive
    error ratios scaled by the actual step ratio.
    """
    from dataclasses import replace

    from .scheme import run

    taus = [float(t) for t in tau_list]
    if len(taus) < 3:
        raise ValueError("need at least three time steps")
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ValueError("tau_list must be strictly decreasing")
    if reference is None:
        reference = run(replace(config, tau=taus[-1] / 8), m0, model).m

    def err(m):
        if norm == "max":
            return float(np.linalg.norm(m - reference, axis=1).max())
        return _l2_distance(m, reference, model)

    rows = []
    for k, tau in enumerate(taus):
        e = err(run(replace(config, tau=tau), m0, model).m)
        order = None
        if k > 0:
            prev = rows[-1]
            if e == prev.error:
                order = 0.0
            else:
                order = math.log(prev.error / e) / math.log(prev.tau / tau)
        rows.append(ConvergenceRow(tau, e, order))
    return rows


def format_convergence(rows) -> str:
    lines = [f"{'tau':>12} {'error':>14} {'order':>8}"]
    for r in rows:
        o = "" if r.order is None else f"{r.order:8.3f}"
        lines.append(f"{r.tau:12.6g} {r.error:14.6e} {o}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# renormalization energy test


@dataclass
class RenormalizationReport:
    applicable: bool
    trials: int
    passes: int
    worst_ratio: float  # max over trials of renormalized / original Dirichlet energy

    @property
    def passed(self) -> bool:
        return self.applicable and self.passes == self.trials

    @property
    def status(self) -> str:
        if not self.applicable:
            return "not applicable"
        return "pass" if self.passed else "fail"


def renormalization_energy_test(mesh: Mesh, trials: int = 100, seed: int = 0, rtol: float = 1e-12) -> RenormalizationReport:
    """Check that nodal renormalization of fields with ``|w_i| >= 1`` never raises the Dirichlet energy.

    Only meaningful on meshes with non-positive off-diagonal stiffness entries;
    elsewhere the report says "not applicable".
    """
    if not audit_mesh(mesh).satisfies_condition:
        return RenormalizationReport(False, 0, 0, float("nan"))
    rng = np.random.default_rng(seed)
    K = assemble_stiffness(mesh)
    passes = 0
    worst = 0.0
    for _ in range(trials):
        d = rng.normal(size=(mesh.num_vertices, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        w = d * rng.uniform(1.0, 3.0, size=(mesh.num_vertices, 1))
        before = float(np.einsum("ic,ic->", w, K @ w))
        u = w / np.linalg.norm(w, axis=1, keepdims=True)
        after = float(np.einsum("ic,ic->", u, K @ u))
        if after <= before * (1.0 + rtol) + 1e-300:
            passes += 1
        if before > 0:
            worst = max(worst, after / before)
    return RenormalizationReport(True, trials, passes, worst)


# ---------------------------------------------------------------------------
# weak residual


def weak_residual(run_result, model: FieldModel, psi, alpha: float | None = None) -> float:
    """Mismatch of the space-time weak LLG identity for a discrete trajectory.

    For each interval the test field is ``I_h(m^n x psi(x, t_n))``; the time
    derivative is ``(m^{n+1} - m^n) / tau`` and all other occurrences of ``m``
    use ``m^n``. Returns the absolute value of the time-integrated residual of
    ``<m_t, P> - alpha <m x m_t, P> - d2 sum_k (m x d_k m, d_k P) + <m x H_lower(m), P>``.
    ``run_result`` must come from ``run(..., keep_all=True)``; ``psi(x, t)``
    maps ``(N, 3)`` points to ``(N, 3)`` values.
    """
    if run_result.ms is None:
        raise ValueError("weak_residual needs a run made with keep_all=True")
    p = model.params
    alpha = p.alpha if alpha is None else alpha
    mesh, V = model.mesh, model.V
    tau = run_result.config.tau
    g = tet_gradients(mesh)
    total = 0.0
    for n in range(len(run_result.ms) - 1):
        m, m1 = run_result.ms[n], run_result.ms[n + 1]
        P = np.cross(m, np.asarray(psi(mesh.vertices, n * tau), dtype=float))
        mt = (m1 - m) / tau
        r = float(np.einsum("i,ic,ic->", V, mt, P))
        r -= alpha * float(np.einsum("i,ic,ic->", V, np.cross(m, mt), P))
        if p.d2:
            mT = m[mesh.tets]  # (K, 4, 3)
            dm = np.einsum("kac,kad->kdc", mT, g)  # d_k m per tet: (K, 3 dirs, 3 comps)
            dP = np.einsum("kac,kad->kdc", P[mesh.tets], g)
            mbar = mT.mean(axis=1)  # m x d_k m is linear on a tet; its mean is mbar x d_k m
            cross = np.cross(mbar[:, None, :], dm)
            r -= p.d2 * float(np.einsum("k,kdc,kdc->", mesh.volumes, cross, dP))
        r += float(np.einsum("i,ic,ic->", V, np.cross(m, model.lower_order_field(m)), P))
        total += tau * r
    return abs(total)
