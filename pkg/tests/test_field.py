import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tangentllg.diagnostics import energy
from tangentllg.fem import interpolate_nodal, lumped_inner, norms
from tangentllg.field import FieldModel, MaterialParams, StrayFieldBackend, phi_M_coefficients, phi_tilde
from tangentllg.mesh import boundary_vertices, build_box_mesh
from tangentllg.scheme import tangent_basis

from conftest import random_unit


@pytest.fixture(scope="module")
def stray_model():
    mesh = build_box_mesh(3, 3, 3)
    params = MaterialParams(alpha=0.7, d2=0.05, Q=1.5, e_axis=[0.0, 0.6, 0.8], H_ext=[0.2, -0.1, 0.4])
    return FieldModel(mesh, params, StrayFieldBackend("truncated_fem", 3.0))


def test_material_validation():
    with pytest.raises(ValueError):
        MaterialParams(alpha=0.0)
    with pytest.raises(ValueError):
        MaterialParams(alpha=1.0, e_axis=[1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        MaterialParams(alpha=1.0, Q=-1)
    with pytest.raises(ValueError):
        StrayFieldBackend("truncated_fem", padding_factor=1.5)


def test_exchange_constant_field_zero(cube4):
    model = FieldModel(cube4, MaterialParams(alpha=1.0, d2=2.0))
    m = np.tile([0.0, 0.0, 1.0], (cube4.num_vertices, 1))
    np.testing.assert_allclose(model.exchange_field(m), 0, atol=1e-12)


def test_exchange_d2_zero(cube4, rng):
    model = FieldModel(cube4, MaterialParams(alpha=1.0, d2=0.0))
    assert not np.any(model.exchange_field(random_unit(rng, cube4.num_vertices)))


def test_exchange_spiral_converges_to_laplacian():
    # m = (cos pi x, sin pi x, 0) has Laplacian -pi^2 m; compare at interior nodes
    errs = []
    for n in (4, 8, 16):
        mesh = build_box_mesh(n, 2, 2, lengths=(1.0, 0.5, 0.5))
        model = FieldModel(mesh, MaterialParams(alpha=1.0, d2=1.0))
        m = interpolate_nodal(lambda x: np.column_stack([np.cos(np.pi * x[:, 0]), np.sin(np.pi * x[:, 0]), 0 * x[:, 0]]), mesh)
        interior = np.setdiff1d(np.arange(mesh.num_vertices), boundary_vertices(mesh))
        x = mesh.vertices[:, 0]
        interior = np.union1d(interior, np.flatnonzero((x > 0) & (x < 1)))  # Neumann in y, z is exact for this field
        H = model.exchange_field(m)
        errs.append(np.abs(H[interior] + np.pi**2 * m[interior]).max())
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.05 * np.pi**2


def test_exchange_energy_consistency(cube4, rng):
    model = FieldModel(cube4, MaterialParams(alpha=1.0, d2=0.3))
    m = random_unit(rng, cube4.num_vertices)
    lhs = -lumped_inner(model.exchange_field(m), m, model.V)
    rhs = 0.3 * norms(m, cube4, K=model.K)["h1_semi"] ** 2
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_stray_zero_source(stray_model):
    m = np.zeros((stray_model.mesh.num_vertices, 3))
    np.testing.assert_array_equal(stray_model.stray_field(m), 0)


def test_stray_none_mode(cube4, rng):
    model = FieldModel(cube4, MaterialParams(alpha=1.0))
    assert not np.any(model.stray_field(random_unit(rng, cube4.num_vertices)))


def test_stray_linearity(stray_model, rng):
    n = stray_model.mesh.num_vertices
    u, w = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
    a, b = 1.7, -0.4
    Hd = stray_model.stray_field
    np.testing.assert_allclose(Hd(a * u + b * w), a * Hd(u) + b * Hd(w), atol=1e-8, rtol=0)


def test_stray_symmetric_and_nonnegative_energy(stray_model, rng):
    n = stray_model.mesh.num_vertices
    V = stray_model.V
    for _ in range(20):
        u, w = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
        Hd = stray_model.stray_field
        assert lumped_inner(Hd(u), w, V) == pytest.approx(lumped_inner(Hd(w), u, V), abs=1e-8)
        assert -lumped_inner(Hd(u), u, V) >= -1e-8


def test_stray_bounded_by_magnetization(stray_model, rng):
    # ||H_d(m)||_L2 <= C ||m||_L2 with a measured, moderate C
    n = stray_model.mesh.num_vertices
    V = stray_model.V
    ratios = []
    for _ in range(20):
        u = rng.normal(size=(n, 3))
        H = stray_model.stray_field(u)
        ratios.append(np.sqrt(lumped_inner(H, H, V) / lumped_inner(u, u, V)))
    assert max(ratios) < 2.0


def test_stray_uniform_cube_coarse():
    # coarse 4^3 cube: average field is close to -m/3 already
    mesh = build_box_mesh(4, 4, 4)
    model = FieldModel(mesh, MaterialParams(alpha=1.0), StrayFieldBackend("truncated_fem", 4.0))
    m = np.tile([0.0, 0.0, 1.0], (mesh.num_vertices, 1))
    avg = (model.V[:, None] * model.stray_field(m)).sum(0) / model.V.sum()
    np.testing.assert_allclose(avg, [0, 0, -1 / 3], atol=0.2 / 3)


def test_lower_order_field_zero(cube4, rng):
    model = FieldModel(cube4, MaterialParams(alpha=1.0))
    assert not np.any(model.lower_order_field(random_unit(rng, cube4.num_vertices)))


def test_lower_order_anisotropy_along_axis(cube4):
    e = np.array([0.0, 0.6, 0.8])
    model = FieldModel(cube4, MaterialParams(alpha=1.0, Q=2.0, e_axis=e))
    m = np.tile(e, (cube4.num_vertices, 1))
    np.testing.assert_allclose(model.lower_order_field(m), 2 * m, atol=1e-15)


def test_lower_order_anisotropy_perpendicular(cube4):
    model = FieldModel(cube4, MaterialParams(alpha=1.0, Q=2.0))
    m = np.tile([0.6, 0.8, 0.0], (cube4.num_vertices, 1))
    assert not np.any(model.anisotropy_field(m))


def test_effective_field_uniform(cube4):
    h0 = np.array([0.1, 0.2, -0.3])
    model = FieldModel(cube4, MaterialParams(alpha=1.0, d2=1.0, Q=0.5, H_ext=h0))
    m = np.tile([0.0, 0.6, 0.8], (cube4.num_vertices, 1))
    expected = h0 + 0.5 * 0.8 * np.array([0, 0, 1.0])
    np.testing.assert_allclose(model.effective_field(m), np.broadcast_to(expected, m.shape), atol=1e-12)


def test_effective_field_all_off(cube4, rng):
    model = FieldModel(cube4, MaterialParams(alpha=1.0))
    assert not np.any(model.effective_field(random_unit(rng, cube4.num_vertices)))


def test_effective_field_is_energy_gradient(stray_model, rng):
    n = stray_model.mesh.num_vertices
    V = stray_model.V
    eps = 1e-5
    for _ in range(5):
        m = random_unit(rng, n)
        basis = tangent_basis(m)
        delta = basis.to_tangent(rng.normal(size=(n, 2)))
        fd = energy(m - eps * delta, stray_model).total - energy(m + eps * delta, stray_model).total
        an = 2 * eps * lumped_inner(stray_model.effective_field(m), delta, V)
        assert fd == pytest.approx(an, rel=1e-3)


def test_phi_hand_values():
    assert phi_tilde(0.0, 0.8, 0.1, 5.0) == 0.8
    assert phi_tilde(2.0, 0.8, 0.1, 5.0) == pytest.approx(0.9, abs=1e-15)
    assert phi_tilde(100.0, 0.8, 0.1, 5.0) == pytest.approx(1.05, abs=1e-15)
    assert phi_tilde(-100.0, 0.8, 0.1, 5.0) == pytest.approx(0.64, abs=1e-15)


def test_phi_rejects_nonpositive():
    with pytest.raises(ValueError):
        phi_tilde(1.0, 1.0, 0.1, 0.0)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.01, 5), st.floats(1e-4, 1.0), st.floats(0.1, 1e3),
    st.floats(-1e6, 1e6), st.floats(-1e6, 1e6),
)
def test_phi_bounds_and_monotone(alpha, tau, M, x, y):
    lo, hi = alpha / (1 + tau * M / 2), alpha + tau * M / 2
    fx, fy = phi_tilde(x, alpha, tau, M), phi_tilde(y, alpha, tau, M)
    tol = 1e-12 * hi
    assert lo - tol <= fx <= hi + tol
    # alpha - alpha/(1 + s) = alpha s/(1 + s): the half-width tau M / 2 holds only for alpha <= 1 + s
    assert abs(fx - alpha) <= max(1.0, alpha) * tau * M / 2 + tol
    if alpha <= 1:
        assert abs(fx - alpha) <= tau * M / 2 + tol
    if x <= y:
        assert fx <= fy + tol


def test_phi_coefficients_nodal(cube4, rng):
    m = random_unit(rng, cube4.num_vertices)
    H = rng.normal(size=m.shape)
    phi = phi_M_coefficients(m, H, 0.5, 0.01, 10.0)
    x = (H * m).sum(axis=1)
    np.testing.assert_array_equal(phi, phi_tilde(x, 0.5, 0.01, 10.0))
