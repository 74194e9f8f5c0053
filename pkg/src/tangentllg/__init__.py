"""Tangent-plane finite-element integrators for the Landau-Lifshitz-Gilbert equation."""

from .diagnostics import (
    EnergyBreakdown,
    convergence_study,
    energy,
    macrospin_reference,
    renormalization_energy_test,
    weak_residual,
)
from .fem import assemble_stiffness, interpolate_nodal, lumped_mass, norms, p1_gradients
from .field import (
    FieldModel,
    MaterialParams,
    StrayFieldBackend,
    effective_field_nodal,
    exchange_field_nodal,
    lower_order_field,
    phi_M_coefficients,
    stray_field,
)
from .mesh import Mesh, audit_mesh, build_box_mesh, embed_in_padded_box, load_mesh_native, write_mesh_native
from .scheme import (
    SchemeConfig,
    renormalize_update,
    run,
    solve_order2_step,
    solve_theta_step,
    tangent_basis,
    validate_config,
)

__version__ = "0.1.0"
