"""Observed convergence orders in the time step.

The theta scheme with theta = 1 is first order. The second-order scheme
reaches order two when its cut-off M is large enough not to bind.
"""
import numpy as np

from tangentllg import FieldModel, MaterialParams, SchemeConfig, build_box_mesh
from tangentllg.diagnostics import convergence_study, format_convergence, macrospin_reference

mesh = build_box_mesh(2, 2, 2)
model = FieldModel(mesh, MaterialParams(alpha=1.0, d2=0.01, H_ext=[0, 0, 2.0]))
m0 = np.tile([1.0, 0.0, 0.0], (mesh.num_vertices, 1))
ref = np.tile(macrospin_reference(1.0, [0, 0, 2.0], [1.0, 0, 0], 1.0), (mesh.num_vertices, 1))
taus = [1 / 40, 1 / 80, 1 / 160]

print("theta = 1")
print(format_convergence(convergence_study(model, m0, SchemeConfig(variant="theta", theta=1.0, T_final=1.0),
                                           taus, ref, norm="max")))
print("\nsecond order, rho = 0, M = 1e6")
cfg = SchemeConfig(variant="order2", T_final=1.0, rho_mode="zero", M_mode="fixed", M_value=1e6)
print(format_convergence(convergence_study(model, m0, cfg, taus, ref, norm="max")))

# Without an analytic solution, a run with tau/8 serves as reference.
rng = np.random.default_rng(1)
m_rand = rng.normal(size=(mesh.num_vertices, 3))
m_rand /= np.linalg.norm(m_rand, axis=1, keepdims=True)
model2 = FieldModel(mesh, MaterialParams(alpha=0.5, d2=0.05, Q=0.5, H_ext=[0, 0, 1.0]))
print("\ntheta = 1, nonuniform data, fine-step reference")
print(format_convergence(convergence_study(model2, m_rand, SchemeConfig(variant="theta", theta=1.0, T_final=0.2),
                                           [0.02, 0.01, 0.005])))
