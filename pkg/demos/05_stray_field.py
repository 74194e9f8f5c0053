"""Demagnetizing field of a uniformly magnetized cube.

The scalar potential is solved on a box padded around the sample with
u = 0 on its outer boundary. For a cube the exact average field is -m/3;
the truncation and the coarse mesh leave a few percent of error.
"""
import time

import numpy as np

from tangentllg import FieldModel, MaterialParams, StrayFieldBackend, build_box_mesh
from tangentllg.fem import lumped_inner

for n in (4, 6):
    t0 = time.perf_counter()
    mesh = build_box_mesh(n, n, n)
    model = FieldModel(mesh, MaterialParams(alpha=1.0), StrayFieldBackend("truncated_fem", padding_factor=4.0))
    m = np.tile([0.0, 0.0, 1.0], (mesh.num_vertices, 1))
    H = model.stray_field(m)
    avg = (model.V[:, None] * H).sum(0) / model.V.sum()
    print(f"{n}^3 cells, padded mesh {model.stray_solver.padded.num_vertices} vertices: "
          f"<H_d> = {np.round(avg, 4)}  ({time.perf_counter() - t0:.1f}s)")

# The magnetostatic energy -<H_d(v), v>/2 is non-negative for any v.
rng = np.random.default_rng(0)
v = rng.normal(size=(mesh.num_vertices, 3))
print("-<H_d(v), v> =", -lumped_inner(model.stray_field(v), v, model.V))
