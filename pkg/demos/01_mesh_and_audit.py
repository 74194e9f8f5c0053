"""Box meshes, the non-obtuse stiffness audit and basic P1 matrices."""
import numpy as np

from tangentllg import audit_mesh, build_box_mesh
from tangentllg.fem import assemble_stiffness, consistent_mass, lumped_mass
from tangentllg.mesh import Mesh

# Six Kuhn tetrahedra per cell; every interior angle is 45, 60 or 90 degrees.
mesh = build_box_mesh(4, 4, 4, lengths=(1.0, 1.0, 1.0))
print(f"{mesh.num_vertices} vertices, {mesh.num_tets} tets, h = {mesh.h:.4f}")

report = audit_mesh(mesh)
print(report.summary())

# The lumped mass sums to the domain volume; so does 1^T M 1 for the full mass.
K, V, M = assemble_stiffness(mesh), lumped_mass(mesh), consistent_mass(mesh)
one = np.ones(mesh.num_vertices)
print("sum V =", V.sum(), " 1^T M 1 =", one @ M @ one)
print("K annihilates constants:", np.abs(K @ one).max())

# A flattened tetrahedron has an obtuse dihedral angle and fails the audit.
sliver = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.9, 0.9, 0.05]], [[0, 1, 2, 3]])
print(audit_mesh(sliver).summary())
