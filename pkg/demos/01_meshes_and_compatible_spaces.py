"""Tour of the building blocks: periodic meshes, the four compatible
element triples, and the discrete vector-calculus identities.

Run from the repository root:  python demos/01_meshes_and_compatible_spaces.py
"""

import numpy as np

from swfem import (Scheme, make_triple, read_msh, structured_mesh,
                   triangle_quadrature)

# A structured mesh splits n x n squares along their diagonals; on the
# torus the counts are exactly V = n^2, E = 3 n^2, F = 2 n^2.
mesh = structured_mesh(8)
print(f"structured n=8: {mesh.num_vertices} vertices, "
      f"{mesh.num_edges} edges, {mesh.num_cells} cells; "
      f"Euler characteristic = "
      f"{mesh.num_vertices - mesh.num_edges + mesh.num_cells}")
print(f"total area = {mesh.areas.sum():.15f}")

# Unstructured meshes come from MSH files whose boundary nodes match
# periodically; the reader identifies the seams.
unstructured = read_msh("tests/data/unstructured_16.msh")
print(f"\nunstructured: {unstructured.num_cells} cells, "
      f"{unstructured.num_edges} edges")

# Quadrature rules are exact for monomials up to their degree.
rule = triangle_quadrature(6)
approx = np.sum(rule.weights * rule.points[:, 0] ** 2
                * rule.points[:, 1] ** 2)
print(f"\nquadrature check: integral of x^2 y^2 = {approx:.12f} "
      f"(exact 1/180 = {1 / 180:.12f})")

# Each velocity family fixes its vorticity and depth partners.  The
# rotated gradient of the vorticity space lies inside the velocity
# space, and divergences of velocities fill the depth space exactly.
print(f"\n{'family':8s} {'dim E':>6s} {'dim S':>6s} {'dim V':>6s} "
      f"{'max |div rot_grad|':>20s}")
for family in ("rt0", "bdm1", "bdfm1", "bdm2"):
    triple = make_triple(family, mesh)
    scheme = Scheme(triple)
    product = scheme.div.matrix @ scheme.perp_grad.matrix
    defect = np.abs(product.data).max() if product.nnz else 0.0
    print(f"{family:8s} {triple.E.dim:6d} {triple.S.dim:6d} "
          f"{triple.V.dim:6d} {defect:20.3e}")

print("\nThe zero products above are the discrete analogue of "
      "div curl = 0; they are what makes the conservation arguments "
      "work on any of these meshes.")
