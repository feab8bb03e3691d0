"""Global function spaces, fields and L2 projection.

A FunctionSpace couples a reference element to a periodic mesh: DOFs are
numbered vertex block, then edge block, then cell block, so discontinuous
spaces are cell-major and their mass matrices block diagonal.  Velocity
(H(div)) spaces attach a +-1 sign to each shared edge DOF recording
whether the cell's outward normal agrees with the global edge normal;
together with the orientation-corrected tabulation variants this makes
the normal component of any field single-valued across edges.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .elements import make_element, piola_transform
from .quadrature import triangle_quadrature

_PROJECTION_TOL = 1e-13


class SpaceError(Exception):
    pass


@dataclass
class Tabulation:
    """Physical basis tables of one space at one quadrature rule.

    val is (ncells, ndof, nq) for scalar spaces, (ncells, ndof, nq, 2)
    for vector spaces; scalar spaces also carry grad (ncells, ndof, nq,
    2), vector spaces div (ncells, ndof, nq).  wdet holds quadrature
    weight times the Jacobian determinant; x the physical points.
    """

    rule: object
    val: np.ndarray
    grad: np.ndarray
    div: np.ndarray
    wdet: np.ndarray
    x: np.ndarray


class FunctionSpace:
    def __init__(self, mesh, element):
        if isinstance(element, str):
            element = make_element(element)
        self.mesh = mesh
        self.element = element
        nv, ne, nc = element.entity_dof_counts()
        self.entity_dofs = (nv, ne, nc)
        V, E, F = mesh.num_vertices, mesh.num_edges, mesh.num_cells
        self.dim = nv * V + ne * E + nc * F

        ndof = element.ndof
        dofmap = np.empty((F, ndof), dtype=np.int64)
        signs = np.ones((F, ndof))
        edge_off = nv * V
        cell_off = edge_off + ne * E
        for ldof, d in enumerate(element.dof_descriptors):
            if d.entity == "vertex":
                dofmap[:, ldof] = mesh.cells[:, d.index] * nv + d.slot
            elif d.entity == "edge":
                dofmap[:, ldof] = (edge_off
                                   + mesh.cell_edges[:, d.index] * ne
                                   + d.slot)
                if d.hdiv_sign:
                    signs[:, ldof] = mesh.cell_edge_signs[:, d.index]
            else:
                dofmap[:, ldof] = cell_off + np.arange(F) * nc + d.index
        self.dofmap = dofmap
        self.signs = signs

        # Tabulation variant per cell, from the edge alignment bits.
        a = mesh.cell_edge_aligned
        self.variant = (a[:, 0].astype(np.int64)
                        + 2 * a[:, 1] + 4 * a[:, 2])
        self._tabs = {}

    @property
    def is_vector(self):
        return self.element.value_shape == "vector"

    @property
    def is_discontinuous(self):
        return self.entity_dofs[0] == 0 and self.entity_dofs[1] == 0

    def tabulation(self, rule):
        """Physical tabulation at `rule`, cached per quadrature degree."""
        key = rule.degree
        tab = self._tabs.get(key)
        if tab is None:
            tab = self._tabulate(rule)
            self._tabs[key] = tab
        return tab

    def _tabulate(self, rule):
        mesh = self.mesh
        el = self.element
        base = el.tabulate(rule.points)
        oriented = [el.orient_table(base, v) for v in range(8)]
        # Gather the per-cell variant, then apply the cell geometry.
        wdet = np.outer(mesh.det_jac, rule.weights)
        x = (mesh.cell_coords[:, 0, None, :]
             + np.einsum("cab,qb->cqa", mesh.jac, rule.points))
        if self.is_vector:
            vhat = np.stack([o["val"] for o in oriented])[self.variant]
            dhat = np.stack([o["div"] for o in oriented])[self.variant]
            val = (np.einsum("cab,cnqb->cnqa", mesh.jac, vhat)
                   / mesh.det_jac[:, None, None, None])
            div = dhat / mesh.det_jac[:, None, None]
            return Tabulation(rule, val, None, div, wdet, x)
        vhat = np.stack([o["val"] for o in oriented])[self.variant]
        ghat = np.stack([o["grad"] for o in oriented])[self.variant]
        grad = np.einsum("cba,cnqb->cnqa", mesh.jac_inv, ghat)
        return Tabulation(rule, vhat, grad, None, wdet, x)

    def local_coefficients(self, coeffs):
        """Per-cell signed coefficients (ncells, ndof_local)."""
        return coeffs[self.dofmap] * self.signs

    def scatter(self, local, out=None):
        """Accumulate per-cell values into a global vector
        (deterministic reduction order)."""
        acc = np.bincount(self.dofmap.ravel(),
                          weights=(local * self.signs).ravel(),
                          minlength=self.dim)
        if out is None:
            return acc
        out += acc
        return out


@dataclass
class Field:
    """Coefficient vector bound to a function space."""

    space: FunctionSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.dim,):
            raise SpaceError(f"coefficient vector of length "
                             f"{len(self.coeffs)} for space of dimension "
                             f"{self.space.dim}")

    def copy(self):
        return Field(self.space, self.coeffs.copy())

    def at_quadrature(self, rule_or_tab):
        """Values at quadrature points, (ncells, nq[, 2])."""
        tab = (rule_or_tab if isinstance(rule_or_tab, Tabulation)
               else self.space.tabulation(rule_or_tab))
        cl = self.space.local_coefficients(self.coeffs)
        if self.space.is_vector:
            return np.einsum("cn,cnqd->cqd", cl, tab.val)
        return np.einsum("cn,cnq->cq", cl, tab.val)

    def gradient_at_quadrature(self, rule_or_tab):
        """Gradients of a scalar field, (ncells, nq, 2)."""
        if self.space.is_vector:
            raise SpaceError("gradient_at_quadrature is for scalar "
                             "fields; use divergence_at_quadrature")
        tab = (rule_or_tab if isinstance(rule_or_tab, Tabulation)
               else self.space.tabulation(rule_or_tab))
        cl = self.space.local_coefficients(self.coeffs)
        return np.einsum("cn,cnqd->cqd", cl, tab.grad)

    def divergence_at_quadrature(self, rule_or_tab):
        """Divergence of a vector field, (ncells, nq)."""
        if not self.space.is_vector:
            raise SpaceError("divergence_at_quadrature is for vector "
                             "fields")
        tab = (rule_or_tab if isinstance(rule_or_tab, Tabulation)
               else self.space.tabulation(rule_or_tab))
        cl = self.space.local_coefficients(self.coeffs)
        return np.einsum("cn,cnq->cq", cl, tab.div)

    def evaluate(self, cell, ref_points):
        """Evaluate inside one cell at reference coordinates."""
        el = self.space.element
        table = el.orient_table(el.tabulate(ref_points),
                                int(self.space.variant[cell]))
        cl = self.space.local_coefficients(self.coeffs)[cell]
        if self.space.is_vector:
            mesh = self.space.mesh
            vals = np.einsum("n,nqd->qd", cl, table["val"])
            return piola_transform(mesh.jac[cell], mesh.det_jac[cell],
                                   vals)
        return np.einsum("n,nq->q", cl, table["val"])


def function_space(mesh, family):
    return FunctionSpace(mesh, family)


@dataclass
class SpaceTriple:
    """Compatible (vorticity, velocity, depth) spaces for one family."""

    family: str
    E: FunctionSpace
    S: FunctionSpace
    V: FunctionSpace

    @property
    def mesh(self):
        return self.E.mesh


_TRIPLES = {
    "rt0": ("P1", "RT0", "DG0"),
    "bdm1": ("P2", "BDM1", "DG0"),
    "bdfm1": ("P2B3", "BDFM1", "DG1"),
    "bdm2": ("P3", "BDM2", "DG1"),
}


def make_triple(family, mesh):
    """Build the compatible space triple for a velocity family.

    The vorticity space maps into the velocity space under the rotated
    gradient, and the divergence of the velocity space is exactly the
    depth space.
    """
    key = family.lower()
    if key not in _TRIPLES:
        raise SpaceError(f"unknown element family {family!r}; expected "
                         f"one of {sorted(_TRIPLES)}")
    e, s, v = _TRIPLES[key]
    return SpaceTriple(key, FunctionSpace(mesh, e), FunctionSpace(mesh, s),
                       FunctionSpace(mesh, v))


# ---------------------------------------------------------------------------
# Mass matrices and projection
# ---------------------------------------------------------------------------


def assemble_mass(space, weight=None, quad_degree=None):
    """Mass matrix of a space, optionally weighted by a positive depth
    field: entries are integrals of basis_i * basis_j (* weight).

    Returns a symmetric SparseOperator; discontinuous spaces also carry
    their cell-local blocks for direct solves.
    """
    if quad_degree is None:
        quad_degree = 2 * space.element.degree
        if weight is not None:
            quad_degree += weight.space.element.degree
        quad_degree = max(quad_degree, 1)
    rule = triangle_quadrature(quad_degree)
    tab = space.tabulation(rule)
    w = tab.wdet
    if weight is not None:
        wq = weight.at_quadrature(weight.space.tabulation(rule))
        if np.any(wq <= 1e-10):
            raise SpaceError("mass weight is not positive at a quadrature "
                             f"point (min {wq.min():.3e}); weighted mass "
                             "matrix would lose definiteness")
        w = w * wq
    if space.is_vector:
        local = np.einsum("ciqd,cjqd,cq->cij", tab.val, tab.val, w)
    else:
        local = np.einsum("ciq,cjq,cq->cij", tab.val, tab.val, w)
    local *= space.signs[:, :, None] * space.signs[:, None, :]
    rows = np.broadcast_to(space.dofmap[:, :, None], local.shape)
    cols = np.broadcast_to(space.dofmap[:, None, :], local.shape)
    blocks = local if space.is_discontinuous else None
    return linalg.SparseOperator.from_coo(
        rows.ravel(), cols.ravel(), local.ravel(),
        (space.dim, space.dim), symmetric=True, blocks=blocks)


def mass_solve(mass, space, rhs, tol=_PROJECTION_TOL, x0=None):
    """Solve the mass system appropriately for the space type."""
    if space.is_discontinuous:
        return linalg.block_diag_solve(mass, rhs), \
            linalg.SolverReport(0, 0.0, True)
    return linalg.cg_solve(mass, rhs, tol=tol, x0=x0)


def l2_project(source, space, quad_degree=None, mass=None,
               tol=_PROJECTION_TOL):
    """L2 projection of an analytic function or a Field into `space`.

    Analytic sources are sampled at elevated quadrature; a callable must
    accept an (..., 2) coordinate array and return values (scalar spaces)
    or (..., 2) vectors.  Projecting a Field already in the target space
    returns it unchanged (the mass solve starts from the exact answer).
    """
    if quad_degree is None:
        if isinstance(source, Field):
            quad_degree = (source.space.element.degree
                           + space.element.degree + 1)
        else:
            quad_degree = max(2 * space.element.degree + 12, 14)
    rule = triangle_quadrature(quad_degree)
    tab = space.tabulation(rule)
    if isinstance(source, Field):
        vals = source.at_quadrature(source.space.tabulation(rule))
        if source.space.is_vector != space.is_vector:
            raise SpaceError("cannot project between scalar and vector "
                             "spaces")
    else:
        vals = np.asarray(source(tab.x))
        want = tab.x.shape if space.is_vector else tab.x.shape[:-1]
        if vals.shape != want:
            raise SpaceError(f"source returned shape {vals.shape}, "
                             f"expected {want}")
    if space.is_vector:
        local = np.einsum("cnqd,cqd,cq->cn", tab.val, vals, tab.wdet)
    else:
        local = np.einsum("cnq,cq,cq->cn", tab.val, vals, tab.wdet)
    rhs = space.scatter(local)
    if mass is None:
        mass = assemble_mass(space,
                             quad_degree=max(2 * space.element.degree, 1))
    x0 = None
    if isinstance(source, Field) and source.space is space:
        x0 = source.coeffs
    x, _ = mass_solve(mass, space, rhs, tol=tol, x0=x0)
    return Field(space, x)


def piola_map(mesh, cell, reference_values, reference_divs=None):
    """Map reference vector values on one cell to physical values."""
    return piola_transform(mesh.jac[cell], mesh.det_jac[cell],
                           np.asarray(reference_values), reference_divs)
