"""Reference elements on the unit triangle.

Scalar continuous families P1, P2, P2+B3 (cubic bubble) and P3 carry the
potential vorticity; discontinuous DG0/DG1 carry the layer depth; the
div-conforming vector families RT0, BDM1, BDFM1 and BDM2 carry velocity
and volume flux.  Nodal bases are constructed by inverting a generalized
Vandermonde matrix of degree-of-freedom functionals applied to a prime
(monomial) basis; the inversion is done in extended precision so that
discrete identities relying on exact cancellation (for instance that the
divergence of a rotated gradient vanishes) hold to near machine accuracy.

Edge-attached functionals depend on the direction in which the edge is
traversed.  Bases are built for the edge orientation in which every edge
runs from its lower- to its higher-numbered endpoint; the other seven
orientation patterns of a triangle are obtained by exact signed
permutations of the base functionals (odd normal moments change sign
under reversal, interior edge points swap position).
"""

from dataclasses import dataclass

import numpy as np

from .quadrature import gauss_legendre_01, triangle_quadrature

LD = np.longdouble

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

# Edge e is opposite vertex e, directed from lower to higher local vertex.
EDGE_VERTICES = ((1, 2), (0, 2), (0, 1))

# Unit outward normals and (tangent, length) of the reference edges.
EDGE_NORMALS = np.array([
    [1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0)],
    [-1.0, 0.0],
    [0.0, -1.0],
])
EDGE_LENGTHS = np.array([np.sqrt(2.0), 1.0, 1.0])

SCALAR_FAMILIES = ("P1", "P2", "P2B3", "P3", "DG0", "DG1")
VECTOR_FAMILIES = ("RT0", "BDM1", "BDFM1", "BDM2")

_N_EDGE_QPTS = 8          # exact for edge integrands up to degree 15
_INTERIOR_QDEG = 10


def shifted_legendre(k, t):
    """Legendre polynomial of degree k on [0, 1]; parity (-1)^k about 1/2."""
    if k == 0:
        return np.ones_like(t)
    if k == 1:
        return 2.0 * t - 1.0
    if k == 2:
        return 6.0 * t * t - 6.0 * t + 1.0
    raise ValueError(f"edge moment order {k} not supported")


def edge_point(e, t):
    """Point at parameter t along reference edge e (low to high vertex)."""
    a, b = EDGE_VERTICES[e]
    pa, pb = REFERENCE_VERTICES[a], REFERENCE_VERTICES[b]
    t = np.asarray(t)
    return pa + np.multiply.outer(t, pb - pa)


# ---------------------------------------------------------------------------
# Prime bases (rows of monomial-type polynomials with derivatives)
# ---------------------------------------------------------------------------


def _monomial_exponents(degree):
    return [(a, d - a) for d in range(degree + 1) for a in range(d, -1, -1)]


def _eval_monomials(exps, pts):
    x, y = pts[:, 0], pts[:, 1]
    vals = np.empty((len(exps), len(pts)), dtype=pts.dtype)
    grads = np.empty((len(exps), len(pts), 2), dtype=pts.dtype)
    for i, (a, b) in enumerate(exps):
        vals[i] = x ** a * y ** b
        grads[i, :, 0] = a * x ** (a - 1) * y ** b if a else 0.0
        grads[i, :, 1] = b * x ** a * y ** (b - 1) if b else 0.0
    return vals, grads


class _ScalarPrime:
    def __init__(self, degree, bubble=False):
        self.exps = _monomial_exponents(degree)
        self.bubble = bubble
        self.dim = len(self.exps) + (1 if bubble else 0)

    def eval(self, pts):
        vals, grads = _eval_monomials(self.exps, pts)
        if self.bubble:
            x, y = pts[:, 0], pts[:, 1]
            b = 27.0 * x * y * (1.0 - x - y)
            gb = np.stack([27.0 * (y - 2 * x * y - y * y),
                           27.0 * (x - x * x - 2 * x * y)], axis=-1)
            vals = np.vstack([vals, b[None]])
            grads = np.concatenate([grads, gb[None]], axis=0)
        return vals, grads


class _VectorPrime:
    """Vector polynomials given by coefficients over component monomials."""

    def __init__(self, exps, coeffs):
        self.exps = exps              # shared scalar monomial set
        self.coeffs = coeffs          # (dim, nmono, 2)
        self.dim = len(coeffs)

    def eval(self, pts):
        mono, dmono = _eval_monomials(self.exps, pts)
        vals = np.einsum("imd,mp->ipd", self.coeffs, mono)
        divs = (np.einsum("im,mp->ip", self.coeffs[:, :, 0], dmono[:, :, 0])
                + np.einsum("im,mp->ip", self.coeffs[:, :, 1],
                            dmono[:, :, 1]))
        return vals, divs


def _full_vector_prime(degree, dtype=LD):
    exps = _monomial_exponents(degree)
    n = len(exps)
    coeffs = np.zeros((2 * n, n, 2), dtype=dtype)
    for i in range(n):
        coeffs[i, i, 0] = 1.0
        coeffs[n + i, i, 1] = 1.0
    return _VectorPrime(exps, coeffs)


def _rt0_prime(dtype=LD):
    exps = _monomial_exponents(1)     # 1, x, y
    coeffs = np.zeros((3, 3, 2), dtype=dtype)
    coeffs[0, 0, 0] = 1.0             # (1, 0)
    coeffs[1, 0, 1] = 1.0             # (0, 1)
    coeffs[2, 1, 0] = 1.0             # (x, y)
    coeffs[2, 2, 1] = 1.0
    return _VectorPrime(exps, coeffs)


def _bdfm1_prime(dtype=LD):
    # Quadratic vector fields whose edge-normal trace is linear on every
    # edge of the reference triangle: the full linear fields plus the
    # three combinations (x^2 + xy, 0), (x^2, xy), (-x^2, y^2).
    exps = _monomial_exponents(2)     # 1, x, y, x^2, xy, y^2
    idx = {e: i for i, e in enumerate(exps)}
    coeffs = np.zeros((9, len(exps), 2), dtype=dtype)
    for i, e in enumerate([(0, 0), (1, 0), (0, 1)]):
        coeffs[2 * i, idx[e], 0] = 1.0
        coeffs[2 * i + 1, idx[e], 1] = 1.0
    coeffs[6, idx[(2, 0)], 0] = 1.0
    coeffs[6, idx[(1, 1)], 0] = 1.0
    coeffs[7, idx[(2, 0)], 0] = 1.0
    coeffs[7, idx[(1, 1)], 1] = 1.0
    coeffs[8, idx[(2, 0)], 0] = -1.0
    coeffs[8, idx[(0, 2)], 1] = 1.0
    return _VectorPrime(exps, coeffs)


def _perp_bubble(pts):
    """rot(grad b) for the unnormalised bubble b = x y (1 - x - y)."""
    x, y = pts[:, 0], pts[:, 1]
    return np.stack([-(x - x * x - 2 * x * y),
                     y - 2 * x * y - y * y], axis=-1)


# ---------------------------------------------------------------------------
# Degree-of-freedom functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DofDescriptor:
    """Geometric association and functional kind of one local DOF."""

    entity: str        # 'vertex' | 'edge' | 'cell'
    index: int         # local entity index ('cell': running counter)
    slot: int          # position within the entity's DOF block
    kind: str          # 'point_eval' | 'normal_moment' | 'tangent_moment'
                       # | 'interior_moment'
    hdiv_sign: bool    # True when the global coefficient carries the
                       # outward-normal agreement sign


class ReferenceElement:
    """Nodal basis dual to a set of DOF functionals, with orientation
    variants.

    The functionals are represented as weight tensors over a fixed set of
    evaluation points, so applying all DOFs to an arbitrary function is a
    single contraction; the same machinery builds the Vandermonde matrix.
    """

    def __init__(self, family, degree, prime, dofs, descriptors,
                 value_shape):
        self.family = family
        self.degree = degree
        self.value_shape = value_shape
        self.dof_descriptors = descriptors
        self.ndof = len(descriptors)
        self._prime = prime
        if prime.dim != self.ndof:
            raise ValueError(f"{family}: {prime.dim} prime functions for "
                             f"{self.ndof} DOFs")

        # Evaluation point pool: per-edge Gauss points, interior
        # quadrature, then any isolated functional points.
        epts, ewts = gauss_legendre_01(_N_EDGE_QPTS)
        tri = triangle_quadrature(_INTERIOR_QDEG)
        pools = [edge_point(e, epts) for e in range(3)]
        pools.append(tri.points)
        extra = [d["point"] for d in dofs if d["type"] == "point"]
        if extra:
            pools.append(np.asarray(extra))
        self.eval_points = np.vstack(pools).astype(LD)
        # Purely nodal elements expose their node coordinates (used for
        # exact strong derivatives into discontinuous spaces).
        if all(d["type"] == "point" for d in dofs):
            self.nodal_points = np.asarray([d["point"] for d in dofs],
                                           dtype=float)
        else:
            self.nodal_points = None
        edge_off = [0, _N_EDGE_QPTS, 2 * _N_EDGE_QPTS]
        int_off = 3 * _N_EDGE_QPTS
        extra_off = int_off + len(tri.points)

        npts = len(self.eval_points)
        ncomp = 2 if value_shape == "vector" else 1
        W = np.zeros((self.ndof, npts, ncomp), dtype=LD)
        n_extra = 0
        for i, d in enumerate(dofs):
            if d["type"] == "point":
                W[i, extra_off + n_extra, d.get("component", 0)] = 1.0
                n_extra += 1
            elif d["type"] == "edge_normal_moment":
                e, k = d["edge"], d["order"]
                sl = slice(edge_off[e], edge_off[e] + _N_EDGE_QPTS)
                w = (ewts * shifted_legendre(k, epts) * EDGE_LENGTHS[e])
                W[i, sl, 0] = w * EDGE_NORMALS[e, 0]
                W[i, sl, 1] = w * EDGE_NORMALS[e, 1]
            elif d["type"] == "edge_tangent_moment":
                e = d["edge"]
                a, b = EDGE_VERTICES[e]
                tang = REFERENCE_VERTICES[b] - REFERENCE_VERTICES[a]
                tang = tang / np.linalg.norm(tang)
                sl = slice(edge_off[e], edge_off[e] + _N_EDGE_QPTS)
                W[i, sl, 0] = ewts * EDGE_LENGTHS[e] * tang[0]
                W[i, sl, 1] = ewts * EDGE_LENGTHS[e] * tang[1]
            elif d["type"] == "interior_moment":
                cvals = d["field"](self.eval_points[int_off:extra_off]
                                   .astype(float)).astype(LD)
                sl = slice(int_off, extra_off)
                W[i, sl, :] = tri.weights[:, None] * cvals
            else:
                raise ValueError(f"unknown DOF spec {d['type']!r}")
        self._W = W

        # Vandermonde and its inverse transpose (nodal coefficients) in
        # extended precision.
        if value_shape == "vector":
            pv, _ = prime.eval(self.eval_points)
            V = np.einsum("ipd,jpd->ij", W, pv)
        else:
            pv, _ = prime.eval(self.eval_points)
            V = np.einsum("ip,jp->ij", W[:, :, 0], pv)
        self._vandermonde_cond = float(np.linalg.cond(V.astype(float)))
        if not np.isfinite(self._vandermonde_cond) or \
                self._vandermonde_cond > 1e8:
            raise ValueError(f"{family}: DOF set is not unisolvent "
                             f"(cond {self._vandermonde_cond:.2e})")
        self._N = _invert_transpose_ld(V)

        # Orientation variants: signed permutations of the base DOFs.
        perm = np.tile(np.arange(self.ndof), (8, 1))
        sign = np.ones((8, self.ndof))
        by_edge = {}
        for i, d in enumerate(descriptors):
            if d.entity == "edge":
                by_edge.setdefault(d.index, []).append(i)
        for var in range(8):
            aligned = [(var >> e) & 1 == 1 for e in range(3)]
            for e, dof_ids in by_edge.items():
                if aligned[e]:
                    continue
                kinds = [descriptors[i].kind for i in dof_ids]
                if all(k == "normal_moment" for k in kinds):
                    for i in dof_ids:
                        if descriptors[i].slot % 2 == 1:
                            sign[var, i] = -1.0
                elif all(k == "point_eval" for k in kinds):
                    rev = list(reversed(dof_ids))
                    for i, j in zip(dof_ids, rev):
                        perm[var, i] = j
                else:
                    raise ValueError("mixed edge DOF kinds")
        self.variant_perm = perm
        self.variant_sign = sign

    # -- queries ----------------------------------------------------------

    @property
    def dim(self):
        return self.ndof

    def entity_dof_counts(self):
        """DOFs per vertex, per edge, per cell."""
        nv = sum(1 for d in self.dof_descriptors
                 if d.entity == "vertex" and d.index == 0)
        ne = sum(1 for d in self.dof_descriptors
                 if d.entity == "edge" and d.index == 0)
        nc = sum(1 for d in self.dof_descriptors if d.entity == "cell")
        return nv, ne, nc

    # -- tabulation -------------------------------------------------------

    def tabulate(self, points, dtype=float):
        """Base-orientation basis tables at reference points.

        Scalar elements return {'val': (ndof, n), 'grad': (ndof, n, 2)};
        vector elements return {'val': (ndof, n, 2), 'div': (ndof, n)}.
        """
        pts = np.asarray(points, dtype=LD)
        if self.value_shape == "vector":
            pv, pd = self._prime.eval(pts)
            val = np.einsum("ij,jpd->ipd", self._N, pv)
            div = np.einsum("ij,jp->ip", self._N, pd)
            return {"val": val.astype(dtype), "div": div.astype(dtype)}
        pv, pg = self._prime.eval(pts)
        val = np.einsum("ij,jp->ip", self._N, pv)
        grad = np.einsum("ij,jpd->ipd", self._N, pg)
        return {"val": val.astype(dtype), "grad": grad.astype(dtype)}

    def orient_table(self, table, variant):
        """Signed row permutation mapping base tables to a variant."""
        perm = self.variant_perm[variant]
        sign = self.variant_sign[variant]
        out = {}
        for key, arr in table.items():
            shaped = sign.reshape((-1,) + (1,) * (arr.ndim - 1))
            out[key] = arr[perm] * shaped
        return out

    def apply_dofs(self, values, variant=0):
        """Apply all DOF functionals to a function sampled at
        `self.eval_points` (values shaped (n,) or (n, 2))."""
        vals = np.asarray(values, dtype=LD)
        if self.value_shape == "vector":
            base = np.einsum("ipd,pd->i", self._W, vals)
        else:
            base = np.einsum("ip,p->i", self._W[:, :, 0], vals)
        perm = self.variant_perm[variant]
        out = np.empty_like(base)
        out[:] = self.variant_sign[variant] * base[perm]
        # A reversed edge evaluates the *permuted* functional set, so the
        # variant's dof i is the base functional perm[i] with its sign.
        return out

    def dof_weights(self, variant=0):
        """Functional weight tensor (ndof, npts, ncomp) for a variant."""
        perm = self.variant_perm[variant]
        sign = self.variant_sign[variant]
        return self._W[perm] * sign[:, None, None]


def _invert_transpose_ld(V):
    """inv(V)^T by Gauss-Jordan in extended precision."""
    n = V.shape[0]
    a = np.hstack([V.astype(LD), np.eye(n, dtype=LD)])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if a[piv, col] == 0:
            raise ValueError("singular Vandermonde matrix")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
        a[col] = a[col] / a[col, col]
        for r in range(n):
            if r != col and a[r, col] != 0:
                a[r] = a[r] - a[r, col] * a[col]
    return a[:, n:].T.copy()


# ---------------------------------------------------------------------------
# Family constructors
# ---------------------------------------------------------------------------


def _scalar_lagrange(family, degree, prime_degree=None, vertex=True,
                     edge_slots=(), cell_points=(), bubble=False):
    dofs, desc = [], []
    if vertex:
        for v in range(3):
            dofs.append({"type": "point", "point": REFERENCE_VERTICES[v]})
            desc.append(DofDescriptor("vertex", v, 0, "point_eval", False))
    for e in range(3):
        for slot, t in enumerate(edge_slots):
            dofs.append({"type": "point", "point": edge_point(e, t)})
            desc.append(DofDescriptor("edge", e, slot, "point_eval", False))
    for j, p in enumerate(cell_points):
        dofs.append({"type": "point", "point": np.asarray(p)})
        desc.append(DofDescriptor("cell", j, j, "point_eval", False))
    if prime_degree is None:
        prime_degree = degree
    prime = _ScalarPrime(prime_degree, bubble=bubble)
    return ReferenceElement(family, degree, prime, dofs, desc, "scalar")


def _hdiv_element(family, degree, prime, edge_orders, n_tangent=0,
                  interior_fields=()):
    dofs, desc = [], []
    for e in range(3):
        for k in edge_orders:
            dofs.append({"type": "edge_normal_moment", "edge": e,
                         "order": k})
            desc.append(DofDescriptor("edge", e, k, "normal_moment", True))
    cell_counter = 0
    if n_tangent:
        for e in range(3):
            dofs.append({"type": "edge_tangent_moment", "edge": e})
            desc.append(DofDescriptor("cell", cell_counter, cell_counter,
                                      "tangent_moment", False))
            cell_counter += 1
    for field in interior_fields:
        dofs.append({"type": "interior_moment", "field": field})
        desc.append(DofDescriptor("cell", cell_counter, cell_counter,
                                  "interior_moment", False))
        cell_counter += 1
    return ReferenceElement(family, degree, prime, dofs, desc, "vector")


_CENTROID = np.array([1.0 / 3.0, 1.0 / 3.0])


def make_element(family):
    """Construct a reference element by family tag."""
    family = family.upper().replace("+", "").replace("⊕", "")
    if family == "P1":
        return _scalar_lagrange("P1", 1)
    if family == "P2":
        return _scalar_lagrange("P2", 2, edge_slots=(0.5,))
    if family in ("P2B3", "P2B"):
        return _scalar_lagrange("P2B3", 3, prime_degree=2,
                                edge_slots=(0.5,),
                                cell_points=(_CENTROID,), bubble=True)
    if family == "P3":
        return _scalar_lagrange("P3", 3, edge_slots=(1 / 3, 2 / 3),
                                cell_points=(_CENTROID,))
    if family == "DG0":
        return _scalar_lagrange("DG0", 0, vertex=False,
                                cell_points=(_CENTROID,))
    if family == "DG1":
        el = _scalar_lagrange("DG1", 1, vertex=False,
                              cell_points=tuple(REFERENCE_VERTICES))
        return el
    if family == "RT0":
        return _hdiv_element("RT0", 1, _rt0_prime(), edge_orders=(0,))
    if family == "BDM1":
        return _hdiv_element("BDM1", 1, _full_vector_prime(1),
                             edge_orders=(0, 1))
    if family == "BDFM1":
        return _hdiv_element("BDFM1", 2, _bdfm1_prime(),
                             edge_orders=(0, 1), n_tangent=3)
    if family == "BDM2":
        consts = (lambda p: np.tile([1.0, 0.0], (len(p), 1)),
                  lambda p: np.tile([0.0, 1.0], (len(p), 1)))
        return _hdiv_element("BDM2", 2, _full_vector_prime(2),
                             edge_orders=(0, 1, 2),
                             interior_fields=consts + (_perp_bubble,))
    raise ValueError(f"unknown element family {family!r}; expected one of "
                     f"{SCALAR_FAMILIES + VECTOR_FAMILIES}")


def piola_transform(jac, det_jac, ref_vals, ref_divs=None):
    """Contravariant Piola map of reference vector values.

    v_phys = J v_ref / det J preserves edge-normal fluxes; divergences map
    as div_phys = div_ref / det J.  `jac` may be a single (2, 2) matrix or
    a (..., 2, 2) stack matching leading axes of `ref_vals`.
    """
    det = np.asarray(det_jac)
    if np.any(det <= 0):
        raise ValueError("degenerate cell: non-positive Jacobian "
                         "determinant")
    vals = np.einsum("...ab,...b->...a", jac, ref_vals) / det[..., None]
    if ref_divs is None:
        return vals
    return vals, ref_divs / det
