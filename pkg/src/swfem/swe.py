"""Rotating shallow-water scheme on compatible finite element spaces.

Prognostic variables are the velocity u (H(div) space S) and the layer
depth h (discontinuous space V).  The potential vorticity q (continuous
space E) and the volume flux F (in S) are diagnosed from them:

    <gamma, q h> = <-rot_grad gamma, u> + <gamma, f>   for all gamma in E,
    <w, F> = <w, h u>                                   for all w in S,

and the evolution equations read

    <w, du/dt> = -<w, q* F_perp> + <div w, g h + |u|^2 / 2>,
    dh/dt = -div F                    (exact, pointwise, since div S = V).

With q* = q the semi-discrete system conserves energy and potential
enstrophy; the anticipated-vorticity modification q* = q - tau (u.grad)q
dissipates enstrophy while leaving the energy budget untouched.  These
identities hold only when every assembled integral is computed exactly,
so each family carries a quadrature degree covering its worst integrand.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from . import linalg
from .elements import LD
from .quadrature import triangle_quadrature
from .spaces import Field, SpaceTriple, assemble_mass, l2_project  # noqa: F401

# Smallest layer depth treated as positive; below this the weighted
# vorticity system loses definiteness.
H_MIN = 1e-10

# Exact-integration degree per family: the worst assembled integrand is
# the stabilised vorticity flux q* F_perp . w (one extra safety degree).
_QUAD_DEGREE = {"rt0": 4, "bdm1": 5, "bdfm1": 9, "bdm2": 9}


class SchemeError(Exception):
    pass


def perp(v):
    """90-degree counterclockwise rotation (z-cross) of vectors (..., 2)."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


@dataclass
class Params:
    """Physical and stabilisation parameters.

    `coriolis` is a constant or a function of position (evaluated at
    quadrature points, never projected).  `tau` of None means "choose
    dt/2 at stepping time" when the stabilisation is enabled.
    """

    coriolis: Union[float, Callable] = 0.0
    gravity: float = 1.0
    apvm_enabled: bool = False
    tau: Optional[float] = None

    def __post_init__(self):
        if self.gravity <= 0:
            raise ValueError(f"gravity must be positive, got {self.gravity}")
        if self.tau is not None and self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")

    def effective_tau(self, dt=None):
        if not self.apvm_enabled:
            return 0.0
        if self.tau is not None:
            return self.tau
        if dt is None:
            raise ValueError("apvm enabled with tau=None outside a timestep "
                             "loop; pass an explicit tau")
        return 0.5 * dt


@dataclass
class State:
    """Prognostic pair (u, h) at simulation time t."""

    u: Field
    h: Field
    t: float = 0.0

    def copy(self):
        return State(self.u.copy(), self.h.copy(), self.t)


@dataclass
class Diagnostics:
    """Diagnosed potential vorticity and volume flux of one state."""

    q: Field
    F: Field
    reports: dict = field(default_factory=dict)


@dataclass
class TendencyResult:
    du: np.ndarray
    dh: np.ndarray
    q: Field
    F: Field
    reports: dict = field(default_factory=dict)

    def max_iterations(self):
        return max((r.iterations for r in self.reports.values()),
                   default=0)


# ---------------------------------------------------------------------------
# Derivative operators
# ---------------------------------------------------------------------------


def assemble_div(S, V):
    """Strong divergence S -> V as a sparse matrix on coefficients.

    div u restricted to a cell lies in the local depth space, so its V
    coefficients are point values at the depth element's nodes; no global
    solve is involved.
    """
    el_v = V.element
    if el_v.nodal_points is None:
        raise SchemeError("divergence target must be a nodal "
                          "discontinuous space")
    pts = el_v.nodal_points
    el_s = S.element
    base = el_s.tabulate(pts)
    oriented = np.stack([el_s.orient_table(base, v)["div"]
                         for v in range(8)])
    dhat = oriented[S.variant]                       # (F, ndofS, m)
    vals = (dhat / S.mesh.det_jac[:, None, None]
            * S.signs[:, :, None])
    # rows vary over the V dof axis (m), cols over the S dof axis (j)
    rows = np.broadcast_to(V.dofmap[:, None, :], vals.shape)
    cols = np.broadcast_to(S.dofmap[:, :, None], vals.shape)
    return linalg.SparseOperator.from_coo(
        rows.ravel(), cols.ravel(), vals.ravel(), (V.dim, S.dim))


def assemble_perp_grad_embedding(E, S):
    """Exact embedding of rotated gradients: maps the coefficients of
    gamma in E to the S coefficients of rot_grad gamma.

    The contravariant pullback of a rotated gradient equals the rotated
    gradient on the reference cell, so the per-cell matrix depends only
    on the edge-orientation pattern; it is computed in extended precision
    once per pattern.  Shared S rows are written identically from both
    adjacent cells; duplicates are dropped, not summed.
    """
    el_e, el_s = E.element, S.element
    pts = el_s.eval_points                            # longdouble
    base = el_e.tabulate(pts, dtype=LD)
    local = np.empty((8, el_s.ndof, el_e.ndof))
    for var in range(8):
        grads = el_e.orient_table(base, var)["grad"]  # (ndofE, npts, 2)
        rotg = np.stack([-grads[..., 1], grads[..., 0]], axis=-1)
        W = el_s.dof_weights(var)                     # (ndofS, npts, 2)
        local[var] = np.einsum("jpd,ipd->ji", W, rotg).astype(float)

    vals = local[S.variant] * S.signs[:, :, None]     # (F, ndofS, ndofE)
    rows = np.broadcast_to(S.dofmap[:, :, None], vals.shape).ravel()
    cols = np.broadcast_to(E.dofmap[:, None, :], vals.shape).ravel()
    keys = rows * E.dim + cols
    _, keep = np.unique(keys, return_index=True)
    mat = sp.coo_matrix((vals.ravel()[keep], (rows[keep], cols[keep])),
                        shape=(S.dim, E.dim)).tocsr()
    return linalg.SparseOperator(matrix=mat)


# ---------------------------------------------------------------------------
# The assembled scheme
# ---------------------------------------------------------------------------


class Scheme:
    """Operators and assembly caches for one space triple.

    All methods are pure functions of (State, Params); optional `hint`
    arguments only seed iterative solvers with a previous solution and do
    not change what is solved.
    """

    def __init__(self, triple: SpaceTriple, quad_degree=None, cg_tol=1e-12):
        self.triple = triple
        self.mesh = triple.mesh
        self.quad_degree = (quad_degree if quad_degree is not None
                            else _QUAD_DEGREE[triple.family])
        self.rule = triangle_quadrature(self.quad_degree)
        self.cg_tol = cg_tol

        self.tab_s = triple.S.tabulation(self.rule)
        self.tab_e = triple.E.tabulation(self.rule)
        self.tab_v = triple.V.tabulation(self.rule)
        self.wdet = self.tab_s.wdet
        self.x_q = self.tab_s.x

        self.mass_s = assemble_mass(triple.S, quad_degree=self.quad_degree)
        self.mass_v = assemble_mass(triple.V, quad_degree=self.quad_degree)
        self.mass_e = assemble_mass(triple.E, quad_degree=self.quad_degree)
        self.div = assemble_div(triple.S, triple.V)
        self.perp_grad = assemble_perp_grad_embedding(triple.E, triple.S)

        # Fixed sparsity pattern for the depth-weighted vorticity mass.
        dm = triple.E.dofmap
        ne = triple.E.element.ndof
        self._e_rows = np.broadcast_to(
            dm[:, :, None], (len(dm), ne, ne)).ravel()
        self._e_cols = np.broadcast_to(
            dm[:, None, :], (len(dm), ne, ne)).ravel()

    # -- state handling ---------------------------------------------------

    def state(self, u, h, t=0.0):
        """Bundle fields into a State, checking depth positivity."""
        st = State(u, h, t)
        self.depth_at_quadrature(st)
        return st

    def depth_at_quadrature(self, state):
        hq = state.h.at_quadrature(self.tab_v)
        if np.any(hq <= H_MIN):
            raise SchemeError(f"layer depth not positive at a quadrature "
                              f"point (min {hq.min():.3e})")
        return hq

    def initial_state(self, u_fn, h_fn, t=0.0):
        """Project analytic initial velocity and depth."""
        u = l2_project(u_fn, self.triple.S)
        h = l2_project(h_fn, self.triple.V)
        return self.state(u, h, t)

    def coriolis_at_quadrature(self, params):
        f = params.coriolis
        if callable(f):
            return np.asarray(f(self.x_q))
        return np.full(self.wdet.shape, float(f))

    # -- weighted vorticity mass -------------------------------------------

    def weighted_e_mass(self, hq):
        tab = self.tab_e
        vals = np.einsum("ciq,cjq,cq->cij", tab.val, tab.val,
                         self.wdet * hq)
        mat = sp.coo_matrix((vals.ravel(), (self._e_rows, self._e_cols)),
                            shape=(self.triple.E.dim,
                                   self.triple.E.dim)).tocsr()
        return linalg.SparseOperator(matrix=mat, symmetric=True)

    # -- diagnostics --------------------------------------------------------

    def diagnose_q(self, state, params, x0=None):
        """Potential vorticity from the weighted weak system.

        Solves <gamma, q h> = <-rot_grad gamma, u> + <gamma, f>; taking
        gamma = 1 shows the solution carries total vorticity <1, f>.
        """
        hq = self.depth_at_quadrature(state)
        rhs = -(self.perp_grad.matrix.T
                @ (self.mass_s.matrix @ state.u.coeffs))
        fq = self.coriolis_at_quadrature(params)
        local = np.einsum("cnq,cq->cn", self.tab_e.val, self.wdet * fq)
        rhs = rhs + self.triple.E.scatter(local)
        mat = self.weighted_e_mass(hq)
        coeffs, report = linalg.cg_solve(mat, rhs, tol=self.cg_tol, x0=x0)
        return Field(self.triple.E, coeffs), report

    def project_flux(self, state, x0=None):
        """Volume flux: L2 projection of h u into the velocity space.

        The solve starts from the velocity coefficients (the flux is the
        depth-weighted velocity, so for near-uniform depth the guess is
        already the answer; for unit depth the projection returns u
        exactly)."""
        hq = self.depth_at_quadrature(state)
        uq = state.u.at_quadrature(self.tab_s)
        local = np.einsum("cnqd,cqd,cq->cn", self.tab_s.val, uq,
                          self.wdet * hq)
        rhs = self.triple.S.scatter(local)
        coeffs, report = linalg.cg_solve(
            self.mass_s, rhs, tol=self.cg_tol,
            x0=state.u.coeffs if x0 is None else x0)
        return Field(self.triple.S, coeffs), report

    def diagnostics(self, state, params):
        """Both diagnostic fields of a state; the vorticity weighted by
        the depth always integrates to the rotation-rate integral."""
        q, rep_q = self.diagnose_q(state, params)
        F, rep_f = self.project_flux(state)
        return Diagnostics(q=q, F=F, reports={"q": rep_q, "flux": rep_f})

    def apvm_q_star(self, q, u, tau):
        """Stabilised vorticity q - tau (u.grad)q at quadrature points.

        The gradient of q is taken cell by cell from the vorticity basis;
        tau = 0 returns the plain vorticity values.
        """
        if tau < 0:
            raise ValueError("tau must be nonnegative")
        qq = q.at_quadrature(self.tab_e)
        if tau == 0.0:
            return qq
        gradq = q.gradient_at_quadrature(self.tab_e)
        uq = u.at_quadrature(self.tab_s)
        return qq - tau * np.einsum("cqd,cqd->cq", uq, gradq)

    # -- tendency -----------------------------------------------------------

    def tendency(self, state, params, dt=None, hint=None):
        """Instantaneous rates (du/dt, dh/dt) with fresh diagnostics.

        Energy conservation can be read off directly: testing the
        momentum equation with F kills the vorticity flux pointwise
        (F . F_perp = 0) and the Bernoulli term cancels against the mass
        equation.  The depth rate is exact: dh/dt = -div F.
        """
        S = self.triple.S
        hq = self.depth_at_quadrature(state)
        uq = state.u.at_quadrature(self.tab_s)

        q, rep_q = self.diagnose_q(
            state, params, x0=None if hint is None else hint.q.coeffs)
        F, rep_f = self.project_flux(
            state, x0=None if hint is None else hint.F.coeffs)

        tau = params.effective_tau(dt)
        qstar = self.apvm_q_star(q, state.u, tau)
        fperp = perp(F.at_quadrature(self.tab_s))
        bernoulli = (params.gravity * hq
                     + 0.5 * np.einsum("cqd,cqd->cq", uq, uq))
        local = np.einsum("cnqd,cqd,cq->cn", self.tab_s.val, fperp,
                          -self.wdet * qstar)
        local += np.einsum("cnq,cq->cn", self.tab_s.div,
                           self.wdet * bernoulli)
        rhs = S.scatter(local)
        du, rep_u = linalg.cg_solve(self.mass_s, rhs, tol=self.cg_tol,
                                    x0=None if hint is None else hint.du)
        dh = -(self.div.matrix @ F.coeffs)
        return TendencyResult(du=du, dh=dh, q=q, F=F,
                              reports={"q": rep_q, "flux": rep_f,
                                       "momentum": rep_u})

    # -- integral functionals -----------------------------------------------

    def energy(self, state, params):
        """Total energy: integral of h |u|^2 / 2 + g h^2 / 2."""
        hq = state.h.at_quadrature(self.tab_v)
        uq = state.u.at_quadrature(self.tab_s)
        u2 = np.einsum("cqd,cqd->cq", uq, uq)
        return float(np.sum(self.wdet * (0.5 * hq * u2
                                         + 0.5 * params.gravity * hq * hq)))

    def enstrophy(self, state, q):
        """Potential enstrophy: integral of q^2 h."""
        hq = state.h.at_quadrature(self.tab_v)
        qq = q.at_quadrature(self.tab_e)
        return float(np.sum(self.wdet * qq * qq * hq))

    def total_vorticity(self, state, q):
        """Integral of q h; equals the integral of f by construction."""
        hq = state.h.at_quadrature(self.tab_v)
        qq = q.at_quadrature(self.tab_e)
        return float(np.sum(self.wdet * qq * hq))

    def total_mass(self, state):
        return float(np.sum(self.wdet
                            * state.h.at_quadrature(self.tab_v)))

    def coriolis_integral(self, params):
        return float(np.sum(self.wdet
                            * self.coriolis_at_quadrature(params)))

    def geostrophic_imbalance(self, state, params, x0=None):
        """L2 norm of the weak residual r in S of f u_perp + g grad h."""
        hq = state.h.at_quadrature(self.tab_v)
        uq = state.u.at_quadrature(self.tab_s)
        fq = self.coriolis_at_quadrature(params)
        local = np.einsum("cnqd,cqd,cq->cn", self.tab_s.val, perp(uq),
                          self.wdet * fq)
        local -= np.einsum("cnq,cq->cn", self.tab_s.div,
                           self.wdet * params.gravity * hq)
        rhs = self.triple.S.scatter(local)
        r, _ = linalg.cg_solve(self.mass_s, rhs, tol=self.cg_tol, x0=x0)
        return float(np.sqrt(r @ (self.mass_s.matrix @ r)))

    # -- almost-Poisson bracket ----------------------------------------------

    def bracket(self, dfdu, dfdh, dgdu, dgdh, q):
        """Bilinear bracket of two functional variations.

        {F, G} = <dF/du, -q dG/du_perp> + <div dF/du, dG/dh>
                 - <dF/dh, div dG/du>; antisymmetric by inspection, with
        the enstrophy functional as a Casimir.
        """
        qq = q.at_quadrature(self.tab_e)
        fu = dfdu.at_quadrature(self.tab_s)
        gu = dgdu.at_quadrature(self.tab_s)
        fh = dfdh.at_quadrature(self.tab_v)
        gh = dgdh.at_quadrature(self.tab_v)
        div_fu = dfdu.divergence_at_quadrature(self.tab_s)
        div_gu = dgdu.divergence_at_quadrature(self.tab_s)
        t1 = -np.sum(self.wdet * qq
                     * np.einsum("cqd,cqd->cq", fu, perp(gu)))
        t2 = np.sum(self.wdet * div_fu * gh)
        t3 = -np.sum(self.wdet * fh * div_gu)
        return float(t1 + t2 + t3)

    def enstrophy_variations(self, state, q):
        """Variational derivatives of the enstrophy <q, q h>.

        du-derivative: -2 rot_grad q (exactly representable in S);
        dh-derivative: minus the depth-space projection of q^2.  The
        minus sign follows from differentiating the diagnostic vorticity
        relation: testing it with 2q gives
        2<q, h dq> = <-2 rot_grad q, du> - 2<q^2, dh>, so
        dC = <-2 rot_grad q, du> - <q^2, dh>.  With these, the bracket
        of the enstrophy against anything reproduces the enstrophy-rate
        identity and vanishes identically.
        """
        dcdu = Field(self.triple.S, -2.0 * (self.perp_grad.matrix
                                            @ q.coeffs))
        qq = q.at_quadrature(self.tab_e)
        local = np.einsum("cnq,cq->cn", self.tab_v.val,
                          self.wdet * qq * qq)
        rhs = -self.triple.V.scatter(local)
        dcdh = Field(self.triple.V,
                     linalg.block_diag_solve(self.mass_v, rhs))
        return dcdu, dcdh

    # -- semi-discrete conservation rates -------------------------------------

    def energy_rate(self, state, params, result):
        """dE/dt assembled from the tendencies: <F, du/dt> +
        <dh/dt, g h + |u|^2/2>.  Zero for the exact semi-discrete flow."""
        hq = state.h.at_quadrature(self.tab_v)
        uq = state.u.at_quadrature(self.tab_s)
        bern = (params.gravity * hq
                + 0.5 * np.einsum("cqd,cqd->cq", uq, uq))
        dh_q = Field(self.triple.V, result.dh).at_quadrature(self.tab_v)
        t1 = float(result.F.coeffs @ (self.mass_s.matrix @ result.du))
        t2 = float(np.sum(self.wdet * dh_q * bern))
        return t1 + t2

    def enstrophy_rate(self, state, result):
        """dZ/dt assembled from the tendencies:
        2 <q, d(qh)/dt> - <q^2, dh/dt>, with <q, d(qh)/dt> evaluated by
        testing the momentum equation with -rot_grad q.  Zero without
        stabilisation; nonpositive with it."""
        q = result.q
        qq = q.at_quadrature(self.tab_e)
        dh_q = Field(self.triple.V, result.dh).at_quadrature(self.tab_v)
        crot = self.perp_grad.matrix @ q.coeffs
        t1 = -2.0 * float(crot @ (self.mass_s.matrix @ result.du))
        t2 = -float(np.sum(self.wdet * qq * qq * dh_q))
        return t1 + t2

    def pv_equation_residual(self, state, result):
        """Weak residual of h dq/dt tested against every vorticity basis
        function, for a state whose diagnosed q is spatially constant.
        Constant vorticity must stay constant, so this vanishes."""
        qq = result.q.at_quadrature(self.tab_e)
        dh_q = Field(self.triple.V, result.dh).at_quadrature(self.tab_v)
        vec = -(self.perp_grad.matrix.T
                @ (self.mass_s.matrix @ result.du))
        local = np.einsum("cnq,cq->cn", self.tab_e.val,
                          self.wdet * qq * dh_q)
        return vec - self.triple.E.scatter(local)
