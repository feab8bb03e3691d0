"""Energy and enstrophy budgets of the semi-discrete scheme.

The spatial discretisation conserves both quantities exactly (their
assembled time derivatives vanish to solver precision); the RK4 time
discretisation then perturbs them at fourth/fifth order in dt.  The
anticipated-vorticity stabilisation turns the enstrophy budget into a
controlled sink while leaving the energy identity untouched.

Run from the repository root:  python demos/02_conservation_in_action.py
"""

from swfem import Params, Scheme, make_triple, run, structured_mesh
from swfem.experiments import conservation_initial

scheme = Scheme(make_triple("bdm1", structured_mesh(16)), cg_tol=1e-13)
u_fn, h_fn = conservation_initial(5.0, 5.0)
state = scheme.initial_state(u_fn, h_fn)
params = Params(coriolis=5.0, gravity=5.0)

# Instantaneous budgets: both rates vanish for the continuous-time
# discretisation, and the stabilised enstrophy rate is strictly a sink.
result = scheme.tendency(state, params)
energy = scheme.energy(state, params)
enstrophy = scheme.enstrophy(state, result.q)
print(f"energy    = {energy:.12f},  assembled dE/dt = "
      f"{scheme.energy_rate(state, params, result):+.3e}")
print(f"enstrophy = {enstrophy:.12f},  assembled dZ/dt = "
      f"{scheme.enstrophy_rate(state, result):+.3e}")

stab = Params(coriolis=5.0, gravity=5.0, apvm_enabled=True, tau=5e-3)
result_s = scheme.tendency(state, stab)
print(f"stabilised: dE/dt = "
      f"{scheme.energy_rate(state, stab, result_s):+.3e}, "
      f"dZ/dt = {scheme.enstrophy_rate(state, result_s):+.3e} "
      f"(negative by design)")

# Time stepping: halving dt cuts the enstrophy change by ~16x (fourth
# order) while mass and circulation stay at machine precision.
print(f"\n{'dt':>8s} {'|dE|/E':>12s} {'|dZ|/Z':>12s} {'mass drift':>12s}")
for dt in (2e-3, 1e-3, 5e-4):
    _, rec = run(scheme, state, params, dt, 0.25, sample_every=10 ** 9)
    de = abs(rec.energy[-1] - rec.energy[0]) / rec.energy[0]
    dz = abs(rec.enstrophy[-1] - rec.enstrophy[0]) / rec.enstrophy[0]
    dm = abs(rec.mass[-1] - rec.mass[0]) / rec.mass[0]
    print(f"{dt:8.0e} {de:12.3e} {dz:12.3e} {dm:12.3e}")
