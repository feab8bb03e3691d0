"""Classical RK4 time stepping and the simulation loop.

The coefficient ODE system is integrated with the classical four-stage
Runge-Kutta scheme; every stage re-diagnoses the potential vorticity and
volume flux from the current stage state, so the semi-discrete
conservation structure is evaluated fresh each time.  The loop samples
integral diagnostics at a fixed cadence and aborts loudly when the energy
grows by three orders of magnitude, which is how instability of the
unstabilised vorticity advection manifests.
"""

from dataclasses import dataclass, field

import numpy as np

from .spaces import Field
from .swe import State

BLOWUP_FACTOR = 1e3


class TimeLoopError(Exception):
    """A step failed; carries the failing step index and partial record."""

    def __init__(self, message, step=None, record=None):
        super().__init__(message)
        self.step = step
        self.record = record


@dataclass
class RunRecord:
    """Sampled diagnostics of one run (one row per sampled step)."""

    steps: np.ndarray = None
    times: np.ndarray = None
    energy: np.ndarray = None
    enstrophy: np.ndarray = None
    vorticity: np.ndarray = None
    mass: np.ndarray = None
    imbalance: np.ndarray = None
    cg_iters_max: np.ndarray = None

    COLUMNS = ("step", "time", "energy", "enstrophy", "vorticity", "mass",
               "imbalance", "cg_iters_max")

    def rows(self):
        for k in range(len(self.steps)):
            yield (int(self.steps[k]), self.times[k], self.energy[k],
                   self.enstrophy[k], self.vorticity[k], self.mass[k],
                   self.imbalance[k], int(self.cg_iters_max[k]))

    def __len__(self):
        return len(self.steps)


@dataclass
class _Collector:
    steps: list = field(default_factory=list)
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    enstrophy: list = field(default_factory=list)
    vorticity: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    imbalance: list = field(default_factory=list)
    iters: list = field(default_factory=list)

    def finish(self):
        return RunRecord(
            steps=np.array(self.steps, dtype=np.int64),
            times=np.array(self.times),
            energy=np.array(self.energy),
            enstrophy=np.array(self.enstrophy),
            vorticity=np.array(self.vorticity),
            mass=np.array(self.mass),
            imbalance=np.array(self.imbalance),
            cg_iters_max=np.array(self.iters, dtype=np.int64),
        )


def _advance(scheme, state, result, weight):
    S, V = scheme.triple.S, scheme.triple.V
    return State(Field(S, state.u.coeffs + weight * result.du),
                 Field(V, state.h.coeffs + weight * result.dh),
                 state.t + weight)


def rk4_step(scheme, state, params, dt, hint=None):
    """One classical RK4 step of length dt.

    Returns (new_state, stage_iters_max, last_stage) where the last stage
    result can seed the solvers of the next step.  Diagnostics are
    recomputed inside every stage.
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    k1 = scheme.tendency(state, params, dt=dt, hint=hint)
    k2 = scheme.tendency(_advance(scheme, state, k1, dt / 2), params,
                         dt=dt, hint=k1)
    k3 = scheme.tendency(_advance(scheme, state, k2, dt / 2), params,
                         dt=dt, hint=k2)
    k4 = scheme.tendency(_advance(scheme, state, k3, dt), params,
                         dt=dt, hint=k3)
    du = (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du) * (dt / 6.0)
    dh = (k1.dh + 2.0 * k2.dh + 2.0 * k3.dh + k4.dh) * (dt / 6.0)
    new = scheme.state(Field(scheme.triple.S, state.u.coeffs + du),
                       Field(scheme.triple.V, state.h.coeffs + dh),
                       state.t + dt)
    iters = max(k.max_iterations() for k in (k1, k2, k3, k4))
    return new, iters, k4


def run(scheme, initial, params, dt, t_end, sample_every=1):
    """Integrate from `initial` to t_end, sampling every `sample_every`
    steps (plus the initial and final states).

    Returns (final_state, RunRecord).  Raises TimeLoopError on a failed
    step or when the energy exceeds 1e3 times its initial value.
    """
    if t_end <= initial.t:
        raise ValueError(f"t_end={t_end} must exceed the initial time "
                         f"{initial.t}")
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    span = t_end - initial.t
    nsteps = max(1, int(np.ceil(span / dt - 1e-9)))

    collector = _Collector()
    state = initial
    hint = None
    iters_since_sample = 0

    def sample(step, state, iters):
        res = scheme.tendency(state, params, dt=dt, hint=hint)
        collector.steps.append(step)
        collector.times.append(state.t)
        collector.energy.append(scheme.energy(state, params))
        collector.enstrophy.append(scheme.enstrophy(state, res.q))
        collector.vorticity.append(scheme.total_vorticity(state, res.q))
        collector.mass.append(scheme.total_mass(state))
        collector.imbalance.append(
            scheme.geostrophic_imbalance(state, params))
        collector.iters.append(max(iters, res.max_iterations()))

    sample(0, state, 0)
    e0 = abs(collector.energy[0])
    for step in range(1, nsteps + 1):
        step_dt = min(dt, t_end - state.t)
        try:
            state, iters, hint = rk4_step(scheme, state, params, step_dt,
                                          hint=hint)
        except Exception as exc:
            raise TimeLoopError(f"step {step} failed: {exc}", step=step,
                                record=collector.finish()) from exc
        iters_since_sample = max(iters_since_sample, iters)
        energy = scheme.energy(state, params)
        if abs(energy) > BLOWUP_FACTOR * max(e0, 1e-300):
            raise TimeLoopError(
                f"energy blow-up at step {step} (t={state.t:.6g}): "
                f"|E|={energy:.3e} exceeds {BLOWUP_FACTOR:g} x initial; "
                "the time step is beyond the stability limit",
                step=step, record=collector.finish())
        if step % sample_every == 0 or step == nsteps:
            sample(step, state, iters_since_sample)
            iters_since_sample = 0
    return state, collector.finish()
