import numpy as np
import pytest

from swfem.mesh import structured_mesh
from swfem.spaces import make_triple
from swfem.swe import Params, Scheme
from swfem.timeint import TimeLoopError, rk4_step, run

from conftest import random_smooth_state


def _rest_state(scheme, depth=2.0):
    return scheme.initial_state(
        lambda p: np.zeros(p.shape),
        lambda p: depth * np.ones(p.shape[:-1]))


@pytest.fixture(scope="module")
def scheme():
    return Scheme(make_triple("bdm1", structured_mesh(8)))


def test_rest_state_unchanged(scheme):
    params = Params(coriolis=5.0, gravity=9.81)
    st = _rest_state(scheme)
    new, _, _ = rk4_step(scheme, st, params, 0.01)
    assert np.abs(new.u.coeffs - st.u.coeffs).max() <= 1e-14
    assert np.abs(new.h.coeffs - st.h.coeffs).max() <= 1e-14
    assert new.t == pytest.approx(0.01)


def test_rejects_nonpositive_dt(scheme):
    st = _rest_state(scheme)
    with pytest.raises(ValueError, match="positive"):
        rk4_step(scheme, st, Params(gravity=1.0), 0.0)


def test_richardson_fifth_order(scheme):
    """One step against two half steps: the difference shrinks like
    dt^5 (local truncation order of the classical scheme)."""
    params = Params(coriolis=5.0, gravity=5.0)
    rng = np.random.default_rng(13)
    st = random_smooth_state(scheme, rng, u_amplitude=0.3)
    diffs, dts = [], []
    for dt in (2e-2, 1e-2, 5e-3):
        one, _, _ = rk4_step(scheme, st, params, dt)
        half, _, _ = rk4_step(scheme, st, params, dt / 2)
        two, _, _ = rk4_step(scheme, half, params, dt / 2)
        err = np.sqrt(
            np.linalg.norm(one.u.coeffs - two.u.coeffs) ** 2
            + np.linalg.norm(one.h.coeffs - two.h.coeffs) ** 2)
        diffs.append(err)
        dts.append(dt)
    slope = np.polyfit(np.log(dts), np.log(diffs), 1)[0]
    assert slope == pytest.approx(5.0, abs=0.3)


def test_small_amplitude_energy_drift_order(scheme):
    """Near-linear dynamics: the energy change of a single step decays
    at least like dt^5 (the quasi-linear wave part contributes at dt^6,
    so the measured slope sits between five and six)."""
    params = Params(coriolis=5.0, gravity=5.0)

    def u_fn(p):
        return 5e-2 * np.stack([np.sin(2 * np.pi * p[..., 1]),
                                np.zeros(p.shape[:-1])], -1)

    def h_fn(p):
        return 1.0 + 5e-2 * np.cos(2 * np.pi * p[..., 0])

    st = scheme.initial_state(u_fn, h_fn)
    e0 = scheme.energy(st, params)
    drifts, dts = [], []
    for dt in (8e-3, 4e-3, 2e-3):
        new, _, _ = rk4_step(scheme, st, params, dt)
        drifts.append(abs(scheme.energy(new, params) - e0))
        dts.append(dt)
    slope = np.polyfit(np.log(dts), np.log(drifts), 1)[0]
    assert 4.7 <= slope <= 6.5


def test_run_sample_count(scheme):
    params = Params(coriolis=5.0, gravity=5.0)
    st = _rest_state(scheme)
    dt = 1e-3
    _, record = run(scheme, st, params, dt, st.t + 3 * dt, sample_every=1)
    assert len(record) == 4
    assert record.steps.tolist() == [0, 1, 2, 3]
    assert np.all(np.diff(record.times) > 0)


def test_run_final_partial_step(scheme):
    params = Params(coriolis=5.0, gravity=5.0)
    st = _rest_state(scheme)
    _, record = run(scheme, st, params, 1e-3, 2.5e-3, sample_every=1)
    assert record.times[-1] == pytest.approx(2.5e-3)


def test_run_requires_forward_window(scheme):
    st = _rest_state(scheme)
    with pytest.raises(ValueError, match="t_end"):
        run(scheme, st, Params(gravity=1.0), 1e-3, 0.0)


def test_mass_constant_over_run(scheme):
    params = Params(coriolis=5.0, gravity=5.0)
    rng = np.random.default_rng(14)
    st = random_smooth_state(scheme, rng, u_amplitude=0.2)
    _, record = run(scheme, st, params, 1e-3, 0.05, sample_every=10)
    drift = np.abs(record.mass - record.mass[0]).max()
    assert drift <= 1e-12 * abs(record.mass[0])


def test_determinism(scheme):
    params = Params(coriolis=5.0, gravity=5.0)
    rng = np.random.default_rng(15)
    st = random_smooth_state(scheme, rng, u_amplitude=0.2)
    _, rec1 = run(scheme, st, params, 1e-3, 0.02, sample_every=5)
    _, rec2 = run(scheme, st, params, 1e-3, 0.02, sample_every=5)
    for name in ("times", "energy", "enstrophy", "vorticity", "mass",
                 "imbalance"):
        assert np.array_equal(getattr(rec1, name), getattr(rec2, name))


def test_blowup_guard():
    """A time step far beyond the gravity-wave stability limit on n=16
    must be reported as an error carrying the failing step."""
    scheme = Scheme(make_triple("bdm1", structured_mesh(16)))
    params = Params(coriolis=5.0, gravity=5.0)

    def u_fn(p):
        return np.stack([np.sin(2 * np.pi * p[..., 1]),
                         np.sin(2 * np.pi * p[..., 0])], -1)

    def h_fn(p):
        return 1.0 + 0.2 * np.cos(2 * np.pi * p[..., 0])

    st = scheme.initial_state(u_fn, h_fn)
    with pytest.raises(TimeLoopError) as err:
        run(scheme, st, params, 0.5, 40.0, sample_every=10)
    assert err.value.step is not None
    assert err.value.record is not None
