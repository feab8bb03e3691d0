"""Shared fixtures: meshes, schemes and smooth random states."""

from pathlib import Path

import numpy as np
import pytest

from swfem.mesh import read_msh, structured_mesh
from swfem.spaces import make_triple
from swfem.swe import Scheme

DATA = Path(__file__).parent / "data"
FAMILIES = ("rt0", "bdm1", "bdfm1", "bdm2")


@pytest.fixture(scope="session")
def mesh8():
    return structured_mesh(8)


@pytest.fixture(scope="session")
def mesh4():
    return structured_mesh(4)


@pytest.fixture(scope="session")
def mesh3():
    return structured_mesh(3)


@pytest.fixture(scope="session")
def coarse_unstructured():
    return read_msh(DATA / "unstructured_coarse.msh")


@pytest.fixture(scope="session")
def schemes8(mesh8):
    return {fam: Scheme(make_triple(fam, mesh8)) for fam in FAMILIES}


def random_smooth_state(scheme, rng, h_amplitude=0.15, u_amplitude=0.5):
    """Project random low-frequency trigonometric fields into the
    prognostic spaces; depth stays well away from zero."""
    cu = rng.standard_normal((2, 3, 3, 4)) / 6.0
    ch = rng.standard_normal((3, 3, 4)) / 6.0

    def series(c, x, y):
        out = np.zeros_like(x)
        for k in range(c.shape[0]):
            for l in range(c.shape[1]):
                out += (c[k, l, 0] * np.cos(2 * np.pi * (k * x + l * y))
                        + c[k, l, 1] * np.sin(2 * np.pi * (k * x + l * y))
                        + c[k, l, 2] * np.cos(2 * np.pi * (k * x - l * y))
                        + c[k, l, 3] * np.sin(2 * np.pi * (k * x - l * y)))
        return out

    def u_fn(p):
        x, y = p[..., 0], p[..., 1]
        return u_amplitude * np.stack([series(cu[0], x, y),
                                       series(cu[1], x, y)], axis=-1)

    def h_fn(p):
        x, y = p[..., 0], p[..., 1]
        return 1.0 + h_amplitude * series(ch, x, y)

    return scheme.initial_state(u_fn, h_fn)
