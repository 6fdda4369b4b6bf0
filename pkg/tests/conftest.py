"""Shared fixtures: small domains sized so every alignment rule holds exactly."""
import numpy as np
import pytest
from hypothesis import settings

from ldsim.domain import MeshSpec, ModelParams, build_domain

settings.register_profile("suite", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def small_params():
    # hx=1/8, hy=1/6, hz=1/8; s=0.25 = 2*hz, pad = 2*hz; asymmetric in-plane
    # grid on purpose so x/y transpositions cannot cancel.
    return ModelParams(
        epsilon=0.25,
        n_layers=2,
        height=0.5,
        h_ex=1.5,
        mesh=MeshSpec(9, 7, 9),
        pad=0.25,
    )


@pytest.fixture(scope="session")
def small_domain(small_params):
    return build_domain(small_params)


@pytest.fixture(scope="session")
def spec_domain():
    # the closed-form normal-state values 31.25 / 25.0 live on this geometry
    params = ModelParams(
        epsilon=0.1,
        n_layers=4,
        height=1.0,
        h_ex=2.0,
        mesh=MeshSpec(9, 9, 13),
        pad=0.25,
    )
    return build_domain(params)


def random_gauge(domain, seed, amp=0.7):
    """Arbitrary node gauge; invariance must hold exactly, smoothness optional."""
    rng = np.random.default_rng(seed)
    return amp * rng.standard_normal((domain.nbx, domain.nby, domain.nbz))


def boundary_loop(n_x, n_y):
    """Counterclockwise node indices around the Omega rectangle from (0, 0)."""
    idx = []
    idx += [(i, 0) for i in range(n_x - 1)]
    idx += [(n_x - 1, j) for j in range(n_y - 1)]
    idx += [(i, n_y - 1) for i in range(n_x - 1, 0, -1)]
    idx += [(0, j) for j in range(n_y - 1, 0, -1)]
    return idx


def k_vortex_state(domain, k, exact_boundary=False, core=0.15):
    """Degree-k vortex at the Omega center with zero applied field.

    The smooth profile rho(r) e^{i k theta} carries winding k with an
    O(h^2 k^3) circulation defect from the link currents' sine.  With
    exact_boundary the boundary ring is rewritten to uniform phase steps
    delta = 2 pi k / n_links and modulus sqrt(delta / sin delta), which makes
    every boundary link current exactly delta / h, so the total circulation
    telescopes to 2 pi k at float precision.
    """
    from ldsim.fields import LayeredConfiguration, Potential3D

    X, Y = np.meshgrid(domain.x_omega, domain.y_omega, indexing="ij")
    cx = 0.5 * domain.params.omega[0] + 0.3 * domain.hx  # off-node core
    cy = 0.5 * domain.params.omega[1] + 0.3 * domain.hy
    theta = np.arctan2(Y - cy, X - cx)
    rho = np.clip(np.hypot(X - cx, Y - cy) / core, 0.0, 1.0)
    u0 = rho * np.exp(1j * k * theta)
    if exact_boundary and k != 0:
        loop = boundary_loop(domain.n_x, domain.n_y)
        delta = 2.0 * np.pi * k / len(loop)
        amp = np.sqrt(delta / np.sin(delta))
        for pos, (i, j) in enumerate(loop):
            u0[i, j] = amp * np.exp(1j * delta * pos)
    u = np.repeat(u0[None, :, :], domain.params.n_layers + 1, axis=0)
    return LayeredConfiguration(u.astype(complex), Potential3D.background(domain, h_ex=0.0))
