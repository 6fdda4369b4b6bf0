"""Field containers and the discrete gauge calculus.

Order parameters live on nodes; vector potentials live on grid links
(per-unit-length values at link midpoints); curls live on plaquettes.  With
link-based potentials every gauge-dependent quantity below is invariant under
`apply_gauge` exactly, not just to discretization order: the link phase
exp(-i h A_link) absorbs the node phases telescopically.

The potential is stored as a deviation from the closed-form background
h_ex * a with a(x) = (0, x1, 0), whose curl is h_ex e3.  The background is
handled analytically, so a pure-background state has deviation zero and its
curl is exact; this also keeps the magnetic energy free of large
cancellations at large x1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DomainDiscretization


@dataclass
class Potential3D:
    """Link values of A - h_ex*a on the padded box, plus the background strength.

    dev_a1: (nbx-1, nby, nbz)   x-links
    dev_a2: (nbx, nby-1, nbz)   y-links
    dev_a3: (nbx, nby, nbz-1)   z-links
    """

    dev_a1: np.ndarray
    dev_a2: np.ndarray
    dev_a3: np.ndarray
    background_h: float

    @classmethod
    def background(cls, domain: DomainDiscretization, h_ex: float | None = None) -> "Potential3D":
        h = domain.params.h_ex if h_ex is None else h_ex
        nbx, nby, nbz = domain.nbx, domain.nby, domain.nbz
        return cls(
            dev_a1=np.zeros((nbx - 1, nby, nbz)),
            dev_a2=np.zeros((nbx, nby - 1, nbz)),
            dev_a3=np.zeros((nbx, nby, nbz - 1)),
            background_h=h,
        )

    def copy(self) -> "Potential3D":
        return Potential3D(
            self.dev_a1.copy(), self.dev_a2.copy(), self.dev_a3.copy(), self.background_h
        )

    def total_a2(self, domain: DomainDiscretization) -> np.ndarray:
        """Full y-link values: deviation plus the background h_ex * x1."""
        return self.dev_a2 + self.background_h * domain.x_box[:, None, None]

    def is_background_only(self) -> bool:
        return (
            not np.any(self.dev_a1) and not np.any(self.dev_a2) and not np.any(self.dev_a3)
        )


@dataclass
class LayeredConfiguration:
    """Discrete Lawrence-Doniach state: one order parameter per layer plus A."""

    u: np.ndarray  # complex, (N+1, n_x, n_y)
    pot: Potential3D

    def copy(self) -> "LayeredConfiguration":
        return LayeredConfiguration(self.u.copy(), self.pot.copy())


@dataclass
class ContinuumConfiguration:
    """Discrete anisotropic Ginzburg-Landau state: psi on D plus A."""

    psi: np.ndarray  # complex, (n_x, n_y, n_zd)
    pot: Potential3D

    def copy(self) -> "ContinuumConfiguration":
        return ContinuumConfiguration(self.psi.copy(), self.pot.copy())


@dataclass
class Potential2D:
    """In-plane link potential for the 2-D energies, same conventions as 3-D."""

    dev_a1: np.ndarray  # (nx-1, ny)
    dev_a2: np.ndarray  # (nx, ny-1)
    background_h: float

    @classmethod
    def background(cls, n_x: int, n_y: int, h_ex: float) -> "Potential2D":
        return cls(np.zeros((n_x - 1, n_y)), np.zeros((n_x, n_y - 1)), h_ex)

    def total_a2(self, x_nodes: np.ndarray) -> np.ndarray:
        return self.dev_a2 + self.background_h * x_nodes[:, None]

    def copy(self) -> "Potential2D":
        return Potential2D(self.dev_a1.copy(), self.dev_a2.copy(), self.background_h)


@dataclass
class GaugeFunction:
    """Scalar gauge g on the padded box nodes; layers pick up exp(i g) traces."""

    g: np.ndarray  # (nbx, nby, nbz)

    def plane(self, k: int) -> np.ndarray:
        return self.g[:, :, k]


def layer_links(pot: Potential3D, domain: DomainDiscretization, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Total in-plane link values on layer n, restricted to the Omega block."""
    k = domain.layer_planes[n]
    return plane_links(pot, domain, k, restrict=True)


def plane_links(
    pot: Potential3D, domain: DomainDiscretization, k: int, restrict: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Total in-plane link values on box plane k; optionally the Omega block only."""
    a1 = pot.dev_a1[:, :, k]
    a2 = pot.dev_a2[:, :, k] + pot.background_h * domain.x_box[:, None]
    if restrict:
        sx, sy = domain.omega_slices()
        a1 = a1[sx.start : sx.stop - 1, sy]
        a2 = a2[sx, sy.start : sy.stop - 1]
    return a1, a2


def covariant_diff_x(u: np.ndarray, a1: np.ndarray, hx: float) -> np.ndarray:
    """(u_head e^{-i hx A} - u_tail)/hx on x-links; |.| is gauge invariant."""
    return (u[1:, :] * np.exp(-1j * hx * a1) - u[:-1, :]) / hx

def covariant_diff_y(u: np.ndarray, a2: np.ndarray, hy: float) -> np.ndarray:
    return (u[:, 1:] * np.exp(-1j * hy * a2) - u[:, :-1]) / hy


def covariant_gradient(
    u: np.ndarray, a1: np.ndarray, a2: np.ndarray, hx: float, hy: float
) -> tuple[np.ndarray, np.ndarray]:
    """Link-based covariant differences of a layer field against link values."""
    return covariant_diff_x(u, a1, hx), covariant_diff_y(u, a2, hy)


def discrete_curl(
    pot: Potential3D, domain: DomainDiscretization
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Plaquette circulations per unit area, background folded in analytically.

    cx: (nbx, nby-1, nbz-1), cy: (nbx-1, nby, nbz-1), cz: (nbx-1, nby-1, nbz).
    The background contributes exactly (0, 0, h_ex): its deviation is zero.
    """
    hx, hy, hz = domain.hx, domain.hy, domain.hz
    a1, a2, a3 = pot.dev_a1, pot.dev_a2, pot.dev_a3
    cz = (a2[1:, :, :] - a2[:-1, :, :]) / hx - (a1[:, 1:, :] - a1[:, :-1, :]) / hy
    cz = cz + pot.background_h
    cx = (a3[:, 1:, :] - a3[:, :-1, :]) / hy - (a2[:, :, 1:] - a2[:, :, :-1]) / hz
    cy = (a1[:, :, 1:] - a1[:, :, :-1]) / hz - (a3[1:, :, :] - a3[:-1, :, :]) / hx
    return cx, cy, cz


def curl2d(a1: np.ndarray, a2: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """In-plane plaquette circulation of link values, (nx-1, ny-1)."""
    return (a2[1:, :] - a2[:-1, :]) / hx - (a1[:, 1:] - a1[:, :-1]) / hy


def vertical_link_phase(pot: Potential3D, domain: DomainDiscretization, n: int) -> np.ndarray:
    """Line integral of A^3 from layer n to n+1 over each Omega node column.

    The sum of z-link values times hz is exact for link data sampled at
    midpoints of a linear A^3, and gauge-covariant by telescoping.
    """
    if not 0 <= n < domain.params.n_layers:
        raise IndexError("gap index out of range")
    sx, sy = domain.omega_slices()
    k0 = domain.layer_planes[n]
    k1 = domain.layer_planes[n + 1]
    return domain.hz * np.sum(pot.dev_a3[sx, sy, k0:k1], axis=2)


def apply_gauge(
    state: LayeredConfiguration, gauge: GaugeFunction, domain: DomainDiscretization
) -> LayeredConfiguration:
    """Return the gauge-transformed state u -> u e^{i g}, A -> A + grad g."""
    g = gauge.g
    hx, hy, hz = domain.hx, domain.hy, domain.hz
    pot = state.pot.copy()
    pot.dev_a1 += (g[1:, :, :] - g[:-1, :, :]) / hx
    pot.dev_a2 += (g[:, 1:, :] - g[:, :-1, :]) / hy
    pot.dev_a3 += (g[:, :, 1:] - g[:, :, :-1]) / hz
    sx, sy = domain.omega_slices()
    u = state.u.copy()
    for n in range(domain.params.n_layers + 1):
        u[n] *= np.exp(1j * g[sx, sy, domain.layer_planes[n]])
    return LayeredConfiguration(u, pot)


def apply_gauge_continuum(
    state: ContinuumConfiguration, gauge: GaugeFunction, domain: DomainDiscretization
) -> ContinuumConfiguration:
    g = gauge.g
    hx, hy, hz = domain.hx, domain.hy, domain.hz
    pot = state.pot.copy()
    pot.dev_a1 += (g[1:, :, :] - g[:-1, :, :]) / hx
    pot.dev_a2 += (g[:, 1:, :] - g[:, :-1, :]) / hy
    pot.dev_a3 += (g[:, :, 1:] - g[:, :, :-1]) / hz
    sx, sy = domain.omega_slices()
    psi = state.psi * np.exp(1j * g[sx, sy, domain.d_plane_range()])
    return ContinuumConfiguration(psi, pot)


def normal_state(domain: DomainDiscretization) -> LayeredConfiguration:
    """u = 0 on every layer, pure background potential."""
    p = domain.params
    u = np.zeros((p.n_layers + 1, domain.n_x, domain.n_y), dtype=complex)
    return LayeredConfiguration(u, Potential3D.background(domain))


def uniform_state(domain: DomainDiscretization, value: complex = 1.0) -> LayeredConfiguration:
    p = domain.params
    u = np.full((p.n_layers + 1, domain.n_x, domain.n_y), value, dtype=complex)
    return LayeredConfiguration(u, Potential3D.background(domain))
