"""Layer supercurrents and flat-layer single layer potentials.

Each layer Omega x {ks} carries the in-plane supercurrent densities h_k^i
built from the order parameter and the layer links.  Convolving a layer
density with the -1/(4 pi |x|) kernel gives the single layer potential S_k,
harmonic off the layer plane, whose on-layer trace t_k is evaluated with an
analytic self-cell integral.  On top of these sit the diagnostics: cone
maximal functions, the per-layer residual of the deviation-potential
representation, and the gap-averaged trace deviation of the planar curl.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import DomainDiscretization
from .fields import (
    LayeredConfiguration,
    curl2d,
    layer_links,
    plane_links,
    vertical_link_phase,
)

__all__ = [
    "ConeSpec",
    "LayerDensity",
    "supercurrent_density",
    "single_layer_potential",
    "layer_trace_grid",
    "nontangential_maximal",
    "representation_residual",
    "trace_deviation",
]

KERNEL_CONST = -1.0 / (4.0 * math.pi)


@dataclass(frozen=True)
class ConeSpec:
    """Double cone around e3 with vertex on a layer: aperture theta, height R."""

    theta: float = math.pi / 4.0
    R: float = 1.0
    orientation: str = "both"  # up, down, or both

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < math.pi / 2.0:
            raise ValueError("cone aperture must satisfy 0 < theta < pi/2")
        if self.R <= 0.0:
            raise ValueError("cone height R must be positive")
        if self.orientation not in ("up", "down", "both"):
            raise ValueError("orientation must be 'up', 'down' or 'both'")

    @property
    def signs(self) -> tuple[float, ...]:
        return {"up": (1.0,), "down": (-1.0,), "both": (1.0, -1.0)}[self.orientation]


@dataclass
class LayerDensity:
    """Per-layer supercurrent samples on the Omega nodes.

    h1[k], h2[k] are the in-plane densities s(d_i u_k - i A_k^i u_k, -i u_k);
    j3[n] is the vertical Josephson current density in gap n.
    """

    h1: np.ndarray  # (N+1, n_x, n_y)
    h2: np.ndarray  # (N+1, n_x, n_y)
    j3: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, 0)))

    def layer_norm(self, k: int, hx: float, hy: float) -> float:
        """L2(Omega) norm of (h_k^1, h_k^2) by the trapezoid rule."""
        wx = np.full(self.h1.shape[1], hx)
        wx[0] = wx[-1] = hx / 2.0
        wy = np.full(self.h1.shape[2], hy)
        wy[0] = wy[-1] = hy / 2.0
        w = wx[:, None] * wy[None, :]
        return math.sqrt(float(np.sum(w * (self.h1[k] ** 2 + self.h2[k] ** 2))))


def _link_current(u_tail: np.ndarray, u_head: np.ndarray, a: np.ndarray, h: float) -> np.ndarray:
    # Im(conj(u_tail) e^{-i h a} u_head)/h is invariant under discrete gauge
    # transforms; the continuum limit is rho^2 (grad phi - A).
    q = np.conj(u_tail) * np.exp(-1j * h * a) * u_head
    return q.imag / h


def _links_to_nodes(j: np.ndarray, axis: int) -> np.ndarray:
    """Average link values to nodes along `axis`; one-sided at the ends."""
    n = j.shape[axis] + 1
    out_shape = list(j.shape)
    out_shape[axis] = n
    out = np.zeros(out_shape)
    lo = [slice(None)] * j.ndim
    hi = [slice(None)] * j.ndim
    lo[axis] = slice(0, n - 1)
    hi[axis] = slice(1, n)
    out[tuple(lo)] += j
    out[tuple(hi)] += j
    mid = [slice(None)] * j.ndim
    mid[axis] = slice(1, n - 1)
    out[tuple(mid)] /= 2.0
    return out


def supercurrent_density(
    domain: DomainDiscretization, state: LayeredConfiguration
) -> LayerDensity:
    """h_k^i = s(d_i u_k - i A_k^i u_k, -i u_k) on nodes, plus the gap j3."""
    p = domain.params
    n_lay = p.n_layers + 1
    h1 = np.zeros((n_lay, domain.n_x, domain.n_y))
    h2 = np.zeros_like(h1)
    for n in range(n_lay):
        a1, a2 = layer_links(state.pot, domain, n)
        u = state.u[n]
        jx = _link_current(u[:-1, :], u[1:, :], a1, domain.hx)
        jy = _link_current(u[:, :-1], u[:, 1:], a2, domain.hy)
        h1[n] = -p.s * _links_to_nodes(jx, 0)
        h2[n] = -p.s * _links_to_nodes(jy, 1)
    j3 = np.zeros((p.n_layers, domain.n_x, domain.n_y))
    for n in range(p.n_layers):
        phi = vertical_link_phase(state.pot, domain, n)
        j3[n] = np.imag(state.u[n + 1] * np.conj(state.u[n] * np.exp(1j * phi)))
        j3[n] /= p.lam**2 * p.s
    return LayerDensity(h1=h1, h2=h2, j3=j3)


def _rect_inv_r(u1, u2, v1, v2):
    """Integral of 1/|y| over [u1,u2] x [v1,v2] (corner differences)."""

    def term(a, b):
        # b + r > 0 whenever a != 0; the a == 0 term vanishes
        r = np.hypot(a, b)
        good = a != 0.0
        return np.where(good, a * np.log(np.where(good, b + r, 1.0)), 0.0)

    def F(u, v):
        return term(u, v) + term(v, u)

    return F(u2, v2) - F(u1, v2) - F(u2, v1) + F(u1, v1)


def _cell_charges(density: np.ndarray) -> np.ndarray:
    q = density[:-1, :-1] + density[1:, :-1] + density[:-1, 1:] + density[1:, 1:]
    return 0.25 * q


def _chunks(n: int, size: int):
    size = max(16, size)
    for lo in range(0, n, size):
        yield lo, min(n, lo + size)


def single_layer_potential(
    domain: DomainDiscretization,
    density: np.ndarray,
    k: int,
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray | None = None,
    on_layer: bool = False,
) -> np.ndarray:
    """S_k(density) at the points (x, y, z); kernel c/|x - Q|, c = -1/(4 pi).

    Cell midpoint quadrature over the Omega cells; with on_layer the self
    cell (the one containing the evaluation point) uses the analytic
    rectangle integral of 1/|x_hat - y_hat| and z is pinned to k*s.
    """
    p = domain.params
    if density.shape != (domain.n_x, domain.n_y):
        raise ValueError("density shape does not match the layer grid")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    zk = k * p.s
    if on_layer:
        if z is not None and np.any(np.asarray(z, dtype=float) != zk):
            raise ValueError("on_layer evaluation requires x3 == k*s")
        dz2 = 0.0
    else:
        if z is None:
            raise ValueError("off-layer evaluation needs x3 coordinates")
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(z == zk):
            raise ValueError("evaluation point lies on the layer plane; pass on_layer")

    hx, hy = domain.hx, domain.hy
    area = hx * hy
    q = _cell_charges(density)
    midx = 0.5 * (domain.x_omega[:-1] + domain.x_omega[1:])
    midy = 0.5 * (domain.y_omega[:-1] + domain.y_omega[1:])
    mx, my = np.meshgrid(midx, midy, indexing="ij")
    src_x = mx.ravel()
    src_y = my.ravel()
    src_q = q.ravel() * area

    out = np.zeros(x.size)
    for lo, hi in _chunks(x.size, int(3.0e6 / max(1, src_x.size))):
        dx = x[lo:hi, None] - src_x[None, :]
        dy = y[lo:hi, None] - src_y[None, :]
        if not on_layer:
            dz2 = (z[lo:hi, None] - zk) ** 2
        r2 = dx**2 + dy**2 + dz2
        if on_layer:
            inv = np.where(r2 > 0.0, 1.0, 0.0)
            np.divide(inv, np.sqrt(r2), out=inv, where=r2 > 0.0)
        else:
            inv = 1.0 / np.sqrt(r2)
        vals = inv @ src_q
        if on_layer:
            # swap the containing cell to the analytic rectangle integral
            ix = np.clip(np.floor(x[lo:hi] / hx).astype(int), 0, q.shape[0] - 1)
            iy = np.clip(np.floor(y[lo:hi] / hy).astype(int), 0, q.shape[1] - 1)
            inside = (
                (x[lo:hi] >= 0.0)
                & (x[lo:hi] <= p.omega[0])
                & (y[lo:hi] >= 0.0)
                & (y[lo:hi] <= p.omega[1])
            )
            rows = np.nonzero(inside)[0]
            if rows.size:
                cells = ix[rows] * q.shape[1] + iy[rows]
                u1 = ix[rows] * hx - x[lo:hi][rows]
                v1 = iy[rows] * hy - y[lo:hi][rows]
                exact = _rect_inv_r(u1, u1 + hx, v1, v1 + hy)
                vals[rows] += q.ravel()[cells] * (exact - area * inv[rows, cells])
        out[lo:hi] = vals
    return KERNEL_CONST * out


def layer_trace_grid(
    domain: DomainDiscretization, density: np.ndarray, k: int
) -> np.ndarray:
    """Trace t_k on the Omega cell-midpoint grid, (n_x-1, n_y-1)."""
    midx = 0.5 * (domain.x_omega[:-1] + domain.x_omega[1:])
    midy = 0.5 * (domain.y_omega[:-1] + domain.y_omega[1:])
    gx, gy = np.meshgrid(midx, midy, indexing="ij")
    t = single_layer_potential(domain, density, k, gx.ravel(), gy.ravel(), on_layer=True)
    return t.reshape(midx.size, midy.size)


def _cone_offsets(cone: ConeSpec, n_r: int, n_ang: int) -> np.ndarray:
    radii = cone.R * (np.arange(n_r) + 1.0) / n_r
    ang = 2.0 * math.pi * np.arange(n_ang) / n_ang
    st, ct = math.sin(cone.theta), math.cos(cone.theta)
    offs = []
    for sg in cone.signs:
        for r in radii:
            offs.append((0.0, 0.0, sg * r))  # cone axis
            for a in ang:  # lateral surface
                offs.append((r * st * math.cos(a), r * st * math.sin(a), sg * r * ct))
    return np.asarray(offs)


def nontangential_maximal(
    domain: DomainDiscretization,
    sampler,
    n: int,
    cone: ConeSpec | None = None,
    sample_density: tuple[int, int] = (16, 8),
) -> np.ndarray:
    """sup |sampler| over the cone at each Omega node of layer n.

    The cone is sampled on a regular (radius, azimuth) grid of its axis and
    lateral surface; doubling either count refines a nested sample set, so
    the result is monotone in sample_density.
    """
    cone = cone or ConeSpec()
    offs = _cone_offsets(cone, *sample_density)
    zs = n * domain.params.s
    gx, gy = np.meshgrid(domain.x_omega, domain.y_omega, indexing="ij")
    px = gx.ravel()[:, None] + offs[None, :, 0]
    py = gy.ravel()[:, None] + offs[None, :, 1]
    pz = zs + offs[None, :, 2] + 0.0 * px
    if (
        px.min() < domain.x_box[0]
        or px.max() > domain.x_box[-1]
        or py.min() < domain.y_box[0]
        or py.max() > domain.y_box[-1]
        or pz.min() < domain.z_box[0]
        or pz.max() > domain.z_box[-1]
    ):
        raise ValueError("cone escapes the computational box; shrink R or grow pad")
    vals = np.abs(sampler(px.ravel(), py.ravel(), pz.ravel()))
    return vals.reshape(domain.n_x, domain.n_y, offs.shape[0]).max(axis=2)


def _deviation_at_midpoints(
    domain: DomainDiscretization, pot, n: int
) -> tuple[np.ndarray, np.ndarray]:
    k = domain.layer_planes[n]
    sx, sy = domain.omega_slices()
    d1 = pot.dev_a1[sx.start : sx.stop - 1, sy, k]
    d2 = pot.dev_a2[sx, sy.start : sy.stop - 1, k]
    return 0.5 * (d1[:, :-1] + d1[:, 1:]), 0.5 * (d2[:-1, :] + d2[1:, :])


def representation_residual(
    domain: DomainDiscretization, state: LayeredConfiguration
) -> np.ndarray:
    """Per-layer L2(Omega) defect of A_n - h_ex a_n against sum_k S_k(h_k^i).

    A diagnostic, not an identity: the finite box and quadrature break the
    free-space representation, so values are reported, never asserted.
    """
    p = domain.params
    dens = supercurrent_density(domain, state)
    midx = 0.5 * (domain.x_omega[:-1] + domain.x_omega[1:])
    midy = 0.5 * (domain.y_omega[:-1] + domain.y_omega[1:])
    gx, gy = np.meshgrid(midx, midy, indexing="ij")
    fx, fy = gx.ravel(), gy.ravel()
    area = domain.hx * domain.hy
    out = np.zeros(p.n_layers + 1)
    for n in range(p.n_layers + 1):
        zn = np.full(fx.size, n * p.s)
        dev1, dev2 = _deviation_at_midpoints(domain, state.pot, n)
        for i, dev in ((1, dev1), (2, dev2)):
            h = dens.h1 if i == 1 else dens.h2
            total = np.zeros(fx.size)
            for k in range(p.n_layers + 1):
                if k == n:
                    total += single_layer_potential(domain, h[k], k, fx, fy, on_layer=True)
                else:
                    total += single_layer_potential(domain, h[k], k, fx, fy, zn)
            out[n] += float(np.sum((dev.ravel() - total) ** 2)) * area
    return np.sqrt(out)


def trace_deviation(domain: DomainDiscretization, state: LayeredConfiguration) -> float:
    """Gap-integrated squared drift of the planar curl away from its layer trace.

    (1/2) sum_n int_{ns}^{(n+1)s} int_Omega |curl A(., x3) - curl A_n|^2,
    vertical integral by the trapezoid rule over the stored planes.  Exactly
    zero when the in-plane links do not depend on x3 through the gaps.
    """
    p = domain.params
    hx, hy, hz = domain.hx, domain.hy, domain.hz
    total = 0.0
    for n in range(p.n_layers):
        k0 = int(domain.layer_planes[n])
        k1 = int(domain.layer_planes[n + 1])
        a1, a2 = plane_links(state.pot, domain, k0, restrict=True)
        c_ref = curl2d(a1, a2, hx, hy)
        for k in range(k0, k1 + 1):
            wz = hz / 2.0 if k in (k0, k1) else hz
            a1, a2 = plane_links(state.pot, domain, k, restrict=True)
            diff = curl2d(a1, a2, hx, hy) - c_ref
            total += wz * float(np.sum(diff**2)) * hx * hy
    return 0.5 * total
