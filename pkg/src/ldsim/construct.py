"""Vortex-lattice test configurations and their three-part energy split.

A square lattice of unit vortices at density h_ex/(2 pi) generates the
screened field h solving (-lap + 1) h = 2 pi sum_b delta_b, built by summing
the Yukawa kernel K0 over lattice sites.  The core profile rho ramps
linearly from 0 to 1 on [eps, 2 eps] around the nearest site, and in-plane
kinetic energy is always evaluated in the gauge-invariant form
|grad rho|^2 + rho^2 |grad h|^2, so the multivalued vortex phase never needs
to be materialized (grad phase - A = -perp grad h).

The 3-D potential is B = h_ex a + eta(x3) xi(x_hat) (-d2 phi, d1 phi, 0)
with phi the Newtonian potential of H = (h - h_ex) chi_Omega, xi an in-plane
cutoff between concentric disks and eta a vertical cutoff over ramps of
width d.  The field energy splits by x3 into I1 (the slab where eta = 1)
plus the two ramp contributions I2 and I3, equal by the symmetry of eta.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bessel import bessel_k0, bessel_k1, yukawa_green
from .domain import DomainDiscretization, ModelParams, build_domain
from .fields import LayeredConfiguration, Potential3D, layer_links
from .linalg import cg_solve

__all__ = [
    "LatticeSpec",
    "TestConstructionReport",
    "ReconstructedStack",
    "yukawa_green",
    "make_lattice",
    "truncation_radius",
    "lattice_field_h",
    "vortex_profile_rho",
    "newtonian_potential",
    "xi_cutoff",
    "eta_cutoff",
    "translation_candidates",
    "translation_energy",
    "select_translation",
    "m_eps_value",
    "assemble_test_configuration",
    "reconstruct_phase",
    "winding_number",
]

# ring-sum estimate of the lattice tail is padded by this factor
TAIL_SAFETY = 4.0


@dataclass(frozen=True)
class LatticeSpec:
    """Square vortex lattice (1/theta) Z^2 translated by x0, clipped near Omega.

    points holds the sites whose period cell touches Omega (a half-cell
    margin per side, so the count stays within the perimeter bound); sums
    that need a wider neighborhood regenerate sites on the fly.
    """

    theta: float
    cell: float
    x0: tuple[float, float]
    omega: tuple[float, float]
    points: np.ndarray  # (M, 2)

    @property
    def k_cell_area(self) -> float:
        return self.cell * self.cell  # |K_eps| = 2 pi / h_ex

    def sites_in(self, xlo: float, xhi: float, ylo: float, yhi: float) -> np.ndarray:
        """All lattice sites inside the closed rectangle."""
        c = self.cell
        i0 = math.ceil((xlo - self.x0[0]) / c - 1e-12)
        i1 = math.floor((xhi - self.x0[0]) / c + 1e-12)
        j0 = math.ceil((ylo - self.x0[1]) / c - 1e-12)
        j1 = math.floor((yhi - self.x0[1]) / c + 1e-12)
        if i1 < i0 or j1 < j0:
            return np.zeros((0, 2))
        xs = self.x0[0] + c * np.arange(i0, i1 + 1)
        ys = self.x0[1] + c * np.arange(j0, j1 + 1)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])


def make_lattice(
    h_ex: float, omega: tuple[float, float], x0: tuple[float, float]
) -> LatticeSpec:
    if h_ex <= 0:
        raise ValueError("a vortex lattice needs h_ex > 0")
    theta = math.sqrt(h_ex / (2.0 * math.pi))
    cell = 1.0 / theta
    half = 0.5 * cell
    if not (-half < x0[0] < half and -half < x0[1] < half):
        raise ValueError("translation x0 must lie in K = (-cell/2, cell/2)^2")
    probe = LatticeSpec(
        theta=theta,
        cell=cell,
        x0=(float(x0[0]), float(x0[1])),
        omega=(float(omega[0]), float(omega[1])),
        points=np.zeros((0, 2)),
    )
    points = probe.sites_in(-half, omega[0] + half, -half, omega[1] + half)
    object.__setattr__(probe, "points", points)
    return probe


def truncation_radius(h_ex: float, tol: float) -> float:
    """Radius beyond which the K0 lattice-sum tail stays below tol.

    Sites outside radius r contribute about theta^2 int K0 over the exterior,
    which is h_ex r K1(r) / (2 pi) in total; TAIL_SAFETY absorbs the ring-sum
    approximation error.
    """
    r = 6.0
    while r < 120.0 and TAIL_SAFETY * h_ex * r * float(bessel_k1(r)) > tol:
        r += 1.0
    return r


def _chunks(n: int, size: int):
    size = max(16, size)
    for lo in range(0, n, size):
        yield lo, min(lo + size, n)


def lattice_field_h(
    xg: np.ndarray,
    yg: np.ndarray,
    spec: LatticeSpec,
    tol: float = 1.0e-10,
    with_gradient: bool = False,
):
    """h(x) = sum_b K0(|x - b|) over the lattice, truncated below tol.

    Returns h on the tensor grid xg x yg; with_gradient adds the analytic
    gradient sums (-K1 along the unit displacement), never finite
    differences.
    """
    xg = np.atleast_1d(np.asarray(xg, dtype=float))
    yg = np.atleast_1d(np.asarray(yg, dtype=float))
    h_ex = 2.0 * math.pi * spec.theta**2
    rt = truncation_radius(h_ex, tol)
    src = spec.sites_in(xg.min() - rt, xg.max() + rt, yg.min() - rt, yg.max() + rt)
    nodes_x, nodes_y = np.meshgrid(xg, yg, indexing="ij")
    px = nodes_x.ravel()
    py = nodes_y.ravel()
    h = np.zeros(px.size)
    g1 = np.zeros(px.size) if with_gradient else None
    g2 = np.zeros(px.size) if with_gradient else None
    for lo, hi in _chunks(px.size, int(4.0e6 / max(1, src.shape[0]))):
        dx = px[lo:hi, None] - src[None, :, 0]
        dy = py[lo:hi, None] - src[None, :, 1]
        r = np.hypot(dx, dy)
        if r.size and float(r.min()) == 0.0:
            raise ValueError("grid node coincides with a lattice point; jitter x0")
        near = r <= rt
        rs = np.where(near, r, 1.0)
        h[lo:hi] = np.sum(np.where(near, bessel_k0(rs), 0.0), axis=1)
        if with_gradient:
            w = np.where(near, -bessel_k1(rs), 0.0) / rs
            g1[lo:hi] = np.sum(w * dx, axis=1)
            g2[lo:hi] = np.sum(w * dy, axis=1)
    shape = (xg.size, yg.size)
    if with_gradient:
        return h.reshape(shape), g1.reshape(shape), g2.reshape(shape)
    return h.reshape(shape)


def _nearest_site_distance(xg: np.ndarray, yg: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Distance from each tensor-grid node to the nearest lattice site.

    The nearest site of x0 + c Z^2 is found per coordinate by rounding;
    half-cell ties give the same distance either way.
    """
    c = spec.cell
    nx_, ny_ = np.meshgrid(np.atleast_1d(xg), np.atleast_1d(yg), indexing="ij")
    bx = spec.x0[0] + c * np.round((nx_ - spec.x0[0]) / c)
    by = spec.x0[1] + c * np.round((ny_ - spec.x0[1]) / c)
    return np.hypot(nx_ - bx, ny_ - by)


def vortex_profile_rho(
    xg: np.ndarray, yg: np.ndarray, spec: LatticeSpec, epsilon: float
) -> np.ndarray:
    """rho = 0 within eps of a site, r/eps - 1 on [eps, 2 eps], else 1."""
    if epsilon >= spec.cell / 4.0:
        raise ValueError(
            f"vortex cores overlap: epsilon {epsilon:.6g} >= cell/4 = {spec.cell / 4.0:.6g}"
        )
    r = _nearest_site_distance(np.asarray(xg, float), np.asarray(yg, float), spec)
    return np.clip(r / epsilon - 1.0, 0.0, 1.0)


def _grad_rho_sq(
    xg: np.ndarray, yg: np.ndarray, spec: LatticeSpec, epsilon: float
) -> np.ndarray:
    """|grad rho|^2 exactly: 1/eps^2 on the open ramp annulus, 0 elsewhere."""
    r = _nearest_site_distance(np.asarray(xg, float), np.asarray(yg, float), spec)
    ramp = (r > epsilon) & (r < 2.0 * epsilon)
    return np.where(ramp, 1.0 / epsilon**2, 0.0)


# ---------------------------------------------------------------------------
# Newtonian potential of a planar charge by cell-wise convolution
# ---------------------------------------------------------------------------


def _guarded_atan(a, b):
    """a * arctan(b / a), with the a == 0 limit 0."""
    safe = np.where(a == 0.0, 1.0, a)
    return np.where(a == 0.0, 0.0, a * np.arctan(b / safe))


def _guarded_log_r2(u, v):
    r2 = u * u + v * v
    return np.where(r2 == 0.0, 0.0, np.log(np.where(r2 == 0.0, 1.0, r2)))


def _log_rect(u1, u2, v1, v2):
    """Integral of ln sqrt(u^2 + v^2) over [u1,u2] x [v1,v2], corner form."""

    def f(u, v):
        return (
            0.5 * u * v * _guarded_log_r2(u, v)
            - 1.5 * u * v
            + 0.5 * u * _guarded_atan(u, v)
            + 0.5 * v * _guarded_atan(v, u)
        )

    return f(u2, v2) - f(u1, v2) - f(u2, v1) + f(u1, v1)


def _grad_rect(u1, u2, v1, v2):
    """Integral of u / (u^2 + v^2) over the rectangle, corner form."""

    def f(u, v):
        return _guarded_atan(u, v) + 0.5 * v * _guarded_log_r2(u, v)

    return f(u2, v2) - f(u1, v2) - f(u2, v1) + f(u1, v1)


def newtonian_potential(
    xg: np.ndarray,
    yg: np.ndarray,
    charge: np.ndarray,
    xt: np.ndarray | None = None,
    yt: np.ndarray | None = None,
    near_cells: float = 4.0,
    with_potential: bool = True,
):
    """phi = Gamma * charge with Gamma = ln|x| / (2 pi); returns (phi, d1, d2).

    The charge is sampled on the nodes of the source grid and integrated as
    piecewise-constant cell densities (4-corner means).  Targets within
    near_cells cell diagonals of a cell center use the closed-form rectangle
    integrals of the kernel; farther pairs use the midpoint rule.
    """
    xg = np.asarray(xg, float)
    yg = np.asarray(yg, float)
    charge = np.asarray(charge, float)
    if charge.shape != (xg.size, yg.size):
        raise ValueError("charge field shape does not match the source grid")
    if xt is None:
        xt, yt = xg, yg
    xt = np.atleast_1d(np.asarray(xt, float))
    yt = np.atleast_1d(np.asarray(yt, float))
    tx, ty = np.meshgrid(xt, yt, indexing="ij")
    out_shape = tx.shape
    tx = tx.ravel()
    ty = ty.ravel()

    hx = xg[1] - xg[0]
    hy = yg[1] - yg[0]
    area = hx * hy
    ccx, ccy = np.meshgrid(0.5 * (xg[:-1] + xg[1:]), 0.5 * (yg[:-1] + yg[1:]), indexing="ij")
    q = 0.25 * (charge[:-1, :-1] + charge[1:, :-1] + charge[:-1, 1:] + charge[1:, 1:])
    keep = q.ravel() != 0.0
    ccx = ccx.ravel()[keep]
    ccy = ccy.ravel()[keep]
    q = q.ravel()[keep]

    r_near2 = (near_cells * math.hypot(hx, hy)) ** 2
    phi = np.zeros(tx.size) if with_potential else None
    d1 = np.zeros(tx.size)
    d2 = np.zeros(tx.size)
    for lo, hi in _chunks(tx.size, int(3.0e6 / max(1, q.size))):
        dx = tx[lo:hi, None] - ccx[None, :]
        dy = ty[lo:hi, None] - ccy[None, :]
        r2 = dx * dx + dy * dy
        far = r2 > r_near2
        rs = np.where(far, r2, 1.0)
        if with_potential:
            phi[lo:hi] = (np.where(far, 0.5 * np.log(rs), 0.0) @ q) * area
        d1[lo:hi] = (np.where(far, dx / rs, 0.0) @ q) * area
        d2[lo:hi] = (np.where(far, dy / rs, 0.0) @ q) * area
        # near pairs: replace the midpoint rule by exact rectangle integrals
        ti, si = np.nonzero(~far)
        if ti.size:
            u1 = dx[ti, si] - 0.5 * hx
            u2 = dx[ti, si] + 0.5 * hx
            v1 = dy[ti, si] - 0.5 * hy
            v2 = dy[ti, si] + 0.5 * hy
            qs = q[si]
            if with_potential:
                np.add.at(phi, lo + ti, qs * _log_rect(u1, u2, v1, v2))
            np.add.at(d1, lo + ti, qs * _grad_rect(u1, u2, v1, v2))
            np.add.at(d2, lo + ti, qs * _grad_rect(v1, v2, u1, u2))
    inv2pi = 1.0 / (2.0 * math.pi)
    if with_potential:
        phi = inv2pi * phi.reshape(out_shape)
    return phi, inv2pi * d1.reshape(out_shape), inv2pi * d2.reshape(out_shape)


# ---------------------------------------------------------------------------
# cutoffs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class XiCutoff:
    """Radial cosine cutoff: 1 on B_R, 0 off B_{R+1}, |grad xi| <= pi/2 < 2."""

    center: tuple[float, float]
    radius: float  # R

    def __call__(self, x, y):
        r = np.hypot(
            np.asarray(x, float) - self.center[0], np.asarray(y, float) - self.center[1]
        )
        t = np.clip(r - self.radius, 0.0, 1.0)
        return 0.5 * (1.0 + np.cos(math.pi * t))

    def gradient(self, x, y):
        dx = np.asarray(x, float) - self.center[0]
        dy = np.asarray(y, float) - self.center[1]
        r = np.hypot(dx, dy)
        t = r - self.radius
        on = (t > 0.0) & (t < 1.0)
        mag = np.where(on, -0.5 * math.pi * np.sin(math.pi * np.clip(t, 0.0, 1.0)), 0.0)
        rs = np.where(r > 0.0, r, 1.0)
        return mag * dx / rs, mag * dy / rs


@dataclass(frozen=True)
class EtaCutoff:
    """Vertical cosine cutoff: 1 on [-s/2, L+s/2], 0 beyond width-d ramps.

    |eta'| <= pi/(2d) <= 2/d; the symmetry about L/2 is exact because only
    |x3 - L/2| enters.
    """

    height: float
    s: float
    d: float

    def __call__(self, z):
        t = np.abs(np.asarray(z, float) - 0.5 * self.height) - 0.5 * (self.height + self.s)
        t = np.clip(t / self.d, 0.0, 1.0)
        return 0.5 * (1.0 + np.cos(math.pi * t))

    def derivative(self, z):
        z = np.asarray(z, float)
        u = z - 0.5 * self.height
        t = np.abs(u) - 0.5 * (self.height + self.s)
        on = (t > 0.0) & (t < self.d)
        mag = np.where(
            on,
            -0.5 * (math.pi / self.d) * np.sin(math.pi * np.clip(t / self.d, 0.0, 1.0)),
            0.0,
        )
        return mag * np.sign(u)


def xi_cutoff(omega: tuple[float, float]) -> XiCutoff:
    diam = math.hypot(omega[0], omega[1])
    return XiCutoff(center=(0.5 * omega[0], 0.5 * omega[1]), radius=max(2.0 * diam, 1.0))


def eta_cutoff(height: float, s: float, d: float) -> EtaCutoff:
    if d <= 0.0:
        raise ValueError("vertical cutoff extent d must be positive")
    return EtaCutoff(height=height, s=s, d=d)


# ---------------------------------------------------------------------------
# translation selection
# ---------------------------------------------------------------------------


def translation_candidates(h_ex: float, n: int = 8) -> list[tuple[float, float]]:
    """n x n grid of offsets over K = (-cell/2, cell/2)^2, at subcell centers."""
    cell = 1.0 / math.sqrt(h_ex / (2.0 * math.pi))
    offs = ((np.arange(n) + 0.5) / n - 0.5) * cell
    return [(float(a), float(b)) for a in offs for b in offs]


def _refined_axis(width: float, n_nodes: int, sub: int) -> np.ndarray:
    return np.linspace(0.0, width, (n_nodes - 1) * sub + 1)


def _trap_w(axis: np.ndarray) -> np.ndarray:
    h = axis[1] - axis[0]
    w = np.full(axis.size, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _jittered(x0: tuple[float, float], cell: float, k: int) -> tuple[float, float]:
    # irrational multipliers so a repeat coincidence is out of reach
    return (
        x0[0] + k * math.sqrt(2.0) * 1e-7 * cell,
        x0[1] + k * math.sqrt(3.0) * 1e-7 * cell,
    )


def translation_energy(
    params: ModelParams, x0: tuple[float, float], sub: int = 1, tol: float = 1.0e-6
) -> float:
    """Discretized 2-D free energy of the lattice configuration at offset x0.

    F = int_Omega [ (|grad rho|^2 + rho^2 |grad h|^2)/2
        + (1 - rho^2)^2 / (4 eps^2) + (h - h_ex)^2 / 2 ],
    with the kinetic part in the gauge-invariant form.
    """
    spec = make_lattice(params.h_ex, params.omega, x0)
    xg = _refined_axis(params.omega[0], params.mesh.n_x, sub)
    yg = _refined_axis(params.omega[1], params.mesh.n_y, sub)
    h, g1, g2 = lattice_field_h(xg, yg, spec, tol=tol, with_gradient=True)
    rho = vortex_profile_rho(xg, yg, spec, params.epsilon)
    gr2 = _grad_rho_sq(xg, yg, spec, params.epsilon)
    w = np.outer(_trap_w(xg), _trap_w(yg))
    dens = (
        0.5 * (gr2 + rho**2 * (g1**2 + g2**2))
        + (1.0 - rho**2) ** 2 / (4.0 * params.epsilon**2)
        + 0.5 * (h - params.h_ex) ** 2
    )
    return float(np.sum(w * dens))


def select_translation(
    candidates: list[tuple[float, float]],
    params: ModelParams,
    sub: int = 1,
    tol: float = 1.0e-6,
) -> tuple[float, float]:
    """Grid-search argmin of the discretized energy; lexicographic tie-break."""
    if not candidates:
        raise ValueError("candidate list is empty")
    cell = 1.0 / math.sqrt(params.h_ex / (2.0 * math.pi))
    best = None
    best_e = math.inf
    for cand in sorted(candidates):
        x0 = cand
        for attempt in range(3):
            try:
                e = translation_energy(params, x0, sub=sub, tol=tol)
                break
            except ValueError:
                x0 = _jittered(cand, cell, attempt + 1)
        else:
            raise ValueError("could not place the lattice off the grid nodes")
        if e < best_e:
            best, best_e = x0, e
    return best


# ---------------------------------------------------------------------------
# assembly and the I1 + I2 + I3 split
# ---------------------------------------------------------------------------


def m_eps_value(params: ModelParams) -> float:
    """(|D|/2) h_ex ln(1 / (eps sqrt(h_ex))), the leading-order energy scale."""
    arg = params.epsilon * math.sqrt(params.h_ex)
    if arg >= 1.0:
        raise ValueError("eps sqrt(h_ex) must be < 1 for the mixed-state scale")
    return 0.5 * params.sample_volume * params.h_ex * math.log(1.0 / arg)


@dataclass
class TestConstructionReport:
    """Constructed fields, the assembled 3-D configuration, and the split."""

    params: ModelParams
    d: float
    spec: LatticeSpec
    domain: DomainDiscretization
    configuration: LayeredConfiguration
    # planar fields on the refined Omega grid
    xg: np.ndarray
    yg: np.ndarray
    h_field: np.ndarray
    rho_field: np.ndarray
    phi_field: np.ndarray
    # disk grid carrying xi for the exterior integrals
    xd: np.ndarray
    yd: np.ndarray
    xi_disk: np.ndarray
    # vertical cutoff samples
    zg: np.ndarray
    eta_z: np.ndarray
    # scalars
    I1: float
    I2: float
    I3: float
    m_eps: float
    log_factor: float
    s_over_L: float
    h_sq_integral: float
    annulus_integral: float
    disk_integral: float
    kin_pot_integral: float
    truncation_radius: float
    x0: tuple[float, float]

    @property
    def total(self) -> float:
        return self.I1 + self.I2 + self.I3

    @property
    def ratio(self) -> float:
        return self.total / self.m_eps

    def fit_c(self) -> float:
        """The C that makes the bound exactly tight at this point."""
        return (self.ratio - 1.0 - self.s_over_L) * self.log_factor

    def bound_value(self, c: float) -> float:
        return self.m_eps * (1.0 + self.s_over_L + c / self.log_factor)

    def scalar_dict(self) -> dict:
        return {
            "epsilon": self.params.epsilon,
            "h_ex": self.params.h_ex,
            "s": self.params.s,
            "n_layers": self.params.n_layers,
            "height": self.params.height,
            "d": self.d,
            "x0": list(self.x0),
            "I1": self.I1,
            "I2": self.I2,
            "I3": self.I3,
            "total": self.total,
            "m_eps": self.m_eps,
            "ratio": self.ratio,
            "log_factor": self.log_factor,
            "s_over_L": self.s_over_L,
            "h_sq_integral": self.h_sq_integral,
            "annulus_integral": self.annulus_integral,
            "disk_integral": self.disk_integral,
            "kin_pot_integral": self.kin_pot_integral,
            "truncation_radius": self.truncation_radius,
            "lattice_points": int(self.spec.points.shape[0]),
        }

    def to_json(self) -> str:
        return json.dumps(self.scalar_dict(), indent=2, sort_keys=True)


def _gauss_interval(a: float, b: float, n: int = 32):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * t, 0.5 * (b - a) * w


def assemble_test_configuration(
    params: ModelParams,
    d: float = 1.0,
    candidates: list[tuple[float, float]] | None = None,
    sub: int = 2,
    tol: float = 1.0e-10,
    disk_n: int = 129,
) -> TestConstructionReport:
    """Build the lattice test configuration and evaluate I1, I2, I3.

    I1 covers the slab x3 in [-s/2, L+s/2] (layer terms plus the field
    integrand there), I2 and I3 the two eta ramps.  Because grad xi vanishes
    on Omega and the charge H vanishes off Omega, the planar field integral
    splits exactly into int H^2, the annulus term (grad xi . grad phi)^2 and
    the disk term xi^2 |grad phi|^2.
    """
    params.require_core_resolved()
    p = params
    if p.pad + 1e-12 < 0.5 * p.s + d:
        raise ValueError(
            f"d too large for pad: need pad >= s/2 + d = {0.5 * p.s + d:.6g}, have {p.pad:.6g}"
        )
    eta = eta_cutoff(p.height, p.s, d)
    xi = xi_cutoff(p.omega)
    domain = build_domain(p)

    if candidates is None:
        candidates = translation_candidates(p.h_ex, n=8)
    x0 = select_translation(candidates, p)

    # every grid the construction samples; keep each node off the lattice
    xg = _refined_axis(p.omega[0], p.mesh.n_x, sub)
    yg = _refined_axis(p.omega[1], p.mesh.n_y, sub)
    cx, cy = xi.center
    rad = xi.radius + 1.0
    xd = np.linspace(cx - rad, cx + rad, disk_n)
    yd = np.linspace(cy - rad, cy + rad, disk_n)
    xmid = 0.5 * (domain.x_box[:-1] + domain.x_box[1:])
    ymid = 0.5 * (domain.y_box[:-1] + domain.y_box[1:])
    grids = [
        (xg, yg),
        (xd, yd),
        (domain.x_omega, domain.y_omega),
        (xmid, domain.y_box),
        (domain.x_box, ymid),
    ]
    for attempt in range(3):
        spec = make_lattice(p.h_ex, p.omega, x0)
        if all(float(_nearest_site_distance(a, b, spec).min()) > 0.0 for a, b in grids):
            break
        x0 = _jittered(x0, spec.cell, attempt + 1)
    else:
        raise ValueError("could not place the lattice off the grid nodes")
    rt = truncation_radius(p.h_ex, tol)

    # refined Omega grid: h, rho, H and the layer integrals
    h, g1, g2 = lattice_field_h(xg, yg, spec, tol=tol, with_gradient=True)
    rho = vortex_profile_rho(xg, yg, spec, p.epsilon)
    gr2 = _grad_rho_sq(xg, yg, spec, p.epsilon)
    H = h - p.h_ex
    w2 = np.outer(_trap_w(xg), _trap_w(yg))
    kin_pot = float(
        np.sum(
            w2
            * (
                0.5 * (gr2 + rho**2 * (g1**2 + g2**2))
                + (1.0 - rho**2) ** 2 / (4.0 * p.epsilon**2)
            )
        )
    )
    h_sq = float(np.sum(w2 * H * H))
    phi, _, _ = newtonian_potential(xg, yg, H)

    # disk grid over supp xi for the two exterior planar integrals
    _, p1, p2 = newtonian_potential(xg, yg, H, xt=xd, yt=yd, with_potential=False)
    dxp, dyp = np.meshgrid(xd, yd, indexing="ij")
    xi_disk = xi(dxp, dyp)
    gx1, gx2 = xi.gradient(dxp, dyp)
    wd = np.outer(_trap_w(xd), _trap_w(yd))
    disk_term = float(np.sum(wd * xi_disk**2 * (p1**2 + p2**2)))
    annulus_term = float(np.sum(wd * (gx1 * p1 + gx2 * p2) ** 2))
    planar_sq = h_sq + annulus_term

    # vertical split: eta = 1 on the slab, cosine ramps of width d outside
    I1 = p.s * (p.n_layers + 1) * (kin_pot + 0.5 * planar_sq)
    z_top, w_top = _gauss_interval(p.height + 0.5 * p.s, p.height + 0.5 * p.s + d)
    z_bot, w_bot = _gauss_interval(-0.5 * p.s - d, -0.5 * p.s)
    I2 = 0.5 * float(
        np.sum(w_top * eta.derivative(z_top) ** 2) * disk_term
        + np.sum(w_top * eta(z_top) ** 2) * planar_sq
    )
    I3 = 0.5 * float(
        np.sum(w_bot * eta.derivative(z_bot) ** 2) * disk_term
        + np.sum(w_bot * eta(z_bot) ** 2) * planar_sq
    )

    # assembled 3-D state: equal real layers, B links from the closed form
    dev = Potential3D.background(domain)
    _, _, qa2 = newtonian_potential(xg, yg, H, xt=xmid, yt=domain.y_box, with_potential=False)
    _, qb1, _ = newtonian_potential(xg, yg, H, xt=domain.x_box, yt=ymid, with_potential=False)
    xi_a1 = xi(xmid[:, None], domain.y_box[None, :])
    xi_a2 = xi(domain.x_box[:, None], ymid[None, :])
    eta_k = eta(domain.z_box)
    dev.dev_a1 = (-(xi_a1 * qa2))[:, :, None] * eta_k[None, None, :]
    dev.dev_a2 = (+(xi_a2 * qb1))[:, :, None] * eta_k[None, None, :]
    u = np.broadcast_to(
        vortex_profile_rho(domain.x_omega, domain.y_omega, spec, p.epsilon).astype(complex),
        (p.n_layers + 1, domain.n_x, domain.n_y),
    ).copy()
    config = LayeredConfiguration(u, dev)

    zg = np.linspace(-0.5 * p.s - d, p.height + 0.5 * p.s + d, 257)
    return TestConstructionReport(
        params=p,
        d=d,
        spec=spec,
        domain=domain,
        configuration=config,
        xg=xg,
        yg=yg,
        h_field=h,
        rho_field=rho,
        phi_field=phi,
        xd=xd,
        yd=yd,
        xi_disk=xi_disk,
        zg=zg,
        eta_z=eta(zg),
        I1=I1,
        I2=I2,
        I3=I3,
        m_eps=m_eps_value(p),
        log_factor=math.log(1.0 / (p.epsilon * math.sqrt(p.h_ex))),
        s_over_L=p.s / p.height,
        h_sq_integral=h_sq,
        annulus_integral=annulus_term,
        disk_integral=disk_term,
        kin_pot_integral=kin_pot,
        truncation_radius=rt,
        x0=x0,
    )


# ---------------------------------------------------------------------------
# optional phase materialization
# ---------------------------------------------------------------------------


@dataclass
class ReconstructedStack:
    """Materialized vortex phase and the matching layered configuration."""

    phase: np.ndarray  # (n_x, n_y), one sheet shared by every layer
    config: LayeredConfiguration


def _wrap(a: np.ndarray) -> np.ndarray:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def reconstruct_phase(
    report: TestConstructionReport, require_loops: bool = True
) -> ReconstructedStack:
    """Phase = sum of vortex angles plus a single-valued corrector.

    The corrector chi solves the discrete least-squares problem matching
    grad(phase) to the link targets A - perp grad h, which reproduces the
    gauge-invariant kinetic energy without touching any winding number.
    """
    dom = report.domain
    p = report.params
    spec = report.spec
    xg, yg = dom.x_omega, dom.y_omega
    hx, hy = dom.hx, dom.hy

    if require_loops:
        inside = spec.points[
            (spec.points[:, 0] > 0.0)
            & (spec.points[:, 0] < p.omega[0])
            & (spec.points[:, 1] > 0.0)
            & (spec.points[:, 1] < p.omega[1])
        ]
        for bx, by in inside:
            if (
                bx < 2.0 * hx
                or bx > p.omega[0] - 2.0 * hx
                or by < 2.0 * hy
                or by > p.omega[1] - 2.0 * hy
            ):
                raise ValueError(
                    "a core closer than 2 grid cells to the boundary has no winding loop"
                )

    nx_, ny_ = np.meshgrid(xg, yg, indexing="ij")
    psi = np.zeros((xg.size, yg.size))
    for bx, by in spec.points:
        psi += np.arctan2(ny_ - by, nx_ - bx)

    # link targets A - perp grad h on layer plane 0, integrated per link
    a1, a2 = layer_links(report.configuration.pot, dom, 0)
    _, _, gmx2 = lattice_field_h(
        0.5 * (xg[:-1] + xg[1:]), yg, spec, tol=1.0e-8, with_gradient=True
    )
    _, gmy1, _ = lattice_field_h(
        xg, 0.5 * (yg[:-1] + yg[1:]), spec, tol=1.0e-8, with_gradient=True
    )
    r1 = (a1 + gmx2) * hx - _wrap(psi[1:, :] - psi[:-1, :])
    r2 = (a2 - gmy1) * hy - _wrap(psi[:, 1:] - psi[:, :-1])

    # graph-Laplacian least squares for the single-valued corrector
    shape = psi.shape

    def lap(v: np.ndarray) -> np.ndarray:
        c = v.reshape(shape)
        out = np.zeros_like(c)
        dxl = c[1:, :] - c[:-1, :]
        out[1:, :] += dxl
        out[:-1, :] -= dxl
        dyl = c[:, 1:] - c[:, :-1]
        out[:, 1:] += dyl
        out[:, :-1] -= dyl
        return out.ravel()

    rhs = np.zeros(shape)
    rhs[1:, :] += r1
    rhs[:-1, :] -= r1
    rhs[:, 1:] += r2
    rhs[:, :-1] -= r2
    b = rhs.ravel()
    b -= b.mean()  # pure-Neumann system: project onto the solvable range
    chi = cg_solve(lap, b, tol=1.0e-10).reshape(shape)
    phase = psi + chi

    rho = vortex_profile_rho(xg, yg, spec, p.epsilon)
    u = np.broadcast_to(rho * np.exp(1j * phase), (p.n_layers + 1, xg.size, yg.size)).copy()
    return ReconstructedStack(
        phase=phase,
        config=LayeredConfiguration(u, report.configuration.pot.copy()),
    )


def winding_number(phase: np.ndarray, i0: int, i1: int, j0: int, j1: int) -> float:
    """Net winding, in turns, of the phase around the rectangle loop."""
    path = (
        [(i, j0) for i in range(i0, i1)]
        + [(i1, j) for j in range(j0, j1)]
        + [(i, j1) for i in range(i1, i0, -1)]
        + [(i0, j) for j in range(j1, j0, -1)]
    )
    vals = np.array([phase[i, j] for i, j in path])
    steps = _wrap(np.diff(np.concatenate([vals, vals[:1]])))
    return float(np.sum(steps)) / (2.0 * math.pi)
