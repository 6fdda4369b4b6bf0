"""Model parameters and grid construction.

The sample is a box D = Omega x [0, L] with Omega = [0, W_x] x [0, W_y].
Superconducting layers sit on the planes z = n*s for n = 0..N, with s*N = L.
The magnetic potential lives on a larger box B_pad that surrounds D by `pad`
on every side and stands in for all of R^3; outside B_pad the field is pinned
to the applied background.

Grids are uniform.  The vertical grid must contain every layer plane exactly,
so the plane spacing h_z has to divide s; `build_domain` rejects parameters
where it does not.  In-plane padding is rounded up to whole cells so that the
Omega nodes form a contiguous sub-block of the padded grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

# Relative slack used for the exact-divisibility checks below.
ALIGN_TOL = 1.0e-12


@dataclass(frozen=True)
class MeshSpec:
    """Grid resolutions: nodes across Omega in-plane, planes across [-pad, L+pad]."""

    n_x: int
    n_y: int
    n_z: int

    def __post_init__(self) -> None:
        if self.n_x < 2 or self.n_y < 2 or self.n_z < 2:
            raise ValueError("each mesh dimension needs at least two planes")


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters for one configuration.

    epsilon   coherence-length parameter of the quartic well
    n_layers  N; the stack has N+1 layers on planes z = 0, s, .., N*s
    height    L, the sample thickness (s*N = L must hold)
    h_ex      applied field strength along e3
    lam       interlayer coupling length (lambda in the energy)
    omega     (W_x, W_y) in-plane extents
    pad       margin of the computational box around D on all sides
    s         layer spacing; derived from height/n_layers when omitted
    """

    epsilon: float
    n_layers: int
    height: float
    h_ex: float
    mesh: MeshSpec
    lam: float = 1.0
    omega: tuple[float, float] = (1.0, 1.0)
    pad: float = 1.0
    s: float = field(default=0.0)

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.n_layers < 1:
            raise ValueError("need at least one gap (n_layers >= 1)")
        if self.height <= 0 or self.lam <= 0:
            raise ValueError("height and lam must be positive")
        if self.omega[0] <= 0 or self.omega[1] <= 0:
            raise ValueError("omega extents must be positive")
        if self.pad < 0:
            raise ValueError("pad must be nonnegative")
        if self.s == 0.0:
            object.__setattr__(self, "s", self.height / self.n_layers)
        if abs(self.s * self.n_layers - self.height) > ALIGN_TOL * self.height:
            raise ValueError(
                f"s*n_layers = {self.s * self.n_layers!r} does not equal height {self.height!r}"
            )

    @property
    def omega_area(self) -> float:
        return self.omega[0] * self.omega[1]

    @property
    def sample_volume(self) -> float:
        return self.omega_area * self.height

    def plane_resolution(self) -> float:
        """Largest in-plane grid spacing."""
        hx = self.omega[0] / (self.mesh.n_x - 1)
        hy = self.omega[1] / (self.mesh.n_y - 1)
        return max(hx, hy)

    def require_core_resolved(self) -> None:
        """Reject meshes too coarse for the vortex-core scale epsilon."""
        h = self.plane_resolution()
        if h > self.epsilon / 2 + ALIGN_TOL:
            raise ValueError(
                f"in-plane spacing {h:.6g} exceeds epsilon/2 = {self.epsilon / 2:.6g}; refine the mesh"
            )


def aligned_vertical(n_layers: int, s: float, per_gap: int, min_pad: float) -> tuple[int, float]:
    """Pick (n_z, pad) so layer planes align and the pad is >= min_pad.

    per_gap vertical cells between adjacent layers gives h_z = s/per_gap; the
    pad is rounded up to a whole number of planes.
    """
    if per_gap < 1:
        raise ValueError("per_gap must be >= 1")
    hz = s / per_gap
    k = max(0, ceil(min_pad / hz - ALIGN_TOL))
    n_z = n_layers * per_gap + 2 * k + 1
    return n_z, k * hz


def _int_ratio(num: float, den: float, what: str) -> int:
    ratio = num / den
    near = round(ratio)
    if abs(ratio - near) > ALIGN_TOL * max(1.0, abs(ratio)):
        raise ValueError(f"{what}: {num!r} is not an integer multiple of {den!r}")
    return int(near)


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = h / 2
    w[-1] = h / 2
    return w


@dataclass(frozen=True)
class DomainDiscretization:
    """Grids, weights and index bookkeeping derived from ModelParams.

    All arrays are plain functions of the parameters; rebuilding from equal
    parameters is bit-identical.  Instances are immutable and safe to share
    across worker processes.
    """

    params: ModelParams
    hx: float
    hy: float
    hz: float
    # Omega grid (layer fields)
    x_omega: np.ndarray
    y_omega: np.ndarray
    # padded in-plane grid (3-D box)
    x_box: np.ndarray
    y_box: np.ndarray
    z_box: np.ndarray
    # index of the Omega block inside the padded grid
    ix0: int
    iy0: int
    # vertical bookkeeping
    planes_per_gap: int
    kz0: int  # plane index of z = 0
    layer_planes: np.ndarray  # plane index of each layer, length N+1
    pad_x: float
    pad_y: float
    pad_z: float

    @property
    def n_x(self) -> int:
        return self.x_omega.size

    @property
    def n_y(self) -> int:
        return self.y_omega.size

    @property
    def nbx(self) -> int:
        return self.x_box.size

    @property
    def nby(self) -> int:
        return self.y_box.size

    @property
    def nbz(self) -> int:
        return self.z_box.size

    @property
    def n_zd(self) -> int:
        """Number of planes inside D, boundary included."""
        return self.params.n_layers * self.planes_per_gap + 1

    def omega_node_weights(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            _trapezoid_weights(self.n_x, self.hx),
            _trapezoid_weights(self.n_y, self.hy),
        )

    def box_node_weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            _trapezoid_weights(self.nbx, self.hx),
            _trapezoid_weights(self.nby, self.hy),
            _trapezoid_weights(self.nbz, self.hz),
        )

    def d_plane_weights(self) -> np.ndarray:
        """Trapezoid weights over the planes of [0, L]."""
        return _trapezoid_weights(self.n_zd, self.hz)

    def omega_slices(self) -> tuple[slice, slice]:
        """Slices picking the Omega node block out of the padded in-plane grid."""
        return (
            slice(self.ix0, self.ix0 + self.n_x),
            slice(self.iy0, self.iy0 + self.n_y),
        )

    def d_plane_range(self) -> slice:
        return slice(self.kz0, self.kz0 + self.n_zd)

    def cell_in_omega_mask(self) -> np.ndarray:
        """Bool mask over padded in-plane cells that lie inside Omega."""
        mask = np.zeros((self.nbx - 1, self.nby - 1), dtype=bool)
        mask[self.ix0 : self.ix0 + self.n_x - 1, self.iy0 : self.iy0 + self.n_y - 1] = True
        return mask

    def zcell_in_d_mask(self) -> np.ndarray:
        """Bool mask over vertical cells (between planes) inside [0, L]."""
        mask = np.zeros(self.nbz - 1, dtype=bool)
        mask[self.kz0 : self.kz0 + self.n_zd - 1] = True
        return mask

    def x_node_in_omega_weight(self) -> np.ndarray:
        """Length of [x_i - hx/2, x_i + hx/2] clipped to [0, W_x], per box node."""
        w = np.zeros(self.nbx)
        w[self.ix0 : self.ix0 + self.n_x] = _trapezoid_weights(self.n_x, self.hx)
        return w

    def y_node_in_omega_weight(self) -> np.ndarray:
        w = np.zeros(self.nby)
        w[self.iy0 : self.iy0 + self.n_y] = _trapezoid_weights(self.n_y, self.hy)
        return w

    def z_plane_in_d_weight(self) -> np.ndarray:
        """Length of [z_k - hz/2, z_k + hz/2] clipped to [0, L], per box plane."""
        w = np.zeros(self.nbz)
        w[self.kz0 : self.kz0 + self.n_zd] = _trapezoid_weights(self.n_zd, self.hz)
        return w


def build_domain(params: ModelParams) -> DomainDiscretization:
    """Construct all grids for `params`.

    Raises ValueError when s does not divide the vertical extent consistently,
    i.e. when the layer planes cannot be aligned to the vertical grid.
    """
    mesh = params.mesh
    W_x, W_y = params.omega
    L = params.height
    hx = W_x / (mesh.n_x - 1)
    hy = W_y / (mesh.n_y - 1)
    hz = (L + 2 * params.pad) / (mesh.n_z - 1)

    m = _int_ratio(params.s, hz, "layer planes cannot be aligned to the vertical grid")
    if params.pad > 0:
        kz0 = _int_ratio(params.pad, hz, "pad is not a whole number of vertical planes")
    else:
        kz0 = 0

    # in-plane padding rounds up to whole cells; stored pads are the effective ones
    mx = max(0, ceil(params.pad / hx - ALIGN_TOL))
    my = max(0, ceil(params.pad / hy - ALIGN_TOL))

    x_omega = np.arange(mesh.n_x) * hx
    y_omega = np.arange(mesh.n_y) * hy
    x_box = (np.arange(mesh.n_x + 2 * mx) - mx) * hx
    y_box = (np.arange(mesh.n_y + 2 * my) - my) * hy
    z_box = (np.arange(mesh.n_z) - kz0) * hz

    layer_planes = kz0 + m * np.arange(params.n_layers + 1)
    if layer_planes[-1] != mesh.n_z - 1 - kz0:
        raise ValueError("vertical mesh does not span height + 2*pad consistently")

    return DomainDiscretization(
        params=params,
        hx=hx,
        hy=hy,
        hz=hz,
        x_omega=x_omega,
        y_omega=y_omega,
        x_box=x_box,
        y_box=y_box,
        z_box=z_box,
        ix0=mx,
        iy0=my,
        planes_per_gap=m,
        kz0=kz0,
        layer_planes=layer_planes,
        pad_x=mx * hx,
        pad_y=my * hy,
        pad_z=kz0 * hz,
    )
