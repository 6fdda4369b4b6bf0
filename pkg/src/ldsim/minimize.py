"""Energy minimization by gradient descent with Barzilai-Borwein steps.

States are packed into one flat real vector (Re u, Im u, then the three
deviation-link arrays).  Deviation links on the boundary of the computational
box are pinned to zero, which keeps the potential equal to the applied
background there.  Every accepted step satisfies an Armijo sufficient
decrease, so reported energies never increase along the run; a final
projection clamps |u| to 1 (the maximum-principle bound), re-checking
descent afterwards.

Runs are deterministic: same inputs and seed give bit-identical traces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .domain import DomainDiscretization
from .energy import (
    Quadrature,
    agl_energy,
    agl_gradient,
    gl2d_energy,
    gl2d_gradient,
    ld_energy,
    ld_gradient,
)
from .fields import (
    ContinuumConfiguration,
    GaugeFunction,
    LayeredConfiguration,
    Potential2D,
    Potential3D,
    apply_gauge,
    apply_gauge_continuum,
)
from .linalg import cg_solve


@dataclass
class MinimizeOptions:
    max_iters: int = 500
    grad_tol: float = 1.0e-5  # relative: stop when ||g|| <= grad_tol * (1 + |E|)
    step_rule: str = "bb"  # "bb" or "fixed"
    step0: float = 1.0
    armijo_c: float = 1.0e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    polish: bool = True
    gauge_fix_interval: int = 0  # 0 disables the periodic Coulomb projection
    trace_path: str | None = None
    seed: int | None = None  # recorded only; initial states are built by callers

TRACE_HEADER = "iter,energy,gradnorm,step"


@dataclass
class MinimizeTrace:
    rows: list[tuple[int, float, float, float]] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""
    n_iters: int = 0
    initial_energy: float = 0.0
    final_energy: float = 0.0
    final_gradnorm: float = 0.0
    polish_rounds: int = 0
    max_modulus: float = 0.0
    seed: int | None = None

    def to_csv(self) -> str:
        lines = [TRACE_HEADER]
        for it, e, g, t in self.rows:
            lines.append(f"{it},{e!r},{g!r},{t!r}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "n_iters": self.n_iters,
            "initial_energy": self.initial_energy,
            "final_energy": self.final_energy,
            "final_gradnorm": self.final_gradnorm,
            "polish_rounds": self.polish_rounds,
            "max_modulus": self.max_modulus,
            "seed": self.seed,
        }


def _boundary_link_masks(domain: DomainDiscretization):
    """True where a deviation link lies on the boundary of the box."""
    nbx, nby, nbz = domain.nbx, domain.nby, domain.nbz
    m1 = np.zeros((nbx - 1, nby, nbz), dtype=bool)
    m1[:, 0, :] = m1[:, -1, :] = m1[:, :, 0] = m1[:, :, -1] = True
    m2 = np.zeros((nbx, nby - 1, nbz), dtype=bool)
    m2[0, :, :] = m2[-1, :, :] = m2[:, :, 0] = m2[:, :, -1] = True
    m3 = np.zeros((nbx, nby, nbz - 1), dtype=bool)
    m3[0, :, :] = m3[-1, :, :] = m3[:, 0, :] = m3[:, -1, :] = True
    return m1, m2, m3


class _Problem:
    """Pack/unpack plus energy-and-gradient for one model flavor."""

    def __init__(self, domain: DomainDiscretization, kind: str):
        self.domain = domain
        self.kind = kind
        self.quad = Quadrature(domain)
        p = domain.params
        if kind == "ld":
            self.u_shape = (p.n_layers + 1, domain.n_x, domain.n_y)
        elif kind == "agl":
            self.u_shape = (domain.n_x, domain.n_y, domain.n_zd)
        elif kind == "f2d":
            self.u_shape = (domain.n_x, domain.n_y)
        else:
            raise ValueError(f"unknown problem kind {kind!r}")
        self.nu = int(np.prod(self.u_shape))
        if kind == "f2d":
            self.link_shapes = [
                (domain.n_x - 1, domain.n_y),
                (domain.n_x, domain.n_y - 1),
            ]
            self.pin = np.zeros(sum(int(np.prod(s)) for s in self.link_shapes), dtype=bool)
        else:
            m1, m2, m3 = _boundary_link_masks(domain)
            self.link_shapes = [m.shape for m in (m1, m2, m3)]
            self.pin = np.concatenate([m.ravel() for m in (m1, m2, m3)])
        self.background_h = p.h_ex

    def nu_links_total(self) -> int:
        return sum(int(np.prod(s)) for s in self.link_shapes)

    def pack(self, state) -> np.ndarray:
        if self.kind == "ld":
            u, pot = state.u, state.pot
            links = [pot.dev_a1, pot.dev_a2, pot.dev_a3]
        elif self.kind == "agl":
            u, pot = state.psi, state.pot
            links = [pot.dev_a1, pot.dev_a2, pot.dev_a3]
        else:
            u, pot = state[0], state[1]
            links = [pot.dev_a1, pot.dev_a2]
        parts = [u.real.ravel(), u.imag.ravel()] + [a.ravel() for a in links]
        return np.concatenate(parts)

    def unpack(self, x: np.ndarray):
        nu = self.nu
        u = (x[:nu] + 1j * x[nu : 2 * nu]).reshape(self.u_shape)
        off = 2 * nu
        links = []
        for shape in self.link_shapes:
            n = int(np.prod(shape))
            links.append(x[off : off + n].reshape(shape))
            off += n
        if self.kind == "ld":
            return LayeredConfiguration(u, Potential3D(*links, self.background_h))
        if self.kind == "agl":
            return ContinuumConfiguration(u, Potential3D(*links, self.background_h))
        return u, Potential2D(*links, self.background_h)

    def fg(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        state = self.unpack(x)
        if self.kind == "ld":
            e = ld_energy(self.domain, state, self.quad).total
            g = ld_gradient(self.domain, state, self.quad)
            gu, glinks = g.du, [g.da1, g.da2, g.da3]
        elif self.kind == "agl":
            e = agl_energy(self.domain, state, self.quad).total
            g = agl_gradient(self.domain, state, self.quad)
            gu, glinks = g.dpsi, [g.da1, g.da2, g.da3]
        else:
            u, pot = state
            e = gl2d_energy(self.domain, u, pot, "restricted_F", self.quad).total
            g = gl2d_gradient(self.domain, u, pot, self.quad)
            gu, glinks = g.du, [g.da1, g.da2]
        gvec = np.concatenate([gu.real.ravel(), gu.imag.ravel()] + [a.ravel() for a in glinks])
        gvec[2 * self.nu :][self.pin] = 0.0
        return e, gvec

    def energy(self, x: np.ndarray) -> float:
        state = self.unpack(x)
        if self.kind == "ld":
            return ld_energy(self.domain, state, self.quad).total
        if self.kind == "agl":
            return agl_energy(self.domain, state, self.quad).total
        u, pot = state
        return gl2d_energy(self.domain, u, pot, "restricted_F", self.quad).total

    def clamp_modulus(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        """Project |u| <= 1, leaving phases and links untouched."""
        nu = self.nu
        u = x[:nu] + 1j * x[nu : 2 * nu]
        mod = np.abs(u)
        over = mod > 1.0
        if np.any(over):
            u = np.where(over, u / np.maximum(mod, 1e-300), u)
        out = x.copy()
        out[:nu] = u.real
        out[nu : 2 * nu] = u.imag
        return out, float(mod.max())

    def gauge_project(self, x: np.ndarray) -> np.ndarray:
        """One Coulomb sweep: gauge by g with (-lap)g = div A_dev, g = 0 on the box boundary.

        The energy is exactly gauge invariant, so this only reshapes the
        iterate; boundary links stay pinned because g vanishes there.
        """
        if self.kind == "f2d":
            return x
        d = self.domain
        if d.nbx < 3 or d.nby < 3 or d.nbz < 3:
            return x
        state = self.unpack(x)
        a1, a2, a3 = state.pot.dev_a1, state.pot.dev_a2, state.pot.dev_a3
        hx, hy, hz = d.hx, d.hy, d.hz
        div = (
            (a1[1:, 1:-1, 1:-1] - a1[:-1, 1:-1, 1:-1]) / hx
            + (a2[1:-1, 1:, 1:-1] - a2[1:-1, :-1, 1:-1]) / hy
            + (a3[1:-1, 1:-1, 1:] - a3[1:-1, 1:-1, :-1]) / hz
        )
        shape = div.shape
        hx2, hy2, hz2 = hx * hx, hy * hy, hz * hz

        def neg_lap(v: np.ndarray) -> np.ndarray:
            g = np.zeros((shape[0] + 2, shape[1] + 2, shape[2] + 2))
            g[1:-1, 1:-1, 1:-1] = v.reshape(shape)
            c = g[1:-1, 1:-1, 1:-1]
            out = (
                (2.0 * c - g[2:, 1:-1, 1:-1] - g[:-2, 1:-1, 1:-1]) / hx2
                + (2.0 * c - g[1:-1, 2:, 1:-1] - g[1:-1, :-2, 1:-1]) / hy2
                + (2.0 * c - g[1:-1, 1:-1, 2:] - g[1:-1, 1:-1, :-2]) / hz2
            )
            return out.ravel()

        sol = cg_solve(neg_lap, div.ravel(), tol=1.0e-10)
        g_full = np.zeros((d.nbx, d.nby, d.nbz))
        g_full[1:-1, 1:-1, 1:-1] = sol.reshape(shape)
        gauge = GaugeFunction(g_full)
        if self.kind == "ld":
            return self.pack(apply_gauge(state, gauge, d))
        return self.pack(apply_gauge_continuum(state, gauge, d))


def _norm(v: np.ndarray) -> float:
    return float(np.sqrt(np.sum(v * v)))


def _descend(
    problem: _Problem, x0: np.ndarray, opts: MinimizeOptions, trace: MinimizeTrace,
    trace_file=None, start_iter: int = 0, target: float | None = None,
    max_iters: int | None = None,
) -> tuple[np.ndarray, float, np.ndarray, int, str]:
    """Armijo-backtracked descent; returns (x, E, g, iters_done, reason)."""
    max_iters = opts.max_iters if max_iters is None else max_iters
    e, g = problem.fg(x0)
    gnorm = _norm(g)
    x = x0

    def emit(it, energy, gn, step):
        trace.rows.append((it, energy, gn, step))
        if trace_file is not None:
            trace_file.write(f"{it},{energy!r},{gn!r},{step!r}\n")
            trace_file.flush()

    if start_iter == 0:
        emit(0, e, gnorm, math.nan)
    if gnorm <= opts.grad_tol * (1.0 + abs(e)):
        return x, e, g, 0, "gradient below tolerance at start"

    s_prev = None
    y_prev = None
    step = opts.step0 if opts.step_rule == "fixed" else min(1.0, 1.0 / max(gnorm, 1e-30))
    it = start_iter
    reason = "max iterations reached"
    while it < start_iter + max_iters:
        it += 1
        if opts.step_rule == "bb" and s_prev is not None:
            sy = float(np.sum(s_prev * y_prev))
            if sy > 0:
                step = float(np.sum(s_prev * s_prev)) / sy
            step = min(max(step, 1e-14), 1e14)
        elif opts.step_rule == "fixed":
            step = opts.step0

        t = step
        accepted = False
        for _ in range(opts.max_backtracks):
            x_try = x - t * g
            e_try = problem.energy(x_try)
            if e_try <= e - opts.armijo_c * t * gnorm * gnorm:
                accepted = True
                break
            t *= opts.backtrack
        if not accepted:
            reason = "line search stalled"
            it -= 1
            break

        e_new, g_new = problem.fg(x_try)
        s_prev = x_try - x
        y_prev = g_new - g
        x, e, g = x_try, e_new, g_new
        if opts.gauge_fix_interval > 0 and it % opts.gauge_fix_interval == 0:
            x = problem.gauge_project(x)
            e, g = problem.fg(x)
            s_prev = y_prev = None  # coordinates jumped; drop the BB memory
        gnorm = _norm(g)
        emit(it, e, gnorm, t)
        if gnorm <= opts.grad_tol * (1.0 + abs(e)):
            reason = "gradient below tolerance"
            break
        if target is not None and e <= target:
            reason = "target energy reached"
            break
    return x, e, g, it - start_iter, reason


def _minimize(problem: _Problem, state0, opts: MinimizeOptions):
    x0 = problem.pack(state0)
    trace = MinimizeTrace(seed=opts.seed)
    tf = None
    if opts.trace_path is not None:
        Path(opts.trace_path).parent.mkdir(parents=True, exist_ok=True)
        tf = open(opts.trace_path, "w")
        tf.write(TRACE_HEADER + "\n")
    try:
        e0 = problem.energy(x0)
        trace.initial_energy = e0
        x, e, g, iters, reason = _descend(problem, x0, opts, trace, tf)
        trace.n_iters = iters

        if opts.polish and problem.kind in ("ld", "agl", "f2d"):
            for _ in range(3):
                x_cl, max_mod = problem.clamp_modulus(x)
                if max_mod <= 1.0 + 1e-6:
                    break
                trace.polish_rounds += 1
                e_cl = problem.energy(x_cl)
                if e_cl <= e:
                    x, e = x_cl, e_cl
                    _, g = problem.fg(x)
                    break
                # clamping raised the energy: descend back below the pre-clamp level
                x, e, g, extra, _ = _descend(
                    problem, x_cl, opts, trace, tf,
                    start_iter=trace.n_iters, target=e, max_iters=50,
                )
                trace.n_iters += extra

        _, trace.max_modulus = problem.clamp_modulus(x)
        trace.final_energy = e
        trace.final_gradnorm = _norm(g)
        trace.converged = "gradient below tolerance" in reason
        trace.stop_reason = reason
    finally:
        if tf is not None:
            tf.close()
    return problem.unpack(x), trace


def minimize_ld(
    domain: DomainDiscretization, state0: LayeredConfiguration, opts: MinimizeOptions | None = None
) -> tuple[LayeredConfiguration, MinimizeTrace]:
    return _minimize(_Problem(domain, "ld"), state0, opts or MinimizeOptions())


def minimize_agl(
    domain: DomainDiscretization, state0: ContinuumConfiguration, opts: MinimizeOptions | None = None
) -> tuple[ContinuumConfiguration, MinimizeTrace]:
    return _minimize(_Problem(domain, "agl"), state0, opts or MinimizeOptions())


def random_ld_state(domain: DomainDiscretization, seed: int, link_noise: float = 0.05) -> LayeredConfiguration:
    """|u| uniform in (0.5, 1), uniform phases, background plus link noise."""
    p = domain.params
    rng = np.random.default_rng(seed)
    shape = (p.n_layers + 1, domain.n_x, domain.n_y)
    mod = rng.uniform(0.5, 1.0, shape)
    phase = rng.uniform(0.0, 2.0 * np.pi, shape)
    u = mod * np.exp(1j * phase)
    pot = Potential3D.background(domain)
    m1, m2, m3 = _boundary_link_masks(domain)
    pot.dev_a1 = link_noise * rng.standard_normal(pot.dev_a1.shape) * ~m1
    pot.dev_a2 = link_noise * rng.standard_normal(pot.dev_a2.shape) * ~m2
    pot.dev_a3 = link_noise * rng.standard_normal(pot.dev_a3.shape) * ~m3
    return LayeredConfiguration(u, pot)


def random_agl_state(domain: DomainDiscretization, seed: int, link_noise: float = 0.05) -> ContinuumConfiguration:
    rng = np.random.default_rng(seed)
    shape = (domain.n_x, domain.n_y, domain.n_zd)
    mod = rng.uniform(0.5, 1.0, shape)
    phase = rng.uniform(0.0, 2.0 * np.pi, shape)
    psi = mod * np.exp(1j * phase)
    pot = Potential3D.background(domain)
    m1, m2, m3 = _boundary_link_masks(domain)
    pot.dev_a1 = link_noise * rng.standard_normal(pot.dev_a1.shape) * ~m1
    pot.dev_a2 = link_noise * rng.standard_normal(pot.dev_a2.shape) * ~m2
    pot.dev_a3 = link_noise * rng.standard_normal(pot.dev_a3.shape) * ~m3
    return ContinuumConfiguration(psi, pot)


def gradient_check(
    domain: DomainDiscretization,
    kind: str,
    state,
    n_samples: int = 200,
    fd_step: float = 1.0e-6,
    seed: int = 0,
) -> dict:
    """Central finite differences against the analytic gradient.

    Errors are relative to max(|analytic|, |fd|, 1e-6 * max |gradient|), so a
    stationary state reports its roundoff floor instead of a large ratio.
    """
    problem = _Problem(domain, kind)
    x = problem.pack(state)
    _, g = problem.fg(x)
    rng = np.random.default_rng(seed)
    free = np.flatnonzero(np.concatenate([np.zeros(2 * problem.nu, dtype=bool), problem.pin]) == False)  # noqa: E712
    idx = rng.choice(free, size=min(n_samples, free.size), replace=False)
    gmax = float(np.max(np.abs(g))) if np.any(g) else 0.0
    floor = max(1e-6 * gmax, 1e-12)
    max_rel = 0.0
    max_abs = 0.0
    for i in idx:
        xp = x.copy()
        xp[i] += fd_step
        xm = x.copy()
        xm[i] -= fd_step
        fd = (problem.energy(xp) - problem.energy(xm)) / (2.0 * fd_step)
        err = abs(fd - g[i])
        max_abs = max(max_abs, err)
        max_rel = max(max_rel, err / max(abs(fd), abs(g[i]), floor))
    return {
        "kind": kind,
        "n_samples": int(idx.size),
        "fd_step": fd_step,
        "max_rel_error": max_rel,
        "max_abs_error": max_abs,
        "gradient_max": gmax,
    }
