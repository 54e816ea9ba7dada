"""Linear flow, Strang split-step evolution and the symmetry group.

The equation is ``i u_t + u_xy = |u|^p u`` (defocusing).  The free flow is the
Fourier multiplier ``exp(-i t xi eta)``; the nonlinear substep is the exact
pointwise phase rotation ``u <- exp(-i h |u|^p) u``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .grid import (FREQUENCY, Field, Grid2D, GridError, SpaceTimeTrace,
                   boundary_mass_fraction, fft_array, ifft_array, l2_norm, load_field,
                   save_field)


class EvolutionError(RuntimeError):
    """Raised when the evolution produces non-finite values."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class AliasingError(GridError):
    """Raised when a resampling would push mass past Nyquist or out of the box."""


# -- linear flow --------------------------------------------------------------

def linear_multiplier(grid: Grid2D, t: float) -> np.ndarray:
    XI, ETA = grid.freq_mesh()
    return np.exp(-1j * t * XI * ETA)


def linear_propagate(f: Field, t: float) -> Field:
    """Exact free flow ``exp(i t d_x d_y)``; the output keeps the input rep."""
    if t == 0:
        return f
    spec = f.frequency().data * linear_multiplier(f.grid, t)
    out = Field(f.grid, spec, FREQUENCY)
    return out if f.rep == FREQUENCY else out.physical()


def linear_trace(f: Field, times: np.ndarray) -> SpaceTimeTrace:
    """Free evolution sampled at uniformly spaced ``times``."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise GridError("need at least two times")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise GridError("times must be uniformly spaced")
    g = f.grid
    spec = f.frequency().data
    XI, ETA = g.freq_mesh()
    sym = XI * ETA
    snaps = [Field(g, ifft_array(g, spec * np.exp(-1j * t * sym))) for t in times]
    return SpaceTimeTrace(float(times[0]), float(dt), tuple(snaps))


# -- nonlinear evolution ------------------------------------------------------

@dataclass(frozen=True)
class EvolveConfig:
    p: int = 2
    dt: float = 1e-3
    nsteps: int = 100
    record_every: int = 10

    def __post_init__(self):
        if self.p not in (0, 2, 4):
            raise ValueError(f"p must be 0, 2 or 4, got {self.p}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if self.nsteps < 1 or self.record_every < 1:
            raise ValueError("nsteps and record_every must be positive")


def _mass(a: np.ndarray, cell: float) -> float:
    return math.fsum((np.abs(a) ** 2).ravel()) * cell


def nls_evolve(f: Field, cfg: EvolveConfig, t0: float = 0.0,
               tail_tol: Optional[float] = 1e-8) -> SpaceTimeTrace:
    """Strang splitting: half phase, exact linear step, half phase.

    Snapshots are recorded every ``record_every`` steps starting with the
    initial datum.  ``trace.info`` carries the mass record and the relative
    mass drift.
    """
    g = f.grid
    u = f.physical().data.copy()
    if tail_tol is not None:
        tail = boundary_mass_fraction(f.physical(), frac=2.0 / min(g.nx, g.ny))
        if tail > tail_tol:
            raise GridError(f"initial boundary mass fraction {tail:.3e} exceeds {tail_tol:.1e}")
    cell = g.dx * g.dy
    mult = linear_multiplier(g, cfg.dt)
    h = 0.5 * cfg.dt
    p = cfg.p

    def phase(a, tau):
        if p == 0:
            return a
        return a * np.exp(-1j * tau * np.abs(a) ** p)

    m0 = _mass(u, cell)
    snaps = [Field(g, u)]
    masses = [m0]
    pending_half = False
    for step in range(1, cfg.nsteps + 1):
        # the trailing half phase of the previous step is merged with this one
        u = phase(u, cfg.dt if pending_half else h)
        u = ifft_array(g, fft_array(g, u) * mult)
        pending_half = True
        if step % cfg.record_every == 0 or step == cfg.nsteps:
            u = phase(u, h)
            pending_half = False
            if not np.all(np.isfinite(u)):
                raise EvolutionError(f"non-finite values at step {step}", step)
            if step % cfg.record_every == 0:
                snaps.append(Field(g, u))
                masses.append(_mass(u, cell))
        elif step % 64 == 0 and not np.all(np.isfinite(u)):
            raise EvolutionError(f"non-finite values at step {step}", step)
    if len(snaps) < 2:
        snaps.append(Field(g, u))
        masses.append(_mass(u, cell))
        rec_dt = cfg.dt * cfg.nsteps
    else:
        rec_dt = cfg.dt * cfg.record_every
    drift = max(abs(m - m0) for m in masses) / m0 if m0 > 0 else 0.0
    info = {"p": p, "dt": cfg.dt, "nsteps": cfg.nsteps, "record_every": cfg.record_every,
            "masses": masses, "mass_drift": drift}
    return SpaceTimeTrace(t0, rec_dt, tuple(snaps), info)


def evolve_to(f: Field, p: int, t: float, nsteps: int) -> Field:
    """Terminal state of the split-step scheme after ``nsteps`` steps to time ``t``."""
    if t == 0:
        return f.physical()
    sign = 1.0 if t > 0 else -1.0
    if sign > 0:
        cfg = EvolveConfig(p=p, dt=t / nsteps, nsteps=nsteps, record_every=nsteps)
        return nls_evolve(f, cfg, tail_tol=None).snapshots[-1]
    # backward in time: conjugate, evolve forward, conjugate back
    fc = f.physical().with_data(np.conj(f.physical().data))
    cfg = EvolveConfig(p=p, dt=-t / nsteps, nsteps=nsteps, record_every=nsteps)
    out = nls_evolve(fc, cfg, tail_tol=None).snapshots[-1]
    return out.with_data(np.conj(out.data))


def self_convergence(f: Field, p: int, t: float, nsteps: int) -> dict:
    """Errors of ``nsteps`` and ``2*nsteps`` runs against a ``4*nsteps`` reference."""
    ref = evolve_to(f, p, t, 4 * nsteps)
    e1 = l2_norm(evolve_to(f, p, t, nsteps) - ref)
    e2 = l2_norm(evolve_to(f, p, t, 2 * nsteps) - ref)
    e_pair = l2_norm(evolve_to(f, p, t, nsteps) - evolve_to(f, p, t, 2 * nsteps))
    return {"err_dt": e1, "err_half": e2, "ratio": e1 / e2 if e2 > 0 else math.inf,
            "self_convergence": e_pair}


# -- symmetries ---------------------------------------------------------------

@dataclass(frozen=True)
class Translation:
    x0: float
    y0: float


@dataclass(frozen=True)
class Modulation:
    theta: float


@dataclass(frozen=True)
class Scaling:
    lam1: float
    lam2: float
    supercritical: bool = False

    def __post_init__(self):
        if not (self.lam1 > 0 and self.lam2 > 0):
            raise ValueError("scaling factors must be positive")

    @property
    def weight(self) -> float:
        e = 0.25 if self.supercritical else 0.5
        return (self.lam1 * self.lam2) ** e


@dataclass(frozen=True)
class Galilean:
    xi1: float
    xi2: float


@dataclass(frozen=True)
class PseudoConformal:
    t: float


SymmetryParams = Union[Translation, Modulation, Scaling, Galilean, PseudoConformal]


def translate(f: Field, x0: float, y0: float) -> Field:
    """``u(x - x0, y - y0)`` by an exact Fourier phase shift."""
    g = f.grid
    XI, ETA = g.freq_mesh()
    spec = f.frequency().data * np.exp(-1j * (XI * x0 + ETA * y0))
    out = Field(g, spec, FREQUENCY)
    return out if f.rep == FREQUENCY else out.physical()


def spectral_edge_fraction(f: Field, frac: float = 0.9) -> float:
    """Share of the spectral mass with |xi| or |eta| beyond ``frac`` of Nyquist."""
    g = f.grid
    a = np.abs(f.frequency().data) ** 2
    tot = a.sum()
    if tot == 0:
        return 0.0
    XI, ETA = g.freq_mesh()
    out = (np.abs(XI) > frac * g.xi_max) | (np.abs(ETA) > frac * g.eta_max)
    return float(a[out].sum() / tot)


def resample(f: Field, ax: float, bx: float, ay: float, by: float, tol: float = 1e-10,
             mass_tol: float = 1e-9) -> Field:
    """Spectrally evaluate ``u(ax*x + bx, ay*y + by)`` on the grid.

    Raises :class:`AliasingError` if the input carries spectral mass that the
    map pushes past Nyquist, or if the resampled field loses or gains mass
    (which signals truncation or periodic images).
    """
    g = f.grid
    spec = f.frequency().data
    # band check: frequencies scale by |a|
    XI, ETA = g.freq_mesh()
    a2 = np.abs(spec) ** 2
    tot = a2.sum()
    if tot == 0:
        return Field(g, np.zeros(g.shape))
    lim_x = g.xi_max / max(abs(ax), 1.0) * 0.95
    lim_y = g.eta_max / max(abs(ay), 1.0) * 0.95
    spill = a2[(np.abs(XI) > lim_x) | (np.abs(ETA) > lim_y)].sum() / tot
    if spill > tol:
        raise AliasingError(f"resampling pushes {spill:.2e} of the spectral mass past Nyquist")
    px = g.x * ax + bx
    py = g.y * ay + by
    Ex = np.exp(1j * np.outer(px, g.xi))
    Ey = np.exp(1j * np.outer(py, g.eta))
    data = Ex @ spec @ Ey.T * (g.dxi * g.deta / (2 * math.pi))
    out = Field(g, data)
    m_in = l2_norm(f) ** 2
    m_out = l2_norm(out) ** 2 * abs(ax * ay)
    if abs(m_out - m_in) > mass_tol * m_in:
        raise AliasingError(f"resampling changed the mass by {abs(m_out - m_in) / m_in:.2e} "
                            "(support leaves the box)")
    return out


def galilean_snapshot(u: Field, xi1: float, xi2: float, t: float = 0.0) -> Field:
    """Image of a time-``t`` snapshot under the Galilean boost.

    ``exp(-i t xi1 xi2) exp(i(x xi1 + y xi2)) u(x - xi2 t, y - xi1 t)``; the
    transport velocity is ``(xi2, xi1)``, the group velocity of the mode
    ``(xi1, xi2)`` for the operator ``d_x d_y``.
    """
    g = u.grid
    v = translate(u.physical(), xi2 * t, xi1 * t) if t != 0 else u.physical()
    X, Y = g.mesh()
    data = np.exp(-1j * t * xi1 * xi2) * np.exp(1j * (X * xi1 + Y * xi2)) * v.data
    return Field(g, data)


def pseudo_conformal(u: Field, t: float, tol: float = 1e-10) -> Field:
    """``exp(i x y / t) / (i t) * conj(u)(x/t, y/t)``.

    ``u`` is read as the snapshot at time ``1/t``; the output is the image
    solution at time ``t``.
    """
    if t == 0:
        raise ValueError("pseudo-conformal transform needs t != 0")
    g = u.grid
    uc = u.physical().with_data(np.conj(u.physical().data))
    w = resample(uc, 1.0 / t, 0.0, 1.0 / t, 0.0, tol=tol)
    X, Y = g.mesh()
    v = Field(g, np.exp(1j * X * Y / t) / (1j * t) * w.data)
    edge = spectral_edge_fraction(v, 0.9)
    if edge > tol:
        raise AliasingError(f"chirp exp(ixy/t) is under-resolved: edge fraction {edge:.2e}")
    return v


def apply_symmetry(f: Field, s: SymmetryParams, t: float = 0.0) -> Field:
    """Apply one symmetry to a snapshot taken at time ``t``.

    Scaling maps the time-``t`` snapshot to the image solution at time
    ``t / (lam1 lam2)``; the pseudo-conformal variant ignores ``t`` and uses
    its own parameter.
    """
    f = f.physical()
    if isinstance(s, Translation):
        return translate(f, s.x0, s.y0)
    if isinstance(s, Modulation):
        return f * np.exp(1j * s.theta)
    if isinstance(s, Scaling):
        return resample(f, s.lam1, 0.0, s.lam2, 0.0) * s.weight
    if isinstance(s, Galilean):
        return galilean_snapshot(f, s.xi1, s.xi2, t)
    if isinstance(s, PseudoConformal):
        return pseudo_conformal(f, s.t)
    raise TypeError(f"unknown symmetry {s!r}")


def pseudo_conformal_residual(g0: Field, p: int, t_a: float, t_b: float, nsteps: int) -> dict:
    """Check that the pseudo-conformal image of a numerical solution is one.

    ``g0`` is the solution at time ``1/t_b``.  It is evolved to ``1/t_a``,
    both snapshots are mapped, and the image at ``t_a`` is evolved to ``t_b``
    with the same scheme.  The mismatch with the mapped snapshot is the
    residual; it is compared with the scheme's self-convergence error on the
    same step count.
    """
    s0, s1 = 1.0 / t_b, 1.0 / t_a
    u1 = evolve_to(g0, p, s1 - s0, nsteps)
    v_b = pseudo_conformal(g0, t_b)
    v_a = pseudo_conformal(u1, t_a)
    v_b_num = evolve_to(v_a, p, t_b - t_a, nsteps)
    residual = l2_norm(v_b_num - v_b)
    sc = self_convergence(v_a, p, t_b - t_a, nsteps)
    return {"residual": residual, "self_convergence": sc["self_convergence"],
            "ratio": residual / sc["self_convergence"], "mass_change":
                abs(l2_norm(v_a) - l2_norm(u1)) / l2_norm(u1)}


# -- trace persistence ----------------------------------------------------------

def save_trace(directory, trace: SpaceTimeTrace, seed: Optional[int] = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for j, s in enumerate(trace.snapshots):
        name = f"snap_{j:05d}.field"
        save_field(d / name, s, seed=seed)
        names.append(name)
    info = trace.info
    manifest = {"t0": trace.t0, "dt": trace.dt, "nsteps": info.get("nsteps"),
                "p": info.get("p"), "mass_drift": info.get("mass_drift"),
                "masses": info.get("masses"), "snapshots": names}
    (d / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return d


def load_trace(directory) -> SpaceTimeTrace:
    d = Path(directory)
    m = json.loads((d / "manifest.json").read_text())
    snaps = tuple(load_field(d / n) for n in m["snapshots"])
    info = {k: m[k] for k in ("nsteps", "p", "mass_drift", "masses") if k in m}
    return SpaceTimeTrace(m["t0"], m["dt"], snaps, info)
