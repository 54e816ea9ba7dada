"""Norm functionals: space-time Lebesgue norms, anisotropic Sobolev, X_p,
refined sup-functionals and local smoothing.

Time integrals over the real line are truncated to the recorded window; for
``q > 3`` the missing tails are extrapolated with the free dispersive decay
``|u| ~ 1/|t|``, which makes the slice integral ``int |u|^q dx dy`` decay like
``|t|^(2-q)``.
"""

from __future__ import annotations

import csv
import json
import math
import time as _time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .dyadic import DyadicRect, annulus_multiplier, bump, dyadic_range, rect_multiplier
from .grid import Field, Grid2D, GridError, SpaceTimeTrace, ifft_array, l2_norm

XP_EXPONENT = 20.0 / 11.0


@dataclass(frozen=True)
class NormConfig:
    time_horizon: float = 8.0
    time_steps: int = 321
    rect_scale_range: Optional[Tuple[int, int]] = None
    tail_report: bool = True
    tail_tol: float = 1e-2

    def __post_init__(self):
        if not self.time_horizon > 0:
            raise ValueError("time_horizon must be positive")
        if self.time_steps < 3:
            raise ValueError("time_steps must be >= 3")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(-self.time_horizon, self.time_horizon, self.time_steps)


# -- space-time norms -------------------------------------------------------------

def trapezoid_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n, dt)
    w[0] = w[-1] = dt / 2
    return w


@dataclass
class LqReport:
    q: float
    value: float
    integral: float
    tail_estimate: float
    window: Tuple[float, float]
    last_slice_fraction: float

    @property
    def tail_fraction(self) -> float:
        tot = self.integral + self.tail_estimate
        return self.tail_estimate / tot if tot > 0 else 0.0


def slice_integrals(tr: SpaceTimeTrace, q: float) -> np.ndarray:
    """``int |u(t_j)|^q dx dy`` for every snapshot."""
    cell = tr.grid.dx * tr.grid.dy
    return np.array([np.sum(np.abs(s.data) ** q) * cell for s in tr.snapshots])


def spacetime_lq_report(tr: SpaceTimeTrace, q: float, tail: bool = True,
                        window: Optional[Tuple[float, float]] = None) -> LqReport:
    """Trapezoid-in-time, exact-sum-in-space quadrature of ``int |u|^q``.

    ``window`` restricts to a sub-interval of recorded times; the trace must
    cover it.  With ``tail`` and ``q > 3`` the integral beyond each end of the
    window is extrapolated as ``s_end * |t_end| / (q - 3)``.
    """
    if not q >= 1:
        raise GridError(f"q must be >= 1, got {q}")
    times = tr.times
    s = slice_integrals(tr, q)
    if window is not None:
        a, b = window
        eps = 1e-9 * tr.dt
        if a < times[0] - eps or b > times[-1] + eps:
            raise GridError(f"trace [{times[0]}, {times[-1]}] too short for window {window}")
        sel = (times >= a - eps) & (times <= b + eps)
        times, s = times[sel], s[sel]
        if times.size < 2:
            raise GridError("window holds fewer than two snapshots")
    return lq_from_slices(times, s, q, tail)


def spacetime_lq_norm(tr: SpaceTimeTrace, q: float, tail: bool = True,
                      window: Optional[Tuple[float, float]] = None) -> float:
    return spacetime_lq_report(tr, q, tail, window).value


def linear_slice_integrals(f: Field, times: np.ndarray, q: float) -> np.ndarray:
    """``int |exp(it d_x d_y) f|^q dx dy`` at each time, without storing snapshots."""
    g = f.grid
    XI, ETA = g.freq_mesh()
    sym = XI * ETA
    spec = f.frequency().data
    cell = g.dx * g.dy
    return np.array([np.sum(np.abs(ifft_array(g, spec * np.exp(-1j * t * sym))) ** q) * cell
                     for t in times])


def lq_from_slices(times: np.ndarray, s: np.ndarray, q: float, tail: bool = True) -> LqReport:
    """Same quadrature and tail rule as :func:`spacetime_lq_report` on given slices."""
    dt = times[1] - times[0]
    w = trapezoid_weights(times.size, dt)
    integral = math.fsum(w * s)
    tail_est = 0.0
    if tail and q > 3:
        if times[-1] > 0:
            tail_est += s[-1] * times[-1] / (q - 3)
        if times[0] < 0:
            tail_est += s[0] * (-times[0]) / (q - 3)
    tot = integral + tail_est
    last = max(s[0], s[-1]) * dt / tot if tot > 0 else 0.0
    return LqReport(q, tot ** (1.0 / q) if tot > 0 else 0.0, integral, tail_est,
                    (float(times[0]), float(times[-1])), float(last))


def strichartz_ratio(f: Field, cfg: NormConfig = NormConfig(), q: float = 4.0) -> dict:
    """``||exp(it d_x d_y) f||_{L^q_{x,y,t}} / ||f||_2`` by direct quadrature."""
    n = l2_norm(f.physical())
    if n == 0:
        raise GridError("zero-norm trial")
    times = cfg.times
    rep = lq_from_slices(times, linear_slice_integrals(f, times, q), q, cfg.tail_report)
    return {"ratio": float(rep.value / n), "value": float(rep.value), "l2": n,
            "tail_fraction": float(rep.tail_fraction), "tail_estimate": float(rep.tail_estimate)}


# -- anisotropic Sobolev ------------------------------------------------------------

def anisotropic_sobolev(f: Field, s: float) -> float:
    """``|| |d_x|^(s/2) |d_y|^(s/2) f ||_2``; values of ``s`` outside [0, 1) warn."""
    if not 0 <= s < 1:
        warnings.warn(f"s = {s} lies outside [0, 1)", stacklevel=2)
    g = f.grid
    XI, ETA = g.freq_mesh()
    w = (np.abs(XI) * np.abs(ETA)) ** s
    a = np.abs(f.frequency().data) ** 2
    return math.sqrt(math.fsum((w * a).ravel()) * g.dxi * g.deta)


# -- X_p ----------------------------------------------------------------------------

def default_scales(grid: Grid2D) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    """Rectangle scales resolved by the grid: at least one cell, at most the box."""
    kx = (math.ceil(math.log2(grid.dxi)), math.ceil(math.log2(grid.xi_max)))
    ky = (math.ceil(math.log2(grid.deta)), math.ceil(math.log2(grid.eta_max)))
    return kx, ky


def _split_scales(grid, scales):
    if scales is None:
        return default_scales(grid)
    if isinstance(scales[0], (tuple, list)):
        return tuple(scales[0]), tuple(scales[1])
    return tuple(scales), tuple(scales)


def _sat(a: np.ndarray) -> np.ndarray:
    s = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    s[1:, 1:] = np.cumsum(np.cumsum(a, axis=0), axis=1)
    return s


def _axis_bounds(coords: np.ndarray, k: int, half: float = 1.0):
    """Index ranges ``[i0, i1)`` of grid points inside ``[2^k(n-half), 2^k(n+half)]``."""
    h = math.ldexp(1.0, k)
    ns = np.arange(math.ceil(coords[0] / h - half), math.floor(coords[-1] / h + half) + 1)
    i0 = np.searchsorted(coords, (ns - half) * h, side="left")
    i1 = np.searchsorted(coords, (ns + half) * h, side="right")
    return ns, i0, i1


def _box_sums(S, i0, i1, j0, j1) -> np.ndarray:
    out = (S[i1[:, None], j1[None, :]] - S[i0[:, None], j1[None, :]]
           - S[i1[:, None], j0[None, :]] + S[i0[:, None], j0[None, :]])
    return np.maximum(out, 0.0)


@dataclass
class XpTerms:
    """Per-rectangle terms ``|R|^(-1/20) ||g 1_R||_{20/11}`` of one scale pair."""

    k: int
    p: int
    n: np.ndarray
    m: np.ndarray
    terms: np.ndarray


def xp_terms(f: Field, scales=None) -> List[XpTerms]:
    """All X_p terms of ``g = f-hat`` over the scale box, in ``(k, p)`` order."""
    g = f.grid
    a = np.abs(f.frequency().data)
    top = a.max()
    (kmin, kmax), (pmin, pmax) = _split_scales(g, scales)
    if kmin > kmax or pmin > pmax:
        raise ValueError("empty scale range")
    out = []
    if top == 0:
        return out
    r = XP_EXPONENT
    S = _sat((a / top) ** r * (g.dxi * g.deta))
    for k in range(kmin, kmax + 1):
        ns, i0, i1 = _axis_bounds(g.xi, k)
        for p in range(pmin, pmax + 1):
            ms, j0, j1 = _axis_bounds(g.eta, p)
            box = _box_sums(S, i0, i1, j0, j1)
            terms = top * box ** (1.0 / r) * math.ldexp(1.0, k + p + 2) ** (-1.0 / 20.0)
            out.append(XpTerms(k, p, ns, ms, terms))
    return out


def _lp_aggregate(values: np.ndarray, p: float) -> float:
    m = values.max() if values.size else 0.0
    if m == 0:
        return 0.0
    return float(m * math.fsum(((values / m) ** p).ravel()) ** (1.0 / p))


def xp_norm(f: Field, p: float, scales=None) -> float:
    """X_p norm of the Fourier transform of ``f`` with sharp rectangle indicators.

    ``(sum_R |R|^(-p/20) ||f-hat 1_R||_{20/11}^p)^(1/p)`` over the overlapping
    family of rectangles at the given scales (see :func:`default_scales`).
    """
    if not p > 2:
        raise ValueError(f"X_p needs p > 2, got {p}")
    parts = xp_terms(f, scales)
    if not parts:
        return 0.0
    vals = np.concatenate([t.terms.ravel() for t in parts])
    return _lp_aggregate(vals, p)


def xp_norms(f: Field, ps: Sequence[float], scales=None) -> List[float]:
    """Several X_p norms from one pass over the rectangles."""
    for p in ps:
        if not p > 2:
            raise ValueError(f"X_p needs p > 2, got {p}")
    parts = xp_terms(f, scales)
    if not parts:
        return [0.0] * len(ps)
    vals = np.concatenate([t.terms.ravel() for t in parts])
    return [_lp_aggregate(vals, p) for p in ps]


# -- refined sup-functionals -------------------------------------------------------

@dataclass(frozen=True)
class Witness:
    rect: Optional[DyadicRect]
    x: float
    y: float
    t: float
    M: Optional[float] = None
    N: Optional[float] = None


def _times_array(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.size == 0:
        raise ValueError("empty time range")
    return t


def _time_phases(grid: Grid2D, times: np.ndarray, budget: int = 1 << 23):
    """Cached ``exp(-i t xi eta)`` for all times, or None when it would not fit ``budget``."""
    if times.size * grid.nx * grid.ny > budget:
        return None
    XI, ETA = grid.freq_mesh()
    return np.exp(-1j * times[:, None, None] * (XI * ETA)[None])


def _sup_over_times(grid: Grid2D, spec: np.ndarray, times: np.ndarray, chunk: int = 16,
                    phases: Optional[np.ndarray] = None):
    """Max ``|exp(it d_x d_y) u|`` over grid points and times; returns (val, t_idx, i, j)."""
    XI, ETA = grid.freq_mesh()
    sym = XI * ETA
    best = (-1.0, 0, 0, 0)
    chunk = max(1, min(chunk, (1 << 21) // (grid.nx * grid.ny)))
    for s0 in range(0, times.size, chunk):
        ts = times[s0:s0 + chunk]
        ph = (phases[s0:s0 + chunk] if phases is not None
              else np.exp(-1j * ts[:, None, None] * sym[None]))
        a = np.abs(ifft_array(grid, spec[None] * ph))
        idx = int(np.argmax(a))
        ti, i, j = np.unravel_index(idx, a.shape)
        v = float(a[ti, i, j])
        if v > best[0]:
            best = (v, s0 + int(ti), int(i), int(j))
    return best


def refined_sup_candidates(f: Field, scales=None, mode: str = "smooth"):
    """Rectangles with upper bounds for :func:`refined_sup_functional`.

    The bound ``|R|^(-1/2) (2 pi)^(-1) int |f-hat| phi_R`` dominates
    ``|R|^(-1/2) |exp(it d_x d_y) P_R f|`` at every point and time.  The bump
    is separable, so all bounds of one scale pair come from two matrix
    products.  Rectangles are listed in ``(k, p, n, m)`` order.
    """
    g = f.grid
    A = np.abs(f.frequency().data) * (g.dxi * g.deta / (2 * math.pi))
    (kmin, kmax), (pmin, pmax) = _split_scales(g, scales)
    if kmin > kmax or pmin > pmax:
        raise ValueError("empty scale range")

    def axis_weights(coords, k):
        # sparse rows: the bump of rectangle n only touches |xi - n h| < 2h
        h = math.ldexp(1.0, k)
        ns = np.arange(math.ceil(coords[0] / h - 1), math.floor(coords[-1] / h + 1) + 1)
        reach = 2.0 if mode == "smooth" else 1.0
        i0 = np.searchsorted(coords, (ns - reach) * h, side="left")
        i1 = np.searchsorted(coords, (ns + reach) * h, side="right")
        counts = i1 - i0
        rows = np.repeat(np.arange(ns.size), counts)
        cols = np.concatenate([np.arange(a, b) for a, b in zip(i0, i1)]) if rows.size else rows
        s = (coords[cols] - ns[rows] * h) / h
        vals = bump(s) if mode == "smooth" else (np.abs(s) <= 1).astype(float)
        return ns, sparse.csr_matrix((vals, (rows, cols)), shape=(ns.size, coords.size))

    rects, bounds = [], []
    ycache = {p: axis_weights(g.eta, p) for p in range(pmin, pmax + 1)}
    for k in range(kmin, kmax + 1):
        ns, bx = axis_weights(g.xi, k)
        bxA = bx @ A
        for p in range(pmin, pmax + 1):
            ms, by = ycache[p]
            box = (by @ bxA.T).T * math.ldexp(1.0, k + p + 2) ** -0.5
            nn, mm = np.meshgrid(ns, ms, indexing="ij")
            rects.append(np.stack([np.full(nn.size, k), nn.ravel(), np.full(nn.size, p),
                                   mm.ravel()], axis=1))
            bounds.append(box.ravel())
    return np.concatenate(rects), np.concatenate(bounds)


def refined_sup_functional(f: Field, scales=None, times=(0.0,), mode: str = "smooth",
                           floor: float = 0.0) -> Tuple[float, Witness]:
    """``sup_R |R|^(-1/2) |exp(it d_x d_y) P_R f(x, y)|`` over rectangles, grid, times.

    Branch and bound: rectangles are visited by decreasing upper bound and the
    search stops once the bound falls below the best value.  Ties go to the
    earliest rectangle in ``(k, p, n, m)`` order, then the earliest time and
    grid point.  Rectangles whose bound is at or below ``floor`` are skipped,
    so a returned value at or below ``floor`` only certifies ``sup <= floor``.
    """
    times = _times_array(times)
    g = f.grid
    spec = f.frequency().data
    keys, bounds = refined_sup_candidates(f, scales, mode)
    order = np.lexsort((np.arange(bounds.size), -bounds))
    phases = _time_phases(g, times)
    best_v, best_i, best_w = 0.0, None, None
    for idx in order:
        b = bounds[idx]
        if b < best_v or b == 0 or b <= floor:
            break
        k, n, p, m = (int(v) for v in keys[idx])
        r = DyadicRect(k, n, p, m)
        v, ti, i, j = _sup_over_times(g, spec * rect_multiplier(g, r, mode), times,
                                      phases=phases)
        v *= r.area ** -0.5
        if v > best_v or (v == best_v and best_i is not None and idx < best_i):
            best_v, best_i = v, idx
            best_w = Witness(r, float(g.x[i]), float(g.y[j]), float(times[ti]))
    if best_w is None:
        return 0.0, Witness(None, 0.0, 0.0, float(times[0]))
    return best_v, best_w


def q_sup_functional(f: Field, times=(0.0,), exponent: float = 0.25, Ms=None, Ns=None,
                     return_witness: bool = False):
    """``sup (MN)^(-exponent) |exp(it d_x d_y) Q_{M,N} f|`` over dyadic M, N, grid, times."""
    times = _times_array(times)
    g = f.grid
    spec = f.frequency().data
    Ms = dyadic_range(g.dxi, g.xi_max) if Ms is None else list(Ms)
    Ns = dyadic_range(g.deta, g.eta_max) if Ns is None else list(Ns)
    if not Ms or not Ns:
        raise ValueError("empty frequency range")
    a = np.abs(spec) * (g.dxi * g.deta / (2 * math.pi))
    cands = []
    for M in Ms:
        for N in Ns:
            mult = annulus_multiplier(g, M, N)
            cands.append((float(np.sum(a * mult)) * (M * N) ** -exponent, M, N, mult))
    order = sorted(range(len(cands)), key=lambda i: (-cands[i][0], i))
    best_v, best_w = 0.0, Witness(None, 0.0, 0.0, float(times[0]))
    for i in order:
        b, M, N, mult = cands[i]
        if b < best_v or b == 0:
            break
        v, ti, ii, jj = _sup_over_times(g, spec * mult, times)
        v *= (M * N) ** -exponent
        if v > best_v:
            best_v = v
            best_w = Witness(None, float(g.x[ii]), float(g.y[jj]), float(times[ti]), M, N)
    return (best_v, best_w) if return_witness else best_v


# -- local smoothing --------------------------------------------------------------

def local_smoothing_norm(f: Field, M: float, N: float, axis: str = "x", times=None,
                         chunk: int = 32) -> float:
    """``sup_x || Q_{M,N} exp(it d_x d_y) f (x, .) ||_{L^2_{y,t}}`` (axis ``x``).

    With ``axis='y'`` the roles of the variables swap: sup over ``y`` of the
    ``L^2_{x,t}`` norm.  ``times`` must be uniformly spaced; the time integral
    is the trapezoid rule over them.
    """
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    times = _times_array(times)
    if times.size < 2:
        raise ValueError("local smoothing needs at least two times")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("times must be uniformly spaced")
    g = f.grid
    spec = f.frequency().data * annulus_multiplier(g, M, N)
    if not np.any(spec):
        return 0.0
    w = trapezoid_weights(times.size, dt)
    XI, ETA = g.freq_mesh()
    sym = XI * ETA
    lines = np.zeros(g.nx if axis == "x" else g.ny)
    other = 1 if axis == "x" else 0
    step = g.dy if axis == "x" else g.dx
    for s0 in range(0, times.size, chunk):
        ts = times[s0:s0 + chunk]
        u = ifft_array(g, spec[None] * np.exp(-1j * ts[:, None, None] * sym[None]))
        lines += np.einsum("t,tl->l", w[s0:s0 + chunk],
                           np.sum(np.abs(u) ** 2, axis=1 + other)) * step
    return float(math.sqrt(lines.max()))


# -- sweep export ---------------------------------------------------------------------

@dataclass
class SweepRow:
    functional: str
    params: dict
    value: float
    tail_estimate: float = 0.0
    runtime_ms: float = 0.0


def timed(functional: str, params: dict, fn, *args, **kwargs) -> SweepRow:
    t0 = _time.perf_counter()
    out = fn(*args, **kwargs)
    ms = (_time.perf_counter() - t0) * 1e3
    if isinstance(out, LqReport):
        return SweepRow(functional, params, out.value, out.tail_estimate, ms)
    if isinstance(out, tuple):
        out = out[0]
    return SweepRow(functional, params, float(out), 0.0, ms)


def write_sweep_csv(path, rows: Iterable[SweepRow], reference: str = "",
                    runtime: bool = True) -> Path:
    """Tidy CSV; the first line names what the sweep measures.

    ``runtime=False`` drops the timing column so that reruns are byte-identical.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if reference:
            fh.write(f"# reference: {reference}\n")
        w = csv.writer(fh)
        head = ["functional", "params", "value", "tail_estimate"]
        w.writerow(head + ["runtime_ms"] if runtime else head)
        for r in rows:
            row = [r.functional, json.dumps(r.params, sort_keys=True), repr(r.value),
                   repr(r.tail_estimate)]
            w.writerow(row + [f"{r.runtime_ms:.3f}"] if runtime else row)
    return path
