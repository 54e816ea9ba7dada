"""Profile decomposition at desk scale.

A bubble is ``w * g(exp(it d_x d_y) phi)`` where the group element ``g`` acts by

    g phi (x, y) = (lam1 lam2)^(-1/2) exp(i(xi1 x + xi2 y)) phi((x - x0)/lam1, (y - y0)/lam2).

Profiles ``phi`` live on their own normalized grid; :func:`apply_group` maps
between that grid and the physical one by exact spectral evaluation, so the
two boxes may differ by large scale factors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .dyadic import DyadicRect, bump, rect_multiplier
from .grid import (Field, Grid2D, SpaceTimeTrace, fft_array, ifft_array, l2_norm,
                   load_field, make_grid, save_field, zero_field)
from .norms import lq_from_slices, linear_slice_integrals, refined_sup_functional
from .propagator import AliasingError, linear_propagate, spectral_edge_fraction

PROFILE_GRID = make_grid(128, 128, 24.0, 24.0)
BUBBLE_GRID = (8192, 64, 256.0, 24.0)


def _wrap(d: np.ndarray, length: float) -> np.ndarray:
    """Nearest periodic image of a displacement."""
    return (d + length / 2) % length - length / 2


# -- profiles and the group action --------------------------------------------------

@dataclass(frozen=True)
class Profile:
    phi: Field
    t: float
    x0: float
    y0: float
    xi: Tuple[float, float]
    lam1: float
    lam2: float

    def __post_init__(self):
        if not (self.lam1 > 0 and self.lam2 > 0):
            raise ValueError(f"scales must be positive, got ({self.lam1}, {self.lam2})")
        n = l2_norm(self.phi)
        if abs(n - 1.0) > 1e-8:
            raise ValueError(f"profile must have unit L2 norm, got {n}")
        object.__setattr__(self, "xi", (float(self.xi[0]), float(self.xi[1])))

    def params(self) -> dict:
        return {"t": self.t, "x0": self.x0, "y0": self.y0, "xi": list(self.xi),
                "lam1": self.lam1, "lam2": self.lam2}


@dataclass(frozen=True)
class SupercriticalProfile:
    """Profile for the scale-invariant Sobolev space: no frequency parameter.

    The group acts by ``(lam1 lam2)^(-1/4) phi((x - x0)/lam1, (y - y0)/lam2)``,
    i.e. the inverse map carries the weight ``(lam1 lam2)^(1/4)``.
    """

    phi: Field
    t: float
    x0: float
    y0: float
    lam1: float
    lam2: float

    weight_exponent = 0.25

    def __post_init__(self):
        if not (self.lam1 > 0 and self.lam2 > 0):
            raise ValueError(f"scales must be positive, got ({self.lam1}, {self.lam2})")

    @property
    def xi(self) -> Tuple[float, float]:
        return (0.0, 0.0)


AnyProfile = Union[Profile, SupercriticalProfile]


def _group_exponent(p) -> float:
    return 0.25 if isinstance(p, SupercriticalProfile) else 0.5


def _spectral_eval(f: Field, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Band-limited interpolant of ``f`` at the tensor points ``px x py``."""
    g = f.grid
    spec = f.frequency().data
    Ex = np.exp(1j * np.outer(px, g.xi))
    Ey = np.exp(1j * np.outer(py, g.eta))
    return Ex @ spec @ Ey.T * (g.dxi * g.deta / (2 * math.pi))


def _check_mass(out: Field, ref: float, scale: float, mass_tol: float, what: str):
    m = l2_norm(out) ** 2 * scale
    if ref == 0:
        return
    if abs(m - ref) > mass_tol * ref:
        raise AliasingError(f"{what} changed the mass by {abs(m - ref) / ref:.2e} "
                            "(support leaves a box or is under-resolved)")


def apply_group(p: AnyProfile, f: Field, target: Optional[Grid2D] = None,
                tol: float = 1e-10, mass_tol: float = 1e-10) -> Field:
    """``g f`` for the group element carried by ``p`` (``p.phi`` is not used).

    ``f`` lives on the profile grid, the result on ``target`` (default: the
    same grid).  The bubble is placed at the nearest periodic image of
    ``(x0, y0)``, so it wraps correctly on the target torus.
    """
    src = f.grid
    tg = src if target is None else target
    a = _group_exponent(p)
    sx = _wrap(tg.x - p.x0, tg.lx)
    sy = _wrap(tg.y - p.y0, tg.ly)
    px, py = sx / p.lam1, sy / p.lam2
    inside_x = (px >= src.x[0]) & (px < src.x[0] + src.lx)
    inside_y = (py >= src.y[0]) & (py < src.y[0] + src.ly)
    vals = _spectral_eval(f, px, py) * np.outer(inside_x, inside_y)
    xi1, xi2 = p.xi
    mod = np.outer(np.exp(1j * xi1 * (p.x0 + sx)), np.exp(1j * xi2 * (p.y0 + sy)))
    out = Field(tg, vals * mod * (p.lam1 * p.lam2) ** -a)
    if a == 0.5:
        _check_mass(out, l2_norm(f) ** 2, 1.0, mass_tol, "group action")
    edge = spectral_edge_fraction(out, 0.9)
    if edge > tol:
        raise AliasingError(f"transformed field reaches the Nyquist band: edge fraction {edge:.2e}")
    return out


def apply_group_inverse(p: AnyProfile, h: Field, profile_grid: Optional[Grid2D] = None,
                        tol: float = 1e-10, mass_tol: float = 1e-10) -> Field:
    """``g^{-1} h``: demodulate, rescale and recenter onto ``profile_grid``."""
    tg = h.grid
    pg = tg if profile_grid is None else profile_grid
    a = _group_exponent(p)
    xi1, xi2 = p.xi
    # demodulate with the seam opposite to the bubble centre
    sx = _wrap(tg.x - p.x0, tg.lx)
    sy = _wrap(tg.y - p.y0, tg.ly)
    demod = h.physical().data * np.outer(np.exp(-1j * xi1 * (p.x0 + sx)),
                                         np.exp(-1j * xi2 * (p.y0 + sy)))
    d = Field(tg, demod)
    ux, uy = p.lam1 * pg.x, p.lam2 * pg.y
    inside = np.outer(np.abs(ux) <= tg.lx / 2, np.abs(uy) <= tg.ly / 2)
    vals = _spectral_eval(d, p.x0 + ux, p.y0 + uy) * inside
    out = Field(pg, vals * (p.lam1 * p.lam2) ** a)
    if a == 0.5:
        _check_mass(out, l2_norm(h) ** 2, 1.0, mass_tol, "inverse group action")
    edge = spectral_edge_fraction(out, 0.9)
    if edge > tol:
        raise AliasingError(f"profile reaches the Nyquist band: edge fraction {edge:.2e}")
    return out


def bubble(p: AnyProfile, target: Grid2D, tol: float = 1e-10, mass_tol: float = 1e-10) -> Field:
    """``g(exp(it d_x d_y) phi)`` on ``target``."""
    return apply_group(p, linear_propagate(p.phi, p.t), target, tol, mass_tol)


def synthesize_bubbles(specs: Sequence[Tuple[complex, AnyProfile]], grid: Grid2D,
                       tol: float = 1e-10, mass_tol: float = 1e-10) -> Field:
    out = zero_field(grid)
    for w, p in specs:
        out = out + bubble(p, grid, tol, mass_tol) * complex(w)
    return out


def gaussian_profile_field(grid: Grid2D = PROFILE_GRID, mu: float = 0.0) -> Field:
    """Unit-mass ``exp(-(s^2 + r^2)/2 + i mu s r)`` on a profile grid."""
    X, Y = grid.mesh()
    f = Field(grid, np.exp(-(X ** 2 + Y ** 2) / 2 + 1j * mu * X * Y))
    return f * (1.0 / l2_norm(f))


# -- orthogonality --------------------------------------------------------------------

def orthogonality_score(pj: AnyProfile, pk: AnyProfile) -> float:
    """Divergence score of two parameter sets, written exactly as the condition reads.

    The Galilean-corrected position terms use the time and scales of ``pj``
    only, so the score is not symmetric in general.
    """
    l1j, l2j, l1k, l2k = pj.lam1, pj.lam2, pk.lam1, pk.lam2
    (a1, a2), (b1, b2) = pj.xi, pk.xi
    s = abs(math.log(l1j / l1k)) + abs(math.log(l2j / l2k))
    s += abs(pj.t * l1j * l2j - pk.t * l1k * l2k) / math.sqrt(l1j * l2j * l1k * l2k)
    s += math.sqrt(l1j * l1k) * abs(a1 - b1) + math.sqrt(l2j * l2k) * abs(a2 - b2)
    s += abs(pj.x0 - pk.x0 - 2 * pj.t * (l1j * l2j) * (a1 - b1)) / math.sqrt(l1j * l1k)
    s += abs(pj.y0 - pk.y0 - 2 * pj.t * (l1j * l2j) * (a2 - b2)) / math.sqrt(l2j * l2k)
    return s


def pairwise_scores(profiles: Sequence[AnyProfile]) -> Dict[str, float]:
    return {f"{j},{k}": orthogonality_score(pj, pk)
            for j, pj in enumerate(profiles) for k, pk in enumerate(profiles) if j != k}


def orthogonal_bubble_specs(seed: int, count: int = 3, min_score: float = 1e3,
                            grid: Optional[Grid2D] = None, profile_grid: Grid2D = PROFILE_GRID,
                            max_tries: int = 1000) -> List[Tuple[complex, Profile]]:
    """Random Gaussian bubbles whose ordered pairwise scores all exceed ``min_score``.

    Bubbles are wide in x (lam1 in [16, 24]) and spread along xi1 by 80, which
    makes the frequency term alone exceed 10^3.  Positions, the remaining
    frequencies, concentration times and complex weights are random.
    """
    grid = make_grid(*BUBBLE_GRID) if grid is None else grid
    rng = np.random.default_rng(seed)
    phi = gaussian_profile_field(profile_grid)
    centers = 80.0 * (np.arange(count) - (count - 1) / 2)
    for _ in range(max_tries):
        specs = []
        for c in rng.permutation(centers):
            lam1, lam2 = rng.uniform(16, 24), rng.uniform(1, 2)
            xi = (c + rng.uniform(-2, 2), rng.uniform(-1, 1))
            tstar = rng.uniform(-1, 1)
            x0 = rng.uniform(-grid.lx / 2, grid.lx / 2)
            y0 = rng.uniform(-grid.ly / 2, grid.ly / 2)
            w = rng.uniform(0.5, 1.5) * np.exp(2j * math.pi * rng.uniform())
            # concentration at tstar, located at (x0, y0) + (xi2, xi1) tstar
            specs.append((complex(w), Profile(phi, -tstar / (lam1 * lam2), x0, y0, xi, lam1, lam2)))
        scores = pairwise_scores([p for _, p in specs])
        if min(scores.values()) > min_score:
            return specs
    raise RuntimeError(f"no family with scores above {min_score} in {max_tries} draws")


# -- extraction -----------------------------------------------------------------------

class NoBubble(Exception):
    """The refined sup-functional is at or below the extraction floor."""

    def __init__(self, value: float, floor: float):
        super().__init__(f"no extractable bubble: refined sup {value:.3e} <= floor {floor:.3e}")
        self.value = value
        self.floor = floor


@dataclass(frozen=True)
class ExtractConfig:
    times: Tuple[float, ...] = tuple(np.linspace(-2.0, 2.0, 9))
    scales: Optional[tuple] = None
    profile_grid: Grid2D = PROFILE_GRID
    freq_window: float = 8.0     # flat half-width, in rectangle half-widths
    space_window: float = 8.0    # flat half-width, in units of lam
    refine_time: bool = True
    floor: float = 0.0
    mass_tol: float = 1e-6
    proxy_horizon: float = 4.0
    proxy_steps: int = 33


@dataclass
class Extraction:
    weight: complex
    profile: Profile
    remainder: Field
    bubble: Field
    sup_value: float
    rect: DyadicRect
    witness: Tuple[float, float, float]   # (x*, y*, t*)


def _peak(g: Grid2D, spec: np.ndarray, t: float):
    XI, ETA = g.freq_mesh()
    a = np.abs(ifft_array(g, spec * np.exp(-1j * t * XI * ETA)))
    i = int(np.argmax(a))
    return float(a.flat[i]), np.unravel_index(i, a.shape)


def _refine_time(g: Grid2D, spec_r: np.ndarray, times: np.ndarray, ti: int):
    lo = times[max(ti - 1, 0)]
    hi = times[min(ti + 1, times.size - 1)]
    t0 = float(times[ti])
    v0, ij0 = _peak(g, spec_r, t0)
    if hi <= lo:
        return t0, v0, ij0
    res = minimize_scalar(lambda t: -_peak(g, spec_r, t)[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-4 * (hi - lo)})
    v1, ij1 = _peak(g, spec_r, float(res.x))
    if v1 > v0:
        return float(res.x), v1, ij1
    return t0, v0, ij0


def extract_one(f: Field, cfg: ExtractConfig = ExtractConfig()) -> Extraction:
    """Extract the bubble sitting on the witness of the refined sup-functional.

    The witness rectangle fixes the scales and frequency centre; the maximizing
    point and time fix the concentration point.  The piece that is inverted is
    ``f`` smoothly windowed around the witness in frequency (``freq_window``
    rectangle widths) and, at the concentration time, in space
    (``space_window`` scales).  The weight is the projection coefficient of
    ``f`` onto the synthesized unit bubble, so the remainder never grows.

    Raises :class:`NoBubble` when the sup is at or below ``cfg.floor``.
    """
    g = f.grid
    times = np.asarray(cfg.times, dtype=float)
    value, w = refined_sup_functional(f, cfg.scales, times, floor=cfg.floor)
    if w.rect is None or value <= cfg.floor:
        raise NoBubble(value, cfg.floor)
    r = w.rect
    spec = f.frequency().data
    ti = int(np.argmin(np.abs(times - w.t)))
    if cfg.refine_time and times.size > 1:
        tstar, _, (i, j) = _refine_time(g, spec * rect_multiplier(g, r), times, ti)
        xs, ys = float(g.x[i]), float(g.y[j])
    else:
        tstar, xs, ys = w.t, w.x, w.y
    lam1, lam2 = 1.0 / r.lx, 1.0 / r.ly
    xi1, xi2 = r.cx, r.cy

    # frequency window, evolve to the concentration time, space window
    wf = np.outer(bump((g.xi - xi1) / (cfg.freq_window * r.lx)),
                  bump((g.eta - xi2) / (cfg.freq_window * r.ly)))
    XI, ETA = g.freq_mesh()
    v = ifft_array(g, spec * wf * np.exp(-1j * tstar * XI * ETA))
    ws = np.outer(bump(_wrap(g.x - xs, g.lx) / (cfg.space_window * lam1)),
                  bump(_wrap(g.y - ys, g.ly) / (cfg.space_window * lam2)))
    piece = Field(g, v * ws)

    # the concentrated state is g(x*, xi, lam) phi up to the Galilean phase
    at_star = Profile(_unit(cfg.profile_grid), 0.0, xs, ys, (xi1, xi2), lam1, lam2)
    phi = apply_group_inverse(at_star, piece, cfg.profile_grid, tol=cfg.mass_tol,
                              mass_tol=cfg.mass_tol) * np.exp(1j * tstar * xi1 * xi2)
    n = l2_norm(phi)
    if n == 0:
        raise NoBubble(0.0, cfg.floor)
    prof = Profile(phi * (1.0 / n), -tstar / (lam1 * lam2), xs - xi2 * tstar, ys - xi1 * tstar,
                   (xi1, xi2), lam1, lam2)
    unit = bubble(prof, g, tol=cfg.mass_tol, mass_tol=cfg.mass_tol)
    fp = f.physical()
    weight = complex(np.vdot(unit.data, fp.data) / np.vdot(unit.data, unit.data))
    b = unit * weight
    return Extraction(weight, prof, fp - b, b, value, r, (xs, ys, tstar))


def _unit(grid: Grid2D) -> Field:
    # placeholder profile for parameter-only group elements
    data = np.zeros(grid.shape, dtype=complex)
    data[grid.nx // 2, grid.ny // 2] = 1.0 / math.sqrt(grid.dx * grid.dy)
    return Field(grid, data)


# -- decomposition ----------------------------------------------------------------------

@dataclass
class Decomposition:
    grid: Grid2D
    profiles: List[Tuple[complex, Profile]]
    remainder: Field
    diagnostics: dict = field(default_factory=dict)
    mass_tol: float = 1e-6

    def bubbles(self) -> List[Field]:
        return [bubble(p, self.grid, self.mass_tol, self.mass_tol) * complex(w)
                for w, p in self.profiles]

    def reconstruct(self) -> Field:
        out = self.remainder
        for b in reversed(self.bubbles()):
            out = out + b
        return out


def _l4_proxy(f: Field, horizon: float, steps: int) -> Tuple[float, float]:
    n = l2_norm(f)
    if n == 0:
        return 0.0, 0.0
    times = np.linspace(-horizon, horizon, steps)
    rep = lq_from_slices(times, linear_slice_integrals(f, times, 4.0), 4.0, tail=False)
    return float(rep.value), float(rep.value / n)


def profile_decompose(f: Field, Jmax: int, eps: Optional[float] = None,
                      cfg: ExtractConfig = ExtractConfig()) -> Decomposition:
    """Peel bubbles off ``f`` until ``Jmax`` are found or the refined sup drops below ``eps``.

    ``eps`` defaults to ``1e-3`` times the refined sup of ``f`` itself.  The
    remainder is ``f`` minus the synthesized bubbles, subtracted in order.
    """
    if Jmax < 1:
        raise ValueError("Jmax must be >= 1")
    times = np.asarray(cfg.times, dtype=float)
    sup0 = refined_sup_functional(f, cfg.scales, times)[0]
    if eps is None:
        eps = 1e-3 * sup0
    if not eps > 0:
        raise ValueError("eps must be positive")
    step_cfg = ExtractConfig(**{**cfg.__dict__, "floor": eps})
    rem = f.physical()
    found: List[Tuple[complex, Profile]] = []
    norms = [l2_norm(rem)]
    stop = "Jmax"
    for _ in range(Jmax):
        try:
            ex = extract_one(rem, step_cfg)
        except NoBubble:
            stop = "floor"
            break
        found.append((ex.weight, ex.profile))
        rem = ex.remainder
        norms.append(l2_norm(rem))
    else:
        try:
            if refined_sup_functional(rem, cfg.scales, times, floor=eps)[0] <= eps:
                stop = "floor"
        except ValueError:
            pass
    total = l2_norm(f) ** 2
    parts = sum(abs(w) ** 2 * l2_norm(p.phi) ** 2 for w, p in found)
    rem_mass = l2_norm(rem) ** 2
    l4, ratio = _l4_proxy(rem, cfg.proxy_horizon, cfg.proxy_steps)
    diag = {
        "count": len(found),
        "stop": stop,
        "eps": eps,
        "input_sup": sup0,
        "input_mass": total,
        "remainder_mass": rem_mass,
        "remainder_mass_fraction": rem_mass / total if total else 0.0,
        "decoupling_defect": abs(total - parts - rem_mass),
        "decoupling_defect_fraction": abs(total - parts - rem_mass) / total if total else 0.0,
        "remainder_l4": l4,
        "remainder_l4_ratio": ratio,
        "remainder_norms": norms,
        "scores": pairwise_scores([p for _, p in found]),
    }
    return Decomposition(f.grid, found, rem, diag, cfg.mass_tol)


# -- persistence -------------------------------------------------------------------------

def save_decomposition(directory, dec: Decomposition) -> Path:
    """JSON manifest plus Field containers for every profile and the remainder."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for j, (w, p) in enumerate(dec.profiles):
        name = f"phi_{j}.field"
        save_field(d / name, p.phi)
        entries.append({"weight": [w.real, w.imag], "phi": name, **p.params()})
    save_field(d / "remainder.field", dec.remainder)
    manifest = {"grid": dec.grid.to_dict(), "profiles": entries, "remainder": "remainder.field",
                "diagnostics": dec.diagnostics, "mass_tol": dec.mass_tol}
    path = d / "decomposition.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def load_decomposition(directory) -> Decomposition:
    d = Path(directory)
    m = json.loads((d / "decomposition.json").read_text())
    g = m["grid"]
    grid = make_grid(g["nx"], g["ny"], g["lx"], g["ly"])
    profiles = []
    for e in m["profiles"]:
        phi = load_field(d / e["phi"])
        phi = phi * (1.0 / l2_norm(phi))     # container precision is single
        profiles.append((complex(*e["weight"]),
                         Profile(phi, e["t"], e["x0"], e["y0"], tuple(e["xi"]), e["lam1"], e["lam2"])))
    return Decomposition(grid, profiles, load_field(d / m["remainder"]), m["diagnostics"],
                         m["mass_tol"])


# -- concentration windows ------------------------------------------------------------------

@dataclass(frozen=True)
class ConcentrationWindow:
    t: float
    x: float
    y: float
    xi: Tuple[float, float]
    lam1: float
    lam2: float
    C: float


def _circular_mean(coords: np.ndarray, w: np.ndarray, length: float) -> float:
    z = np.sum(w * np.exp(2j * math.pi * coords / length))
    return float(np.angle(z) * length / (2 * math.pi))


def _participation_width(w: np.ndarray, step: float) -> float:
    p = w / (w.sum() * step)
    return float(1.0 / (np.sum(p ** 2) * step))


def _smallest_multiplier(radii: np.ndarray, masses: np.ndarray, eta: float) -> float:
    """Smallest C with sum of masses at radius > C below ``eta``."""
    order = np.argsort(-radii, kind="stable")
    r, m = radii[order], masses[order]
    # mass strictly outside r[k]: sum over entries with radius > r[k]
    csum = np.concatenate([[0.0], np.cumsum(m)])
    first = np.searchsorted(-r, -r, side="left")       # first index sharing r[k]
    outside = csum[first]
    ok = np.nonzero(outside < eta)[0]
    return float(r[ok[-1]]) if ok.size else float(r[0])


def mass_concentration_windows(tr: SpaceTimeTrace, eta: float) -> List[ConcentrationWindow]:
    """Per-snapshot centre, frequency centre, scales and window multiplier ``C(eta)``.

    Scales balance the participation widths of the marginal densities:
    ``lam_i = sqrt(w_freq / w_space)``, so the spatial window ``C / lam_i`` and the
    frequency window ``C lam_i`` are equally wide in units of the respective
    spreads for a Gaussian.  ``C(eta)`` is the least multiplier for which the
    mass outside the four windows sums below ``eta``.
    """
    g = tr.grid
    out = []
    for t, snap in zip(tr.times, tr.snapshots):
        u = snap.physical().data
        a = np.abs(u) ** 2 * (g.dx * g.dy)
        total = float(a.sum())
        if not 0 < eta < total:
            raise ValueError(f"eta must lie in (0, total mass {total:.6g}), got {eta}")
        b = np.abs(fft_array(g, u)) ** 2 * (g.dxi * g.deta)
        mx, my = a.sum(axis=1), a.sum(axis=0)
        mxi, meta = b.sum(axis=1), b.sum(axis=0)
        xc = _circular_mean(g.x, mx, g.lx)
        yc = _circular_mean(g.y, my, g.ly)
        k1 = float(np.sum(g.xi * mxi) / mxi.sum())
        k2 = float(np.sum(g.eta * meta) / meta.sum())
        lam1 = math.sqrt(_participation_width(mxi, g.dxi) / _participation_width(mx, g.dx))
        lam2 = math.sqrt(_participation_width(meta, g.deta) / _participation_width(my, g.dy))
        radii = np.concatenate([np.abs(_wrap(g.x - xc, g.lx)) * lam1,
                                np.abs(_wrap(g.y - yc, g.ly)) * lam2,
                                np.abs(g.xi - k1) / lam1,
                                np.abs(g.eta - k2) / lam2])
        masses = np.concatenate([mx, my, mxi, meta])
        out.append(ConcentrationWindow(float(t), xc, yc, (k1, k2), lam1, lam2,
                                       _smallest_multiplier(radii, masses, eta)))
    return out


__all__ = [
    "PROFILE_GRID", "BUBBLE_GRID", "Profile", "SupercriticalProfile", "apply_group",
    "apply_group_inverse", "bubble", "synthesize_bubbles", "gaussian_profile_field",
    "orthogonality_score", "pairwise_scores", "orthogonal_bubble_specs", "NoBubble",
    "ExtractConfig", "Extraction", "extract_one", "Decomposition", "profile_decompose",
    "save_decomposition", "load_decomposition", "ConcentrationWindow",
    "mass_concentration_windows",
]
