"""Periodic box discretization, spectral transforms and test-field builders.

Physical samples live on the centered lattice ``x_i = -lx/2 + i*dx``.
Frequency samples are stored in centered (ascending) order and are scaled
so that they sample the continuum transform

    f_hat(xi, eta) = (1/2pi) * integral f(x, y) exp(-i(x xi + y eta)) dx dy.

With that scaling the transform is unitary between ``L2(dx dy)`` and
``L2(dxi deta)``, so ``sum|u|^2 dx dy == sum|u_hat|^2 dxi deta`` holds
literally on the grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import scipy.fft as sfft

PHYSICAL = "physical"
FREQUENCY = "frequency"
_REPS = (PHYSICAL, FREQUENCY)


class GridError(ValueError):
    """Raised on invalid grid parameters or field operations."""


class TailError(GridError):
    """Raised when a field is not negligible at the box boundary."""

    def __init__(self, message: str, measured: float):
        super().__init__(message)
        self.measured = measured


def _is_pow2(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid of ``nx x ny`` samples on a ``lx x ly`` box."""

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if not _is_pow2(n) or n < 8:
                raise GridError(f"sample counts must be powers of two >= 8, got {n}")
        for l in (self.lx, self.ly):
            if not (np.isfinite(l) and l > 0):
                raise GridError(f"box lengths must be positive, got {l}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def dxi(self) -> float:
        return 2 * math.pi / self.lx

    @property
    def deta(self) -> float:
        return 2 * math.pi / self.ly

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.dy

    @property
    def xi(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.dxi

    @property
    def eta(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.deta

    @property
    def xi_max(self) -> float:
        """Largest resolvable |xi| (the Nyquist frequency)."""
        return self.nx // 2 * self.dxi

    @property
    def eta_max(self) -> float:
        return self.ny // 2 * self.deta

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def freq_mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xi, self.eta, indexing="ij")

    def cell(self, rep: str) -> float:
        """Quadrature weight of one sample in the given representation."""
        return self.dx * self.dy if rep == PHYSICAL else self.dxi * self.deta

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "lx": self.lx, "ly": self.ly}


def make_grid(nx: int, ny: int, lx: float, ly: float) -> Grid2D:
    return Grid2D(nx, ny, float(lx), float(ly))


@dataclass(frozen=True)
class Field:
    """Immutable complex samples on a grid, tagged with their representation."""

    grid: Grid2D
    data: np.ndarray = field(repr=False)
    rep: str = PHYSICAL

    def __post_init__(self):
        if self.rep not in _REPS:
            raise GridError(f"unknown representation {self.rep!r}")
        arr = np.array(self.data, dtype=np.complex128, copy=True)
        if arr.shape != self.grid.shape:
            raise GridError(f"data shape {arr.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise GridError("field contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def with_data(self, data: np.ndarray, rep: Optional[str] = None) -> "Field":
        return Field(self.grid, data, self.rep if rep is None else rep)

    def __add__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return self.with_data(self.data + other.data)

    def __sub__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return self.with_data(self.data - other.data)

    def __mul__(self, c) -> "Field":
        return self.with_data(self.data * c)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return self.with_data(-self.data)

    def physical(self) -> "Field":
        return self if self.rep == PHYSICAL else to_physical(self)

    def frequency(self) -> "Field":
        return self if self.rep == FREQUENCY else to_frequency(self)


def _check_compatible(a: Field, b: Field):
    if a.grid != b.grid or a.rep != b.rep:
        raise GridError("fields live on different grids or representations")


@dataclass(frozen=True)
class SpaceTimeTrace:
    """Physical snapshots at uniformly spaced times ``t0 + j*dt``."""

    t0: float
    dt: float
    snapshots: Tuple[Field, ...]
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        if len(snaps) < 2:
            raise GridError("a trace needs at least two snapshots")
        if not self.dt > 0:
            raise GridError("trace time step must be positive")
        g = snaps[0].grid
        for s in snaps:
            if s.grid != g:
                raise GridError("all snapshots must share one grid")
            if s.rep != PHYSICAL:
                raise GridError("trace snapshots must be physical")
        object.__setattr__(self, "snapshots", snaps)

    @property
    def grid(self) -> Grid2D:
        return self.snapshots[0].grid

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.snapshots))

    def __len__(self):
        return len(self.snapshots)


# -- transforms --------------------------------------------------------------

def _fwd_scale(g: Grid2D) -> float:
    return g.dx * g.dy / (2 * math.pi)


def fft_array(g: Grid2D, a: np.ndarray) -> np.ndarray:
    """Physical samples -> centered continuum-normalized spectrum."""
    return sfft.fftshift(sfft.fft2(sfft.ifftshift(a))) * _fwd_scale(g)


def ifft_array(g: Grid2D, a: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft_array`."""
    return sfft.fftshift(sfft.ifft2(sfft.ifftshift(a))) / _fwd_scale(g)


def to_frequency(f: Field) -> Field:
    if f.rep != PHYSICAL:
        raise GridError("to_frequency expects a physical field")
    return Field(f.grid, fft_array(f.grid, f.data), FREQUENCY)


def to_physical(f: Field) -> Field:
    if f.rep != FREQUENCY:
        raise GridError("to_physical expects a frequency field")
    return Field(f.grid, ifft_array(f.grid, f.data), PHYSICAL)


# -- norms --------------------------------------------------------------------

def l2_norm(f: Field) -> float:
    """Quadrature L2 norm in the field's own representation."""
    s = np.sum(np.abs(f.data) ** 2) * f.grid.cell(f.rep)
    return math.sqrt(s)


def lp_norm(f: Field, p: float) -> float:
    """``(sum |u|^p * cell)^(1/p)`` using the cell measure of the representation.

    On a frequency field this is the Lebesgue norm of the sampled transform,
    which is what the X_p machinery needs.
    """
    if not p >= 1:
        raise GridError(f"lp_norm needs p >= 1, got {p}")
    a = np.abs(f.data)
    if math.isinf(p):
        return float(a.max())
    m = a.max()
    if m == 0:
        return 0.0
    # scale by the max to keep fractional powers well conditioned
    s = math.fsum(((a / m) ** p).ravel()) * f.grid.cell(f.rep)
    return float(m * s ** (1.0 / p))


def boundary_tail(f: Field, width: int = 2) -> float:
    """Max modulus on the outer ``width`` cells relative to the peak."""
    a = np.abs(f.physical().data)
    peak = a.max()
    if peak == 0:
        return 0.0
    edge = np.concatenate([a[:width].ravel(), a[-width:].ravel(),
                           a[:, :width].ravel(), a[:, -width:].ravel()])
    return float(edge.max() / peak)


def boundary_mass_fraction(f: Field, frac: float = 0.05) -> float:
    """Share of the L2 mass within ``frac`` of the box size from the boundary."""
    g = f.grid
    a = np.abs(f.physical().data) ** 2
    tot = a.sum()
    if tot == 0:
        return 0.0
    bx = max(1, int(round(frac * g.nx)))
    by = max(1, int(round(frac * g.ny)))
    inner = a[bx:g.nx - bx, by:g.ny - by].sum()
    return float((tot - inner) / tot)


# -- constructors -------------------------------------------------------------

def synthesize_gaussian(grid: Grid2D, amp: complex = 1.0, lam: float = 1.0, mu: float = 0.0,
                        center: Tuple[float, float] = (0.0, 0.0),
                        lin: Tuple[complex, complex] = (0.0, 0.0),
                        tail_tol: float = 1e-10) -> Field:
    """Sample ``A exp(-lam|x-a|^2 + i mu x y + b1 x + b2 y)`` on the grid."""
    if not lam > 0:
        raise GridError("lam must be positive")
    X, Y = grid.mesh()
    a1, a2 = center
    b1, b2 = lin
    expo = -lam * ((X - a1) ** 2 + (Y - a2) ** 2) + 1j * mu * X * Y + b1 * X + b2 * Y
    data = amp * np.exp(expo)
    f = Field(grid, data)
    if amp != 0:
        tail = boundary_tail(f, width=1)
        if tail > tail_tol:
            raise TailError(f"gaussian too wide for box: boundary/peak = {tail:.3e}", tail)
    return f


def random_band_limited(grid: Grid2D, seed: int, band: Tuple[float, float],
                        envelope: Optional[float] = None) -> Field:
    """Unit-norm random field with spectrum in ``band[0] <= |k|_inf <= band[1]``.

    ``|k|_inf`` is ``max(|xi|, |eta|)``.  The Nyquist row and column are always
    zero.  With ``envelope`` the field is multiplied by ``exp(-r^2/(2 w^2))``
    and renormalized, which localizes it in space (the spectrum is then only
    essentially band-limited).
    """
    lo, hi = band
    if lo < 0 or hi <= lo:
        raise GridError(f"invalid band {band}")
    if hi > min(grid.xi_max, grid.eta_max) - min(grid.dxi, grid.deta) / 2:
        raise GridError(f"band edge {hi} exceeds the Nyquist frequency")
    rng = np.random.default_rng(seed)
    XI, ETA = grid.freq_mesh()
    kinf = np.maximum(np.abs(XI), np.abs(ETA))
    mask = (kinf >= lo) & (kinf <= hi)
    mask[0, :] = False
    mask[:, 0] = False
    coef = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    spec = np.where(mask, coef, 0.0)
    f = to_physical(Field(grid, spec, FREQUENCY))
    if envelope is not None:
        X, Y = grid.mesh()
        f = f.with_data(f.data * np.exp(-(X ** 2 + Y ** 2) / (2 * envelope ** 2)))
    n = l2_norm(f)
    if n == 0:
        raise GridError("band contains no resolvable modes")
    return f * (1.0 / n)


def zero_field(grid: Grid2D, rep: str = PHYSICAL) -> Field:
    return Field(grid, np.zeros(grid.shape), rep)


# -- serialization ------------------------------------------------------------

def save_field(path, f: Field, seed: Optional[int] = None) -> Path:
    """Write ``path`` (little-endian complex64, row-major) plus ``path.json``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(f.data, dtype="<c8").tobytes(order="C"))
    header = dict(f.grid.to_dict(), rep=f.rep, seed=seed)
    Path(str(path) + ".json").write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")
    return path


def load_field(path) -> Field:
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    g = make_grid(header["nx"], header["ny"], header["lx"], header["ly"])
    raw = np.frombuffer(path.read_bytes(), dtype="<c8")
    if raw.size != g.nx * g.ny:
        raise GridError(f"container size {raw.size} does not match header {g.shape}")
    return Field(g, raw.reshape(g.shape).astype(np.complex128), header["rep"])
