"""Dyadic rectangles, frequency projections and Whitney pair enumeration.

A rectangle ``R(k, n, p, m)`` is the closed set

    {n - 1 <= 2^-k xi <= n + 1,  m - 1 <= 2^-p eta <= m + 1}

with center ``(2^k n, 2^p m)``, half-widths ``(2^k, 2^p)`` and area
``2^(k+p+2)``.  Rectangles with odd indices form a disjoint lattice; all
indices together give an overlapping family.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .grid import FREQUENCY, Field, Grid2D

Box = Tuple[Tuple[float, float], Tuple[float, float]]


# -- bump functions -------------------------------------------------------------

def smoothstep(s: np.ndarray) -> np.ndarray:
    """Quintic smoothstep: 0 for s <= 0, 1 for s >= 1, C^2 in between."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


def bump(x) -> np.ndarray:
    """Even bump equal to 1 on |x| <= 1 and 0 on |x| >= 2."""
    return 1.0 - smoothstep(np.abs(np.asarray(x, dtype=float)) - 1.0)


def annulus_bump(x) -> np.ndarray:
    """``bump(x) - bump(2x)``, supported in 1/2 <= |x| <= 2."""
    x = np.asarray(x, dtype=float)
    return bump(x) - bump(2.0 * x)


# -- rectangles -------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class DyadicRect:
    k: int
    n: int
    p: int
    m: int

    @property
    def lx(self) -> float:
        return math.ldexp(1.0, self.k)

    @property
    def ly(self) -> float:
        return math.ldexp(1.0, self.p)

    @property
    def cx(self) -> float:
        return self.n * self.lx

    @property
    def cy(self) -> float:
        return self.m * self.ly

    @property
    def center(self) -> Tuple[float, float]:
        return (self.cx, self.cy)

    @property
    def area(self) -> float:
        return math.ldexp(1.0, self.k + self.p + 2)

    @property
    def bounds(self) -> Box:
        return ((self.cx - self.lx, self.cx + self.lx), (self.cy - self.ly, self.cy + self.ly))

    def contains(self, xi, eta) -> np.ndarray:
        (a, b), (c, d) = self.bounds
        xi = np.asarray(xi)
        eta = np.asarray(eta)
        return (xi >= a) & (xi <= b) & (eta >= c) & (eta <= d)

    def scaled(self, dk: int, dp: int) -> "DyadicRect":
        """Image under the frequency dilation ``(xi, eta) -> (2^dk xi, 2^dp eta)``."""
        return DyadicRect(self.k + dk, self.n, self.p + dp, self.m)

    def key(self) -> Tuple[int, int, int, int]:
        # enumeration order is (k, p, n, m)
        return (self.k, self.p, self.n, self.m)


def _index_range(lo: float, hi: float, k: int) -> range:
    h = math.ldexp(1.0, k)
    return range(math.ceil(lo / h - 1.0), math.floor(hi / h + 1.0) + 1)


def enumerate_rects(kmin: int, kmax: int, support: Box,
                    pmin: int = None, pmax: int = None) -> List[DyadicRect]:
    """All rectangles with scales in range that meet the closed ``support`` box.

    ``k`` runs over ``[kmin, kmax]`` and ``p`` over ``[pmin, pmax]`` (defaults
    to the ``k`` range).  Output order is lexicographic in ``(k, p, n, m)``.
    """
    pmin = kmin if pmin is None else pmin
    pmax = kmax if pmax is None else pmax
    if kmin > kmax or pmin > pmax:
        raise ValueError("empty scale range")
    (a, b), (c, d) = support
    if a > b or c > d:
        raise ValueError("empty support box")
    out = []
    for k in range(kmin, kmax + 1):
        ns = _index_range(a, b, k)
        for p in range(pmin, pmax + 1):
            ms = _index_range(c, d, p)
            out.extend(DyadicRect(k, n, p, m) for n in ns for m in ms)
    return out


def rect_multiplier(grid: Grid2D, r: DyadicRect, mode: str = "smooth") -> np.ndarray:
    if mode == "smooth":
        bx = bump((grid.xi - r.cx) / r.lx)
        by = bump((grid.eta - r.cy) / r.ly)
    elif mode == "sharp":
        (a, b), (c, d) = r.bounds
        bx = ((grid.xi >= a) & (grid.xi <= b)).astype(float)
        by = ((grid.eta >= c) & (grid.eta <= d)).astype(float)
    else:
        raise ValueError(f"mode must be 'smooth' or 'sharp', got {mode!r}")
    return np.outer(bx, by)


def annulus_multiplier(grid: Grid2D, M: float, N: float) -> np.ndarray:
    return np.outer(annulus_bump(grid.xi / M), annulus_bump(grid.eta / N))


def _apply_multiplier(f: Field, mult: np.ndarray) -> Field:
    out = Field(f.grid, f.frequency().data * mult, FREQUENCY)
    return out if f.rep == FREQUENCY else out.physical()


def project_rect(f: Field, r: DyadicRect, mode: str = "smooth") -> Field:
    """``P_R f`` with the smooth bump, or the indicator of ``R`` in sharp mode."""
    return _apply_multiplier(f, rect_multiplier(f.grid, r, mode))


def project_annulus(f: Field, M: float, N: float) -> Field:
    """``Q_{M,N} f``: multiplier ``annulus_bump(xi/M) * annulus_bump(eta/N)``."""
    return _apply_multiplier(f, annulus_multiplier(f.grid, M, N))


def dyadic_range(lo: float, hi: float) -> List[float]:
    """Powers of two ``2^j`` with ``lo <= 2^j <= hi``."""
    j0 = math.ceil(math.log2(lo))
    j1 = math.floor(math.log2(hi))
    return [math.ldexp(1.0, j) for j in range(j0, j1 + 1)]


def discrepancy(r1: DyadicRect, r2: DyadicRect) -> float:
    """``min(lx1/lx2, ly1/ly2)`` for rectangles of equal area."""
    if r1.k + r1.p != r2.k + r2.p:
        raise ValueError(f"discrepancy needs equal areas, got {r1.area} and {r2.area}")
    return min(math.ldexp(1.0, r1.k - r2.k), math.ldexp(1.0, r1.p - r2.p))


def fine_split(r: DyadicRect, delta: float, axis: str = None) -> List[DyadicRect]:
    """Cut ``r`` into ``1/delta`` congruent slabs along ``axis``.

    The default axis is the longer side (``x`` on ties).  Slabs are returned
    in increasing order of their center.
    """
    if not delta > 0 or delta > 1:
        raise ValueError("delta must lie in (0, 1]")
    j = -math.log2(delta)
    if abs(j - round(j)) > 1e-12:
        raise ValueError(f"delta must be a power of two, got {delta}")
    j = int(round(j))
    if axis is None:
        axis = "x" if r.k >= r.p else "y"
    if j == 0:
        return [r]
    base = 1 << j
    if axis == "x":
        return [DyadicRect(r.k - j, base * (r.n - 1) + 2 * i + 1, r.p, r.m) for i in range(base)]
    if axis == "y":
        return [DyadicRect(r.k, r.n, r.p - j, base * (r.m - 1) + 2 * i + 1) for i in range(base)]
    raise ValueError("axis must be 'x' or 'y'")


def export_rects_csv(path, rects: Iterable[DyadicRect]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "n", "p", "m", "cx", "cy", "lx", "ly", "area"])
        for r in rects:
            w.writerow([r.k, r.n, r.p, r.m, repr(r.cx), repr(r.cy), repr(r.lx), repr(r.ly),
                        repr(r.area)])
    return path


# -- Whitney decomposition ------------------------------------------------------

@dataclass(frozen=True, order=True)
class DyadicInterval:
    """``[2^j n, 2^j (n+1))``."""

    j: int
    n: int

    @property
    def length(self) -> Fraction:
        return Fraction(2) ** self.j

    @property
    def left(self) -> Fraction:
        return self.n * self.length

    @property
    def right(self) -> Fraction:
        return (self.n + 1) * self.length

    def parent(self) -> "DyadicInterval":
        return DyadicInterval(self.j + 1, self.n // 2)

    def children(self) -> Tuple["DyadicInterval", "DyadicInterval"]:
        return (DyadicInterval(self.j - 1, 2 * self.n), DyadicInterval(self.j - 1, 2 * self.n + 1))

    def descendants(self, level: int) -> range:
        """Indices of the level-``level`` intervals inside this one."""
        s = self.j - level
        return range(self.n << s, (self.n + 1) << s)

    def as_rect_axis(self) -> Tuple[int, int]:
        """``(k, n)`` of the rectangle side equal to this interval."""
        return (self.j - 1, 2 * self.n + 1)


def interval_gap(i1: DyadicInterval, i2: DyadicInterval) -> Fraction:
    """Distance between two intervals of one level (0 if they touch or coincide)."""
    if i1.j != i2.j:
        raise ValueError("intervals must share a level")
    d = abs(i1.n - i2.n)
    return max(d - 1, 0) * i1.length


def diagonal_distance(i1: DyadicInterval, i2: DyadicInterval) -> Fraction:
    """``inf |x - y|`` over ``i1 x i2``: the gap measured along either axis."""
    return interval_gap(i1, i2)


def whitney_condition(i1: DyadicInterval, i2: DyadicInterval) -> bool:
    """``dist(i1 x i2, D) >= 6 |i1|``."""
    return diagonal_distance(i1, i2) >= 6 * i1.length


@dataclass(frozen=True, order=True)
class WhitneyPair:
    i1: DyadicInterval
    i2: DyadicInterval

    def __post_init__(self):
        if self.i1.j != self.i2.j:
            raise ValueError("Whitney pairs need equal lengths")

    @property
    def distance_ratio(self) -> float:
        """``dist(i1 x i2, D) / |i1|``."""
        return float(diagonal_distance(self.i1, self.i2) / self.i1.length)

    def satisfies_gap(self) -> bool:
        d = diagonal_distance(self.i1, self.i2)
        h = self.i1.length
        return 6 * h <= d <= 24 * h


def whitney_pairs(depth: int, region: DyadicInterval = DyadicInterval(0, 0)) -> List[WhitneyPair]:
    """Whitney tiles of ``region x region`` minus a diagonal neighborhood.

    A pair of same-level subintervals is kept when its product is at least
    ``6|I|`` from the diagonal while its parents' product is not.  The
    condition is inherited by children, so every finest cell at distance at
    least six finest lengths is covered by exactly one tile.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    out = []
    for level in range(region.j - 1, region.j - depth - 1, -1):
        idx = list(region.descendants(level))
        for a in idx:
            ia = DyadicInterval(level, a)
            pa = ia.parent()
            for b in idx:
                ib = DyadicInterval(level, b)
                if not whitney_condition(ia, ib):
                    continue
                pb = ib.parent()
                if level < region.j - 1 and whitney_condition(pa, pb):
                    continue
                out.append(WhitneyPair(ia, ib))
    return out


def whitney_cover_check(pairs: Sequence[WhitneyPair], depth: int,
                        region: DyadicInterval = DyadicInterval(0, 0)) -> dict:
    """Brute-force cover count over the finest cells of ``region x region``.

    Returns the count array and the violations: cells at distance at least
    6 finest lengths not covered exactly once, cells closer than that which
    are covered, and pairs breaking the 6/24 gap condition.
    """
    level = region.j - depth
    base = region.descendants(level).start
    size = 1 << depth
    counts = np.zeros((size, size), dtype=int)
    for pr in pairs:
        for a in pr.i1.descendants(level):
            for b in pr.i2.descendants(level):
                counts[a - base, b - base] += 1
    far_bad = 0
    near_bad = 0
    far24 = 0
    far24_bad = 0
    h = DyadicInterval(level, 0).length
    for a in range(size):
        for b in range(size):
            d = diagonal_distance(DyadicInterval(level, a + base), DyadicInterval(level, b + base))
            if d >= 6 * h:
                far_bad += counts[a, b] != 1
            else:
                near_bad += counts[a, b] != 0
            if d > 24 * h:
                far24 += 1
                far24_bad += counts[a, b] != 1
    gap_bad = sum(not pr.satisfies_gap() for pr in pairs)
    diag_hits = sum(pr.i1 == pr.i2 for pr in pairs)
    return {"counts": counts, "uncovered_or_multiple": int(far_bad), "covered_near_diagonal":
            int(near_bad), "gap_violations": int(gap_bad), "diagonal_pairs": int(diag_hits),
            "cells_beyond_24": int(far24), "cells_beyond_24_bad": int(far24_bad),
            "violations": int(far_bad + near_bad + gap_bad + diag_hits + far24_bad)}


def rect_pairs_whitney(depth: int) -> List[Tuple[DyadicRect, DyadicRect]]:
    """Products of two independent Whitney enumerations on ``[0, 1)``.

    ``R1 = I1 x J1`` and ``R2 = I2 x J2`` with ``I1 ~ I2`` and ``J1 ~ J2``.
    """
    wp = whitney_pairs(depth)
    out = []
    for px in wp:
        k1, n1 = px.i1.as_rect_axis()
        _, n2 = px.i2.as_rect_axis()
        for py in wp:
            p1, m1 = py.i1.as_rect_axis()
            _, m2 = py.i2.as_rect_axis()
            out.append((DyadicRect(k1, n1, p1, m1), DyadicRect(k1, n2, p1, m2)))
    return out


def whitney_class_bound(depth: int) -> int:
    """Largest number of partners of a rectangle under the product relation."""
    partners = {}
    for pr in whitney_pairs(depth):
        partners[pr.i1] = partners.get(pr.i1, 0) + 1
    m = max(partners.values(), default=0)
    return m * m
