"""Geometry of the stacked lattice Z^2 x Z_w.

Sites are integer triples ``(x, y, z)`` with ``0 <= z < w``. The vertical
direction is either periodic (``z`` taken mod ``w``) or reflecting (the top
and bottom layers only see the adjacent layer).

Neighbor lists are de-duplicated. For ``w == 2`` with a periodic vertical
boundary, ``+e3`` and ``-e3`` land on the same site, so that site appears
once and a uniformly chosen neighbor is vertical with probability 1/5. This
is what makes the neighborhood size 5 and the same-layer probability 4/5.

Neighbor order is fixed: ``+e1, -e1, +e2, -e2, +e3, -e3``. Seeded runs depend
on this order, so it must not change.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np


class Site(NamedTuple):
    x: int
    y: int
    z: int


class BoundaryCondition(str, enum.Enum):
    PERIODIC = "periodic"
    REFLECTING = "reflecting"


@dataclass(frozen=True)
class LatticeGeometry:
    """Layer count, vertical boundary condition and optional torus window.

    ``window=None`` means the unbounded plane. A finite ``window`` of side
    ``L`` makes the two planar directions periodic with period ``L``.
    """

    w: int
    vertical_bc: BoundaryCondition = BoundaryCondition.PERIODIC
    window: Optional[int] = None

    def __post_init__(self):
        if int(self.w) != self.w or self.w < 1:
            raise ValueError(f"layer count w must be an integer >= 1, got {self.w!r}")
        object.__setattr__(self, "vertical_bc", BoundaryCondition(self.vertical_bc))
        if self.window is not None and (int(self.window) != self.window or self.window < 1):
            raise ValueError(f"window side must be an integer >= 1, got {self.window!r}")

    @property
    def bounded(self) -> bool:
        return self.window is not None

    def with_window(self, window: Optional[int]) -> "LatticeGeometry":
        return LatticeGeometry(self.w, self.vertical_bc, window)

    def validate(self, s: Site) -> Site:
        if not 0 <= s.z < self.w:
            raise ValueError(f"layer index {s.z} outside [0, {self.w - 1}]")
        return s

    def reduce(self, s) -> Site:
        """Canonical representative of ``s`` (x, y mod L on a torus)."""
        s = Site(*(int(v) for v in s))
        self.validate(s)
        if self.window is not None:
            s = Site(s.x % self.window, s.y % self.window, s.z)
        return s

    def degree_range(self) -> tuple[int, int]:
        """(min, max) neighborhood size over all sites."""
        degs = {len(neighbors(Site(0, 0, z), self)) for z in range(self.w)}
        return min(degs), max(degs)


def _vertical(z: int, w: int, bc: BoundaryCondition) -> list[int]:
    if w == 1:
        return []
    if bc is BoundaryCondition.PERIODIC:
        return [(z + 1) % w, (z - 1) % w]
    out = []
    if z + 1 < w:
        out.append(z + 1)
    if z - 1 >= 0:
        out.append(z - 1)
    return out


def neighbors(s: Site, g: LatticeGeometry) -> list[Site]:
    """Distinct neighbors of ``s`` in the fixed order ±e1, ±e2, vertical.

    Coinciding neighbors (w=2 periodic, or tiny torus windows) are merged and
    a site is never its own neighbor.
    """
    s = g.reduce(s)
    cand = [
        Site(s.x + 1, s.y, s.z),
        Site(s.x - 1, s.y, s.z),
        Site(s.x, s.y + 1, s.z),
        Site(s.x, s.y - 1, s.z),
    ]
    cand += [Site(s.x, s.y, z) for z in _vertical(s.z, g.w, g.vertical_bc)]
    out: list[Site] = []
    for c in cand:
        c = g.reduce(c)
        if c != s and c not in out:
            out.append(c)
    return out


def p_same_layer(w: int) -> Fraction:
    """Probability that a dividing cell replaces a cell in its own layer."""
    if w < 1:
        raise ValueError(f"w must be >= 1, got {w}")
    if w == 1:
        return Fraction(1)
    if w == 2:
        return Fraction(4, 5)
    return Fraction(2, 3)


def p_wd(d: int, w: int) -> Fraction:
    """Probability that a walk on Z^d x Z_w steps in a Z^d direction."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if w < 2:
        raise ValueError(f"w must be >= 2, got {w}")
    if w == 2:
        return Fraction(2 * d, 2 * d + 1)
    return Fraction(d, d + 1)


def mu_w(w: int, allow_w1: bool = False) -> float:
    """Return-time constant p_w * pi * w.

    Only defined for ``w >= 2``; ``allow_w1`` returns ``pi`` for ``w == 1``.
    """
    if w == 1 and allow_w1:
        return math.pi
    if w < 2:
        raise ValueError(f"mu_w needs w >= 2 (pass allow_w1=True for w=1), got {w}")
    return float(p_same_layer(w)) * math.pi * w


# -- dense torus tables used by the compiled kernels --------------------------

def site_index(s: Site, L: int) -> int:
    return (s.z * L + s.y % L) * L + s.x % L


def index_site(i: int, L: int) -> Site:
    x = i % L
    y = (i // L) % L
    z = i // (L * L)
    return Site(x, y, z)


def signed(c: int, L: int) -> int:
    """Signed representative of a torus coordinate, centered on 0."""
    return c - L if c > L // 2 else c


@dataclass(frozen=True)
class TorusTables:
    """Neighbor and reverse-slot tables on an ``L x L x w`` torus.

    ``nbr[i, j]`` is the ``j``-th neighbor of site ``i`` (or -1 past
    ``deg[i]``); ``rev[i, j]`` is the slot of ``i`` in the neighbor list of
    ``nbr[i, j]``.
    """

    L: int
    w: int
    bc: BoundaryCondition
    nbr: np.ndarray
    rev: np.ndarray
    deg: np.ndarray
    kmin: int
    kmax: int
    uniform_deg: bool

    @property
    def n_sites(self) -> int:
        return self.L * self.L * self.w


@lru_cache(maxsize=8)
def torus_tables(L: int, w: int, bc: BoundaryCondition) -> TorusTables:
    g = LatticeGeometry(w, bc, L)
    # one template per layer; planar offsets are translation invariant
    layer_nbrs = [neighbors(Site(0, 0, z), g) for z in range(w)]
    kmax = max(len(v) for v in layer_nbrs)
    n = L * L * w
    nbr = np.full((n, kmax), -1, dtype=np.int64)
    deg = np.empty(n, dtype=np.int64)
    idx = np.arange(L * L)
    xs, ys = idx % L, idx // L
    for z, tmpl in enumerate(layer_nbrs):
        base = z * L * L
        deg[base:base + L * L] = len(tmpl)
        for j, t in enumerate(tmpl):
            dx = signed(t.x, L)
            dy = signed(t.y, L)
            nbr[base + idx, j] = (t.z * L + (ys + dy) % L) * L + (xs + dx) % L
    rev = np.full((n, kmax), -1, dtype=np.int64)
    for z, tmpl in enumerate(layer_nbrs):
        base = z * L * L
        for j in range(len(tmpl)):
            tgt = nbr[base + idx, j]
            # slot of the source inside the target's list
            found = np.full(L * L, -1, dtype=np.int64)
            for k in range(kmax):
                hit = (nbr[tgt, k] == base + idx) & (found < 0)
                found[hit] = k
            if (found < 0).any():
                raise RuntimeError("asymmetric neighbor relation")
            rev[base + idx, j] = found
    kmin = int(deg.min())
    return TorusTables(L, w, BoundaryCondition(bc), nbr, rev, deg, kmin, kmax,
                       kmin == int(deg.max()))
