"""Branching coalescing random walk dual to the biased voter model.

A particle at ``y`` follows arrows of the graphical construction backwards:
it jumps to a neighbor ``x`` at rate ``1/|N(x)|`` and places a daughter at
``x`` at rate ``beta/|N(x)|``. With a periodic vertical boundary every site
has the same neighborhood size, so this is a jump at rate 1 to a uniform
neighbor and branching at rate ``beta``. Particles meeting on a site coalesce
and the smaller id survives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numba as nb
import numpy as np

from .lattice import LatticeGeometry, Site, index_site, signed, site_index, torus_tables
from .rng import EventStream, uniform_at
from .voter import _ND, _run, _seed_sites

_GROW = 1
_FULL = 2
_DONE = 0


@nb.njit(inline="always")
def _drop(i, m, site, pid, parent, birth, occ):
    last = m - 1
    if i != last:
        site[i] = site[last]
        pid[i] = pid[last]
        parent[i] = parent[last]
        birth[i] = birth[last]
        occ[site[i]] = i
    return last


@nb.njit
def _dual_advance(site, pid, parent, birth, occ, cnt, fst, ctr, nbr, deg, kmin, kmax,
                  uniform_deg, L, beta, key, t_max, grow_margin):
    """Run the dual to ``t_max``. ``cnt = [n_particles, next_id]``."""
    one = np.uint64(1)
    c = ctr[0]
    pbasic = 1.0 / (1.0 + beta)
    half = L // 2
    LL = L * L
    cap = site.size
    status = _DONE
    while True:
        m = cnt[0]
        if m == cap:
            status = _FULL
            break
        rate = m * (1.0 + beta) * kmax / kmin
        u = uniform_at(key, c)
        c += one
        t_new = fst[0] - math.log1p(-u) / rate
        i = int(uniform_at(key, c) * m)
        c += one
        j = int(uniform_at(key, c) * kmax)
        c += one
        basic = uniform_at(key, c) < pbasic
        c += one
        acc_u = 0.0
        if not uniform_deg:
            acc_u = uniform_at(key, c)
            c += one
        if t_new >= t_max:
            fst[0] = t_max
            break
        fst[0] = t_new
        y = site[i]
        if j >= deg[y]:
            continue
        x = nbr[y, j]
        if not uniform_deg and acc_u * deg[x] >= kmin:
            continue
        o = occ[x]
        if basic:
            occ[y] = -1
            if o == -1:
                site[i] = x
                occ[x] = i
            else:
                if pid[i] < pid[o]:
                    pid[o] = pid[i]
                    parent[o] = parent[i]
                    birth[o] = birth[i]
                cnt[0] = _drop(i, m, site, pid, parent, birth, occ)
        elif o == -1:
            site[m] = x
            pid[m] = cnt[1]
            parent[m] = pid[i]
            birth[m] = t_new
            occ[x] = m
            cnt[0] = m + 1
            cnt[1] += 1
        else:
            continue
        if grow_margin >= 0:
            xx = x % L
            yy = (x % LL) // L
            ax = abs(xx - L if xx > half else xx)
            ay = abs(yy - L if yy > half else yy)
            if ax >= half - grow_margin or ay >= half - grow_margin:
                status = _GROW
                break
    ctr[0] = c
    return status


@dataclass
class Particle:
    id: int
    site: Site
    parent: int  # -1 for roots
    birth: float


@dataclass
class DualState:
    particles: list
    occupancy: dict
    time: float
    beta: float

    @property
    def sites(self) -> set:
        return set(self.occupancy)


def dual_run(initial: Iterable, horizon: float, beta: float, geometry: LatticeGeometry,
             stream: EventStream, *, capacity: int = 1024) -> DualState:
    """Exact continuous-time simulation of the dual started from ``initial``.

    Initial particles get ids ``0, 1, ...`` in iteration order (duplicates
    coalesce at once). On the unbounded plane the internal torus is enlarged
    whenever a particle nears the seam.
    """
    sites = []
    for s in initial:
        s = geometry.reduce(s)
        if s not in sites:
            sites.append(s)
    if geometry.bounded:
        L = geometry.window
    else:
        need = max([abs(c) for s in sites for c in (s.x, s.y)] + [0])
        L = 33
        while L // 2 - 2 <= need:
            L = 2 * L + 1
    cap = max(capacity, 2 * len(sites))
    fst = np.array([0.0])
    ctr = np.array([stream.cursor], dtype=np.uint64)
    # (site, id, parent, birth) of live particles, in slot order
    live = [(s, i, -1, 0.0) for i, s in enumerate(sites)]
    next_id = len(sites)
    while True:
        tb = torus_tables(L, geometry.w, geometry.vertical_bc)
        site = np.zeros(cap, dtype=np.int64)
        pid = np.zeros(cap, dtype=np.int64)
        parent = np.zeros(cap, dtype=np.int64)
        birth = np.zeros(cap)
        occ = np.full(tb.n_sites, -1, dtype=np.int64)
        for k, (s, i, par, b) in enumerate(live):
            site[k] = site_index(s, L)
            occ[site[k]] = k
            pid[k], parent[k], birth[k] = i, par, b
        cnt = np.array([len(live), next_id], dtype=np.int64)
        status = _dual_advance(site, pid, parent, birth, occ, cnt, fst, ctr, tb.nbr, tb.deg,
                               tb.kmin, tb.kmax, tb.uniform_deg, L, float(beta), stream.key,
                               float(horizon), -1 if geometry.bounded else 2)
        live = []
        for k in range(int(cnt[0])):
            s = index_site(int(site[k]), L)
            if not geometry.bounded:
                s = Site(signed(s.x, L), signed(s.y, L), s.z)
            live.append((s, int(pid[k]), int(parent[k]), float(birth[k])))
        next_id = int(cnt[1])
        if status == _DONE:
            break
        if status == _GROW:
            L = 2 * L + 1
        else:
            cap *= 2
    stream.cursor = int(ctr[0])
    particles = [Particle(i, s, par, b) for s, i, par, b in live]
    occupancy = {p.site: p.id for p in particles}
    return DualState(particles, occupancy, float(fst[0]), float(beta))


# -- duality check ----------------------------------------------------------------

@nb.njit
def _forward_hits(a_idx, b_mask, t, reps, types, disc, dpos, ist, nbr, rev, deg, kmin, kmax,
                  uniform_deg, L, beta, key, ctr):
    fst = np.zeros(1)
    li = np.empty(0, dtype=np.int64)
    lt = np.empty(0, dtype=np.uint8)
    lf = np.empty(0, dtype=np.float64)
    hits = 0
    for _ in range(reps):
        for k in range(ist[_ND]):
            dpos[disc[k]] = -1
        types[:] = 0
        ist[:] = 0
        fst[0] = 0.0
        _seed_sites(a_idx, types, disc, dpos, ist, nbr, rev, deg, kmax, L)
        _run(types, disc, dpos, ist, fst, ctr, nbr, rev, deg, kmin, kmax, L, beta, key,
             uniform_deg, -1, -1, t, -1, -1, li, li, lt, lf)
        for s in range(types.size):
            if types[s] == 1 and b_mask[s]:
                hits += 1
                break
    return hits


@nb.njit
def _dual_hits(b_idx, a_mask, t, reps, site, pid, parent, birth, occ, nbr, deg, kmin, kmax,
               uniform_deg, L, beta, key, ctr):
    fst = np.zeros(1)
    cnt = np.zeros(2, dtype=np.int64)
    hits = 0
    for _ in range(reps):
        m0 = b_idx.size
        for k in range(m0):
            site[k] = b_idx[k]
            pid[k] = k
            parent[k] = -1
            birth[k] = 0.0
            occ[b_idx[k]] = k
        cnt[0] = m0
        cnt[1] = m0
        fst[0] = 0.0
        status = _dual_advance(site, pid, parent, birth, occ, cnt, fst, ctr, nbr, deg, kmin,
                               kmax, uniform_deg, L, beta, key, t, -1)
        if status != _DONE:
            return -1
        hit = False
        for k in range(cnt[0]):
            if a_mask[site[k]]:
                hit = True
            occ[site[k]] = -1
        hits += hit
    return hits


@dataclass
class DualityResult:
    p_forward: float
    p_dual: float
    se: float
    z: float
    reps: int


def duality_check(a: Iterable, b: Iterable, t: float, beta: float, geometry: LatticeGeometry,
                  reps: int, seed: int) -> DualityResult:
    """Estimate both sides of ``P(xi_t^A meets B) = P(dual_t^B meets A)``.

    The two sides use independent streams ``(seed, 0)`` and ``(seed, 1)``;
    ``z`` is the difference over the pooled binomial standard error.
    """
    if not geometry.bounded:
        raise ValueError("duality check needs a finite torus window")
    a = sorted({geometry.reduce(s) for s in a})
    b = sorted({geometry.reduce(s) for s in b})
    if not a or not b:
        raise ValueError("A and B must be nonempty")
    L = geometry.window
    tb = torus_tables(L, geometry.w, geometry.vertical_bc)
    n = tb.n_sites
    a_idx = np.array([site_index(s, L) for s in a], dtype=np.int64)
    b_idx = np.array([site_index(s, L) for s in b], dtype=np.int64)
    a_mask = np.zeros(n, dtype=np.bool_)
    a_mask[a_idx] = True
    b_mask = np.zeros(n, dtype=np.bool_)
    b_mask[b_idx] = True

    fwd = EventStream(seed, 0)
    ctr = np.array([fwd.cursor], dtype=np.uint64)
    types = np.zeros(n, dtype=np.uint8)
    disc = np.empty(n * tb.kmax, dtype=np.int64)
    dpos = np.full(n * tb.kmax, -1, dtype=np.int64)
    ist = np.zeros(5, dtype=np.int64)
    h_fwd = _forward_hits(a_idx, b_mask, float(t), int(reps), types, disc, dpos, ist, tb.nbr,
                          tb.rev, tb.deg, tb.kmin, tb.kmax, tb.uniform_deg, L, float(beta),
                          fwd.key, ctr)

    dual = EventStream(seed, 1)
    ctr = np.array([dual.cursor], dtype=np.uint64)
    site = np.zeros(n, dtype=np.int64)
    pid = np.zeros(n, dtype=np.int64)
    parent = np.zeros(n, dtype=np.int64)
    birth = np.zeros(n)
    occ = np.full(n, -1, dtype=np.int64)
    h_dual = _dual_hits(b_idx, a_mask, float(t), int(reps), site, pid, parent, birth, occ,
                        tb.nbr, tb.deg, tb.kmin, tb.kmax, tb.uniform_deg, L, float(beta),
                        dual.key, ctr)
    if h_dual < 0:
        raise RuntimeError("dual particle capacity exceeded")
    p1, p2 = h_fwd / reps, h_dual / reps
    pool = (h_fwd + h_dual) / (2 * reps)
    se = math.sqrt(pool * (1 - pool) * 2 / reps)
    z = (p1 - p2) / se if se > 0 else 0.0
    return DualityResult(p1, p2, se, z, int(reps))
