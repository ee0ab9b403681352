"""Event-driven biased voter model on Z^2 x Z_w.

Only discordant ordered pairs (type-1 site next to a type-0 site) are
scheduled. Replacements between cells of the same type never change the
configuration, so skipping them leaves the law of the process, and the jump
chain of the clone size, unchanged. The cost of an event is then O(1) and the
cost of a run scales with the clone boundary rather than its volume.

The discordant set is stored once per unordered edge as the pair id
``src * kmax + slot`` with ``src`` the type-1 end. A proposal picks a stored
edge uniformly, fires it forward (type-1 source) with probability
``(1+beta)/(2+beta)`` and backward otherwise. When neighborhood sizes vary
(reflecting vertical boundary) the proposal is thinned with acceptance
``kmin / deg(src)``, which gives every ordered pair its exact rate
``rate(src) / deg(src)``.

The unbounded plane is simulated on a torus that is enlarged whenever the
clone comes within two sites of the seam. The discordant list is carried over
in order, so the trajectory does not depend on the current torus size.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numba as nb
import numpy as np

from .lattice import (
    BoundaryCondition,
    LatticeGeometry,
    Site,
    index_site,
    signed,
    site_index,
    torus_tables,
)
from .rng import EventStream, uniform_at

# kernel exit codes
EXTINCT = 0
SIZE = 1
PLANE = 2
TIME = 3
MAX_EVENTS = 4
GROW = 5
FULL = 6
LOG_FULL = 7

# ist slots
_ND, _NOCC, _NEV, _MAXX, _MAXY = 0, 1, 2, 3, 4

_INITIAL_SIDE = 33
_GROW_MARGIN = 2


class Outcome(str, enum.Enum):
    EXTINCT = "extinct"
    SIZE_REACHED = "size_reached"
    PLANE_HIT = "plane_hit"
    TIME_REACHED = "time_reached"
    FULL = "full"
    MAX_EVENTS = "max_events"


class AbsorbedState(RuntimeError):
    """Raised by :func:`step` when no discordant pair remains."""


# -- compiled core -----------------------------------------------------------

@nb.njit(inline="always")
def _add(pid, disc, dpos, ist):
    nd = ist[_ND]
    disc[nd] = pid
    dpos[pid] = nd
    ist[_ND] = nd + 1


@nb.njit(inline="always")
def _remove(pid, disc, dpos, ist):
    p = dpos[pid]
    nd = ist[_ND] - 1
    last = disc[nd]
    disc[p] = last
    dpos[last] = p
    dpos[pid] = -1
    ist[_ND] = nd


@nb.njit
def _flip(s, t, types, disc, dpos, ist, nbr, rev, deg, kmax):
    types[s] = t
    if t == 1:
        ist[_NOCC] += 1
    else:
        ist[_NOCC] -= 1
    for j in range(deg[s]):
        n = nbr[s, j]
        if t == 1:
            if types[n] == 0:
                _add(s * kmax + j, disc, dpos, ist)
            else:
                _remove(n * kmax + rev[s, j], disc, dpos, ist)
        else:
            if types[n] == 0:
                _remove(s * kmax + j, disc, dpos, ist)
            else:
                _add(n * kmax + rev[s, j], disc, dpos, ist)


@nb.njit
def _seed_sites(sites, types, disc, dpos, ist, nbr, rev, deg, kmax, L):
    LL = L * L
    for s in sites:
        if types[s] == 0:
            _flip(s, 1, types, disc, dpos, ist, nbr, rev, deg, kmax)
            ax = abs(s % L - L if s % L > L // 2 else s % L)
            yy = (s % LL) // L
            ay = abs(yy - L if yy > L // 2 else yy)
            if ax > ist[_MAXX]:
                ist[_MAXX] = ax
            if ay > ist[_MAXY]:
                ist[_MAXY] = ay


@nb.njit
def _run(types, disc, dpos, ist, fst, ctr, nbr, rev, deg, kmin, kmax, L, beta, key,
         uniform_deg, size_m, plane_r, t_max, max_events, grow_margin,
         log_src, log_dst, log_type, log_time):
    """Advance until a stop condition fires. Mutates all state arrays in place."""
    LL = L * L
    half = L // 2
    fwd = (1.0 + beta) / (2.0 + beta)
    one = np.uint64(1)
    c = ctr[0]
    nlog = 0
    cap = log_src.size
    ev0 = ist[_NEV]
    status = MAX_EVENTS
    while True:
        nd = ist[_ND]
        if nd == 0:
            status = EXTINCT if ist[_NOCC] == 0 else FULL
            break
        if cap > 0 and nlog == cap:
            status = LOG_FULL
            break
        if max_events >= 0 and ist[_NEV] - ev0 >= max_events:
            status = MAX_EVENTS
            break
        q = nd * (2.0 + beta) / kmin
        u = uniform_at(key, c)
        c += one
        t_new = fst[0] - math.log1p(-u) / q
        u = uniform_at(key, c)
        c += one
        j = int(u * nd)
        u = uniform_at(key, c)
        c += one
        pid = disc[j]
        a = pid // kmax
        b = nbr[a, pid % kmax]
        if u < fwd:
            src, dst, newt = a, b, 1
        else:
            src, dst, newt = b, a, 0
        accept = True
        if not uniform_deg:
            u = uniform_at(key, c)
            c += one
            accept = u * deg[src] < kmin
        if t_new >= t_max:
            fst[0] = t_max
            status = TIME
            break
        fst[0] = t_new
        if not accept:
            continue
        _flip(dst, newt, types, disc, dpos, ist, nbr, rev, deg, kmax)
        ist[_NEV] += 1
        if cap > 0:
            log_src[nlog] = src
            log_dst[nlog] = dst
            log_type[nlog] = newt
            log_time[nlog] = t_new
            nlog += 1
        if newt == 1:
            x = dst % L
            y = (dst % LL) // L
            ax = abs(x - L if x > half else x)
            ay = abs(y - L if y > half else y)
            if ax > ist[_MAXX]:
                ist[_MAXX] = ax
            if ay > ist[_MAXY]:
                ist[_MAXY] = ay
            if plane_r >= 0 and ax >= plane_r:
                status = PLANE
                break
            if grow_margin >= 0 and (ax >= half - grow_margin or ay >= half - grow_margin):
                status = GROW
                break
            if size_m >= 0 and ist[_NOCC] >= size_m:
                status = SIZE
                break
        elif ist[_NOCC] == 0:
            status = EXTINCT
            break
    ctr[0] = c
    return status, nlog


@nb.njit
def _rebuild_discordant(types, nbr, deg, kmax):
    n = types.size
    out = []
    for s in range(n):
        if types[s] == 1:
            for j in range(deg[s]):
                if types[nbr[s, j]] == 0:
                    out.append(s * kmax + j)
    return np.array(out, dtype=np.int64)


_EMPTY_I = np.empty(0, dtype=np.int64)
_EMPTY_U8 = np.empty(0, dtype=np.uint8)
_EMPTY_F = np.empty(0, dtype=np.float64)


# -- public state -------------------------------------------------------------

@dataclass
class StopCondition:
    """Any subset of stop rules; the first one to fire ends the run."""

    extinct: bool = True
    size: Optional[int] = None
    plane: Optional[int] = None
    time: Optional[float] = None

    def __post_init__(self):
        if not (self.extinct or self.size is not None or self.plane is not None
                or self.time is not None):
            raise ValueError("at least one stop condition is required")


@dataclass
class RunOutcome:
    fired: Outcome
    time: float
    size: int
    max_x_extent: int
    events: int


@dataclass
class EventRecord:
    source: Site
    target: Site
    new_type: int
    time: float
    waiting_time: float
    size: int


class BvmState:
    """Configuration of the biased voter model plus discordant-pair bookkeeping.

    Parameters
    ----------
    geometry : LatticeGeometry
        ``window=None`` selects the unbounded plane.
    beta : float
        Fitness advantage of type-1 cells, ``beta >= 0``.
    occupied : iterable of Site
        Initial type-1 sites.
    """

    def __init__(self, geometry: LatticeGeometry, beta: float,
                 occupied: Iterable = (Site(0, 0, 0),), *, side: Optional[int] = None):
        if beta < 0:
            raise ValueError(f"beta must be >= 0, got {beta}")
        self.geometry = geometry
        self.beta = float(beta)
        sites = [geometry.reduce(s) for s in occupied]
        if geometry.bounded:
            L = geometry.window
        else:
            need = max([abs(c) for s in sites for c in (s.x, s.y)] + [0])
            L = side or _INITIAL_SIDE
            while L // 2 - _GROW_MARGIN <= need:
                L = 2 * L + 1
        self._alloc(L)
        self._seed(sites)

    def _seed(self, sites):
        self.time = 0.0
        L = self.L
        idx = np.array([site_index(s, L) for s in sites], dtype=np.int64)
        _seed_sites(idx, self.types, self.disc, self.dpos, self.ist,
                    self.tables.nbr, self.tables.rev, self.tables.deg, self.tables.kmax, L)

    def reset(self, occupied: Iterable = (Site(0, 0, 0),)) -> "BvmState":
        """Reuse the allocated arrays for a fresh initial configuration."""
        sites = [self.geometry.reduce(s) for s in occupied]
        if not self.geometry.bounded and self.L > 4 * _INITIAL_SIDE:
            # keep unbounded replicates cheap; shrink back to the starting side
            self.__init__(self.geometry, self.beta, sites)
            return self
        self.dpos[self.disc[: self.n_discordant_edges]] = -1
        self.types[:] = 0
        self.ist[:] = 0
        if not self.geometry.bounded:
            need = max([abs(c) for s in sites for c in (s.x, s.y)] + [0])
            if self.L // 2 - _GROW_MARGIN <= need:
                self.__init__(self.geometry, self.beta, sites)
                return self
        self._seed(sites)
        return self

    def _alloc(self, L: int):
        g = self.geometry
        self.L = L
        self.tables = torus_tables(L, g.w, g.vertical_bc)
        n = self.tables.n_sites
        self.types = np.zeros(n, dtype=np.uint8)
        self.disc = np.empty(n * self.tables.kmax, dtype=np.int64)
        self.dpos = np.full(n * self.tables.kmax, -1, dtype=np.int64)
        self.ist = np.zeros(5, dtype=np.int64)

    # -- views ---------------------------------------------------------------
    @property
    def size(self) -> int:
        return int(self.ist[_NOCC])

    @property
    def event_count(self) -> int:
        return int(self.ist[_NEV])

    @property
    def n_discordant_edges(self) -> int:
        return int(self.ist[_ND])

    @property
    def max_x_extent(self) -> int:
        return int(self.ist[_MAXX])

    def _site(self, i: int) -> Site:
        s = index_site(int(i), self.L)
        if self.geometry.bounded:
            return s
        return Site(signed(s.x, self.L), signed(s.y, self.L), s.z)

    @property
    def occupied(self) -> set:
        return {self._site(i) for i in np.flatnonzero(self.types)}

    def occupied_array(self) -> np.ndarray:
        """(n, 3) array of type-1 sites; signed planar coordinates."""
        idx = np.flatnonzero(self.types)
        L = self.L
        x, y, z = idx % L, (idx // L) % L, idx // (L * L)
        if not self.geometry.bounded:
            x = np.where(x > L // 2, x - L, x)
            y = np.where(y > L // 2, y - L, y)
        return np.stack([x, y, z], axis=1)

    def discordant_pairs(self) -> list:
        """Ordered discordant pairs (source, target), both orientations."""
        k = self.tables.kmax
        out = []
        for pid in self.disc[: self.n_discordant_edges]:
            a, b = int(pid // k), int(self.tables.nbr[pid // k, pid % k])
            out.append((self._site(a), self._site(b)))
            out.append((self._site(b), self._site(a)))
        return out

    def total_rate(self) -> float:
        """Sum over ordered discordant pairs of ``rate(src) / |N(src)|``."""
        k = self.tables.kmax
        deg = self.tables.deg
        pids = self.disc[: self.n_discordant_edges]
        a = pids // k
        b = self.tables.nbr[a, pids % k]
        return float(np.sum((1.0 + self.beta) / deg[a]) + np.sum(1.0 / deg[b]))

    def check_discordant(self) -> bool:
        """Full rebuild of the discordant set equals the incremental one."""
        t = self.tables
        full = _rebuild_discordant(self.types, t.nbr, t.deg, t.kmax)
        cur = self.disc[: self.n_discordant_edges]
        if full.size != cur.size or not np.array_equal(np.sort(full), np.sort(cur)):
            return False
        return bool(np.all(self.dpos[cur] == np.arange(cur.size)))

    # -- growth of the unbounded torus --------------------------------------
    def _grow(self):
        oldL, old_types = self.L, self.types
        old_disc = self.disc[: self.n_discordant_edges].copy()
        ist = self.ist.copy()
        k = self.tables.kmax
        newL = 2 * oldL + 1

        def remap(i):
            x, y, z = i % oldL, (i // oldL) % oldL, i // (oldL * oldL)
            x = np.where(x > oldL // 2, x - oldL, x) % newL
            y = np.where(y > oldL // 2, y - oldL, y) % newL
            return (z * newL + y) * newL + x

        occ = np.flatnonzero(old_types)
        self._alloc(newL)
        self.types[remap(occ)] = 1
        src = old_disc // k
        slot = old_disc % k
        new_disc = remap(src) * k + slot
        nd = new_disc.size
        self.disc[:nd] = new_disc
        self.dpos[new_disc] = np.arange(nd)
        self.ist[:] = ist

    # -- driving -------------------------------------------------------------
    def _advance(self, stream: EventStream, *, size_m=-1, plane_r=-1, t_max=math.inf,
                 max_events=-1, log=None):
        t = self.tables
        ctr = np.array([stream.cursor], dtype=np.uint64)
        fst = np.array([self.time])
        margin = -1 if self.geometry.bounded else _GROW_MARGIN
        while True:
            if log is not None:
                ls, ld = np.empty(4096, np.int64), np.empty(4096, np.int64)
                lt, lti = np.empty(4096, np.uint8), np.empty(4096, np.float64)
            else:
                ls, ld, lt, lti = _EMPTY_I, _EMPTY_I, _EMPTY_U8, _EMPTY_F
            status, nlog = _run(
                self.types, self.disc, self.dpos, self.ist, fst, ctr, t.nbr, t.rev, t.deg,
                t.kmin, t.kmax, self.L, self.beta, stream.key, t.uniform_deg,
                size_m, plane_r, t_max, max_events, margin, ls, ld, lt, lti)
            stream.cursor = int(ctr[0])
            self.time = float(fst[0])
            if log is not None:
                for i in range(nlog):
                    log.append((float(lti[i]), self._site(ls[i]), self._site(ld[i]), int(lt[i])))
            if status == GROW:
                self._grow()
                t = self.tables
                if plane_r >= 0 and self.max_x_extent >= plane_r:
                    return PLANE
                if size_m >= 0 and self.size >= size_m:
                    return SIZE
                continue
            if status == LOG_FULL:
                continue
            return status


def step(state: BvmState, stream: EventStream) -> EventRecord:
    """Apply one configuration-changing event and return what happened."""
    if state.n_discordant_edges == 0:
        raise AbsorbedState("no discordant pairs: state is absorbed")
    t0 = state.time
    log: list = []
    state._advance(stream, max_events=1, log=log)
    tm, src, dst, nt = log[0]
    return EventRecord(src, dst, nt, tm, tm - t0, state.size)


_STATUS = {
    EXTINCT: Outcome.EXTINCT,
    SIZE: Outcome.SIZE_REACHED,
    PLANE: Outcome.PLANE_HIT,
    TIME: Outcome.TIME_REACHED,
    FULL: Outcome.FULL,
    MAX_EVENTS: Outcome.MAX_EVENTS,
}


def run_until(state: BvmState, stop: StopCondition, stream: EventStream, *,
              log: Optional[list] = None, debug: bool = False) -> RunOutcome:
    """Run ``state`` until the first condition in ``stop`` fires.

    ``log``, if given, receives ``(time, source, target, new_type)`` tuples.
    With ``debug=True`` the discordant bookkeeping is rebuilt and compared
    after every event (slow).
    """
    if not state.geometry.bounded and stop.size is None and stop.time is None:
        raise ValueError("unbounded runs need a size or time stop condition")
    kw = dict(
        size_m=-1 if stop.size is None else int(stop.size),
        plane_r=-1 if stop.plane is None else int(stop.plane),
        t_max=math.inf if stop.time is None else float(stop.time),
        log=log,
    )
    if state.size == 0:
        status = EXTINCT
    elif stop.size is not None and state.size >= stop.size:
        status = SIZE
    elif stop.plane is not None and state.max_x_extent >= stop.plane:
        status = PLANE
    elif debug:
        while True:
            status = state._advance(stream, max_events=1, **kw)
            if not state.check_discordant():
                raise AssertionError(f"discordant bookkeeping diverged at event {state.event_count}")
            if status != MAX_EVENTS:
                break
    else:
        status = state._advance(stream, **kw)
    if status == EXTINCT and not stop.extinct:
        # extinction is absorbing; report it regardless
        pass
    return RunOutcome(_STATUS[status], state.time, state.size, state.max_x_extent,
                      state.event_count)


def write_event_log(path, log: Sequence) -> None:
    """CSV export of ``(time, source, target, new_type)`` tuples."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["time", "src_x", "src_y", "src_z", "dst_x", "dst_y", "dst_z", "new_type"])
        for tm, s, d, nt in log:
            wr.writerow([repr(float(tm)), s.x, s.y, s.z, d.x, d.y, d.z, nt])
