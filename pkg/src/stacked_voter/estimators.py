"""Replicate-level estimators on top of the voter engine.

Replicate ``i`` of an experiment always draws from stream ``(seed, i)``, so
results do not depend on how replicates are spread over worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .lattice import LatticeGeometry, Site
from .rng import EventStream
from .voter import BvmState, Outcome, StopCondition, run_until

_STATE_CACHE: dict = {}


def _cached_state(geometry: LatticeGeometry, beta: float) -> BvmState:
    key = (geometry, beta)
    st = _STATE_CACHE.get(key)
    if st is None:
        _STATE_CACHE.clear()
        st = _STATE_CACHE[key] = BvmState(geometry, beta)
    else:
        st.reset()
    return st


def _map_chunks(fn, args_list, workers: int):
    """Run ``fn(*args)`` for each args tuple, preserving order."""
    if workers <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(fn, *a) for a in args_list]
        return [f.result() for f in futs]


# -- survival -----------------------------------------------------------------

def gamblers_ruin(beta: float, m: float = math.inf) -> float:
    """P(jump chain of the clone size hits ``m`` before 0 | start at 1)."""
    if beta == 0:
        return 0.0 if math.isinf(m) else 1.0 / m
    q = 1.0 / (1.0 + beta)
    if math.isinf(m):
        return 1.0 - q
    return (1.0 - q) / (1.0 - q ** m)


@dataclass
class SurvivalEstimate:
    fraction: float
    hits: int
    reps: int
    se: float
    ci_low: float
    ci_high: float
    analytic: float
    analytic_limit: float

    @property
    def z(self) -> float:
        se = math.sqrt(self.analytic * (1 - self.analytic) / self.reps)
        return (self.fraction - self.analytic) / se if se > 0 else 0.0


def _survival_chunk(beta, geometry, m, seed, start, stop):
    hits = 0
    for i in range(start, stop):
        st = _cached_state(geometry, beta)
        out = run_until(st, StopCondition(extinct=True, size=m), EventStream(seed, i))
        hits += out.fired is Outcome.SIZE_REACHED
    return hits


def survival_fraction(beta: float, geometry: LatticeGeometry, m: int, reps: int, seed: int,
                      *, workers: int = 1, chunk: int = 2000) -> SurvivalEstimate:
    """Fraction of single-cell starts that reach ``m`` type-1 cells before dying out."""
    if m < 2:
        raise ValueError("target size must be >= 2")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    jobs = [(beta, geometry, m, seed, a, min(a + chunk, reps)) for a in range(0, reps, chunk)]
    hits = sum(_map_chunks(_survival_chunk, jobs, workers))
    p = hits / reps
    ci = stats.binomtest(hits, reps).proportion_ci(0.95, method="wilson")
    return SurvivalEstimate(p, hits, reps, math.sqrt(p * (1 - p) / reps), ci.low, ci.high,
                            gamblers_ruin(beta, m), gamblers_ruin(beta))


# -- front speed --------------------------------------------------------------

@dataclass
class SpeedEstimate:
    speeds: list
    mean: float
    ci_half_width: float
    replicates: int
    survivors: int
    no_survivors: bool = False
    hit_times: list = field(default_factory=list)
    slopes: list = field(default_factory=list)
    censored: int = 0  # replicates stopped by the size guard

    @property
    def ci(self) -> tuple:
        return (self.mean - self.ci_half_width, self.mean + self.ci_half_width)

    def overlaps(self, other: "SpeedEstimate") -> bool:
        lo, hi = self.ci
        olo, ohi = other.ci
        return lo <= ohi and olo <= hi

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci"] = list(self.ci)
        return d


def size_guard(geometry: LatticeGeometry, r: int) -> int:
    """Clone size at which a front run that has not reached ``|x| = r`` is abandoned.

    A clone confined to ``|x| < r`` with this many cells would have to be
    stretched far along y, so the guard only exists to bound unbounded runs.
    """
    return 4 * geometry.w * (2 * r + 1) ** 2


def _speed_replicate(beta, geometry, r, seed, i, regression):
    st = _cached_state(geometry, beta)
    stream = EventStream(seed, i)
    guard = size_guard(geometry, r)
    radii = list(range(max(1, r // 2), r + 1)) if regression else [r]
    times = []
    for rad in radii:
        out = run_until(st, StopCondition(extinct=True, plane=rad, size=guard), stream)
        if out.fired is not Outcome.PLANE_HIT:
            return out.fired.value, out.time, math.nan
        times.append(out.time)
    slope = float(np.polyfit(times, radii, 1)[0]) if regression else math.nan
    return Outcome.PLANE_HIT.value, times[-1], slope


def _speed_chunk(beta, geometry, r, seed, start, stop, regression):
    return [(i,) + _speed_replicate(beta, geometry, r, seed, i, regression)
            for i in range(start, stop)]


def mean_ci(x) -> tuple:
    """Mean and 95% Student-t half-width."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.inf
    half = stats.t.ppf(0.975, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size)
    return float(x.mean()), float(half)


def front_speed(beta: float, geometry: LatticeGeometry, r: int, reps: int, seed: int, *,
                workers: int = 1, max_attempts: Optional[int] = None,
                regression: bool = False) -> SpeedEstimate:
    """Propagation speed ``r / T_r`` over ``reps`` surviving replicates.

    ``T_r`` is the first time a type-1 site has ``|x| >= r``. Replicates are
    started from a single type-1 cell at the origin; those that die out are
    discarded and counted, as are runs stopped by :func:`size_guard`. Attempts are made in index order until ``reps``
    survivors are found or ``max_attempts`` is exhausted.
    """
    if r < 10:
        raise ValueError("R must be >= 10")
    if geometry.bounded and geometry.window <= 4 * r:
        raise ValueError(f"window {geometry.window} too small for R={r}; need L > 4R")
    if max_attempts is None:
        p = gamblers_ruin(beta) if beta > 0 else 0.01
        max_attempts = int(20 * reps / p) + 100
    block = max(reps, 8 * max(workers, 1))
    speeds, times, slopes = [], [], []
    attempts = censored = 0
    while len(speeds) < reps and attempts < max_attempts:
        hi = min(attempts + block, max_attempts)
        per = max(1, (hi - attempts) // max(workers, 1))
        jobs = [(beta, geometry, r, seed, a, min(a + per, hi), regression)
                for a in range(attempts, hi, per)]
        for chunk in _map_chunks(_speed_chunk, jobs, workers):
            for i, fired, t, slope in chunk:
                attempts = i + 1
                censored += fired == Outcome.SIZE_REACHED.value
                if fired == Outcome.PLANE_HIT.value:
                    speeds.append(r / t)
                    times.append(t)
                    slopes.append(slope)
                    if len(speeds) == reps:
                        break
            if len(speeds) == reps:
                break
    mean, half = mean_ci(speeds)
    return SpeedEstimate(speeds, mean, half, attempts, len(speeds), not speeds, times,
                         slopes if regression else [], censored)


# -- shape ----------------------------------------------------------------------

@dataclass
class ShapeSnapshot:
    layers: list  # per layer: dict(z, count, x_min, x_max, y_min, y_max)
    x_extent: int
    y_extent: int
    aspect_ratio: float
    size: int


def snapshot_shape(state: BvmState) -> ShapeSnapshot:
    """Per-layer bounding boxes and the x/y aspect ratio of the clone."""
    if state.size == 0:
        raise ValueError("empty configuration has no shape")
    pts = state.occupied_array()
    L = state.L
    # signed coordinates on bounded windows too; the clone is assumed not to wrap
    pts[:, 0] = np.where(pts[:, 0] > L // 2, pts[:, 0] - L, pts[:, 0])
    pts[:, 1] = np.where(pts[:, 1] > L // 2, pts[:, 1] - L, pts[:, 1])
    layers = []
    for z in range(state.geometry.w):
        p = pts[pts[:, 2] == z]
        if len(p) == 0:
            layers.append(dict(z=z, count=0))
            continue
        layers.append(dict(z=z, count=int(len(p)), x_min=int(p[:, 0].min()),
                           x_max=int(p[:, 0].max()), y_min=int(p[:, 1].min()),
                           y_max=int(p[:, 1].max())))
    xe = int(pts[:, 0].max() - pts[:, 0].min())
    ye = int(pts[:, 1].max() - pts[:, 1].min())
    if xe == ye:
        ratio = 1.0
    else:
        ratio = xe / ye if ye else math.inf
    return ShapeSnapshot(layers, xe, ye, ratio, int(len(pts)))


def grow_surviving_clone(beta: float, geometry: LatticeGeometry, size: int, seed: int,
                         max_attempts: int = 10_000) -> tuple:
    """First replicate (by index) that reaches ``size`` cells; returns (state, index)."""
    for i in range(max_attempts):
        st = BvmState(geometry, beta)
        out = run_until(st, StopCondition(extinct=True, size=size), EventStream(seed, i))
        if out.fired is Outcome.SIZE_REACHED:
            return st, i
    raise RuntimeError(f"no replicate reached {size} cells in {max_attempts} attempts")
