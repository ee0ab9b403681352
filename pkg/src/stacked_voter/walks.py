"""Continuous-time simple random walks on Z^d x Z_w (periodic layers).

A walk with jump rate ``alpha`` makes ``N ~ Poisson(alpha t)`` jumps by time
``t``. Each jump is planar with probability ``p = p_wd(d, w)`` (uniform over
``±e_i``) and vertical otherwise (``±e_3`` mod ``w``; a single toggle for
``w = 2``). Planar displacements in d=2 use the rotated coordinates
``u = x + y`` and ``v = x - y``, which perform independent ``±1`` walks, so an
``n``-step displacement is two binomials.

Hitting times of the origin are sampled exactly by jumping ahead: from graph
distance ``D`` the walk cannot reach 0 in fewer than ``D`` steps, so
``max(D - 1, 1)`` steps are drawn in one block.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .asymptotics import check_beta, tau_beta
from .lattice import mu_w, p_wd
from .rng import EventStream

_CHUNK = 1_000_000


def _p_planar(d: int, w: int) -> float:
    return 1.0 if w == 1 else float(p_wd(d, w))


def _vertical_shift(nv, w, gen):
    """Net layer displacement after ``nv`` vertical steps (not yet reduced mod w)."""
    if w == 1:
        return np.zeros_like(nv)
    if w == 2:
        return nv & 1
    return 2 * gen.binomial(nv, 0.5) - nv


def _vdist(z, w):
    return np.minimum(z, w - z)


# -- local CLT ------------------------------------------------------------------

def lclt_limit(d: int, w: int, allow_w1: bool = False) -> float:
    """``(1/w) (d / (2 pi p))^(d/2)``; ``w == 1`` uses ``p = 1`` behind ``allow_w1``."""
    if w == 1:
        if not allow_w1:
            raise ValueError("w=1 limit requested without allow_w1")
        p = 1.0
    else:
        p = float(p_wd(d, w))
    return (1.0 / w) * (d / (2 * math.pi * p)) ** (d / 2)


@dataclass
class LcltEstimate:
    scaled: float
    se: float
    hits: int
    reps: int
    limit: float

    @property
    def rel_error(self) -> float:
        return abs(self.scaled - self.limit) / self.limit


def _sample_positions(d, w, alpha, t, n, gen):
    p = _p_planar(d, w)
    N = gen.poisson(alpha * t, size=n)
    npl = gen.binomial(N, p)
    nv = N - npl
    z = _vertical_shift(nv, w, gen) % w
    if d == 1:
        x = 2 * gen.binomial(npl, 0.5) - npl
        return x, np.zeros_like(x), z
    u = 2 * gen.binomial(npl, 0.5) - npl
    v = 2 * gen.binomial(npl, 0.5) - npl
    return (u + v) // 2, (u - v) // 2, z


def lclt_estimate(d: int, w: int, alpha: float, t: float, x, reps: int, seed: int, *,
                  allow_w1: bool = False) -> LcltEstimate:
    """Monte Carlo ``(alpha t)^(d/2) P(Z_t = x)`` with its limit value."""
    if d not in (1, 2):
        raise ValueError("walks are implemented for d in {1, 2}")
    if w == 1 and not allow_w1:
        raise ValueError("w=1 requires allow_w1=True")
    x = tuple(int(c) for c in x)
    if d == 1:
        x = (x[0], 0, x[-1] if len(x) > 1 else 0)
    tx, ty, tz = x
    gen = EventStream(seed, 0).generator()
    hits = 0
    done = 0
    while done < reps:
        n = min(_CHUNK, reps - done)
        px, py, pz = _sample_positions(d, w, alpha, t, n, gen)
        hits += int(np.count_nonzero((px == tx) & (py == ty) & (pz == tz % w)))
        done += n
    scale = (alpha * t) ** (d / 2)
    ph = hits / reps
    return LcltEstimate(scale * ph, scale * math.sqrt(ph * (1 - ph) / reps), hits, reps,
                        lclt_limit(d, w, allow_w1=True))


@dataclass
class LcltExact:
    """Law of ``Z_t`` on the box ``[-R, R]^d x Z_w``; ``probs[x + R, (y + R,) z]``."""

    d: int
    w: int
    radius: int
    probs: np.ndarray
    leak: float
    poisson_tail: float

    def prob(self, x) -> float:
        x = tuple(int(c) for c in x)
        z = x[-1] % self.w if len(x) > self.d else 0
        idx = tuple(c + self.radius for c in x[:self.d])
        if any(not 0 <= i <= 2 * self.radius for i in idx):
            return 0.0
        return float(self.probs[idx + (z,)])

    def scaled(self, x, alpha: float, t: float) -> float:
        return (alpha * t) ** (self.d / 2) * self.prob(x)


def _kernel_step(q, d, w, p):
    out = np.zeros_like(q)
    a = p / (2 * d)
    for ax in range(d):
        lo = [slice(None)] * q.ndim
        hi = [slice(None)] * q.ndim
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        out[tuple(hi)] += a * q[tuple(lo)]
        out[tuple(lo)] += a * q[tuple(hi)]
    if w == 2:
        out += (1 - p) * q[..., ::-1]
    elif w > 2:
        out += 0.5 * (1 - p) * (np.roll(q, 1, axis=-1) + np.roll(q, -1, axis=-1))
    return out


def lclt_exact(d: int, w: int, alpha: float, t: float, radius: int, *,
               tol: float = 1e-12) -> LcltExact:
    """Exact law of the walk at time ``t`` by uniformization.

    ``sum_n Poisson(n; alpha t) K^n delta_0`` on a zero-padded box; the
    series is cut where the Poisson tail drops below ``tol / 10``. Refuses
    when ``radius < 6 sqrt(alpha t)`` or when the lost mass exceeds ``tol``.
    """
    if d not in (1, 2):
        raise ValueError("walks are implemented for d in {1, 2}")
    lam = alpha * t
    if radius < 6 * math.sqrt(lam):
        raise ValueError(f"radius {radius} < 6 sqrt(alpha t) = {6 * math.sqrt(lam):.3f}")
    p = _p_planar(d, w)
    shape = (2 * radius + 1,) * d + (w,)
    q = np.zeros(shape)
    q[(radius,) * d + (0,)] = 1.0
    if lam == 0:
        return LcltExact(d, w, radius, q, 0.0, 0.0)
    n_max = int(stats.poisson.isf(tol / 10, lam)) + 1
    pmf = stats.poisson.pmf(np.arange(n_max + 1), lam)
    acc = pmf[0] * q
    for n in range(1, n_max + 1):
        q = _kernel_step(q, d, w, p)
        acc += pmf[n] * q
    tail = float(stats.poisson.sf(n_max, lam))
    leak = max(0.0, 1.0 - float(acc.sum()))
    if leak > tol:
        raise ValueError(f"mass leak {leak:.3e} exceeds {tol:.1e}; enlarge the radius")
    return LcltExact(d, w, radius, acc, leak, tail)


# -- first hitting of the origin ---------------------------------------------------

def _neighbor_starts(w, n, gen):
    """Uniform neighbors of the origin in rotated coordinates (u, v, z)."""
    starts = [(1, 1, 0), (-1, -1, 0), (1, -1, 0), (-1, 1, 0)]
    if w == 2:
        starts.append((0, 0, 1))
    elif w > 2:
        starts += [(0, 0, 1), (0, 0, w - 1)]
    s = np.array(starts, dtype=np.int64)[gen.integers(0, len(starts), size=n)]
    return s[:, 0].copy(), s[:, 1].copy(), s[:, 2].copy()


def first_hit_steps(nsteps: np.ndarray, w: int, gen: np.random.Generator) -> np.ndarray:
    """Jump index (1-based) at which a d=2 walk from a random neighbor of 0 hits 0.

    Returns 0 for walks that do not hit within their ``nsteps`` jumps.
    """
    nsteps = np.asarray(nsteps, dtype=np.int64)
    n = nsteps.size
    p = _p_planar(2, w)
    u, v, z = _neighbor_starts(w, n, gen)
    out = np.zeros(n, dtype=np.int64)
    idx = np.arange(n)
    rem = nsteps.copy()
    used = np.zeros(n, dtype=np.int64)
    keep = rem > 0
    idx, u, v, z, rem, used = idx[keep], u[keep], v[keep], z[keep], rem[keep], used[keep]
    while idx.size:
        dist = np.maximum(np.abs(u), np.abs(v)) + _vdist(z, w)
        m = np.minimum(np.maximum(dist - 1, 1), rem)
        npl = gen.binomial(m, p)
        u += 2 * gen.binomial(npl, 0.5) - npl
        v += 2 * gen.binomial(npl, 0.5) - npl
        z = (z + _vertical_shift(m - npl, w, gen)) % w
        used += m
        rem -= m
        hit = (u == 0) & (v == 0) & (z == 0)
        out[idx[hit]] = used[hit]
        keep = ~hit & (rem > 0)
        idx, u, v, z, rem, used = idx[keep], u[keep], v[keep], z[keep], rem[keep], used[keep]
    return out


@dataclass
class ReturnTimeTail:
    t: list
    p_hat: list
    se: list
    r_t: list
    reps: int
    requested_reps: int
    truncated: bool
    w: int
    alpha: float

    def to_rows(self) -> list:
        return [dict(t=t, p_hat=p, se=s, r_t=r)
                for t, p, s, r in zip(self.t, self.p_hat, self.se, self.r_t)]


def return_time_tail(w: int, alpha: float, t_grid: Sequence[float], reps: int, seed: int, *,
                     event_budget: float = 1e12, chunk: int = 200_000) -> ReturnTimeTail:
    """Empirical ``P(T_0 > t)`` on ``t_grid`` for a walk started next to the origin.

    Walks are simulated to ``t_max = max(t_grid)``; unhit walks count as
    ``T_0 > t`` for every grid point. The jump at which the origin is hit is
    mapped to a time through the uniform order statistics of the ``N`` jump
    times on ``[0, t_max]``. ``event_budget`` caps the nominal jump count
    ``alpha t_max reps``; once exceeded the remaining chunks are skipped and
    ``truncated`` is set.
    """
    if w < 2:
        raise ValueError("return-time tail needs w >= 2")
    grid = np.sort(np.asarray(t_grid, dtype=float))
    if grid.size == 0 or grid[0] <= 0:
        raise ValueError("t_grid must be nonempty and positive")
    t_max = float(grid[-1])
    per_walk = alpha * t_max
    gen = EventStream(seed, 0).generator()
    counts = np.zeros(grid.size, dtype=np.int64)
    done = 0
    truncated = False
    while done < reps:
        n = min(chunk, reps - done)
        if (done + n) * per_walk > event_budget:
            n = int(event_budget // per_walk) - done
            truncated = True
            if n <= 0:
                break
        N = gen.poisson(per_walk, size=n)
        K = first_hit_steps(N, w, gen)
        t0 = np.full(n, np.inf)
        h = K > 0
        t0[h] = t_max * gen.beta(K[h], N[h] - K[h] + 1)
        counts += (t0[:, None] > grid[None, :]).sum(axis=0)
        done += n
        if truncated:
            break
    if done == 0:
        raise ValueError("event budget admits no walks")
    ph = counts / done
    se = np.sqrt(ph * (1 - ph) / done)
    r = ph * np.log(alpha * grid) / mu_w(w)
    return ReturnTimeTail(grid.tolist(), ph.tolist(), se.tolist(), r.tolist(), done, reps,
                          truncated, w, alpha)


# -- branching-event classification ----------------------------------------------------

@dataclass
class BranchClassCounts:
    n0: int
    n1: int
    n2: int
    alpha_hat_0: float
    alpha_hat_1: float
    alpha_hat_2: float
    tau_beta: float
    beta: float = 0.0
    w: int = 0

    @property
    def total(self) -> int:
        return self.n0 + self.n1 + self.n2

    def se(self, k: int) -> float:
        a = (self.alpha_hat_0, self.alpha_hat_1, self.alpha_hat_2)[k]
        return math.sqrt(a * (1 - a) / self.total)

    def to_row(self) -> dict:
        return dict(beta=self.beta, w=self.w, n0=self.n0, n1=self.n1, n2=self.n2,
                    alpha0=self.alpha_hat_0, alpha1=self.alpha_hat_1,
                    alpha2=self.alpha_hat_2, tau_beta=self.tau_beta)


def classify_branch_events(beta: float, w: int, reps: int, seed: int, alpha: float = 1.0, *,
                           chunk: int = 500_000) -> BranchClassCounts:
    """Classify the race between meeting, branching and the horizon ``tau(beta)``.

    The difference of two rate-``alpha`` walks started at adjacent sites is
    a rate-``2 alpha`` walk from a uniform neighbor of 0; ``T_0`` is its
    hitting time of 0 and ``S ~ Exp(beta)`` is independent. A trial is type 0
    if ``T_0`` comes first, type 1 if ``S`` does, type 2 if the horizon does.
    """
    check_beta(beta, strict=True)
    if w < 2:
        raise ValueError("classification needs w >= 2")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    tau = tau_beta(beta)
    gen = EventStream(seed, 0).generator()
    n = np.zeros(3, dtype=np.int64)
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        s = gen.exponential(1.0 / beta, size=m)
        t_end = np.minimum(s, tau)
        N = gen.poisson(2 * alpha * t_end)
        hit = first_hit_steps(N, w, gen) > 0
        n[0] += int(hit.sum())
        n[1] += int((~hit & (s < tau)).sum())
        n[2] += int((~hit & (s >= tau)).sum())
        done += m
    a = n / reps
    return BranchClassCounts(int(n[0]), int(n[1]), int(n[2]), float(a[0]), float(a[1]),
                             float(a[2]), tau, float(beta), int(w))


# -- CSV export -------------------------------------------------------------------

def write_survival_csv(path, tail: ReturnTimeTail) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["t", "p_hat", "se", "r_t"])
        wr.writeheader()
        wr.writerows(tail.to_rows())


def write_classification_csv(path, rows: Sequence[BranchClassCounts]) -> None:
    fields = ["beta", "w", "n0", "n1", "n2", "alpha0", "alpha1", "alpha2", "tau_beta"]
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=fields)
        wr.writeheader()
        wr.writerows(r.to_row() for r in rows)
