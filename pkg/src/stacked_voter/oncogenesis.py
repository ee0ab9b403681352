"""Two-step initiation under deterministic stacked-disk clone growth.

Successful premalignant clones arrive as a Poisson process with rate
``N u1 beta / (1 + beta)``. A clone of age ``a`` holds
``v(a) = min(pi w (c_w a)^2, N)`` cells. Given the arrival times, successful
second hits form an inhomogeneous Poisson process with intensity
``kappa * sum_i v(t - t_i)``, ``kappa = u2 beta / (1 + beta)``; the
initiation time ``sigma2`` is its first point. Clone overlap is ignored.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .asymptotics import c_w_asym, check_beta, gamma_metaparameter
from .rng import EventStream


TILING_RTOL = 2e-3


@dataclass(frozen=True)
class TwoStepParams:
    """Tissue of about ``N = L^2 w`` cells with mutation rates ``u1``, ``u2``.

    ``N`` must match the nearest ``L x L x w`` tiling to relative precision
    ``TILING_RTOL``, with ``L = round(sqrt(N / w))``. This admits the nominal
    ``N = 10^6`` for every ``w <= 5`` while rejecting mis-sized small tissues.
    """

    N: float
    w: int
    beta: float
    u1: float
    u2: float

    def __post_init__(self):
        if int(self.w) != self.w or self.w < 1:
            raise ValueError(f"w must be an integer >= 1, got {self.w!r}")
        for name in ("N", "u1", "u2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        check_beta(self.beta)
        L = self.side
        if L < 1 or abs(L * L * self.w - self.N) > TILING_RTOL * self.N:
            raise ValueError(f"N={self.N} is not an L^2 w tiling for w={self.w}")

    @property
    def side(self) -> int:
        return int(round(math.sqrt(self.N / self.w)))

    @property
    def c(self) -> float:
        return c_w_asym(self.beta, self.w)

    @property
    def arrival_rate(self) -> float:
        return self.N * self.u1 * self.beta / (1 + self.beta)

    @property
    def kappa(self) -> float:
        return self.u2 * self.beta / (1 + self.beta)

    @property
    def cap_age(self) -> float:
        """Age at which a clone fills the tissue."""
        return math.sqrt(self.N / (math.pi * self.w)) / self.c

    def volume(self, age):
        """Stacked-disk volume at ``age`` (0 for negative ages), capped at ``N``."""
        a = np.maximum(np.asarray(age, dtype=float), 0.0)
        return np.minimum(math.pi * self.w * (self.c * a) ** 2, self.N)

    def volume_integral(self, age):
        """``int_0^age v(s) ds``."""
        a = np.maximum(np.asarray(age, dtype=float), 0.0)
        ac = self.cap_age
        k = math.pi * self.w * self.c ** 2 / 3.0
        return np.where(a <= ac, k * a ** 3, k * ac ** 3 + self.N * (a - ac))

    def time_scale(self) -> float:
        """Time at which the expected cumulative hazard reaches 1 (no cap)."""
        k = self.kappa * self.arrival_rate * math.pi * self.w * self.c ** 2 / 12.0
        return k ** -0.25

    def with_(self, **kw) -> "TwoStepParams":
        d = dict(N=self.N, w=self.w, beta=self.beta, u1=self.u1, u2=self.u2)
        d.update(kw)
        return TwoStepParams(**d)


REFERENCE_PARAMS = dict(N=1e6, u1=1e-6, u2=1e-5, beta=0.01)


@dataclass
class CloneRecord:
    arrival_time: float

    def volume(self, t: float, params: TwoStepParams) -> float:
        return float(params.volume(t - self.arrival_time))


@dataclass
class InitiationSample:
    sigma2: float
    local_field: float
    clone_count: int
    initiating_clone_age: float
    clones: list = field(default_factory=list, repr=False)


def _pick(vols: np.ndarray, u: float) -> int:
    cum = np.cumsum(vols)
    return int(min(np.searchsorted(cum, u * cum[-1], side="right"), len(vols) - 1))


def sample_initiation(params: TwoStepParams, stream: EventStream) -> InitiationSample:
    """One draw of the initiation time by inverting the cumulative hazard.

    Clone arrivals come from ``stream.child(0)``; the unit exponential target
    and the clone pick come from ``stream.child(1)``. Keeping them apart means
    that, for a fixed stream, raising ``u2`` can only move ``sigma2`` earlier.
    """
    arr = stream.child(0)
    haz = stream.child(1)
    target = -math.log1p(-haz.uniform())
    lam1, kap = params.arrival_rate, params.kappa
    times: list = []
    t_cur = 0.0
    t_next = -math.log1p(-arr.uniform()) / lam1

    def cum_hazard(t):
        return kap * float(params.volume_integral(t - np.asarray(times)).sum())

    while True:
        if times and cum_hazard(t_next) >= target:
            sigma2 = optimize.brentq(lambda t: cum_hazard(t) - target, t_cur, t_next,
                                     xtol=1e-12 * max(1.0, t_next), rtol=4 * np.finfo(float).eps)
            break
        times.append(t_next)
        t_cur = t_next
        t_next = t_cur - math.log1p(-arr.uniform()) / lam1
    tt = np.asarray(times)
    vols = params.volume(sigma2 - tt)
    k = _pick(vols, haz.uniform())
    return InitiationSample(float(sigma2), float(vols[k]), len(times), float(sigma2 - tt[k]),
                            [CloneRecord(float(t)) for t in times])


def sample_initiation_thinning(params: TwoStepParams, stream: EventStream,
                               window: Optional[float] = None) -> InitiationSample:
    """Independent sampler: thinning against a constant bound on each time window.

    The intensity is nondecreasing, so its value at the end of a window bounds
    it on the whole window. Used as an oracle for ``sample_initiation``.
    """
    arr = stream.child(0)
    prop = stream.child(2)
    W = window if window is not None else 0.25 * params.time_scale()
    lam1, kap = params.arrival_rate, params.kappa
    times: list = []
    t_next = -math.log1p(-arr.uniform()) / lam1
    lo = 0.0
    while True:
        hi = lo + W
        while t_next <= hi:
            times.append(t_next)
            t_next -= math.log1p(-arr.uniform()) / lam1
        if times:
            tt = np.asarray(times)
            bound = kap * float(params.volume(hi - tt).sum())
            t = lo
            while bound > 0:
                t -= math.log1p(-prop.uniform()) / bound
                if t > hi:
                    break
                lam = kap * float(params.volume(t - tt).sum())
                if prop.uniform() * bound < lam:
                    live = tt[tt < t]
                    vols = params.volume(t - live)
                    k = _pick(vols, prop.uniform())
                    return InitiationSample(float(t), float(vols[k]), len(live),
                                            float(t - live[k]))
        lo = hi


# -- aggregation --------------------------------------------------------------------

QUANTILES = (5, 25, 50, 75, 95)


@dataclass
class Sigma2Stats:
    mean: float
    sd: float
    quantiles: dict
    counts: np.ndarray
    edges: np.ndarray
    bin_policy: str
    samples: list = field(repr=False, default_factory=list)

    def summary(self) -> dict:
        return dict(mean=self.mean, sd=self.sd,
                    quantiles={str(k): v for k, v in self.quantiles.items()},
                    bins=int(self.counts.size), bin_policy=self.bin_policy)


def draw_samples(params: TwoStepParams, reps: int, seed: int, sampler=sample_initiation) -> list:
    """Replicate ``i`` uses stream ``(seed, i)``."""
    return [sampler(params, EventStream(seed, i)) for i in range(reps)]


def sigma2_stats(params: TwoStepParams, reps: int, seed: int, *, samples=None) -> Sigma2Stats:
    """Mean, sd, quantiles and a Freedman-Diaconis histogram of ``sigma2``."""
    if samples is None:
        if reps < 1:
            raise ValueError("reps must be >= 1")
        samples = draw_samples(params, reps, seed)
    x = np.array([s.sigma2 for s in samples])
    q = np.percentile(x, QUANTILES)
    counts, edges = np.histogram(x, bins="fd")
    return Sigma2Stats(float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else 0.0,
                       dict(zip(QUANTILES, q.tolist())), counts, edges, "freedman-diaconis",
                       samples)


@dataclass
class FieldHistogram:
    t: float
    dt: float
    counts: np.ndarray
    edges: np.ndarray
    accepted: int
    draws: int
    mean: float
    support_bound: float
    partial: bool
    fields: np.ndarray = field(repr=False, default=None)

    @property
    def acceptance(self) -> float:
        return self.accepted / self.draws if self.draws else 0.0


def field_hist_conditional(params: TwoStepParams, t: float, dt: float, reps: int, seed: int, *,
                           min_accept: int = 100, samples=None) -> FieldHistogram:
    """Local-field sizes of draws with ``sigma2`` in ``[t - dt, t + dt]``.

    Every accepted field is checked against ``pi w (c_w (t + dt))^2``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if samples is None:
        samples = draw_samples(params, reps, seed)
    bound = min(float(params.volume(t + dt)), params.N)
    fields = []
    for s in samples:
        if t - dt <= s.sigma2 <= t + dt:
            if s.local_field > bound * (1 + 1e-12):
                raise AssertionError(f"local field {s.local_field} exceeds support {bound}")
            fields.append(s.local_field)
    fields = np.array(fields)
    if fields.size:
        counts, edges = np.histogram(fields, bins="fd")
        mean = float(fields.mean())
    else:
        counts, edges, mean = np.zeros(0, dtype=np.int64), np.zeros(1), math.nan
    return FieldHistogram(float(t), float(dt), counts, edges, int(fields.size), len(samples),
                          mean, bound, fields.size < min_accept, fields)


# -- regimes -----------------------------------------------------------------------------

class GammaRegime(str, enum.Enum):
    SMALL = "SmallGamma"
    INTERMEDIATE = "Intermediate"
    LARGE = "LargeGamma"


@dataclass
class RegimeResult:
    label: GammaRegime
    gamma: float
    small_below: float
    large_above: float


def regime_label(params: TwoStepParams, *, small_below: float = 1.0,
                 large_above: float = 1e3) -> RegimeResult:
    """Gamma and its regime under the given (non-canonical) thresholds."""
    g = gamma_metaparameter(params.N, params.u1, params.u2, params.beta, params.w)
    if g < small_below:
        label = GammaRegime.SMALL
    elif g > large_above:
        label = GammaRegime.LARGE
        warnings.warn(f"Gamma={g:.4g} is large; unsuccessful clones are not modeled",
                      stacklevel=2)
    else:
        label = GammaRegime.INTERMEDIATE
    return RegimeResult(label, g, small_below, large_above)


# -- CSV ------------------------------------------------------------------------------------

def write_samples_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["rep", "sigma2", "local_field", "clone_count", "age"])
        for i, s in enumerate(samples):
            wr.writerow([i, repr(float(s.sigma2)), repr(float(s.local_field)), s.clone_count,
                         repr(float(s.initiating_clone_age))])


def write_histogram_csv(path, counts, edges) -> None:
    total = counts.sum()
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["bin_lo", "bin_hi", "count", "density"])
        for k, c in enumerate(counts):
            width = edges[k + 1] - edges[k]
            dens = c / (total * width) if total and width > 0 else 0.0
            wr.writerow([repr(float(edges[k])), repr(float(edges[k + 1])), int(c),
                         repr(float(dens))])
