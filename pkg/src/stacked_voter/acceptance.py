"""The acceptance suite: twelve end-to-end checks at fixed seeds.

Each check returns a :class:`CriterionResult`. ``quick=True`` runs 10x
fewer replicates; bands that depend on replicate count are widened as noted
in each function, everything else is unchanged.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, stats

from . import asymptotics as asy
from .coupling import coupled_run
from .dual import duality_check
from .estimators import front_speed, grow_surviving_clone, snapshot_shape, survival_fraction
from .lattice import LatticeGeometry, Site, mu_w
from .oncogenesis import (REFERENCE_PARAMS, TwoStepParams, draw_samples, field_hist_conditional,
                          sample_initiation_thinning)
from .rng import EventStream
from .walks import classify_branch_events, lclt_estimate, lclt_exact, return_time_tail


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        brief = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items()
                          if not isinstance(v, (list, dict)))
        return f"criterion {self.number:2d} [{status}] {self.name} ({self.seconds:.1f}s): {brief}"

    def to_dict(self) -> dict:
        return asdict(self)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _n(full: int, quick: bool) -> int:
    return max(1, full // 10) if quick else full


# 1 ----------------------------------------------------------------------------------------

def gamblers_ruin_check(seed: int, quick: bool = False) -> CriterionResult:
    """beta=0.1, w=3, M=500: hit fraction within 3 binomial SE of the embedded-chain value."""
    est = survival_fraction(0.1, LatticeGeometry(3), 500, _n(20_000, quick), seed)
    return CriterionResult(1, "gambler's ruin", abs(est.z) < 3,
                           dict(fraction=est.fraction, analytic=est.analytic, z=est.z,
                                reps=est.reps))


# 2 ----------------------------------------------------------------------------------------

def neutral_martingale_check(seed: int, quick: bool = False) -> CriterionResult:
    """beta=0, M=100: hit fraction within 3 SE of 1/100."""
    est = survival_fraction(0.0, LatticeGeometry(3), 100, _n(50_000, quick), seed)
    return CriterionResult(2, "neutral martingale", abs(est.z) < 3,
                           dict(fraction=est.fraction, analytic=est.analytic, z=est.z,
                                reps=est.reps))


# 3 ----------------------------------------------------------------------------------------

def _random_set(rng, L, w, frac):
    n = L * L * w
    k = max(1, rng.binomial(n, frac))
    idx = rng.choice(n, size=k, replace=False)
    return [Site(int(i % L), int((i // L) % L), int(i // (L * L))) for i in idx]


def coupling_check(seed: int, quick: bool = False) -> CriterionResult:
    """Additivity and monotonicity as exact set identities after every arrow.

    Tracked configurations per instance: A, B, A u B and a random C subset of A.
    """
    g = LatticeGeometry(3, "periodic", 12)
    rng = EventStream(seed, 0).generator()
    instances = _n(100, quick)
    viol_u = viol_s = arrows = end_mismatch = 0
    for i in range(instances):
        a = _random_set(rng, 12, 3, rng.uniform(0.01, 0.2))
        b = _random_set(rng, 12, 3, rng.uniform(0.01, 0.2))
        c = [s for s in a if rng.random() < 0.5]
        res = coupled_run([a, b, a + b, c], g, 0.3, 20.0, EventStream(seed, 1 + i),
                          unions=[(0, 1, 2)], subsets=[(3, 0), (0, 2), (1, 2)])
        viol_u += res.union_violations
        viol_s += res.subset_violations
        arrows += res.arrows
        end_mismatch += res.finals[2] != (res.finals[0] | res.finals[1])
    ok = viol_u == 0 and viol_s == 0 and end_mismatch == 0
    return CriterionResult(3, "coupling exactness", ok,
                           dict(instances=instances, arrows=arrows, union_violations=viol_u,
                                subset_violations=viol_s))


# 4 ----------------------------------------------------------------------------------------

def duality_instances(seed: int, count: int = 5, L: int = 15, w: int = 3) -> list:
    """Random (A, B, t) triples: small clusters a few sites apart, t in [3, 8]."""
    rng = EventStream(seed, 0).generator()
    out = []
    for _ in range(count):
        def cluster(cx, cy):
            k = int(rng.integers(1, 5))
            return [Site(int(cx + rng.integers(-2, 3)), int(cy + rng.integers(-2, 3)),
                         int(rng.integers(0, w))) for _ in range(k)]
        a = cluster(0, 0)
        b = cluster(int(rng.integers(-2, 3)), int(rng.integers(-2, 3)))
        out.append((a, b, float(rng.uniform(3.0, 8.0))))
    return out


def duality_accept(seed: int, quick: bool = False) -> CriterionResult:
    g = LatticeGeometry(3, "periodic", 15)
    reps = _n(100_000, quick)
    zs, rows = [], []
    for k, (a, b, t) in enumerate(duality_instances(seed)):
        r = duality_check(a, b, t, 0.2, g, reps, seed + 1 + k)
        zs.append(r.z)
        rows.append(dict(t=t, p_forward=r.p_forward, p_dual=r.p_dual, z=r.z))
    return CriterionResult(4, "duality", all(abs(z) < 3 for z in zs),
                           dict(max_abs_z=max(abs(z) for z in zs), reps=reps, instances=rows))


# 5 ----------------------------------------------------------------------------------------

def lclt_accept(seed: int, quick: bool = False) -> CriterionResult:
    """t=400 estimate within 10% (20% quick) of 1/(2 pi); t=8 MC vs exact within 3 SE."""
    est = lclt_estimate(2, 3, 1.0, 400.0, (0, 0, 0), _n(10_000_000, quick), seed)
    band = 0.2 if quick else 0.1
    ex = lclt_exact(2, 2, 1.0, 8.0, 18)
    mc = lclt_estimate(2, 2, 1.0, 8.0, (0, 0, 0), _n(1_000_000, quick), seed + 1)
    exact = ex.scaled((0, 0, 0), 1.0, 8.0)
    z = (mc.scaled - exact) / mc.se
    ok = est.rel_error < band and abs(z) < 3
    return CriterionResult(5, "local CLT", ok,
                           dict(scaled=est.scaled, limit=est.limit, rel_error=est.rel_error,
                                exact_t8=exact, mc_t8=mc.scaled, z_t8=z))


# 6 ----------------------------------------------------------------------------------------

def return_time_accept(seed: int, quick: bool = False) -> CriterionResult:
    """r(t) in [0.7, 1.3] for w=2,3 at t=1e5, and w2/w3 ratio within 15% of 0.8."""
    reps = _n(1_000_000, quick)
    tails = {w: return_time_tail(w, 2.0, [1e5], reps, seed + w) for w in (2, 3)}
    r2, r3 = tails[2].r_t[0], tails[3].r_t[0]
    ratio = tails[2].p_hat[0] / tails[3].p_hat[0]
    target = mu_w(2) / mu_w(3)
    checks = dict(r_w2_in_band=0.7 <= r2 <= 1.3, r_w3_in_band=0.7 <= r3 <= 1.3,
                  ratio_within_15pct=abs(ratio / target - 1) <= 0.15)
    return CriterionResult(6, "return-time tail", all(checks.values()),
                           dict(r_w2=r2, r_w3=r3, p_w2=tails[2].p_hat[0], p_w3=tails[3].p_hat[0],
                                ratio=ratio, ratio_target=target, reps=reps, **checks))


# 7 ----------------------------------------------------------------------------------------

def branch_class_accept(seed: int, quick: bool = False) -> CriterionResult:
    reps = _n(1_000_000, quick)
    res = {b: classify_branch_events(b, 3, reps, seed + k)
           for k, b in enumerate((1e-1, 1e-2, 1e-3))}
    c = res[1e-3]
    sums_exact = all(r.n0 + r.n1 + r.n2 == reps for r in res.values())
    band = c.alpha_hat_2 * math.log(1e3) / mu_w(3)
    a0 = [res[b].alpha_hat_0 for b in (1e-1, 1e-2, 1e-3)]
    se = [res[b].se(0) for b in (1e-1, 1e-2, 1e-3)]
    monotone = all(a0[k + 1] - a0[k] > 3 * math.hypot(se[k], se[k + 1]) for k in range(2))
    checks = dict(sum_exact=sums_exact, alpha0_gt_0_8=c.alpha_hat_0 > 0.8,
                  alpha1_lt_alpha2=c.alpha_hat_1 < c.alpha_hat_2,
                  band_0_6_1_3=0.6 <= band <= 1.3, alpha0_monotone=monotone)
    return CriterionResult(7, "branch classification", all(checks.values()),
                           dict(alpha0=c.alpha_hat_0, alpha1=c.alpha_hat_1, alpha2=c.alpha_hat_2,
                                band_value=band, alpha0_by_beta=a0, **checks))


# 8 ----------------------------------------------------------------------------------------

def boundary_accept(seed: int, quick: bool = False, workers: int = 1) -> CriterionResult:
    """w=2 periodic/reflecting CIs overlap; w=4 means within 5% (8% quick, R=60)."""
    R = 60 if quick else 100
    band = 0.08 if quick else 0.05
    reps = 10 if quick else 30
    est = {}
    for w in (2, 4):
        for bc in ("periodic", "reflecting"):
            est[w, bc] = front_speed(0.01, LatticeGeometry(w, bc), R, reps, seed, workers=workers)
    p4, r4 = est[4, "periodic"], est[4, "reflecting"]
    rel = abs(r4.mean - p4.mean) / p4.mean
    ok = (est[2, "periodic"].overlaps(est[2, "reflecting"]) and rel < band
          and r4.mean <= p4.mean + p4.ci_half_width)
    m = {f"w{w}_{bc}": e.mean for (w, bc), e in est.items()}
    m.update({f"w{w}_{bc}_ci": e.ci_half_width for (w, bc), e in est.items()})
    m["w4_rel_diff"] = rel
    m["censored"] = sum(e.censored for e in est.values())
    return CriterionResult(8, "boundary comparison", ok, m)


# 9 ----------------------------------------------------------------------------------------

def speed_order_accept(seed: int, quick: bool = False, workers: int = 1) -> CriterionResult:
    """Speeds strictly increase over w = 1, 3, 5 and the w=1, w=5 CIs do not overlap."""
    reps = 10 if quick else 30
    est = {w: front_speed(0.1, LatticeGeometry(w), 100, reps, seed, workers=workers)
           for w in (1, 3, 5)}
    inc = est[1].mean < est[3].mean < est[5].mean
    sep = not est[1].overlaps(est[5])
    m = {f"w{w}": e.mean for w, e in est.items()}
    m.update({f"w{w}_ci": e.ci_half_width for w, e in est.items()})
    m.update(increasing=inc, w1_w5_separated=sep)
    m["censored"] = sum(e.censored for e in est.values())
    return CriterionResult(9, "speed ordering", inc and sep, m)


# 10 ---------------------------------------------------------------------------------------

def _rel(a, b):
    return abs(a - b) / abs(b)


def formula_accept(seed: int = 0, quick: bool = False) -> CriterionResult:
    """Reference values come from mpmath at 50 digits, not from the module itself."""
    import mpmath as mp
    mp.mp.dps = 50
    b = mp.mpf("0.01")
    ln = mp.log(1 / b)
    c1_ref = float(mp.sqrt(mp.pi * b) / mp.sqrt(ln))
    h_ref = float(ln / b)
    tau_ref = float(1 / (b * mp.sqrt(ln)))
    c1 = mp.sqrt(mp.pi * b) / mp.sqrt(ln)
    g_ref = float(mp.mpf(10) ** 18 * (mp.mpf("1e-6") * b) ** 3 / (c1 ** 2 * mp.mpf("1e-5") * b))
    errs = dict(
        c1=_rel(asy.c_w_asym(0.01, 1), c1_ref),
        h=_rel(asy.h_beta(0.01), h_ref),
        tau=_rel(asy.tau_beta(0.01), tau_ref),
        gamma=_rel(asy.gamma_metaparameter(1e6, 1e-6, 1e-5, 0.01, 1), g_ref),
        speedup_w3=_rel(asy.t_w_of_N(1e6, 0.01, 1) / asy.t_w_of_N(1e6, 0.01, 3), 2.0),
    )
    inv = {}
    for w in (1, 2, 3, 5):
        t = asy.t_w_of_N(1e6, 0.01, w)
        inv[f"N_w{w}"] = _rel(asy.clone_size(t, 0.01, w), 1e6)
        tv = asy.t_w_of_V(1e9, 0.01, w)
        quad = integrate.quad(lambda s: asy.clone_size(s, 0.01, w), 0, tv, epsabs=0,
                              epsrel=1e-13)[0]
        inv[f"V_w{w}"] = _rel(quad, 1e9)
    ok = max(errs.values()) < 1e-9 and max(inv.values()) < 1e-12
    return CriterionResult(10, "formula exactness", ok,
                           dict(max_value_err=max(errs.values()),
                                max_inverse_err=max(inv.values()),
                                c1=asy.c_w_asym(0.01, 1),
                                gamma=asy.gamma_metaparameter(1e6, 1e-6, 1e-5, 0.01, 1)))


# 11 ---------------------------------------------------------------------------------------

def oncogenesis_accept(seed: int, quick: bool = False) -> CriterionResult:
    """KS(inversion, thinning) <= 0.02 (quick: 0.06) at w=3; sigma2 means decrease in w;
    conditional field ratio w5/w1 in [2, 4]; support bound holds."""
    n = _n(10_000, quick)
    p3 = TwoStepParams(w=3, **REFERENCE_PARAMS)
    inv3 = draw_samples(p3, n, seed)
    thin3 = draw_samples(p3, n, seed + 1, sample_initiation_thinning)
    ks = stats.ks_2samp([s.sigma2 for s in inv3], [s.sigma2 for s in thin3]).statistic
    ks_band = 0.06 if quick else 0.02
    means, fields, support_ok = {}, {}, True
    for w in range(1, 6):
        p = TwoStepParams(w=w, **REFERENCE_PARAMS)
        smp = inv3 if w == 3 else draw_samples(p, n, seed + 10 * w)
        m = float(np.mean([s.sigma2 for s in smp]))
        means[w] = m
        try:
            fh = field_hist_conditional(p, m, 0.05 * m, n, seed, samples=smp)
            fields[w] = fh.mean
        except AssertionError:
            support_ok = False
    dec = all(means[w + 1] < means[w] for w in range(1, 5))
    ratio = fields.get(5, math.nan) / fields.get(1, math.nan)
    ok = ks <= ks_band and dec and 2 <= ratio <= 4 and support_ok
    return CriterionResult(11, "oncogenesis oracle", ok,
                           dict(ks=ks, decreasing=dec, field_ratio_w5_w1=ratio,
                                support_ok=support_ok,
                                mean_sigma2=[means[w] for w in range(1, 6)]))


# 12 ---------------------------------------------------------------------------------------

def shape_accept(seed: int, quick: bool = False) -> CriterionResult:
    size = 5_000 if quick else 50_000
    band = 0.2 if quick else 0.1
    st, idx = grow_surviving_clone(0.1, LatticeGeometry(3), size, seed)
    snap = snapshot_shape(st)
    counts = [layer["count"] for layer in snap.layers]
    spread = (max(counts) - min(counts)) / max(counts)
    ok = 1 - band <= snap.aspect_ratio <= 1 + band and spread <= band
    return CriterionResult(12, "shape symmetry", ok,
                           dict(aspect_ratio=snap.aspect_ratio, layer_spread=spread,
                                size=snap.size, replicate=idx, layer_counts=counts))


CRITERIA = {
    1: gamblers_ruin_check,
    2: neutral_martingale_check,
    3: coupling_check,
    4: duality_accept,
    5: lclt_accept,
    6: return_time_accept,
    7: branch_class_accept,
    8: boundary_accept,
    9: speed_order_accept,
    10: formula_accept,
    11: oncogenesis_accept,
    12: shape_accept,
}

_PARALLEL = {8, 9}


def run_criterion(number: int, seed: int, quick: bool = False, workers: int = 1) -> CriterionResult:
    fn = CRITERIA[number]
    t0 = time.perf_counter()
    kw = dict(workers=workers) if number in _PARALLEL else {}
    res = fn(seed, quick=quick, **kw)
    res.seconds = time.perf_counter() - t0
    return res
