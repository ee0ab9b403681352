import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import gammaln

from stacked_voter.walks import (classify_branch_events, first_hit_steps, lclt_estimate,
                                 lclt_exact, lclt_limit, return_time_tail,
                                 write_classification_csv, write_survival_csv)


# -- independent oracle: renewal equation for the first hitting time ------------------

def _return_probs(n, w, p):
    """P(walk at 0 after m jumps), m = 0..n, for the planar/vertical mixture."""
    k = np.arange(n + 1)
    planar = np.zeros(n + 1)
    ev = k % 2 == 0
    # rotated coordinates are independent +-1 walks
    planar[ev] = np.exp(2 * (gammaln(k[ev] + 1) - 2 * gammaln(k[ev] / 2 + 1)
                             - k[ev] * math.log(2)))
    vert = np.zeros(n + 1)
    for m in range(n + 1):
        if w == 2:
            vert[m] = float(m % 2 == 0)
            continue
        j = np.arange(m + 1)
        ok = ((2 * j - m) % w) == 0
        vert[m] = np.exp(gammaln(m + 1) - gammaln(j[ok] + 1) - gammaln(m - j[ok] + 1)
                         - m * math.log(2)).sum()
    u = np.zeros(n + 1)
    for m in range(n + 1):
        kk = np.arange(m + 1)
        lb = (gammaln(m + 1) - gammaln(kk + 1) - gammaln(m - kk + 1) + kk * math.log(p)
              + (m - kk) * math.log(1 - p))
        u[m] = (np.exp(lb) * planar[kk] * vert[m - kk]).sum()
    return u


def _first_return(u):
    r = np.zeros(u.size)
    for m in range(1, u.size):
        r[m] = u[m] - np.dot(r[1:m], u[m - 1:0:-1])
    return r


def _exact_tail(w, alpha, t, nmax=1500):
    p = 0.8 if w == 2 else 2 / 3
    r = _first_return(_return_probs(nmax, w, p))
    surv = 1 - np.cumsum(r)
    # from a neighbor, a hit at jump K is a first return at K + 1
    n = np.arange(nmax - 1)
    return float((stats.poisson.pmf(n, alpha * t) * surv[n + 1]).sum())


@pytest.mark.parametrize("w", [2, 3])
def test_return_tail_matches_renewal_oracle(w):
    t = 60.0
    exact = _exact_tail(w, 2.0, t)
    mc = return_time_tail(w, 2.0, [t / 4, t], 200_000, 5 + w)
    assert abs(mc.p_hat[1] - exact) < 4 * mc.se[1]
    assert mc.p_hat[0] >= mc.p_hat[1]


def test_first_hit_steps_vs_naive_stepping():
    rng = np.random.default_rng(3)
    w, nsteps, n = 3, 12, 100_000
    p = 2 / 3
    K = first_hit_steps(np.full(n, nsteps), w, np.random.default_rng(4))
    # naive jump-by-jump walk in (x, y, z)
    starts = np.array([(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, 2)])
    pos = starts[rng.integers(0, 6, n)].copy()
    naive = np.zeros(n, dtype=np.int64)
    moves = np.array([(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)])
    probs = np.array([p / 4] * 4 + [(1 - p) / 2] * 2)
    for k in range(1, nsteps + 1):
        pos += moves[rng.choice(6, n, p=probs)]
        pos[:, 2] %= w
        hit = (naive == 0) & np.all(pos == 0, axis=1)
        naive[hit] = k
    a = np.bincount(K, minlength=nsteps + 1)
    b = np.bincount(naive, minlength=nsteps + 1)
    keep = (a + b) > 0
    _, pval, _, _ = stats.chi2_contingency(np.stack([a[keep], b[keep]]))
    assert pval > 1e-3


def test_first_hit_zero_steps():
    K = first_hit_steps(np.zeros(10, dtype=np.int64), 3, np.random.default_rng(0))
    assert np.all(K == 0)


def test_tail_monotone_and_truncation():
    tail = return_time_tail(3, 1.0, [10, 100, 1000], 5000, 1)
    assert tail.p_hat[0] >= tail.p_hat[1] >= tail.p_hat[2]
    assert not tail.truncated and tail.reps == 5000
    cut = return_time_tail(3, 1.0, [1000], 5000, 1, event_budget=1e6)
    assert cut.truncated and cut.reps == 1000
    with pytest.raises(ValueError):
        return_time_tail(1, 1.0, [10], 10, 0)
    with pytest.raises(ValueError):
        return_time_tail(3, 1.0, [], 10, 0)


def test_tail_csv(tmp_path):
    tail = return_time_tail(2, 1.0, [5, 50], 1000, 2)
    write_survival_csv(tmp_path / "s.csv", tail)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t,p_hat,se,r_t" and len(lines) == 3


def test_lclt_limits():
    assert lclt_limit(2, 3) == pytest.approx(1 / (3 * 2 * math.pi * (2 / 3) / 2), rel=1e-14)
    assert lclt_limit(1, 2) == pytest.approx(0.5 * math.sqrt(1 / (2 * math.pi * 2 / 3)))
    with pytest.raises(ValueError):
        lclt_limit(2, 1)
    assert lclt_limit(2, 1, allow_w1=True) == pytest.approx(1 / math.pi)


def test_lclt_exact_basics():
    ex = lclt_exact(2, 3, 1.0, 0.0, 3)
    assert ex.prob((0, 0, 0)) == 1.0 and ex.prob((1, 0, 0)) == 0.0
    ex = lclt_exact(2, 3, 1.0, 4.0, 14)
    assert ex.probs.sum() == pytest.approx(1.0, abs=1e-11)
    assert ex.prob((2, 1, 1)) == pytest.approx(ex.prob((-1, 2, 2)), rel=1e-12)
    assert ex.prob((0, 0, 1)) == pytest.approx(ex.prob((0, 0, 2)), rel=1e-12)
    with pytest.raises(ValueError):
        lclt_exact(2, 3, 1.0, 100.0, 10)


def test_lclt_exact_vs_monte_carlo():
    ex = lclt_exact(2, 2, 1.0, 6.0, 16)
    mc = lclt_estimate(2, 2, 1.0, 6.0, (0, 0, 0), 400_000, 3)
    assert abs(mc.scaled - ex.scaled((0, 0, 0), 1.0, 6.0)) < 4 * mc.se


def test_lclt_approaches_limit():
    errs = [abs(lclt_exact(2, 3, 1.0, t, int(6 * math.sqrt(t)) + 2).scaled((0, 0, 0), 1.0, t)
                - lclt_limit(2, 3)) for t in (4.0, 16.0, 64.0)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] / lclt_limit(2, 3) < 0.02


def test_lclt_estimate_validation():
    with pytest.raises(ValueError):
        lclt_estimate(3, 2, 1.0, 1.0, (0, 0, 0), 10, 0)
    with pytest.raises(ValueError):
        lclt_estimate(2, 1, 1.0, 1.0, (0, 0, 0), 10, 0)


def test_classification_counts():
    c = classify_branch_events(0.05, 3, 20_000, 4)
    assert c.total == 20_000
    assert c.alpha_hat_0 + c.alpha_hat_1 + c.alpha_hat_2 == pytest.approx(1.0, abs=1e-15)
    assert c.se(0) > 0
    with pytest.raises(ValueError):
        classify_branch_events(1 / math.e, 3, 10, 0)
    with pytest.raises(ValueError):
        classify_branch_events(0.0, 3, 10, 0)
    with pytest.raises(ValueError):
        classify_branch_events(0.1, 1, 10, 0)


def test_classification_csv(tmp_path):
    rows = [classify_branch_events(b, 3, 1000, 1) for b in (0.1, 0.01)]
    write_classification_csv(tmp_path / "c.csv", rows)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0].split(",")[:5] == ["beta", "w", "n0", "n1", "n2"]
    assert len(lines) == 3
