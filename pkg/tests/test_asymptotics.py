import math

import numpy as np
import pytest
from scipy import integrate

from stacked_voter import asymptotics as asy

# reference values from 40-digit mpmath evaluation of the closed forms
C1_001 = 0.08259468366189924900685376
H_001 = 460.5170185988091368035983
TAU_001 = 46.59906017846560752948312
GAMMA_REF = 1465.871197758855481745575
C3_001 = 0.09537212569165903299756789
TN_1E6_W1 = 6830.822015824436599319619
TV_1E9_W3 = 3270.913561670678219019908


def test_frozen_values():
    assert asy.c_w_asym(0.01, 1) == pytest.approx(C1_001, rel=1e-13)
    assert asy.c_w_asym(0.01, 3) == pytest.approx(C3_001, rel=1e-13)
    assert asy.h_beta(0.01) == pytest.approx(H_001, rel=1e-13)
    assert asy.tau_beta(0.01) == pytest.approx(TAU_001, rel=1e-13)
    assert asy.gamma_metaparameter(1e6, 1e-6, 1e-5, 0.01, 1) == pytest.approx(GAMMA_REF,
                                                                              rel=1e-12)
    assert asy.t_w_of_N(1e6, 0.01, 1) == pytest.approx(TN_1E6_W1, rel=1e-13)
    assert asy.t_w_of_V(1e9, 0.01, 3) == pytest.approx(TV_1E9_W3, rel=1e-13)


def test_at_one_over_e():
    b = 1 / math.e
    assert asy.h_beta(b) == pytest.approx(math.e, rel=1e-15)
    assert asy.tau_beta(b) == pytest.approx(math.e, rel=1e-15)


@pytest.mark.parametrize("bad", [0.0, -0.1, 0.5, 1.0, float("nan")])
def test_domain_errors(bad):
    with pytest.raises(ValueError):
        asy.tau_beta(bad)
    with pytest.raises(ValueError):
        asy.c_w_asym(bad, 3)


def test_h_domain_is_unit_interval():
    assert asy.h_beta(0.5) > 0
    with pytest.raises(ValueError):
        asy.h_beta(1.0)


def test_h_decreasing_on_domain():
    grid = np.linspace(1e-4, 1 / math.e, 2000)
    vals = np.array([asy.h_beta(b) for b in grid])
    assert np.all(np.diff(vals) < 0)


def test_tau_small_relative_to_h():
    ratios = [asy.tau_beta(b) / asy.h_beta(b) for b in (1e-2, 1e-4, 1e-8)]
    assert ratios[0] > ratios[1] > ratios[2]
    for b in (1e-2, 1e-4, 1e-8):
        assert asy.tau_beta(b) / asy.h_beta(b) == pytest.approx(math.log(1 / b) ** -1.5,
                                                                rel=1e-12)
    assert asy.tau_beta(1e-8) * 1e-8 < asy.tau_beta(1e-2) * 1e-2


def test_speed_ratios():
    b = 0.01
    assert asy.c_w_asym(b, 3) / asy.c_w_asym(b, 1) == pytest.approx(2 / 3 * math.sqrt(3),
                                                                    rel=1e-13)
    assert asy.c_w_asym(b, 2) / asy.c_w_asym(b, 1) == pytest.approx(0.8 * math.sqrt(2),
                                                                    rel=1e-13)
    assert 0.8 * math.sqrt(2) > 1
    cs = [asy.c_w_asym(b, w) for w in range(2, 10)]
    assert all(x < y for x, y in zip(cs, cs[1:]))
    assert asy.c_w_asym(0.05, 1) == pytest.approx(
        math.sqrt(math.pi * 0.05) / math.sqrt(math.log(20)), rel=1e-14)


def test_a_w_form():
    for w in range(1, 7):
        assert asy.a_w(w) / math.sqrt(asy.h_beta(0.02)) == pytest.approx(
            asy.c_w_asym(0.02, w), rel=1e-14)


def test_size_speedups():
    assert asy.t_w_of_N(1e6, 0.01, 1) / asy.t_w_of_N(1e6, 0.01, 3) == pytest.approx(2, rel=1e-13)
    five = asy.t_w_of_N(1e6, 0.01, 1) / asy.t_w_of_N(1e6, 0.01, 5)
    assert five == pytest.approx(10 / 3, rel=1e-13) and five > 3
    assert asy.speedup_size(3) == pytest.approx(2.0)
    v = asy.t_w_of_V(1e8, 0.01, 1) / asy.t_w_of_V(1e8, 0.01, 5)
    assert v == pytest.approx(2.231443166940565, rel=1e-13)
    assert asy.speedup_initiation(5) == pytest.approx(v, rel=1e-13)


@pytest.mark.parametrize("w", [1, 2, 3, 5])
@pytest.mark.parametrize("beta", [1e-3, 0.01, 0.2])
def test_inverse_checks(w, beta):
    for N in (1.0, 1e4, 1e6):
        t = asy.t_w_of_N(N, beta, w)
        assert asy.clone_size(t, beta, w) == pytest.approx(N, rel=1e-12)
    for V in (1.0, 1e9):
        t = asy.t_w_of_V(V, beta, w)
        quad = integrate.quad(lambda s: asy.clone_size(s, beta, w), 0, t, epsabs=0,
                              epsrel=1e-13)[0]
        assert quad == pytest.approx(V, rel=1e-12)
        assert asy.clone_size_integral(t, beta, w) == pytest.approx(V, rel=1e-12)
    assert asy.t_w_of_V(0, beta, w) == 0.0


def test_gamma_scalings():
    g1 = asy.gamma_metaparameter(1e6, 1e-6, 1e-5, 0.01, 1)
    for w in range(2, 7):
        gw = asy.gamma_metaparameter(1e6, 1e-6, 1e-5, 0.01, w)
        assert gw / g1 == pytest.approx(asy.gamma_ratio(w), rel=1e-13)
    assert asy.gamma_metaparameter(1e6, 1e-6, 2e-5, 0.01, 1) == pytest.approx(g1 / 2, rel=1e-14)
    assert asy.gamma_metaparameter(2e6, 1e-6, 1e-5, 0.01, 1) == pytest.approx(8 * g1, rel=1e-14)
    with pytest.raises(ValueError):
        asy.gamma_metaparameter(0, 1e-6, 1e-5, 0.01, 1)


def test_gamma_beta_log_scaling():
    def g(b):
        return asy.gamma_metaparameter(1e6, 1e-6, 1e-5, b, 3)
    for b1, b2 in ((1e-3, 1e-4), (1e-4, 1e-6)):
        want = (b2 * math.log(1 / b2)) / (b1 * math.log(1 / b1))
        assert g(b2) / g(b1) == pytest.approx(want, rel=0.01)


def test_formulas_finite_positive_on_grid():
    for b in np.logspace(-8, math.log10(1 / math.e) - 1e-9, 40):
        for w in range(1, 8):
            vals = [asy.h_beta(b), asy.tau_beta(b), asy.c_w_asym(b, w),
                    asy.t_w_of_N(100, b, w), asy.t_w_of_V(100, b, w),
                    asy.gamma_metaparameter(1e6, 1e-6, 1e-5, b, w)]
            assert all(math.isfinite(v) and v > 0 for v in vals)
