"""Closed-form small-beta asymptotics for clone speed, size and initiation.

All logarithms are natural. Functions built on ``sqrt(log(1/beta))`` need
``log(1/beta) >= 1``, i.e. ``0 < beta <= 1/e``.
"""

from __future__ import annotations

import math

from .lattice import p_same_layer

BETA_MAX = 1.0 / math.e


def check_beta(beta: float, *, strict: bool = False) -> float:
    """Validate ``0 < beta <= 1/e`` (``< 1/e`` when ``strict``)."""
    beta = float(beta)
    ok = 0.0 < beta < BETA_MAX if strict else 0.0 < beta <= BETA_MAX * (1 + 1e-15)
    if not ok or math.isnan(beta):
        bound = "<" if strict else "<="
        raise ValueError(f"beta must satisfy 0 < beta {bound} 1/e, got {beta!r}")
    return beta


def _pw(w: int) -> float:
    return float(p_same_layer(w))


def h_beta(beta: float) -> float:
    """``(1/beta) log(1/beta)`` for ``0 < beta < 1``."""
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise ValueError(f"h(beta) needs 0 < beta < 1, got {beta!r}")
    return -math.log(beta) / beta


def tau_beta(beta: float) -> float:
    """Decision horizon ``(1/beta) / sqrt(log(1/beta))``."""
    beta = check_beta(beta)
    return 1.0 / (beta * math.sqrt(-math.log(beta)))


def a_w(w: int) -> float:
    """Speed prefactor ``p_w sqrt(pi w)``."""
    return _pw(w) * math.sqrt(math.pi * w)


def c_w_asym(beta: float, w: int) -> float:
    """Leading-order clone radius growth rate ``p_w sqrt(pi w beta) / sqrt(log(1/beta))``.

    The value is computed twice, directly and as ``a_w / sqrt(h(beta))``,
    and the two must agree to a few ulps.
    """
    beta = check_beta(beta)
    direct = _pw(w) * math.sqrt(math.pi * w * beta) / math.sqrt(-math.log(beta))
    via_h = a_w(w) / math.sqrt(h_beta(beta))
    if not math.isclose(direct, via_h, rel_tol=1e-13):
        raise ArithmeticError(f"c_w forms disagree: {direct!r} vs {via_h!r}")
    return direct


def clone_size(t: float, beta: float, w: int) -> float:
    """Stacked-disk cell count ``pi w (c_w t)^2`` at age ``t``."""
    return math.pi * w * (c_w_asym(beta, w) * t) ** 2


def clone_size_integral(t: float, beta: float, w: int) -> float:
    """``int_0^t pi w (c_w s)^2 ds``."""
    return math.pi * w * c_w_asym(beta, w) ** 2 * t ** 3 / 3.0


def t_w_of_N(N: float, beta: float, w: int) -> float:
    """Age at which a clone reaches ``N`` cells: ``h^(1/2) N^(1/2) / (p_w pi w)``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N!r}")
    check_beta(beta)
    return math.sqrt(h_beta(beta)) * math.sqrt(N) / (_pw(w) * math.pi * w)


def t_w_of_V(V: float, beta: float, w: int) -> float:
    """Time at which the integrated clone size reaches ``V``."""
    if V < 0:
        raise ValueError(f"V must be >= 0, got {V!r}")
    check_beta(beta)
    return (3.0 ** (1 / 3) * (_pw(w) * math.pi * w) ** (-2 / 3)
            * h_beta(beta) ** (1 / 3) * V ** (1 / 3))


def gamma_metaparameter(N: float, u1: float, u2: float, beta: float, w: int) -> float:
    """``N^3 (u1 beta)^3 c_w(beta)^-2 (u2 beta)^-1``."""
    for name, val in (("N", N), ("u1", u1), ("u2", u2)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val!r}")
    c = c_w_asym(beta, w)
    return N ** 3 * (u1 * beta) ** 3 / (c * c * u2 * beta)


def speedup_size(w: int) -> float:
    """``t_1(N) / t_w(N) = p_w w``."""
    return _pw(w) * w


def speedup_initiation(w: int) -> float:
    """``t_1(V) / t_w(V) = (p_w w)^(2/3)``."""
    return (_pw(w) * w) ** (2 / 3)


def gamma_ratio(w: int) -> float:
    """``Gamma(w) / Gamma(1) = 1 / (p_w^2 w)``."""
    return 1.0 / (_pw(w) ** 2 * w)


FORMULAS = {
    "h": lambda beta, w: h_beta(beta),
    "tau": lambda beta, w: tau_beta(beta),
    "c_w": c_w_asym,
    "a_w": lambda beta, w: a_w(w),
}
