import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stacked_voter.lattice import (BoundaryCondition, LatticeGeometry, Site, index_site, mu_w,
                                   neighbors, p_same_layer, p_wd, site_index, torus_tables)


def test_neighbors_w3_periodic():
    got = neighbors(Site(0, 0, 0), LatticeGeometry(3))
    assert got == [Site(1, 0, 0), Site(-1, 0, 0), Site(0, 1, 0), Site(0, -1, 0),
                   Site(0, 0, 1), Site(0, 0, 2)]


def test_neighbors_w1():
    got = neighbors(Site(0, 0, 0), LatticeGeometry(1))
    assert set(got) == {Site(1, 0, 0), Site(-1, 0, 0), Site(0, 1, 0), Site(0, -1, 0)}
    assert got == neighbors(Site(0, 0, 0), LatticeGeometry(1, "reflecting"))


def test_neighbors_reflecting_top_layer():
    got = neighbors(Site(0, 0, 2), LatticeGeometry(3, "reflecting"))
    assert set(got) == {Site(1, 0, 2), Site(-1, 0, 2), Site(0, 1, 2), Site(0, -1, 2),
                        Site(0, 0, 1)}


def test_w2_vertical_neighbor_merged():
    for bc in BoundaryCondition:
        got = neighbors(Site(0, 0, 0), LatticeGeometry(2, bc))
        assert len(got) == 5
        assert got.count(Site(0, 0, 1)) == 1
    assert neighbors(Site(3, 4, 1), LatticeGeometry(2, "periodic")) == \
        neighbors(Site(3, 4, 1), LatticeGeometry(2, "reflecting"))


@pytest.mark.parametrize("w,bc,sizes", [
    (1, "periodic", {4}), (2, "periodic", {5}), (3, "periodic", {6}), (6, "periodic", {6}),
    (1, "reflecting", {4}), (2, "reflecting", {5}), (3, "reflecting", {5, 6}),
    (5, "reflecting", {5, 6}),
])
def test_neighborhood_sizes(w, bc, sizes):
    g = LatticeGeometry(w, bc)
    got = {len(neighbors(Site(0, 0, z), g)) for z in range(w)}
    assert got == sizes
    if bc == "reflecting" and w >= 3:
        assert len(neighbors(Site(0, 0, 0), g)) == 5
        assert len(neighbors(Site(0, 0, w - 1), g)) == 5
        assert all(len(neighbors(Site(0, 0, z), g)) == 6 for z in range(1, w - 1))


def test_invalid_layer():
    with pytest.raises(ValueError):
        neighbors(Site(0, 0, 3), LatticeGeometry(3))
    with pytest.raises(ValueError):
        neighbors(Site(0, 0, -1), LatticeGeometry(3))
    with pytest.raises(ValueError):
        LatticeGeometry(0)


def test_torus_window_reduces():
    g = LatticeGeometry(3, "periodic", 5)
    assert g.reduce(Site(-1, 7, 2)) == Site(4, 2, 2)
    assert Site(4, 0, 0) in neighbors(Site(0, 0, 0), g)


geoms = st.builds(LatticeGeometry, st.integers(1, 6), st.sampled_from(["periodic", "reflecting"]),
                  st.one_of(st.none(), st.integers(3, 9)))


@settings(max_examples=200, deadline=None)
@given(g=geoms, x=st.integers(-20, 20), y=st.integers(-20, 20), z=st.integers(0, 5))
def test_neighbor_relation_symmetric(g, x, y, z):
    s = g.reduce(Site(x, y, z % g.w))
    for t in neighbors(s, g):
        assert s in neighbors(t, g)
    assert s not in neighbors(s, g)
    assert len(set(neighbors(s, g))) == len(neighbors(s, g))


@pytest.mark.parametrize("w", range(1, 9))
def test_p_same_layer_matches_neighbor_count(w):
    nb = neighbors(Site(0, 0, 0), LatticeGeometry(w))
    same = sum(1 for t in nb if t.z == 0)
    assert p_same_layer(w) == Fraction(same, len(nb))


def test_p_same_layer_values():
    assert p_same_layer(1) == 1
    assert p_same_layer(2) == Fraction(4, 5)
    assert p_same_layer(7) == Fraction(2, 3)
    with pytest.raises(ValueError):
        p_same_layer(0)


def test_p_wd():
    assert p_wd(2, 2) == Fraction(4, 5)
    assert p_wd(2, 5) == Fraction(2, 3)
    assert p_wd(1, 3) == Fraction(1, 2)
    assert p_wd(1, 2) == Fraction(2, 3)
    for w in range(2, 9):
        assert p_wd(2, w) == p_same_layer(w)
    with pytest.raises(ValueError):
        p_wd(2, 1)


def test_mu_w():
    assert mu_w(2) == pytest.approx(5.026548245743669, rel=1e-15)
    assert mu_w(3) == pytest.approx(6.283185307179586, rel=1e-15)
    # 4 pi from 40-digit arithmetic
    assert mu_w(6) == pytest.approx(12.566370614359172, rel=1e-15)
    with pytest.raises(ValueError):
        mu_w(1)
    assert mu_w(1, allow_w1=True) == math.pi


@pytest.mark.parametrize("w,bc", [(1, "periodic"), (2, "periodic"), (3, "periodic"),
                                  (4, "reflecting"), (3, "reflecting")])
def test_torus_tables_match_neighbors(w, bc):
    L = 7
    tb = torus_tables(L, w, BoundaryCondition(bc))
    g = LatticeGeometry(w, bc, L)
    for i in range(tb.n_sites):
        s = index_site(i, L)
        assert site_index(s, L) == i
        want = [site_index(t, L) for t in neighbors(s, g)]
        assert tb.deg[i] == len(want)
        assert list(tb.nbr[i, :tb.deg[i]]) == want
        for j in range(tb.deg[i]):
            assert tb.nbr[tb.nbr[i, j], tb.rev[i, j]] == i
    assert tb.uniform_deg == (len(set(tb.deg.tolist())) == 1)
    assert np.all(tb.nbr[:, :tb.kmin] >= 0)
