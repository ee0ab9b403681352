import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stacked_voter.coupling import coupled_run
from stacked_voter.lattice import LatticeGeometry, Site
from stacked_voter.rng import EventStream

G = LatticeGeometry(3, "periodic", 9)
sites = st.builds(Site, st.integers(0, 8), st.integers(0, 8), st.integers(0, 2))


@settings(max_examples=40, deadline=None)
@given(a=st.sets(sites, min_size=1, max_size=6), b=st.sets(sites, min_size=1, max_size=6),
       beta=st.floats(0, 1), seed=st.integers(0, 2**31))
def test_additivity_and_monotonicity(a, b, beta, seed):
    c = set(list(a)[:1])
    res = coupled_run([a, b, a | b, c], G, beta, 3.0, EventStream(seed, 0),
                      unions=[(0, 1, 2)], subsets=[(3, 0), (0, 2), (1, 2)])
    assert res.union_violations == 0 and res.subset_violations == 0
    assert res.finals[2] == res.finals[0] | res.finals[1]
    assert res.finals[3] <= res.finals[0]


def test_identical_starts_identical_paths():
    a = {Site(1, 1, 0), Site(2, 1, 1)}
    res = coupled_run([a, set(a)], G, 0.4, 5.0, EventStream(3, 0))
    assert res.finals[0] == res.finals[1]
    assert res.arrows > 0


def test_reflecting_geometry():
    g = LatticeGeometry(4, "reflecting", 8)
    a, b = {Site(0, 0, 0)}, {Site(4, 4, 3)}
    res = coupled_run([a, b, a | b], g, 0.2, 8.0, EventStream(7, 0), unions=[(0, 1, 2)])
    assert res.union_violations == 0


def test_stream_cursor_advances():
    s = EventStream(1, 0)
    res = coupled_run([{Site(0, 0, 0)}], G, 0.1, 2.0, s)
    assert s.cursor >= 4 * res.arrows > 0


def test_unbounded_rejected():
    with pytest.raises(ValueError):
        coupled_run([{Site(0, 0, 0)}], LatticeGeometry(3), 0.1, 1.0, EventStream(1, 0))
