import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randlin.driving import DrivingError, make_driving, orbit


def test_identity_orbit_repeats_one_state():
    o = orbit(make_driving("identity"), 5)
    assert len(o.states) == 11
    assert len(set(o.states)) == 1


def test_rotation_window_is_arithmetic_mod_one():
    a = (np.sqrt(5) - 1) / 2
    dr = make_driving("rotation", angle=a, seed=3)
    o = orbit(dr, 2)
    w0 = o.state(0)
    for n in range(-2, 3):
        assert abs((o.state(n) - (w0 + n * a)) % 1.0) < 1e-12 or \
            abs((o.state(n) - (w0 + n * a)) % 1.0 - 1.0) < 1e-12


def test_bernoulli_symmetric_coin_is_valid_shift():
    dr = make_driving("bernoulli", alphabet=2, probabilities=[0.5, 0.5], seed=7)
    s = dr.symbols(-500, 500)
    assert set(np.unique(s)) <= {0, 1}
    assert 0.4 < s.mean() < 0.6


def test_bernoulli_rejects_bad_probabilities():
    with pytest.raises(DrivingError, match="do not sum to 1"):
        make_driving("bernoulli", alphabet=2, probabilities=[0.7, 0.4])


def test_bernoulli_window_is_reproducible():
    a = orbit(make_driving("bernoulli", alphabet=2, probabilities=[.5, .5], seed=7), 3)
    b = orbit(make_driving("bernoulli", alphabet=2, probabilities=[.5, .5], seed=7), 3)
    assert len(a.states) == 7
    assert a.states == b.states


def test_unknown_kind():
    with pytest.raises(DrivingError):
        make_driving("brownian")


@settings(max_examples=30, deadline=None)
@given(k=st.integers(-20, 20), seed=st.integers(0, 2**32))
def test_bernoulli_shift_compatibility(k, seed):
    dr = make_driving("bernoulli", alphabet=3, probabilities=[.2, .3, .5], seed=seed)
    N = 25
    base = orbit(dr, N)
    moved = orbit(dr.advanced(k), N)
    for n in range(-N, N + 1):
        if -N <= n + k <= N:
            assert moved.state(n) == base.state(n + k)


@settings(max_examples=30, deadline=None)
@given(k=st.integers(-20, 20), angle=st.floats(0.0, 0.999))
def test_rotation_shift_compatibility(k, angle):
    dr = make_driving("rotation", angle=angle, seed=1)
    assert abs(dr.advanced(k).state(0) - dr.state(k)) < 1e-12
