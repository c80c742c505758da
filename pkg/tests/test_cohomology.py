import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randlin.cohomology import (LyapunovNorm, SequenceFunction, TruncationError,
                                apply_cohomological_operator, canonical_frame,
                                cohomological_identity_residual, invert_cohomological_operator,
                                lyapunov_norm, norm_constant, operator_identity_residual,
                                series_branch, solve_stable_frame)
from randlin.driving import make_driving
from randlin.normalform import NormalFormMaps
from randlin.spectrum import constants_budget, system_spectrum
from randlin.system import OrbitMaps, make_system

from conftest import catalog

LN2 = math.log(2)
EPS = 3.2e-4


def test_lyapunov_norm_geometric_series():
    x = np.array([[1.5], [-2.0]])
    v = lyapunov_norm(np.array([[2.0]]), 0, x, LN2, EPS)
    oracle = np.abs(x[:, 0]) * (1 + math.exp(-EPS)) / (1 - math.exp(-EPS))
    assert np.allclose(v, oracle, rtol=1e-11)


def test_lyapunov_norm_of_zero():
    assert lyapunov_norm(np.array([[2.0]]), 0, np.zeros(1), LN2, EPS) == 0.0


def test_lyapunov_norm_multidimensional_constant():
    x = np.array([[1.5, 1.0]])
    v = lyapunov_norm(np.diag([2.0, 2.0]), 0, x, LN2, 0.05)
    oracle = math.hypot(1.5, 1.0) * (1 + math.exp(-0.05)) / (1 - math.exp(-0.05))
    assert abs(v[0] - oracle) < 1e-10 * oracle


def test_lyapunov_norm_dominates_euclidean(rng):
    system, driving, sp = catalog("random_2d")
    maps = OrbitMaps(system, driving)
    for j in range(sp.p):
        norm = LyapunovNorm.for_block(maps, sp, j, eps=0.05)
        x = rng.normal(size=(100, 1))
        assert np.all(norm(0, x) >= np.abs(x[:, 0]))
        assert norm_constant(norm, 0, 20) >= 1.0


def _lines(ri, rj, T=241, n0=-160):
    return np.full((T, 1, 1), ri), np.full((T, 1, 1), rj), n0


def test_zero_source_gives_zero():
    Li, Lj, n0 = _lines(2.0, 0.5)
    h = SequenceFunction.on_lines(lambda n, x: 0 * x, np.linspace(.01, .3, 5)[:, None],
                                  Li, Lj, n0)
    inv = invert_cohomological_operator(h, LN2, -LN2, 0.0, 2.0)
    assert np.all(inv.eta.values == 0)


def test_square_monomial_oracle():
    Li, Lj, n0 = _lines(2.0, 0.5)
    h = SequenceFunction.on_lines(lambda n, x: x**2, np.linspace(.01, .3, 10)[:, None],
                                  Li, Lj, n0)
    inv = invert_cohomological_operator(h, LN2, -LN2, 0.0, 2.0)
    exact = -h.points**2 / 7
    keep = np.abs(h.indices) <= 40
    rel = np.abs(inv.eta.values - exact)[keep] / np.abs(exact)[keep]
    assert rel.max() < 1e-10
    # eta(x) - r_j^-1 eta(r_i x) = x^2 for the closed form itself
    x = np.linspace(0.01, 0.3, 10)
    assert np.abs(-x**2 / 7 + 2 * (2 * x) ** 2 / 7 - x**2).max() < 1e-15


def test_fractional_monomial_oracle():
    vs = 0.25
    Li, Lj, n0 = _lines(2.0, 0.5)
    h = SequenceFunction.on_lines(lambda n, x: np.abs(x) ** vs, np.linspace(.01, .3, 10)[:, None],
                                  Li, Lj, n0)
    inv = invert_cohomological_operator(h, LN2, -LN2, 0.0, vs)
    s = 0.5 * 2**-vs
    exact = -np.abs(h.points) ** vs * s / (1 - s)
    keep = np.abs(h.indices) <= 40
    assert np.abs(inv.eta.values - exact)[keep].max() < 1e-10
    Th = apply_cohomological_operator(inv.eta)
    rel = np.abs(Th.values - h.values[:-1])[keep[:-1]].max() / np.abs(h.values).max()
    assert rel < 1e-10


def test_operator_identity_both_weights():
    Li, Lj, n0 = _lines(2.0, 0.5)
    for func, b in ((lambda n, x: x**2, 2.0), (lambda n, x: np.abs(x) ** 0.25, 0.25)):
        h = SequenceFunction.on_lines(func, np.linspace(.01, .3, 10)[:, None], Li, Lj, n0)
        inv = invert_cohomological_operator(h, LN2, -LN2, 0.0, b)
        r1, r2 = operator_identity_residual(h, inv.eta, 0.06, 0.0157, 0.0, EPS)
        assert r1 < 1e-9 and r2 < 1e-9


@settings(max_examples=25, deadline=None)
@given(li=st.floats(0.3, 1.2), lj=st.floats(-1.2, 1.2), b=st.floats(0.1, 2.0),
       seed=st.integers(0, 2**31))
def test_inverse_is_right_inverse(li, lj, b, seed):
    gap = b * li - lj
    if abs(gap) < 0.2:
        return
    r = np.random.default_rng(seed)
    T, n0 = 201, -100
    Li = np.exp(li + 0.1 * r.normal(size=(T, 1, 1)))
    Lj = np.exp(lj + 0.1 * r.normal(size=(T, 1, 1)))
    c = r.normal()
    h = SequenceFunction.on_lines(lambda n, x: c * np.abs(x) ** b, r.uniform(.01, .3, (4, 1)),
                                  Li, Lj, n0)
    try:
        inv = invert_cohomological_operator(h, li, lj, 0.0, b, window=20, tol=1e-6)
    except TruncationError:
        return
    Th = apply_cohomological_operator(inv.eta)
    keep = np.abs(h.indices[:-1]) <= 20
    err = np.abs(Th.values - h.values[:-1])[keep] / np.maximum(np.abs(h.values[:-1])[keep], 1e-300)
    assert err.max() < 1e-9


def test_branch_selection():
    assert series_branch(LN2, -LN2, 0.0, 2.0) == "past"
    assert series_branch(LN2, LN2, 0.0, 0.25) == "future"
    with pytest.raises(ValueError):
        series_branch(LN2, LN2, 0.0, 1.0)


def test_short_margin_flagged():
    g = np.linspace(.01, .3, 4)[:, None]
    # future series with a 4-step margin: the tail is far above tolerance
    Li, Lj = np.full((86, 1, 1), 2.0), np.full((86, 1, 1), 2.0)
    h = SequenceFunction.on_lines(lambda n, x: np.abs(x) ** 0.25, g, Li, Lj, -41)
    with pytest.raises(TruncationError, match="exceeds"):
        invert_cohomological_operator(h, LN2, LN2, 0.0, 0.25)
    # no margin at all
    Li, Lj = np.full((47, 1, 1), 2.0), np.full((47, 1, 1), 2.0)
    h = SequenceFunction.on_lines(lambda n, x: np.abs(x) ** 0.25, g, Li, Lj, -41)
    with pytest.raises(TruncationError, match="margin"):
        invert_cohomological_operator(h, LN2, LN2, 0.0, 0.25)


def test_linear_frame_field_is_constant():
    system = make_system(np.diag([3.0, 2.0, 0.5]), rho=0.2)
    nm = NormalFormMaps(system, make_driving())
    fr = solve_stable_frame(nm, 2, 0, 0)
    e = np.zeros(3)
    e[list(nm.spectrum.coords[2])] = 1.0
    assert np.abs(fr.values - e).max() < 1e-15


def test_example_frame_recursion():
    system, driving, sp = catalog("example_1_9")
    nm = NormalFormMaps(system, driving, spectrum=sp)
    for i in range(sp.tau):
        fr = solve_stable_frame(nm, sp.tau, 0, i, tol=1e-10)
        assert fr.iterations <= 30
        assert fr.max_ratio <= 0.5


def test_frame_recursion_contracts_coupled():
    system, driving, sp = catalog("saddle_2d")
    nm = NormalFormMaps(system, driving, spectrum=sp)
    fr = solve_stable_frame(nm, 1, 0, 0)
    assert fr.iterations <= 30 and fr.max_ratio <= 0.5
    assert fr.cohomology_residual < 1e-10
    varsigma = constants_budget(sp).varsigma
    assert np.isfinite(fr.growth(varsigma))
    tang = fr.tangency()
    assert tang[0, 1] < tang[-1, 1]


def test_linear_canonical_frame():
    system = make_system(np.diag([3.0, 2.0, 0.5]), rho=0.2)
    dr = make_driving()
    x = np.random.default_rng(1).uniform(-0.05, 0.05, (5, 3))
    fr = canonical_frame(system, dr, x)
    e = np.zeros((3, 1))
    e[2, 0] = 1.0
    assert np.abs(fr.zeta - e).max() < 1e-15


def test_example_frame_at_origin_is_standard():
    system, driving, sp = catalog("example_1_9")
    fr = canonical_frame(system, driving, np.zeros((1, 3)), sp)
    assert np.abs(fr.zeta[0, :, 0] - np.array([1.0, 0, 0])).max() < 1e-15


def test_frame_dual_construction(rng):
    for name in ("saddle_2d", "example_1_9", "random_2d"):
        system, driving, sp = catalog(name)
        x = rng.uniform(-0.05, 0.05, (20, system.d))
        fr = canonical_frame(system, driving, x, sp)
        assert fr.reconstruction_error < 1e-8
        assert fr.gram.min() > 1e-8
        assert cohomological_identity_residual(system, driving, x, sp) < 1e-7
