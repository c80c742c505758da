import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randlin.driving import make_driving
from randlin.spectrum import (HyperbolicityError, Spectrum, block_diagonalize, constants_budget,
                              frame_deviation, holder_estimate, invariance_defect,
                              lyapunov_exponents, oseledets_splitting, resonance_report,
                              subspace_distance)
from randlin.system import make_system

from conftest import catalog

LN2, LN3 = math.log(2), math.log(3)


def test_constant_diagonal_exponents():
    sp = lyapunov_exponents(make_system(np.diag([2.0, 0.5])), make_driving(), 10_000)
    assert np.allclose(sp.exponents, [LN2, -LN2], atol=1e-10)


def test_example_exponents_and_tau():
    system, driving, _ = catalog("example_1_9")
    sp = lyapunov_exponents(system, driving)
    assert np.allclose(sp.exponents, [LN3, LN2, -LN2], atol=1e-10)
    assert sp.tau == 2
    assert sp.coords == ((2,), (1,), (0,))


def _birkhoff_oracle(driving, mats, n):
    # arithmetic mean of per-symbol log diagonal entries along the realized symbols
    syms = driving.symbols(0, n)
    logs = np.log(np.abs(np.stack([np.diag(m) for m in mats])))
    return logs[syms].mean(axis=0)


def test_random_diagonal_exponents():
    mats = [np.diag([2.0, 1 / 8]), np.diag([4.0, 0.5])]
    driving = make_driving("bernoulli", alphabet=2, probabilities=[.5, .5], seed=7)
    system = make_system(np.stack(mats))
    sp = lyapunov_exponents(system, driving, 100_000)
    oracle = _birkhoff_oracle(driving, mats, 100_000)
    assert np.allclose(sp.exponents, oracle, atol=1e-10)
    assert abs(sp.exponents[0] - 1.5 * LN2) < 5e-3
    assert abs(sp.exponents[1] + 2 * LN2) < 5e-3


def test_zero_exponent_rejected():
    with pytest.raises(HyperbolicityError):
        lyapunov_exponents(make_system(np.diag([2.0, 1.0])), make_driving())


def test_short_run_rejected():
    with pytest.raises(ValueError):
        lyapunov_exponents(make_system(np.diag([2.0, 0.5])), make_driving(), 100)


def test_resonance_triage_cases():
    r = resonance_report(Spectrum.from_exponents([LN3, LN2, -LN2]))
    assert r.belitskii_ok and r.bunching_ok
    r = resonance_report(Spectrum.from_exponents([math.log(4), LN2, -LN2]))
    assert not r.belitskii_ok and r.violations == ((1, 3, 2),)
    r = resonance_report(Spectrum.from_exponents([math.log(8), LN2, -LN2]))
    assert r.belitskii_ok and not r.bunching_ok


def _enumerate_resonances(lam, tau):
    out = []
    for i in range(tau):
        for k in range(tau, len(lam)):
            for j in range(len(lam)):
                if abs(lam[i] + lam[k] - lam[j]) <= 1e-9 * max(1.0, max(abs(v) for v in lam)):
                    out.append((i + 1, k + 1, j + 1))
    return tuple(out)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-6, 6).filter(lambda v: v != 0), min_size=2, max_size=5, unique=True))
def test_resonance_matches_enumeration(ints):
    # integer multiples of ln2 make resonances common
    lam = sorted((v * LN2 for v in ints), reverse=True)
    sp = Spectrum.from_exponents(lam)
    assert resonance_report(sp).violations == _enumerate_resonances(lam, sp.tau)


def test_linear_splitting_is_coordinate():
    system = make_system(np.diag([3.0, 2.0, 0.5]))
    s = oseledets_splitting(system, make_driving(), np.zeros(3))
    assert np.allclose(s.P, np.eye(3), atol=1e-14)


def test_example_splitting_at_origin_is_coordinate():
    system, driving, sp = catalog("example_1_9")
    s = oseledets_splitting(system, driving, np.zeros(3), spectrum=sp)
    for j, b in enumerate(s.bases):
        assert subspace_distance(b, np.eye(3)[:, sp.coords[j]]) < 1e-14


def test_splitting_invariance(rng):
    system, driving, sp = catalog("example_1_9")
    for x in rng.uniform(-0.05, 0.05, size=(20, 3)):
        assert invariance_defect(system, driving, x, sp) < 1e-8


def test_block_diagonal_conjugation(rng):
    system, driving, sp = catalog("example_1_9")
    x = rng.uniform(-0.05, 0.05, 3)
    fr = block_diagonalize(system, driving, x, n_steps=10, spectrum=sp)
    assert fr.off_block_residual() < 1e-9


def test_frame_close_to_identity_near_origin(rng):
    system, driving, sp = catalog("saddle_2d")
    budget = constants_budget(sp)
    for x in rng.uniform(-0.02, 0.02, size=(5, 2)):
        fr = block_diagonalize(system, driving, x, n_steps=0, spectrum=sp)
        assert frame_deviation(fr) <= budget.delta_E(0.02) or frame_deviation(fr) < 0.1


def test_subspace_distance_cases():
    e1, e2 = np.eye(2)
    assert subspace_distance(e1[:, None], e1[:, None]) == 0.0
    assert abs(subspace_distance(e1[:, None], e2[:, None]) - 1.0) < 1e-15
    t = 0.3
    assert abs(subspace_distance(e1[:, None], (math.cos(t) * e1 + math.sin(t) * e2)[:, None])
               - math.sin(t)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_subspace_distance_symmetric_and_bounded(seed):
    r = np.random.default_rng(seed)
    E, F = r.normal(size=(4, 2)), r.normal(size=(4, 2))
    d = subspace_distance(E, F)
    assert 0 <= d <= 1 + 1e-12
    assert abs(d - subspace_distance(F, E)) < 1e-12
    assert subspace_distance(E, E @ r.normal(size=(2, 2))) < 1e-10


def test_holder_estimate_synthetic(rng):
    x = rng.uniform(0, 1, 200)
    y = rng.uniform(0, 1, 200)
    assert abs(holder_estimate(np.c_[np.abs(x - y), np.abs(x - y)]) - 1.0) < 0.05
    # the square root is only 1/2-Hölder at 0, so pairs are anchored near 0
    y = x * rng.uniform(0, 1e-3, 200)
    est = holder_estimate(np.c_[np.abs(x - y), np.abs(np.sqrt(x) - np.sqrt(y))])
    assert abs(est - 0.5) < 0.05


def test_holder_estimate_needs_pairs():
    with pytest.raises(ValueError):
        holder_estimate(np.ones((5, 2)))


def test_budget_fields_positive():
    b = constants_budget(Spectrum.from_exponents([LN3, LN2, -LN2]))
    assert b.epsilon > 0 and 0 < b.beta_N <= 1 and b.lambda_max == 2 * LN3
