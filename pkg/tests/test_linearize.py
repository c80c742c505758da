import math

import numpy as np
import pytest

from randlin.driving import make_driving
from randlin.linearize import (Conjugacy, PreconditionError, block_conjugation_residual,
                               block_linearize, decouple, decoupling_residual, escape_time,
                               full_conjugacy, halton_ball, measured_escape, one_sided_linearize,
                               verify_conjugacy)
from randlin.normalform import ResonanceError
from randlin.spectrum import system_spectrum
from randlin.system import OrbitMaps, load_system, make_system

from conftest import catalog


def _scalar(coef, rate=2.0, power=2):
    powers = {"terms": [{"out": 0, "powers": [power], "coef": coef}]}
    system = make_system(np.array([[rate]]), blocks=(1,), nonlinearity="polynomial",
                         params=powers, rho=0.1)
    return OrbitMaps(system, make_driving())


def test_linear_block_is_fixed():
    maps = OrbitMaps(make_system(np.array([[2.0]]), blocks=(1,)), make_driving())
    x = np.array([[0.05], [-0.02]])
    assert np.array_equal(block_linearize(maps, x).value, x)


def test_scalar_expanding_block():
    maps = _scalar(1.0)
    r = block_linearize(maps, [[0.05]])
    assert r.iterations <= 40
    assert block_conjugation_residual(maps, [[0.05], [0.03], [-0.07]]) < 1e-8


def test_scalar_block_derivative_decay():
    maps = _scalar(1.0)
    devs = []
    for x in (1e-1, 1e-2, 1e-3, 1e-4):
        h = 1e-7 * x
        d = (block_linearize(maps, [[x + h]]).value - block_linearize(maps, [[x - h]]).value)
        devs.append(abs(d.item() / (2 * h) - 1.0))
    assert all(b < a for a, b in zip(devs, devs[1:]))
    slope = np.polyfit(np.log([1e-2, 1e-3, 1e-4]), np.log(devs[1:]), 1)[0]
    assert slope > 0.9


def test_contracting_part():
    maps = _scalar(1.0, rate=0.5, power=3)
    lin = one_sided_linearize(maps, [0], "contracting")
    x = np.linspace(-0.09, 0.09, 13)[:, None]
    assert lin.residual(x) < 1e-8
    assert np.abs(lin.inverse(lin(x)) - x).max() < 1e-13


def test_linear_part_is_identity():
    maps = OrbitMaps(make_system(np.diag([3.0, 0.5])), make_driving())
    x = np.random.default_rng(0).uniform(-.1, .1, (10, 1))
    # exact up to rounding in the products of 3 and 1/3
    assert np.abs(one_sided_linearize(maps, [0], "expanding")(x) - x).max() < 1e-16
    assert np.abs(one_sided_linearize(maps, [1], "contracting")(x) - x).max() < 1e-16


def test_example_expanding_block(rng):
    system, driving, sp = catalog("example_1_9")
    maps = OrbitMaps(system, driving)
    lin = one_sided_linearize(maps, sp.unstable_coords, "expanding")
    x = rng.uniform(-0.05, 0.05, (20, 2))
    assert lin.residual(x) < 1e-7


def test_zero_decoupling_is_identity(rng):
    system = make_system(np.diag([3.0, 0.5]), rho=0.2)
    dec = decouple(system, make_driving())
    x = rng.uniform(-0.05, 0.05, (10, 2))
    assert np.abs(dec.phi(x) - x).max() < 1e-15


def test_example_decoupled_stable_block(rng):
    system, driving, sp = catalog("example_1_9")
    dec = decouple(system, driving, sp)
    z = rng.uniform(-0.05, 0.05, (10, 3))
    s = sp.stable_coords
    assert np.array_equal(dec.Fs(0, z[:, s]), 0.5 * z[:, s])
    assert decoupling_residual(dec, z) < 1e-12


def test_cross_coupling_scan(rng):
    for name in ("saddle_2d", "coupled_2d", "example_1_9"):
        system, driving, sp = catalog(name)
        dec = decouple(system, driving, sp)
        s, u = sp.stable_coords, sp.unstable_coords
        zu = rng.uniform(-0.04, 0.04, u.size)
        grid = np.zeros((9, system.d))
        grid[:, u] = zu
        grid[:, s] = np.linspace(-0.04, 0.04, 9)[:, None]
        x = dec.phi_inv(grid)
        out = dec.shifted(1).phi(dec.maps.F(0, x))[:, u]
        assert np.ptp(out, axis=0).max() < 1e-8


def test_curved_manifold_rejected():
    system = make_system(np.diag([3.0, 0.5]), nonlinearity="quadratic",
                         params={"terms": [[1, 0, 0, 0.5]]}, rho=0.2)
    with pytest.raises(PreconditionError):
        decouple(system, make_driving())


def test_zero_conjugacy_is_identity():
    system = make_system(np.diag([3.0, 0.5]), rho=0.2)
    conj = full_conjugacy(system, make_driving(), 0.05)
    rep = verify_conjugacy(conj, 100, local_derivatives=False)
    assert rep.max_residual < 1e-15
    assert np.abs(conj(rep.points) - rep.points).max() < 1e-15


@pytest.mark.parametrize("name", ["example_1_9", "random_2d", "coupled_2d"])
def test_conjugacy_catalog(name):
    system, driving, sp = catalog(name)
    conj = full_conjugacy(system, driving, 0.05, sp)
    rep = verify_conjugacy(conj, 200, local_derivatives=False)
    assert rep.max_residual < 1e-6
    assert rep.max_roundtrip < 1e-9
    assert rep.derivative_at_zero < 1e-6


def test_resonant_conjugacy_refused():
    system, driving = load_system("resonant_3d")
    with pytest.raises(ResonanceError):
        full_conjugacy(system, driving)


def test_halton_ball():
    x = halton_ball(1000, 3, 0.05)
    assert x.shape == (1000, 3)
    assert np.linalg.norm(x, axis=1).max() <= 0.05
    assert np.array_equal(x, halton_ball(1000, 3, 0.05))
    assert not np.array_equal(x, halton_ball(1000, 3, 0.05, seed=4))


def test_escape_stable_leaf_is_infinite():
    system, driving, sp = catalog("saddle_2d")
    res = escape_time(system, driving, np.array([[0.0, 0.03]]), sp)
    assert np.isinf(res.measured[0]) and np.isinf(res.bound[0])


def test_escape_linear_log2():
    system = make_system(np.diag([2.0, 2.0, 0.5]), blocks=(2, 1))
    sp = system_spectrum(system, make_driving())
    maps = OrbitMaps(system, make_driving())
    d = np.array([0.6, 0.8, 0.0])
    x = np.stack([2.0**-10 * 0.5 * d, 2.0**-11 * 1.01 * d]) + np.array([0, 0, 0.3])
    # strict inequality: 2^-11 * 2^10 = 1/2 does not exceed 1/2
    assert measured_escape(maps, sp, x).tolist() == [11.0, 10.0]


def test_escape_bound_catalog():
    for name in ("example_1_9", "saddle_2d"):
        system, driving, sp = catalog(name)
        x = halton_ball(50, system.d, 0.5, seed=3)
        assert escape_time(system, driving, x, sp).ok
