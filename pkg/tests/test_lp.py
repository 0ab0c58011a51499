import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughsing import grid as G, lp, operators as ops
from conftest import cnormal

P = lp.DEFAULT_PROFILE


def test_profile_plateau_support_and_midpoint():
    assert lp.phi_hat(np.array([0.0, 0.25, 0.5])).tolist() == [1.0, 1.0, 1.0]
    assert lp.phi_hat(np.array([1.0, 3.0])).tolist() == [0.0, 0.0]
    assert lp.psi_hat(np.array([0.25, 3.0, 0.0])).tolist() == [0.0, 0.0, 0.0]
    # the bump is even, so the profile crosses 1/2 at the midpoint
    assert abs(P.eta(np.array([0.75]))[0] - 0.5) < 1e-14


def test_phi_hat_accepts_components():
    xi = (np.array([0.3]), np.array([0.4]))
    assert lp.phi_hat(xi) == lp.phi_hat(np.array([0.5]))


def test_eta_monotone_and_bounded():
    r = np.linspace(0, 1.2, 20001)
    e = P.eta(r)
    assert np.all(np.diff(e) <= 0)
    assert e.min() >= 0 and e.max() <= 1


def test_psi_identity(rng):
    r = rng.uniform(0, 3, 1000)
    assert np.abs(P.psi(r) ** 3 + P.phi(2 * r) - P.phi(r)).max() <= 1e-14


def test_psi_value_inside_annulus():
    # |xi| = 0.7: phi(1.4) = 0, so psi^3 = phi(0.7)
    assert abs(P.psi(np.array([0.7]))[0] ** 3 - P.phi(np.array([0.7]))[0]) < 1e-15


def test_schedule():
    assert [lp.POW2(j) for j in range(5)] == [0, 2, 4, 8, 16]
    t = lp.JumpSchedule.parse([0, 1, 3])
    assert t(2) == 3
    with pytest.raises(ValueError):
        lp.JumpSchedule("table", (0, 2, 2))
    with pytest.raises(ValueError):
        lp.JumpSchedule("table", (1, 2))
    with pytest.raises(ValueError):
        lp.POW2(-1)


@pytest.fixture
def line():
    return G.make_grid(1, 256, 16.0)


def test_partial_sum_of_constant(line):
    one = G.GridFunction(line, np.ones(256))
    for j in range(-3, 3):
        assert np.abs(lp.partial_sum(one, j).values - 1).max() < 1e-14
        assert np.abs(lp.delta_j(one, j).values).max() < 1e-14


def test_partial_sum_limits(line, rng):
    f = G.GridFunction(line, cnormal(rng, 256))
    lo, _ = lp.resolvable_range(line)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        assert np.abs(lp.partial_sum(f, lo).values - f.values).max() < 1e-10
    with pytest.warns(RuntimeWarning, match="not resolved"):
        lp.partial_sum(f, 10)


def test_partial_sum_kills_high_wave(line):
    kap = 40
    xi = np.pi * kap / line.L
    j = int(np.ceil(np.log2(1.0 / xi)))
    f = G.sample(line, lambda x: np.exp(1j * xi * x))
    assert np.abs(lp.partial_sum(f, j).values).max() < 1e-13


def test_delta_on_pure_wave(line):
    kap = 23
    xi = np.pi * kap / line.L
    j = int(np.floor(np.log2(0.95 / xi)))
    r = 2.0 ** j * xi
    f = G.sample(line, lambda x: np.exp(1j * xi * x))
    want = (P.phi(np.array([r])) - P.phi(np.array([2 * r])))[0]
    assert np.abs(lp.delta_j(f, j, 3).values - want * f.values).max() < 1e-13
    assert np.abs(lp.delta_j(f, j, 1).values - np.cbrt(want) * f.values).max() < 1e-13


def test_delta_power_validation(line):
    with pytest.raises(ValueError):
        lp.delta_j(G.GridFunction(line, np.ones(256)), 0, 4)


@pytest.mark.parametrize("n,M,L", [(1, 256, 16.0), (2, 64, 4.0)])
def test_telescoping(n, M, L, rng):
    spec = G.make_grid(n, M, L)
    f = G.GridFunction(spec, cnormal(rng, spec.shape))
    J = 2
    tot = sum(lp.delta_j(f, j, 3).values for j in range(-J, J + 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ref = lp.partial_sum(f, -J).values - lp.partial_sum(f, J + 1).values
    assert np.abs(tot - ref).max() <= 1e-12 * np.abs(f.values).max()


@pytest.mark.parametrize("side", ["low", "high"])
@given(k=st.integers(-2, 2), j=st.integers(1, 2))
def test_band_sum_is_difference_of_partial_sums(side, k, j):
    spec = G.make_grid(1, 1024, 16.0)
    rng = np.random.default_rng(100 + 10 * k + j)
    f = G.GridFunction(spec, cnormal(rng, 1024))
    N = lp.POW2
    if side == "low":
        a, b = k - N(j), k - N(j - 1)
    else:
        a, b = k + N(j - 1), k + N(j)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ref = lp.partial_sum(f, a).values - lp.partial_sum(f, b).values
    got = lp.band_sum(f, k, j, side).values
    assert np.abs(got - ref).max() <= 1e-12 * np.abs(f.values).max()


def test_band_side_validation(line):
    with pytest.raises(ValueError):
        lp.band_multiplier(line, 0, 1, "middle")


def test_square_function_bounded(rng):
    spec = G.make_grid(2, 64, 4.0)
    b = ops.linear_symbol(spec, [1.0, 0.0])
    f = G.GridFunction(spec, cnormal(rng, spec.shape) * ops.window(spec))
    r = lp.square_function_commutator_check(b, f, jrange=(-3, 2))
    assert 0 < r["ratio"] < 10
    assert r["jrange"] == (-3, 2)
