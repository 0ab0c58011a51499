import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughsing import grid as G
from conftest import cnormal


@pytest.mark.parametrize("n", [1, 2])
def test_lattice_layout(n):
    spec = G.make_grid(n, 16, 2.0)
    assert spec.h == 0.25
    ax = spec.axis()
    # FFT order: 0, h, ..., then the negative half
    assert ax[0] == 0 and ax[1] == 0.25 and ax[8] == -2.0 and ax[-1] == -0.25
    assert spec.shape == (16,) * n and spec.size == 16 ** n


def test_bad_grids():
    with pytest.raises(G.GridError, match="unsupported dimension"):
        G.make_grid(3, 16, 1.0)
    with pytest.raises(G.GridError):
        G.make_grid(1, 15, 1.0)
    with pytest.raises(G.GridError):
        G.make_grid(1, 16, -1.0)


def test_freq_axis_is_angular():
    spec = G.make_grid(1, 32, 4.0)
    # the lowest nonzero frequency has period 2L
    assert np.isclose(spec.freq_axis()[1], np.pi / 4.0)


def test_plane_wave_lands_on_one_bin():
    spec = G.make_grid(1, 64, 4.0)
    x = spec.coords()[0]
    kap = 5
    f = G.GridFunction(spec, np.exp(1j * np.pi * kap * x / spec.L))
    F = G.dft(f).values
    assert np.argmax(np.abs(F)) == kap
    assert np.abs(np.delete(F, kap)).max() < 1e-12


@pytest.mark.parametrize("n,M", [(1, 256), (2, 32)])
def test_dft_inverse_and_parseval(n, M, rng):
    spec = G.make_grid(n, M, 3.0)
    f = G.GridFunction(spec, cnormal(rng, spec.shape))
    back = G.idft(G.dft(f)).values
    assert np.abs(back - f.values).max() <= 1e-12 * np.abs(f.values).max()
    a = G.lp_norm(f, 2) ** 2
    assert abs(a - np.sum(np.abs(G.dft(f).values) ** 2)) <= 1e-12 * a


def test_frequency_index_roundtrip():
    spec = G.make_grid(2, 16, 1.0)
    for pos in (0, 1, 17, 255, 128):
        idx = G.FrequencyIndex.from_flat(spec, pos)
        assert idx.flat == pos
        assert G.FrequencyIndex.from_xi(spec, idx.xi) == idx


def test_frequency_index_rejects_out_of_range():
    spec = G.make_grid(1, 16, 1.0)
    with pytest.raises(G.GridError):
        G.FrequencyIndex(spec, (9,))


@given(st.lists(st.floats(-1e6, 1e6), min_size=16, max_size=16))
def test_bytes_roundtrip(vals):
    spec = G.make_grid(1, 16, 2.5)
    f = G.GridFunction(spec, np.array(vals) * (1 + 0.5j))
    g = G.GridFunction.from_bytes(f.to_bytes())
    assert g.spec == spec
    assert np.array_equal(g.values, f.values)


def test_csv_export():
    spec = G.make_grid(1, 16, 1.0)
    text = G.GridFunction(spec, np.arange(16) + 2j).to_csv().splitlines()
    assert text[0] == "index,re,im" and text[3] == "2,2.0,2.0" and len(text) == 17


def test_nonfinite_rejected_with_location():
    spec = G.make_grid(1, 16, 2.0)
    with pytest.raises(G.GridError, match="lattice point"):
        G.sample(spec, lambda x: 1.0 / x)
    with pytest.raises(G.GridError):
        G.GridFunction(spec, np.full(16, np.nan))


def test_wrong_length_and_mismatched_specs():
    a = G.make_grid(1, 16, 1.0)
    with pytest.raises(G.GridError):
        G.GridFunction(a, np.zeros(15))
    f = G.GridFunction(a, np.ones(16))
    g = G.GridFunction(G.make_grid(1, 16, 2.0), np.ones(16))
    with pytest.raises(G.GridError):
        f + g


def test_lp_norm_oracles():
    spec = G.make_grid(1, 16, 2.0)
    f = G.GridFunction(spec, np.ones(16))
    # |1|_p^p = h * M = 2L
    assert np.isclose(G.lp_norm(f, 1), 4.0)
    assert np.isclose(G.lp_norm(f, 2), 2.0)
    assert np.isclose(G.lp_norm(f, 2, w=np.full(16, 4.0)), 4.0)
    assert G.lp_norm(f, np.inf) == 1.0
    with pytest.raises(G.GridError):
        G.lp_norm(f, 2, w=np.zeros(16))


def test_lp_norm_no_overflow():
    spec = G.make_grid(1, 16, 2.0)
    f = G.GridFunction(spec, np.full(16, 1e200))
    assert np.isclose(G.lp_norm(f, 4), 1e200 * 4.0 ** 0.25)


def test_weighted_inner_product(rng):
    spec = G.make_grid(2, 16, 1.0)
    f = G.GridFunction(spec, cnormal(rng, spec.shape))
    w = rng.uniform(0.5, 2.0, spec.shape)
    ip = G.weighted_inner_product(f, f, w)
    assert abs(ip.imag) < 1e-12
    assert np.isclose(ip.real, G.lp_norm(f, 2, w) ** 2)
