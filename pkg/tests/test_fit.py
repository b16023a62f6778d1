import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blalab.fit import FitError, RationalModel, fit_tf, mdl_criterion, select_order
from blalab.simulator import default_linear_block

FS = 50.0
F = np.arange(100, 501) * FS / 5000


def frf(g, var=None):
    var = np.ones(g.size) if var is None else var
    return SimpleNamespace(g_bla=g, freq_hz=F, variance=var, sample_rate_hz=FS)


def test_exact_round_trip_recovers_coefficients():
    lin = default_linear_block()
    m = fit_tf(frf(lin.response(F)), 3, 3, weighting="uniform")
    np.testing.assert_allclose(m.b, lin.b, atol=1e-6)
    np.testing.assert_allclose(m.a, lin.a, atol=1e-6)
    assert m.a[0] == 1.0 and m.order == (3, 3) and m.n_params == 7


@settings(max_examples=15, deadline=None)
@given(r=st.floats(0.3, 0.9), th=st.floats(0.05, 0.6), b0=st.floats(0.1, 2.0), b1=st.floats(-1, 1))
def test_round_trip_for_random_second_order_systems(r, th, b0, b1):
    a = np.real(np.poly([r * np.exp(1j * th), r * np.exp(-1j * th)]))
    true = RationalModel(b=[b0, b1], a=a, sample_rate_hz=FS)
    m = fit_tf(frf(true.response(F)), 1, 2, weighting="uniform")
    np.testing.assert_allclose(m.response(F), true.response(F), rtol=1e-6, atol=1e-9)


def test_variance_weighting_matters():
    lin = default_linear_block()
    g = lin.response(F).copy()
    g[:50] += 0.5
    var = np.ones(F.size)
    var[:50] = 1e6
    w = fit_tf(frf(g, var), 3, 3)
    u = fit_tf(frf(g), 3, 3, weighting="uniform")
    tail = slice(50, None)
    assert np.max(np.abs(w.response(F)[tail] - g[tail])) < np.max(np.abs(u.response(F)[tail] - g[tail]))


def test_input_validation():
    g = default_linear_block().response(F)
    with pytest.raises(ValueError, match="variance"):
        fit_tf(frf(g, np.full(F.size, np.nan)), 2, 2)
    with pytest.raises(ValueError):
        fit_tf(frf(g), 2, 2, weighting="magic")
    with pytest.raises(ValueError):
        fit_tf(frf(g), -1, 2)
    small = SimpleNamespace(g_bla=g[:3], freq_hz=F[:3], variance=np.ones(3), sample_rate_hz=FS)
    with pytest.raises(ValueError):
        fit_tf(small, 3, 3)


def test_model_serialization_and_poles():
    lin = default_linear_block()
    back = RationalModel.from_dict(lin.to_dict())
    np.testing.assert_array_equal(back.b, lin.b)
    np.testing.assert_array_equal(back.a, lin.a)
    assert np.all(lin.pole_radii() < 1)
    assert lin.zeros().size == 3
    with pytest.raises(ValueError, match="monic"):
        RationalModel(b=[1.0], a=[2.0, 1.0])


def test_mdl_penalises_parameters():
    assert mdl_criterion(1.0, 5, 100) > mdl_criterion(1.0, 3, 100)
    assert mdl_criterion(2.0, 3, 100) == pytest.approx(2 * (1 + 3 * math.log(100) / 100))


def test_select_order_on_noisy_data_picks_three():
    lin = default_linear_block()
    L = lin.response(F)
    sigma = 0.01 * np.abs(L)
    picks = []
    for s in range(10):
        rng = np.random.default_rng(s)
        g = L + sigma * (rng.standard_normal(F.size) + 1j * rng.standard_normal(F.size)) / np.sqrt(2)
        sel = select_order(frf(g, sigma**2), [(k, k) for k in range(1, 6)])
        picks.append(sel.best.order)
        assert len(sel.table) == 5
        assert math.isfinite(sel.best.mdl)
    assert picks.count((3, 3)) >= 9


def test_exact_fits_tie_to_fewest_parameters():
    g = default_linear_block().response(F)
    sel = select_order(frf(g), [(5, 5), (4, 4), (3, 3)], weighting="uniform")
    assert sel.best.order == (3, 3)


def test_failed_fits_are_tabled():
    g = default_linear_block().response(F)
    sel = select_order(frf(g), [(3, 3), (300, 300)], weighting="uniform")
    bad = [r for r in sel.table if r.n_b == 300][0]
    assert bad.error and math.isnan(bad.mdl)
    with pytest.raises(ValueError):
        select_order(frf(g), [])


def test_fit_error_carries_best_model():
    err = FitError("x", RationalModel(b=[1.0], a=[1.0]))
    assert err.best.order == (0, 0)
