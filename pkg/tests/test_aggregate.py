import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blalab.aggregate import CommonBla, GridMismatchError, average_blas, compare_blas, restrict_to_grid
from blalab.lpm import FrfEstimate, LpmConfig


def est(g, bins=None, n_fft=1000, var=None, fs=50.0):
    g = np.asarray(g, dtype=complex)
    bins = np.arange(10, 10 + g.size) if bins is None else np.asarray(bins)
    var = np.full(g.size, 1e-4) if var is None else np.asarray(var, dtype=float)
    return FrfEstimate(bins, g, np.zeros(g.size, complex), var, var, np.ones(g.size, int),
                       LpmConfig(2, 3, (int(bins[0]), int(bins[-1]))), n_fft, fs)


def test_identical_members_have_zero_variance():
    g = np.array([1 + 1j, 2 - 1j, 0.5j])
    c = average_blas([est(g)] * 4)
    np.testing.assert_allclose(c.c_bla, g)
    np.testing.assert_allclose(c.sample_var, 0)
    assert c.m_experiments == 4 and c.variance_available


def test_two_opposite_members():
    g = np.array([2 + 1j])
    c = average_blas([est(g), est(-g)])
    assert c.c_bla[0] == 0
    assert c.sample_var[0] == pytest.approx(2 * abs(g[0]) ** 2)
    assert c.variance[0] == pytest.approx(abs(g[0]) ** 2)


def test_single_member_has_no_variance():
    c = average_blas([est([1.0, 2.0])])
    assert not c.variance_available
    assert np.all(np.isnan(c.sample_var))


def test_grid_mismatch_is_an_error():
    with pytest.raises(GridMismatchError):
        average_blas([est([1, 2]), est([1, 2], bins=[11, 12])])
    with pytest.raises(GridMismatchError):
        average_blas([est([1, 2]), est([1, 2], n_fft=2000)])
    with pytest.raises(GridMismatchError):
        compare_blas(est([1, 2]), est([1, 2], bins=[20, 21]))
    with pytest.raises(ValueError):
        average_blas([])


@settings(max_examples=30, deadline=None)
@given(
    data=st.lists(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                           min_size=3, max_size=3), min_size=2, max_size=6),
    perm_seed=st.integers(0, 1000),
    scale=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False),
)
def test_permutation_invariance_and_affine_equivariance(data, perm_seed, scale):
    members = [est(row) for row in data]
    base = average_blas(members)
    order = np.random.default_rng(perm_seed).permutation(len(members))
    perm = average_blas([members[i] for i in order])
    np.testing.assert_allclose(perm.c_bla, base.c_bla, rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(perm.sample_var, base.sample_var, rtol=1e-9, atol=1e-6)
    scaled = average_blas([est(np.asarray(row) * scale) for row in data])
    np.testing.assert_allclose(scaled.c_bla, base.c_bla * scale, rtol=1e-9, atol=1e-6)
    np.testing.assert_allclose(scaled.sample_var, base.sample_var * abs(scale) ** 2, rtol=1e-9, atol=1e-4)


def test_one_over_m_law():
    rng = np.random.default_rng(0)
    n_bins, sigma, m, trials = 300, 0.1, 6, 400
    truth = np.exp(1j * np.linspace(0, 3, n_bins))
    means = []
    for _ in range(trials):
        members = [est(truth + sigma * (rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)) / np.sqrt(2))
                   for _ in range(m)]
        means.append(average_blas(members).c_bla)
    ratio = np.var(means, axis=0, ddof=1) / (sigma**2 / m)
    assert np.all((ratio > 1 / 1.5) & (ratio < 1.5))


def test_error_drops_like_one_over_m():
    rng = np.random.default_rng(1)
    truth = np.ones(250, complex)

    def mse(m):
        errs = []
        for _ in range(200):
            members = [est(truth + 0.1 * (rng.standard_normal(250) + 1j * rng.standard_normal(250))) for _ in range(m)]
            errs.append(np.mean(np.abs(average_blas(members).c_bla - truth) ** 2))
        return np.mean(errs)

    assert mse(2) / mse(8) == pytest.approx(4, rel=0.5)


def test_restrict_to_grid_picks_exact_lines():
    fine = est(np.arange(30) + 0j, bins=np.arange(30, 60), n_fft=3000)
    coarse = est(np.zeros(10), bins=np.arange(10, 20), n_fft=1000)
    r = restrict_to_grid(fine, coarse)
    np.testing.assert_array_equal(r.bins, coarse.bins)
    np.testing.assert_allclose(r.g_bla, np.arange(0, 30, 3))
    assert r.n_fft == 1000
    with pytest.raises(GridMismatchError):
        restrict_to_grid(est(np.zeros(5), bins=np.arange(30, 35), n_fft=3000), coarse)
    with pytest.raises(GridMismatchError):
        restrict_to_grid(fine, est(np.zeros(3), n_fft=700))


def test_compare_identical_and_summary():
    a = est([1 + 1j, 2, 3j])
    cmp = compare_blas(a, a)
    np.testing.assert_array_equal(cmp.diff, 0)
    s = cmp.summary()
    assert s["max_db_gap"] == 0 and s["variance_ratio"] == pytest.approx(1)
    b = est([2 + 2j, 4, 6j], var=[4e-4] * 3)
    cmp = compare_blas(a, b)
    assert cmp.max_db_gap == pytest.approx(20 * np.log10(2))
    assert cmp.variance_ratio == pytest.approx(4)
    np.testing.assert_allclose(cmp.pooled_std, np.sqrt(5e-4))


def test_common_bla_compares_with_frf():
    members = [est([1, 2]), est([3, 4])]
    c = average_blas(members)
    assert isinstance(c, CommonBla)
    cmp = compare_blas(c, members[0])
    np.testing.assert_allclose(cmp.diff, [-1, -1])
