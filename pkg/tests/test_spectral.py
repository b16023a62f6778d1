import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from blalab.signal import SignalRecord
from blalab.spectral import dft, idft, period_average, period_spectra, split_periods


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 300), elements=st.floats(-1e3, 1e3)))
def test_unitary_dft_preserves_energy_and_inverts(x):
    X = dft(x, 10.0)
    assert np.sum(np.abs(X.lines) ** 2) == pytest.approx(np.sum(x**2), rel=1e-9, abs=1e-9)
    np.testing.assert_allclose(idft(X), x, atol=1e-9 * (1 + np.max(np.abs(x))))


def test_dft_of_cosine_on_grid():
    n, k = 64, 5
    x = np.cos(2 * np.pi * k * np.arange(n) / n)
    X = dft(x, 1.0).lines
    assert abs(X[k]) == pytest.approx(np.sqrt(n) / 2)
    X[[k, n - k]] = 0
    assert np.max(np.abs(X)) < 1e-12


def test_dft_rejects_empty_and_raw_without_rate():
    with pytest.raises(ValueError):
        dft(np.array([]), 1.0)
    with pytest.raises(ValueError):
        dft(np.ones(4))


def test_split_periods_discards_leading():
    rec = SignalRecord(np.arange(12.0), 2.0, 4, 3)
    parts = split_periods(rec, 1)
    assert len(parts) == 2
    np.testing.assert_array_equal(parts[0].samples, [4, 5, 6, 7])
    with pytest.raises(ValueError):
        split_periods(rec, 3)


def test_period_average_mean_and_variance():
    rec = SignalRecord(np.concatenate([np.ones(4), 3 * np.ones(4), 5 * np.ones(4)]), 1.0, 4, 3)
    spectra = period_spectra(rec, 0)
    mean, var = period_average(spectra)
    assert mean.lines[0] == pytest.approx(3 * 2)  # sqrt(4) * 3
    assert var[0] == pytest.approx(((2 - 6) ** 2 + 0 + (10 - 6) ** 2) / 2)
    assert mean.n_avg == 3


def test_period_average_needs_two_matching_spectra():
    rec = SignalRecord(np.ones(8), 1.0, 4, 2)
    s = period_spectra(rec, 0)
    with pytest.raises(ValueError):
        period_average(s[:1])
    with pytest.raises(ValueError):
        period_average([s[0], dft(np.ones(5), 1.0)])
