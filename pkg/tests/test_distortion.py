import numpy as np
import pytest

from blalab.distortion import CLASS_CODES, NoDetectionLinesError, analyze, classify_lines
from blalab.signal import design_multisine, render_multisine
from blalab.simulator import WienerSurrogate, default_linear_block, simulate
from blalab.spectral import period_spectra


@pytest.fixture(scope="module")
def odd_spec():
    return design_multisine((1, 5), 50, 5000, "odd_random", rms_target=10, seed=0)


def report(spec, a2=0.0, a3=0.0, noise=0.01):
    s = WienerSurrogate(default_linear_block(), alpha2=a2, alpha3=a3, noise_std=noise, initial_state=np.ones(3))
    return analyze(period_spectra(simulate(s, render_multisine(spec, 7), seed=1), 1), spec)


def test_classes_partition_the_band(odd_spec):
    c = classify_lines(odd_spec)
    band = np.arange(100, 501)
    allc = np.concatenate([c["excited"], c["odd_detect"], c["even"]])
    np.testing.assert_array_equal(np.sort(allc), band)
    assert len(set(allc.tolist())) == allc.size


def test_full_grid_has_no_detection_lines():
    with pytest.raises(NoDetectionLinesError):
        classify_lines(design_multisine(grid_kind="full"))


def test_even_nonlinearity_lands_on_even_lines(odd_spec):
    rep = report(odd_spec, a2=0.1)
    floor = rep.noise_floor.mean_power_db()
    assert rep.even_nl.mean_power_db() > floor + 20
    assert rep.odd_nl.mean_power_db() <= floor + 6


def test_odd_nonlinearity_lands_on_odd_detection_lines(odd_spec):
    rep = report(odd_spec, a3=0.1)
    floor = rep.noise_floor.mean_power_db()
    assert rep.odd_nl.mean_power_db() > floor + 20
    assert rep.even_nl.mean_power_db() <= floor + 6


def test_linear_system_shows_only_excited_lines(odd_spec):
    rep = report(odd_spec)
    floor = rep.noise_floor.mean_power_db()
    assert rep.excited.mean_power_db() > floor + 40
    for cls in (rep.odd_nl, rep.even_nl):
        assert abs(cls.mean_power_db() - floor) < 3


def test_noise_floor_covers_every_band_bin(odd_spec):
    rep = report(odd_spec)
    np.testing.assert_array_equal(rep.noise_floor.bins, np.arange(100, 501))
    k = rep.odd_nl.bins[:5]
    np.testing.assert_array_equal(rep.floor_at(k), rep.noise_floor.level_db[k - 100])
    assert set(rep.classes()) == set(CLASS_CODES)


def test_needs_two_periods(odd_spec):
    y = render_multisine(odd_spec, 2)
    with pytest.raises(ValueError, match="at least 2"):
        analyze(period_spectra(y, 1), odd_spec)
    with pytest.raises(ValueError):
        analyze(period_spectra(render_multisine(design_multisine(samples_per_period=4000), 3), 1), odd_spec)
