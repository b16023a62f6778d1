import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blalab.signal import (
    DesignError,
    MultisineSpec,
    OperatingPoint,
    SignalRecord,
    band_to_bins,
    design_multisine,
    render_multisine,
    riemann_band_power,
)


def test_design_grid_arithmetic():
    spec = design_multisine((1, 5), 50, 5000, "full", rms_target=10)
    assert spec.frequency_resolution_hz == pytest.approx(0.01, abs=1e-15)
    assert spec.band_bins == (100, 500)
    assert spec.n_excited == 401
    rec = render_multisine(spec, 7)
    assert rec.samples.size == 35000
    assert abs(rec.rms - 10) <= 0.01


@pytest.mark.parametrize("grid", ["odd", "odd_random"])
def test_odd_grids_excite_only_odd_bins(grid):
    spec = design_multisine((1, 5), 50, 5000, grid, rms_target=10, seed=4)
    assert np.all(np.asarray(spec.excited_bins) % 2 == 1)
    assert abs(render_multisine(spec, 7).rms - 10) <= 0.01


def test_odd_random_removes_one_line_per_group():
    spec = design_multisine((1, 5), 50, 5000, "odd_random", detection_group_size=3, seed=1)
    odd = np.arange(101, 501, 2)
    kept = np.isin(odd, spec.excited_bins)
    for start in range(0, odd.size, 3):
        group = kept[start:start + 3]
        assert np.count_nonzero(~group) == 1


def test_rendered_dft_matches_line_description():
    spec = design_multisine((1, 5), 50, 1000, "full", rms_target=3, seed=7)
    x = render_multisine(spec, 1).samples
    X = np.fft.fft(x) / np.sqrt(x.size)
    np.testing.assert_allclose(X, spec.line_spectrum(), atol=1e-12)


def test_seeded_reproducibility_and_phase_redraw():
    a = design_multisine(seed=3)
    b = design_multisine(seed=3)
    np.testing.assert_array_equal(a.phases, b.phases)
    np.testing.assert_array_equal(a.excited_bins, b.excited_bins)
    c = a.with_phases(99)
    np.testing.assert_array_equal(c.excited_bins, a.excited_bins)
    assert not np.allclose(c.phases, a.phases)


def test_json_round_trip_is_exact():
    spec = design_multisine((1, 5), 50, 5000, "odd_random", seed=5)
    back = MultisineSpec.from_json(spec.to_json())
    np.testing.assert_array_equal(back.phases, spec.phases)
    np.testing.assert_array_equal(back.amplitudes, spec.amplitudes)
    assert back.band_bins == spec.band_bins
    json.loads(spec.to_json())


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(band_hz=(5, 1)),
        dict(band_hz=(0, 5)),
        dict(band_hz=(1, 30)),
        dict(band_hz=(1.001, 1.009)),
        dict(grid_kind="sparse"),
        dict(rms_target=0),
    ],
)
def test_invalid_designs(kwargs):
    with pytest.raises(DesignError):
        design_multisine(**kwargs)


def test_band_too_narrow_for_odd_grid():
    # bins 100..100 hold no odd line
    with pytest.raises(DesignError, match="too narrow"):
        design_multisine((1.0, 1.001), 50, 5000, "odd")


def test_band_to_bins_handles_float_roundoff():
    assert band_to_bins((1, 5), 50, 5000) == (100, 500)
    assert band_to_bins((0.1, 0.3), 50, 5000) == (10, 30)


def test_signal_record_validates_length():
    with pytest.raises(ValueError):
        SignalRecord(np.zeros(10), 50.0, 4, 3)
    rec = SignalRecord(np.zeros(12), 50.0, 4, 3)
    assert rec.time_s[-1] == pytest.approx(11 / 50)


def test_operating_point_bounds():
    with pytest.raises(ValueError):
        OperatingPoint(soc_pct=120)
    op = OperatingPoint(10, 5, 10, "a")
    assert OperatingPoint.from_dict(op.to_dict()) == op


def test_riemann_band_power_full_band_equals_mean_square():
    spec = design_multisine((1, 5), 50, 5000, "odd_random", rms_target=10, seed=2)
    p = riemann_band_power(spec, spec.band_bins)
    assert p == pytest.approx(render_multisine(spec).rms ** 2, rel=1e-12)


def test_riemann_band_power_errors():
    spec = design_multisine((1, 5), 50, 5000, "full")
    with pytest.raises(ValueError):
        riemann_band_power(spec, (300, 200))
    assert riemann_band_power(spec, (600, 700)) == 0.0


@settings(max_examples=25, deadline=None)
@given(split=st.integers(min_value=101, max_value=499), seed=st.integers(0, 2**16))
def test_riemann_band_power_is_additive(split, seed):
    spec = design_multisine((1, 5), 50, 5000, "full", rms_target=2, seed=seed)
    total = riemann_band_power(spec, (100, 500))
    parts = riemann_band_power(spec, (100, split)) + riemann_band_power(spec, (split + 1, 500))
    assert parts == pytest.approx(total, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(rms=st.floats(0.1, 50), seed=st.integers(0, 2**16))
def test_rms_target_is_met_for_any_level(rms, seed):
    spec = design_multisine((1, 5), 50, 2000, "odd_random", rms_target=rms, seed=seed)
    assert render_multisine(spec, 2).rms == pytest.approx(rms, rel=1e-9)
