import math
import warnings

import numpy as np
import pytest
from scipy import signal as sps

from blalab.concat import (
    ConcatConfig,
    ConcatConfigError,
    ConcatDataset,
    MixedOperatingPointsWarning,
    build_concat_regressor,
    concat_and_transform,
    estimate_frf_concat,
)
from blalab.lpm import LpmConfig, estimate_frf
from blalab.signal import OperatingPoint, design_multisine, render_multisine
from blalab.spectral import dft


def sub_record(length, seed, state):
    spec = design_multisine((1, 5), 50, 5000, "full", rms_target=1, seed=seed)
    u = render_multisine(spec, 1).samples[:length]
    y, _ = sps.lfilter([0.1], [1, -0.9], u, zi=[state])
    return u, y


def g_first_order(f):
    return 0.1 / (1 - 0.9 * np.exp(-2j * np.pi * f / 50.0))


def band_for(total):
    return math.ceil(total / 50), math.floor(5 * total / 50)


def test_line_count_inequality_is_enforced_with_named_message():
    with pytest.raises(ConcatConfigError, match=r"2n\+1 >= \(R\+1\)\(1\+N_c\)"):
        ConcatConfig(2, 3, (100, 500)).validate(2)
    with pytest.raises(ConcatConfigError, match=r"2n\+1 > \(R\+1\)\(1\+N_c\)"):
        ConcatConfig(2, 4, (100, 500), estimate_noise_var=True).validate(2)
    ConcatConfig(2, 4, (100, 500), estimate_noise_var=False).validate(2)
    ConcatConfig(2, 5, (100, 500)).validate(2)


def test_default_window_leaves_two_residual_dof():
    for n_sub in (1, 2, 3, 5):
        for R in (1, 2, 3):
            cfg = ConcatConfig.default((100, 900), n_sub, R)
            cfg.validate(n_sub)
            dof = 2 * cfg.half_window_n + 1 - cfg.n_params(n_sub)
            assert dof >= 2
            assert cfg.half_window_n == math.ceil((cfg.n_params(n_sub) + 2) / 2)


def test_rejection_happens_before_any_computation():
    ds = ConcatDataset([(np.zeros(10), np.zeros(10)), (np.zeros(10), np.zeros(10))])
    with pytest.raises(ConcatConfigError):
        estimate_frf_concat(ds, ConcatConfig(2, 3, (1, 4)))


def test_dataset_validation_and_splices():
    ds = ConcatDataset([(np.ones(5), np.ones(5)), (np.ones(3), np.ones(3), OperatingPoint(10, 5))])
    np.testing.assert_array_equal(ds.splice_indices, [0, 5])
    assert ds.total_length == 8 and ds.lengths == [5, 3]
    with pytest.raises(ValueError, match="zero length"):
        ConcatDataset([(np.ones(5), np.ones(5)), (np.array([]), np.array([]))])
    with pytest.raises(ValueError, match="lengths differ"):
        ConcatDataset([(np.ones(5), np.ones(4))])
    with pytest.raises(ValueError):
        ConcatDataset([])


def test_single_subrecord_reduces_to_siso_lpm():
    u, y = sub_record(5000, 0, 0.5)
    ds = ConcatDataset([(u, y)])
    est_c = estimate_frf_concat(ds, ConcatConfig(2, 3, (100, 500)))
    est_s = estimate_frf(dft(u, 50.0), dft(y, 50.0), LpmConfig(2, 3, (100, 500)))
    np.testing.assert_allclose(est_c.g_bla, est_s.g_bla, rtol=1e-10)


def test_two_subrecords_with_splice_transients():
    parts = [sub_record(5000, 1, 2.0), sub_record(3700, 2, -3.0)]
    ds = ConcatDataset(parts)
    band = band_for(ds.total_length)
    cfg = ConcatConfig.default(band, 2)
    est = estimate_frf_concat(ds, cfg)
    U, Y, n_tot = concat_and_transform(ds)
    blind = estimate_frf(U, Y, LpmConfig(2, cfg.half_window_n, band))
    g0 = g_first_order(est.freq_hz)
    err_c = np.max(np.abs(est.g_bla - g0) / np.abs(g0))
    err_b = np.max(np.abs(blind.g_bla - g0) / np.abs(g0))
    assert n_tot == 8700
    assert err_c * 10 <= err_b
    assert est.splice_transients.shape == (len(est), 2)
    assert est.meta["splice_indices"] == [0, 5000]


def test_regressor_layout():
    parts = [sub_record(1000, 1, 0.0), sub_record(700, 2, 0.0)]
    ds = ConcatDataset(parts)
    U, _, n_tot = concat_and_transform(ds)
    cfg = ConcatConfig(2, 5, (40, 160))
    K = build_concat_regressor(U, 100, ds.splice_indices, cfg)
    assert K.shape == (11, 9)
    r = np.arange(-5, 6)
    np.testing.assert_allclose(K[:, 0], U.lines[100 + r])
    np.testing.assert_allclose(K[:, 3], np.ones(11))
    np.testing.assert_allclose(K[:, 6], np.exp(-2j * np.pi * (100 + r) * 1000 / n_tot))


def test_mixed_operating_points_warn_and_are_recorded():
    u1, y1 = sub_record(2000, 1, 0.0)
    u2, y2 = sub_record(2000, 2, 0.0)
    ds = ConcatDataset([(u1, y1, OperatingPoint(10, 5)), (u2, y2, OperatingPoint(10, 35))])
    with pytest.warns(MixedOperatingPointsWarning):
        est = estimate_frf_concat(ds, ConcatConfig.default(band_for(4000), 2))
    assert est.meta["mixed_operating_points"] is True
    assert [p["temperature_c"] for p in est.meta["operating_points"]] == [5, 35]
    same = ConcatDataset([(u1, y1), (u2, y2)])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        est = estimate_frf_concat(same, ConcatConfig.default(band_for(4000), 2))
    assert est.meta["mixed_operating_points"] is False


def test_unequal_lengths_give_finite_estimates():
    parts = [sub_record(3000, 1, 1.0), sub_record(5000, 2, -1.0), sub_record(4999, 3, 0.5)]
    parts[2] = (np.concatenate([parts[2][0], parts[2][0][:2001]]), np.concatenate([parts[2][1], parts[2][1][:2001]]))
    ds = ConcatDataset(parts)
    assert ds.lengths == [3000, 5000, 7000]
    est = estimate_frf_concat(ds, ConcatConfig.default(band_for(ds.total_length), 3))
    assert np.all(np.isfinite(est.g_bla)) and np.all(np.isfinite(est.g_var))
    assert np.all(est.dof == 2 * est.config.half_window_n + 1 - 12)


def test_leakage_shrinks_with_longer_subrecords():
    errs = []
    for length in (2500, 5000):
        ds = ConcatDataset([sub_record(length, 1, 2.0), sub_record(length, 2, -2.0)])
        est = estimate_frf_concat(ds, ConcatConfig.default(band_for(ds.total_length), 2))
        g0 = g_first_order(est.freq_hz)
        errs.append(np.max(np.abs(est.g_bla - g0)))
    assert errs[1] < errs[0]


def test_periodic_concatenation_matches_double_length_record():
    spec = design_multisine((1, 5), 50, 1000, "full", rms_target=1, seed=0)
    x = render_multisine(spec, 1).samples
    U, _, n_tot = concat_and_transform(ConcatDataset([(x, x), (x, x)]))
    ref = dft(np.concatenate([x, x]), 50.0)
    assert n_tot == 2000
    np.testing.assert_allclose(U.lines, ref.lines, atol=1e-12)
    assert U.freqs_hz([1])[0] == pytest.approx(0.025)
