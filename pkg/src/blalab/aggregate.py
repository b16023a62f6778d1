"""Averaging of independently estimated BLAs and BLA comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lpm import FrfEstimate
from .signal import OperatingPoint


class GridMismatchError(ValueError):
    """Two estimates do not share a frequency grid."""


@dataclass
class CommonBla:
    """Sample mean of ``M`` BLAs and the per-bin sample variance of the members.

    ``sample_var`` is the spread of the individual BLAs (NaN when
    ``m_experiments == 1``); :attr:`variance` is the variance of the mean,
    ``sample_var / M``, which is what fitting and comparisons use.
    """

    bins: np.ndarray
    c_bla: np.ndarray
    sample_var: np.ndarray
    m_experiments: int
    n_fft: int
    sample_rate_hz: float
    member_meta: list = field(default_factory=list)

    def __len__(self):
        return len(self.bins)

    @property
    def freq_hz(self) -> np.ndarray:
        return np.asarray(self.bins) * self.sample_rate_hz / self.n_fft

    @property
    def variance_available(self) -> bool:
        return self.m_experiments >= 2

    @property
    def g_bla(self) -> np.ndarray:
        return self.c_bla

    @property
    def variance(self) -> np.ndarray:
        return self.sample_var / self.m_experiments


def _same_grid(a, b) -> bool:
    return (
        a.n_fft == b.n_fft
        and a.sample_rate_hz == b.sample_rate_hz
        and np.array_equal(np.asarray(a.bins), np.asarray(b.bins))
    )


def _members_meta(est) -> list:
    if isinstance(est, CommonBla):
        return list(est.member_meta)
    points = est.meta.get("operating_points") or [OperatingPoint().to_dict()]
    return [OperatingPoint.from_dict(p) if isinstance(p, dict) else p for p in points]


def average_blas(estimates) -> CommonBla:
    """Equal-weight mean of ``M`` estimates and their sample variance (divisor ``M-1``)."""
    estimates = list(estimates)
    if not estimates:
        raise ValueError("need at least one estimate")
    first = estimates[0]
    for e in estimates[1:]:
        if not _same_grid(first, e):
            raise GridMismatchError("estimates do not share the same bin grid")
    stack = np.stack([np.asarray(e.g_bla, dtype=complex) for e in estimates])
    m = stack.shape[0]
    mean = stack.mean(axis=0)
    if m >= 2:
        var = np.sum(np.abs(stack - mean) ** 2, axis=0) / (m - 1)
    else:
        var = np.full(mean.shape, np.nan)
    meta = []
    for e in estimates:
        meta.extend(_members_meta(e))
    return CommonBla(
        bins=np.asarray(first.bins).copy(),
        c_bla=mean,
        sample_var=var,
        m_experiments=m,
        n_fft=first.n_fft,
        sample_rate_hz=first.sample_rate_hz,
        member_meta=meta,
    )


def restrict_to_grid(est, reference):
    """Pick the lines of ``est`` that coincide exactly with the frequencies of ``reference``.

    Used to bring an estimate on a finer grid (e.g. a concatenation of ``M``
    records, grid ``M*N``) onto the grid of a single record. No interpolation:
    every reference frequency must exist in ``est``.
    """
    if est.sample_rate_hz != reference.sample_rate_hz:
        raise GridMismatchError("sample rates differ")
    ref_bins = np.asarray(reference.bins, dtype=np.int64)
    num = ref_bins * est.n_fft
    if np.any(num % reference.n_fft):
        raise GridMismatchError("reference frequencies are not on the estimate's grid")
    wanted = num // reference.n_fft
    pos = np.searchsorted(est.bins, wanted)
    pos = np.clip(pos, 0, len(est.bins) - 1)
    if not np.array_equal(np.asarray(est.bins)[pos], wanted):
        raise GridMismatchError("estimate does not cover every reference frequency")
    if isinstance(est, CommonBla):
        return CommonBla(
            bins=ref_bins.copy(), c_bla=est.c_bla[pos], sample_var=est.sample_var[pos],
            m_experiments=est.m_experiments, n_fft=reference.n_fft,
            sample_rate_hz=est.sample_rate_hz, member_meta=list(est.member_meta),
        )
    return FrfEstimate(
        bins=ref_bins.copy(),
        g_bla=est.g_bla[pos],
        transient=est.transient[pos],
        noise_var=est.noise_var[pos],
        g_var=est.g_var[pos],
        dof=est.dof[pos],
        config=est.config,
        n_fft=reference.n_fft,
        sample_rate_hz=est.sample_rate_hz,
        splice_transients=None if est.splice_transients is None else est.splice_transients[pos],
        meta=dict(est.meta, source_n_fft=est.n_fft),
    )


@dataclass
class BlaComparison:
    bins: np.ndarray
    freq_hz: np.ndarray
    diff: np.ndarray
    var_a: np.ndarray
    var_b: np.ndarray
    max_db_gap: float
    mean_db_gap: float
    mean_abs_diff: float
    pooled_std: np.ndarray
    variance_ratio: float

    def summary(self) -> dict:
        return {
            "n_bins": int(len(self.bins)),
            "max_db_gap": self.max_db_gap,
            "mean_db_gap": self.mean_db_gap,
            "mean_abs_diff": self.mean_abs_diff,
            "mean_pooled_std": float(np.nanmean(self.pooled_std)),
            "variance_ratio": self.variance_ratio,
        }


def compare_blas(a, b) -> BlaComparison:
    """Per-bin difference ``b - a`` and summary statistics.

    ``variance_ratio`` is ``mean(var_b) / mean(var_a)`` over bins where both
    variances are available; ``pooled_std`` is ``sqrt(var_a + var_b)``.
    """
    if not _same_grid(a, b):
        raise GridMismatchError("estimates do not share the same bin grid")
    ga = np.asarray(a.g_bla, dtype=complex)
    gb = np.asarray(b.g_bla, dtype=complex)
    diff = gb - ga
    tiny = np.finfo(float).tiny
    db_gap = np.abs(20 * np.log10(np.maximum(np.abs(gb), tiny)) - 20 * np.log10(np.maximum(np.abs(ga), tiny)))
    va = np.asarray(a.variance, dtype=float)
    vb = np.asarray(b.variance, dtype=float)
    ok = np.isfinite(va) & np.isfinite(vb)
    ratio = float(np.mean(vb[ok]) / np.mean(va[ok])) if ok.any() and np.mean(va[ok]) > 0 else math.nan
    return BlaComparison(
        bins=np.asarray(a.bins).copy(),
        freq_hz=np.asarray(a.freq_hz),
        diff=diff,
        var_a=va,
        var_b=vb,
        max_db_gap=float(db_gap.max()),
        mean_db_gap=float(db_gap.mean()),
        mean_abs_diff=float(np.mean(np.abs(diff))),
        pooled_std=np.sqrt(va + vb),
        variance_ratio=ratio,
    )
