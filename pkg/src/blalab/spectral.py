"""Unitary DFT, period segmentation and period averaging.

All spectra in the package use ``X(k) = N**-0.5 * sum_t x(t) exp(-2j*pi*k*t/N)``.
No windowing is applied; leakage is handled by the local polynomial
estimators instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal import OperatingPoint, SignalRecord


@dataclass
class SpectrumRecord:
    """DFT lines ``X(k)``, ``k = 0 .. N-1``."""

    lines: np.ndarray
    sample_rate_hz: float
    n_avg: int = 1
    source_meta: OperatingPoint = field(default_factory=OperatingPoint)

    def __post_init__(self):
        self.lines = np.asarray(self.lines, dtype=complex)

    def __len__(self):
        return self.lines.size

    @property
    def n_fft(self) -> int:
        return self.lines.size

    def freqs_hz(self, bins=None) -> np.ndarray:
        bins = np.arange(self.n_fft) if bins is None else np.asarray(bins)
        return bins * self.sample_rate_hz / self.n_fft

    def __getitem__(self, k):
        return self.lines[k]


def dft(record, sample_rate_hz: float | None = None) -> SpectrumRecord:
    """DFT of one frame with the unitary ``1/sqrt(N)`` scaling.

    ``record`` may be a :class:`SignalRecord` (the whole record is treated as a
    single frame) or a plain array, in which case ``sample_rate_hz`` is
    required.
    """
    if isinstance(record, SignalRecord):
        x, fs, meta = record.samples, record.sample_rate_hz, record.metadata
    else:
        if sample_rate_hz is None:
            raise ValueError("sample_rate_hz is required for raw arrays")
        x, fs, meta = np.asarray(record, dtype=float), sample_rate_hz, OperatingPoint()
    if x.size == 0:
        raise ValueError("cannot transform an empty record")
    return SpectrumRecord(np.fft.fft(x) / np.sqrt(x.size), fs, 1, meta)


def idft(spectrum: SpectrumRecord) -> np.ndarray:
    """Inverse of :func:`dft`; returns the real part of the time signal."""
    n = spectrum.n_fft
    return np.real(np.fft.ifft(spectrum.lines) * np.sqrt(n))


def split_periods(record: SignalRecord, discard_transient_periods: int = 1) -> list[SignalRecord]:
    """Split a periodic record into single-period records, dropping leading ones."""
    p, n = record.n_periods, record.samples_per_period
    if discard_transient_periods < 0:
        raise ValueError("discard_transient_periods must be non-negative")
    if discard_transient_periods >= p:
        raise ValueError(
            f"cannot discard {discard_transient_periods} of {p} periods; at least one must remain"
        )
    return [
        SignalRecord(
            samples=record.samples[i * n:(i + 1) * n].copy(),
            sample_rate_hz=record.sample_rate_hz,
            samples_per_period=n,
            n_periods=1,
            metadata=record.metadata,
        )
        for i in range(discard_transient_periods, p)
    ]


def period_average(spectra: list[SpectrumRecord]) -> tuple[SpectrumRecord, np.ndarray]:
    """Per-bin complex mean and sample variance (divisor ``P-1``) of ``P`` spectra.

    The returned variance is that of a single period; divide by ``P`` for the
    variance of the mean.
    """
    if len(spectra) < 2:
        raise ValueError("period averaging needs at least 2 spectra")
    n, fs = spectra[0].n_fft, spectra[0].sample_rate_hz
    for s in spectra[1:]:
        if s.n_fft != n or s.sample_rate_hz != fs:
            raise ValueError("spectra differ in length or sample rate")
    stack = np.stack([s.lines for s in spectra])
    mean = stack.mean(axis=0)
    var = np.sum(np.abs(stack - mean) ** 2, axis=0) / (len(spectra) - 1)
    avg = SpectrumRecord(mean, fs, sum(s.n_avg for s in spectra), spectra[0].source_meta)
    return avg, var


def period_spectra(record: SignalRecord, discard_transient_periods: int = 1) -> list[SpectrumRecord]:
    """DFT of every retained period of ``record``."""
    return [dft(p) for p in split_periods(record, discard_transient_periods)]
