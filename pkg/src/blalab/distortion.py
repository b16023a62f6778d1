"""Nonparametric distortion analysis with odd and even detection lines.

Distortion levels come from the period-averaged output spectrum: nonlinear
contributions are periodic with the excitation and survive averaging. The
noise floor is the standard deviation of that mean, estimated from the
spread between periods.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal import MultisineSpec, OperatingPoint
from .spectral import SpectrumRecord, period_average

CLASS_CODES = {"excited": "E", "odd_nl": "O", "even_nl": "V", "noise_floor": "N"}
_LEVEL_FLOOR = 1e-300


class NoDetectionLinesError(ValueError):
    pass


@dataclass
class ClassLevels:
    bins: np.ndarray
    level_db: np.ndarray

    def mean_power_db(self) -> float:
        """``10 log10`` of the mean line power of the class."""
        if self.bins.size == 0:
            return float("nan")
        return float(10 * np.log10(np.mean(10 ** (self.level_db / 10))))


@dataclass
class DistortionReport:
    """Output levels at excited, odd-detection and even lines, plus the noise floor.

    The three line classes are disjoint. ``noise_floor`` covers every in-band
    bin so it can be drawn underneath all of them.
    """

    excited: ClassLevels
    odd_nl: ClassLevels
    even_nl: ClassLevels
    noise_floor: ClassLevels
    sample_rate_hz: float
    n_fft: int
    n_periods: int
    meta: OperatingPoint = field(default_factory=OperatingPoint)

    def classes(self):
        return {
            "excited": self.excited,
            "odd_nl": self.odd_nl,
            "even_nl": self.even_nl,
            "noise_floor": self.noise_floor,
        }

    def floor_at(self, bins) -> np.ndarray:
        idx = np.searchsorted(self.noise_floor.bins, bins)
        return self.noise_floor.level_db[idx]


def classify_lines(spec: MultisineSpec) -> dict[str, np.ndarray]:
    """Partition the in-band bins of an odd multisine into line classes."""
    if spec.grid_kind == "full":
        raise NoDetectionLinesError("no detection lines available on a full grid")
    k_lo, k_hi = spec.band_bins
    band = np.arange(k_lo, k_hi + 1)
    excited = np.asarray(spec.excited_bins)
    odd = band[band % 2 == 1]
    return {
        "excited": excited.copy(),
        "odd_detect": np.setdiff1d(odd, excited),
        "even": band[band % 2 == 0],
    }


def _db(x):
    return 20 * np.log10(np.maximum(np.abs(x), _LEVEL_FLOOR))


def analyze(output_periods: list[SpectrumRecord], spec: MultisineSpec) -> DistortionReport:
    """Distortion report from the DFTs of ``P >= 2`` steady-state output periods."""
    if len(output_periods) < 2:
        raise ValueError("noise floor unavailable: at least 2 steady-state periods are required")
    if output_periods[0].n_fft != spec.samples_per_period:
        raise ValueError("period length does not match the multisine design")
    classes = classify_lines(spec)
    mean, var = period_average(output_periods)
    p = len(output_periods)
    k_lo, k_hi = spec.band_bins
    band = np.arange(k_lo, k_hi + 1)
    floor = np.sqrt(var[band] / p)

    def levels(bins):
        return ClassLevels(bins=bins, level_db=_db(mean.lines[bins]))

    return DistortionReport(
        excited=levels(classes["excited"]),
        odd_nl=levels(classes["odd_detect"]),
        even_nl=levels(classes["even"]),
        noise_floor=ClassLevels(bins=band, level_db=_db(floor)),
        sample_rate_hz=spec.sample_rate_hz,
        n_fft=spec.samples_per_period,
        n_periods=p,
        meta=output_periods[0].source_meta,
    )
