"""Common BLA from concatenated sub-records of arbitrary lengths.

Each sub-record start is modelled as a Dirac input driving the same
transient dynamics; on the DFT grid of the full concatenation this adds one
transient polynomial per splice multiplied by ``exp(-2j pi k m / N)``,
``m`` being the splice offset in samples.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lpm import FrfEstimate, _estimate, local_regressors, window_layout
from .signal import OperatingPoint
from .spectral import SpectrumRecord


class MixedOperatingPointsWarning(UserWarning):
    """Sub-records of one concatenation were acquired at different conditions."""


class ConcatConfigError(ValueError):
    pass


@dataclass
class ConcatDataset:
    """Ordered sub-records ``(u, y, meta)`` sharing one sample rate."""

    subrecords: list
    sample_rate_hz: float = 50.0
    splice_indices: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.subrecords:
            raise ValueError("dataset holds no sub-records")
        cleaned = []
        for i, item in enumerate(self.subrecords):
            u, y = np.asarray(item[0], dtype=float), np.asarray(item[1], dtype=float)
            meta = item[2] if len(item) > 2 and item[2] is not None else OperatingPoint()
            if u.size == 0:
                raise ValueError(f"sub-record {i} has zero length")
            if u.shape != y.shape:
                raise ValueError(f"sub-record {i}: input and output lengths differ")
            cleaned.append((u, y, meta))
        self.subrecords = cleaned
        lengths = [u.size for u, _, _ in cleaned]
        self.splice_indices = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(int)

    @property
    def n_subrecords(self) -> int:
        return len(self.subrecords)

    @property
    def lengths(self) -> list[int]:
        return [u.size for u, _, _ in self.subrecords]

    @property
    def total_length(self) -> int:
        return int(sum(self.lengths))

    @property
    def operating_points(self) -> list[OperatingPoint]:
        return [m for _, _, m in self.subrecords]


@dataclass(frozen=True)
class ConcatConfig:
    poly_order_R: int = 2
    half_window_n: int = 6
    band_bins: tuple[int, int] = (200, 1000)
    estimate_noise_var: bool = True

    def n_params(self, n_subrecords: int) -> int:
        return (self.poly_order_R + 1) * (1 + n_subrecords)

    def validate(self, n_subrecords: int):
        lines = 2 * self.half_window_n + 1
        need = self.n_params(n_subrecords)
        R, n = self.poly_order_R, self.half_window_n
        if self.poly_order_R < 1:
            raise ConcatConfigError("poly_order_R must be >= 1")
        if lines < need:
            raise ConcatConfigError(
                f"line-count inequality 2n+1 >= (R+1)(1+N_c) violated: "
                f"2*{n}+1 = {lines} < ({R}+1)(1+{n_subrecords}) = {need}"
            )
        if self.estimate_noise_var and lines == need:
            raise ConcatConfigError(
                f"line-count inequality 2n+1 > (R+1)(1+N_c) violated: "
                f"2*{n}+1 = {lines} = ({R}+1)(1+{n_subrecords}); noise variance needs "
                "residual degrees of freedom"
            )

    @classmethod
    def default(cls, band_bins, n_subrecords: int, poly_order_R: int = 2) -> "ConcatConfig":
        n = math.ceil(((poly_order_R + 1) * (1 + n_subrecords) + 2) / 2)
        return cls(poly_order_R, n, (int(band_bins[0]), int(band_bins[1])), True)

    def to_dict(self) -> dict:
        return {
            "kind": "concat_lpm",
            "poly_order_R": self.poly_order_R,
            "half_window_n": self.half_window_n,
            "band_bins": list(self.band_bins),
            "estimate_noise_var": self.estimate_noise_var,
        }


def concat_and_transform(ds: ConcatDataset) -> tuple[SpectrumRecord, SpectrumRecord, int]:
    """Unitary DFT of the full concatenated input and output records."""
    u = np.concatenate([s[0] for s in ds.subrecords])
    y = np.concatenate([s[1] for s in ds.subrecords])
    n = u.size
    meta = ds.subrecords[0][2]
    U = SpectrumRecord(np.fft.fft(u) / np.sqrt(n), ds.sample_rate_hz, 1, meta)
    Y = SpectrumRecord(np.fft.fft(y) / np.sqrt(n), ds.sample_rate_hz, 1, meta)
    return U, Y, n


def build_concat_regressor(U: SpectrumRecord, k: int, splice_indices, config: ConcatConfig) -> np.ndarray:
    """Local regressor with one plant block and one transient block per splice."""
    config.validate(len(splice_indices))
    n, R = config.half_window_n, config.poly_order_R
    centres, _ = window_layout([k], n, config.band_bins)
    return local_regressors(U.lines, centres, n, R, tuple(int(m) for m in splice_indices), U.n_fft)[0]


def estimate_frf_concat(ds: ConcatDataset, config: ConcatConfig) -> FrfEstimate:
    """LPM estimate of the common BLA of all sub-records of ``ds``.

    ``splice_transients`` of the result holds one column per sub-record start.
    """
    config.validate(ds.n_subrecords)
    U, Y, _ = concat_and_transform(ds)
    est = _estimate(
        U, Y, config.poly_order_R, config.half_window_n, config.band_bins,
        tuple(int(m) for m in ds.splice_indices), config,
    )
    points = ds.operating_points
    mixed = len({(p.soc_pct, p.temperature_c, p.rms_a) for p in points}) > 1
    est.meta["operating_points"] = [p.to_dict() for p in points]
    est.meta["splice_indices"] = [int(m) for m in ds.splice_indices]
    est.meta["mixed_operating_points"] = mixed
    if mixed:
        warnings.warn(
            "sub-records come from different operating points; the estimate is a common BLA "
            "and its variance includes the spread between conditions",
            MixedOperatingPointsWarning,
            stacklevel=2,
        )
    return est
