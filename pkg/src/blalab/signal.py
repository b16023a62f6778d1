"""Random-phase multisine excitation design and rendering.

A multisine is described by its excited DFT bins, their amplitudes and
phases on a period of ``N`` samples. Rendering uses the unitary DFT
convention of :mod:`blalab.spectral`, so the line values stored in a
:class:`MultisineSpec` are exactly the input spectrum ``U(k)`` seen by the
estimators.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

GRID_KINDS = ("full", "odd", "odd_random")


class DesignError(ValueError):
    """Raised when a multisine cannot be designed from the requested band."""


@dataclass(frozen=True)
class OperatingPoint:
    """Acquisition conditions of a record, carried as metadata only."""

    soc_pct: float = 50.0
    temperature_c: float = 25.0
    rms_a: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not 0.0 <= self.soc_pct <= 100.0:
            raise ValueError(f"soc_pct must lie in [0, 100], got {self.soc_pct}")
        if self.rms_a < 0:
            raise ValueError(f"rms_a must be non-negative, got {self.rms_a}")

    def to_dict(self) -> dict:
        return {
            "soc_pct": self.soc_pct,
            "temperature_c": self.temperature_c,
            "rms_a": self.rms_a,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OperatingPoint":
        return cls(
            soc_pct=float(d.get("soc_pct", 50.0)),
            temperature_c=float(d.get("temperature_c", 25.0)),
            rms_a=float(d.get("rms_a", 0.0)),
            label=str(d.get("label", "")),
        )


@dataclass(frozen=True)
class MultisineSpec:
    """Line description of one multisine period.

    ``excited_bins``, ``amplitudes`` and ``phases`` are aligned arrays; the
    amplitude of every bin not listed is zero. ``band_bins`` is the inclusive
    bin range the design was drawn from, which also defines the detection
    lines of odd grids.
    """

    sample_rate_hz: float
    samples_per_period: int
    excited_bins: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    grid_kind: str
    band_bins: tuple[int, int]
    detection_group_size: int = 3
    rms_target: float = 1.0
    seed: int = 0

    def __post_init__(self):
        n = self.samples_per_period
        bins = np.asarray(self.excited_bins)
        if self.sample_rate_hz <= 0 or n <= 0:
            raise DesignError("sample rate and samples per period must be positive")
        if self.grid_kind not in GRID_KINDS:
            raise DesignError(f"unknown grid kind {self.grid_kind!r}")
        if bins.size == 0:
            raise DesignError("band too narrow for grid")
        if np.any(bins < 1) or np.any(2 * bins >= n):
            raise DesignError("excited bins must satisfy 1 <= k < N/2")
        if np.any(np.diff(bins) <= 0):
            raise DesignError("excited bins must be strictly increasing")
        if self.grid_kind != "full" and np.any(bins % 2 == 0):
            raise DesignError("odd grids may only excite odd bins")
        if not (len(self.amplitudes) == len(self.phases) == bins.size):
            raise DesignError("amplitudes and phases must align with excited bins")
        if np.any(np.asarray(self.amplitudes) < 0):
            raise DesignError("amplitudes must be non-negative")

    @property
    def n_excited(self) -> int:
        return int(len(self.excited_bins))

    @property
    def frequency_resolution_hz(self) -> float:
        return self.sample_rate_hz / self.samples_per_period

    @property
    def excited_freqs_hz(self) -> np.ndarray:
        return np.asarray(self.excited_bins) * self.frequency_resolution_hz

    def amplitude(self, k: int) -> float:
        idx = np.searchsorted(self.excited_bins, k)
        if idx < self.n_excited and self.excited_bins[idx] == k:
            return float(self.amplitudes[idx])
        return 0.0

    def line_spectrum(self) -> np.ndarray:
        """Full two-sided DFT lines ``U(k)``, ``k = 0 .. N-1``."""
        n = self.samples_per_period
        lines = np.zeros(n, dtype=complex)
        values = np.asarray(self.amplitudes) * np.exp(1j * np.asarray(self.phases))
        lines[self.excited_bins] = values
        lines[n - np.asarray(self.excited_bins)] = np.conj(values)
        return lines

    def with_phases(self, seed: int) -> "MultisineSpec":
        """Same lines and amplitudes, new phase realization."""
        rng = np.random.default_rng(seed)
        phases = rng.uniform(0.0, 2 * np.pi, size=self.n_excited)
        return MultisineSpec(
            sample_rate_hz=self.sample_rate_hz,
            samples_per_period=self.samples_per_period,
            excited_bins=self.excited_bins,
            amplitudes=self.amplitudes,
            phases=phases,
            grid_kind=self.grid_kind,
            band_bins=self.band_bins,
            detection_group_size=self.detection_group_size,
            rms_target=self.rms_target,
            seed=seed,
        )

    def to_dict(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "samples_per_period": int(self.samples_per_period),
            "excited_bins": [int(k) for k in self.excited_bins],
            "amplitudes": [float(a) for a in self.amplitudes],
            "phases": [float(p) for p in self.phases],
            "grid_kind": self.grid_kind,
            "band_bins": [int(self.band_bins[0]), int(self.band_bins[1])],
            "detection_group_size": int(self.detection_group_size),
            "rms_target": self.rms_target,
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MultisineSpec":
        return cls(
            sample_rate_hz=float(d["sample_rate_hz"]),
            samples_per_period=int(d["samples_per_period"]),
            excited_bins=np.asarray(d["excited_bins"], dtype=int),
            amplitudes=np.asarray(d["amplitudes"], dtype=float),
            phases=np.asarray(d["phases"], dtype=float),
            grid_kind=d["grid_kind"],
            band_bins=(int(d["band_bins"][0]), int(d["band_bins"][1])),
            detection_group_size=int(d.get("detection_group_size", 3)),
            rms_target=float(d.get("rms_target", 1.0)),
            seed=int(d.get("seed", 0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MultisineSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class SignalRecord:
    """Sampled time-domain data with its periodicity."""

    samples: np.ndarray
    sample_rate_hz: float
    samples_per_period: int
    n_periods: int = 1
    metadata: OperatingPoint = field(default_factory=OperatingPoint)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.samples_per_period <= 0 or self.n_periods <= 0:
            raise ValueError("samples_per_period and n_periods must be positive")
        if self.samples.size != self.samples_per_period * self.n_periods:
            raise ValueError(
                f"record holds {self.samples.size} samples, expected "
                f"{self.samples_per_period} x {self.n_periods}"
            )

    def __len__(self):
        return self.samples.size

    @property
    def time_s(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate_hz

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2)))


def band_to_bins(band_hz: Sequence[float], sample_rate_hz: float, n: int) -> tuple[int, int]:
    """Inclusive integer bin range covered by ``band_hz`` on an ``n``-point grid.

    Bins are clipped to ``1 <= k < n/2``.
    """
    f_lo, f_hi = band_hz
    if not 0 < f_lo < f_hi <= sample_rate_hz / 2:
        raise DesignError(
            f"band must satisfy 0 < f_lo < f_hi <= fs/2, got {f_lo}..{f_hi} at fs={sample_rate_hz}"
        )
    # round() guards against 1*5000/50 landing on 99.99999999
    k_lo = max(1, math.ceil(round(f_lo * n / sample_rate_hz, 9)))
    k_hi = min(math.floor(round(f_hi * n / sample_rate_hz, 9)), (n - 1) // 2)
    if k_hi < k_lo:
        raise DesignError("band does not contain any DFT bin")
    return k_lo, k_hi


def _thin_detection_lines(candidates: np.ndarray, group: int, rng) -> np.ndarray:
    keep = np.ones(candidates.size, dtype=bool)
    for start in range(0, candidates.size, group):
        stop = min(start + group, candidates.size)
        keep[start + rng.integers(stop - start)] = False
    return candidates[keep]


def design_multisine(
    band_hz: Sequence[float] = (1.0, 5.0),
    sample_rate_hz: float = 50.0,
    samples_per_period: int = 5000,
    grid_kind: str = "odd_random",
    detection_group_size: int = 3,
    rms_target: float = 10.0,
    seed: int = 0,
) -> MultisineSpec:
    """Design a flat-amplitude random-phase multisine.

    Parameters
    ----------
    band_hz : (f_lo, f_hi)
        Excitation band in Hz.
    sample_rate_hz, samples_per_period : float, int
        Sampling rate and period length ``N``; the frequency grid is
        ``k * fs / N``.
    grid_kind : {"full", "odd", "odd_random"}
        ``full`` excites every in-band bin, ``odd`` every odd bin, and
        ``odd_random`` removes one randomly chosen odd bin out of every
        ``detection_group_size`` consecutive odd bins.
    rms_target : float
        RMS value of the rendered signal.
    seed : int
        Seeds the detection-line selection and the phases.

    Returns
    -------
    MultisineSpec
    """
    if grid_kind not in GRID_KINDS:
        raise DesignError(f"unknown grid kind {grid_kind!r}; expected one of {GRID_KINDS}")
    if grid_kind == "odd_random" and detection_group_size < 2:
        raise DesignError("detection_group_size must be >= 2 for odd_random grids")
    if rms_target <= 0:
        raise DesignError("rms_target must be positive")
    n = int(samples_per_period)
    k_lo, k_hi = band_to_bins(band_hz, sample_rate_hz, n)
    candidates = np.arange(k_lo, k_hi + 1)
    rng = np.random.default_rng(seed)

    if grid_kind in ("odd", "odd_random"):
        candidates = candidates[candidates % 2 == 1]
    if grid_kind == "odd_random":
        candidates = _thin_detection_lines(candidates, detection_group_size, rng)
    if candidates.size == 0:
        raise DesignError("band too narrow for grid")

    phases = rng.uniform(0.0, 2 * np.pi, size=candidates.size)
    unit = MultisineSpec(
        sample_rate_hz=float(sample_rate_hz),
        samples_per_period=n,
        excited_bins=candidates,
        amplitudes=np.ones(candidates.size),
        phases=phases,
        grid_kind=grid_kind,
        band_bins=(k_lo, k_hi),
        detection_group_size=int(detection_group_size),
        rms_target=float(rms_target),
        seed=int(seed),
    )
    # scale in the time domain so the rendered RMS hits the target
    scale = rms_target / render_multisine(unit, 1).rms
    return MultisineSpec(
        sample_rate_hz=unit.sample_rate_hz,
        samples_per_period=n,
        excited_bins=candidates,
        amplitudes=np.full(candidates.size, scale),
        phases=phases,
        grid_kind=grid_kind,
        band_bins=(k_lo, k_hi),
        detection_group_size=int(detection_group_size),
        rms_target=float(rms_target),
        seed=int(seed),
    )


def render_multisine(
    spec: MultisineSpec, n_periods: int = 1, metadata: OperatingPoint | None = None
) -> SignalRecord:
    """Render ``n_periods`` periods of ``spec`` as a real time signal."""
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    n = spec.samples_per_period
    half = np.zeros(n // 2 + 1, dtype=complex)
    half[spec.excited_bins] = np.asarray(spec.amplitudes) * np.exp(1j * np.asarray(spec.phases))
    period = np.fft.irfft(half, n=n) * np.sqrt(n)
    if metadata is None:
        metadata = OperatingPoint(rms_a=spec.rms_target)
    return SignalRecord(
        samples=np.tile(period, n_periods),
        sample_rate_hz=spec.sample_rate_hz,
        samples_per_period=n,
        n_periods=n_periods,
        metadata=metadata,
    )


def riemann_band_power(spec: MultisineSpec, band: Sequence[int]) -> float:
    """Band power ``(1/N) sum |U(k)|^2`` over bins ``k1..k2`` and their mirrors.

    The mirrored (negative-frequency) lines are included so a full-band query
    returns the mean signal power, i.e. ``rms_target**2``.
    """
    k1, k2 = int(band[0]), int(band[1])
    n = spec.samples_per_period
    if k1 >= k2:
        raise ValueError("band must satisfy k1 < k2")
    if k1 < 1 or 2 * k2 >= n:
        raise ValueError(f"band {k1}..{k2} lies outside the representable range 1..{(n - 1) // 2}")
    bins = np.asarray(spec.excited_bins)
    sel = (bins >= k1) & (bins <= k2)
    return float(2.0 * np.sum(np.asarray(spec.amplitudes)[sel] ** 2) / n)
