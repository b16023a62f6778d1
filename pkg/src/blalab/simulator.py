"""Wiener-type surrogate with a known best linear approximation.

``z = L(q) u`` from a chosen initial state, then
``y = z + alpha2 z^2 + alpha3 z^3 + noise``. For Gaussian-like inputs the
BLA is ``(1 + 3 alpha3 var(z)) L``; the quadratic term only adds even-order
distortion and a DC offset.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import signal as sps

from .concat import ConcatDataset
from .fit import RationalModel
from .signal import MultisineSpec, OperatingPoint, SignalRecord, render_multisine
from .spectral import dft


class UnstableSystemError(ValueError):
    pass


def default_linear_block(sample_rate_hz: float = 50.0) -> RationalModel:
    """Third-order low-pass with a mild resonance at 3 Hz (damping 0.35).

    The in-band (1-5 Hz) gain is scaled so a 10 A RMS flat multisine gives an
    intermediate signal ``z`` with variance close to 0.85.
    """
    wr, zeta = 2 * np.pi * 3.0, 0.35
    s = -zeta * wr + 1j * wr * np.sqrt(1 - zeta**2)
    p = np.exp(s / sample_rate_hz)
    pr = np.exp(-2 * np.pi * 8.0 / sample_rate_hz)
    a = np.real(np.poly([p, np.conj(p), pr]))
    b = 0.004 * np.array([1.0, 0.4, 0.2, 0.1])
    return RationalModel(b=b, a=a, sample_rate_hz=sample_rate_hz)


@dataclass
class WienerSurrogate:
    linear: RationalModel
    alpha2: float = 0.0
    alpha3: float = 0.0
    noise_std: float = 0.0
    initial_state: np.ndarray | None = None
    op_point: OperatingPoint = field(default_factory=OperatingPoint)
    noise_pole: float | None = None

    @property
    def n_states(self) -> int:
        return max(self.linear.a.size, self.linear.b.size) - 1

    def check_stable(self):
        radii = self.linear.pole_radii()
        if radii.size and radii.max() >= 1.0:
            raise UnstableSystemError(f"linear block has a pole of radius {radii.max():.6g} >= 1")
        if self.noise_pole is not None and abs(self.noise_pole) >= 1.0:
            raise UnstableSystemError("noise colouring pole must lie inside the unit circle")

    def state(self) -> np.ndarray:
        if self.initial_state is None:
            return np.zeros(self.n_states)
        st = np.asarray(self.initial_state, dtype=float)
        if st.size != self.n_states:
            raise ValueError(f"initial_state needs {self.n_states} entries, got {st.size}")
        return st

    def frf(self, freq_hz) -> np.ndarray:
        return self.linear.response(freq_hz)


def surrogate_at(
    op: OperatingPoint,
    linear: RationalModel | None = None,
    alpha2: float | Callable[[float, float], float] = 0.0,
    alpha3: float | Callable[[float, float], float] = 0.0,
    gain: float | Callable[[float, float], float] = 1.0,
    noise_std: float = 0.0,
) -> WienerSurrogate:
    """Surrogate whose coefficients may depend on ``(soc_pct, temperature_c)``."""

    def ev(v):
        return float(v(op.soc_pct, op.temperature_c)) if callable(v) else float(v)

    lin = linear if linear is not None else default_linear_block()
    lin = replace(lin, b=lin.b * ev(gain))
    return WienerSurrogate(lin, ev(alpha2), ev(alpha3), noise_std, None, op)


def _lfilter_padded(lin: RationalModel, x, zi):
    n = max(lin.a.size, lin.b.size)
    b = np.pad(lin.b, (0, n - lin.b.size))
    a = np.pad(lin.a, (0, n - lin.a.size))
    return sps.lfilter(b, a, x, zi=zi)


def periodic_state(sys: WienerSurrogate, u_period) -> np.ndarray:
    """Filter state for which the response to the periodic ``u_period`` is periodic."""
    sys.check_stable()
    m = sys.n_states
    u_period = np.asarray(u_period, dtype=float)
    _, f0 = _lfilter_padded(sys.linear, u_period, np.zeros(m))
    phi = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        phi[:, j] = _lfilter_padded(sys.linear, np.zeros_like(u_period), e)[1]
    return np.linalg.solve(np.eye(m) - phi, f0)


def linear_response(sys: WienerSurrogate, u, zi=None) -> np.ndarray:
    sys.check_stable()
    zi = sys.state() if zi is None else zi
    return _lfilter_padded(sys.linear, np.asarray(u, dtype=float), zi)[0]


def simulate(sys: WienerSurrogate, u: SignalRecord, seed: int = 0) -> SignalRecord:
    """Output record of ``sys`` driven by ``u``; noise drawn from ``seed``."""
    sys.check_stable()
    z = linear_response(sys, u.samples)
    y = z + sys.alpha2 * z**2 + sys.alpha3 * z**3
    if sys.noise_std > 0:
        e = np.random.default_rng(seed).standard_normal(z.size)
        if sys.noise_pole is not None:
            e = sps.lfilter([1.0], [1.0, -sys.noise_pole], e)
        y = y + sys.noise_std * e
    return SignalRecord(
        samples=y,
        sample_rate_hz=u.sample_rate_hz,
        samples_per_period=u.samples_per_period,
        n_periods=u.n_periods,
        metadata=sys.op_point,
    )


def z_variance(sys: WienerSurrogate, spec: MultisineSpec) -> float:
    """Steady-state variance of ``z = L u`` for the multisine ``spec``."""
    n = spec.samples_per_period
    lin = sys.frf(spec.excited_freqs_hz)
    return float(2.0 * np.sum(np.abs(lin) ** 2 * np.asarray(spec.amplitudes) ** 2) / n)


def bussgang_factor(sys: WienerSurrogate, spec: MultisineSpec) -> float:
    return 1.0 + 3.0 * sys.alpha3 * z_variance(sys, spec)


def true_bla(sys: WienerSurrogate, spec: MultisineSpec) -> np.ndarray:
    """Analytic BLA ``(1 + 3 alpha3 var(z)) L`` at the excited bins of ``spec``.

    Assumes a Gaussian-like (random-phase) excitation; the quadratic term has
    no coherent contribution at the excited lines.
    """
    return bussgang_factor(sys, spec) * sys.frf(spec.excited_freqs_hz)


def cross_spectral_bla(
    sys: WienerSurrogate, spec: MultisineSpec, n_realizations: int = 100, seed: int = 0
) -> np.ndarray:
    """Brute-force BLA ``sum Y conj(U) / sum |U|^2`` over random phase realizations.

    Every realization is simulated in periodic steady state and noise-free,
    so the estimate only averages out the stochastic nonlinear contributions.
    """
    quiet = replace(sys, noise_std=0.0)
    seeds = np.random.SeedSequence(seed).generate_state(n_realizations)
    bins = np.asarray(spec.excited_bins)
    syu = np.zeros(bins.size, dtype=complex)
    suu = np.zeros(bins.size)
    for s in seeds:
        ms = spec.with_phases(int(s))
        u = render_multisine(ms, 1)
        quiet.initial_state = periodic_state(quiet, u.samples)
        y = simulate(quiet, u)
        U = dft(u).lines[bins]
        Y = dft(y).lines[bins]
        syu += Y * np.conj(U)
        suu += np.abs(U) ** 2
    return syu / suu


@dataclass
class CampaignMember:
    system: WienerSurrogate
    spec: MultisineSpec
    u: SignalRecord
    y: SignalRecord
    seed: int


@dataclass
class Campaign:
    members: list
    seed: int

    def __len__(self):
        return len(self.members)

    def pairs(self):
        return [(m.u, m.y) for m in self.members]

    def to_dataset(self) -> ConcatDataset:
        return ConcatDataset(
            [(m.u.samples, m.y.samples, m.system.op_point) for m in self.members],
            self.members[0].u.sample_rate_hz,
        )


def make_campaign(
    sys_family: Sequence[WienerSurrogate],
    spec: MultisineSpec,
    n_periods: int = 7,
    record_lengths: Sequence[int] | None = None,
    seed: int = 0,
    redraw_phases: bool = False,
    initial_state_scale: float = 1.0,
) -> Campaign:
    """One record per operating point, reproducible from ``seed``.

    Members whose ``initial_state`` is None get a random initial state with
    standard deviation ``initial_state_scale``. With ``record_lengths`` each
    record is cut to the given number of samples (and stored as one frame).
    """
    if not sys_family:
        raise ValueError("system family is empty")
    if record_lengths is not None and len(record_lengths) != len(sys_family):
        raise ValueError("record_lengths must match the number of systems")
    children = np.random.SeedSequence(seed).spawn(len(sys_family))
    members = []
    for i, (base, child) in enumerate(zip(sys_family, children)):
        phase_seed, state_seed, noise_seed = (int(v) for v in child.generate_state(3))
        ms = spec.with_phases(phase_seed) if redraw_phases else spec
        sys = replace(base)
        if sys.initial_state is None:
            rng = np.random.default_rng(state_seed)
            sys.initial_state = initial_state_scale * rng.standard_normal(sys.n_states)
        n = spec.samples_per_period
        if record_lengths is None:
            u = render_multisine(ms, n_periods, metadata=sys.op_point)
        else:
            length = int(record_lengths[i])
            if length < 1:
                raise ValueError("record lengths must be positive")
            full = render_multisine(ms, -(-length // n), metadata=sys.op_point)
            u = SignalRecord(full.samples[:length], full.sample_rate_hz, length, 1, sys.op_point)
        y = simulate(sys, u, noise_seed)
        members.append(CampaignMember(sys, ms, u, y, noise_seed))
    return Campaign(members, seed)
