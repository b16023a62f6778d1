"""Local Polynomial Method (LPM) estimation of the best linear approximation.

Around every bin ``k`` the FRF and the transient are modelled as degree-``R``
polynomials in the bin offset ``r``::

    Y(k+r) = sum_s g_s r^s U(k+r) + sum_s t_s r^s + V(k+r),   r = -n..n

and the ``2(R+1)`` complex coefficients are obtained by linear least squares.
The same engine handles the multi-transient model used for concatenated
records, where every splice point adds one more transient polynomial
multiplied by a known phase ramp.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectrumRecord

RCOND = 1e-10
EXCITATION_RTOL = 1e-10


class LpmError(ValueError):
    """Local least-squares problem could not be solved at some bins."""

    def __init__(self, message: str, bins=()):
        super().__init__(message)
        self.bins = [int(b) for b in bins]


@dataclass(frozen=True)
class LpmConfig:
    """Polynomial order ``R``, half window ``n`` and the inclusive estimation band."""

    poly_order_R: int = 2
    half_window_n: int = 3
    band_bins: tuple[int, int] = (100, 500)

    def __post_init__(self):
        if self.poly_order_R < 1:
            raise ValueError("poly_order_R must be >= 1")
        if self.half_window_n < self.poly_order_R + 1:
            raise ValueError(
                f"half window n={self.half_window_n} violates n >= R+1 = {self.poly_order_R + 1}"
            )
        if self.band_bins[0] < 1 or self.band_bins[1] < self.band_bins[0]:
            raise ValueError(f"invalid band {self.band_bins}; bin 0 is never estimated")

    @property
    def n_params(self) -> int:
        return 2 * (self.poly_order_R + 1)

    @property
    def dof(self) -> int:
        return 2 * self.half_window_n + 1 - self.n_params

    @classmethod
    def default(cls, band_bins, poly_order_R: int = 2, with_noise: bool = False) -> "LpmConfig":
        n = poly_order_R + (2 if with_noise else 1)
        return cls(poly_order_R, n, (int(band_bins[0]), int(band_bins[1])))

    def to_dict(self) -> dict:
        return {
            "kind": "lpm",
            "poly_order_R": self.poly_order_R,
            "half_window_n": self.half_window_n,
            "band_bins": list(self.band_bins),
        }


@dataclass(frozen=True)
class LocalTheta:
    """Local polynomial coefficients at the window centre."""

    g: complex
    g_derivs: np.ndarray
    t: complex
    t_derivs: np.ndarray


@dataclass
class FrfEstimate:
    """Per-bin nonparametric BLA with transient, noise and FRF variances.

    ``noise_var`` and ``g_var`` are NaN where the local problem has no
    residual degrees of freedom.
    """

    bins: np.ndarray
    g_bla: np.ndarray
    transient: np.ndarray
    noise_var: np.ndarray
    g_var: np.ndarray
    dof: np.ndarray
    config: object
    n_fft: int
    sample_rate_hz: float
    splice_transients: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.bins)

    @property
    def freq_hz(self) -> np.ndarray:
        return np.asarray(self.bins) * self.sample_rate_hz / self.n_fft

    @property
    def variance(self) -> np.ndarray:
        return self.g_var


def window_layout(bins, n: int, band_bins) -> tuple[np.ndarray, np.ndarray]:
    """Window centres and evaluation offsets for every estimation bin.

    Windows are shifted at the band edges so all ``2n+1`` lines stay in-band;
    the estimate is then read off the local polynomial at offset ``r0``.
    """
    k_min, k_max = band_bins
    if k_max - k_min + 1 < 2 * n + 1:
        raise LpmError(
            f"band {k_min}..{k_max} holds {k_max - k_min + 1} bins, fewer than 2n+1 = {2 * n + 1}"
        )
    bins = np.asarray(bins)
    centres = np.clip(bins, k_min + n, k_max - n)
    return centres, bins - centres


def local_regressors(u_lines, centres, n: int, R: int, offsets=(0,), n_total=None) -> np.ndarray:
    """Stacked local regressors, shape ``(B, 2n+1, (R+1)(1+len(offsets)))``.

    Columns are the plant block ``U(k+r) r^s`` followed by one transient block
    ``w(k+r) r^s`` per entry of ``offsets`` with ``w = exp(-2j pi (k+r) m / N)``.
    """
    n_total = len(u_lines) if n_total is None else n_total
    r = np.arange(-n, n + 1)
    powers = (r[:, None] ** np.arange(R + 1)[None, :]).astype(float)  # 0**0 == 1
    idx = np.asarray(centres)[:, None] + r[None, :]
    if idx.min() < 0 or idx.max() >= len(u_lines):
        raise LpmError("window exits spectrum bounds")
    blocks = [np.asarray(u_lines)[idx][..., None] * powers]
    for m in offsets:
        phase = np.exp(-2j * np.pi * ((idx * int(m)) % n_total) / n_total)
        blocks.append(phase[..., None] * powers)
    return np.concatenate(blocks, axis=-1)


def _solve_windows(K, Yw, bins, eval_offsets, R: int, n_blocks: int, excitation_ref: float):
    """Batched column-scaled QR solve of every local problem.

    Returns ``theta`` (unscaled), the evaluation vectors' FRF value and
    variance factor ``c^T (K^H K)^-1 c``, residual sum of squares, and the
    transient values per block at the evaluation offset.
    """
    B, W, p = K.shape
    plant_norm = np.linalg.norm(K[:, :, 0], axis=1)
    dead = plant_norm <= EXCITATION_RTOL * excitation_ref
    if excitation_ref == 0:
        dead[:] = True

    norms = np.linalg.norm(K, axis=1)
    scale = np.where(norms > 0, norms, 1.0)
    Q, Rm = np.linalg.qr(K / scale[:, None, :])
    diag = np.abs(np.diagonal(Rm, axis1=1, axis2=2))
    deficient = dead | (diag.min(axis=1) <= RCOND * diag.max(axis=1))
    if np.any(deficient):
        bad = np.asarray(bins)[deficient]
        shown = ", ".join(str(b) for b in bad[:10]) + (" ..." if bad.size > 10 else "")
        raise LpmError(f"unexcited window (rank-deficient local regressor) at bin(s) {shown}", bad)

    qy = np.einsum("bwp,bw->bp", Q.conj(), Yw)
    theta = np.linalg.solve(Rm, qy[..., None])[..., 0] / scale
    resid = Yw - np.einsum("bwp,bp->bw", K, theta)
    rss = np.sum(np.abs(resid) ** 2, axis=1)

    pw = np.asarray(eval_offsets, dtype=float)[:, None] ** np.arange(R + 1)[None, :]
    g = np.sum(theta[:, : R + 1] * pw, axis=1)
    c = np.zeros((B, p))
    c[:, : R + 1] = pw
    v = np.linalg.solve(np.conj(np.swapaxes(Rm, 1, 2)), (c / scale)[..., None])[..., 0]
    var_factor = np.sum(np.abs(v) ** 2, axis=1)
    trans = np.stack(
        [np.sum(theta[:, (b + 1) * (R + 1):(b + 2) * (R + 1)] * pw, axis=1) for b in range(n_blocks - 1)],
        axis=1,
    )
    return theta, g, var_factor, rss, trans, resid


def _check_pair(U: SpectrumRecord, Y: SpectrumRecord):
    if U.n_fft != Y.n_fft:
        raise ValueError(f"input and output spectra differ in length ({U.n_fft} vs {Y.n_fft})")
    if U.sample_rate_hz != Y.sample_rate_hz:
        raise ValueError("input and output spectra differ in sample rate")


def _estimate(U, Y, R, n, band_bins, offsets, config) -> FrfEstimate:
    _check_pair(U, Y)
    k_min, k_max = band_bins
    if k_max >= U.n_fft:
        raise LpmError(f"band {k_min}..{k_max} exceeds the {U.n_fft}-line spectrum")
    bins = np.arange(k_min, k_max + 1)
    centres, r0 = window_layout(bins, n, band_bins)
    K = local_regressors(U.lines, centres, n, R, offsets, U.n_fft)
    Yw = Y.lines[centres[:, None] + np.arange(-n, n + 1)[None, :]]
    ref = float(np.max(np.abs(U.lines[k_min:k_max + 1])))
    _, g, var_factor, rss, trans, _ = _solve_windows(
        K, Yw, bins, r0, R, 1 + len(offsets), ref
    )
    dof = 2 * n + 1 - K.shape[2]
    if dof >= 1:
        noise_var = rss / dof
        g_var = noise_var * var_factor
    else:
        noise_var = np.full(bins.size, np.nan)
        g_var = np.full(bins.size, np.nan)
    return FrfEstimate(
        bins=bins,
        g_bla=g,
        transient=trans[:, 0].copy(),
        noise_var=noise_var,
        g_var=g_var,
        dof=np.full(bins.size, dof, dtype=int),
        config=config,
        n_fft=U.n_fft,
        sample_rate_hz=U.sample_rate_hz,
        splice_transients=trans,
    )


def build_local_regressor(U: SpectrumRecord, k: int, config: LpmConfig):
    """Local regressor ``K`` of size ``(2n+1) x 2(R+1)`` and the window's bins.

    The window is shifted inside ``config.band_bins`` near the band edges; the
    returned bins give the ``Y`` lines that pair with the rows of ``K``.
    """
    n, R = config.half_window_n, config.poly_order_R
    centres, _ = window_layout([k], n, config.band_bins)
    K = local_regressors(U.lines, centres, n, R, (0,), U.n_fft)[0]
    return K, centres[0] + np.arange(-n, n + 1)


def solve_local(K, Ybar, eval_offset: int = 0):
    """Least-squares solution of one local problem ``Ybar = K theta + V``.

    Returns ``(theta, residual, noise_var, g_var)`` where ``noise_var`` is the
    residual power divided by ``(2n+1) - 2(R+1)`` and ``g_var`` the variance of
    the FRF value at ``eval_offset``.
    """
    K = np.asarray(K, dtype=complex)
    Ybar = np.asarray(Ybar, dtype=complex)
    W, p = K.shape
    if p % 2:
        raise ValueError("SISO regressor must have an even number of columns")
    R = p // 2 - 1
    ref = float(np.max(np.abs(K[:, 0])))
    theta, g, var_factor, rss, _, resid = _solve_windows(
        K[None], Ybar[None], [0], [eval_offset], R, 2, ref
    )
    dof = W - p
    noise_var = float(rss[0] / dof) if dof >= 1 else float("nan")
    th = theta[0]
    local = LocalTheta(g=complex(g[0]), g_derivs=th[1: R + 1], t=complex(th[R + 1]), t_derivs=th[R + 2:])
    return local, resid[0], noise_var, noise_var * float(var_factor[0])


def estimate_frf(U: SpectrumRecord, Y: SpectrumRecord, config: LpmConfig) -> FrfEstimate:
    """SISO LPM estimate at every bin of ``config.band_bins``."""
    est = _estimate(
        U, Y, config.poly_order_R, config.half_window_n, config.band_bins, (0,), config
    )
    est.meta["operating_points"] = [U.source_meta.to_dict()]
    return est
