"""Weighted frequency-domain fitting of discrete-time rational models.

The model is ``G(z) = B(z^-1) / A(z^-1)`` with real coefficients and
``a[0] = 1``. Fitting minimises::

    V(theta) = (1/F) sum_k |G_meas(k) - B(k)/A(k)|^2 / var(k)

starting from iteratively reweighted linear least squares
(Sanathanan-Koerner) and refining with Levenberg-Marquardt.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SK_ITERATIONS = 10
MAX_ITER = 200
REL_TOL = 1e-10
# residual RMS below this fraction of the weighted data RMS counts as an exact fit
EXACT_FIT_RTOL = 1e-8


class FitError(RuntimeError):
    """Fit failed; ``best`` holds the best model reached, if any."""

    def __init__(self, message: str, best: "RationalModel | None" = None):
        super().__init__(message)
        self.best = best


@dataclass
class RationalModel:
    b: np.ndarray
    a: np.ndarray
    cost: float = 0.0
    mdl: float = math.nan
    n_freqs_used: int = 0
    sample_rate_hz: float = 1.0
    band_hz: tuple[float, float] = (0.0, 0.0)
    iterations: int = 0

    def __post_init__(self):
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if self.b.size == 0 or self.a.size == 0:
            raise ValueError("coefficient arrays must be nonempty")
        if self.a[0] != 1.0:
            raise ValueError("denominator must be monic (a[0] == 1)")

    @property
    def order(self) -> tuple[int, int]:
        return self.b.size - 1, self.a.size - 1

    @property
    def n_params(self) -> int:
        return self.b.size + self.a.size - 1

    def response(self, freq_hz) -> np.ndarray:
        zinv = np.exp(-2j * np.pi * np.asarray(freq_hz, dtype=float) / self.sample_rate_hz)
        return np.polyval(self.b[::-1], zinv) / np.polyval(self.a[::-1], zinv)

    def poles(self) -> np.ndarray:
        return np.roots(self.a) if self.a.size > 1 else np.array([], dtype=complex)

    def zeros(self) -> np.ndarray:
        b = np.trim_zeros(self.b, "b")
        return np.roots(b) if b.size > 1 else np.array([], dtype=complex)

    def pole_radii(self) -> np.ndarray:
        return np.abs(self.poles())

    def to_dict(self) -> dict:
        return {
            "b": [float(v) for v in self.b],
            "a": [float(v) for v in self.a],
            "cost": float(self.cost),
            "mdl": float(self.mdl) if math.isfinite(self.mdl) else None,
            "n_freqs_used": int(self.n_freqs_used),
            "sample_rate_hz": float(self.sample_rate_hz),
            "band": [float(self.band_hz[0]), float(self.band_hz[1])],
            "pole_radii": [float(r) for r in np.sort(self.pole_radii())],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RationalModel":
        mdl = d.get("mdl")
        return cls(
            b=d["b"], a=d["a"], cost=float(d.get("cost", 0.0)),
            mdl=math.nan if mdl is None else float(mdl),
            n_freqs_used=int(d.get("n_freqs_used", 0)),
            sample_rate_hz=float(d.get("sample_rate_hz", 1.0)),
            band_hz=tuple(d.get("band", (0.0, 0.0))),
        )


def _fit_data(frf, weighting: str):
    g = np.asarray(frf.g_bla, dtype=complex)
    freq = np.asarray(frf.freq_hz, dtype=float)
    if weighting == "uniform":
        var = np.ones(g.size)
    elif weighting == "variance":
        var = np.asarray(frf.variance, dtype=float)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    ok = np.isfinite(var) & (var > 0) & np.isfinite(g)
    if not np.all(ok):
        raise ValueError(
            f"{np.count_nonzero(~ok)} frequencies lack a finite positive variance; "
            "use weighting='uniform' for noiseless data"
        )
    return freq, g, var


def _split(theta, nb, na):
    b = theta[: nb + 1]
    a = np.concatenate([[1.0], theta[nb + 1:]])
    return b, a


def _residual(theta, zpow, g, sw, nb, na):
    b, a = _split(theta, nb, na)
    B = zpow[:, : nb + 1] @ b
    A = zpow[:, : na + 1] @ a
    return sw * (g - B / A), B, A


def _jacobian(zpow, sw, B, A, nb, na):
    jb = -(sw / A)[:, None] * zpow[:, : nb + 1]
    ja = (sw * B / A**2)[:, None] * zpow[:, 1: na + 1]
    jc = np.hstack([jb, ja])
    return np.vstack([jc.real, jc.imag])


def _sk_init(zpow, g, sw, nb, na, iterations):
    """Iteratively reweighted linear least squares on ``A*G - B``."""
    w_den = np.ones(g.size)
    theta = None
    for _ in range(max(1, iterations if na > 0 else 1)):
        ws = sw / w_den
        m = np.hstack([-zpow[:, : nb + 1], g[:, None] * zpow[:, 1: na + 1]]) * ws[:, None]
        rhs = -g * ws
        mr = np.vstack([m.real, m.imag])
        rr = np.concatenate([rhs.real, rhs.imag])
        colnorm = np.linalg.norm(mr, axis=0)
        colnorm[colnorm == 0] = 1.0
        sol, *_ = np.linalg.lstsq(mr / colnorm, rr, rcond=None)
        theta = sol / colnorm
        _, a = _split(theta, nb, na)
        A = zpow[:, : na + 1] @ a
        if np.min(np.abs(A)) < 1e-12:
            break
        w_den = np.abs(A)
    return theta


def fit_tf(
    frf,
    n_b: int,
    n_a: int,
    weighting: str = "variance",
    sk_iterations: int = SK_ITERATIONS,
    max_iter: int = MAX_ITER,
    rel_tol: float = REL_TOL,
) -> RationalModel:
    """Fit ``B(z^-1)/A(z^-1)`` of orders ``(n_b, n_a)`` to a nonparametric BLA.

    ``frf`` is a :class:`~blalab.lpm.FrfEstimate` or
    :class:`~blalab.aggregate.CommonBla`; with ``weighting="variance"`` each
    line is weighted by the inverse of its estimated variance.
    """
    if n_b < 0 or n_a < 0:
        raise ValueError("orders must be non-negative")
    freq, g, var = _fit_data(frf, weighting)
    F = g.size
    p = n_b + n_a + 1
    if F < p:
        raise ValueError(f"{F} frequencies cannot determine {p} parameters")
    fs = float(frf.sample_rate_hz)
    zinv = np.exp(-2j * np.pi * freq / fs)
    zpow = zinv[:, None] ** np.arange(max(n_b, n_a) + 1)[None, :]
    sw = 1.0 / np.sqrt(var)

    def model(theta, cost, it):
        b, a = _split(theta, n_b, n_a)
        return RationalModel(
            b=b.copy(), a=a.copy(), cost=float(cost), n_freqs_used=F, sample_rate_hz=fs,
            band_hz=(float(freq.min()), float(freq.max())), iterations=it,
        )

    theta = _sk_init(zpow, g, sw, n_b, n_a, sk_iterations)
    r, B, A = _residual(theta, zpow, g, sw, n_b, n_a)
    cost = float(np.sum(np.abs(r) ** 2) / F)
    if not math.isfinite(cost):
        raise FitError("linear initialisation produced a non-finite cost")

    lam = 1e-3
    it = 0
    n_accepted = 0
    for it in range(1, max_iter + 1):
        J = _jacobian(zpow, sw, B, A, n_b, n_a)
        rr = np.concatenate([r.real, r.imag])
        d = np.sqrt(np.sum(J**2, axis=0))
        d[d == 0] = 1.0
        accepted = False
        while lam < 1e16:
            aug = np.vstack([J / d, np.sqrt(lam) * np.eye(p)])
            rhs = np.concatenate([-rr, np.zeros(p)])
            step = np.linalg.lstsq(aug, rhs, rcond=None)[0] / d
            trial = theta + step
            r_t, B_t, A_t = _residual(trial, zpow, g, sw, n_b, n_a)
            if np.min(np.abs(A_t)) < 1e-12:
                # denominator vanishes on the grid; retry with more damping
                lam *= 10
                continue
            cost_t = float(np.sum(np.abs(r_t) ** 2) / F)
            if math.isfinite(cost_t) and cost_t <= cost:
                accepted = True
                break
            lam *= 10
        if not accepted:
            break
        n_accepted += 1
        decrease = (cost - cost_t) / cost if cost > 0 else 0.0
        theta, r, B, A, cost = trial, r_t, B_t, A_t, cost_t
        lam = max(lam / 10, 1e-12)
        if decrease < rel_tol:
            break

    if n_accepted == 0 and cost > 0:
        grad = J.T @ rr
        if np.linalg.norm(grad) > 1e-8 * np.linalg.norm(J) * np.linalg.norm(rr):
            raise FitError(
                f"no descent step found for orders ({n_b}, {n_a})", model(theta, cost, it)
            )
    return model(theta, cost, it)


def mdl_criterion(cost: float, n_params: int, n_freqs: int) -> float:
    return cost * (1.0 + n_params * math.log(n_freqs) / n_freqs)


@dataclass
class OrderRow:
    n_b: int
    n_a: int
    cost: float
    mdl: float
    error: str | None = None


@dataclass
class OrderSelection:
    best: RationalModel
    table: list = field(default_factory=list)


def select_order(frf, order_grid, weighting: str = "variance", **fit_kwargs) -> OrderSelection:
    """Fit every ``(n_b, n_a)`` in ``order_grid`` and keep the MDL minimiser.

    Costs below the numerical resolution of the data (relative residual RMS
    under ``EXACT_FIT_RTOL``) are treated as equal, so exact fits of different
    orders are separated by the parameter penalty alone. Ties go to the model
    with fewer parameters.
    """
    order_grid = [(int(nb), int(na)) for nb, na in order_grid]
    if not order_grid:
        raise ValueError("order grid is empty")
    _, g, var = _fit_data(frf, weighting)
    floor = EXACT_FIT_RTOL**2 * float(np.mean(np.abs(g) ** 2 / var))
    rows, fits = [], []
    for nb, na in order_grid:
        try:
            m = fit_tf(frf, nb, na, weighting=weighting, **fit_kwargs)
        except (FitError, ValueError, np.linalg.LinAlgError) as exc:
            rows.append(OrderRow(nb, na, math.nan, math.nan, str(exc)))
            continue
        m.mdl = mdl_criterion(max(m.cost, floor), m.n_params, m.n_freqs_used)
        rows.append(OrderRow(nb, na, m.cost, m.mdl))
        fits.append(m)
    if not fits:
        raise FitError("all fits failed: " + "; ".join(f"({r.n_b},{r.n_a}): {r.error}" for r in rows))
    best = min(fits, key=lambda m: (m.mdl, m.n_params))
    for m in fits:
        if m.n_params < best.n_params and m.mdl <= best.mdl * (1 + 1e-12):
            best = m
    return OrderSelection(best=best, table=rows)
