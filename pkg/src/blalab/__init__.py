"""Nonparametric and parametric estimation of best linear approximations.

Multisine design, local polynomial FRF estimation for single and
concatenated records, BLA averaging, distortion analysis, rational model
fitting and a Wiener-type simulator used as ground truth.
"""
from .aggregate import CommonBla, GridMismatchError, average_blas, compare_blas, restrict_to_grid
from .concat import (
    ConcatConfig,
    ConcatConfigError,
    ConcatDataset,
    MixedOperatingPointsWarning,
    estimate_frf_concat,
)
from .distortion import DistortionReport, NoDetectionLinesError, analyze, classify_lines
from .fit import FitError, RationalModel, fit_tf, mdl_criterion, select_order
from .lpm import FrfEstimate, LpmConfig, LpmError, build_local_regressor, estimate_frf, solve_local
from .signal import (
    DesignError,
    MultisineSpec,
    OperatingPoint,
    SignalRecord,
    design_multisine,
    render_multisine,
    riemann_band_power,
)
from .simulator import (
    UnstableSystemError,
    WienerSurrogate,
    default_linear_block,
    make_campaign,
    simulate,
    true_bla,
)
from .spectral import SpectrumRecord, dft, idft, period_average, period_spectra, split_periods

__version__ = "0.1.0"

__all__ = [
    "CommonBla", "ConcatConfig", "ConcatConfigError", "ConcatDataset", "DesignError",
    "DistortionReport", "FitError", "FrfEstimate", "GridMismatchError", "LpmConfig", "LpmError",
    "MixedOperatingPointsWarning", "MultisineSpec", "NoDetectionLinesError", "OperatingPoint",
    "RationalModel", "SignalRecord", "SpectrumRecord", "UnstableSystemError", "WienerSurrogate",
    "analyze", "average_blas", "build_local_regressor", "classify_lines", "compare_blas",
    "default_linear_block", "design_multisine", "dft", "estimate_frf", "estimate_frf_concat",
    "fit_tf", "idft", "make_campaign", "mdl_criterion", "period_average", "period_spectra",
    "render_multisine", "restrict_to_grid", "riemann_band_power", "select_order", "simulate",
    "solve_local", "split_periods", "true_bla",
]
