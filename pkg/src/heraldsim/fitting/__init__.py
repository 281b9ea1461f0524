"""Least-squares recovery of physical parameters from measured series."""

from .curves import (
    AlphaCurveFitter,
    G2DelayFitter,
    G2PasFitter,
    alpha_vs_delay,
    alpha_vs_pas,
    chi_from_herald_probability,
    fit_alpha_curves,
    fit_g2_vs_delay,
    fit_g2_vs_pas,
)
from .lm import FitResult, levenberg_marquardt, nlls_minimize
from .series import DataSeries, SeriesKind

__all__ = [
    "AlphaCurveFitter",
    "DataSeries",
    "FitResult",
    "G2DelayFitter",
    "G2PasFitter",
    "SeriesKind",
    "alpha_vs_delay",
    "alpha_vs_pas",
    "chi_from_herald_probability",
    "fit_alpha_curves",
    "fit_g2_vs_delay",
    "fit_g2_vs_pas",
    "levenberg_marquardt",
    "nlls_minimize",
]
