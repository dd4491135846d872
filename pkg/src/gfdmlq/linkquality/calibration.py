"""Accuracy of the abstraction against bit-level curves, and gamma_code fitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression

from .esm import esinr_miesm
from .lut import BlerLut, crossing_snr, predict_bler
from .si import SiTable

__all__ = [
    "BAND",
    "GAMMA_GRID",
    "GammaCodeFit",
    "ReferenceOutOfBand",
    "accuracy_gap",
    "calibrate_gamma_code",
    "predicted_curve",
]

BAND = (0.01, 0.10)
GAMMA_GRID = np.round(np.arange(0.5, 2.0 + 1e-9, 0.02), 2)
_FLOOR = 1e-7


class ReferenceOutOfBand(ValueError):
    """The reference BLER curve never passes through the accuracy band."""


def _smooth(bler, weights=None) -> np.ndarray:
    bler = np.asarray(bler, dtype=float)
    w = None if weights is None else np.asarray(weights, dtype=float)
    return isotonic_regression(bler, weights=w, increasing=False).x


def accuracy_gap(snr_db, bler_ref, bler_pred, band=BAND, n_levels: int = 19, weights=None) -> float:
    """Largest horizontal distance (dB) between two BLER curves inside ``band``.

    Both curves live on the same SNR grid.  The reference is made
    non-increasing first (isotonic fit, optionally weighted by packet
    counts); crossings are found by log-linear interpolation at
    ``n_levels`` log-spaced BLER levels.  Levels the reference does not
    reach are skipped; a level the prediction never reaches on the grid
    counts as an infinite gap.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    ref = _smooth(bler_ref, weights)
    pred = _smooth(bler_pred)
    gaps = []
    for level in np.geomspace(band[0], band[1], n_levels):
        x_ref = crossing_snr(snr_db, ref, level, _FLOOR)
        if np.isnan(x_ref):
            continue
        x_pred = crossing_snr(snr_db, pred, level, _FLOOR)
        gaps.append(np.inf if np.isnan(x_pred) else abs(x_pred - x_ref))
    if not gaps:
        raise ReferenceOutOfBand(f"reference BLER never crosses the {band[0]:g}..{band[1]:g} band")
    return float(max(gaps))


def predicted_curve(gains, snr_db, table: SiTable, lut: BlerLut, gamma_code: float = 1.0,
                    mode: str = "snr") -> np.ndarray:
    """Ensemble-average predicted BLER versus SNR.

    ``gains`` is ``(R, J)``: the per-frequency-sample SINR of each
    realisation at unit SNR (``|H|^2`` for a single link).  Each point of
    ``snr_db`` scales every realisation, maps it through MIESM and the LUT,
    and averages the predicted BLER over the R realisations.
    """
    gains = np.atleast_2d(np.asarray(gains, dtype=float))
    snr = 10 ** (np.asarray(snr_db, dtype=float) / 10)
    esinr = esinr_miesm(snr[:, None, None] * gains[None], table, gamma_code, mode)
    return predict_bler(esinr, lut).mean(axis=-1)


@dataclass(frozen=True)
class GammaCodeFit:
    gamma_code: float
    gap_db: float
    gap_at_one: float
    grid: np.ndarray
    objective: np.ndarray


def calibrate_gamma_code(gains, snr_db, bler_ref, table: SiTable, lut: BlerLut, grid=GAMMA_GRID,
                         mode: str = "snr", weights=None) -> GammaCodeFit:
    """Grid search for the gamma_code minimising :func:`accuracy_gap`.

    Ties (equal objective to 1e-9 dB) go to the value closest to 1.
    """
    grid = np.asarray(grid, dtype=float)
    obj = np.array([
        accuracy_gap(snr_db, bler_ref, predicted_curve(gains, snr_db, table, lut, g, mode), weights=weights)
        for g in grid
    ])
    best = np.min(obj)
    tied = np.flatnonzero(obj <= best + 1e-9)
    pick = tied[np.argmin(np.abs(grid[tied] - 1.0))]
    at_one = accuracy_gap(snr_db, bler_ref, predicted_curve(gains, snr_db, table, lut, 1.0, mode), weights=weights)
    return GammaCodeFit(float(grid[pick]), float(obj[pick]), at_one, grid, obj)
