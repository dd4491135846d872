"""Link-quality model: symbol information, effective SINR mapping, BLER lookup."""

from .calibration import (
    GammaCodeFit,
    ReferenceOutOfBand,
    accuracy_gap,
    calibrate_gamma_code,
    predicted_curve,
)
from .esm import GAMMA_CODE_MODES, esinr_eesm, esinr_miesm, rbir
from .lut import (
    BlerLut,
    WaterfallNotFound,
    calibrate_bler_lut,
    crossing_snr,
    load_or_calibrate,
    predict_ber,
    predict_bler,
)
from .si import SI_GRID_DB, SiTable, build_si_table, compute_si, compute_si_monte_carlo

__all__ = [
    "GAMMA_CODE_MODES",
    "SI_GRID_DB",
    "BlerLut",
    "GammaCodeFit",
    "ReferenceOutOfBand",
    "SiTable",
    "WaterfallNotFound",
    "accuracy_gap",
    "build_si_table",
    "calibrate_bler_lut",
    "calibrate_gamma_code",
    "compute_si",
    "compute_si_monte_carlo",
    "crossing_snr",
    "esinr_eesm",
    "esinr_miesm",
    "load_or_calibrate",
    "predict_ber",
    "predict_bler",
    "predicted_curve",
    "rbir",
]
