"""Symbol information of QAM over AWGN and its tabulated form.

For a constellation with equiprobable points ``x`` and ``Y = sqrt(g)*X + Z``,
``Z ~ CN(0, 1)``::

    SI(g, m) = m - 2**-m * sum_x E_Z[ log2 sum_x' exp(-|sqrt(g)(x - x') + Z|^2 + |Z|^2) ]

The expectation over Z is evaluated with a tensor-product Gauss-Hermite
rule, which makes the tables deterministic.  Square QAM is a product of
two PAM alphabets and CN(0, 1) noise splits into independent I/Q parts,
so the integrand separates and the tensor rule collapses exactly to twice
the one-dimensional rule on the PAM alphabet.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from ..fec.constellation import get_constellation
from ..textio import read_table, write_table

log = logging.getLogger(__name__)

__all__ = ["SiTable", "build_si_table", "compute_si", "SI_GRID_DB"]

SI_GRID_DB = np.round(np.arange(-20.0, 40.0 + 1e-9, 0.25), 2)
GH_NODES = 32


def _pam_factor(pts: np.ndarray):
    """PAM levels ``a`` with ``pts == {a_i + j a_k}``, or None if not a product set."""
    re = np.unique(np.round(pts.real, 12))
    im = np.unique(np.round(pts.imag, 12))
    if len(re) * len(im) != len(pts) or not np.allclose(re, im):
        return None
    grid = np.sort_complex((re[:, None] + 1j * re[None, :]).ravel())
    return re if np.allclose(grid, np.sort_complex(np.round(pts, 12))) else None


def _si_pam(gamma, levels, t, w) -> np.ndarray:
    # per-dimension noise has density exp(-z**2)/sqrt(pi): GH nodes apply directly
    diff = levels[:, None] - levels[None, :]
    wz = w / np.sqrt(np.pi)
    out = np.empty(gamma.shape)
    for idx, g in np.ndenumerate(gamma):
        arg = (np.sqrt(g) * diff[:, :, None] + t) ** 2 - t**2
        inner = logsumexp(-arg, axis=1) / np.log(2)
        out[idx] = np.log2(len(levels)) - np.mean(inner @ wz)
    return out


def compute_si(gamma, m: int, n_nodes: int = GH_NODES) -> np.ndarray:
    """Symbol information in bits at linear SNR ``gamma`` (scalar or array)."""
    gamma = np.asarray(gamma, dtype=float)
    if n_nodes < 24:
        raise ValueError("use at least 24 quadrature nodes per axis")
    pts = get_constellation(m).points
    t, w = np.polynomial.hermite.hermgauss(n_nodes)
    pos = gamma > 0
    out = np.zeros(gamma.shape)
    levels = _pam_factor(pts)
    if levels is not None:
        out[pos] = 2 * _si_pam(gamma[pos], levels, t, w)
        return np.clip(out, 0.0, m)
    z = (t[:, None] + 1j * t[None, :]).ravel()
    wz = (w[:, None] * w[None, :]).ravel() / np.pi
    diff = pts[:, None] - pts[None, :]  # x - x'
    for idx, g in np.ndenumerate(gamma):
        if g <= 0:
            continue
        arg = np.abs(np.sqrt(g) * diff[:, :, None] + z) ** 2 - np.abs(z) ** 2
        inner = logsumexp(-arg, axis=1) / np.log(2)  # (points, nodes)
        out[idx] = m - np.mean(inner @ wz)
    return np.clip(out, 0.0, m)


def compute_si_monte_carlo(gamma: float, m: int, n_draws: int, rng: np.random.Generator,
                           chunk: int = 200_000) -> float:
    """Monte-Carlo estimate of the same expectation (test oracle)."""
    pts = get_constellation(m).points
    total = 0.0
    done = 0
    while done < n_draws:
        n = min(chunk, n_draws - done)
        x = pts[rng.integers(0, len(pts), n)]
        z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        arg = np.abs(np.sqrt(gamma) * (x[:, None] - pts[None, :]) + z[:, None]) ** 2 - np.abs(z[:, None]) ** 2
        total += np.sum(logsumexp(-arg, axis=1)) / np.log(2)
        done += n
    return m - total / n_draws


@dataclass(frozen=True, eq=False)
class SiTable:
    """SI(gamma; m) on a dB grid with monotone interpolation and inversion.

    Outside the grid the curve is extended linearly in ``gamma`` below the
    first point (the low-SNR slope of any zero-mean constellation) and held
    constant above the last.
    """

    m: int
    snr_db: np.ndarray
    si: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.si) < 0):
            raise ValueError("SI table must be non-decreasing")

    @property
    def top(self) -> int:
        """Index of the last strictly increasing grid point."""
        inc = np.flatnonzero(np.diff(self.si) > 0)
        return int(inc[-1] + 1) if inc.size else 0

    def __call__(self, gamma) -> np.ndarray:
        """Interpolated SI at linear SNR ``gamma``."""
        gamma = np.asarray(gamma, dtype=float)
        with np.errstate(divide="ignore"):
            db = 10 * np.log10(gamma)
        val = np.interp(db, self.snr_db, self.si)
        low = db < self.snr_db[0]
        if np.any(low):
            val = np.where(low, self.si[0] * gamma / 10 ** (self.snr_db[0] / 10), val)
        return val

    def inverse_db(self, si, iters: int = 60) -> np.ndarray:
        """SNR in dB at which the interpolated SI equals ``si`` (bisection).

        Targets above the strictly increasing part of the table are clamped
        to its top with a logged warning.
        """
        si = np.asarray(si, dtype=float)
        top = self.top
        si_top = self.si[top]
        over = si > si_top
        if np.any(over & (si > si_top * (1 + 1e-12))):
            log.warning("SI target above the tabulated range; clamping to %.2f dB", self.snr_db[top])
        target = np.minimum(si, si_top)
        out = np.empty(target.shape)
        # linear low-SNR extension, inverted in closed form
        low = target < self.si[0]
        g0 = 10 ** (self.snr_db[0] / 10)
        with np.errstate(divide="ignore"):
            out[low] = 10 * np.log10(np.maximum(target[low], 0) / self.si[0] * g0)
        hi_mask = ~low
        lo = np.full(np.count_nonzero(hi_mask), self.snr_db[0])
        hi = np.full_like(lo, self.snr_db[top])
        t = target[hi_mask]
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            below = np.interp(mid, self.snr_db, self.si) < t
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out[hi_mask] = hi
        return out

    def save(self, path, header: dict | None = None) -> None:
        meta = {"kind": "si_table", "m": self.m, "nodes": GH_NODES}
        meta.update(header or {})
        write_table(path, meta, ("snr_db", "si"), np.column_stack([self.snr_db, self.si]))

    @classmethod
    def load(cls, path) -> "SiTable":
        meta, cols = read_table(path)
        return cls(m=int(meta["m"]), snr_db=cols["snr_db"], si=cols["si"])


_MEMO: dict[int, SiTable] = {}


def build_si_table(m: int, cache_dir=None) -> SiTable:
    """Evaluate SI on the fixed grid (-20..40 dB, 0.25 dB).

    Tables are memoised per process and, with ``cache_dir``, persisted as
    text files that reload bit-identically.
    """
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"si_m{m}.csv"
        if path.exists():
            return SiTable.load(path)
    table = _MEMO.get(m)
    if table is None:
        gamma = 10 ** (SI_GRID_DB / 10)
        table = _MEMO[m] = SiTable(m=m, snr_db=SI_GRID_DB.copy(), si=compute_si(gamma, m))
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        table.save(path)
    return table
