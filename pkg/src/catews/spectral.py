"""Periodograms, the AR(1) power spectrum, reddening and GPH estimation."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, InputError, InsufficientDataError
from .timeseries import Increments, Signal

DIRECT_DFT_MAX = 64
# bins below this fraction of the total power are treated as exact zeros
ZERO_POWER_RTOL = 1e-20


@dataclass(frozen=True)
class Periodogram:
    """Full periodogram over j = 1..T; ``freqs[j-1] = 2 pi (j-1) / T``."""

    freqs: np.ndarray
    power: np.ndarray
    T: int

    def reported(self):
        """(j, omega, power) for j = 1..T//2+1, the non-redundant half."""
        m = self.T // 2 + 1
        return np.arange(1, m + 1), self.freqs[:m], self.power[:m]


def _direct_dft(x):
    T = len(x)
    t = np.arange(1, T + 1)
    w = 2.0 * np.pi * np.arange(T) / T
    return np.exp(-1j * np.outer(w, t)) @ x


def periodogram(x, method: str = "auto") -> Periodogram:
    """``I(w_j) = |sum_t x_t exp(-i t w_j)|^2 / T`` for every Fourier frequency.

    ``method`` is ``direct`` (O(T^2) sum), ``fft`` or ``auto`` (direct up
    to 64 samples). The phase origin does not affect the modulus.
    """
    x = np.asarray(x.x if isinstance(x, Signal) else x, dtype=float)
    T = len(x)
    if T < 2:
        raise InsufficientDataError("periodogram needs at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise DomainError("periodogram input must be finite")
    if method == "auto":
        method = "direct" if T <= DIRECT_DFT_MAX else "fft"
    if method == "direct":
        coef = _direct_dft(x)
    elif method == "fft":
        coef = np.fft.fft(x)
    else:
        raise InputError(f"unknown method {method!r}")
    power = np.abs(coef) ** 2 / T
    freqs = 2.0 * np.pi * np.arange(T) / T
    power.setflags(write=False)
    freqs.setflags(write=False)
    return Periodogram(freqs, power, T)


def noise_periodogram(dx, method: str = "auto") -> Periodogram:
    """Periodogram of the increment sequence (length T - 1)."""
    d = dx.dx if isinstance(dx, Increments) else np.asarray(dx, dtype=float)
    return periodogram(d, method)


def ar1_power_spectrum(lam: float, omega):
    """Normalized power spectrum of a stable AR(1) with slope ``1 + lam``."""
    if not -2.0 < lam < 0.0:
        raise DomainError("AR(1) spectrum needs -2 < lambda < 0")
    omega = np.asarray(omega, dtype=float)
    q = lam * (2.0 + lam)
    out = -q / (2.0 + q - 2.0 * (1.0 + lam) * np.cos(omega))
    return float(out) if out.ndim == 0 else out


def reddening_index(periodograms) -> list:
    """Zero-frequency power over the median of the other reported bins, per window.

    Returns ``(index, ratio)`` pairs; the ratio is None when that median is 0
    (or rounding residue, relative to the total power).
    """
    pgs = list(periodograms)
    if len(pgs) < 2:
        raise InsufficientDataError("reddening needs at least 2 periodograms")
    out = []
    for i, pg in enumerate(pgs):
        _, _, p = pg.reported()
        med = float(np.median(p[1:])) if len(p) > 1 else 0.0
        floor = ZERO_POWER_RTOL * float(pg.power.sum())
        out.append((i, float(p[0]) / med if med > floor else None))
    return out


def reddening_trend(ratios) -> float:
    """Kendall tau of the defined reddening ratios against window order."""
    pts = [(i, r) for i, r in enumerate(ratios) if r is not None]
    if len(pts) < 2:
        return math.nan
    idx, vals = zip(*pts)
    return float(stats.kendalltau(idx, vals).statistic)


@dataclass(frozen=True)
class GphEstimate:
    hurst: float
    slope: float
    k_used: int
    se: float

    @property
    def decay_exponent(self) -> float:
        """Power-law decay exponent of the increment autocorrelation, 2(1 - H)."""
        return 2.0 * (1.0 - self.hurst)

    def to_dict(self) -> dict:
        return {"H": self.hurst, "slope": self.slope, "k_used": self.k_used, "se": self.se,
                "decay_exponent": self.decay_exponent}


def _int_pow(L, p):
    # floor with a guard against values like 20.000000000000004 or 19.999999999999996
    v = L**p
    r = round(v)
    return int(r) if abs(v - r) < 1e-9 * max(1.0, v) else int(math.floor(v))


def gph_k_range(L: int) -> tuple[int, int]:
    """Admissible number of regression frequencies, Int[L^0.2]..Int[L^0.5]."""
    return _int_pow(L, 0.2), _int_pow(L, 0.5)


def gph_default_k(L: int) -> int:
    """L^0.44 rounded to the nearest integer and clipped to the admissible range."""
    lo, hi = gph_k_range(L)
    return int(min(max(round(L**0.44), lo), hi))


def gph_estimate(x, k: int | None = None) -> GphEstimate:
    """Log-periodogram regression over the k lowest nonzero Fourier frequencies.

    Fits ``ln I(w_k) = c + slope * ln(4 sin^2(w_k / 2))`` and reports
    ``H = 0.5 - slope``.
    """
    x = np.asarray(x.x if isinstance(x, Signal) else x, dtype=float)
    L = len(x)
    if L < 32:
        raise InsufficientDataError("GPH estimation needs at least 32 samples")
    lo, hi = gph_k_range(L)
    if k is None:
        k = gph_default_k(L)
    elif not lo <= k <= hi:
        raise InputError(f"k={k} outside admissible range [{lo}, {hi}] for L={L}")
    pg = periodogram(x)
    w = pg.freqs[1:k + 1]
    p = pg.power[1:k + 1]
    keep = p > ZERO_POWER_RTOL * float(pg.power.sum())
    if not keep.all():
        warnings.warn(f"dropped {int((~keep).sum())} zero-power frequencies from the GPH regression")
    if keep.sum() < 3:
        raise InsufficientDataError("fewer than 3 usable frequencies for GPH regression")
    reg = stats.linregress(np.log(4.0 * np.sin(w[keep] / 2.0) ** 2), np.log(p[keep]))
    return GphEstimate(0.5 - float(reg.slope), float(reg.slope), int(k), float(reg.stderr))
