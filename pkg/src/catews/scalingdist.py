"""Increment histograms and the scaling distribution of increments.

The scaling law writes the increment density as
``P(dx, dt) = B dt^(-eta/2) F(xi)`` with ``xi = |dx| / dt^(eta/2)`` and
``F(xi) = xi^nu_bar exp(-xi^nu / (4 D_bar))``. Here ``B`` is the exact
normalizer of that form (the closed-form prefactor is kept for reference
as ``B_closed``), and ``F`` is held constant below ``XI_MIN``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import optimize, stats

from .errors import DomainError, InputError, InsufficientDataError
from .spectral import Periodogram
from .timeseries import Increments

XI_MIN = 1e-8


def _upper_integral(m, nu, a, lower):
    """int_lower^inf xi^m exp(-xi^nu / a) dxi via the upper incomplete gamma function."""
    s = (m + 1.0) / nu
    with mpmath.workdps(30):
        val = mpmath.mpf(a) ** s / nu * mpmath.gammainc(s, mpmath.mpf(lower) ** nu / a)
    return float(val)


@dataclass(frozen=True)
class ScalingLaw:
    eta: float
    D_coef: float = 1.0
    nu: float = field(init=False)
    nu_bar: float = field(init=False)
    D_bar: float = field(init=False)
    B: float = field(init=False)
    B_closed: float = field(init=False)
    paper_prefactors_valid: bool = field(init=False)

    def __post_init__(self):
        eta, D = float(self.eta), float(self.D_coef)
        if not (math.isfinite(eta) and eta < 2):
            raise DomainError("scaling exponent eta must be finite and < 2")
        if eta == 0:
            raise DomainError("eta = 0 makes the scaling variable degenerate")
        if not D > 0:
            raise DomainError("D_coef must be positive")
        nu = 2.0 / (2.0 - eta)
        nu_bar = (eta - 1.0) / (eta - 2.0)
        # the closed-form prefactors take powers of eta; both are positive only for 0 < eta < 2
        valid = eta > 0
        if not valid:
            warnings.warn(f"closed-form prefactors are not positive for eta={eta}; using |eta| in D_bar")
        ae = abs(eta)
        D_bar = 0.25 * (2.0 * math.sqrt(D) / ae) ** nu * (ae / (2.0 - eta))
        B_closed = 0.5 / math.sqrt(math.pi * (2.0 - eta)) * (eta / (2.0 * math.sqrt(D))) ** nu_bar if valid \
            else math.nan
        a = 4.0 * D_bar
        f_min = XI_MIN**nu_bar * math.exp(-XI_MIN**nu / a)
        mass = XI_MIN * f_min + _upper_integral(nu_bar, nu, a, XI_MIN)
        for k, v in (("nu", nu), ("nu_bar", nu_bar), ("D_bar", D_bar), ("B", 0.5 / mass),
                     ("B_closed", B_closed), ("paper_prefactors_valid", valid)):
            object.__setattr__(self, k, v)

    def F(self, xi):
        xi = np.maximum(np.abs(np.asarray(xi, dtype=float)), XI_MIN)
        return xi**self.nu_bar * np.exp(-(xi**self.nu) / (4.0 * self.D_bar))

    @property
    def derived(self) -> dict:
        return {"nu": self.nu, "nu_bar": self.nu_bar, "B": self.B, "D_bar": self.D_bar, **exponent_web(self.eta)}


def scaling_pdf(law: ScalingLaw, dx, dt):
    """Increment density at ``dx`` after ``dt`` trading days, symmetric in ``dx``."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    s = dt ** (law.eta / 2.0)
    out = law.B / s * law.F(np.abs(np.asarray(dx, dtype=float)) / s)
    return float(out) if np.ndim(out) == 0 else out


def second_moment(law: ScalingLaw, dt) -> float:
    """Closed-form second moment of ``scaling_pdf``; grows as ``dt^eta``."""
    a = 4.0 * law.D_bar
    f_min = law.F(XI_MIN)
    inner = f_min * XI_MIN**3 / 3.0 + _upper_integral(law.nu_bar + 2.0, law.nu, a, XI_MIN)
    return 2.0 * law.B * inner * dt**law.eta


def border_constant(law: ScalingLaw) -> float:
    """Prefactor of the border law, ``(2B/|eta|) int xi^(-2/eta) F(xi) dxi`` with the cap below XI_MIN."""
    eta = law.eta
    m = law.nu_bar - 2.0 / eta
    total = _upper_integral(m, law.nu, 4.0 * law.D_bar, XI_MIN)
    p = 1.0 - 2.0 / eta
    if p > 0:
        total += float(law.F(XI_MIN)) * XI_MIN**p / p
    return 2.0 * law.B / abs(eta) * total


def border_distribution(law: ScalingLaw, dx):
    """Time-integrated increment density ``const / |dx|^(1 - 2/eta)``."""
    eta = law.eta
    dx = np.abs(np.asarray(dx, dtype=float))
    if np.any(dx == 0):
        raise DomainError("border distribution is singular at dx = 0")
    if eta > 0:
        warnings.warn(f"eta={eta} > 0 gives a non-decaying border law, outside the heavy-tail regime")
    out = border_constant(law) * dx ** (-(1.0 - 2.0 / eta))
    return float(out) if out.ndim == 0 else out


def exponent_web(eta: float) -> dict:
    """Exponents tied to the basic scaling exponent."""
    if not (math.isfinite(eta) and eta < 2):
        raise DomainError("eta must be finite and < 2")
    if eta == 0:
        raise DomainError("tail exponent 1 - 2/eta undefined for eta = 0")
    sign = "negative" if eta > 1 else ("zero" if eta == 1 else "positive")
    return {"eta": eta, "H": eta / 2.0, "tail": 1.0 - 2.0 / eta, "signal_slope": -(1.0 + eta),
            "noise_slope": -(eta - 1.0), "acf_decay": 2.0 - eta, "correlation_sign": sign}


def spectrum_slope_fit(pg: Periodogram, j_range=None) -> float:
    """Log-log OLS slope of power against frequency over bins ``j_lo..j_hi`` (1-based, inclusive)."""
    j, w, p = pg.reported()
    lo, hi = (2, len(j)) if j_range is None else j_range
    sel = (j >= lo) & (j <= hi) & (w > 0) & (p > 0)
    if sel.sum() < 3:
        raise InsufficientDataError("fewer than 3 positive-power bins in range")
    return float(stats.linregress(np.log(w[sel]), np.log(p[sel])).slope)


@dataclass
class HistogramFit:
    bin_edges: np.ndarray
    counts: np.ndarray
    gauss_mu: float
    gauss_sigma: float
    tail_exponent_left: float | None = None
    tail_se: float | None = None
    tail_range: tuple | None = None
    tail_is_power_law: bool = False
    right_model: str | None = None
    right_rate: float | None = None
    left_model: str | None = None
    left_rate: float | None = None


def _tail_loglik(u, u0, model):
    """Maximized log-likelihood of exceedances ``u >= u0`` under a one-parameter tail model.

    Models: ``pareto`` (density ~ u^-(a+1)), ``exponential`` (rate on u - u0)
    and ``gaussian`` (zero-centred normal truncated at u0). Returns
    ``(loglik, parameter)``.
    """
    n = len(u)
    if model == "pareto":
        s = float(np.log(u / u0).sum())
        a = n / s
        return n * math.log(a / u0) - (a + 1.0) * s, a
    if model == "exponential":
        rate = 1.0 / float(np.mean(u - u0))
        return n * math.log(rate) - n, rate

    def nll(log_s):
        sc = math.exp(log_s)
        return -float((stats.norm.logpdf(u, scale=sc) - stats.norm.logsf(u0, scale=sc)).sum())

    spread = math.log(max(float(np.sqrt(np.mean(u * u))), 1e-300))
    res = optimize.minimize_scalar(nll, bounds=(spread - 10.0, spread + 3.0), method="bounded")
    return -float(res.fun), math.exp(res.x)


def _side_model(u, u0):
    """Gaussian vs exponential decay of exceedances beyond the core, by likelihood."""
    if len(u) < 10 or np.ptp(u) == 0:
        return None, None
    ll_exp, rate = _tail_loglik(u, u0, "exponential")
    ll_gauss, _ = _tail_loglik(u, u0, "gaussian")
    return ("exponential", rate) if ll_exp > ll_gauss else ("gaussian", None)


def _weighted_line(x, y, w):
    """Weighted least-squares line; returns (slope, intercept, slope standard error)."""
    W = w.sum()
    xm, ym = (w * x).sum() / W, (w * y).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    dof = len(x) - 2
    s2 = (w * (y - intercept - slope * x) ** 2).sum() / dof if dof > 0 else math.nan
    return float(slope), float(intercept), float(math.sqrt(s2 / sxx))


def histogram_fit(dx, bins: int = 50, tail_bins: int = 20, tail_start: float = 2.0) -> HistogramFit:
    """Gaussian core, left power-law tail and right-side decay class of increments.

    The core is matched to the interquartile range; the left tail is a
    count-weighted log-log fit on log-spaced bins beyond ``tail_start``
    core widths. The tail is marked a power law, and each side is classed
    Gaussian or exponential, by comparing maximized likelihoods of the
    exceedances under one-parameter tail models.
    """
    d = dx.dx if isinstance(dx, Increments) else np.asarray(dx, dtype=float)
    n = len(d)
    if n < 100:
        raise InsufficientDataError("histogram fit needs at least 100 samples")
    counts, edges = np.histogram(d, bins=bins)
    q1, q3 = np.percentile(d, [25, 75])
    core = d[(d >= q1) & (d <= q3)]
    mu = float(core.mean())
    sigma = float((q3 - q1) / (2.0 * stats.norm.ppf(0.75)))
    fit = HistogramFit(edges, counts, mu, sigma)
    if sigma <= 0:
        return fit
    left = mu - d[d < mu - tail_start * sigma]
    right = d[d > mu + tail_start * sigma] - mu
    if len(left) >= 5:
        lo_edge, hi_edge = tail_start * sigma, float(left.max()) * (1 + 1e-12)
        if hi_edge > lo_edge:
            tedges = np.geomspace(lo_edge, hi_edge, tail_bins + 1)
            tc, _ = np.histogram(left, bins=tedges)
            keep = tc > 0
            if keep.sum() >= 5:
                mid = np.sqrt(tedges[1:] * tedges[:-1])[keep]
                dens = tc[keep] / (n * np.diff(tedges)[keep])
                lx, y = np.log(mid), np.log(dens)
                # weight by counts: the log of a Poisson count has variance about 1/count
                slope, intercept, se = _weighted_line(lx, y, tc[keep].astype(float))
                fit.tail_exponent_left = slope
                fit.tail_se = se
                fit.tail_range = (float(tedges[0]), float(tedges[-1]))
                # power law vs Gaussian tail on the raw exceedances, one free parameter each
                u0 = tail_start * sigma
                fit.tail_is_power_law = bool(_tail_loglik(left, u0, "pareto")[0]
                                             > _tail_loglik(left, u0, "gaussian")[0])
    fit.right_model, fit.right_rate = _side_model(right, tail_start * sigma)
    fit.left_model, fit.left_rate = _side_model(left, tail_start * sigma)
    return fit
