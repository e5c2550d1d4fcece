"""Windowed early-warning indicators.

Per window: variance, skewness, the lag-one autoregression
``x[t+1] = (1 + lam) x[t] + b`` with its fixed point ``-b / lam``, and the
lag-one autocorrelation estimator. Expanding-window ("accumulative")
moments run from the series start. Fixed-point trajectories feed a
two-cluster flicker detector.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .errors import CatewsError, InsufficientDataError, SingularityError, UndefinedMomentError
from .timeseries import Signal, WindowSpec, windows

LAMBDA_MIN = 1e-3


def _values(x) -> np.ndarray:
    return np.asarray(x.x if isinstance(x, Signal) else x, dtype=float)


def window_variance(x) -> float:
    """Unbiased sample variance (divisor n - 1)."""
    x = _values(x)
    if len(x) < 2:
        raise InsufficientDataError("variance needs at least 2 points")
    return float(np.var(x, ddof=1))


def window_skewness(x) -> float:
    """Adjusted Fisher-Pearson sample skewness."""
    x = _values(x)
    if len(x) < 3:
        raise InsufficientDataError("skewness needs at least 3 points")
    if np.ptp(x) == 0:
        raise UndefinedMomentError("skewness undefined for zero variance")
    return float(stats.skew(x, bias=False))


def accumulative_variance(signal, up_to: int) -> float:
    """Sample variance of x[0..up_to] inclusive."""
    if up_to < 1:
        raise InsufficientDataError("accumulative variance needs up_to >= 1")
    return window_variance(_values(signal)[: up_to + 1])


def accumulative_skewness(signal, up_to: int) -> float:
    if up_to < 2:
        raise InsufficientDataError("accumulative skewness needs up_to >= 2")
    return window_skewness(_values(signal)[: up_to + 1])


def accumulative_variance_curve(signal) -> np.ndarray:
    """Expanding-window variance for every prefix; entry 0 is NaN."""
    x = _values(signal)
    # shift by the global mean to limit cancellation in the running sums
    d = x - x.mean()
    n = np.arange(1, len(x) + 1, dtype=float)
    s1, s2 = np.cumsum(d), np.cumsum(d * d)
    out = np.full(len(x), np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = (s2 - s1 * s1 / n) / (n - 1)
    out[1:] = np.maximum(v[1:], 0.0)
    return out


class AR1Fit(NamedTuple):
    slope: float
    intercept: float
    se_slope: float
    se_intercept: float
    cov: float  # covariance of slope and intercept estimates

    @property
    def lam(self) -> float:
        return self.slope - 1.0


def ar1_fit(x) -> AR1Fit:
    """OLS of x[t+1] on x[t] over the lag pairs inside the window."""
    x = _values(x)
    if len(x) < 3:
        raise InsufficientDataError("AR(1) fit needs at least 3 points")
    u, v = x[:-1], x[1:]
    n = len(u)
    um = u.mean()
    du = u - um
    sxx = du @ du
    if sxx <= 1e-300 or np.ptp(u) == 0:
        raise SingularityError("regressor has zero variance")
    slope = (du @ (v - v.mean())) / sxx
    intercept = v.mean() - slope * um
    if n > 2:
        resid = v - (intercept + slope * u)
        s2 = resid @ resid / (n - 2)
    else:
        s2 = math.nan
    var_slope = s2 / sxx
    var_int = s2 * (1.0 / n + um * um / sxx)
    cov = -um * s2 / sxx
    return AR1Fit(float(slope), float(intercept), math.sqrt(var_slope), math.sqrt(var_int), float(cov))


def acf1_estimator(x) -> float:
    """Lag-one autocorrelation from ``W + 1`` consecutive values (``W`` products).

    Numerator: sum of x[t] x[t+1] minus (1/W)(sum x[t])(sum x[t+1]);
    denominator: W times the variance (divisor W) of x[0..W-1].
    """
    x = _values(x)
    if len(x) < 3:
        raise InsufficientDataError("ACF(1) estimator needs at least 3 values")
    w = len(x) - 1
    a, b = x[:-1], x[1:]
    var = np.var(a)
    if var == 0 or np.ptp(a) == 0:
        raise UndefinedMomentError("ACF(1) undefined for zero variance")
    num = a @ b - a.sum() * b.sum() / w
    return float(num / (w * var))


def fixed_point_se(fit: AR1Fit) -> float:
    """Delta-method standard error of -b/lam using the full OLS covariance."""
    lam, b = fit.lam, fit.intercept
    var = (fit.se_intercept**2 / lam**2 + b * b * fit.se_slope**2 / lam**4
           - 2.0 * b * fit.cov / lam**3)
    return math.sqrt(max(var, 0.0))


@dataclass
class WindowReport:
    center_t: int
    start: int
    end: int
    variance: float | None = None
    acv: float | None = None
    skewness: float | None = None
    acc_skewness: float | None = None
    ar1: float | None = None
    ar1_intercept: float | None = None
    ar1_se: tuple | None = None
    acf1: float | None = None
    lam: float | None = None
    recovery_rate: float | None = None
    recovery_rate_acf: float | None = None
    x_star: float | None = None
    x_star_se: float | None = None

    @property
    def b(self):
        return self.ar1_intercept

    CSV_COLUMNS = ("center_t", "variance", "acv", "skewness", "acc_skewness", "ar1", "acf1", "lambda",
                   "recovery_rate", "recovery_rate_acf", "b", "x_star", "x_star_se")

    def row(self) -> list:
        vals = (self.center_t, self.variance, self.acv, self.skewness, self.acc_skewness, self.ar1, self.acf1,
                self.lam, self.recovery_rate, self.recovery_rate_acf, self.ar1_intercept, self.x_star,
                self.x_star_se)
        return [v for v in vals]


def _try(fn, *args):
    try:
        return fn(*args)
    except (CatewsError, ZeroDivisionError):
        return None


def ews_scan(signal, spec: WindowSpec = WindowSpec(), lambda_min: float = LAMBDA_MIN) -> list[WindowReport]:
    """Run every per-window estimator over the scanning windows.

    Estimator failures leave the affected fields as ``None``; the scan
    itself never aborts. The ACF(1) estimator is given the window plus the
    following point when one exists.
    """
    if not isinstance(signal, Signal):
        signal = Signal.from_values(signal)
    x = signal.x
    t = signal.t
    acv = accumulative_variance_curve(x)
    out = []
    for w in windows(signal, spec):
        rep = WindowReport(int(t[w.center]), int(t[w.start]), int(t[w.end - 1]))
        rep.variance = _try(window_variance, w.values)
        a = acv[w.end - 1]
        rep.acv = float(a) if np.isfinite(a) else None
        rep.skewness = _try(window_skewness, w.values)
        rep.acc_skewness = _try(window_skewness, x[: w.end]) if w.end >= 3 else None
        ext = x[w.start: min(w.end + 1, len(x))]
        rep.acf1 = _try(acf1_estimator, ext)
        if rep.acf1 is not None:
            rep.recovery_rate_acf = 1.0 - rep.acf1
        fit = _try(ar1_fit, w.values)
        if fit is not None:
            rep.ar1 = fit.slope
            rep.ar1_intercept = fit.intercept
            rep.ar1_se = (fit.se_slope, fit.se_intercept)
            rep.lam = fit.slope - 1.0
            rep.recovery_rate = -rep.lam
            if abs(rep.lam) >= lambda_min:
                rep.x_star = -fit.intercept / rep.lam
                se = fixed_point_se(fit)
                rep.x_star_se = se if math.isfinite(se) else None
        out.append(rep)
    return out


class FixedPoint(NamedTuple):
    t: int
    x_star: float
    se: float | None


def fixed_point_trajectory(reports: Sequence[WindowReport]) -> list[FixedPoint]:
    """Defined fixed points of a scan, in window order."""
    traj = [FixedPoint(r.center_t, r.x_star, r.x_star_se) for r in reports if r.x_star is not None]
    if not traj:
        warnings.warn("no window has a defined fixed point; trajectory is empty")
    return traj


@dataclass
class FlickerReport:
    t: list
    branch_labels: list
    alternations: int
    bistable_span: tuple | None
    threshold: float | None = None
    upper_mean: float | None = None
    lower_mean: float | None = None
    single_branch: bool = False

    def alternations_within(self, t_lo, t_hi) -> int:
        """Branch switches between consecutive defined points with t in [t_lo, t_hi)."""
        labs = [lab for ti, lab in zip(self.t, self.branch_labels)
                if lab != "undefined" and t_lo <= ti < t_hi]
        return sum(a != b for a, b in zip(labs, labs[1:]))


def two_means_threshold(v, max_iter: int = 200):
    """Midpoint of the two cluster means, iterated from the median; None if a cluster empties."""
    v = np.asarray(v, dtype=float)
    thr = float(np.median(v))
    for _ in range(max_iter):
        lo, hi = v[v <= thr], v[v > thr]
        if len(lo) == 0 or len(hi) == 0:
            return None
        new = 0.5 * (lo.mean() + hi.mean())
        if new == thr:
            break
        thr = float(new)
    return thr


def flicker_detect(trajectory, span_windows: int = 5) -> FlickerReport:
    """Label fixed points upper/lower by two-means clustering and count switches.

    ``trajectory`` holds ``(t, x_star[, se])`` entries; ``x_star`` may be
    None for windows without a defined fixed point.
    """
    t = [int(p[0]) for p in trajectory]
    xs = [p[1] for p in trajectory]
    defined = [i for i, v in enumerate(xs) if v is not None and math.isfinite(v)]
    if len(defined) < 4:
        raise InsufficientDataError("flicker detection needs at least 4 defined fixed points")
    v = np.array([xs[i] for i in defined], dtype=float)
    thr = two_means_threshold(v)
    labels = ["undefined"] * len(xs)
    single = thr is None
    lo_mean = hi_mean = None
    if not single:
        lo, hi = v[v <= thr], v[v > thr]
        lo_mean, hi_mean = float(lo.mean()), float(hi.mean())
        dof = len(v) - 2
        pooled = math.sqrt((((lo - lo_mean) ** 2).sum() + ((hi - hi_mean) ** 2).sum()) / dof) if dof > 0 else 0.0
        single = hi_mean - lo_mean <= pooled
    if single:
        for i in defined:
            labels[i] = "upper"
        return FlickerReport(t, labels, 0, None, None, float(v.mean()), None, True)
    for i, val in zip(defined, v):
        labels[i] = "upper" if val > thr else "lower"
    seq = [labels[i] for i in defined]
    alternations = sum(a != b for a, b in zip(seq, seq[1:]))
    span = None
    for k in range(len(seq) - span_windows + 1 if len(seq) >= span_windows else 1):
        chunk = seq[k:k + span_windows]
        if len(set(chunk)) == 2:
            first, last = t[defined[k]], t[defined[min(k + span_windows, len(seq)) - 1]]
            span = (first, last) if span is None else (span[0], last)
    return FlickerReport(t, labels, alternations, span, thr, hi_mean, lo_mean, False)
