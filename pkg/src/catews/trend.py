"""Mittag-Leffler trend with beating oscillations, and its least-squares fit.

The trend of one side (bull or bear) of a market peak is

    X(s) = (X0 - X1) * E_alpha(-(s / tau)**alpha) - X1 * cos(omega s) * cos(delta_omega s),

with ``s = |t - t_c|`` in trading days.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np
from scipy import integrate, optimize, special

from .errors import ConvergenceError, DomainError, InputError, InsufficientDataError, RangeError
from .timeseries import PriceSeries

# series accepted when its rounding error, ~eps * sum|terms|, stays below rtol * |sum|
_SERIES_MAX_TERMS = 4000
_SERIES_MAX_SCALE = 30.0  # u**(1/alpha) beyond this goes to the integral representation


def _ml_series(alpha, u, rtol):
    """Power series of E_alpha(-u); returns (values, accepted mask)."""
    umax = float(u.max())
    n = np.arange(_SERIES_MAX_TERMS, dtype=float)
    lg = special.gammaln(1.0 + alpha * n)
    # log-magnitude bound of the terms at the largest argument
    with np.errstate(divide="ignore"):
        bound = n * math.log(umax) - lg if umax > 0 else -lg
    peak = int(np.argmax(bound))
    past = np.nonzero((np.arange(len(n)) > peak) & (bound < bound[peak] - 60.0))[0]
    nterms = int(past[0]) + 1 if len(past) else len(n)
    ratio = np.exp(lg[:nterms - 1] - lg[1:nterms])
    total = np.empty_like(u)
    absum = np.empty_like(u)
    block = max(1, 400_000 // nterms)
    for i in range(0, len(u), block):
        ub = u[i:i + block]
        terms = np.cumprod(-ub[:, None] * ratio[None, :], axis=1)
        total[i:i + block] = 1.0 + terms.sum(axis=1)
        absum[i:i + block] = 1.0 + np.abs(terms).sum(axis=1)
    eps = np.finfo(float).eps
    ok = (4.0 * eps * absum <= rtol * np.abs(total)) & (len(past) > 0)
    return total, ok


def _ml_asymptotic(alpha, u, rtol):
    """Large-argument expansion of E_alpha(-u) for 0 < alpha < 2; returns (values, accepted mask).

    The divergent sum -sum_k (-u)^(-k) / Gamma(1 - alpha k) is cut just before
    its smallest term, which bounds the error. For alpha > 1 the decaying
    oscillation from the two poles is added.
    """
    # the smallest term sits near k = u**(1/alpha) / alpha
    kcap = int(1.5 * float(u.max()) ** (1.0 / alpha) / alpha) + 20
    k = np.arange(1, min(_SERIES_MAX_TERMS, kcap) + 1, dtype=float)
    lg = special.gammaln(alpha * k)
    sgn = np.where(k % 2 == 1, 1.0, -1.0) * np.sin(math.pi * alpha * k) / math.pi
    total = np.zeros_like(u)
    ok = np.zeros(len(u), dtype=bool)
    eps = np.finfo(float).eps
    block = max(1, 400_000 // len(k))
    for i in range(0, len(u), block):
        lu = np.log(u[i:i + block])[:, None]
        logb = lg[None, :] - k[None, :] * lu
        kmin = np.argmin(logb, axis=1)
        keep = np.arange(len(k))[None, :] < kmin[:, None]
        with np.errstate(over="ignore", invalid="ignore"):
            terms = np.where(keep, np.exp(np.where(keep, logb, 0.0)) * sgn[None, :], 0.0)
        tot = terms.sum(axis=1)
        err = np.exp(logb[np.arange(len(kmin)), kmin])
        good = ((kmin < len(k) - 1) & (err <= 0.1 * rtol * np.abs(tot))
                & (4.0 * eps * np.abs(terms).sum(axis=1) <= rtol * np.abs(tot)))
        total[i:i + block] = tot
        ok[i:i + block] = good
    if alpha > 1.0:
        s = u ** (1.0 / alpha)
        total = total + 2.0 / alpha * np.exp(s * math.cos(math.pi / alpha)) * np.cos(s * math.sin(math.pi / alpha))
    return total, ok


def _ml_integral(alpha, u, rtol=1e-13):
    """E_alpha(-u) for 0 < alpha < 2 from the Laplace-type integral representation.

    E_alpha(-s**alpha) = int_0^inf exp(-r s) K(r) dr + g(s), with the kernel
    written in v = log r so that the peak at r = 1 is well resolved even
    when alpha is close to 1. ``g`` is the decaying oscillation from the
    two poles on the principal sheet, present only for alpha > 1.

    ``u`` is an array. The integral has one sign and decays like
    1 / (u |Gamma(1 - alpha)|), so each point is weighted by the inverse of
    that estimate and all points share one adaptive vector quadrature.
    """
    u = np.asarray(u, dtype=float)
    s = u ** (1.0 / alpha)
    sin_a, cos_a = math.sin(alpha * math.pi), math.cos(alpha * math.pi)
    tol = min(max(0.1 * rtol, 1e-13), 1e-8)
    weight = np.maximum(u * abs(special.gamma(1.0 - alpha)), 1.0)

    def f(v):
        if alpha * abs(v) > 700.0:
            return np.zeros_like(s)
        with np.errstate(over="ignore"):
            ev = s * math.exp(min(v, 700.0))
        return weight * np.exp(-ev) * (sin_a / (2.0 * math.pi * (math.cosh(alpha * v) + cos_a)))

    left = integrate.quad_vec(f, -math.inf, 0.0, epsabs=0.0, epsrel=tol, norm="max", limit=2000)[0]
    right = integrate.quad_vec(f, 0.0, math.inf, epsabs=0.0, epsrel=tol, norm="max", limit=2000)[0]
    out = (left + right) / weight
    if alpha > 1.0:
        out += 2.0 / alpha * np.exp(s * math.cos(math.pi / alpha)) * np.cos(s * math.sin(math.pi / alpha))
    return out


def _ml_mp(alpha, u):
    """Extended-precision series; used for alpha > 2 where the other routes do not apply."""
    digits = int(float(u) ** (1.0 / alpha) / 2.3) + 30
    with mpmath.workdps(digits):
        a, z = mpmath.mpf(alpha), -mpmath.mpf(u)
        tol = mpmath.mpf(10) ** (-(digits - 5))
        total, n = mpmath.mpf(0), 0
        while True:
            term = z**n / mpmath.gamma(1 + a * n)
            total += term
            if n > 5 and abs(term) < tol:
                return float(total)
            n += 1


def mittag_leffler(alpha: float, u, rtol: float = 1e-11):
    """Evaluate ``E_alpha(-u)`` for ``u >= 0``.

    The power series is used wherever its cancellation error stays below
    ``rtol``, the large-argument expansion wherever its truncation error
    does, and the remaining points fall back to an integral representation.
    Returns a float for scalar ``u`` and an array otherwise.
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise DomainError(f"alpha must be a positive finite number, got {alpha}")
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("u must be finite")
    if np.any(arr < 0):
        raise DomainError("u must be non-negative")
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).ravel()
    if alpha == 1.0:
        out = np.exp(-flat)
    elif alpha == 2.0:
        out = np.cos(np.sqrt(flat))
    else:
        out = np.empty_like(flat)
        near = flat ** (1.0 / alpha) <= _SERIES_MAX_SCALE
        ok = np.zeros_like(near)
        if near.any():
            vals, good = _ml_series(alpha, flat[near], rtol)
            out[near] = vals
            ok[near] = good
        rest = np.nonzero(~ok)[0]
        if len(rest) and alpha < 2.0:
            vals, good = _ml_asymptotic(alpha, flat[rest], rtol)
            out[rest[good]] = vals[good]
            rest = rest[~good]
        if len(rest) and alpha < 2.0:
            out[rest] = _ml_integral(alpha, flat[rest], rtol)
        elif len(rest):
            out[rest] = [_ml_mp(alpha, v) for v in flat[rest]]
    out = out.reshape(np.atleast_1d(arr).shape)
    return float(out[0]) if scalar else out


_PARAM_NAMES = ("t_c", "tau", "alpha", "omega", "delta_omega", "x0_plus_x1", "x1")
_JSON_NAMES = ("t_c", "tau", "alpha", "omega", "delta_omega", "X0_plus_X1", "X1")
_FREQ_MAX = 0.5


@dataclass(frozen=True)
class TrendParams:
    t_c: float
    tau: float
    alpha: float
    omega: float = 0.0
    delta_omega: float = 0.0
    x0_plus_x1: float = 0.0
    x1: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite(v) for v in self.as_array()):
            raise InputError("trend parameters must be finite")
        if self.tau <= 0 or self.alpha <= 0 or self.t_c <= 0:
            raise InputError("tau, alpha and t_c must be positive")
        for name in ("omega", "delta_omega"):
            v = getattr(self, name)
            if not 0.0 <= v < _FREQ_MAX:
                raise InputError(f"{name} must lie in [0, {_FREQ_MAX})")

    @property
    def x0(self) -> float:
        return self.x0_plus_x1 - self.x1

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in _PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, a) -> "TrendParams":
        return cls(*map(float, a))

    def shifted(self, dt: float) -> "TrendParams":
        return TrendParams(self.t_c + dt, *self.as_array()[1:])


def _trend_parts(t, t_c, tau, alpha, omega, delta_omega, rtol=1e-11):
    s = np.abs(np.asarray(t, dtype=float) - t_c)
    decay = mittag_leffler(alpha, (s / tau) ** alpha, rtol=rtol)
    osc = np.cos(omega * s) * np.cos(delta_omega * s)
    return decay, osc


def trend_values(params: TrendParams, t, rtol: float = 1e-11):
    """Trend level at trading day(s) ``t``."""
    decay, osc = _trend_parts(t, params.t_c, params.tau, params.alpha, params.omega, params.delta_omega, rtol)
    return (params.x0 - params.x1) * decay - params.x1 * osc


def trend_value(params: TrendParams, t: float) -> float:
    return float(trend_values(params, np.asarray([t], dtype=float))[0])


@dataclass
class FitReport:
    params: TrendParams
    std_devs: dict
    r_squared: float
    residual_norm: float
    iterations: int
    side: str = "bull"
    n_points: int = 0
    t_range: tuple = (0, 0)

    def degenerate(self, name: str) -> bool:
        """True when a parameter's standard deviation exceeds its magnitude."""
        sd = self.std_devs[name]
        return not np.isfinite(sd) or sd > abs(getattr(self.params, name))

    def to_dict(self) -> dict:
        vals = self.params.as_array()
        out = {j: float(v) for j, v in zip(_JSON_NAMES, vals)}
        out["R2"] = float(self.r_squared)
        out["std"] = {j: _json_float(self.std_devs[p]) for j, p in zip(_JSON_NAMES, _PARAM_NAMES)}
        out["residual_rms"] = float(self.residual_norm)
        out["iterations"] = int(self.iterations)
        out["side"] = self.side
        out["n_points"] = int(self.n_points)
        out["t_range"] = [int(self.t_range[0]), int(self.t_range[1])]
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "FitReport":
        params = TrendParams(*(float(d[j]) for j in _JSON_NAMES))
        std = {p: float(d["std"][j]) if d["std"][j] is not None else math.inf for j, p in zip(_JSON_NAMES, _PARAM_NAMES)}
        return cls(params, std, d["R2"], d["residual_rms"], d["iterations"], d.get("side", "bull"),
                   d.get("n_points", 0), tuple(d.get("t_range", (0, 0))))


def _json_float(v):
    return float(v) if np.isfinite(v) else None


def side_slice(values, side: str) -> slice:
    """Index range of one side of the series' global maximum (peak included)."""
    # with a tied maximum the bull side ends at its last occurrence and the bear side starts at its first
    v = np.asarray(values)
    if side == "bull":
        return slice(0, len(v) - int(np.argmax(v[::-1])))
    if side == "bear":
        return slice(int(np.argmax(v)), len(v))
    raise InputError("side must be 'bull' or 'bear'")


def _linear_amplitudes(decay, osc, y):
    # 2x2 normal equations for y ~ a * decay + b * osc
    g11, g12, g22 = decay @ decay, decay @ osc, osc @ osc
    r1, r2 = decay @ y, osc @ y
    det = g11 * g22 - g12 * g12
    if not np.isfinite(det) or abs(det) <= 1e-12 * max(g11 * g22, 1e-300):
        # collinear columns: fit the better single column
        if g11 >= g22 and g11 > 0:
            return r1 / g11, 0.0
        return 0.0, (r2 / g22 if g22 > 0 else 0.0)
    return (g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det


def _projected_residual(theta, t, y, rtol):
    decay, osc = _trend_parts(t, *theta, rtol=rtol)
    a, b = _linear_amplitudes(decay, osc, y)
    return y - a * decay - b * osc, a, b


SCREEN_ALPHAS = (0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.6, 1.9)
SCREEN_N_TAU = 8


def _screen_starts(t, y, side, lo, hi, n_best):
    """Best starting points from a grid, scored on a subsample after eliminating the amplitudes.

    The decay term is evaluated once per (t_c, tau, alpha); every pair of
    frequencies is then scored in one vectorized 2x2 solve.
    """
    n = len(t)
    stride = max(1, n // 150)
    ts, ys = t[::stride], y[::stride]
    yy = ys @ ys
    t_lo, t_hi = float(t[0]), float(t[-1])
    alphas = SCREEN_ALPHAS
    taus = n * np.geomspace(0.1, 2.0, SCREEN_N_TAU)
    if side == "bull":
        tcs = [t_lo + f * n for f in (0.8, 1.0, 1.2)]
    else:
        tcs = [t_hi - f * n for f in (0.8, 1.0, 1.2)]
    # the two frequencies are interchangeable, so unordered pairs suffice
    freqs = np.minimum(math.pi / n * 2.0 ** (np.arange(-8, 17) / 4.0), 0.45)
    iw, idw = np.tril_indices(len(freqs))
    pairs = np.column_stack([freqs[iw], freqs[idw]])
    scored = []
    for tc in tcs:
        tc = float(np.clip(tc, lo[0], hi[0]))
        sabs = np.abs(ts - tc)
        osc = np.cos(pairs[:, :1] * sabs) * np.cos(pairs[:, 1:] * sabs)
        g22 = (osc * osc).sum(axis=1)
        r2 = osc @ ys
        for a in alphas:
            for tau in taus:
                d = mittag_leffler(a, (sabs / tau) ** a, rtol=1e-6)
                g11, r1 = d @ d, d @ ys
                g12 = osc @ d
                det = g11 * g22 - g12 * g12
                with np.errstate(divide="ignore", invalid="ignore"):
                    ca = (g22 * r1 - g12 * r2) / det
                    cb = (g11 * r2 - g12 * r1) / det
                    sse = yy - ca * r1 - cb * r2
                single = max(yy - r1 * r1 / g11 if g11 > 0 else yy, 0.0)
                bad = ~np.isfinite(sse) | (np.abs(det) <= 1e-12 * np.maximum(g11 * g22, 1e-300))
                sse = np.where(bad, single, sse)
                for k in np.argsort(sse, kind="stable")[:n_best]:
                    scored.append((float(sse[k]), len(scored), np.array([tc, tau, a, *pairs[k]])))
    scored.sort(key=lambda s: (s[0], s[1]))
    return [np.clip(s[2], lo, hi) for s in scored[:n_best]]


def _bounds(t, side):
    n = len(t)
    lo = np.array([1e-3, 1e-3, 0.05, 0.0, 0.0])
    hi = np.array([float(t[-1]) + 2.0 * n, 100.0 * n, 2.0, _FREQ_MAX - 1e-9, _FREQ_MAX - 1e-9])
    return lo, hi


def _covariance_std(params: TrendParams, t, y, dof):
    p = params.as_array()
    resid = y - trend_values(params, t)
    s2 = resid @ resid / max(dof, 1)
    scale = np.maximum(np.abs(p), 1e-3)
    jac = np.empty((len(t), len(p)))
    for k in range(len(p)):
        h = 1e-6 * scale[k]
        up, dn = p.copy(), p.copy()
        up[k] += h
        dn[k] -= h
        if k in (3, 4):
            dn[k] = max(dn[k], 0.0)
        jac[:, k] = (_eval_raw(up, t) - _eval_raw(dn, t)) / (up[k] - dn[k])
    jtj = jac.T @ jac
    d = np.sqrt(np.diag(jtj))
    d[d == 0] = 1.0
    norm = jtj / np.outer(d, d)
    w, v = np.linalg.eigh(norm)
    good = w > 1e-13 * w.max() if w.max() > 0 else np.zeros_like(w, dtype=bool)
    inv = (v[:, good] / w[good]) @ v[:, good].T
    var = np.diag(inv) / d**2 * s2
    # directions in the null space are unidentifiable
    null = v[:, ~good]
    unident = (np.abs(null) > 1e-6).any(axis=1) if null.size else np.zeros(len(p), dtype=bool)
    std = np.sqrt(np.maximum(var, 0.0))
    std[unident] = np.inf
    return dict(zip(_PARAM_NAMES, map(float, std)))


def _eval_raw(p, t):
    t_c, tau, alpha, omega, domega, xs, x1 = p
    decay, osc = _trend_parts(t, t_c, tau, alpha, omega, domega, rtol=1e-9)
    return (xs - 2.0 * x1) * decay - x1 * osc


def _cusp_polish(theta, sse, t, y, lo, hi, rtol, max_nfev):
    """Try the turning point on the nearest sample day.

    For alpha < 1 every sample day is a cusp of the objective in t_c, so the
    minimum often sits exactly on one and a smooth optimizer stalls beside it.
    """
    tc = float(round(theta[0]))
    if lo[0] <= tc <= hi[0] and tc != theta[0]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.least_squares(
                lambda th: _projected_residual(np.r_[tc, th], t, y, rtol)[0], theta[1:],
                bounds=(lo[1:], hi[1:]), method="trf", jac="3-point", max_nfev=max_nfev,
                xtol=1e-14, ftol=1e-14, gtol=1e-14)
        cost = float(res.fun @ res.fun)
        if cost < sse:
            sse, theta = cost, np.r_[tc, res.x]
    return sse, theta


def fit_trend(series, side: str = "bull", init: TrendParams | None = None, t_offset: int = 0,
              max_nfev: int = 400, n_refine: int = 5) -> FitReport:
    """Least-squares fit of the Mittag-Leffler trend to one side of a peak.

    The two amplitudes enter linearly and are eliminated (variable
    projection); the remaining five parameters are refined by a bounded
    trust-region Gauss-Newton iteration with a central-difference Jacobian.
    Without ``init`` a coarse grid of starts is screened on a subsample and
    the ``n_refine`` best starts are refined on the full data.
    """
    values = series.values if isinstance(series, PriceSeries) else np.asarray(series, dtype=float)
    if len(values) < 30:
        raise InsufficientDataError("trend fitting needs at least 30 observations")
    sl = side_slice(values, side)
    y = np.asarray(values[sl], dtype=float)
    t = np.arange(len(values))[sl].astype(float) + t_offset
    if len(y) < 30:
        raise RangeError(f"series does not cover the {side} side of its peak ({len(y)} points)")
    lo, hi = _bounds(t, side)
    fit_rtol = 1e-9

    if init is not None:
        starts = [np.clip(init.as_array()[:5], lo, hi)]
    else:
        starts = _screen_starts(t, y, side, lo, hi, n_refine)

    def refine(theta0, nfev, jac="3-point"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return optimize.least_squares(
                lambda th: _projected_residual(th, t, y, fit_rtol)[0], theta0, bounds=(lo, hi),
                method="trf", jac=jac, x_scale="jac", max_nfev=nfev,
                xtol=1e-12, ftol=1e-12, gtol=1e-12)

    # a short run from every start, then the leader is iterated to convergence
    best = None
    for order, theta0 in enumerate(starts):
        res = refine(theta0, 10, "2-point") if len(starts) > 1 else refine(theta0, max_nfev)
        sse = float(res.fun @ res.fun)
        if best is None or sse < best[0]:
            best = (sse, order, res)
    if len(starts) > 1:
        res = refine(best[2].x, max_nfev)
        best = (float(res.fun @ res.fun), best[1], res)
    sse, _, res = best
    theta = res.x
    if theta[2] < 1.0:
        sse, theta = _cusp_polish(theta, sse, t, y, lo, hi, fit_rtol, max_nfev)
    _, a, b = _projected_residual(theta, t, y, fit_rtol)
    x1 = -b
    params = TrendParams(float(theta[0]), float(theta[1]), float(theta[2]), float(theta[3]), float(theta[4]),
                         float(a + 2.0 * x1), float(x1))
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / tss if tss > 0 else (1.0 if sse == 0 else -math.inf)
    std = _covariance_std(params, t, y, len(y) - 7)
    report = FitReport(params, std, r2, math.sqrt(sse / len(y)), int(res.nfev), side, len(y),
                       (int(t[0]), int(t[-1])))
    if res.status == 0:
        raise ConvergenceError(f"trend fit did not converge in {max_nfev} evaluations", best=report)
    return report


# Fit tables reported for the index peaks (parameters, standard deviations).
PUBLISHED_FITS = {
    "WIG_bull": (TrendParams(892, 105, 0.57, 0.0041, 0.0, 60081, -8659),
                 dict(t_c=73, tau=420, alpha=0.23, omega=0.0005, delta_omega=0.0, x0_plus_x1=85273, x1=2352)),
    "WIG_bear": (TrendParams(810, 272, 1.562, 0.0431, 0.0065, 41963, -2528),
                 dict(t_c=0, tau=20, alpha=0.025, omega=0.0005, delta_omega=0.0004, x0_plus_x1=334, x1=269)),
    "DAX_bull": (TrendParams(969, 426, 0.52, 0.00362, 0.0065, 4698, -763),
                 dict(t_c=1, tau=391, alpha=0.03, omega=0.00004, delta_omega=0.0004, x0_plus_x1=82, x1=35)),
    "DAX_bear": (TrendParams(968, 426, 1.12, 0.0089, 0.0246, 5464, -847),
                 dict(t_c=0, tau=72, alpha=0.03, omega=0.0001, delta_omega=0.0001, x0_plus_x1=70, x1=36)),
    "DJIA_bull": (TrendParams(627, 333, 1.29, 0.0107, 0.0220, 3486, -332),
                  dict(t_c=3, tau=38, alpha=0.02, omega=0.0002, delta_omega=0.0002, x0_plus_x1=40, x1=28)),
    "DJIA_bear": (TrendParams(640, 165, 1.938, 0.030, 0.040, 4010, -866),
                  dict(t_c=0, tau=191, alpha=0.575, omega=0.070, delta_omega=0.070, x0_plus_x1=110, x1=81)),
}


def well_identified(std_devs: dict, params: TrendParams) -> list:
    """Parameter names whose standard deviation is below their magnitude."""
    return [n for n in _PARAM_NAMES if std_devs[n] < abs(getattr(params, n))]
