"""Synthetic data with planted structure: long-memory noise, AR(1) paths,
fold and double-well drift schedules, factor-model panels and trees."""
from __future__ import annotations

import numpy as np

from .catastrophe import CubicForce, Schedule
from .errors import DomainError, InputError
from .mst import Panel
from .timeseries import PriceSeries
from .trend import TrendParams, trend_values


def fgn(n: int, hurst: float, rng, sigma: float = 1.0) -> np.ndarray:
    """Fractional Gaussian noise by circulant embedding of its autocovariance."""
    if not 0 < hurst < 1:
        raise DomainError("Hurst exponent must lie in (0, 1)")
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * hurst
    acov = 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)
    row = np.concatenate([acov, acov[-2:0:-1]])
    lam = np.fft.fft(row).real
    if np.any(lam < -1e-9 * lam.max()):
        raise DomainError("circulant embedding is not non-negative definite")
    lam = np.clip(lam, 0.0, None)
    m = len(row)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    w = np.fft.fft(np.sqrt(lam / m) * z)
    return sigma * w.real[:n]


def ar1_paths(lam: float, sigma: float, T: int, n_paths: int, rng, y0_sd: float = 0.0) -> np.ndarray:
    """(n_paths, T) paths of y[t+1] = (1 + lam) y[t] + eta, y[0] ~ N(0, y0_sd^2)."""
    y = np.empty((n_paths, T))
    y[:, 0] = y0_sd * rng.standard_normal(n_paths) if y0_sd > 0 else 0.0
    eta = sigma * rng.standard_normal((n_paths, T - 1))
    for t in range(T - 1):
        y[:, t + 1] = (1.0 + lam) * y[:, t] + eta[:, t]
    return y


def fold_force(c: float, k: float = 0.05) -> CubicForce:
    """``f(x) = -k (x^3 - 3x) + k c``: bistable for |c| < 2, folds at c = -2 and c = 2."""
    return CubicForce(-k, 0.0, 3.0 * k, k * c)


def fold_ramp(T: int = 6000, c_start: float = 1.0, c_end: float = -2.6, sigma: float = 0.01,
              k: float = 0.05) -> Schedule:
    """Slow linear ramp of the fold force through the lower fold at c = -2.

    The upper branch vanishes there and the state jumps to the lower one.
    """
    return Schedule.ramp(T, (0.0, -3.0, -c_start), (0.0, -3.0, -c_end), sigma, a0=-k)


def fold_jump_time(x) -> int | None:
    """First index where a path started on the upper branch falls below zero."""
    idx = np.nonzero(np.asarray(x) < 0)[0]
    return int(idx[0]) if len(idx) else None


def double_well_schedule(T: int = 6000, span=(1000, 5000), c_outside: float = 3.0, sigma: float = 0.3,
                         k: float = 0.05) -> Schedule:
    """Monostable (upper), then symmetric bistable over ``span``, then monostable (lower)."""
    t0, t1 = span
    t = np.array([0, t0 - 1e-6, t0, t1 - 1e-6, t1, T], dtype=float)
    c = np.array([c_outside, c_outside, 0.0, 0.0, -c_outside, -c_outside])
    z = np.zeros_like(t)
    return Schedule(t, z, z - 3.0, -c, np.full_like(t, sigma), a0=-k)


def factor_panel(rng, n_assets: int = 100, n_windows: int = 50, width: int = 60, span=(20, 30),
                 hub: int = 7, hub_loading: float = 5.0, loading_range=(0.3, 0.8), scale: float = 0.01) -> Panel:
    """Independent returns with a common factor switched on for windows in ``span``.

    One asset carries a much larger loading, so inside the span the tree
    collapses toward a star around it.
    """
    T = n_windows * width
    eps = rng.standard_normal((T, n_assets))
    factor = rng.standard_normal(T)
    b = rng.uniform(*loading_range, n_assets)
    if hub is not None:
        b[hub] = hub_loading
    s = slice(span[0] * width, span[1] * width)
    eps[s] += factor[s, None] * b[None, :]
    return Panel.from_returns(scale * eps, [f"A{i:03d}" for i in range(n_assets)])


def preferential_attachment_degrees(n: int, rng) -> np.ndarray:
    """Degrees of a linear preferential-attachment tree (one edge per new vertex)."""
    ends = np.empty(2 * (n - 1), dtype=int)
    ends[0], ends[1] = 0, 1
    deg = np.zeros(n, dtype=int)
    deg[0] = deg[1] = 1
    for v in range(2, n):
        u = ends[rng.integers(2 * (v - 1))]
        deg[u] += 1
        deg[v] += 1
        ends[2 * (v - 1)] = u
        ends[2 * (v - 1) + 1] = v
    return deg


def random_recursive_tree(n: int, rng) -> list[tuple[int, int]]:
    """Each new vertex joins a uniformly chosen earlier vertex."""
    return [(int(rng.integers(v)), v) for v in range(1, n)]


def planted_trend_series(params: TrendParams, n: int, noise_sd: float, rng, start="2000-01-03",
                         label="synthetic") -> PriceSeries:
    """Trend evaluated on trading days 0..n-1 plus Gaussian noise, on consecutive business days."""
    if n < 2:
        raise InputError("need at least 2 points")
    values = trend_values(params, np.arange(n, dtype=float)) + noise_sd * rng.standard_normal(n)
    dates = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    return PriceSeries(dates, values, label)
