"""Cubic force / quartic potential model of a fold catastrophe.

The drift ``f(x) = a0 x^3 + a1 x^2 + a2 x + a3`` (``a0 < 0``) is minus the
derivative of a quartic potential. Only the relative coefficients
``r_k = a_k / a0`` matter for the roots; ``a0`` sets the time scale.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (DegenerateRootsError, DivergenceError, DomainError, InconsistencyError, InputError,
                     OutsideFoldError, ParseError)
from .timeseries import Signal

TWOFOLD_RTOL = 1e-6
OVERFLOW_GUARD = 1e12


@dataclass(frozen=True)
class CubicForce:
    a0: float
    a1: float
    a2: float
    a3: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a0, self.a1, self.a2, self.a3)):
            raise InputError("force coefficients must be finite")
        if not self.a0 < 0:
            raise InputError("leading coefficient a0 must be negative")

    @classmethod
    def from_relative(cls, r1, r2, r3, a0=-1.0) -> "CubicForce":
        return cls(a0, a0 * r1, a0 * r2, a0 * r3)

    @property
    def relative(self) -> tuple[float, float, float]:
        return self.a1 / self.a0, self.a2 / self.a0, self.a3 / self.a0

    def __call__(self, x):
        return ((self.a0 * x + self.a1) * x + self.a2) * x + self.a3

    def derivative(self, x):
        return (3.0 * self.a0 * x + 2.0 * self.a1) * x + self.a2

    def second_derivative(self, x):
        return 6.0 * self.a0 * x + 2.0 * self.a1

    def scale(self, x=0.0) -> float:
        """Magnitude of the largest term at ``x``, for relative residual checks."""
        ax = abs(x)
        return max(abs(self.a0) * ax**3, abs(self.a1) * ax**2, abs(self.a2) * ax, abs(self.a3), 1e-300)


def force_eval(cf: CubicForce, x):
    return cf(x)


@dataclass(frozen=True)
class PotentialQuartic:
    """``U(x) = A0 x^4 + A1 x^3 + A2 x^2 + A3 x + A4`` with f = -dU/dx."""

    A0: float
    A1: float
    A2: float
    A3: float
    A4: float = 0.0

    def __call__(self, x):
        return (((self.A0 * x + self.A1) * x + self.A2) * x + self.A3) * x + self.A4


def potential_from_force(cf: CubicForce) -> PotentialQuartic:
    return PotentialQuartic(-cf.a0 / 4.0, -cf.a1 / 3.0, -cf.a2 / 2.0, -cf.a3, 0.0)


def force_from_potential(pot: PotentialQuartic) -> CubicForce:
    return CubicForce(-4.0 * pot.A0, -3.0 * pot.A1, -2.0 * pot.A2, -pot.A3)


@dataclass(frozen=True)
class RootSet:
    """Real roots sorted ascending; for ``one_real`` the complex pair is (re, im)."""

    kind: str
    roots: tuple
    stability: tuple
    lambdas: tuple
    discrete_stable: tuple
    complex_pair: tuple | None = None


def _polish(r, x, iters=3):
    # Newton steps on the monic cubic; stop when a step stops helping
    for _ in range(iters):
        f = ((x + r[0]) * x + r[1]) * x + r[2]
        d = (3.0 * x + 2.0 * r[0]) * x + r[1]
        if d == 0:
            break
        nx = x - f / d
        if abs(((nx + r[0]) * nx + r[1]) * nx + r[2]) >= abs(f):
            break
        x = nx
    return x


def _monic_roots(r1, r2, r3):
    """Real roots and complex pair of x^3 + r1 x^2 + r2 x + r3 via the trigonometric/Cardano forms."""
    shift = -r1 / 3.0
    p = r2 - r1 * r1 / 3.0
    q = 2.0 * r1**3 / 27.0 - r1 * r2 / 3.0 + r3
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if p < 0 and disc <= 0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        ys = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]
        return sorted(y + shift for y in ys), None
    s = math.sqrt(max(disc, 0.0))
    u = np.cbrt(-q / 2.0 + s)
    v = np.cbrt(-q / 2.0 - s)
    real = float(u + v) + shift
    re = float(-(u + v) / 2.0) + shift
    im = float(abs(u - v) * math.sqrt(3.0) / 2.0)
    return [real], (re, im)


def cubic_roots(cf: CubicForce) -> RootSet:
    """Classified roots of the force with stability from the sign of f'."""
    r = cf.relative
    reals, pair = _monic_roots(*r)
    reals = [_polish(r, x) for x in reals]
    if pair is not None:
        re, im = pair
        if im <= TWOFOLD_RTOL * max(1.0, abs(re)):
            reals = sorted(reals + [re, re])
            pair = None
    kind = "three_real" if pair is None else "one_real"
    if pair is None:
        reals = sorted(reals)
        gaps = [reals[i + 1] - reals[i] for i in range(2)]
        close = [g <= TWOFOLD_RTOL * max(1.0, abs(reals[i + 1])) for i, g in enumerate(gaps)]
        if any(close):
            kind = "tipping"
            # the double root is a critical point of f: take it from f' = 0
            k = 0 if close[0] and not close[1] else 1
            guess = 0.5 * (reals[k] + reals[k + 1])
            D = r[0] ** 2 - 3.0 * r[1]
            crit = [-r[0] / 3.0 + s * math.sqrt(max(D, 0.0)) / 3.0 for s in (-1.0, 1.0)]
            double = min(crit, key=lambda c: abs(c - guess))
            simple = -r[0] - 2.0 * double
            reals = sorted([double, double, simple])
        roots = tuple(float(x) for x in reals)
    else:
        roots = (float(reals[0]),)
    lambdas = tuple(float(cf.derivative(x)) for x in roots)
    stab = []
    for x, lam in zip(roots, lambdas):
        if lam == 0 or (kind == "tipping" and roots.count(x) >= 2):
            stab.append("marginal")
        else:
            stab.append("stable" if lam < 0 else "unstable")
    disc = tuple(-2.0 < lam < 0.0 for lam in lambdas)
    return RootSet(kind, roots, tuple(stab), lambdas, disc, pair)


def coeffs_from_three_roots(x1, x1p, x1pp) -> tuple[float, float, float]:
    """Relative coefficients (a1/a0, a2/a0, a3/a0) of the cubic with the given roots."""
    return (-(x1pp + x1p + x1),
            x1p * x1pp + x1 * x1pp + x1 * x1p,
            -x1 * x1p * x1pp)


@dataclass(frozen=True)
class TippingDiagnostics:
    D: float
    x_ip: float
    x_extremum: float
    x_twofold: float
    jump: float
    alpha_coef: float
    beta_coef: float

    @property
    def sqrt_D(self) -> float:
        return math.sqrt(self.D)


def tipping_diagnostics(r1, r2, a0=-1.0, ramp_rate=1.0) -> TippingDiagnostics:
    """Fold geometry from the relative coefficients.

    ``alpha_coef`` is half the curvature of f at the twofold root, which is
    ``-sqrt(D)`` under the ``a0 = -1`` normalization; ``beta_coef`` is the
    sensitivity of f to a control parameter that moves ``a3/a0`` at
    ``ramp_rate`` per unit.
    """
    D = r1 * r1 - 3.0 * r2
    if not D > 0:
        raise DomainError("D must be positive for two real extrema")
    sd = math.sqrt(D)
    x_ip = -r1 / 3.0
    return TippingDiagnostics(D, x_ip, x_ip - sd / 3.0, x_ip + sd / 3.0, -sd, a0 * sd, a0 * ramp_rate)


def coeffs_from_tipping(x1, x1pp, ramp_rate=1.0):
    """Relative coefficients for a simple root ``x1`` and a twofold root ``x1pp``.

    Returns ``((a1/a0, a2/a0, a3/a0), TippingDiagnostics)`` under ``a0 = -1``.
    """
    if x1 == x1pp:
        raise DegenerateRootsError("threefold root is not modeled (x1 == x1pp)")
    r = (-(2.0 * x1pp + x1), x1pp * (x1pp + 2.0 * x1), -x1 * x1pp * x1pp)
    return r, tipping_diagnostics(r[0], r[1], -1.0, ramp_rate)


def constraint_one_root(x1, a2_over_a0, a3_over_a0) -> float:
    """a1/a0 that makes ``x1`` a root given the other two relative coefficients."""
    if x1 == 0:
        if a3_over_a0 != 0:
            raise InconsistencyError("x1 = 0 is a root only when a3/a0 = 0")
        raise InconsistencyError("a1/a0 is unconstrained when x1 = 0")
    return -(x1**3 + a2_over_a0 * x1 + a3_over_a0) / (x1 * x1)


class Displacement(NamedTuple):
    y_star: float
    lam: float


def scaling_displacement(alpha_coef, beta_coef, p, branch: int = 1) -> Displacement:
    """Fold-scaling root displacement ``y* = +-sqrt(-beta p / alpha)`` and ``lam = 2 alpha y*``."""
    if alpha_coef == 0:
        raise DomainError("alpha coefficient must be nonzero")
    rad = -beta_coef * p / alpha_coef
    if rad < 0:
        raise OutsideFoldError(f"negative radicand {rad:g}: parameter deviation lies outside the fold")
    y = math.copysign(math.sqrt(rad), branch) if rad > 0 else 0.0
    return Displacement(y, 2.0 * alpha_coef * y)


class DensityTable(NamedTuple):
    x: np.ndarray
    density: np.ndarray


def stationary_density(pot: PotentialQuartic, sigma: float, grid) -> DensityTable:
    """Zero-current stationary density ``exp(-2U/sigma^2)`` normalized on ``grid = (lo, hi, n)``."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    lo, hi, n = grid
    x = np.linspace(lo, hi, int(n))
    e = -2.0 * pot(x) / sigma**2
    w = np.exp(e - e.max())
    w /= np.trapezoid(w, x)
    if max(w[0], w[-1]) * (hi - lo) > 1e-3:
        warnings.warn("density is not negligible at the grid boundary; potential may not confine on this grid")
    return DensityTable(x, w)


def density_moments(table: DensityTable) -> tuple[float, float, float]:
    """Mean, variance and skewness of a tabulated density by trapezoid quadrature."""
    x, p = table
    m = np.trapezoid(x * p, x)
    v = np.trapezoid((x - m) ** 2 * p, x)
    s = np.trapezoid((x - m) ** 3 * p, x) / v**1.5
    return float(m), float(v), float(s)


class AR1Theory(NamedTuple):
    variance: float
    acf: Callable


def ar1_theory(lam, sigma, var_y0, t) -> AR1Theory:
    """Variance at step ``t`` of the linearized process and its lag autocorrelation."""
    if not -2.0 < lam < 0.0:
        raise DomainError("linear stability needs -2 < lambda < 0")
    g = (1.0 + lam) ** (2 * np.asarray(t))
    var = var_y0 * g - (1.0 - g) * sigma**2 / (lam * (2.0 + lam))
    var = float(var) if np.ndim(var) == 0 else var
    return AR1Theory(var, lambda h: (1.0 + lam) ** np.abs(h))


@dataclass(frozen=True)
class Schedule:
    """Piecewise-linear schedule of the relative coefficients and noise scale."""

    t: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    sigma: np.ndarray
    a0: float = -1.0

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, k), dtype=float) for k in ("t", "r1", "r2", "r3", "sigma")]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1 or len(arrs[0]) < 1:
            raise InputError("schedule columns must be 1-d and of equal length")
        if np.any(np.diff(arrs[0]) <= 0):
            raise InputError("schedule times must be strictly increasing")
        if np.any(arrs[4] < 0) or not all(np.all(np.isfinite(a)) for a in arrs):
            raise InputError("schedule values must be finite with sigma >= 0")
        if not self.a0 < 0:
            raise InputError("a0 must be negative")
        for k, a in zip(("t", "r1", "r2", "r3", "sigma"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, k, a)

    @classmethod
    def ramp(cls, T, start, end, sigma, a0=-1.0, t_start=0, t_end=None) -> "Schedule":
        """Linear ramp of (r1, r2, r3) from ``start`` to ``end`` between two times."""
        t_end = T - 1 if t_end is None else t_end
        s, e = np.asarray(start, float), np.asarray(end, float)
        return cls(np.array([t_start, t_end], float), *(np.array([s[k], e[k]]) for k in range(3)),
                   np.array([sigma, sigma], float), a0)

    @classmethod
    def from_csv(cls, path, a0=-1.0) -> "Schedule":
        path = Path(path)
        if not path.exists():
            raise InputError(f"input not found: {path}")
        cols = ("t", "a1_over_a0", "a2_over_a0", "a3_over_a0", "sigma")
        rows = []
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or any(c not in reader.fieldnames for c in cols):
                raise ParseError(f"schedule header must contain {', '.join(cols)}", line=1)
            for row in reader:
                try:
                    rows.append([float(row[c]) for c in cols])
                except (TypeError, ValueError):
                    raise ParseError("non-numeric schedule value", line=reader.line_num) from None
        if not rows:
            raise InputError("schedule has no rows")
        a = np.array(rows)
        return cls(a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4], a0)

    def at(self, t):
        """Interpolated (r1, r2, r3, sigma) at time(s) ``t``; constant beyond the ends."""
        return tuple(np.interp(t, self.t, getattr(self, k)) for k in ("r1", "r2", "r3", "sigma"))

    def force(self, t) -> CubicForce:
        r1, r2, r3, _ = self.at(float(t))
        return CubicForce.from_relative(float(r1), float(r2), float(r3), self.a0)


def _drift_tables(drift, n_steps):
    """Per-step coefficient arrays (a0..a3) or a callable, plus optional sigma per step."""
    steps = np.arange(n_steps, dtype=float)
    if isinstance(drift, CubicForce):
        return np.tile([drift.a0, drift.a1, drift.a2, drift.a3], (n_steps, 1)), None
    if isinstance(drift, Schedule):
        r1, r2, r3, sig = drift.at(steps)
        a0 = np.full(n_steps, drift.a0)
        return np.column_stack([a0, a0 * r1, a0 * r2, a0 * r3]), sig
    if callable(drift):
        return drift, None
    forces = list(drift)
    if len(forces) < n_steps:
        raise InputError(f"force sequence has {len(forces)} entries, need {n_steps}")
    return np.array([[f.a0, f.a1, f.a2, f.a3] for f in forces[:n_steps]]), None


def _step_drift(coef, t, x):
    if callable(coef):
        return coef(x, t)
    a0, a1, a2, a3 = coef[t]
    return ((a0 * x + a1) * x + a2) * x + a3


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def langevin_simulate(drift, sigma=None, x0: float = 0.0, T: int = 1000, seed=None) -> Signal:
    """Discrete Langevin path ``x[t+1] = x[t] + f(x[t]; P_t) + eta_t`` of ``T`` samples.

    ``drift`` is a :class:`CubicForce`, a :class:`Schedule`, a sequence of
    forces (one per step) or a callable ``f(x, t)``. ``sigma`` overrides a
    schedule's own noise column. Noise is Gaussian from ``seed``.
    """
    if T < 1:
        raise InputError("T must be at least 1")
    coef, sched_sigma = _drift_tables(drift, max(T - 1, 0))
    if sigma is None:
        if sched_sigma is None:
            raise InputError("sigma is required unless the schedule carries it")
        sig = sched_sigma
    else:
        if sigma < 0:
            raise InputError("sigma must be non-negative")
        sig = np.full(max(T - 1, 0), float(sigma))
    noise = sig * _as_rng(seed).standard_normal(max(T - 1, 0))
    x = np.empty(T)
    x[0] = x0
    for t in range(T - 1):
        nxt = x[t] + _step_drift(coef, t, x[t]) + noise[t]
        if not abs(nxt) <= OVERFLOW_GUARD:
            raise DivergenceError(f"trajectory diverged at t={t + 1}", t=t + 1)
        x[t + 1] = nxt
    return Signal.from_values(x)


def spawn_seeds(seed, n: int):
    """Independent per-path seeds: child ``i`` of ``SeedSequence(seed)``."""
    return np.random.SeedSequence(seed).spawn(n)


def simulate_ensemble(drift, sigma=None, x0=0.0, T: int = 1000, n_paths: int = 100, seed=None,
                      y0_sd: float = 0.0) -> np.ndarray:
    """``(n_paths, T)`` array of paths; path ``i`` uses child seed ``i``.

    With ``y0_sd > 0`` each path starts at ``x0`` plus a Gaussian offset
    drawn first from its own stream. Path ``i`` equals
    ``langevin_simulate(..., seed=spawn_seeds(seed, n_paths)[i])`` when
    ``y0_sd == 0``.
    """
    coef, sched_sigma = _drift_tables(drift, max(T - 1, 0))
    sig = sched_sigma if sigma is None else np.full(max(T - 1, 0), float(sigma))
    if sig is None:
        raise InputError("sigma is required unless the schedule carries it")
    xs = np.empty((n_paths, T))
    noise = np.empty((n_paths, max(T - 1, 0)))
    for i, ss in enumerate(spawn_seeds(seed, n_paths)):
        rng = np.random.default_rng(ss)
        start = x0 + (y0_sd * rng.standard_normal() if y0_sd > 0 else 0.0)
        xs[i, 0] = start
        noise[i] = sig * rng.standard_normal(max(T - 1, 0))
    for t in range(T - 1):
        nxt = xs[:, t] + _step_drift(coef, t, xs[:, t]) + noise[:, t]
        if not np.all(np.abs(nxt) <= OVERFLOW_GUARD):
            raise DivergenceError(f"trajectory diverged at t={t + 1}", t=t + 1)
        xs[:, t + 1] = nxt
    return xs
