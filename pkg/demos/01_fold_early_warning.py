"""Critical slowing down ahead of a fold.

A slow ramp pushes a bistable cubic drift through its lower fold. The
upper equilibrium flattens and vanishes, and the path drops to the lower
branch. Before the drop, windowed variance and lag-one autoregression
climb and low-frequency power grows.
"""
import numpy as np

from catews.catastrophe import langevin_simulate
from catews.ews import ews_scan
from catews.spectral import periodogram, reddening_index, reddening_trend
from catews.synthetic import fold_jump_time, fold_ramp
from catews.timeseries import Signal, WindowSpec

x = langevin_simulate(fold_ramp(), None, x0=1.879, T=6000, seed=3).x
t_jump = fold_jump_time(x)
print(f"path leaves the upper branch at t = {t_jump}")

# analyse whole windows ending before the jump
pre = x[: t_jump // 100 * 100]
spec = WindowSpec(width=100, step=100)
reports = ews_scan(Signal.from_values(pre), spec)

print(f"{'t':>6} {'variance':>10} {'ar1':>6} {'x*':>8}")
for r in reports[::5] + ([reports[-1]] if (len(reports) - 1) % 5 else []):
    xs = f"{r.x_star:8.3f}" if r.x_star is not None else "       -"
    print(f"{r.center_t:6d} {r.variance:10.2e} {r.ar1:6.3f} {xs}")

# reddening: zero-frequency power against the bulk of each window's periodogram
# (windows are taken relative to the noiseless path so the slow drift is removed)
clean = langevin_simulate(fold_ramp(), 0.0, x0=1.879, T=len(pre)).x
pgs = [periodogram(pre[s:s + 100] - clean[s:s + 100]) for s in range(0, len(pre), 100)]
ratios = [r for _, r in reddening_index(pgs)]
print(f"reddening Kendall tau over {len(ratios)} windows: {reddening_trend(ratios):.2f}")
print(f"variance grew {reports[-1].variance / np.median([r.variance for r in reports[:5]]):.0f}x")
