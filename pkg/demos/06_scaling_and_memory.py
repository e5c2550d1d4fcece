"""Exponents of the increment scaling law and a long-memory estimate.

One basic exponent fixes the tail of the increment distribution, the
periodogram slopes of signal and noise, and the Hurst index. The
log-periodogram regression recovers the Hurst index of fractional
Gaussian noise.
"""
import warnings

import numpy as np

from catews.scalingdist import ScalingLaw, exponent_web, scaling_pdf, second_moment
from catews.spectral import gph_estimate
from catews.synthetic import fgn

web = exponent_web(-2.02)
print("exponent web at eta = -2.02:", {k: (round(v, 4) if isinstance(v, float) else v) for k, v in web.items()})

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    law = ScalingLaw(0.5)
print(f"second moment ratio over a doubling of dt: {second_moment(law, 2.0) / second_moment(law, 1.0):.4f}"
      f" (2^eta = {2 ** 0.5:.4f})")
print("density at dx = 0, 1, 3:", np.round(scaling_pdf(law, np.array([0.0, 1.0, 3.0]), 1.0), 5))

rng = np.random.default_rng(0)
hs = [gph_estimate(fgn(2**14, 0.8, rng)).hurst for _ in range(20)]
print(f"GPH on fGn(H=0.8): mean {np.mean(hs):.3f}, sd {np.std(hs):.3f}")
