"""Reading a cubic drift from its equilibria.

Given a simple root and a twofold root, the relative coefficients of the
cubic follow directly. The fold geometry (inflection point, jump size)
comes out alongside. Perturbing the constant term opens the fold, and the
equilibrium moves as the square root of the perturbation.
"""
import numpy as np

from catews import catastrophe as cat

rel, diag = cat.coeffs_from_tipping(x1=-101.17, x1pp=278.92)
print("a1/a0, a2/a0, a3/a0 =", [f"{v:.6g}" for v in rel])
print(f"sqrt(D) = {diag.sqrt_D:.2f}, inflection = {diag.x_ip:.2f}, jump = {diag.jump:.2f}")

roots = cat.cubic_roots(cat.CubicForce.from_relative(*rel))
print("roots:", roots.kind, roots.roots, roots.stability)

# two separate roots again: a three-root configuration before the threshold
before = cat.coeffs_from_three_roots(278.92, -488.308, -626.473)
rs = cat.cubic_roots(cat.CubicForce.from_relative(*before))
print("three-root case:", [f"{v:.6g}" for v in before], rs.stability)

# square-root law of the fold
deltas = np.geomspace(10, 1e5, 6)
disp = [cat.cubic_roots(cat.CubicForce.from_relative(rel[0], rel[1], rel[2] - d)).roots[2] - diag.x_twofold
        for d in deltas]
print(f"displacement exponent: {np.polyfit(np.log(deltas), np.log(disp), 1)[0]:.3f}")

# stationary density at the threshold, in rescaled units
s = diag.sqrt_D
cf = cat.CubicForce.from_relative(rel[0] / s, rel[1] / s**2, rel[2] / s**3)
tab = cat.stationary_density(cat.potential_from_force(cf), 0.3, (-2, 3, 20001))
print("density mean, variance, skewness: %.3f %.3f %.3f" % cat.density_moments(tab))
