import numpy as np

from confcurv import CurvatureOperator, EquationParams, RadialProfile, SchoutenParams


def schouten_params(n, k, tau, alpha, l=0):
    return EquationParams.from_schouten(CurvatureOperator(n, k, l), SchoutenParams(tau, alpha, n))


def manufactured_profile(rng, radii, n):
    """Smooth convex-ish radial profile c0 + c1 r^2 + c2 r^4 + 0.02 cos(3r)."""
    c0 = rng.uniform(-0.5, 0.5)
    c1 = rng.uniform(0.05, 0.3)
    c2 = rng.uniform(0.0, 0.1)
    r = np.asarray(radii)
    u = c0 + c1 * r**2 + c2 * r**4 + 0.02 * np.cos(3 * r)
    du = 2 * c1 * r + 4 * c2 * r**3 - 0.06 * np.sin(3 * r)
    d2u = 2 * c1 + 12 * c2 * r**2 - 0.18 * np.cos(3 * r)
    return RadialProfile(r, u, n, du, d2u), (c0, c1, c2)


def manufactured_exact(coeffs):
    c0, c1, c2 = coeffs
    return lambda r: c0 + c1 * r**2 + c2 * r**4 + 0.02 * np.cos(3 * r)
