import mpmath as mp
import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from confcurv import FLAT, ModelGeometry, RadialProfile, SchoutenParams, modified_schouten_eigen, ricci_eigen
from confcurv.conformal import (
    PointwiseTensorEigen,
    beta_log,
    beta_log_ricci,
    beta_log_schouten,
    poincare,
    radial_hessian,
    scalar_curvature_conformal,
    trace_identity_residual,
)
from confcurv.errors import DiscretizationError, DomainError
from confcurv.symfunc import ConeSpec, validate_tau_alpha

from .oracles import ricci_christoffel, ricci_conformal_formula, schouten_from_ricci

SPHERE, HYPERBOLIC = ModelGeometry(1), ModelGeometry(-1)


def beta_profile(beta, n, r, exact=True):
    u, du, d2u = beta_log(beta)
    return RadialProfile.from_function(r, n, u, du if exact else None, d2u if exact else None)


def admissible_pairs(n):
    """(tau, alpha) pairs passing the admissibility restriction for Gamma_1."""
    cone = ConeSpec(n, 1)
    pairs = [(0.0, -1), (0.5, -1), (-2.0, -1), (n - 0.5, 1), (n + 1.0, 1)]
    return [p for p in pairs if validate_tau_alpha(p[0], p[1], cone)]


class TestOracles:
    def test_formula_matches_christoffel(self):
        beta = sp.Rational(1, 3)
        n = 3
        point = (sp.Rational(7, 10), sp.Rational(-1, 5), sp.Rational(2, 5))
        direct = ricci_christoffel(n, lambda r: beta * sp.log(1 + r**2), point)
        formula, _ = ricci_conformal_formula(n, lambda r: beta * sp.log(1 + r**2))
        with mp.workdps(30):
            f = formula(*[mp.mpf(p.p) / p.q for p in point])
            for i in range(n):
                for j in range(n):
                    assert abs(mp.mpf(str(direct[i, j])) - f[i, j]) < 1e-25

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_beta_log_schouten_display(self, n):
        beta = sp.Rational(3, 8)
        formula, ufun = ricci_conformal_formula(n, lambda r: beta * sp.log(1 + r**2))
        for tau, alpha in admissible_pairs(n):
            for r in (0.3, 1.0, 2.7):
                pt = [mp.mpf(r)] + [mp.mpf(0)] * (n - 1)
                A = schouten_from_ricci(formula(*pt), ufun(*pt), n, tau, alpha)
                lt, lr = beta_log_schouten(r, 0.375, SchoutenParams(tau, alpha, n))
                assert float(A[1][1]) == pytest.approx(lt, rel=1e-12, abs=1e-14)
                assert float(A[0][0]) == pytest.approx(lr, rel=1e-12, abs=1e-14)
                assert abs(float(A[0][1])) < 1e-14

    @pytest.mark.parametrize("n", [3, 4])
    def test_beta_log_ricci(self, n):
        formula, _ = ricci_conformal_formula(n, lambda r: sp.Rational(1, 4) * sp.log(1 + r**2))
        for r in (0.2, 1.5):
            pt = [mp.mpf(r)] + [mp.mpf(0)] * (n - 1)
            ric = formula(*pt)
            lt, lr = beta_log_ricci(r, 0.25, n)
            assert -float(ric[1, 1]) == pytest.approx(lt, rel=1e-13)
            assert -float(ric[0, 0]) == pytest.approx(lr, rel=1e-13)


class TestModels:
    def test_flat_zero(self):
        r = np.linspace(0, 1, 11)
        prof = RadialProfile(r, np.zeros(11), 4)
        eig = modified_schouten_eigen(prof, SchoutenParams(0.0, -1, 4))
        assert np.all(eig.tangential == 0) and np.all(eig.radial == 0)
        assert np.all(scalar_curvature_conformal(prof) == 0)
        assert np.all(trace_identity_residual(prof, SchoutenParams(0.0, -1, 4)) == 0)

    @pytest.mark.parametrize("base", [SPHERE, HYPERBOLIC, FLAT])
    def test_constant_scaling(self, base):
        n, c = 4, 0.7
        prof = RadialProfile(np.linspace(0.1, 2.0, 21), np.full(21, c), n)
        np.testing.assert_allclose(scalar_curvature_conformal(prof, base), np.exp(-2 * c) * base.scalar(n),
                                   rtol=1e-13, atol=1e-13)

    def test_hyperbolic_base_ricci(self):
        prof = RadialProfile(np.linspace(0.0, 3.0, 31), np.zeros(31), 5)
        eig = ricci_eigen(prof, HYPERBOLIC)
        np.testing.assert_allclose(eig.full(), 4.0, rtol=1e-13)

    def test_sphere_radius_limit(self):
        with pytest.raises(DomainError):
            scalar_curvature_conformal(RadialProfile(np.linspace(2.0, 3.5, 10), np.zeros(10), 3), SPHERE)

    def test_named(self):
        assert ModelGeometry.named("hyperbolic") == HYPERBOLIC and HYPERBOLIC.name == "hyperbolic"
        with pytest.raises(DomainError):
            ModelGeometry.named("torus")
        with pytest.raises(DomainError):
            ModelGeometry(2)

    def test_params_validation(self):
        with pytest.raises(DomainError):
            SchoutenParams(0.0, 2, 4)
        with pytest.raises(DomainError):
            SchoutenParams(0.0, -1, 2)
        with pytest.raises(DomainError):
            SchoutenParams(1.0, 1, 4).check()
        assert SchoutenParams(0.0, -1, 4).check().sign_positive


class TestDiscrete:
    def test_radial_structure(self):
        prof = beta_profile(0.2, 4, np.linspace(0, 2, 21))
        eig = modified_schouten_eigen(prof, SchoutenParams(0.0, -1, 4))
        full = eig.full()
        assert full.shape == (21, 4)
        assert np.all(full[:, :3] == eig.tangential[:, None]) and np.all(full[:, 3] == eig.radial)

    def test_centre_node(self):
        prof = beta_profile(0.3, 3, np.linspace(0, 1, 11))
        du, d2u, tang, _ = radial_hessian(prof)
        assert du[0] == 0 and tang[0] == d2u[0]

    @given(beta=st.floats(0.05, 2.0), n=st.integers(3, 6), pick=st.integers(0, 4))
    def test_exact_derivatives_match_display(self, beta, n, pick):
        pairs = admissible_pairs(n)
        tau, alpha = pairs[pick % len(pairs)]
        params = SchoutenParams(tau, alpha, n)
        r = np.linspace(0.0, 5.0, 41)
        eig = modified_schouten_eigen(beta_profile(beta, n, r), params)
        lt, lr = beta_log_schouten(r, beta, params)
        scale = np.abs(lt).max() + np.abs(lr).max()
        assert np.abs(eig.tangential - lt).max() <= 1e-12 * scale
        assert np.abs(eig.radial - lr).max() <= 1e-12 * scale
        assert trace_identity_residual(beta_profile(beta, n, r), params).max() <= 1e-10 * max(1, scale)

    def test_stencil_display_second_order(self):
        params = SchoutenParams(0.0, -1, 4)
        errs = []
        for N in (101, 201, 401):
            r = np.linspace(0, 3, N)
            eig = modified_schouten_eigen(beta_profile(0.4, 4, r, exact=False), params)
            lt, lr = beta_log_schouten(r, 0.4, params)
            errs.append(max(np.abs(eig.tangential - lt)[1:-1].max(), np.abs(eig.radial - lr)[1:-1].max()))
        assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) > 1.9)

    def test_ricci_consistency(self):
        n = 5
        prof = beta_profile(0.7, n, np.linspace(0, 4, 30), exact=False)
        a = modified_schouten_eigen(prof, SchoutenParams(0.0, -1, n))
        b = ricci_eigen(prof)
        np.testing.assert_allclose(a.tangential, b.tangential / (n - 2), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(a.radial, b.radial / (n - 2), rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("n", [3, 4, 6])
    def test_poincare(self, n):
        r = np.linspace(0, 0.9, 400)
        u, du, d2u = poincare(1.0)
        exact = RadialProfile.from_function(r, n, u, du, d2u)
        np.testing.assert_allclose(scalar_curvature_conformal(exact), -n * (n - 1), rtol=1e-11)
        for tau, alpha in admissible_pairs(n):
            params = SchoutenParams(tau, alpha, n)
            sc = modified_schouten_eigen(exact, params).scaled()
            np.testing.assert_allclose(sc.full(), params.einstein_value, rtol=1e-11)
        disc = RadialProfile(r, u(r), n)
        err = np.abs(scalar_curvature_conformal(disc) + n * (n - 1)).max()
        h = r[1] - r[0]
        assert err < 2e4 * h * h

    def test_trace_residual_poincare_order(self):
        params = SchoutenParams(0.5, -1, 4)
        u = poincare(1.0)[0]
        for N in (100, 200):
            r = np.linspace(0, 0.8, N)
            # the trace identity is algebraic in the stencil values, so only rounding remains
            assert trace_identity_residual(RadialProfile(r, u(r), 4), params).max() < 1e-12

    def test_profile_errors(self):
        with pytest.raises(DiscretizationError):
            RadialProfile([0, 1, 2], [0, 1], 3)
        with pytest.raises(DomainError):
            RadialProfile([0, 1, 2], [0, 1, 2], 1)
        with pytest.raises(DomainError):
            modified_schouten_eigen(beta_profile(0.1, 4, np.linspace(0, 1, 5)), SchoutenParams(0.0, -1, 3))
        with pytest.raises(DomainError):
            PointwiseTensorEigen(np.zeros(3), np.zeros(3), np.zeros(3), 3).scaled()
