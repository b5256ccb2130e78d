import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from confcurv import (
    AdmissibilityError,
    CurvatureOperator,
    DirichletSpec,
    DomainError,
    EquationParams,
    GridSpec,
    ParameterError,
    Psi,
    RadialProfile,
    SchoutenParams,
    StallError,
    Tolerances,
    linearized_operator,
    newton_solve,
    residual,
    solve,
)
from confcurv.conformal import ModelGeometry, poincare
from confcurv.radial_pde import (
    assemble_V_eigen,
    compare_order,
    comparison_bounds,
    constant_initial,
    manufactured_psi,
    poincare_initial,
    refine_study,
)

from .helpers import manufactured_exact, manufactured_profile, schouten_params

HYP = poincare(1.0)[0]


def hyperbolic_problem(n=3, k=2, tau=0.0, alpha=-1, nodes=200, R=0.9, law="uniform"):
    params = schouten_params(n, k, tau, alpha)
    E = params.schouten.einstein_value
    spec = DirichletSpec(R, float(HYP(np.array(R))), Psi.constant(E), GridSpec(nodes, law))
    return params, spec


class TestParams:
    def test_schouten_specialization(self):
        p = schouten_params(4, 2, 0.0, -1)
        assert p.varrho == pytest.approx(-2.0) and p.b == p.varrho
        assert p.a == pytest.approx(2.0) and p.c == 0.0 and p.gamma == 1.0
        assert p.scale == pytest.approx(0.5) and p.theta() == 1.0

    def test_tau_one_rejected(self):
        with pytest.raises(ParameterError):
            schouten_params(4, 2, 1.0, 1)

    def test_ellipticity_gate(self):
        op = CurvatureOperator(4, 2)
        ok = EquationParams(op, varrho=0.5)
        assert 0 < ok.check_ellipticity() < 1
        with pytest.raises(ParameterError, match="violates"):
            EquationParams(op, varrho=1.2).check_ellipticity()
        assert EquationParams(op, varrho=-3.0).theta() == 1.0

    def test_barrier_compatibility(self):
        p = schouten_params(4, 2, 0.0, -1)
        assert p.barrier_compatible(0.125)
        assert not p.barrier_compatible(-1.0)
        assert not EquationParams(CurvatureOperator(3, 1), a=-20.0).barrier_compatible(1.0)

    def test_to_dict(self):
        d = schouten_params(3, 2, 0.5, -1).to_dict()
        assert d["schouten"] == {"tau": 0.5, "alpha": -1} and d["operator"]["k"] == 2


class TestPsi:
    def test_kinds(self):
        r = np.array([0.0, 1.0, 3.0])
        np.testing.assert_allclose(Psi.constant(2.0)(r), 2.0)
        np.testing.assert_allclose(Psi.rational(3.0, 1.5)(r), 3.0 * (1 + r * r) ** -1.5)
        with pytest.raises(DomainError):
            Psi.constant(0.0)
        with pytest.raises(DomainError):
            Psi.rational(-1.0, 1.0)

    def test_tabulated_no_extrapolation(self):
        tab = Psi.tabulated([0.0, 0.5, 1.0], [1.0, 2.0, 1.5])
        assert tab(np.array([0.5]))[0] == 2.0
        assert 1.0 < tab(np.array([0.25]))[0] < 2.0
        with pytest.raises(DomainError):
            tab(np.array([1.01]))
        with pytest.raises(DomainError):
            Psi.tabulated([0, 1], [1.0, -1.0])

    def test_roundtrip(self):
        for psi in (Psi.constant(1.5), Psi.rational(2.0, 1.25), Psi.tabulated([0, 1, 2], [1, 2, 3])):
            back = Psi.from_dict(psi.to_dict())
            r = np.linspace(0, 2, 7)
            np.testing.assert_array_equal(back(r), psi(r))
        with pytest.raises(DomainError):
            Psi.from_dict({"kind": "callable"})


class TestAssembly:
    def test_quadratic_gives_n(self):
        n = 4
        r = np.linspace(0, 2, 21)
        prof = RadialProfile(r, r**2 / 2, n)
        eig = assemble_V_eigen(prof, EquationParams(CurvatureOperator(n, 2)))
        np.testing.assert_allclose(eig.full(), n, rtol=1e-12)

    def test_constant_gives_background(self):
        r = np.linspace(0, 1, 11)
        params = EquationParams(CurvatureOperator(3, 1), varrho=0.3, a=1.0, b=2.0, A=(1.5, -0.5))
        eig = assemble_V_eigen(RadialProfile(r, np.full(11, 0.4), 3), params)
        np.testing.assert_allclose(eig.tangential, 1.5, atol=1e-13)
        np.testing.assert_allclose(eig.radial, -0.5, atol=1e-13)

    def test_constant_zero_tensor_not_admissible(self):
        params = EquationParams(CurvatureOperator(3, 2))
        spec = DirichletSpec(1.0, 0.3, Psi.constant(1.0), GridSpec(20))
        prof = RadialProfile(spec.radii(), np.full(20, 0.3), 3)
        with pytest.raises(AdmissibilityError) as err:
            residual(prof, params, spec)
        assert err.value.index == 0
        out = residual(prof, params, spec, check=False)
        assert out[-1] == 0.0

    def test_hyperbolic_residual_second_order(self):
        errs = []
        for N in (400, 800, 1600):
            params, spec = hyperbolic_problem(n=4, nodes=N)
            prof = RadialProfile(spec.radii(), HYP(spec.radii()), 4)
            errs.append(np.abs(residual(prof, params, spec)).max())
        assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) > 1.9)

    def test_manufactured_residual_vanishes(self, rng):
        params = schouten_params(4, 2, 0.0, -1)
        prof, _ = manufactured_profile(rng, np.linspace(0, 1, 50), 4)
        disc = RadialProfile(prof.radii, prof.u, 4)
        spec = DirichletSpec(1.0, float(prof.u[-1]), manufactured_psi(disc, params), GridSpec(50))
        assert np.abs(residual(disc, params, spec)).max() < 1e-13


class TestLinearization:
    def test_linear_case_is_laplacian(self):
        n = 3
        params = EquationParams(CurvatureOperator(n, 1))
        spec = DirichletSpec(1.0, 1.0, Psi.constant(1.0), GridSpec(30))
        r = spec.radii()
        prof = RadialProfile(r, r**2, n)
        lin = linearized_operator(prof, params, spec)
        d1, d2 = prof.operators
        with np.errstate(divide="ignore"):
            lap = d2.toarray() + np.diag(np.where(r > 0, (n - 1) / np.where(r > 0, r, 1), 0)) @ d1.toarray()
        lap[0] = n * d2.toarray()[0]
        dense = lin.to_dense()
        c0 = -2 * np.exp(2 * prof.u)
        np.testing.assert_allclose(dense[:-1], (lap + np.diag(c0))[:-1], rtol=1e-12, atol=1e-10)
        assert dense[-1, -1] == 1.0 and np.all(dense[-1, :-1] == 0)

    @pytest.mark.parametrize("n,k,l,tau,alpha", [(3, 2, 0, 0.0, -1), (4, 3, 1, 0.5, -1), (4, 2, 0, 3.5, 1),
                                                 (5, 3, 0, -1.0, -1)])
    def test_finite_difference_jacobian(self, n, k, l, tau, alpha):
        params = schouten_params(n, k, tau, alpha, l)
        spec = DirichletSpec(0.9, float(HYP(np.array(0.9))), Psi.constant(params.schouten.einstein_value),
                             GridSpec(120, "clustered"))
        r = spec.radii()
        prof = RadialProfile(r, HYP(r) + 0.05 * r**2, n)
        lin = linearized_operator(prof, params, spec)
        v = np.cos(2 * r) * (0.9 - r)
        h = 1e-4
        fd = (residual(prof.with_values(prof.u + h * v), params, spec)
              - residual(prof.with_values(prof.u - h * v), params, spec)) / (2 * h)
        jv = lin.matvec(v)
        assert np.abs(fd - jv).max() <= 1e-6 * np.abs(jv).max()
        np.testing.assert_allclose(lin.to_dense() @ v, jv, rtol=1e-12, atol=1e-12)

    def test_ellipticity_certificate(self):
        op = CurvatureOperator(4, 2)
        params = EquationParams(op, varrho=0.5, A=(1.0, 1.0))
        spec = DirichletSpec(1.0, 0.0, Psi.constant(1.0), GridSpec(60))
        r = spec.radii()
        for amp in (0.0, 0.1, 0.3):
            prof = RadialProfile(r, amp * r**2 + 0.05 * np.sin(3 * r), 4)
            lin = linearized_operator(prof, params, spec)
            assert np.all(lin.ellipticity_ratio >= lin.theta - 1e-12)


class TestNewton:
    def test_hyperbolic_oracle_and_order(self):
        params, _ = hyperbolic_problem()
        errs, orders = refine_study(lambda N: hyperbolic_problem(nodes=N)[1], params, HYP, nodes=(100, 200, 400))
        assert errs[-1] < 5e-4 and np.all(orders > 1.9)

    def test_report_invariants(self):
        params, spec = hyperbolic_problem(n=4, k=3, tau=0.5, nodes=300)
        prof, rep = solve(params, spec)
        assert rep.converged and rep.reason == "residual"
        assert all(m > 0 for m in rep.margins)
        assert all(e >= rep.theta - 1e-12 for e in rep.ellipticity)
        assert rep.residuals[-1] <= rep.tolerance
        assert set(rep.summary()) >= {"iterations", "final_residual", "converged", "theta"}

    def test_manufactured_recovery(self, rng):
        for _ in range(3):
            params = schouten_params(4, 2, 0.0, -1)
            spec0 = DirichletSpec(1.0, 0.0, Psi.constant(1.0), GridSpec(400, "clustered"))
            r = spec0.radii()
            exact, coeffs = manufactured_profile(rng, r, 4)
            psi = manufactured_psi(RadialProfile(r, exact.u, 4), params)
            spec = DirichletSpec(1.0, float(exact.u[-1]), psi, GridSpec(400, "clustered"))
            prof, rep = solve(params, spec)
            assert rep.converged
            assert np.abs(prof.u - exact.u).max() < 1e-8

    def test_max_iter(self):
        params, spec = hyperbolic_problem(nodes=100)
        prof, rep = solve(params, spec, tolerances=Tolerances(max_iter=1))
        assert not rep.converged and rep.reason == "max_iter" and rep.iterations == 1

    def test_inadmissible_initial(self):
        params, spec = hyperbolic_problem(nodes=50)
        with pytest.raises(AdmissibilityError):
            newton_solve(RadialProfile(spec.radii(), np.zeros(50), 3), params, spec)

    def test_stall_reports(self):
        params, spec = hyperbolic_problem(nodes=60)
        init = poincare_initial(spec.radii(), spec.phi, spec.r1, 3)
        with pytest.raises(StallError) as err:
            newton_solve(init, params, spec, Tolerances(min_step=0.9, armijo=0.999999))
        assert err.value.report is not None and err.value.report.reason == "stall"

    def test_annulus(self):
        params = schouten_params(3, 2, 0.0, -1)
        spec = DirichletSpec(0.9, float(HYP(np.array(0.9))), Psi.constant(params.schouten.einstein_value),
                             GridSpec(200, "clustered", 3.0), r0=0.4, phi_inner=float(HYP(np.array(0.4))))
        r = spec.radii()
        prof, rep = solve(params, spec, RadialProfile(r, HYP(r) + 0.1 * np.sin(np.pi * (r - 0.4) / 0.5), 3))
        assert rep.converged and np.abs(prof.u - HYP(prof.radii)).max() < 1e-4
        with pytest.raises(AdmissibilityError):
            solve(params, spec)
        with pytest.raises(DomainError):
            DirichletSpec(0.9, 0.0, Psi.constant(1.0), r0=0.4)

    def test_hyperbolic_base_trivial(self):
        # on hyperbolic space u = 0 already solves the Einstein equation
        params = schouten_params(4, 2, 0.5, -1)
        E = params.schouten.einstein_value
        spec = DirichletSpec(2.0, 0.0, Psi.constant(E), GridSpec(100), base=ModelGeometry(-1))
        assert constant_initial(params, spec) == pytest.approx(0.0, abs=1e-14)
        prof, rep = solve(params, spec)
        assert rep.converged and np.abs(prof.u).max() < 1e-12

    def test_boundary_layer_nodes(self):
        _, spec = hyperbolic_problem(nodes=200, law="clustered")
        _, uni = hyperbolic_problem(nodes=200)
        assert spec.boundary_layer_nodes(0.05)["outer"] > 2 * uni.boundary_layer_nodes(0.05)["outer"]


class TestComparison:
    def test_identity(self):
        r = np.linspace(0, 1, 5)
        p = RadialProfile(r, r, 3)
        assert compare_order(p, p)
        rep = compare_order(p, p.with_values(r - np.array([0, 0, 1e-3, 0, 0])))
        assert not rep and rep.worst_node == 2 and rep.worst_gap == pytest.approx(1e-3)

    @given(lo=st.floats(1.0, 2.5), gap=st.floats(0.0, 1.0))
    def test_discrete_comparison(self, lo, gap):
        params = schouten_params(3, 2, 0.0, -1)
        psi = Psi.rational(1.0, 1.0)
        a, _ = solve(params, DirichletSpec(0.9, lo, psi, GridSpec(80)))
        b, _ = solve(params, DirichletSpec(0.9, lo + gap, psi, GridSpec(80)))
        assert compare_order(a, b, tol=1e-8)

    def test_comparison_bounds_hold(self):
        params = schouten_params(4, 2, 0.0, -1)
        psi = Psi.rational(2.0, 0.5)
        spec = DirichletSpec(0.9, 2.0, psi, GridSpec(200))
        prof, _ = solve(params, spec)
        for w in (poincare_initial(spec.radii(), 1.0, 0.9, 4, 1.3), poincare_initial(spec.radii(), 3.0, 0.9, 4, 2.0)):
            lo, hi = comparison_bounds(w, params, spec)
            assert np.all(lo <= prof.u + 1e-9) and np.all(prof.u <= hi + 1e-9)
