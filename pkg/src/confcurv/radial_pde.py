"""Damped Newton solver for f(lambda(g^{-1} V[u])) = psi e^{2 gamma u} in radial symmetry.

The tensor is

    V[u] = A + Lap(u) g - rho Hess(u) + a |du|^2 g + b du (x) du + c L(du),

and for a radial u it has a tangential eigenvalue (multiplicity n-1) and a
radial one.  ``L`` is modelled as a radial linear form: it adds
``c*L_t*u'`` to the tangential and ``c*L_r*u'`` to the radial eigenvalue.

In the Schouten specialization, A^{tau,alpha} of e^{2u}g equals
``scale * V[u]`` with ``scale = alpha(tau-1)/(n-2) > 0``; the residual is
then written for the geometric equation f(lambda(g^{-1}A~)) = psi e^{2u},
i.e. ``scale**gamma * f(V) - psi e^{2 gamma u}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from .conformal import FLAT, ModelGeometry, PointwiseTensorEigen, RadialProfile, SchoutenParams, radial_hessian
from .errors import AdmissibilityError, DiscretizationError, DomainError, ParameterError, SolverError, StallError
from .grids import GridSpec, build_grid
from .symfunc import CurvatureOperator, ellipticity_constants, in_cone, strictly_admissible


# ---------------------------------------------------------------------------
# data model


@dataclass(frozen=True)
class EquationParams:
    """Coefficients of V[u] and the right-hand side exponent.

    ``A`` is the background tensor as a (tangential, radial) eigenvalue pair;
    with ``schouten`` set it is derived from the base geometry instead.
    """

    operator: CurvatureOperator
    varrho: float = 0.0
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    L: tuple = (0.0, 0.0)
    gamma: float | None = None
    A: tuple = (0.0, 0.0)
    schouten: SchoutenParams | None = None

    def __post_init__(self):
        if self.gamma is None:
            object.__setattr__(self, "gamma", self.operator.gamma)
        object.__setattr__(self, "L", tuple(float(x) for x in self.L))
        object.__setattr__(self, "A", tuple(float(x) for x in self.A))

    @classmethod
    def from_schouten(cls, operator: CurvatureOperator, params: SchoutenParams) -> "EquationParams":
        n, tau = params.n, params.tau
        if operator.n != n:
            raise DomainError("operator and Schouten parameters disagree on n")
        if tau == 1.0:
            raise ParameterError("tau = 1 has no V[u] form (rho would be infinite)")
        rho = (n - 2) / (tau - 1)
        if params.alpha * (tau - 1) <= 0:
            raise ParameterError("alpha (tau - 1) must be positive")
        return cls(
            operator=operator,
            varrho=rho,
            a=(n - 2) * (tau - 2) / (2 * (tau - 1)),
            b=rho,
            c=0.0,
            gamma=1.0,
            schouten=params,
        )

    @property
    def n(self) -> int:
        return self.operator.n

    @property
    def scale(self) -> float:
        """Factor with A~ = scale * V (1 without a Schouten specialization)."""
        if self.schouten is None:
            return 1.0
        s = self.schouten
        return s.alpha * (s.tau - 1) / (s.n - 2)

    def background(self, base: ModelGeometry):
        if self.schouten is None:
            return self.A
        v = base.schouten(self.schouten) / self.scale
        return (v, v)

    def theta(self, constants=None) -> float:
        """Fully uniform ellipticity constant 1 - rho(1 - kappa*vartheta)."""
        if self.varrho <= 0.0:
            return 1.0
        c = constants or _constants(self.operator)
        return 1.0 - self.varrho * (1.0 - c.kappa * c.vartheta)

    def check_ellipticity(self):
        th = self.theta()
        if th <= 0.0:
            c = _constants(self.operator)
            raise ParameterError(
                f"rho={self.varrho:.6g} violates 0 < rho < 1/(1 - kappa*vartheta) = "
                f"{1.0 / (1.0 - c.kappa * c.vartheta):.6g} (kappa={c.kappa}, vartheta>={c.vartheta:.6g})"
            )
        return th

    def barrier_compatible(self, beta: float) -> bool:
        """1/beta + a > 0 and (b - rho/beta >= 0 or a + b + (1 - rho)/beta > 0)."""
        if beta <= 0:
            return False
        first = 1.0 / beta + self.a > 0
        second = (self.b - self.varrho / beta >= 0) or (self.a + self.b + (1 - self.varrho) / beta > 0)
        return bool(first and second)

    def to_dict(self):
        out = {
            "operator": {"n": self.n, "k": self.operator.k, "l": self.operator.l,
                         "gamma": self.operator.gamma, "transform": self.operator.transform},
            "varrho": self.varrho, "a": self.a, "b": self.b, "c": self.c,
            "L": list(self.L), "gamma": self.gamma, "A": list(self.A),
        }
        if self.schouten is not None:
            out["schouten"] = {"tau": self.schouten.tau, "alpha": self.schouten.alpha}
        return out


_CONST_CACHE: dict = {}


def _constants(op: CurvatureOperator):
    key = op.cone
    if key not in _CONST_CACHE:
        _CONST_CACHE[key] = ellipticity_constants(key)
    return _CONST_CACHE[key]


class Psi:
    """Positive radial right-hand side.

    Kinds: ``constant`` (value), ``rational`` (Lambda2 (1+r^2)^{-p}),
    ``tabulated`` (monotone cubic through (r, values); no extrapolation) and
    ``callable`` (any vectorized function, not serializable).
    """

    def __init__(self, kind: str, **params):
        self.kind = kind
        self.params = params
        if kind == "constant":
            self._fn = lambda r: np.full_like(np.asarray(r, dtype=np.float64), float(params["value"]))
        elif kind == "rational":
            lam2, p = float(params["Lambda2"]), float(params["p"])
            self._fn = lambda r: lam2 * (1.0 + np.asarray(r, dtype=np.float64) ** 2) ** (-p)
        elif kind == "tabulated":
            rr = np.asarray(params["r"], dtype=np.float64)
            vv = np.asarray(params["values"], dtype=np.float64)
            if np.any(vv <= 0):
                raise DomainError("tabulated psi must be positive")
            interp = PchipInterpolator(rr, vv, extrapolate=False)
            lo, hi = rr[0], rr[-1]
            exact = dict(zip(rr.tolist(), vv.tolist()))

            def fn(r):
                r = np.asarray(r, dtype=np.float64)
                if np.any(r < lo) or np.any(r > hi):
                    raise DomainError(f"psi requested outside its table [{lo}, {hi}]")
                out = interp(r)
                # exact node values, so a manufactured psi reproduces itself bitwise
                hit = [exact.get(x) for x in r.ravel().tolist()]
                flat = out.ravel()
                for i, h in enumerate(hit):
                    if h is not None:
                        flat[i] = h
                return flat.reshape(r.shape)

            self._fn = fn
        elif kind == "callable":
            self._fn = params["fn"]
        else:
            raise DomainError(f"unknown psi kind {kind!r}")

    @classmethod
    def constant(cls, value):
        if value <= 0:
            raise DomainError("psi must be positive")
        return cls("constant", value=float(value))

    @classmethod
    def rational(cls, Lambda2, p):
        if Lambda2 <= 0:
            raise DomainError("Lambda2 must be positive")
        return cls("rational", Lambda2=float(Lambda2), p=float(p))

    @classmethod
    def tabulated(cls, r, values):
        return cls("tabulated", r=np.asarray(r, dtype=np.float64), values=np.asarray(values, dtype=np.float64))

    @classmethod
    def from_callable(cls, fn: Callable):
        return cls("callable", fn=fn)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind")
        if kind == "constant":
            return cls.constant(d["value"])
        if kind == "rational":
            return cls.rational(d["Lambda2"], d["p"])
        if kind == "tabulated":
            return cls.tabulated(d["r"], d["values"])
        raise DomainError(f"psi kind {kind!r} cannot be built from a description")

    def to_dict(self):
        if self.kind == "callable":
            return {"kind": "callable"}
        out = {"kind": self.kind}
        for k, v in self.params.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    def __call__(self, r):
        return self._fn(r)


@dataclass
class DirichletSpec:
    """Ball (r0 = 0) or annulus [r0, r1] with Dirichlet data and a grid."""

    r1: float
    phi: float
    psi: Psi
    grid: GridSpec = field(default_factory=lambda: GridSpec(200))
    r0: float = 0.0
    phi_inner: float | None = None
    base: ModelGeometry = FLAT

    def __post_init__(self):
        if not self.r1 > self.r0 >= 0.0:
            raise DomainError(f"bad domain [{self.r0}, {self.r1}]")
        if self.r0 > 0.0 and self.phi_inner is None:
            raise DomainError("an annulus needs inner boundary data phi_inner")
        self.base.check_radii(np.array([self.r1]))

    @property
    def is_ball(self) -> bool:
        return self.r0 == 0.0

    def radii(self) -> np.ndarray:
        return build_grid(self.r0, self.r1, self.grid, cluster_inner=not self.is_ball)

    def dirichlet_rows(self, N):
        return [N - 1] if self.is_ball else [0, N - 1]

    def boundary_values(self, N):
        vals = np.full(N, np.nan)
        vals[-1] = self.phi
        if not self.is_ball:
            vals[0] = self.phi_inner
        return vals

    def boundary_layer_nodes(self, delta: float, radii=None):
        """Node counts within ``delta`` of each Dirichlet boundary."""
        r = self.radii() if radii is None else radii
        out = {"outer": int(np.sum(self.r1 - r <= delta))}
        if not self.is_ball:
            out["inner"] = int(np.sum(r - self.r0 <= delta))
        return out

    def to_dict(self):
        return {
            "r0": self.r0, "r1": self.r1, "phi": self.phi, "phi_inner": self.phi_inner,
            "psi": self.psi.to_dict(), "grid": self.grid.to_dict(), "base": self.base.name,
        }


@dataclass
class SolveReport:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    margins: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    ellipticity: list = field(default_factory=list)
    theta: float = 1.0
    converged: bool = False
    reason: str = ""
    tolerance: float = 0.0

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_residual": self.residuals[-1] if self.residuals else None,
            "min_cone_margin": min(self.margins) if self.margins else None,
            "min_ellipticity_ratio": min(self.ellipticity) if self.ellipticity else None,
            "theta": self.theta,
            "converged": self.converged,
            "reason": self.reason,
            "tolerance": self.tolerance,
        }


# ---------------------------------------------------------------------------
# assembly


def assemble_V_eigen(profile: RadialProfile, params: EquationParams, base: ModelGeometry = FLAT) -> PointwiseTensorEigen:
    """Tangential and radial eigenvalues of g^{-1} V[u]."""
    du, d2u, tang, lap = radial_hessian(profile, base)
    At, Ar = params.background(base)
    Lt, Lr = params.L
    rho, a, b, c = params.varrho, params.a, params.b, params.c
    lt = At + lap - rho * tang + a * du**2 + c * Lt * du
    lr = Ar + lap - rho * d2u + (a + b) * du**2 + c * Lr * du
    return PointwiseTensorEigen(profile.radii, lt, lr, profile.n, profile.u)


def _pde_rows(spec: DirichletSpec, N):
    mask = np.ones(N, dtype=bool)
    mask[spec.dirichlet_rows(N)] = False
    return mask


def _unit(lam):
    # per-node sup-norm scaling so the admissibility floor is relative
    scale = np.abs(lam).max(axis=1, keepdims=True)
    return lam / np.where(scale > 0, scale, 1.0)


def _admissibility(lam_full, params, rows):
    cone = params.operator.cone
    lam = _unit(lam_full[rows])
    ok = strictly_admissible(lam, cone)
    _, margin = in_cone(lam, cone)
    return ok, margin


def residual(profile: RadialProfile, params: EquationParams, spec: DirichletSpec, check: bool = True):
    """S f(lambda(V[u])) - psi e^{2 gamma u} at PDE nodes, u - phi at Dirichlet nodes."""
    r = profile.radii
    N = len(r)
    rows = _pde_rows(spec, N)
    lam = assemble_V_eigen(profile, params, spec.base).full()
    inside, _ = in_cone(lam[rows], params.operator.cone)
    if check and not np.all(inside):
        node = int(np.flatnonzero(rows)[np.flatnonzero(~inside)[0]])
        raise AdmissibilityError(f"node {node} (r={r[node]:.6g}) is not admissible", index=node)
    out = np.empty(N)
    fv = params.operator.value(lam[rows], check=False)
    S = params.scale ** params.operator.gamma
    out[rows] = S * fv - spec.psi(r[rows]) * np.exp(2.0 * params.gamma * profile.u[rows])
    bv = spec.boundary_values(N)
    out[~rows] = profile.u[~rows] - bv[~rows]
    return out


@dataclass
class LinearizedSystem:
    """Tridiagonal Jacobian in LAPACK banded storage (rows: super, main, sub)."""

    bands: np.ndarray
    theta: float
    coeff_d2: np.ndarray
    coeff_d1: np.ndarray
    coeff_d0: np.ndarray
    ellipticity_ratio: np.ndarray

    def solve(self, rhs):
        return solve_banded((1, 1), self.bands, rhs)

    def matvec(self, x):
        N = len(x)
        y = self.bands[1] * x
        y[:-1] += self.bands[0, 1:] * x[1:]
        y[1:] += self.bands[2, :-1] * x[:-1]
        return y

    def to_dense(self):
        N = self.bands.shape[1]
        M = np.diag(self.bands[1])
        M += np.diag(self.bands[0, 1:], 1)
        M += np.diag(self.bands[2, :-1], -1)
        return M


def linearized_operator(profile: RadialProfile, params: EquationParams, spec: DirichletSpec) -> LinearizedSystem:
    """Jacobian of :func:`residual` with the ellipticity certificate attached."""
    theta = params.check_ellipticity()
    n = profile.n
    r = profile.radii
    N = len(r)
    rows = _pde_rows(spec, N)
    d1, d2 = profile.operators
    du, d2u, tang, lap = radial_hessian(profile, spec.base)
    lam = assemble_V_eigen(profile, params, spec.base).full()
    bad = ~strictly_admissible(_unit(lam[rows]), params.operator.cone)
    if np.any(bad):
        node = int(np.flatnonzero(rows)[np.flatnonzero(bad)[0]])
        raise AdmissibilityError(f"node {node} is not strictly admissible", index=node)
    grad = np.zeros((N, n))
    grad[rows] = params.operator.gradient(lam[rows], check=False)
    S = params.scale ** params.operator.gamma
    Gt = S * grad[:, :-1].sum(axis=1)
    Gr = S * grad[:, -1]
    rho, a, b, c = params.varrho, params.a, params.b, params.c
    Lt, Lr = params.L
    with np.errstate(divide="ignore"):
        ks = spec.base.s_ratio(r)
    centre = r == 0.0
    ks = np.where(centre, 0.0, ks)
    dlt_d1 = (n - 1) * ks - rho * ks + 2 * a * du + c * Lt
    dlr_d1 = (n - 1) * ks + 2 * (a + b) * du + c * Lr
    dlt_d2 = np.where(centre, n - rho, 1.0)
    dlr_d2 = np.where(centre, n - rho, 1.0 - rho)
    c2 = Gt * dlt_d2 + Gr * dlr_d2
    c1 = Gt * dlt_d1 + Gr * dlr_d1
    c0 = -2.0 * params.gamma * spec.psi(r) * np.exp(2.0 * params.gamma * profile.u)
    c2[~rows] = c1[~rows] = 0.0
    c0[~rows] = 1.0
    J = (d1.multiply(c1[:, None]) + d2.multiply(c2[:, None])).tocsr()
    J.eliminate_zeros()
    bands = np.zeros((3, N))
    J = J.tocoo()
    off = J.col - J.row
    if np.any(np.abs(off) > 1):
        raise DiscretizationError("Jacobian is not tridiagonal (non-Dirichlet end rows?)")
    np.add.at(bands, (1 - off, J.col), J.data)
    bands[1] += c0
    # uniform ellipticity certificate: sum f - rho f_i >= theta sum f
    tot = grad[rows].sum(axis=1)
    ratio = (tot[:, None] - rho * grad[rows]).min(axis=1) / tot
    return LinearizedSystem(bands=bands, theta=theta, coeff_d2=c2, coeff_d1=c1, coeff_d0=c0, ellipticity_ratio=ratio)


# ---------------------------------------------------------------------------
# Newton


@dataclass
class Tolerances:
    """Newton controls.

    The residual test uses ``max(atol, floor_factor * eps * |J|_inf * (1 + |u|_inf))``:
    on fine clustered grids the second-difference rows alone carry a
    rounding error near eps*|J|*|u|, which can exceed ``atol``.
    """

    atol: float = 1e-10
    max_iter: int = 200
    min_step: float = 1e-14
    armijo: float = 1e-4
    floor_factor: float = 4.0


def newton_solve(initial: RadialProfile, params: EquationParams, spec: DirichletSpec, tolerances: Tolerances | None = None):
    """Damped Newton iteration; returns (profile, SolveReport).

    Steps are halved until the trial profile is admissible at every PDE node
    and the sup-norm of the residual decreases by the Armijo factor.
    """
    tol = tolerances or Tolerances()
    report = SolveReport(tolerance=tol.atol)
    report.theta = params.check_ellipticity()
    N = len(initial.radii)
    rows = _pde_rows(spec, N)
    u = initial.u.copy()
    bv = spec.boundary_values(N)
    u[~rows] = bv[~rows]
    prof = initial.with_values(u)
    lam = assemble_V_eigen(prof, params, spec.base).full()
    ok, margin = _admissibility(lam, params, rows)
    if not np.all(ok):
        node = int(np.flatnonzero(rows)[np.flatnonzero(~ok)[0]])
        raise AdmissibilityError(f"initial profile is not admissible at node {node}", index=node)
    F = residual(prof, params, spec)
    res = float(np.abs(F).max())
    report.residuals.append(res)
    report.margins.append(float(margin.min()))
    eps = np.finfo(np.float64).eps
    for it in range(tol.max_iter + 1):
        lin = linearized_operator(prof, params, spec)
        jnorm = float(np.abs(lin.bands).sum(axis=0).max())
        report.tolerance = max(tol.atol, tol.floor_factor * eps * jnorm * (1.0 + float(np.abs(u).max())))
        if res <= report.tolerance:
            report.converged, report.reason = True, "residual"
            break
        if it == tol.max_iter:
            report.reason = "max_iter"
            break
        report.ellipticity.append(float(lin.ellipticity_ratio.min()))
        delta = lin.solve(-F)
        t = 1.0
        while True:
            trial = prof.with_values(u + t * delta)
            lam = assemble_V_eigen(trial, params, spec.base).full()
            ok, margin = _admissibility(lam, params, rows)
            if np.all(ok):
                Ft = residual(trial, params, spec, check=False)
                rt = float(np.abs(Ft).max())
                if rt <= (1.0 - tol.armijo * t) * res:
                    break
            t *= 0.5
            if t < tol.min_step:
                report.iterations = it
                report.reason = "stall"
                raise StallError(f"line search stalled at iteration {it} (residual {res:.3e})", report)
        u = u + t * delta
        prof, F, res = trial, Ft, rt
        report.iterations = it + 1
        report.residuals.append(res)
        report.margins.append(float(margin.min()))
        report.steps.append(t)
    return prof, report


# ---------------------------------------------------------------------------
# initial guesses and comparison


def constant_initial(params: EquationParams, spec: DirichletSpec):
    """Constant solving S f(A) = max psi e^{2 gamma c}, or None if A is not admissible."""
    At, Ar = params.background(spec.base)
    lam = np.array([At] * (params.n - 1) + [Ar])
    if not strictly_admissible(lam, params.operator.cone):
        return None
    fA = params.scale ** params.operator.gamma * params.operator.value(lam)
    r = spec.radii()
    return math.log(fA / float(np.max(spec.psi(r)))) / (2.0 * params.gamma)


def poincare_initial(radii, phi: float, R: float, n: int, stretch: float = 1.5) -> RadialProfile:
    """log(2R'/(R'^2 - r^2)) with R' = stretch*R, shifted to equal phi at r = R."""
    Rp = stretch * R
    r = np.asarray(radii, dtype=np.float64)
    base = np.log(2 * Rp / (Rp * Rp - r * r))
    shift = phi - math.log(2 * Rp / (Rp * Rp - R * R))
    return RadialProfile(r, base + shift, n)


def solve(params: EquationParams, spec: DirichletSpec, initial: RadialProfile | None = None, tolerances=None):
    """Newton solve with the default initializer chain: supplied, constant, Poincare."""
    r = spec.radii()
    if initial is None:
        c = constant_initial(params, spec)
        if c is not None:
            initial = RadialProfile(r, np.full_like(r, min(c, spec.phi)), params.n)
        elif spec.is_ball:
            initial = poincare_initial(r, spec.phi, spec.r1, params.n)
        else:
            raise AdmissibilityError("no admissible initial guess available; supply a subsolution")
    elif not np.array_equal(initial.radii, r):
        initial = RadialProfile(r, np.interp(r, initial.radii, initial.u), params.n)
    return newton_solve(initial, params, spec, tolerances)


def manufactured_psi(profile: RadialProfile, params: EquationParams, spec_base: ModelGeometry = FLAT) -> Psi:
    """psi := S f(lambda(V[u0])) e^{-2 gamma u0} tabulated on the profile's nodes."""
    lam = assemble_V_eigen(profile, params, spec_base).full()
    fv = params.scale ** params.operator.gamma * params.operator.value(lam)
    return Psi.tabulated(profile.radii, fv * np.exp(-2.0 * params.gamma * profile.u))


@dataclass
class OrderReport:
    ordered: bool
    worst_gap: float
    worst_node: int
    tolerance: float

    def __bool__(self):
        return self.ordered


def compare_order(w: RadialProfile, v: RadialProfile, params=None, spec=None, tol: float = 1e-8) -> OrderReport:
    """Check w <= v + tol at every common node (v interpolated onto w's grid if needed)."""
    vv = v.u if np.array_equal(w.radii, v.radii) else np.interp(w.radii, v.radii, v.u)
    gap = w.u - vv
    i = int(np.argmax(gap))
    return OrderReport(bool(gap[i] <= tol), float(gap[i]), i, tol)


def comparison_bounds(w: RadialProfile, params: EquationParams, spec: DirichletSpec):
    """C^0 bounds for the Dirichlet solution from an admissible comparison function w.

    Returns (lower, upper) arrays on w's grid:
    w + min(inf_bdry(phi - w), inf q) and w + max(sup_bdry(phi - w), sup q),
    with q = log(S f(V[w]) / (psi e^{2 gamma w})) / (2 gamma).
    """
    N = len(w.radii)
    rows = _pde_rows(spec, N)
    lam = assemble_V_eigen(w, params, spec.base).full()
    fv = params.scale ** params.operator.gamma * params.operator.value(lam[rows])
    psi = spec.psi(w.radii[rows])
    q = np.log(fv / (psi * np.exp(2 * params.gamma * w.u[rows]))) / (2 * params.gamma)
    bv = spec.boundary_values(N)
    bd = bv[~rows] - w.u[~rows]
    lo = min(bd.min(), q.min())
    hi = max(bd.max(), q.max())
    return w.u + lo, w.u + hi


def refine_study(make_spec: Callable[[int], DirichletSpec], params, exact: Callable, nodes=(100, 200, 400, 800), initial=None):
    """Sup errors against ``exact`` and observed orders under grid doubling."""
    errs = []
    for N in nodes:
        spec = make_spec(N)
        prof, rep = solve(params, spec, None if initial is None else initial(spec))
        if not rep.converged:
            raise SolverError(f"solve at N={N} did not converge", rep)
        errs.append(float(np.abs(prof.u - exact(prof.radii)).max()))
    errs = np.array(errs)
    orders = np.log2(errs[:-1] / errs[1:])
    return errs, orders
