"""Exhaustion by balls: Dirichlet problems on B_{R_1} ⊂ B_{R_2} ⊂ ... and their monotone limit.

All sub-problems share one master grid (each ball uses a prefix of it), so
u_k and u_{k+1} are compared node by node with no interpolation and the
discrete comparison principle applies directly.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import PchipInterpolator

from .conformal import FLAT, ModelGeometry, RadialProfile, beta_log
from .errors import DomainError, SolverError
from .grids import GridSpec
from .radial_pde import DirichletSpec, EquationParams, Psi, Tolerances, newton_solve, solve
from .symfunc import CurvatureOperator


@dataclass
class ExhaustionSpec:
    """Inputs of an exhaustion run.

    ``subsolution`` is either beta (for beta log(1+r^2)) or a triple of
    vectorized callables (u, u', u'').  ``Lambda1`` is the measured margin
    in f(lambda(g_bar^{-1} A)) >= Lambda1 psi; when ``normalize_subsolution``
    is set, boundary data are ubar + min(0, log Lambda1)/(2 gamma), which is
    itself a subsolution, so the sequence increases.
    """

    params: EquationParams
    psi: Psi
    radii: tuple
    subsolution: object = 0.125
    Lambda1: float | None = None
    normalize_subsolution: bool = True
    density: float = 120.0
    min_segment: int = 16
    ctol: float = 1e-6
    check_tol: float = 1e-6
    base: ModelGeometry = FLAT
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        self.radii = tuple(float(r) for r in self.radii)
        if len(self.radii) < 1 or any(b <= a for a, b in zip(self.radii, self.radii[1:])) or self.radii[0] <= 0:
            raise DomainError("radii must be positive and strictly increasing")

    def subsolution_functions(self):
        if isinstance(self.subsolution, (int, float)):
            return beta_log(float(self.subsolution))
        u, du, d2u = self.subsolution
        return u, du, d2u

    def measured_Lambda1(self) -> float:
        if self.Lambda1 is not None:
            return float(self.Lambda1)
        if isinstance(self.subsolution, (int, float)) and self.params.schouten is not None:
            from .barriers import euclidean_subsolution_certificate

            cert = euclidean_subsolution_certificate(float(self.subsolution), self.params.schouten,
                                                     self.params.operator, self.psi)
            if not cert.passed:
                raise DomainError(f"subsolution certificate failed: {cert.message}")
            return cert.params["Lambda1"]
        raise DomainError("Lambda1 must be given for a custom subsolution")

    def shift(self, lam1: float) -> float:
        if not self.normalize_subsolution:
            return 0.0
        return 0.5 * min(0.0, math.log(lam1)) / self.params.gamma

    def with_radii(self, radii) -> "ExhaustionSpec":
        from dataclasses import replace

        return replace(self, radii=tuple(radii))


def master_grid(radii, density=120.0, min_segment=16):
    """Nodes uniform in log(1+r) on each [R_{k-1}, R_k]; returns (r, index of each R_k)."""
    t = np.log1p(np.concatenate([[0.0], np.asarray(radii, dtype=np.float64)]))
    pieces, idx = [np.zeros(1)], []
    for a, b in zip(t[:-1], t[1:]):
        m = max(min_segment, int(math.ceil((b - a) * density)))
        pieces.append(np.linspace(a, b, m + 1)[1:])
        idx.append(sum(len(p) for p in pieces) - 1)
    r = np.expm1(np.concatenate(pieces))
    r[idx] = radii
    return r, idx


@dataclass
class CheckResult:
    passed: bool
    worst: float
    details: dict = field(default_factory=dict)

    def summary(self):
        out = {"passed": bool(self.passed), "worst": float(self.worst)}
        out.update(self.details)
        return out


@dataclass
class ExhaustionResult:
    spec: ExhaustionSpec
    grid: np.ndarray
    index: list
    profiles: list
    reports: list
    Lambda1: float
    shift: float
    common: np.ndarray = field(init=False)
    restricted: np.ndarray = field(init=False)
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        m = self.index[0] + 1
        self.common = self.grid[:m]
        self.restricted = np.array([p.u[:m] for p in self.profiles])

    @property
    def limit(self) -> RadialProfile:
        return self.profiles[-1]

    @property
    def increments(self):
        """sup over the common grid of |u_{k+1} - u_k|."""
        return np.abs(np.diff(self.restricted, axis=0)).max(axis=1) if len(self.profiles) > 1 else np.zeros(0)

    @property
    def converged(self) -> bool:
        inc = self.increments
        return bool(len(inc) and inc[-1] <= self.spec.ctol)


def run_exhaustion(spec: ExhaustionSpec, workers: int = 1) -> ExhaustionResult:
    """Solve the Dirichlet problem on every ball with subsolution boundary data."""
    params = spec.params
    n = params.n
    u, _, _ = spec.subsolution_functions()
    lam1 = spec.measured_Lambda1()
    shift = spec.shift(lam1)
    r, idx = master_grid(spec.radii, spec.density, spec.min_segment)

    def one(k):
        rk = r[: idx[k] + 1]
        R = spec.radii[k]
        ds = DirichletSpec(R, float(u(np.array(R)) + shift), spec.psi, GridSpec(len(rk)), base=spec.base)
        init = RadialProfile(rk, u(rk) + shift, n)
        try:
            return newton_solve(init, params, ds, spec.tolerances)
        except SolverError as exc:
            raise SolverError(f"sub-problem k={k} (R={R}) failed: {exc}", exc.report) from exc

    ks = range(len(spec.radii))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(one, ks))
    else:
        out = [one(k) for k in ks]
    for k, (_, rep) in enumerate(out):
        if not rep.converged:
            raise SolverError(f"sub-problem k={k} did not converge ({rep.reason})", rep)
    return ExhaustionResult(spec, r, idx, [p for p, _ in out], [rep for _, rep in out], lam1, shift)


# ---------------------------------------------------------------------------
# auxiliary blow-up solution


def aitken(u6, u8, u10):
    """Pointwise Aitken extrapolation of a geometrically converging triple."""
    d1 = u10 - u8
    d0 = u8 - u6
    den = d1 - d0
    safe = np.abs(den) > 1e-300
    corr = np.where(safe, d1 * d1 / np.where(safe, den, 1.0), 0.0)
    # only extrapolate where the triple actually contracts
    ok = safe & (np.abs(d1) < np.abs(d0))
    return np.where(ok, u10 - corr, u10)


@dataclass
class BlowupSolution:
    radius: float
    radii: np.ndarray
    u: np.ndarray
    raw: list
    data: tuple
    _interp: Callable = field(init=False, repr=False)

    def __post_init__(self):
        self._interp = PchipInterpolator(self.radii, self.u, extrapolate=False)

    def __call__(self, r):
        return self._interp(np.asarray(r, dtype=np.float64))


def scalar_blowup_params(n: int) -> tuple:
    """V-form of 2(n-1)Lap u + (n-1)(n-2)|du|^2 - R_g = e^{2u} on flat space, and its psi."""
    return EquationParams(CurvatureOperator(n, 1), a=(n - 2) / 2.0), Psi.constant(1.0 / (2 * (n - 1)))


def auxiliary_blowup(n: int, radius: float, data=(6.0, 8.0, 10.0), nodes: int = 600, stretch: float = 8.0):
    """Boundary blow-up solution on B_radius, extrapolated from finite boundary values."""
    params, psi = scalar_blowup_params(n)
    us = []
    for B in data:
        ds = DirichletSpec(float(radius), float(B), psi, GridSpec(nodes, "clustered", stretch=stretch))
        prof, rep = solve(params, ds)
        if not rep.converged:
            raise SolverError(f"blow-up solve with boundary value {B} failed", rep)
        us.append(prof.u)
    u = aitken(*us) if len(us) == 3 else us[-1]
    return BlowupSolution(float(radius), prof.radii, u, us, tuple(data))


def envelope_constant(params: EquationParams, inf_psi: float) -> float:
    """1/2 log(alpha(n tau+2-2n) / (2n(n-1)(n-2) inf psi))."""
    s = params.schouten
    if s is None:
        raise DomainError("the upper envelope is stated for the Schouten specialization")
    n = s.n
    return 0.5 * math.log(s.alpha * (n * s.tau + 2 - 2 * n) / (2 * n * (n - 1) * (n - 2) * inf_psi))


# ---------------------------------------------------------------------------
# checks


def check_monotone_upper(result: ExhaustionResult, blowups: dict | None = None, tol: float | None = None) -> CheckResult:
    """u_k <= u_{k+1} on B_{R_k}, and u_k <= blowup_m + const_m on B_{R_m} for k >= m.

    ``blowups`` maps m to a :class:`BlowupSolution` on B_{R_m}; by default one
    is computed for every m.
    """
    tol = result.spec.check_tol if tol is None else tol
    K = len(result.profiles)
    mono = []
    for k in range(K - 1):
        a, b = result.profiles[k].u, result.profiles[k + 1].u[: len(result.profiles[k].u)]
        gap = a - b
        i = int(np.argmax(gap))
        mono.append((float(gap[i]), k, i))
    worst_mono = max(mono)[0] if mono else -np.inf
    n = result.spec.params.n
    env = []
    for m in range(K):
        R = result.spec.radii[m]
        aux = (blowups or {}).get(m) or auxiliary_blowup(n, R)
        r = result.grid[: result.index[m]]  # open ball: the blow-up is infinite on the sphere
        inf_psi = float(np.min(result.spec.psi(result.grid[: result.index[m] + 1])))
        bound = aux(r) + envelope_constant(result.spec.params, inf_psi)
        for k in range(m, K):
            gap = result.profiles[k].u[: len(r)] - bound
            gap = gap[np.isfinite(gap)]
            i = int(np.argmax(gap))
            env.append((float(gap[i]), m, k))
    worst_env = max(env)[0]
    passed = worst_mono <= tol and worst_env <= tol
    res = CheckResult(passed, max(worst_mono, worst_env), {
        "monotone_worst": worst_mono,
        "monotone_pair": list(max(mono)[1:]) if mono else None,
        "envelope_worst": worst_env,
        "envelope_pair": list(max(env)[1:]),
        "tolerance": tol,
    })
    result.checks["monotone_upper"] = res
    return res


def check_lower_bound(result: ExhaustionResult, tol: float | None = None) -> CheckResult:
    """u_k >= ubar + min(0, log Lambda1)/2 at every node and every k."""
    tol = result.spec.check_tol if tol is None else tol
    u, _, _ = result.spec.subsolution_functions()
    c = 0.5 * min(0.0, math.log(result.Lambda1)) / result.spec.params.gamma
    worst, where = -np.inf, None
    for k, p in enumerate(result.profiles):
        gap = (u(p.radii) + c) - p.u
        i = int(np.argmax(gap))
        if gap[i] > worst:
            worst, where = float(gap[i]), (k, float(p.radii[i]))
    res = CheckResult(worst <= tol, worst, {"where": list(where), "constant": c, "tolerance": tol})
    result.checks["lower_bound"] = res
    return res


def check_completeness(limit: RadialProfile, domain: str = "ball", radius: float = 1.0,
                       levels=None, factor: float = 10.0, growth: float = 1.1, n_quad: int = 4001) -> CheckResult:
    """Completeness of e^{2u} g along a radius.

    ``domain="ball"``: on collar levels rho_j = rho_0/factor^j the quantity
    C_j = -min_{rho >= rho_j}(u + log rho) must stay bounded (reported C is
    the last one) and each extension of the length integral from r = 0 to
    R - rho_j must grow by at least e^{-C} log(factor) (to quadrature
    accuracy).  ``domain="Rn"``: the length integral to each level radius
    must grow by the factor ``growth`` per level.  ``limit`` may be a
    profile or a callable u(r).
    """
    ufun = limit if callable(limit) and not isinstance(limit, RadialProfile) else None
    if domain == "ball":
        if levels is None:
            levels = [0.5 * radius / factor**j for j in range(0, 5)]
        rho = np.asarray(levels, dtype=np.float64)
        Cs, lengths = [], []
        for rj in rho:
            r = radius - np.geomspace(rj, radius, n_quad)[::-1]
            r = np.concatenate([[0.0], r[r > 0]])
            uu = ufun(r) if ufun else np.interp(r, limit.radii, limit.u)
            Cs.append(float(-np.min(uu[1:] + np.log(radius - r[1:]))))
            lengths.append(float(trapezoid(np.exp(uu), r)))
        C = Cs[-1]
        inc = np.diff(lengths)
        need = math.exp(-max(Cs)) * math.log(factor) * (1 - 1e-3)
        bounded = bool(np.all(np.isfinite(Cs)) and (max(Cs) - min(Cs) <= 0.5 * math.log(factor)))
        passed = bounded and bool(np.all(inc >= need))
        return CheckResult(passed, float(inc.min()) if len(inc) else 0.0, {
            "C": C, "C_levels": Cs, "lengths": lengths, "required_increment": need, "bounded_below": bounded,
        })
    if domain == "Rn":
        if ufun:
            if levels is None:
                raise DomainError("levels are required for a callable profile on R^n")
            lv = np.asarray(levels, dtype=np.float64)
            r = np.concatenate([[0.0], np.geomspace(1e-3, lv.max(), n_quad)])
            uu = ufun(r)
        else:
            r, uu = limit.radii, limit.u
            lv = np.asarray(levels if levels is not None else [], dtype=np.float64)
        L = np.concatenate([[0.0], cumulative_trapezoid(np.exp(uu), r)])
        vals = np.interp(lv, r, L)
        ratios = vals[1:] / vals[:-1]
        passed = bool(len(ratios) and np.all(ratios >= growth))
        return CheckResult(passed, float(ratios.min()) if len(ratios) else 0.0, {
            "lengths": vals.tolist(), "ratios": ratios.tolist(), "required_ratio": growth,
        })
    raise DomainError(f"unknown domain {domain!r}")


def stability(result: ExhaustionResult, extended: ExhaustionResult) -> float:
    """sup |u_inf - u_inf'| over the inner half of the common grid."""
    m = len(result.common)
    inner = result.common <= 0.5 * result.common[-1]
    a = result.limit.u[:m][inner]
    b = extended.limit.u[:m][inner]
    return float(np.abs(a - b).max())
