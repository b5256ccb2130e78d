"""Explicit sub- and supersolutions with numerical certificates.

Collar barriers live on a ball of radius R with rho = R - r the distance to
the boundary.  All certificates evaluate the exact derivatives of the barrier
(no grid differentiation), so margins reflect the barrier and not the
discretization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conformal import FLAT, ModelGeometry, RadialProfile, SchoutenParams, beta_log_ricci, beta_log_schouten
from .errors import DomainError
from .radial_pde import EquationParams, Psi, assemble_V_eigen
from .symfunc import CurvatureOperator, in_cone

DELTA_START = 0.1
DELTA_FLOOR = 1e-4


@dataclass(frozen=True)
class BarrierSpec:
    kind: str
    beta: float = 1.0
    beta_prime: float | None = None
    delta: float | None = None
    k: int = 1
    Lambda2: float = 1.0
    p: float = 0.0
    phi: float = 0.0
    radius: float = 1.0

    KINDS = ("lower_collar", "upper_collar", "completeness", "euclidean_subsolution")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown barrier kind {self.kind!r}")
        if self.beta <= 0 or (self.beta_prime is not None and self.beta_prime <= 0):
            raise DomainError("barrier exponents must be positive")
        if self.delta is not None and not 0 < self.delta < self.radius:
            raise DomainError("delta must lie in (0, radius)")


@dataclass
class BarrierCertificate:
    """Outcome of a certification sweep; ``margin`` is the minimum slack."""

    kind: str
    region: tuple
    margin: float
    passed: bool
    params: dict = field(default_factory=dict)
    slack: np.ndarray | None = field(default=None, repr=False)
    nodes: np.ndarray | None = field(default=None, repr=False)
    crossover: float | None = None
    message: str = ""

    def to_dict(self):
        out = {
            "kind": self.kind,
            "region": [float(x) for x in self.region],
            "margin": float(self.margin),
            "passed": bool(self.passed),
            "params": {k: (float(v) if isinstance(v, (int, float, np.floating)) else v) for k, v in self.params.items()},
        }
        if self.crossover is not None:
            out["crossover"] = float(self.crossover)
        if self.message:
            out["message"] = self.message
        return out


# ---------------------------------------------------------------------------
# pointwise barriers


def lower_collar(rho, beta, delta):
    """w = beta log(delta^2/(delta^2 + rho))."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0):
        raise DomainError("rho must be nonnegative")
    d2 = delta * delta
    return beta * np.log(d2 / (d2 + rho))


def upper_collar(rho, beta_prime, delta, phi=0.0):
    """v = beta' log(1 + rho/delta^2) + phi."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0):
        raise DomainError("rho must be nonnegative")
    return beta_prime * np.log1p(rho / (delta * delta)) + phi


def completeness_barrier(rho, k, delta):
    """h_k = log(k delta^2/(k rho + delta^2))."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0) or k < 1:
        raise DomainError("need rho >= 0 and k >= 1")
    d2 = delta * delta
    return np.log(k * d2 / (k * rho + d2))


def collar_nodes(delta, radius=1.0, count=241):
    """Radii covering the collar R - delta <= r <= R, dense near the boundary."""
    rho = np.unique(np.concatenate([[0.0], np.geomspace(1e-6 * delta, delta, count - 1)]))
    return radius - rho[::-1], rho[::-1]


def _profile(r, n, u, du, d2u):
    return RadialProfile(r, u, n, du, d2u)


def _rhs_ratio(params: EquationParams, prof: RadialProfile, psi: Psi, base):
    """log(S f(V[u]) / (psi e^{2 gamma u})) per node, -inf where inadmissible."""
    lam = assemble_V_eigen(prof, params, base).full()
    inside, _ = in_cone(lam, params.operator.cone)
    out = np.full(len(prof.radii), -np.inf)
    if np.any(inside):
        fv = params.scale ** params.operator.gamma * params.operator.value(lam[inside], check=False)
        rhs = psi(prof.radii[inside]) * np.exp(2 * params.gamma * prof.u[inside])
        with np.errstate(divide="ignore", invalid="ignore"):
            out[inside] = np.log(fv / rhs)
    return out, lam


def _beta_candidates(params: EquationParams):
    cands = [1.0, 0.5, 0.25, 0.125, 0.0625, 2.0]
    return [b for b in cands if params.barrier_compatible(b)]


def halve_delta(check, start=DELTA_START, floor=DELTA_FLOOR):
    """Halve delta from ``start`` until ``check(delta)`` passes; None below ``floor``."""
    delta = start
    last = None
    while delta >= floor:
        last = check(delta)
        if last.passed:
            return last
        delta *= 0.5
    if last is not None:
        last.message = (last.message + "; " if last.message else "") + f"no delta >= {floor} passes"
    return last


def certify_lower_collar(params: EquationParams, psi: Psi, phi=0.0, radius=1.0, beta=None, delta=None,
                         base: ModelGeometry = FLAT) -> BarrierCertificate:
    """Certify w + phi as a subsolution on the collar.

    Slack is log(S f(V[w+phi]) / (psi e^{2 gamma (w+phi)})); the measured
    c0 = min (delta^2+rho)^2 * lambda_min(V) is reported alongside.
    """
    n = params.n
    betas = [beta] if beta is not None else _beta_candidates(params)
    if not betas:
        return BarrierCertificate("lower_collar", (radius, radius), -np.inf, False,
                                  message="barrier compatibility fails for every beta in the search range")

    def check(beta_, d):
        r, rho = collar_nodes(d, radius)
        d2 = d * d
        w = lower_collar(rho, beta_, d) + phi
        du = beta_ / (d2 + rho)
        prof = _profile(r, n, w, du, du * du / beta_)
        slack, lam = _rhs_ratio(params, prof, psi, base)
        c0 = float(((d2 + rho) ** 2 * lam.min(axis=1)).min())
        ok = bool(np.all(np.isfinite(slack)) and slack.min() > 0 and c0 > 0)
        return BarrierCertificate("lower_collar", (radius - d, radius), float(slack.min()), ok,
                                  {"beta": beta_, "delta": d, "c0": c0, "phi": phi}, slack, r)

    best = None
    for b in betas:
        cert = check(b, delta) if delta is not None else halve_delta(lambda d: check(b, d))
        if cert.passed:
            return cert
        best = cert if best is None or cert.margin > best.margin else best
    return best


def upper_beta_prime(params: EquationParams) -> float:
    """beta' with -n + rho + (n a + b) beta' <= -(n - rho)/2."""
    n, rho = params.n, params.varrho
    s = n * params.a + params.b
    bound = math.inf if s <= 0 else (n - rho) / (2 * s)
    return float(min(1.0, 0.5 * bound))


def certify_upper_collar(params: EquationParams, phi=0.0, radius=1.0, beta_prime=None, delta=None,
                         base: ModelGeometry = FLAT) -> BarrierCertificate:
    """Certify tr(g^{-1} V[v]) <= 0 on the collar for v = beta' log(1 + rho/delta^2) + phi.

    Slack is -(delta^2+rho)^2 tr V[v], scale free near the boundary.
    """
    n = params.n
    bp = upper_beta_prime(params) if beta_prime is None else float(beta_prime)
    lead = -n + params.varrho + (n * params.a + params.b) * bp
    if lead > -(n - params.varrho) / 2 + 1e-15:
        return BarrierCertificate("upper_collar", (radius, radius), -np.inf, False, {"beta_prime": bp},
                                  message="beta' too large for the leading coefficient bound")

    def check(d):
        r, rho = collar_nodes(d, radius)
        d2 = d * d
        v = upper_collar(rho, bp, d, phi)
        du = -bp / (d2 + rho)
        prof = _profile(r, n, v, du, -bp / (d2 + rho) ** 2)
        eig = assemble_V_eigen(prof, params, base)
        slack = -(d2 + rho) ** 2 * eig.trace()
        return BarrierCertificate("upper_collar", (radius - d, radius), float(slack.min()), bool(slack.min() > 0),
                                  {"beta_prime": bp, "delta": d, "leading": lead, "phi": phi}, slack, r)

    return check(delta) if delta is not None else halve_delta(check)


def certify_completeness(params: EquationParams, psi: Psi, ks=(1, 2, 4, 8, 16, 32, 64), radius=1.0, delta=None,
                         base: ModelGeometry = FLAT) -> BarrierCertificate:
    """Certify S f(V[h_k]) >= psi e^{2 gamma h_k} on the collar for every k in ``ks``."""
    n = params.n

    def check(d):
        r, rho = collar_nodes(d, radius)
        d2 = d * d
        worst, slacks = np.inf, []
        for k in ks:
            h = completeness_barrier(rho, k, d)
            du = k / (k * rho + d2)
            prof = _profile(r, n, h, du, du * du)
            slack, _ = _rhs_ratio(params, prof, psi, base)
            slacks.append(slack)
            worst = min(worst, float(slack.min()))
        return BarrierCertificate("completeness", (radius - d, radius), worst, bool(np.isfinite(worst) and worst > 0),
                                  {"delta": d, "k_max": max(ks), "k_count": len(ks)}, np.min(slacks, axis=0), r)

    return check(delta) if delta is not None else halve_delta(check)


# ---------------------------------------------------------------------------
# Euclidean subsolutions h = beta log(1 + r^2)


def beta_log_eigen(r, beta, tensor, n):
    """Closed-form (tangential, radial) eigenvalues w.r.t. g0.

    ``tensor`` is a SchoutenParams or the string ``"ricci"`` for -Ric.
    """
    if isinstance(tensor, SchoutenParams):
        return beta_log_schouten(r, beta, tensor)
    if tensor == "ricci":
        return beta_log_ricci(r, beta, n)
    raise DomainError(f"unknown tensor {tensor!r}")


def euclidean_subsolution_certificate(beta, tensor, operator: CurvatureOperator, psi: Psi, power: float = 1.0,
                                      r0: float = 0.0, r_max: float = 1e8, nodes: int = 2001,
                                      lambda1_target: float | None = None) -> BarrierCertificate:
    """Certify f(lambda(g~^{-1} T))^power >= Lambda1 psi on [r0, inf) for g~ = (1+r^2)^{2 beta} g0.

    The ratio q(r) = (1+r^2)^{-2 beta power} f(lambda)^power / psi is
    evaluated from the closed-form eigenvalues on a log grid up to ``r_max``.
    The tail is governed by the log-slope s of q between r_max/10 and r_max
    (q is a ratio of rational functions of r^2, so it is monotone there): the
    certificate passes with Lambda1 = inf q when s >= -1e-6, and fails
    otherwise, reporting the crossover: the first radius past the peak of q
    where q < ``lambda1_target`` (default: half the peak value).
    """
    if beta <= 0:
        raise DomainError("beta must be positive")
    n = operator.n
    lo = max(r0, 0.0)
    r = np.unique(np.concatenate([np.linspace(lo, lo + 1.0, 101), np.geomspace(max(lo, 1e-3), r_max, nodes)]))
    r = r[r >= lo]
    lt, lr = beta_log_eigen(r, beta, tensor, n)
    lam = np.repeat(np.asarray(lt)[:, None], n, axis=1)
    lam[:, -1] = lr
    inside, _ = in_cone(lam, operator.cone)
    params = {"beta": beta, "power": power, "r0": lo, "r_max": r_max}
    if not np.all(inside):
        bad = float(r[np.flatnonzero(~inside)[0]])
        return BarrierCertificate("euclidean_subsolution", (lo, r_max), -np.inf, False, params,
                                  crossover=bad, message=f"subsolution not admissible at r={bad:.6g}")
    logq = (power * np.log(operator.value(lam, check=False)) - 2 * beta * power * np.log1p(r * r)
            - np.log(psi(r)))
    pos = r > 0
    slope = float((logq[-1] - np.interp(np.log(r_max / 10), np.log(r[pos]), logq[pos])) / np.log(10.0))
    lam1 = float(np.exp(logq.min()))
    params.update({"Lambda1": lam1, "tail_slope": slope})
    if slope >= -1e-6:
        return BarrierCertificate("euclidean_subsolution", (lo, math.inf), float(logq.min()), True, params, logq, r)
    peak = int(np.argmax(logq))
    level = logq[peak] - math.log(2.0) if lambda1_target is None else math.log(lambda1_target)
    below = peak + np.flatnonzero(logq[peak:] < level)
    cross = float(r[below[0]]) if len(below) else float(r_max)
    return BarrierCertificate("euclidean_subsolution", (lo, math.inf), -math.inf, False, params, logq, r,
                              crossover=cross,
                              message=f"psi decays slower than the subsolution curvature (tail slope {slope:.4g})")


def recommended_beta(delta: float) -> float:
    """beta = delta/4 for psi ~ |x|^{-2-delta}."""
    return delta / 4.0
