"""Conformal change of curvature for radial factors on the model space forms.

A radial conformal factor ``g~ = e^{2u} g`` on a simply connected space form
has curvature tensors with an (n-1, 1) eigenvalue structure:
one tangential value repeated n-1 times and one radial value.  Everything in
this module works with that pair.  Eigenvalues are taken with respect to the
background metric ``g``; the values relative to ``g~`` are ``e^{-2u}`` times
those.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DiscretizationError, DomainError
from .grids import check_radii, derivative_matrices


@dataclass(frozen=True)
class ModelGeometry:
    """Space form of constant sectional curvature ``c`` in polar coordinates.

    The metric is dr^2 + s(r)^2 g_sphere where s'' = -c s with s(0) = 0 and s'(0) = 1.
    """

    c: int = 0

    def __post_init__(self):
        if self.c not in (-1, 0, 1):
            raise DomainError(f"unsupported base curvature {self.c}; expected c in {-1, 0, 1}")

    @classmethod
    def named(cls, name: str) -> "ModelGeometry":
        table = {"flat": 0, "euclidean": 0, "sphere": 1, "hyperbolic": -1}
        try:
            return cls(table[str(name).lower()])
        except KeyError:
            raise DomainError(f"unknown base geometry {name!r}") from None

    @property
    def name(self) -> str:
        return {0: "flat", 1: "sphere", -1: "hyperbolic"}[self.c]

    def check_radii(self, r):
        if self.c == 1 and np.any(np.asarray(r) >= np.pi):
            raise DomainError("radial chart on the sphere requires r < pi")

    def s_ratio(self, r):
        """s'(r)/s(r); infinite at r = 0."""
        r = np.asarray(r, dtype=np.float64)
        with np.errstate(divide="ignore"):
            if self.c == 0:
                return 1.0 / r
            if self.c == 1:
                return 1.0 / np.tan(r)
            return 1.0 / np.tanh(r)

    def ricci(self, n: int) -> float:
        return (n - 1) * self.c

    def scalar(self, n: int) -> float:
        return n * (n - 1) * self.c

    def schouten(self, params: "SchoutenParams") -> float:
        """Eigenvalue of g^{-1} A_g^{tau,alpha} (a multiple of g)."""
        n, tau, alpha = params.n, params.tau, params.alpha
        return -alpha * self.c * (n * tau + 2 - 2 * n) / (2.0 * (n - 2))


FLAT = ModelGeometry(0)


@dataclass(frozen=True)
class SchoutenParams:
    """A^{tau,alpha} = alpha/(n-2) (Ric - tau R/(2(n-1)) g)."""

    tau: float
    alpha: int
    n: int

    def __post_init__(self):
        if self.alpha not in (-1, 1):
            raise DomainError(f"alpha must be +1 or -1, got {self.alpha}")
        if self.n < 3:
            raise DomainError("the modified Schouten tensor needs n >= 3")

    @property
    def einstein_value(self) -> float:
        """alpha(n tau + 2 - 2n)/(2(n-2)): eigenvalue of g~^{-1}A for curvature -1 Einstein metrics."""
        return self.alpha * (self.n * self.tau + 2 - 2 * self.n) / (2.0 * (self.n - 2))

    def check(self, cone=None):
        """Raise unless (tau, alpha) is admissible for ``cone`` (default Gamma_1)."""
        from .symfunc import ConeSpec, validate_tau_alpha

        cone = cone or ConeSpec(self.n, 1)
        res = validate_tau_alpha(self.tau, self.alpha, cone)
        if not res:
            raise DomainError(
                f"(tau, alpha) = ({self.tau}, {self.alpha}) not admissible: "
                f"need tau {'<' if self.alpha == -1 else '>'} {res.threshold:.6g}"
            )
        return res


class RadialProfile:
    """Values of the log conformal factor u on radial nodes.

    Derivatives come from the grid stencils unless exact ones are supplied.
    With a node at r = 0 the stencil enforces u'(0) = 0.
    """

    def __init__(self, radii, u, n: int, du=None, d2u=None):
        self.radii = check_radii(radii)
        self.u = np.asarray(u, dtype=np.float64).copy()
        if self.u.shape != self.radii.shape:
            raise DiscretizationError("u and radii must have the same length")
        if n < 2:
            raise DomainError("dimension must be at least 2")
        self.n = int(n)
        self._du = None if du is None else np.asarray(du, dtype=np.float64)
        self._d2u = None if d2u is None else np.asarray(d2u, dtype=np.float64)
        self._ops = None

    @classmethod
    def from_function(cls, radii, n, u, du=None, d2u=None):
        r = check_radii(radii)
        return cls(r, u(r), n, None if du is None else du(r), None if d2u is None else d2u(r))

    @property
    def operators(self):
        if self._ops is None:
            self._ops = derivative_matrices(self.radii)
        return self._ops

    def with_values(self, u) -> "RadialProfile":
        """Same grid, new values, stencil derivatives."""
        p = RadialProfile.__new__(RadialProfile)
        p.radii, p.u, p.n = self.radii, np.asarray(u, dtype=np.float64), self.n
        p._du = p._d2u = None
        p._ops = self._ops
        return p

    def derivatives(self):
        if self._du is not None and self._d2u is not None:
            return self._du, self._d2u
        d1, d2 = self.operators
        return d1 @ self.u, d2 @ self.u

    @property
    def exact(self) -> bool:
        return self._du is not None and self._d2u is not None


def radial_hessian(profile: RadialProfile, base: ModelGeometry = FLAT):
    """(u', u'', tangential Hessian eigenvalue u' s'/s, Laplacian) per node."""
    base.check_radii(profile.radii)
    du, d2u = profile.derivatives()
    r = profile.radii
    with np.errstate(invalid="ignore"):
        tang = du * base.s_ratio(r)
    centre = r == 0.0
    tang[centre] = d2u[centre]
    lap = d2u + (profile.n - 1) * tang
    return du, d2u, tang, lap


@dataclass
class PointwiseTensorEigen:
    """Tangential (multiplicity n-1) and radial eigenvalues of g^{-1}T per node.

    ``scaled`` gives the eigenvalues with respect to g~ = e^{2u}g.
    """

    radii: np.ndarray
    tangential: np.ndarray
    radial: np.ndarray
    n: int
    u: np.ndarray | None = None

    def full(self) -> np.ndarray:
        """(N, n) eigenvalue tuples: n-1 tangential copies then the radial value."""
        out = np.repeat(self.tangential[:, None], self.n, axis=1)
        out[:, -1] = self.radial
        return out

    def scaled(self) -> "PointwiseTensorEigen":
        if self.u is None:
            raise DomainError("profile values are needed to rescale to g~")
        w = np.exp(-2.0 * self.u)
        return PointwiseTensorEigen(self.radii, w * self.tangential, w * self.radial, self.n, None)

    def trace(self) -> np.ndarray:
        return (self.n - 1) * self.tangential + self.radial


def _need_nodes(profile):
    if len(profile.radii) < 3:
        raise DiscretizationError("at least 3 nodes are required")


def scalar_curvature_conformal(profile: RadialProfile, base: ModelGeometry = FLAT) -> np.ndarray:
    """R of e^{2u} g from e^{2u} R~ = R_g - 2(n-1) Lap u - (n-1)(n-2)|du|^2."""
    _need_nodes(profile)
    n = profile.n
    du, _, _, lap = radial_hessian(profile, base)
    return np.exp(-2.0 * profile.u) * (base.scalar(n) - 2 * (n - 1) * lap - (n - 1) * (n - 2) * du**2)


def modified_schouten_eigen(
    profile: RadialProfile, params: SchoutenParams, base: ModelGeometry = FLAT
) -> PointwiseTensorEigen:
    """Eigenvalues of g^{-1} A^{tau,alpha} for g~ = e^{2u} g."""
    _need_nodes(profile)
    n, tau, alpha = profile.n, params.tau, params.alpha
    if params.n != n:
        raise DomainError("profile and Schouten parameters disagree on n")
    du, d2u, tang, lap = radial_hessian(profile, base)
    common = base.schouten(params) + alpha * (tau - 1) / (n - 2) * lap + alpha * (tau - 2) / 2 * du**2
    lt = common - alpha * tang
    lr = common - alpha * d2u + alpha * du**2
    return PointwiseTensorEigen(profile.radii, lt, lr, n, profile.u)


def ricci_eigen(profile: RadialProfile, base: ModelGeometry = FLAT) -> PointwiseTensorEigen:
    """Eigenvalues of -g^{-1} Ric for g~ = e^{2u} g (sign flipped)."""
    _need_nodes(profile)
    n = profile.n
    du, d2u, tang, lap = radial_hessian(profile, base)
    common = -base.ricci(n) + lap
    lt = common + (n - 2) * tang + (n - 2) * du**2
    lr = common + (n - 2) * d2u
    return PointwiseTensorEigen(profile.radii, lt, lr, n, profile.u)


def trace_identity_residual(
    profile: RadialProfile, params: SchoutenParams, base: ModelGeometry = FLAT
) -> np.ndarray:
    """|tr g^{-1}A~ - alpha(n tau+2-2n)/(2(n-1)(n-2)) (2(n-1)Lap u + (n-1)(n-2)|du|^2 - R_g)|."""
    n, tau, alpha = profile.n, params.tau, params.alpha
    eig = modified_schouten_eigen(profile, params, base)
    du, _, _, lap = radial_hessian(profile, base)
    rhs = alpha * (n * tau + 2 - 2 * n) / (2.0 * (n - 1) * (n - 2)) * (
        2 * (n - 1) * lap + (n - 1) * (n - 2) * du**2 - base.scalar(n)
    )
    return np.abs(eig.trace() - rhs)


# closed forms on flat space


def beta_log(beta: float):
    """h = beta log(1 + r^2) with its first two derivatives."""

    def u(r):
        return beta * np.log1p(r * r)

    def du(r):
        return 2 * beta * r / (1 + r * r)

    def d2u(r):
        return 2 * beta * (1 - r * r) / (1 + r * r) ** 2

    return u, du, d2u


def beta_log_schouten(r, beta: float, params: SchoutenParams):
    """Closed-form (tangential, radial) eigenvalues of g0^{-1}A for h = beta log(1+r^2)."""
    n, tau, alpha = params.n, params.tau, params.alpha
    r2 = np.asarray(r, dtype=np.float64) ** 2
    pre = 2 * beta / (1 + r2) ** 2
    const = (n * (tau - 2) + 2) / (n - 2)
    lt = pre * ((tau - 2) * (1 + beta) * r2 + const)
    lr = pre * (tau * (1 + beta) * r2 + const)
    return alpha * lt, alpha * lr


def beta_log_ricci(r, beta: float, n: int):
    """Closed-form (tangential, radial) eigenvalues of -g0^{-1}Ric for h = beta log(1+r^2)."""
    r2 = np.asarray(r, dtype=np.float64) ** 2
    pre = 2 * beta / (1 + r2) ** 2
    lt = pre * (2 * (1 + beta) * r2 + (2 * n - 2) / (n - 2)) * (n - 2)
    lr = 4 * (n - 1) * beta / (1 + r2) ** 2 * np.ones_like(r2)
    return lt, lr


def poincare(radius: float = 1.0):
    """Curvature -1 metric on the ball: u = log(2R/(R^2 - r^2)) and derivatives."""
    R = float(radius)

    def u(r):
        return np.log(2 * R / (R * R - r * r))

    def du(r):
        return 2 * r / (R * R - r * r)

    def d2u(r):
        return 2 * (R * R + r * r) / (R * R - r * r) ** 2

    return u, du, d2u
