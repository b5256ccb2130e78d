"""Elementary symmetric functions on Garding cones, with the quotient operators built from them.

Eigenvalue tuples are plain float arrays whose last axis has length ``n``;
every routine here accepts a single tuple or a stack of them.  The canonical
ordered view of a tuple is ``np.sort(lam)`` (ascending).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from ._kernels import esf_batch, esf_deleted_batch
from .errors import AdmissibilityError, DomainError

AVERAGE = "average"

# relative admissibility floor: margin > ADMISSIBLE_RTOL * max(1, |lam|_inf**k)
ADMISSIBLE_RTOL = 1e-12


def _rows(lam):
    arr = np.asarray(lam, dtype=np.float64)
    if arr.ndim == 0:
        raise DomainError("eigenvalue tuple must be a vector")
    return arr.reshape(-1, arr.shape[-1]), arr.shape[:-1]


def elementary_sigma(lam, k: int):
    """sigma_k(lam) by the O(nk) recurrence; sigma_0 = 1."""
    rows, lead = _rows(lam)
    n = rows.shape[1]
    if not 0 <= k <= n:
        raise DomainError(f"k={k} outside [0, {n}]")
    out = esf_batch(rows, k)[:, k]
    return out.reshape(lead) if lead else float(out[0])


def sigma_gradient(lam, k: int):
    """d sigma_k / d lam_i = sigma_{k-1}(lam | i)."""
    rows, lead = _rows(lam)
    n = rows.shape[1]
    if not 1 <= k <= n:
        raise DomainError(f"k={k} outside [1, {n}]")
    out = esf_deleted_batch(rows, k - 1)[:, :, k - 1]
    return out.reshape(lead + (n,))


def sigma_by_enumeration(lam, k: int) -> float:
    """Subset-sum definition of sigma_k; only meant as a check for small n."""
    from itertools import combinations

    lam = [float(x) for x in lam]
    return float(sum(np.prod([lam[i] for i in idx]) for idx in combinations(range(len(lam)), k)))


def _check_transform(transform):
    if transform is None or transform == AVERAGE:
        return transform
    rho = float(transform)
    if not (rho < 1.0 and rho != 0.0):
        raise DomainError(f"transform parameter rho={rho} must satisfy rho < 1, rho != 0")
    return rho


def _transform_rho(transform) -> float | None:
    if transform is None:
        return None
    return 1.0 if transform == AVERAGE else float(transform)


def cone_transform_mu(lam, transform):
    """mu_i = (sum_j lam_j - rho*lam_i)/(n - rho); ``"average"`` is rho = 1."""
    transform = _check_transform(transform)
    lam = np.asarray(lam, dtype=np.float64)
    rho = _transform_rho(transform)
    if rho is None:
        return lam.copy()
    n = lam.shape[-1]
    total = lam.sum(axis=-1, keepdims=True)
    return (total - rho * lam) / (n - rho)


@dataclass(frozen=True)
class ConeSpec:
    """Garding cone Gamma_k in R^n, optionally pulled back by a linear transform.

    ``transform`` is ``None``, a float rho < 1 (rho != 0), or ``"average"``
    for mu_i = (1/(n-1)) sum_{j != i} lam_j.
    """

    n: int
    k: int
    transform: float | str | None = None

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("dimension n must be at least 2")
        if not 1 <= self.k <= self.n:
            raise DomainError(f"cone index k={self.k} outside [1, {self.n}]")
        object.__setattr__(self, "transform", _check_transform(self.transform))

    def mu(self, lam):
        return cone_transform_mu(lam, self.transform)


def in_cone(lam, cone: ConeSpec):
    """Membership and margin min_j sigma_j(mu(lam)), j = 1..k.

    Returns ``(inside, margin)``; both are arrays for stacked input.
    """
    rows, lead = _rows(lam)
    if rows.shape[1] != cone.n:
        raise DomainError(f"expected {cone.n} eigenvalues, got {rows.shape[1]}")
    sig = esf_batch(cone.mu(rows), cone.k)[:, 1:]
    margin = sig.min(axis=1)
    inside = np.all(sig > 0.0, axis=1)
    if lead:
        return inside.reshape(lead), margin.reshape(lead)
    return bool(inside[0]), float(margin[0])


def strictly_admissible(lam, cone: ConeSpec):
    """Margin test used before differentiating f near the cone boundary."""
    rows, lead = _rows(lam)
    _, margin = in_cone(rows, cone)
    scale = np.maximum(1.0, np.abs(cone.mu(rows)).max(axis=1) ** cone.k)
    ok = margin > ADMISSIBLE_RTOL * scale
    return ok.reshape(lead) if lead else bool(ok[0])


@dataclass(frozen=True)
class CurvatureOperator:
    """f = ((C_n^l sigma_k)/(C_n^k sigma_l))^(gamma/(k-l)) composed with the cone transform.

    ``gamma = 1`` is the homogeneous-of-degree-one quotient family; smaller
    gamma keeps f concave and normalized, with f(t lam) = t^gamma f(lam).
    """

    n: int
    k: int
    l: int = 0
    gamma: float = 1.0
    transform: float | str | None = None
    cone: ConeSpec = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.l < self.k <= self.n:
            raise DomainError(f"need 0 <= l < k <= n, got l={self.l}, k={self.k}, n={self.n}")
        if not 0.0 < self.gamma <= 1.0:
            raise DomainError(f"homogeneity degree gamma={self.gamma} must lie in (0, 1]")
        object.__setattr__(self, "cone", ConeSpec(self.n, self.k, self.transform))

    @property
    def name(self) -> str:
        base = f"(C{self.n}^{self.l} s{self.k} / C{self.n}^{self.k} s{self.l})^(1/{self.k - self.l})"
        if self.gamma != 1.0:
            base += f"^{self.gamma:g}"
        if self.transform is not None:
            base += f" o mu[{self.transform}]"
        return base

    def _quotient(self, sig_k, sig_l):
        ratio = comb(self.n, self.l) * sig_k / (comb(self.n, self.k) * sig_l)
        return ratio ** (self.gamma / (self.k - self.l))

    def value(self, lam, check: bool = True):
        rows, lead = _rows(lam)
        mu = self.cone.mu(rows)
        sig = esf_batch(mu, self.k)
        if check:
            _raise_outside(sig[:, 1:], rows, self.cone)
        out = self._quotient(sig[:, self.k], sig[:, self.l])
        return out.reshape(lead) if lead else float(out[0])

    def gradient(self, lam, check: bool = True):
        rows, lead = _rows(lam)
        n = self.n
        mu = self.cone.mu(rows)
        sig = esf_batch(mu, self.k)
        if check:
            _raise_outside(sig[:, 1:], rows, self.cone)
            bad = ~strictly_admissible(rows, self.cone)
            if np.any(bad):
                idx = int(np.flatnonzero(bad)[0])
                raise AdmissibilityError(
                    "eigenvalues too close to the cone boundary to differentiate", index=idx
                )
        dele = esf_deleted_batch(mu, self.k - 1)
        f = self._quotient(sig[:, self.k], sig[:, self.l])
        dlog = dele[:, :, self.k - 1] / sig[:, self.k, None]
        if self.l > 0:
            dlog = dlog - dele[:, :, self.l - 1] / sig[:, self.l, None]
        grad = (self.gamma / (self.k - self.l)) * f[:, None] * dlog
        rho = _transform_rho(self.transform)
        if rho is not None:
            grad = (grad.sum(axis=1, keepdims=True) - rho * grad) / (n - rho)
        return grad.reshape(lead + (n,))

    __call__ = value


def _raise_outside(sig, rows, cone):
    bad = sig <= 0.0
    if np.any(bad):
        r, j = np.argwhere(bad)[0]
        raise AdmissibilityError(
            f"eigenvalues {rows[r].tolist()} outside the cone: sigma_{j + 1} <= 0",
            index=int(j + 1),
        )


def quotient_operator(n: int, k: int, l: int = 0, gamma: float = 1.0, transform=None) -> CurvatureOperator:
    return CurvatureOperator(n=n, k=k, l=l, gamma=gamma, transform=transform)


def f_eval(op: CurvatureOperator, lam):
    return op.value(lam)


def f_gradient(op: CurvatureOperator, lam):
    return op.gradient(lam)


# ---------------------------------------------------------------------------
# partial uniform ellipticity constants

_MAG_GRID = np.logspace(-3.0, 3.0, 121)


@dataclass(frozen=True)
class EllipticityConstants:
    kappa: int
    vartheta: float
    witness: np.ndarray = field(repr=False, compare=False)
    kappa_witness: np.ndarray = field(repr=False, compare=False)


def _two_level(n, m, neg, pos=1.0):
    v = np.full((np.size(neg), n), pos, dtype=np.float64)
    v[:, :m] = -np.asarray(neg, dtype=np.float64)[:, None]
    return v


def kappa_of_cone(cone: ConeSpec):
    """Largest m with (-a_1..-a_m, a_{m+1}..a_n) in the cone for some a_j > 0.

    The cone is convex and permutation symmetric, so averaging a witness over
    permutations inside its negative and positive blocks gives another
    witness; it suffices to scan two-level patterns (-a,..,-a, 1,..,1) with a
    on a log grid over [1e-3, 1e3].  Returns ``(kappa, witness)``.
    """
    n = cone.n
    for m in range(n - 1, 0, -1):
        cand = _two_level(n, m, _MAG_GRID)
        inside, margin = in_cone(cand, cone)
        if np.any(inside):
            # normalize margin by degree so the chosen witness is well inside
            best = int(np.argmax(np.where(inside, margin / np.abs(cand).max(axis=1) ** cone.k, -np.inf)))
            return m, cand[best]
    return 0, np.ones(n)


def _vartheta_expr(alpha, kappa, n):
    # alpha_1 / (n (sum_{i > kappa} alpha_i - sum_{i=2}^{kappa} alpha_i))
    denom = alpha[:, kappa:].sum(axis=1) - alpha[:, 1:kappa].sum(axis=1)
    return alpha[:, 0] / (n * denom)


def vartheta_of_cone(cone: ConeSpec, kappa: int | None = None):
    """Certified lower bound for the partial-ellipticity constant.

    For kappa = 0 this is exactly 1/n.  Otherwise the bound from a witness
    (-alpha_1, .., -alpha_kappa, alpha_{kappa+1}, .., alpha_n) in the cone is
    maximized over alpha_1 = s, alpha_2..alpha_kappa = t, positives = 1 with
    (s, t) on a log grid.  Returns ``(vartheta, witness)``.
    """
    n = cone.n
    if kappa is None:
        kappa, _ = kappa_of_cone(cone)
    if kappa == 0:
        return 1.0 / n, np.ones(n)
    grid = np.logspace(-3.0, 3.0, 73)
    s, t = np.meshgrid(grid, grid, indexing="ij")
    s, t = s.ravel(), t.ravel()
    alpha = np.ones((s.size, n))
    alpha[:, 0] = s
    alpha[:, 1:kappa] = t[:, None]
    cand = alpha.copy()
    cand[:, :kappa] *= -1.0
    inside, _ = in_cone(cand, cone)
    if not np.any(inside):
        raise DomainError(f"no witness with {kappa} negative entries found in {cone}")
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(inside, _vartheta_expr(alpha, kappa, n), -np.inf)
    best = int(np.argmax(vals))
    return float(min(vals[best], 1.0 / n)), cand[best]


def ellipticity_constants(cone: ConeSpec) -> EllipticityConstants:
    kappa, kw = kappa_of_cone(cone)
    theta, witness = vartheta_of_cone(cone, kappa)
    return EllipticityConstants(kappa=kappa, vartheta=theta, witness=witness, kappa_witness=kw)


# ---------------------------------------------------------------------------
# sampled verification


def sample_cone(cone: ConeSpec, size: int, rng: np.random.Generator, boundary_fraction: float = 0.3):
    """Random points of the cone, a fraction of them pushed close to its boundary."""
    n = cone.n
    out = []
    need = size
    while need > 0:
        batch = max(4 * need, 64)
        scale = np.exp(rng.uniform(np.log(0.05), np.log(20.0), size=(batch, 1)))
        lam = 1.0 + scale * rng.standard_normal((batch, n))
        inside, _ = in_cone(lam, cone)
        good = lam[inside]
        rejected = lam[~inside]
        n_bdry = min(int(boundary_fraction * need), len(rejected))
        if n_bdry:
            good = np.vstack([good, _toward_boundary(rejected[:n_bdry], cone, rng)])
        good = good[: need]
        out.append(good)
        need -= len(good)
    pts = np.vstack(out)
    return pts[rng.permutation(len(pts))]


def _toward_boundary(outside, cone, rng):
    # bisect on the segment from 1 (inside) to an outside point
    lo = np.zeros(len(outside))
    hi = np.ones(len(outside))
    ones = np.ones(cone.n)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        inside, _ = in_cone(ones + mid[:, None] * (outside - ones), cone)
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    frac = lo * (1.0 - 10.0 ** rng.uniform(-6, -1, size=len(lo)))
    return ones + frac[:, None] * (outside - ones)


@dataclass
class CheckReport:
    passed: bool
    samples: int
    worst_margin: float
    violations: int = 0
    witness: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "passed": bool(self.passed),
            "samples": int(self.samples),
            "worst_margin": float(self.worst_margin),
            "violations": int(self.violations),
        }
        if self.witness is not None:
            out["witness"] = np.asarray(self.witness).tolist()
        out.update(self.details)
        return out


def check_partial_ellipticity(
    op: CurvatureOperator,
    samples: int,
    tau0: float | None = None,
    seed: int = 0,
    vartheta: float | None = None,
    kappa: int | None = None,
) -> CheckReport:
    """Sampled check of f_i >= vartheta * sum_j f_j (ascending lam).

    The inequality is checked for i <= kappa + 1 and wherever lam_i <= 0.  If
    ``tau0`` is given each sample is rescaled so that f(lam) <= tau0.  The
    worst margin is min(f_i / sum f - vartheta) over the checked entries.
    """
    if samples < 1:
        raise DomainError("samples must be positive")
    rng = np.random.default_rng(seed)
    cone = op.cone
    if kappa is None:
        kappa, _ = kappa_of_cone(cone)
    if vartheta is None:
        vartheta, _ = vartheta_of_cone(cone, kappa)
    lam = np.sort(sample_cone(cone, samples, rng), axis=1)
    lam = lam[strictly_admissible(lam, cone)]
    if tau0 is not None:
        fv = op.value(lam)
        shrink = np.minimum(1.0, tau0 * rng.uniform(0.01, 1.0, len(lam)) / fv)
        lam = lam * shrink[:, None] ** (1.0 / op.gamma)
    grad = op.gradient(lam, check=False)
    share = grad / grad.sum(axis=1, keepdims=True)
    mask = np.zeros_like(share, dtype=bool)
    mask[:, : kappa + 1] = True
    mask |= lam <= 0.0
    slack = np.where(mask, share - vartheta, np.inf)
    # relative rounding allowance on the share
    bad = slack < -1e-12
    worst_row = int(np.argmin(slack.min(axis=1)))
    worst = float(slack[worst_row].min())
    nbad = int(np.any(bad, axis=1).sum())
    witness = lam[int(np.flatnonzero(np.any(bad, axis=1))[0])] if nbad else lam[worst_row]
    return CheckReport(
        passed=nbad == 0,
        samples=len(lam),
        worst_margin=worst,
        violations=nbad,
        witness=witness,
        details={"kappa": int(kappa), "vartheta": float(vartheta)},
    )


def check_positivity_pairing(op: CurvatureOperator, tau0: float, samples: int, seed: int = 0) -> CheckReport:
    """Sampled check of sum_i f_i(lam) mu_i > 0 for f(lam) <= tau0, mu in the cone."""
    sup_boundary = 0.0  # f vanishes on the cone boundary
    if not tau0 > sup_boundary:
        raise DomainError(f"tau0={tau0} must exceed sup of f on the boundary ({sup_boundary})")
    rng = np.random.default_rng(seed)
    cone = op.cone
    lam = sample_cone(cone, samples, rng)
    lam = lam[strictly_admissible(lam, cone)]
    fv = op.value(lam)
    shrink = np.minimum(1.0, tau0 * rng.uniform(0.01, 1.0, len(lam)) / fv)
    lam = lam * shrink[:, None] ** (1.0 / op.gamma)
    mu = sample_cone(cone, len(lam), rng)
    grad = op.gradient(lam, check=False)
    norm = np.abs(grad).sum(axis=1) * np.abs(mu).max(axis=1)
    pair = (grad * mu).sum(axis=1) / norm
    euler = (grad * lam).sum(axis=1)
    bad = (pair <= 0.0) | (euler <= 0.0)
    worst = int(np.argmin(pair))
    nbad = int(bad.sum())
    i = int(np.flatnonzero(bad)[0]) if nbad else worst
    return CheckReport(
        passed=nbad == 0,
        samples=len(lam),
        worst_margin=float(pair[worst]),
        violations=nbad,
        witness=np.vstack([lam[i], mu[i]]),
        details={"min_euler": float(euler.min()), "tau0": float(tau0)},
    )


@dataclass(frozen=True)
class TauAlphaCheck:
    admissible: bool
    sign_positive: bool
    threshold: float

    def __bool__(self):
        return self.admissible


def validate_tau_alpha(tau: float, alpha: int, cone: ConeSpec, kappa_vartheta: float | None = None) -> TauAlphaCheck:
    """tau < 1 for alpha = -1; tau > 1 + (n-2)(1 - kappa*vartheta) for alpha = 1.

    When admissible, alpha*(n*tau + 2 - 2n) > 0 follows; it is recomputed and
    reported as ``sign_positive``.
    """
    if alpha not in (-1, 1):
        raise DomainError(f"alpha must be +1 or -1, got {alpha}")
    n = cone.n
    if kappa_vartheta is None:
        c = ellipticity_constants(cone)
        kappa_vartheta = c.kappa * c.vartheta
    threshold = 1.0 if alpha == -1 else 1.0 + (n - 2) * (1.0 - kappa_vartheta)
    ok = tau < threshold if alpha == -1 else tau > threshold
    sign = alpha * (n * tau + 2 - 2 * n) > 0
    if ok and not sign:
        raise AssertionError(f"admissible (tau, alpha)=({tau}, {alpha}) with alpha(n tau + 2 - 2n) <= 0")
    return TauAlphaCheck(admissible=bool(ok), sign_positive=bool(sign), threshold=float(threshold))
