"""Scenario driver: ``confcurv --scenario file.json --out dir``.

A scenario file holds one JSON object (or a list of them for a batch).
Each run writes a CSV table next to a deterministic ``manifest.json``;
wall-clock data goes to a separate ``timing.json``.

Exit status::

    0  every check passed
    1  some check failed
    2  invalid scenario, nothing written
    3  solver failure, diagnostic manifest written
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .barriers import (
    certify_completeness,
    certify_lower_collar,
    certify_upper_collar,
    euclidean_subsolution_certificate,
)
from .conformal import ModelGeometry, RadialProfile, SchoutenParams, poincare
from .errors import AdmissibilityError, DomainError, ParameterError, SolverError
from .exhaustion import (
    ExhaustionSpec,
    check_completeness,
    check_lower_bound,
    check_monotone_upper,
    run_exhaustion,
)
from .grids import GridSpec
from .radial_pde import DirichletSpec, EquationParams, Psi, Tolerances, assemble_V_eigen, solve
from .symfunc import (
    ConeSpec,
    CurvatureOperator,
    check_partial_ellipticity,
    check_positivity_pairing,
    ellipticity_constants,
    in_cone,
    validate_tau_alpha,
)

MODES = ("cones", "ellipticity", "solve", "exhaust", "barriers")

REQUIRED = {
    "cones": ["name", "mode", "n"],
    "ellipticity": ["name", "mode", "n", "operator"],
    "solve": ["name", "mode", "n", "operator", "domain", "psi"],
    "exhaust": ["name", "mode", "n", "operator", "schouten", "psi", "subsolution", "exhaustion"],
    "barriers": ["name", "mode", "n", "operator", "psi"],
}


class ScenarioError(ValueError):
    pass


def _fmt(x) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# validation


def resolve(raw: dict) -> dict:
    """Fill defaults and validate cross-field constraints; returns a new dict."""
    if not isinstance(raw, dict) or not raw:
        raise ScenarioError("empty scenario: missing fields name, mode, n")
    mode = raw.get("mode")
    if mode not in MODES:
        missing = [f for f in ("name", "mode", "n") if f not in raw]
        if missing:
            raise ScenarioError("missing fields: " + ", ".join(missing))
        raise ScenarioError(f"mode must be one of {', '.join(MODES)}; got {mode!r}")
    missing = [f for f in REQUIRED[mode] if f not in raw]
    if mode in ("solve", "barriers") and "schouten" not in raw and "coefficients" not in raw:
        missing.append("schouten or coefficients")
    if missing:
        raise ScenarioError("missing fields: " + ", ".join(missing))
    sc = json.loads(json.dumps(raw))
    n = sc["n"]
    if not isinstance(n, int) or n < 2:
        raise ScenarioError("n must be an integer >= 2")
    sc.setdefault("seed", 0)
    if mode == "cones":
        return sc
    op = sc["operator"]
    op.setdefault("l", 0)
    op.setdefault("gamma", 1.0)
    op.setdefault("transform", None)
    if "k" not in op:
        raise ScenarioError("missing fields: operator.k")
    try:
        operator = CurvatureOperator(n, op["k"], op["l"], op["gamma"], op["transform"])
    except DomainError as exc:
        raise ScenarioError(f"operator: {exc}") from None
    if mode == "ellipticity":
        ch = sc.setdefault("checks", {})
        ch.setdefault("samples", 10000)
        ch.setdefault("tau0", 1.0)
        return sc
    if "schouten" in sc:
        s = sc["schouten"]
        if "tau" not in s or "alpha" not in s:
            raise ScenarioError("missing fields: schouten.tau, schouten.alpha")
        if n < 3:
            raise ScenarioError("the modified Schouten tensor needs n >= 3")
        chk = validate_tau_alpha(s["tau"], s["alpha"], operator.cone)
        if not chk:
            rel = "<" if s["alpha"] == -1 else ">"
            raise ScenarioError(
                f"(tau, alpha) = ({s['tau']}, {s['alpha']}) violates the admissibility restriction: "
                f"need tau {rel} {chk.threshold:.6g} for alpha = {s['alpha']}"
            )
    else:
        co = sc["coefficients"]
        for key, default in (("varrho", 0.0), ("a", 0.0), ("b", 0.0), ("c", 0.0), ("gamma", 1.0)):
            co.setdefault(key, default)
        co.setdefault("L", [0.0, 0.0])
        co.setdefault("A", [0.0, 0.0])
    params = build_params(sc)
    try:
        params.check_ellipticity()
    except ParameterError as exc:
        raise ScenarioError(f"ellipticity: {exc}") from None
    if not any(params.barrier_compatible(b) for b in (2.0, 1.0, 0.5, 0.25, 0.125, 0.0625)):
        raise ScenarioError(
            "barrier compatibility fails: need 1/beta + a > 0 and (b - rho/beta >= 0 or a + b + (1-rho)/beta > 0) "
            "for some beta in [1/16, 2]; adjust the coefficients"
        )
    try:
        Psi.from_dict(sc["psi"])
    except (KeyError, DomainError) as exc:
        raise ScenarioError(f"psi: {exc}") from None
    tol = sc.setdefault("tolerances", {})
    tol.setdefault("atol", 1e-10)
    tol.setdefault("max_iter", 200)
    if mode == "solve":
        d = sc["domain"]
        d.setdefault("r0", 0.0)
        d.setdefault("base", "flat")
        d.setdefault("phi_inner", None)
        for f in ("r1", "phi"):
            if f not in d:
                raise ScenarioError(f"missing fields: domain.{f}")
        g = sc.setdefault("grid", {})
        g.setdefault("nodes", 200)
        g.setdefault("law", "uniform")
        g.setdefault("stretch", 4.5)
        sc.setdefault("oracle", None)
        sc.setdefault("initial", None)
    elif mode == "exhaust":
        ex = sc["exhaustion"]
        if "radii" not in ex:
            raise ScenarioError("missing fields: exhaustion.radii")
        ex.setdefault("normalize_subsolution", True)
        ex.setdefault("density", 120.0)
        ex.setdefault("ctol", 1e-6)
        ex.setdefault("check_tol", 1e-6)
        sub = sc["subsolution"]
        if sub.get("kind") != "beta_log" or "beta" not in sub:
            raise ScenarioError("subsolution must be {\"kind\": \"beta_log\", \"beta\": <float>}")
    elif mode == "barriers":
        b = sc.setdefault("barriers", {})
        b.setdefault("kinds", ["lower_collar", "upper_collar", "completeness"])
        b.setdefault("radius", 1.0)
        b.setdefault("phi", 0.0)
    return sc


def build_params(sc: dict) -> EquationParams:
    n = sc["n"]
    op = sc["operator"]
    operator = CurvatureOperator(n, op["k"], op.get("l", 0), op.get("gamma", 1.0), op.get("transform"))
    if "schouten" in sc:
        return EquationParams.from_schouten(operator, SchoutenParams(sc["schouten"]["tau"], sc["schouten"]["alpha"], n))
    co = sc["coefficients"]
    return EquationParams(operator, co["varrho"], co["a"], co["b"], co["c"], tuple(co["L"]), co["gamma"], tuple(co["A"]))


# ---------------------------------------------------------------------------
# runners


def _write_profile(path: Path, prof: RadialProfile, params: EquationParams, base):
    eig = assemble_V_eigen(prof, params, base)
    lam = eig.full()
    S = params.scale
    fv = np.full(len(lam), np.nan)
    inside, margin = in_cone(lam, params.operator.cone)
    if np.any(inside):
        fv[inside] = S ** params.operator.gamma * params.operator.value(lam[inside], check=False)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u", "lambda_t", "lambda_r", "f", "margin"])
        for i in range(len(prof.radii)):
            w.writerow([_fmt(prof.radii[i]), _fmt(prof.u[i]), _fmt(S * eig.tangential[i]), _fmt(S * eig.radial[i]),
                        _fmt(fv[i]), _fmt(margin[i])])


def run_cones(sc, out: Path):
    n = sc["n"]
    rows, checks = [], {}
    with (out / "cones.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "kappa", "vartheta"])
        for k in range(1, n + 1):
            c = ellipticity_constants(ConeSpec(n, k))
            w.writerow([k, c.kappa, _fmt(c.vartheta)])
            rows.append({"k": k, "kappa": c.kappa, "vartheta": c.vartheta})
            checks[f"kappa_Gamma_{k}"] = c.kappa == n - k
    return {"cones": rows}, checks, ["cones.csv"]


def run_ellipticity(sc, out: Path):
    n, op = sc["n"], sc["operator"]
    operator = CurvatureOperator(n, op["k"], op["l"], op["gamma"], op["transform"])
    ch = sc["checks"]
    pe = check_partial_ellipticity(operator, ch["samples"], tau0=ch["tau0"], seed=sc["seed"])
    pp = check_positivity_pairing(operator, ch["tau0"], ch["samples"], seed=sc["seed"])
    return ({"partial_ellipticity": pe.summary(), "positivity_pairing": pp.summary()},
            {"partial_ellipticity": pe.passed, "positivity_pairing": pp.passed}, [])


def run_solve(sc, out: Path):
    params = build_params(sc)
    d = sc["domain"]
    base = ModelGeometry.named(d["base"])
    g = sc["grid"]
    spec = DirichletSpec(d["r1"], d["phi"], Psi.from_dict(sc["psi"]), GridSpec(g["nodes"], g["law"], g["stretch"]),
                         d["r0"], d["phi_inner"], base)
    tol = Tolerances(atol=sc["tolerances"]["atol"], max_iter=sc["tolerances"]["max_iter"])
    prof, rep = solve(params, spec, tolerances=tol)
    _write_profile(out / "profile.csv", prof, params, base)
    results = {"report": rep.summary()}
    checks = {"converged": rep.converged}
    if sc.get("oracle") == "poincare":
        err = float(np.abs(prof.u - poincare(1.0)[0](prof.radii)).max())
        results["oracle_sup_error"] = err
        checks["oracle"] = err <= sc.get("oracle_tol", 5e-4)
    return results, checks, ["profile.csv"]


def run_exhaust(sc, out: Path, workers=1):
    params = build_params(sc)
    ex = sc["exhaustion"]
    spec = ExhaustionSpec(params, Psi.from_dict(sc["psi"]), tuple(ex["radii"]), float(sc["subsolution"]["beta"]),
                          Lambda1=ex.get("Lambda1"), normalize_subsolution=ex["normalize_subsolution"],
                          density=ex["density"], ctol=ex["ctol"], check_tol=ex["check_tol"])
    res = run_exhaustion(spec, workers=workers)
    mono = check_monotone_upper(res)
    low = check_lower_bound(res)
    comp = check_completeness(res.limit, "Rn", levels=list(ex["radii"]))
    _write_profile(out / "profile.csv", res.limit, params, ModelGeometry.named("flat"))
    results = {
        "Lambda1": res.Lambda1,
        "boundary_shift": res.shift,
        "increments": res.increments.tolist(),
        "converged": res.converged,
        "monotone_upper": mono.summary(),
        "lower_bound": low.summary(),
        "completeness": comp.summary(),
        "iterations": [r.iterations for r in res.reports],
    }
    checks = {"converged": res.converged, "monotone_upper": mono.passed, "lower_bound": low.passed,
              "completeness": comp.passed}
    return results, checks, ["profile.csv"]


def run_barriers(sc, out: Path):
    params = build_params(sc)
    psi = Psi.from_dict(sc["psi"])
    b = sc["barriers"]
    certs = {}
    for kind in b["kinds"]:
        if kind == "lower_collar":
            certs[kind] = certify_lower_collar(params, psi, b["phi"], b["radius"])
        elif kind == "upper_collar":
            certs[kind] = certify_upper_collar(params, b["phi"], b["radius"])
        elif kind == "completeness":
            certs[kind] = certify_completeness(params, psi, radius=b["radius"])
        elif kind == "euclidean_subsolution":
            tensor = params.schouten if params.schouten is not None else "ricci"
            certs[kind] = euclidean_subsolution_certificate(b.get("beta", 0.125), tensor, params.operator, psi,
                                                             power=b.get("power", 1.0))
        else:
            raise ScenarioError(f"unknown barrier kind {kind!r}")
    return {k: c.to_dict() for k, c in certs.items()}, {k: c.passed for k, c in certs.items()}, []


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _dump(path: Path, obj):
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def run(scenario: dict, out: Path, seed: int | None = None, workers: int = 1) -> int:
    """Validate and run one scenario; returns the exit status."""
    raw = dict(scenario) if isinstance(scenario, dict) else scenario
    if seed is not None and isinstance(raw, dict):
        raw["seed"] = int(seed)
    try:
        sc = resolve(raw)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    manifest = {"version": __version__, "scenario": sc}
    try:
        mode = sc["mode"]
        if mode == "cones":
            results, checks, files = run_cones(sc, out)
        elif mode == "ellipticity":
            results, checks, files = run_ellipticity(sc, out)
        elif mode == "solve":
            results, checks, files = run_solve(sc, out)
        elif mode == "exhaust":
            results, checks, files = run_exhaust(sc, out, workers)
        else:
            results, checks, files = run_barriers(sc, out)
    except (SolverError, AdmissibilityError, ParameterError, DomainError) as exc:
        manifest["status"] = "error"
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc)}
        rep = getattr(exc, "report", None)
        if rep is not None:
            manifest["error"]["report"] = rep.summary()
        _dump(out / "manifest.json", manifest)
        _dump(out / "timing.json", {"seconds": time.perf_counter() - t0})
        print(f"{sc['name']}: solver failure: {exc}", file=sys.stderr)
        return 3
    ok = all(bool(v) for v in checks.values())
    manifest.update({"results": results, "checks": checks, "outputs": files, "status": "pass" if ok else "fail"})
    _dump(out / "manifest.json", manifest)
    _dump(out / "timing.json", {"seconds": time.perf_counter() - t0})
    print(f"{sc['name']}: {'pass' if ok else 'fail'}")
    return 0 if ok else 1


def _run_one(args):
    sc, out, seed = args
    return run(sc, out, seed)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="confcurv", description="Prescribed-curvature scenarios on model geometries.")
    ap.add_argument("--scenario", required=True, help="JSON scenario file (object or list)")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    ap.add_argument("--parallel", type=int, default=1, help="worker processes for batch files")
    args = ap.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("invalid scenario: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        data = json.loads(Path(args.scenario).read_text() or "{}")
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return 2
    if isinstance(data, list):
        jobs = [(sc, Path(args.out) / str(sc.get("name", f"scenario_{i}")), args.seed) for i, sc in enumerate(data)]
        if args.parallel > 1:
            with ProcessPoolExecutor(max_workers=args.parallel) as pool:
                codes = list(pool.map(_run_one, jobs))
        else:
            codes = [_run_one(j) for j in jobs]
        return max(codes) if codes else 0
    return run(data, Path(args.out), args.seed)


if __name__ == "__main__":
    sys.exit(main())
