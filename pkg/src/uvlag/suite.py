"""Check registry and the batch runner behind ``uvlag run``."""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import sampling
from .certificate import jsonable
from .certify import (ball_inclusion_check, certify_function_prox_regularity,
                      certify_localization_monotonicity, certify_perturbation,
                      certify_product_set, certify_set_prox_regularity,
                      check_manifold_assumptions, estimate_W_lipschitz)
from .errors import EpsilonTooLarge, InvariantViolation, UvlagError
from .fasttrack import (build_manifold_model, c1_fast_track_battery, check_smooth_selection,
                        explicit_manifold, inner_semicontinuity_check,
                        partial_smoothness_battery, symmetric_grid, trace_fast_track)
from .funcmodel import CATALOG, Problem
from .polytope import span_of_differences, subspace_gap
from .sets import set_catalog
from .ulag import (dense_grid_oracle, grad_L_at_zero, inner_minimize,
                   quadratic_lower_bound_check, radius_u, sample_gbars, sample_tilts,
                   solver_settings, tilt_map, default_eps, default_gbar)
from .uvframe import UVFrame, build_frame, gu_constancy, u_prime_crosscheck

SCHEMA_ID = "uvlag-report/1"

# Closed-form fast tracks, in V-coordinates, used as oracles for the trace.
CLOSED_FORM_TRACKS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "P1": lambda u: np.zeros(1),
    "P6": lambda u: np.array([u[0] ** 2]),
}
# Problems whose quadratic lower bound is attained with equality.
QLB_EQUALITY = {"P2"}
# (problem, chart) pairs that must fail, with the failing parts.
EXPECTED_PS_FAILURES = {("P6", "flat"): ["iv"]}
W_BOUND = 0.41
FASTTRACK_RADIUS = 0.2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problems: list[str]
    checks: list[str]
    eps: float | None = None
    eps_bar: float | None = None
    rho: float | None = None
    grid_n: int | None = None
    samples: int | None = None
    seed: int = 0
    out: str | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out")
        return d


@dataclass
class Outcome:
    passed: bool
    max_violation: float
    tolerance: float
    parameters: dict = field(default_factory=dict)
    witness: dict | None = None
    details: dict = field(default_factory=dict)
    expected: str = "pass"
    expected_parts: list[str] | None = None
    failing_parts: list[str] | None = None

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    @property
    def as_expected(self) -> bool:
        if self.verdict != self.expected:
            return False
        if self.expected_parts is not None:
            return sorted(self.failing_parts or []) == sorted(self.expected_parts)
        return True


def _from_cert(cert, expected: str = "pass", **params) -> Outcome:
    return Outcome(cert.passed, cert.max_violation, cert.tolerance,
                   {**cert.parameters, **params}, cert.witness,
                   {"label": cert.label, "n_checked": cert.n_checked,
                    "n_skipped": cert.n_skipped, **cert.details}, expected)


def _from_battery(b, expected: str = "pass", expected_parts=None, **params) -> Outcome:
    return Outcome(b.passed, b.max_violation, 0.0, params, b.witness,
                   {"parts": {k: p.to_dict() for k, p in b.parts.items()}}, expected,
                   expected_parts, b.failing)


def _bounded(value: float, tol: float, witness: dict | None, **details) -> Outcome:
    ok = bool(value <= tol)
    return Outcome(ok, float(value), tol, witness=None if ok else witness, details=details)


@dataclass
class Context:
    config: RunConfig
    problem: Problem
    frame: UVFrame
    eps: float
    gbars: list[np.ndarray]

    @property
    def seed(self) -> int:
        return self.config.seed

    def samples(self, default: int) -> int:
        return self.config.samples or default


def make_context(config: RunConfig, name: str) -> Context:
    problem = CATALOG[name]
    if config.eps_bar is not None:
        problem = dataclasses.replace(problem, known_eps_bar=config.eps_bar)
    frame = build_frame(problem)
    if config.eps is None:
        eps = default_eps(problem, frame)
    else:
        eps = config.eps
        if not 0 < eps < problem.known_eps_bar:
            raise ConfigError(f"eps={eps} must lie in (0, eps_bar={problem.known_eps_bar})")
    try:
        gbars = sample_gbars(frame, eps, 3, config.seed)
    except EpsilonTooLarge as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return Context(config, problem, frame, eps, gbars)


# ---------------------------------------------------------------------------
# per-problem checks

def check_ulag_core(ctx: Context) -> list[Outcome]:
    fb = ctx.problem.f_bar
    worst, witness, rows = 0.0, None, []
    for g in ctx.gbars:
        ev = inner_minimize(ctx.problem, ctx.frame, np.zeros(ctx.frame.m), g, ctx.eps)
        err = abs(ev.value - fb)
        diam = max(ev.diameters)
        rows.append({"gbar": g, "L0": ev.value, "clusters": len(ev.minimizers),
                     "diameter": diam})
        bad = err > 1e-9 or not ev.single_cluster or diam > 1e-6
        worst = max(worst, err)
        if bad and witness is None:
            witness = rows[-1]
            worst = max(worst, math.inf if not ev.single_cluster else 1.0)
    out = _bounded(worst, 1e-9, witness, samples=rows)
    out.parameters = {"eps": ctx.eps, "f_bar": fb}
    return [out]


def check_grad0(ctx: Context) -> list[Outcome]:
    worst, witness, rows = 0.0, None, []
    for g in ctx.gbars:
        grad = grad_L_at_zero(ctx.problem, ctx.frame, g, ctx.eps)
        gu = ctx.frame.u_coords(g)
        err = float(np.linalg.norm(grad - gu)) / (1 + float(np.linalg.norm(g)))
        rows.append({"gbar": g, "fd_grad": grad, "g_u": gu, "scaled_error": err})
        if err > worst:
            worst, witness = err, rows[-1]
    out = _bounded(worst, 1e-5, witness, samples=rows)
    out.parameters = {"eps": ctx.eps, "fd_step": 1e-5}
    return [out]


def check_qlb(ctx: Context) -> list[Outcome]:
    cert = quadratic_lower_bound_check(ctx.problem, ctx.frame, ctx.gbars[0], ctx.eps,
                                       samples=ctx.samples(1000), seed=ctx.seed)
    out = _from_cert(cert)
    if ctx.problem.name in QLB_EQUALITY:
        eq = cert.details["max_abs_slack"]
        out.details["equality_case"] = eq
        if eq > 1e-8:
            out.passed = False
            out.max_violation = max(out.max_violation, eq)
            out.witness = {"max_abs_slack": eq}
    return [out]


def check_oracle_equiv(ctx: Context, n_instances: int = 4) -> list[Outcome]:
    rng = np.random.default_rng(ctx.seed)
    r = radius_u(ctx.problem, ctx.eps)
    worst, witness, rows = 0.0, None, []
    for k in range(n_instances):
        eps = float(ctx.eps * rng.uniform(0.5, 1.0))
        g = sample_gbars(ctx.frame, eps, 3, ctx.seed + k)[1 + k % 2]
        u = sampling.ball(1, ctx.frame.m, 0.5 * r, ctx.seed + k)[0] if ctx.frame.m \
            else np.zeros(0)
        fast = inner_minimize(ctx.problem, ctx.frame, u, g, eps).value
        dense = dense_grid_oracle(ctx.problem, ctx.frame, u, g, eps)
        err = abs(fast - dense)
        rows.append({"u": u, "gbar": g, "eps": eps, "refined": fast, "dense": dense,
                     "error": err})
        if err > worst:
            worst, witness = err, rows[-1]
    out = _bounded(worst, 1e-6, witness, instances=rows)
    out.parameters = {"instances": n_instances, "dense_n": 2001}
    return [out]


def check_uv_geometry(ctx: Context, n_choices: int = 10) -> list[Outcome]:
    problem, frame = ctx.problem, ctx.frame
    gens = frame.subdiff.generators
    rng = np.random.default_rng(ctx.seed)
    choices = [gens[i % len(gens)] if i < len(gens)
               else rng.dirichlet(np.ones(len(gens))) @ gens for i in range(n_choices)]
    v_gap = max(subspace_gap(span_of_differences(frame.subdiff, gt), frame.V)
                for gt in choices)
    spread = gu_constancy(problem, frame)
    witness = None
    try:
        u_prime_crosscheck(problem, frame, ctx.eps, seed=ctx.seed)
        cross = 0.0
    except InvariantViolation as exc:
        cross = math.inf
        witness = {"message": str(exc), **exc.payload}
    value = max(v_gap / 1e-8, spread / 1e-10, cross)
    if witness is None and value > 1:
        witness = {"v_gap": v_gap, "gu_spread": spread}
    out = _bounded(value, 1.0, witness, v_gap=v_gap, gu_spread=spread,
                   U=frame.U.to_dict(), V=frame.V.to_dict())
    out.parameters = {"gtilde_choices": n_choices, "eps": ctx.eps,
                      "scale": "max(v_gap/1e-8, gu_spread/1e-10)"}
    return [out]


def check_proxreg(ctx: Context) -> list[Outcome]:
    p = ctx.problem
    gbar = default_gbar(ctx.frame, ctx.eps)
    if ctx.config.rho is not None:
        rhos = [ctx.config.rho]
    else:
        rhos = [p.known_rho] + ([0.5 * p.known_rho] if p.known_rho > 0 else [])
    out = []
    for rho in rhos:
        cert = certify_function_prox_regularity(p, gbar, p.known_eps_bar, rho,
                                                n_samples=ctx.samples(10_000), seed=ctx.seed)
        out.append(_from_cert(cert, "pass" if rho >= p.known_rho else "fail"))
    return out


def check_tilt(ctx: Context, n_tilts: int = 20) -> list[Outcome]:
    gbar = ctx.gbars[0]
    worst, witness, rows = 0.0, None, []
    for s in sample_tilts(ctx.frame, gbar, ctx.eps, n_tilts, ctx.seed):
        ts = tilt_map(ctx.problem, ctx.frame, gbar, ctx.eps, s)
        dist0 = float(np.linalg.norm(ts.minimizers[0])) if ts.minimizers[0].size else 0.0
        clusters = len(ts.minimizers)
        value = max(ts.diameter, dist0) if clusters == 1 else math.inf
        rows.append({"s": s, "clusters": clusters, "diameter": ts.diameter,
                     "distance_to_0": dist0})
        if value > worst:
            worst, witness = value, rows[-1]
    out = _bounded(worst, 1e-6, witness, tilts=rows)
    out.parameters = {"tilts": n_tilts, "eps": ctx.eps}
    return [out]


def _fasttrack_applicable(ctx: Context) -> bool:
    return ctx.problem.is_local_min


def check_fasttrack(ctx: Context) -> list[Outcome]:
    if not _fasttrack_applicable(ctx):
        return []
    p, frame = ctx.problem, ctx.frame
    grid = symmetric_grid(frame, FASTTRACK_RADIUS)
    trace = trace_fast_track(p, frame, ctx.eps, grid, ctx.gbars)
    sel = check_smooth_selection(trace)
    model = build_manifold_model(p, frame, ctx.eps, ctx.gbars[0])
    tgap = subspace_gap(model.tangent, frame.U)
    c1 = c1_fast_track_battery(p, frame, ctx.eps, trace)
    parts = {"selection": sel.passed, "c1": c1.passed,
             "tangent": tgap <= 1e-4, "spread": trace.selection_spread <= 1e-6}
    details = {"smooth_selection": sel.to_dict(), "c1": c1.to_dict(), "tangent_gap": tgap,
               "selection_spread": trace.selection_spread, "u_grid": trace.u_grid,
               "v_of_u": trace.v_of_u}
    closed = CLOSED_FORM_TRACKS.get(p.name)
    if closed is not None:
        dev = float(max(np.linalg.norm(v - closed(u)) for u, v in zip(trace.u_grid,
                                                                       trace.v_of_u)))
        details["closed_form_deviation"] = dev
        parts["closed_form"] = dev <= 1e-6
    failing = [k for k, ok in parts.items() if not ok]
    witness = {"failing": failing} if failing else None
    return [Outcome(not failing, float(len(failing)), 0.0,
                    {"eps": ctx.eps, "radius": FASTTRACK_RADIUS, "grid": len(grid)},
                    witness, details, failing_parts=failing)]


def check_partial_smoothness(ctx: Context) -> list[Outcome]:
    if not _fasttrack_applicable(ctx):
        return []
    p, frame = ctx.problem, ctx.frame
    charts = {"fast-track": build_manifold_model(p, frame, ctx.eps, ctx.gbars[0]),
              "flat": explicit_manifold(frame, label="flat")}
    out = []
    for label, model in charts.items():
        battery = partial_smoothness_battery(p, model, (FASTTRACK_RADIUS,), eps=ctx.eps)
        parts = EXPECTED_PS_FAILURES.get((p.name, label))
        out.append(_from_battery(battery, "fail" if parts else "pass", parts,
                                 chart=label, eps=ctx.eps, radius=FASTTRACK_RADIUS))
    return out


def check_inner_semicontinuity(ctx: Context) -> list[Outcome]:
    if not _fasttrack_applicable(ctx):
        return []
    model = build_manifold_model(ctx.problem, ctx.frame, ctx.eps, ctx.gbars[0])
    cert = inner_semicontinuity_check(ctx.problem, model, eps=ctx.eps)
    return [_from_cert(cert, chart="fast-track")]


def check_manifold(ctx: Context) -> list[Outcome]:
    if not _fasttrack_applicable(ctx):
        return []
    model = build_manifold_model(ctx.problem, ctx.frame, ctx.eps, ctx.gbars[0])
    certs = check_manifold_assumptions(ctx.problem, model, ctx.eps, (FASTTRACK_RADIUS,))
    failing = [k for k, c in certs.items() if not c.passed]
    witness = {k: certs[k].witness for k in failing} or None
    value = max(c.max_violation - c.tolerance for c in certs.values())
    return [Outcome(not failing, value, 0.0, {"eps": ctx.eps, "radius": FASTTRACK_RADIUS},
                    witness, {k: c.to_dict() for k, c in certs.items()},
                    failing_parts=failing)]


def _w_grid(frame: UVFrame, radius: float) -> np.ndarray:
    if frame.m == 0:
        return np.zeros((1, 0))
    axis = np.linspace(-radius, radius, 9 if frame.m == 1 else 5)
    mesh = np.stack(np.meshgrid(*[axis] * frame.m, indexing="ij"), -1).reshape(-1, frame.m)
    return mesh[np.linalg.norm(mesh, axis=1) <= radius + 1e-12]


def check_w_lipschitz(ctx: Context) -> list[Outcome]:
    cert = estimate_W_lipschitz(ctx.problem, ctx.frame, ctx.gbars[0], ctx.eps,
                                _w_grid(ctx.frame, FASTTRACK_RADIUS), bound=W_BOUND)
    return [_from_cert(cert)]


def check_monotonicity(ctx: Context) -> list[Outcome]:
    w = estimate_W_lipschitz(ctx.problem, ctx.frame, ctx.gbars[0], ctx.eps,
                             _w_grid(ctx.frame, FASTTRACK_RADIUS))
    c = w.details["c"]
    rho_hat = ctx.problem.theorem_rho * (1 + c * c) * 1.1
    cert = certify_localization_monotonicity(ctx.problem, ctx.frame, ctx.gbars[0], ctx.eps,
                                             rho_hat, seed=ctx.seed)
    return [_from_cert(cert, c_estimate=c)]


# ---------------------------------------------------------------------------
# problem-independent checks

def check_sets(config: RunConfig) -> list[Outcome]:
    cat = set_catalog()
    n = config.samples or 2000
    seed = config.seed
    cases = [
        ("half-space", (0, 0), (0, 0.5), 0.5, 0.0, "pass"),
        ("box", (0, 0), (-0.5, -0.5), 0.5, 0.0, "pass"),
        ("parabola-epigraph", (0, 0), (0, -0.5), 0.5, 0.0, "pass"),
        ("disk-complement", (1, 0), (-1, 0), 0.5, 1.5, "pass"),
        ("disk-complement", (1, 0), (-1, 0), 0.5, 1.0, "fail"),
    ]
    out = []
    for name, xb, wb, eps, rho, expected in cases:
        cert = certify_set_prox_regularity(cat[name], xb, wb, eps, rho, n, seed=seed)
        out.append(_from_cert(cert, expected, case=name))
    prod = certify_product_set(cat["box"], cat["half-space"], ((0, 0), (0, 0)),
                               ((-0.5, -0.5), (0, 0.5)), 0.5, 0.0, n, seed=seed)
    out.append(_from_cert(prod, case="product box x half-space"))
    pert = certify_perturbation(cat["disk-complement"], (1, 0), (-1, 0), 0.5, 1.5, 0.2,
                                n_samples=max(1, n // 2), seed=seed)
    out.append(_from_cert(pert, case="perturbed disk-complement"))
    ball = ball_inclusion_check(np.zeros(2), 1.0, 0.4, n_samples=config.samples or 10_000,
                                seed=seed)
    out.append(_from_cert(ball, case="ball inclusion"))
    return out


@dataclass(frozen=True)
class CheckSpec:
    id: str
    anchor: str
    run: Callable
    per_problem: bool = True


REGISTRY: dict[str, CheckSpec] = {c.id: c for c in [
    CheckSpec("fasttrack", "fast track: smooth common minimizer selection and its manifold",
              check_fasttrack),
    CheckSpec("grad0", "strict differentiability of the U-Lagrangian at 0", check_grad0),
    CheckSpec("inner-semicontinuity", "inner semicontinuity of df relative to the manifold",
              check_inner_semicontinuity),
    CheckSpec("monotonicity", "hypomonotonicity of the localized U-Lagrangian subgradients",
              check_monotonicity),
    CheckSpec("oracle-equiv", "plumbing", check_oracle_equiv),
    CheckSpec("partial-smoothness", "partial smoothness relative to the manifold",
              check_partial_smoothness),
    CheckSpec("proxreg", "prox-regularity of f at (x_bar, g_bar)", check_proxreg),
    CheckSpec("qlb", "quadratic lower bound of the U-Lagrangian", check_qlb),
    CheckSpec("manifold-assumptions", "regularity, interior selection and boundary-subgradient "
                                      "assumptions along the manifold", check_manifold),
    CheckSpec("sets", "prox-regularity of sets, products and perturbations; ball inclusion",
              check_sets, per_problem=False),
    CheckSpec("tilt", "tilt stability of the V-minimizers", check_tilt),
    CheckSpec("ulag-core", "base-point identity of the U-Lagrangian", check_ulag_core),
    CheckSpec("uv-geometry", "UV-decomposition and its equivalent characterizations",
              check_uv_geometry),
    CheckSpec("w-lipschitz", "Lipschitz dependence of the minimizer set on u",
              check_w_lipschitz),
]}


def _record(spec: CheckSpec, problem: str | None, out: Outcome, wall: float) -> dict:
    return jsonable({
        "check": spec.id,
        "anchor": spec.anchor,
        "problem": problem,
        "parameters": out.parameters,
        "verdict": out.verdict,
        "expected": out.expected,
        "as_expected": out.as_expected,
        "max_violation": out.max_violation,
        "tolerance": out.tolerance,
        "witness": out.witness,
        "failing_parts": out.failing_parts,
        "details": out.details,
        "wall_time_s": wall,
    })


def _error_outcome(exc: Exception) -> Outcome:
    payload = getattr(exc, "payload", {})
    return Outcome(False, math.inf, 0.0, witness={"error": type(exc).__name__,
                                                  "message": str(exc), **payload})


def validate(config: RunConfig) -> dict[str, Context]:
    """Resolve per-problem settings; raises ConfigError on an invalid config."""
    unknown = [c for c in config.checks if c not in REGISTRY]
    if unknown:
        raise ConfigError(f"unknown check(s): {unknown}; choose from {sorted(REGISTRY)}")
    bad = [p for p in config.problems if p not in CATALOG]
    if bad:
        raise ConfigError(f"unknown problem(s): {bad}; choose from {sorted(CATALOG)}")
    if config.eps is not None and config.eps_bar is not None and config.eps >= config.eps_bar:
        raise ConfigError("--eps must be smaller than --eps-bar")
    if config.eps_bar is not None and config.eps_bar <= 0:
        raise ConfigError("--eps-bar must be positive")
    if config.rho is not None and config.rho < 0:
        raise ConfigError("--rho must be nonnegative")
    if config.samples is not None and config.samples < 2:
        raise ConfigError("--samples must be at least 2")
    if config.grid_n is not None and (config.grid_n < 3 or config.grid_n % 2 == 0):
        raise ConfigError("--grid-n must be an odd integer >= 3")
    try:
        return {name: make_context(config, name) for name in config.problems}
    except (UvlagError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def run(config: RunConfig) -> dict:
    """Run the selected checks and return the report document."""
    contexts = validate(config)
    records = []
    with solver_settings(config.grid_n):
        for cid in sorted(config.checks):
            spec = REGISTRY[cid]
            targets = sorted(contexts) if spec.per_problem else [None]
            for name in targets:
                t0 = time.perf_counter()
                try:
                    outs = spec.run(contexts[name]) if name else spec.run(config)
                except UvlagError as exc:
                    outs = [_error_outcome(exc)]
                wall = (time.perf_counter() - t0) / max(1, len(outs) or 1)
                records += [_record(spec, name, o, wall) for o in outs]
    summary = {"pass": sum(r["verdict"] == "pass" for r in records),
               "fail": sum(r["verdict"] == "fail" and r["expected"] == "pass"
                           for r in records),
               "expected_fail": sum(r["verdict"] == "fail" and r["expected"] == "fail"
                                    for r in records)}
    return {"schema": SCHEMA_ID, "config": jsonable(config.to_dict()), "records": records,
            "summary": summary}


def all_as_expected(report: dict) -> bool:
    return all(r["as_expected"] for r in report["records"])
