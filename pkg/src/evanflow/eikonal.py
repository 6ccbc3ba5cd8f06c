"""Recovering a potential from the squared modulus of its gradient.

Given f = ||grad psi||^2 alone, the evanescent orbit of v'' = grad V(v) with
V = f/2 carries the value difference: psi(x0) - inf psi equals the integral of
f along that orbit.  This module reconstructs psi pointwise and on grids, and
exposes the determination and convexity-implication checks as bundles.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field as dc_field, asdict
import json
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from evanflow.diagnostics import CheckResult, DiagnosticsReport, check_monotone_gradient
from evanflow.evanescent import (
    ActionOptions,
    ShootOptions,
    minimize_action,
    shoot_evanescent,
)
from evanflow.fields import DifferentiableField, PotentialPair, field_from_f
from evanflow.integrate import IntegratorOptions, gradient_flow, rk4_fixed

DEFAULT_TOL_RECON = 1e-6
TAIL_DECAY_SLOPE = -0.1
BOUNDED_BELOW_FLOOR = -1e6


@dataclass
class ReconstructOptions:
    T: float = 12.0
    N: int = 240
    method: str = "action"            # "action" or "shoot"
    workers: int = 1
    max_iters: int = 50_000
    eps_equilibrium: float = 1e-12


@dataclass
class ReconstructionResult:
    points: np.ndarray                # (m, n)
    psi_hat: np.ndarray               # (m,), normalized so min = 0
    per_point: list                   # dicts: ev_integral, tail_estimate, converged, ...
    config: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "points": np.asarray(self.points).tolist(),
            "psi_hat": np.asarray(self.psi_hat).tolist(),
            "per_point": self.per_point,
            "config": self.config,
        }

    def to_json(self, **kw) -> str:
        kw.setdefault("indent", 2)
        kw.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kw)

    def write_csv(self, path) -> None:
        n = self.points.shape[1]
        header = ",".join([f"x{i}" for i in range(n)]
                          + ["psi_hat", "ev_integral", "tail_estimate", "converged"])
        lines = [header]
        for p, v, d in zip(self.points, self.psi_hat, self.per_point):
            row = [f"{x:.17g}" for x in p]
            row += [f"{v:.17g}", f"{d['ev_integral']:.17g}",
                    f"{d['tail_estimate']:.17g}", str(bool(d["converged"])).lower()]
            lines.append(",".join(row))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _orbit_nodes(V: DifferentiableField, x0: np.ndarray, T: float, N: int,
                 method: str, max_iters: int):
    """Evanescent orbit sampled on the uniform grid with spacing T/N."""
    if method == "action":
        res = minimize_action(V, x0, T, N, ActionOptions(max_iters=max_iters))
        return res.path.nodes, res.converged
    if method == "shoot":
        res = shoot_evanescent(V, x0, T, ShootOptions())
        v0 = np.asarray(res.detail["v0"], float)
        n = V.dim
        raw = rk4_fixed(lambda y: np.concatenate([y[n:], V.gradient(y[:n])]),
                        np.concatenate([x0, v0]), T, T / N, r_max=1e8)
        nodes = raw.ys[:, :n]
        if len(nodes) < N + 1:
            nodes = np.vstack([nodes, np.tile(nodes[-1], (N + 1 - len(nodes), 1))])
        return nodes, res.converged
    raise ValueError(f"unknown reconstruction method {method!r}")


def _tail_fit(times: np.ndarray, fvals: np.ndarray):
    """Log-linear fit of f along the last 20% of nodes; returns (slope, f_end)."""
    m = len(times)
    k = max(3, m // 5)
    t_tail = times[-k:]
    f_tail = np.maximum(fvals[-k:], 0.0)
    f_end = float(f_tail[-1])
    pos = f_tail > 1e-300
    if np.count_nonzero(pos) < 3:
        return -np.inf, f_end
    slope = float(np.polyfit(t_tail[pos], np.log(f_tail[pos]), 1)[0])
    return slope, f_end


def reconstruct_value(f: DifferentiableField, x0,
                      opts: Optional[ReconstructOptions] = None) -> dict:
    """Reconstruct psi(x0) - inf psi by integrating f along the evanescent
    orbit of V = f/2, with an exponential-tail extrapolation past the horizon."""
    opts = opts or ReconstructOptions()
    V = field_from_f(f)
    x0 = np.asarray(x0, float).reshape(f.dim)

    if float(f.value(x0)) <= opts.eps_equilibrium:
        return {"psi_hat": 0.0, "ev_integral": 0.0, "tail_estimate": 0.0,
                "converged": True, "T_used": opts.T, "tail_slope": -np.inf,
                "method": opts.method}

    T, N = opts.T, opts.N
    for attempt in range(2):
        nodes, solve_ok = _orbit_nodes(V, x0, T, N, opts.method, opts.max_iters)
        dt = T / N
        times = dt * np.arange(len(nodes))
        fvals = np.asarray(f.value(nodes), float)
        slope, f_end = _tail_fit(times, fvals)
        if slope <= TAIL_DECAY_SLOPE or attempt == 1:
            break
        T, N = 2.0 * T, 2 * N    # tail not yet decaying: push the horizon once

    ev_integral = float(simpson(fvals, dx=dt))
    if f_end <= 0.0 or slope == -np.inf:
        tail = 0.0
        tail_ok = True
    elif slope <= TAIL_DECAY_SLOPE:
        tail = f_end / abs(slope)
        tail_ok = True
    else:
        tail = f_end / abs(slope) if slope < 0 else f_end * T
        tail_ok = False
    return {
        "psi_hat": ev_integral + tail,
        "ev_integral": ev_integral,
        "tail_estimate": float(tail),
        "converged": bool(solve_ok and tail_ok),
        "T_used": T,
        "tail_slope": slope,
        "method": opts.method,
    }


def reconstruct_grid(f: DifferentiableField, points,
                     opts: Optional[ReconstructOptions] = None) -> ReconstructionResult:
    """Independent per-point reconstructions, renormalized so min psi_hat = 0."""
    opts = opts or ReconstructOptions()
    points = np.asarray(points, float).reshape(-1, f.dim)

    def one(p):
        try:
            return reconstruct_value(f, p, opts)
        except (ValueError, ArithmeticError) as exc:
            return {"psi_hat": np.nan, "ev_integral": np.nan,
                    "tail_estimate": np.nan, "converged": False,
                    "T_used": opts.T, "tail_slope": np.nan,
                    "method": opts.method, "error": str(exc)}

    if opts.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=opts.workers) as pool:
            details = list(pool.map(one, points))
    else:
        details = [one(p) for p in points]

    raw = np.array([d["psi_hat"] for d in details])
    good = np.isfinite(raw)
    offset = float(np.min(raw[good])) if np.any(good) else 0.0
    psi_hat = raw - offset
    for d in details:
        d["psi_hat_raw"] = d["psi_hat"]
        d["psi_hat"] = d["psi_hat"] - offset if np.isfinite(d["psi_hat"]) else d["psi_hat"]
    config = {k: (v if not isinstance(v, np.ndarray) else v.tolist())
              for k, v in asdict(opts).items()}
    config["normalization_offset"] = offset
    return ReconstructionResult(points, psi_hat, details, config)


# ---------------------------------------------------------------------------
# determination: equal gradient moduli force equality up to a constant
# ---------------------------------------------------------------------------

def _pairs_from_points(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, float)
    m = len(pts)
    if m < 2:
        raise ValueError("need at least 2 sample points")
    return np.stack([pts[:-1], pts[1:]], axis=1)


def determination_check(psi1: DifferentiableField, psi2: DifferentiableField,
                        sample_points, eps_inf: float = 1e-3,
                        tol_norms: float = 1e-8,
                        tol_conclusion: float = 1e-6) -> DiagnosticsReport:
    """Hypothesis + conclusion bundle.  Checks with ids starting 'hyp_' are
    hypothesis probes; if any fails the verdict is hypothesis_not_met and the
    conclusion checks carry no refutation weight."""
    pts = np.asarray(sample_points, float).reshape(-1, psi1.dim)
    g1 = np.asarray(psi1.gradient(pts), float)
    g2 = np.asarray(psi2.gradient(pts), float)
    n1 = np.linalg.norm(g1, axis=-1)
    n2 = np.linalg.norm(g2, axis=-1)
    report = DiagnosticsReport(subject=f"determination {psi1.name} vs {psi2.name}")

    gap = np.abs(n1 - n2)
    i = int(np.argmax(gap))
    scale = 1.0 + float(np.max(n1))
    report.add(CheckResult("hyp_equal_grad_norms", bool(gap[i] <= tol_norms * scale),
                           float(gap[i]), pts[i].tolist(), tol_norms * scale))

    pairs = _pairs_from_points(pts)
    c1 = check_monotone_gradient(psi1, pairs)
    c1.check_id = "hyp_psi1_convex"
    report.add(c1)
    c2 = check_monotone_gradient(psi2, pairs)
    c2.check_id = "hyp_psi2_convex"
    report.add(c2)

    min_norm = float(np.min(n1))
    v1 = np.asarray(psi1.value(pts), float)
    v2 = np.asarray(psi2.value(pts), float)
    flagged = ((psi1.claims_bounded_below and float(np.min(v1)) > BOUNDED_BELOW_FLOOR)
               or (psi2.claims_bounded_below and float(np.min(v2)) > BOUNDED_BELOW_FLOOR))
    inf_ok = min_norm < eps_inf or flagged
    report.add(CheckResult(
        "hyp_inf_gradient_or_bounded", bool(inf_ok),
        0.0 if inf_ok else min_norm, None, eps_inf,
        notes=(f"min ||grad psi1|| over samples = {min_norm:.3g}; "
               f"bounded-below flag corroborated = {flagged}; "
               f"min sampled psi1 = {float(np.min(v1)):.3g}, "
               f"psi2 = {float(np.min(v2)):.3g}"),
    ))

    gd = np.linalg.norm(g1 - g2, axis=-1)
    j = int(np.argmax(gd))
    report.add(CheckResult("det_gradients_equal",
                           bool(gd[j] <= tol_conclusion * scale),
                           float(gd[j]), pts[j].tolist(), tol_conclusion * scale))

    diff = v2 - v1
    c = float(np.mean(diff))
    spread = float(np.std(diff))
    tol_c = tol_conclusion * (1.0 + abs(c))
    report.add(CheckResult("det_difference_constant", bool(spread <= tol_c),
                           spread, None, tol_c,
                           notes=f"constant c = {c:.12g}"))
    return report


def determination_verdict(report: DiagnosticsReport):
    """('pass' | 'conclusion_failed' | 'hypothesis_not_met', c or None)."""
    c = None
    for chk in report.checks:
        if chk.check_id == "det_difference_constant" and chk.notes.startswith("constant c = "):
            c = float(chk.notes.split("=", 1)[1])
    hyp_ok = all(chk.passed for chk in report.checks if chk.check_id.startswith("hyp_"))
    if not hyp_ok:
        return "hypothesis_not_met", c
    concl_ok = all(chk.passed for chk in report.checks if chk.check_id.startswith("det_"))
    return ("pass" if concl_ok else "conclusion_failed"), c


# ---------------------------------------------------------------------------
# convexity implication: V convex and psi bounded below force psi convex
# ---------------------------------------------------------------------------

def convexity_criterion_check(pp: PotentialPair, sample_pairs,
                              lower_bound_probe_points,
                              flow_T: float = 10.0) -> DiagnosticsReport:
    """Bundle (i) V convex, (ii) psi bounded-below evidence, (iii) psi convex.
    If (i) and (ii) pass while (iii) fails the implication is broken, which
    indicates a bug or tolerance problem; that event is its own check."""
    pairs = np.asarray(sample_pairs, float)
    probes = np.asarray(lower_bound_probe_points, float).reshape(-1, pp.dim)
    report = DiagnosticsReport(subject=f"convexity criterion {pp.psi.name}")

    ci = check_monotone_gradient(pp.v, pairs)
    ci.check_id = "crit_V_convex"
    report.add(ci)

    min_val = float(np.min(np.asarray(pp.psi.value(probes), float)))
    min_loc = probes[int(np.argmin(np.asarray(pp.psi.value(probes), float)))].tolist()
    flow_opts = IntegratorOptions(method="rk45", rtol=1e-8, r_max=1e6)
    for x0 in probes[:5]:
        try:
            traj = gradient_flow(pp, x0, flow_T, flow_opts)
        except ArithmeticError:
            min_val = -np.inf
            min_loc = x0.tolist()
            break
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.asarray(pp.psi.value(traj.states), float)
        vals = vals[np.isfinite(vals)]
        if len(vals) and float(np.min(vals)) < min_val:
            min_val = float(np.min(vals))
            min_loc = traj.states[int(np.argmin(vals))].tolist()
        if not np.all(np.isfinite(np.asarray(pp.psi.value(traj.states), float))):
            min_val = -np.inf
    bounded_ok = min_val > BOUNDED_BELOW_FLOOR
    report.add(CheckResult(
        "crit_psi_bounded_evidence", bool(bounded_ok),
        0.0 if bounded_ok else float(min(-min_val, np.finfo(float).max)),
        min_loc, -BOUNDED_BELOW_FLOOR,
        notes=f"min sampled psi (probes + 5 flow orbits) = {min_val:.6g}",
    ))

    ciii = check_monotone_gradient(pp.psi, pairs)
    ciii.check_id = "crit_psi_convex"
    report.add(ciii)

    violated = ci.passed and bounded_ok and not ciii.passed
    report.add(CheckResult(
        "crit_implication_holds", not violated,
        1.0 if violated else 0.0, None, 0.5,
        notes=("THEOREM-VIOLATION: V convex and psi bounded below but psi "
               "convexity check failed" if violated else
               "implication consistent with sampled evidence"),
    ))
    return report


# ---------------------------------------------------------------------------
# residual of the reconstructed field
# ---------------------------------------------------------------------------

def grid_points(grid_spec) -> np.ndarray:
    """Cartesian grid from [(lo, hi, count), ...], row-major order."""
    axes = [np.linspace(lo, hi, int(count)) for lo, hi, count in grid_spec]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def eikonal_residual(recon: ReconstructionResult, f: DifferentiableField,
                     grid_spec, tol: float = 5e-2) -> CheckResult:
    """Compare the squared finite-difference gradient of psi_hat against f on
    interior grid points."""
    counts = [int(c) for _, _, c in grid_spec]
    spacings = [(hi - lo) / (c - 1) if c > 1 else 0.0 for (lo, hi, c), _ in
                zip(grid_spec, counts)]
    if any(c < 2 for c in counts):
        raise ValueError("eikonal_residual needs >= 2 points per axis")
    if len(recon.psi_hat) != int(np.prod(counts)):
        raise ValueError("grid_spec does not match the reconstruction size")
    psi_grid = np.asarray(recon.psi_hat, float).reshape(counts)
    grads = np.gradient(psi_grid, *[s for s in spacings if s > 0])
    if len(counts) == 1 or isinstance(grads, np.ndarray):
        grads = [grads] if isinstance(grads, np.ndarray) else grads
    sq = np.zeros_like(psi_grid)
    for g in grads:
        sq = sq + g * g
    fvals = np.asarray(f.value(recon.points), float).reshape(counts)
    interior = tuple(slice(1, -1) if c >= 3 else slice(None) for c in counts)
    resid = np.abs(sq - fvals)[interior]
    if resid.size == 0:
        resid = np.abs(sq - fvals)
    worst = float(np.max(resid))
    idx = np.unravel_index(int(np.argmax(np.abs(sq - fvals)[interior])),
                           resid.shape) if resid.size else None
    return CheckResult("eikonal_residual", worst <= tol, worst,
                       list(idx) if idx is not None else None, float(tol),
                       notes=f"interior points: {resid.size}")
