"""ODE integration for the two gradient systems and trajectory functionals.

Two integrators are provided: classical fixed-step RK4 and an embedded
Dormand-Prince 5(4) pair with step-size control.  Orbit generators wrap them
for u' = -grad psi(u) and for the phase-space form of v'' = grad V(v).
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from evanflow import kernels
from evanflow.fields import DifferentiableField, NumericDomainError, PotentialPair

TERM_HORIZON = "horizon_reached"
TERM_CRIT = "critical_point_reached"
TERM_DIVERGED = "diverged"
TERM_STEP_COLLAPSE = "step_collapse"

DEFAULT_R_MAX = 1e6
DEFAULT_EPS_CRIT = 1e-10


@dataclass
class IntegratorOptions:
    method: str = "rk45"          # "rk45" (adaptive) or "rk4" (fixed step)
    h: float = 1e-2               # fixed step for rk4
    rtol: float = 1e-9
    atol: float = 1e-12
    r_max: float = DEFAULT_R_MAX
    eps_crit: float = DEFAULT_EPS_CRIT


@dataclass
class Trajectory:
    times: np.ndarray             # (m,), strictly increasing, t0 = 0
    states: np.ndarray            # (m, n)
    velocities: np.ndarray        # (m, n)
    system_tag: str               # "first_order" | "second_order"
    termination: str
    meta: dict = dc_field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return len(self.times)


@dataclass
class RawOrbit:
    times: np.ndarray
    ys: np.ndarray
    termination: str
    meta: dict


def _check_state(y: np.ndarray, r_max: float) -> Optional[str]:
    if not np.all(np.isfinite(y)):
        return "nan"
    if np.linalg.norm(y) > r_max:
        return TERM_DIVERGED
    return None


def rk4_fixed(rhs: Callable, y0, T: float, h: float,
              r_max: float = DEFAULT_R_MAX,
              stop: Optional[Callable] = None) -> RawOrbit:
    """Classical 4th-order Runge-Kutta with node spacing h (last step partial)."""
    if h <= 0 or T <= 0:
        raise ValueError("rk4_fixed requires h > 0 and T > 0")
    y = np.asarray(y0, float).copy()
    t = 0.0
    times = [0.0]
    ys = [y.copy()]
    termination = TERM_HORIZON
    n_steps = 0
    while t < T - 1e-14 * T:
        if stop is not None and stop(y):
            termination = TERM_CRIT
            break
        # node times are computed as multiples of h (not accumulated) so the
        # grid is exactly uniform apart from a final partial step
        t_next = min((n_steps + 1) * h, T)
        hs = t_next - t
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * hs * k1)
        k3 = rhs(y + 0.5 * hs * k2)
        k4 = rhs(y + hs * k3)
        y_new = y + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        flag = _check_state(y_new, r_max)
        if flag == "nan":
            raise NumericDomainError(
                f"non-finite state at t = {t + hs:g} (last valid t = {t:g})"
            )
        y = y_new
        t = t_next
        n_steps += 1
        times.append(t)
        ys.append(y.copy())
        if flag == TERM_DIVERGED:
            termination = TERM_DIVERGED
            break
    return RawOrbit(
        np.asarray(times), np.asarray(ys), termination,
        {"method": "rk4", "h": h, "n_steps": n_steps, "n_rejected": 0},
    )


# Dormand-Prince 5(4) coefficients
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


def rk_adaptive(rhs: Callable, y0, T: float, rtol: float = 1e-9,
                atol: float = 1e-12, r_max: float = DEFAULT_R_MAX,
                stop: Optional[Callable] = None,
                h0: Optional[float] = None) -> RawOrbit:
    """Embedded Dormand-Prince 5(4) pair; nodes at accepted steps."""
    if not (1e-12 <= rtol <= 1e-2):
        raise ValueError(f"rtol must lie in [1e-12, 1e-2], got {rtol:g}")
    if atol <= 0:
        raise ValueError("atol must be positive")
    y = np.asarray(y0, float).copy()
    t = 0.0
    h = h0 if h0 is not None else min(1e-3 * T, 0.1)
    times = [0.0]
    ys = [y.copy()]
    termination = TERM_HORIZON
    n_steps = 0
    n_rejected = 0
    while t < T * (1.0 - 1e-15):
        if stop is not None and stop(y):
            termination = TERM_CRIT
            break
        if h < 1e-14 * T:
            termination = TERM_STEP_COLLAPSE
            break
        h = min(h, T - t)
        K = np.empty((7, y.size))
        K[0] = rhs(y)
        bad = False
        for i in range(1, 7):
            yi = y + h * (_DP_A[i] @ K[:i])
            if not np.all(np.isfinite(yi)):
                bad = True
                break
            K[i] = rhs(yi)
        if bad or not np.all(np.isfinite(K)):
            h *= 0.5
            n_rejected += 1
            continue
        y5 = y + h * (_DP_B5 @ K)
        y4 = y + h * (_DP_B4 @ K)
        if not np.all(np.isfinite(y5)):
            h *= 0.5
            n_rejected += 1
            continue
        err = float(np.linalg.norm(y5 - y4))
        tol = atol + rtol * float(np.linalg.norm(y))
        if err <= tol:
            t += h
            y = y5
            n_steps += 1
            times.append(t)
            ys.append(y.copy())
            if np.linalg.norm(y) > r_max:
                termination = TERM_DIVERGED
                break
        else:
            n_rejected += 1
        factor = 0.9 * (tol / err) ** 0.2 if err > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
    return RawOrbit(
        np.asarray(times), np.asarray(ys), termination,
        {"method": "rk45", "rtol": rtol, "atol": atol,
         "n_steps": n_steps, "n_rejected": n_rejected},
    )


def _integrate(rhs, y0, T, opts: IntegratorOptions, stop=None) -> RawOrbit:
    if opts.method == "rk4":
        return rk4_fixed(rhs, y0, T, opts.h, r_max=opts.r_max, stop=stop)
    if opts.method == "rk45":
        return rk_adaptive(rhs, y0, T, rtol=opts.rtol, atol=opts.atol,
                           r_max=opts.r_max, stop=stop)
    raise ValueError(f"unknown integrator method {opts.method!r}")


def _psi_of(pp) -> DifferentiableField:
    return pp.psi if isinstance(pp, PotentialPair) else pp


def gradient_flow(pp, x0, T: float,
                  opts: Optional[IntegratorOptions] = None) -> Trajectory:
    """Integrate u' = -grad psi(u) from x0; velocities are recomputed exactly."""
    psi = _psi_of(pp)
    opts = opts or IntegratorOptions()
    x0 = np.asarray(x0, float).reshape(psi.dim)

    def rhs(y):
        return -psi.gradient(y)

    def stop(y):
        return float(np.linalg.norm(psi.gradient(y))) < opts.eps_crit

    if stop(x0):
        # equilibrium: constant orbit, flagged immediately
        times = np.array([0.0, T])
        states = np.vstack([x0, x0])
        vel = -psi.gradient(states)
        return Trajectory(times, states, vel, "first_order", TERM_CRIT,
                          {"method": opts.method, "n_steps": 0, "n_rejected": 0,
                           "stopped_at": 0.0})
    raw = _integrate(rhs, x0, T, opts, stop=stop)
    states = raw.ys
    velocities = -psi.gradient(states)
    meta = dict(raw.meta)
    if raw.termination == TERM_CRIT:
        meta["stopped_at"] = float(raw.times[-1])
    return Trajectory(raw.times, states, velocities, "first_order",
                      raw.termination, meta)


def second_order_flow(V, x0, v0, T: float,
                      opts: Optional[IntegratorOptions] = None) -> Trajectory:
    """Integrate the phase-space form (v, w)' = (w, grad V(v)) from (x0, v0)."""
    Vf = V.v if isinstance(V, PotentialPair) else V
    opts = opts or IntegratorOptions()
    n = Vf.dim
    x0 = np.asarray(x0, float).reshape(n)
    v0 = np.asarray(v0, float).reshape(n)

    def rhs(y):
        return np.concatenate([y[n:], Vf.gradient(y[:n])])

    raw = _integrate(rhs, np.concatenate([x0, v0]), T, opts)
    return Trajectory(raw.times, raw.ys[:, :n], raw.ys[:, n:],
                      "second_order", raw.termination, dict(raw.meta))


def path_integral(traj: Trajectory, integrand: Callable) -> float:
    """Composite trapezoid of integrand(t, x, w) over the trajectory nodes."""
    if len(traj) < 2:
        raise ValueError("path_integral needs a trajectory with >= 2 nodes")
    vals = np.array([
        float(integrand(t, x, w))
        for t, x, w in zip(traj.times, traj.states, traj.velocities)
    ])
    if not np.all(np.isfinite(vals)):
        raise NumericDomainError("non-finite integrand value along trajectory")
    return kernels.trapezoid(traj.times, vals)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """CSV contract: header t,x0..x{n-1},w0..w{n-1}; 17 significant digits; LF."""
    n = traj.dim
    header = ",".join(["t"] + [f"x{i}" for i in range(n)] + [f"w{i}" for i in range(n)])
    lines = [header]
    for t, x, w in zip(traj.times, traj.states, traj.velocities):
        row = [t, *x, *w]
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
