"""Pure-numpy twins of the compiled kernels.

Selected automatically when the Cython extension is unavailable.  Both
implementations use compensated summation for the action value, so they agree
to within a few ulps (the summation orders differ, so agreement is not
bit-exact).
"""
from __future__ import annotations

import math

import numpy as np

USING_EXTENSION = False


def action_assemble(W, Vv, Vg, dt, mu, want_grad=True):
    """Discrete action value and gradient w.r.t. interior + terminal nodes.

    W: (N+1, n) node positions, Vv: (N+1,) potential values, Vg: (N+1, n)
    potential gradients, dt: spacing, mu: terminal penalty weight.
    Returns (value, grad) with grad of shape (N, n) covering nodes 1..N
    (node 0 is the fixed endpoint); grad is None when want_grad is False.
    """
    W = np.asarray(W, float)
    Vv = np.asarray(Vv, float)
    Vg = np.asarray(Vg, float)
    diff = W[1:] - W[:-1]
    # exact accumulation: the optimizer's line search must resolve value
    # decreases near the double-precision floor
    kinetic = 0.5 * math.fsum(np.sum(diff * diff, axis=-1)) / dt
    potential = 0.5 * dt * math.fsum(np.concatenate([Vv[:-1], Vv[1:]]))
    value = kinetic + potential + mu * float(Vv[-1])
    if not want_grad:
        return value, None
    grad = np.empty_like(W[1:])
    # interior nodes 1..N-1: kinetic second difference + full-weight dt*Vg
    grad[:-1] = (2.0 * W[1:-1] - W[:-2] - W[2:]) / dt + dt * Vg[1:-1]
    # terminal node N: one-sided kinetic term + half trapezoid weight + penalty
    grad[-1] = (W[-1] - W[-2]) / dt + (0.5 * dt + mu) * Vg[-1]
    return value, grad


def el_residual_max(W, Vg, dt):
    """Max norm of the discrete Euler-Lagrange residual at interior nodes."""
    W = np.asarray(W, float)
    Vg = np.asarray(Vg, float)
    if W.shape[0] < 3:
        return 0.0
    res = (W[2:] - 2.0 * W[1:-1] + W[:-2]) / (dt * dt) - Vg[1:-1]
    return float(np.max(np.sqrt(np.sum(res * res, axis=-1))))


def trapezoid(ts, vals):
    """Composite trapezoid on a (possibly non-uniform) grid."""
    ts = np.asarray(ts, float)
    vals = np.asarray(vals, float)
    return float(np.sum(0.5 * (ts[1:] - ts[:-1]) * (vals[1:] + vals[:-1])))
