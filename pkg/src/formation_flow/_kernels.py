"""Compiled gradient flow for the fixed-step integrator.

Mirrors ``energy.gradient``/``energy.potential`` on a flat state so the RK4
loop runs without Python overhead.  ``vv`` is the 0-based virtual vertex, or
-1 for a plain system; ``dim`` is the planar/ambient dimension of the state.
"""
import numpy as np
from numba import njit

GRADIENT_BELOW_TOL = 0
HORIZON_REACHED = 1
STEP_FAILURE = 2


@njit(cache=True)
def _coord(x, v, k, dim, vv, n):
    if k < dim:
        return x[v * dim + k]
    if v == vv:
        return x[n * dim]
    return 0.0


@njit(cache=True)
def potential(x, ei, ej, d2, n, dim, vv):
    depth = dim + 1 if vv >= 0 else dim
    total = 0.0
    for m in range(ei.shape[0]):
        s = 0.0
        for k in range(depth):
            r = _coord(x, ei[m], k, dim, vv, n) - _coord(x, ej[m], k, dim, vv, n)
            s += r * r
        e = s - d2[m]
        total += e * e
    return 0.25 * total


@njit(cache=True)
def gradient(x, ei, ej, d2, n, dim, vv, out):
    depth = dim + 1 if vv >= 0 else dim
    out[:] = 0.0
    r = np.empty(depth)
    for m in range(ei.shape[0]):
        a = ei[m]
        b = ej[m]
        s = 0.0
        for k in range(depth):
            r[k] = _coord(x, a, k, dim, vv, n) - _coord(x, b, k, dim, vv, n)
            s += r[k] * r[k]
        e = s - d2[m]
        for k in range(dim):
            out[a * dim + k] += e * r[k]
            out[b * dim + k] -= e * r[k]
        if vv >= 0:
            if a == vv:
                out[n * dim] += e * r[dim]
            elif b == vv:
                out[n * dim] -= e * r[dim]


@njit(cache=True)
def rk4_flow(x0, ei, ej, d2, n, dim, vv, dt, t_max, grad_tol, record_every):
    """Integrate x' = -grad V with classical RK4.

    Returns (times, states, potentials, count, reason, final_grad_norm); only
    the first ``count`` rows of the record arrays are valid.
    """
    size = x0.shape[0]
    max_steps = int(np.ceil(t_max / dt - 1e-9))
    cap = max_steps // record_every + 3
    times = np.empty(cap)
    states = np.empty((cap, size))
    pots = np.empty(cap)

    x = x0.copy()
    k1 = np.empty(size)
    k2 = np.empty(size)
    k3 = np.empty(size)
    k4 = np.empty(size)
    tmp = np.empty(size)

    times[0] = 0.0
    states[0] = x
    pots[0] = potential(x, ei, ej, d2, n, dim, vv)
    count = 1
    last_recorded = 0
    t = 0.0
    step = 0
    reason = HORIZON_REACHED
    gnorm = 0.0
    while True:
        gradient(x, ei, ej, d2, n, dim, vv, k1)
        gnorm = np.sqrt(np.sum(k1 * k1))
        if gnorm <= grad_tol:
            reason = GRADIENT_BELOW_TOL
            break
        if step >= max_steps:
            break
        h = min(dt, t_max - t)
        for i in range(size):
            tmp[i] = x[i] - 0.5 * h * k1[i]
        gradient(tmp, ei, ej, d2, n, dim, vv, k2)
        for i in range(size):
            tmp[i] = x[i] - 0.5 * h * k2[i]
        gradient(tmp, ei, ej, d2, n, dim, vv, k3)
        for i in range(size):
            tmp[i] = x[i] - h * k3[i]
        gradient(tmp, ei, ej, d2, n, dim, vv, k4)
        ok = True
        for i in range(size):
            tmp[i] = x[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(tmp[i]):
                ok = False
        if not ok:
            reason = STEP_FAILURE
            break
        x[:] = tmp
        step += 1
        t = step * dt if step < max_steps else t_max
        if step % record_every == 0:
            times[count] = t
            states[count] = x
            pots[count] = potential(x, ei, ej, d2, n, dim, vv)
            count += 1
            last_recorded = step
    if last_recorded != step:
        times[count] = t
        states[count] = x
        pots[count] = potential(x, ei, ej, d2, n, dim, vv)
        count += 1
    return times, states, pots, count, reason, gnorm
