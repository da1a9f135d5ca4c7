"""Numba kernels for the mass-spring simulator.

One forward kernel covers rollouts (states stored every `store_every`
steps, doubling as dense recording when `store_every == 1`), and two
kernels implement the checkpointed reverse sweep: `segment_states`
replays a checkpoint interval, `segment_backward` runs the hand-written
step adjoint over it. Replay uses the exact instruction sequence of the
forward kernel, so recomputed states are bitwise identical and gradients
do not depend on the checkpoint interval.

No Python objects cross into these functions: scalars plus preallocated
float64/int64 arrays only, so each kernel compiles once and caches.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(inline="always")
def _height(tkind: int, tsw: float, tsh: float, tns: int, tx0: float, xq: float) -> float:
    if tkind == 0:
        return 0.0
    if xq < tx0:
        return tsh * tns
    level = tns - 1 - int(math.floor((xq - tx0) / tsw))
    if level <= 0:
        return 0.0
    return tsh * level


@njit(inline="always")
def _forces(x, v, masses, si, sj, rest, stiff, damp, act, u_t,
            gravity, kc, cc, mu, veps, cmax,
            tkind, tsw, tsh, tns, tx0, F):
    n = x.shape[0]
    for p in range(n):
        F[p, 0] = 0.0
        F[p, 1] = -gravity * masses[p]
    for s in range(si.shape[0]):
        i = si[s]
        j = sj[s]
        dx = x[i, 0] - x[j, 0]
        dy = x[i, 1] - x[j, 1]
        r = math.sqrt(dx * dx + dy * dy)
        nx = dx / r
        ny = dy / r
        wn = (v[i, 0] - v[j, 0]) * nx + (v[i, 1] - v[j, 1]) * ny
        length = rest[s]
        a = act[s]
        if a >= 0:
            length = length * (1.0 - cmax * u_t[a])
        fm = -stiff[s] * (r - length) - damp[s] * wn
        F[i, 0] += fm * nx
        F[i, 1] += fm * ny
        F[j, 0] -= fm * nx
        F[j, 1] -= fm * ny
    for p in range(n):
        pen = _height(tkind, tsw, tsh, tns, tx0, x[p, 0]) - x[p, 1]
        if pen > 0.0:
            nraw = kc * pen - cc * v[p, 1]
            normal = nraw if nraw > 0.0 else 0.0
            F[p, 1] += normal
            F[p, 0] -= mu * normal * math.tanh(v[p, 0] / veps)


@njit(cache=True)
def forward_rollout(x, v, masses, si, sj, rest, stiff, damp, act, u,
                    dt, gravity, kc, cc, mu, veps, cmax,
                    tkind, tsw, tsh, tns, tx0,
                    store_every, xs, vs, com):
    """Advance (x, v) in place for u.shape[0] steps.

    States *before* steps 0, store_every, 2*store_every, ... are copied
    into xs/vs; com receives the center of mass after every step (entry 0
    is the initial state). Returns -1, or the step at which a non-finite
    state was first detected (checks happen at stores and at the end).
    """
    n = x.shape[0]
    n_steps = u.shape[0]
    F = np.zeros((n, 2))
    total_mass = 0.0
    for p in range(n):
        total_mass += masses[p]
    cx = 0.0
    cy = 0.0
    for p in range(n):
        cx += masses[p] * x[p, 0]
        cy += masses[p] * x[p, 1]
    com[0, 0] = cx / total_mass
    com[0, 1] = cy / total_mass
    for t in range(n_steps):
        if t % store_every == 0:
            idx = t // store_every
            check = 0.0
            for p in range(n):
                xs[idx, p, 0] = x[p, 0]
                xs[idx, p, 1] = x[p, 1]
                vs[idx, p, 0] = v[p, 0]
                vs[idx, p, 1] = v[p, 1]
                check += x[p, 0] + x[p, 1] + v[p, 0] + v[p, 1]
            if not math.isfinite(check):
                return t
        _forces(x, v, masses, si, sj, rest, stiff, damp, act, u[t],
                gravity, kc, cc, mu, veps, cmax, tkind, tsw, tsh, tns, tx0, F)
        cx = 0.0
        cy = 0.0
        for p in range(n):
            v[p, 0] += dt * F[p, 0] / masses[p]
            v[p, 1] += dt * F[p, 1] / masses[p]
            x[p, 0] += dt * v[p, 0]
            x[p, 1] += dt * v[p, 1]
            cx += masses[p] * x[p, 0]
            cy += masses[p] * x[p, 1]
        com[t + 1, 0] = cx / total_mass
        com[t + 1, 1] = cy / total_mass
    check = 0.0
    for p in range(n):
        check += x[p, 0] + x[p, 1] + v[p, 0] + v[p, 1]
    if not math.isfinite(check):
        return n_steps
    return -1


@njit(cache=True)
def segment_states(x0, v0, masses, si, sj, rest, stiff, damp, act, u_seg,
                   dt, gravity, kc, cc, mu, veps, cmax,
                   tkind, tsw, tsh, tns, tx0, xs, vs):
    """Replay one checkpoint interval, storing every state (L+1 of them).

    The per-particle update is written exactly as in `forward_rollout`
    so the replayed states are bitwise identical to the original pass.
    """
    n = x0.shape[0]
    length = u_seg.shape[0]
    F = np.zeros((n, 2))
    for p in range(n):
        xs[0, p, 0] = x0[p, 0]
        xs[0, p, 1] = x0[p, 1]
        vs[0, p, 0] = v0[p, 0]
        vs[0, p, 1] = v0[p, 1]
    for t in range(length):
        _forces(xs[t], vs[t], masses, si, sj, rest, stiff, damp, act, u_seg[t],
                gravity, kc, cc, mu, veps, cmax, tkind, tsw, tsh, tns, tx0, F)
        for p in range(n):
            vs[t + 1, p, 0] = vs[t, p, 0] + dt * F[p, 0] / masses[p]
            vs[t + 1, p, 1] = vs[t, p, 1] + dt * F[p, 1] / masses[p]
            xs[t + 1, p, 0] = xs[t, p, 0] + dt * vs[t + 1, p, 0]
            xs[t + 1, p, 1] = xs[t, p, 1] + dt * vs[t + 1, p, 1]


@njit(cache=True)
def segment_backward(xs, vs, u_seg, seeds_x, masses, si, sj, rest, stiff,
                     damp, act, dt, kc, cc, mu, veps, cmax,
                     tkind, tsw, tsh, tns, tx0,
                     xbar, vbar, ubar_seg):
    """Adjoint sweep over one interval, newest step first.

    On entry xbar/vbar hold dL/d(state after the interval); on exit they
    hold dL/d(state before it). ubar_seg must be zero-initialized; forward
    intermediates are recomputed from the stored states, with all branch
    gates (contact activation, slack normal force) evaluated on forward
    values. seeds_x[t] is added once xbar refers to the pre-step-t state,
    which injects dL/dx for every interior state exactly once.

    Step adjoint, for X = x + dt*V and V = v + dt*F(x, v, u)/m:
    vbar += dt*xbar, then Fbar = dt*vbar/m, then the force VJP scatters
    Fbar into xbar/vbar/ubar. Gravity is state-independent. The terrain
    height is piecewise constant, so its x-derivative is taken as zero.
    """
    n = xbar.shape[0]
    length = u_seg.shape[0]
    Fbar = np.zeros((n, 2))
    for t in range(length - 1, -1, -1):
        x = xs[t]
        v = vs[t]
        for p in range(n):
            vbar[p, 0] += dt * xbar[p, 0]
            vbar[p, 1] += dt * xbar[p, 1]
        for p in range(n):
            Fbar[p, 0] = dt * vbar[p, 0] / masses[p]
            Fbar[p, 1] = dt * vbar[p, 1] / masses[p]
        for s in range(si.shape[0]):
            i = si[s]
            j = sj[s]
            dx = x[i, 0] - x[j, 0]
            dy = x[i, 1] - x[j, 1]
            r = math.sqrt(dx * dx + dy * dy)
            nx = dx / r
            ny = dy / r
            wx = v[i, 0] - v[j, 0]
            wy = v[i, 1] - v[j, 1]
            wn = wx * nx + wy * ny
            length_s = rest[s]
            a = act[s]
            if a >= 0:
                length_s = length_s * (1.0 - cmax * u_seg[t, a])
            fm = -stiff[s] * (r - length_s) - damp[s] * wn
            gx = Fbar[i, 0] - Fbar[j, 0]
            gy = Fbar[i, 1] - Fbar[j, 1]
            fmbar = nx * gx + ny * gy
            nbx = fm * gx
            nby = fm * gy
            rbar = -stiff[s] * fmbar
            wnbar = -damp[s] * fmbar
            wbx = wnbar * nx
            wby = wnbar * ny
            nbx += wnbar * wx
            nby += wnbar * wy
            ndot = nbx * nx + nby * ny
            dbx = (nbx - ndot * nx) / r + rbar * nx
            dby = (nby - ndot * ny) / r + rbar * ny
            xbar[i, 0] += dbx
            xbar[i, 1] += dby
            xbar[j, 0] -= dbx
            xbar[j, 1] -= dby
            vbar[i, 0] += wbx
            vbar[i, 1] += wby
            vbar[j, 0] -= wbx
            vbar[j, 1] -= wby
            if a >= 0:
                ubar_seg[t, a] += stiff[s] * fmbar * (-rest[s] * cmax)
        for p in range(n):
            pen = _height(tkind, tsw, tsh, tns, tx0, x[p, 0]) - x[p, 1]
            if pen > 0.0:
                nraw = kc * pen - cc * v[p, 1]
                normal = nraw if nraw > 0.0 else 0.0
                th = math.tanh(v[p, 0] / veps)
                fbx = Fbar[p, 0]
                fby = Fbar[p, 1]
                nbar = fby - mu * th * fbx
                vbar[p, 0] -= mu * normal * (1.0 - th * th) / veps * fbx
                if nraw > 0.0:
                    xbar[p, 1] -= kc * nbar
                    vbar[p, 1] -= cc * nbar
        for p in range(n):
            xbar[p, 0] += seeds_x[t, p, 0]
            xbar[p, 1] += seeds_x[t, p, 1]
