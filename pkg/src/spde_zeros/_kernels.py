"""Jitted inner loops for the time-stepping solvers.

The diffusion step solves a constant tridiagonal system (backward Euler on
(1/2) d2/dx2 with Dirichlet ends); forward-elimination coefficients are
precomputed once per solve.  The repulsive drift is advanced by its exact
flow (a quartic solved by guarded Newton), which keeps every per-step map
monotone in the state and in the drift strength -- the property the coupled
solvers rely on for pathwise ordering.
"""

import numba as nb
import numpy as np

__all__ = [
    "forward_coeffs",
    "tridiag_solve",
    "drift_flow",
    "ordered_kernel",
    "linear_kernel",
]


@nb.njit(cache=True)
def forward_coeffs(nx, r):
    """Elimination coefficients for the system (1+2r) on the diagonal, -r off."""
    cp = np.empty(nx)
    den = np.empty(nx)
    dm = 1.0 + 2.0 * r
    den[0] = dm
    cp[0] = -r / dm
    for i in range(1, nx):
        m = dm + r * cp[i - 1]
        den[i] = m
        cp[i] = -r / m
    return cp, den


@nb.njit(cache=True)
def tridiag_solve(cp, den, r, rhs, out):
    """Back-substitution for the precomputed constant tridiagonal system."""
    n = rhs.shape[0]
    out[0] = rhs[0] / den[0]
    for i in range(1, n):
        out[i] = (rhs[i] + r * out[i - 1]) / den[i]
    for i in range(n - 2, -1, -1):
        out[i] = out[i] - cp[i] * out[i + 1]


@nb.njit(cache=True)
def drift_flow(rp, c, lam, dt):
    """Exact flow of dr/dt = c/(lam + max(r,0)^3) over one step.

    For r >= 0 the flow integrates to the quartic lam*r + r^4/4 = const,
    solved by Newton from a point where the residual is nonnegative (the
    quartic is convex, so the iteration is monotone).  Increasing in the
    start value and in c.
    """
    if c <= 0.0:
        return rp
    if rp < 0.0:
        # constant push c/lam below zero
        t0 = -rp * lam / c
        if t0 >= dt:
            return rp + (c / lam) * dt
        rem = dt - t0
        target = c * rem
    else:
        target = lam * rp + 0.25 * rp ** 4 + c * dt
    x = (4.0 * target) ** 0.25
    for _ in range(60):
        g = 0.25 * x ** 4 + lam * x - target
        gp = x ** 3 + lam
        step = g / gp
        x -= step
        if abs(step) <= 1e-15 * (1.0 + abs(x)):
            break
    if x < 0.0:
        x = 0.0
    return x


@nb.njit(cache=True)
def ordered_kernel(noise, initial, a, r, c, lam, dt, dx, record_eta):
    """Drift flow, implicit diffusion with noise, projection at zero.

    Every sub-map is monotone in the state, so two runs sharing ``noise``
    with ordered initial rows and ordered drift strengths stay ordered.
    Projection increments are recorded as the reflection density
    max(-u, 0) * dx / dt per cell.
    """
    nt, nx = noise.shape
    values = np.empty((nt + 1, nx + 2))
    neta = nt if record_eta else 0
    eta = np.zeros((neta, nx))
    for j in range(nx + 2):
        values[0, j] = initial[j]
    u = np.empty(nx)
    for i in range(nx):
        u[i] = initial[i + 1]
    cp, den = forward_coeffs(nx, r)
    rhs = np.empty(nx)
    ut = np.empty(nx)
    for k in range(nt):
        for i in range(nx):
            v = u[i]
            if c > 0.0:
                v = drift_flow(v, c, lam, dt)
            rhs[i] = v + noise[k, i] / dx
        rhs[0] += r * a
        rhs[nx - 1] += r * a
        tridiag_solve(cp, den, r, rhs, ut)
        for i in range(nx):
            w = ut[i]
            if w < 0.0:
                if record_eta:
                    eta[k, i] = -w * dx / dt
                u[i] = 0.0
            else:
                u[i] = w
        values[k + 1, 0] = a
        values[k + 1, nx + 1] = a
        for i in range(nx):
            values[k + 1, i + 1] = u[i]
    return values, eta


@nb.njit(cache=True)
def linear_kernel(noise, initial, a, r, dx):
    """Semi-implicit stepping with no drift and no projection."""
    nt, nx = noise.shape
    values = np.empty((nt + 1, nx + 2))
    for j in range(nx + 2):
        values[0, j] = initial[j]
    u = np.empty(nx)
    for i in range(nx):
        u[i] = initial[i + 1]
    cp, den = forward_coeffs(nx, r)
    rhs = np.empty(nx)
    ut = np.empty(nx)
    for k in range(nt):
        for i in range(nx):
            rhs[i] = u[i] + noise[k, i] / dx
        rhs[0] += r * a
        rhs[nx - 1] += r * a
        tridiag_solve(cp, den, r, rhs, ut)
        for i in range(nx):
            u[i] = ut[i]
        values[k + 1, 0] = a
        values[k + 1, nx + 1] = a
        for i in range(nx):
            values[k + 1, i + 1] = u[i]
    return values
