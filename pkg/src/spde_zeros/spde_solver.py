"""Time-stepping solvers for the reflected and repulsive stochastic heat equations.

All solvers share the same discretization: backward Euler on the diffusion
(1/2) d2/dx2 (unconditionally stable, so dt ~ dx^2 is a choice rather than a
constraint), Dirichlet boundary level ``a``, and white-noise forcing with
per-cell variance dt*dx injected as increment/dx per node.

Two drift treatments coexist:

* ``step_penalized`` / ``solve_penalized`` evaluate the bounded penalty drift
  explicitly at the previous state.  This is the plain scheme; it is adequate
  when the penalization parameters are moderate.
* ``solve_reflected`` and ``solve_coupled_family`` use a monotone variant:
  exact integration of the repulsion flow, then the linear solve, then
  projection onto the nonnegative cone with the projected mass recorded as
  the reflection density.  Every sub-map is monotone in the state and in the
  drift strength, which makes pathwise comparisons across a family driven by
  one noise realization exact up to rounding --- the plain explicit scheme
  cannot deliver that once the penalization is stiff.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import _kernels
from .bessel import repulsion_strength

__all__ = [
    "GridSpec",
    "NoiseRealization",
    "FieldPath",
    "SolverConfig",
    "penalty_drift",
    "step_penalized",
    "solve_penalized",
    "solve_reflected",
    "solve_coupled_family",
    "solve_monotone_limit",
    "solve_vector_dirichlet",
]


@dataclass(frozen=True)
class GridSpec:
    """Space-time discretization of [b, c] x [0, T].

    ``nx`` counts interior nodes, so dx = (c - b)/(nx + 1); boundary nodes
    are carried explicitly by the field arrays.
    """

    b: float
    c: float
    nx: int
    T: float
    nt: int

    def __post_init__(self):
        if not self.b < self.c:
            raise ValueError(f"interval must satisfy b < c, got [{self.b}, {self.c}]")
        if self.nx < 2:
            raise ValueError(f"nx must be >= 2, got {self.nx}")
        if self.nt < 1:
            raise ValueError(f"nt must be >= 1, got {self.nt}")
        if self.T <= 0.0:
            raise ValueError(f"T must be > 0, got {self.T}")

    @property
    def dx(self):
        return (self.c - self.b) / (self.nx + 1)

    @property
    def dt(self):
        return self.T / self.nt

    @property
    def x_nodes(self):
        """All nodes including both boundary nodes (length nx + 2)."""
        return np.linspace(self.b, self.c, self.nx + 2)

    @property
    def t_nodes(self):
        return np.linspace(0.0, self.T, self.nt + 1)

    def stable_explicit(self):
        """Whether a fully explicit diffusion step is stable on this grid."""
        return self.dt <= self.dx * self.dx / 2.0

    @classmethod
    def default_resolution(cls, nx, T, interval=(0.0, 1.0)):
        """Grid with dt matched to dx^2 (parabolic scaling)."""
        b, c = interval
        dx = (c - b) / (nx + 1)
        nt = max(1, round(T / (dx * dx)))
        return cls(b=b, c=c, nx=nx, T=T, nt=nt)


@dataclass(frozen=True)
class NoiseRealization:
    """Seeded white-noise increments on a grid; cell variance dt*dx.

    ``increments`` has shape (dim, nt, nx).  The same seed and grid always
    reproduce the same array bit for bit.
    """

    grid: GridSpec
    seed: int
    dim: int
    increments: np.ndarray = field(repr=False)

    @classmethod
    def generate(cls, grid, seed, dim=1):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        rng = np.random.default_rng(seed)
        scale = math.sqrt(grid.dt * grid.dx)
        inc = rng.normal(0.0, scale, size=(dim, grid.nt, grid.nx))
        return cls(grid=grid, seed=seed, dim=dim, increments=inc)

    def component(self, j=0):
        return self.increments[j]


@dataclass
class FieldPath:
    """Field values on the full grid plus optional reflection increments.

    ``values`` has shape (nt+1, nx+2) for scalar fields or (nt+1, nx+2, d)
    for vector fields; boundary columns hold the boundary value at every
    time.  When present, ``eta[k, i]`` is the reflection density attributed
    to the step from t_k to t_{k+1} at interior node i, and the cell
    complementarity values[k+1, i+1] * eta[k, i] == 0 holds exactly.
    """

    grid: GridSpec
    values: np.ndarray
    boundary_value: float = 0.0
    eta: np.ndarray | None = None

    @property
    def dim(self):
        return 1 if self.values.ndim == 2 else self.values.shape[2]

    def interior(self):
        return self.values[:, 1:-1]

    def total_eta_mass(self):
        """Reported mass convention: sum(eta) * dx * dt."""
        if self.eta is None:
            return 0.0
        return float(np.sum(self.eta)) * self.grid.dx * self.grid.dt

    def eta_slice_mass(self):
        """Per-step reflection mass, same convention as total_eta_mass."""
        if self.eta is None:
            return np.zeros(0)
        return np.sum(self.eta, axis=1) * self.grid.dx * self.grid.dt


@dataclass(frozen=True)
class SolverConfig:
    """Drift regime and boundary level for one solve.

    ``epsilon``/``lam`` absent means the reflected equation; both present
    means the penalized drift.  ``delta`` fixes the repulsion coefficient
    (zero at delta = 3).
    """

    delta: float = 3.0
    epsilon: float | None = None
    lam: float | None = None
    boundary_value: float = 0.0
    scheme: str = "semi-implicit"

    def __post_init__(self):
        if self.delta < 3.0:
            raise ValueError(f"delta must be >= 3, got {self.delta}")
        if self.boundary_value < 0.0:
            raise ValueError(f"boundary value must be >= 0, got {self.boundary_value}")
        if self.scheme not in ("semi-implicit", "explicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if (self.epsilon is None) != (self.lam is None):
            raise ValueError("epsilon and lam must be supplied together")
        if self.epsilon is not None and (self.epsilon <= 0.0 or self.lam <= 0.0):
            raise ValueError("penalization parameters must be > 0")

    @property
    def penalized(self):
        return self.epsilon is not None

    @property
    def repulsion(self):
        return repulsion_strength(self.delta)


def penalty_drift(r, epsilon, lam, delta):
    """Bounded stand-in for the singular drift: push-up below zero plus
    smoothed repulsion above.  Nonnegative, nonincreasing, bounded by
    pi/(2 epsilon) + coefficient/lam.
    """
    if epsilon <= 0.0 or lam <= 0.0:
        raise ValueError("epsilon and lam must be > 0")
    c = repulsion_strength(delta)
    r = np.asarray(r, dtype=float)
    below = np.minimum(r, 0.0)
    above = np.maximum(r, 0.0)
    out = np.arctan(below * below) / epsilon + c / (lam + above ** 3)
    return float(out) if out.ndim == 0 else out


def _check_initial(initial, grid, a):
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (grid.nx + 2,):
        raise ValueError(f"initial must have shape ({grid.nx + 2},), got {initial.shape}")
    if np.any(initial < 0.0):
        raise ValueError("initial data must be nonnegative (negative entries are rejected, not clipped)")
    if abs(initial[0] - a) > 1e-12 or abs(initial[-1] - a) > 1e-12:
        raise ValueError(f"initial endpoints must equal the boundary value {a}")
    return initial


def _banded_matrix(nx, r):
    ab = np.zeros((3, nx))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-1] = -r
    return ab


def step_penalized(row, noise_row, config, grid):
    """One step with the penalty drift evaluated at the previous state.

    Semi-implicit: solve (I - (dt/2) Lap_h) u' = u + dt f(u) + dW/dx with the
    tridiagonal system solved exactly.  Explicit scheme applies the Laplacian
    at the previous state and requires dt <= dx^2/2.
    """
    row = np.asarray(row, dtype=float)
    if row.shape != (grid.nx + 2,):
        raise ValueError(f"row must have shape ({grid.nx + 2},), got {row.shape}")
    a = config.boundary_value
    dt, dx = grid.dt, grid.dx
    u = row[1:-1]
    if config.penalized:
        drift = penalty_drift(u, config.epsilon, config.lam, config.delta)
    else:
        drift = 0.0
    forcing = u + dt * drift + noise_row / dx
    out = np.empty_like(row)
    out[0] = out[-1] = a
    if config.scheme == "explicit":
        if not grid.stable_explicit():
            raise ValueError("explicit scheme requires dt <= dx^2/2")
        lap = (row[:-2] - 2.0 * u + row[2:]) / (dx * dx)
        out[1:-1] = forcing + (dt / 2.0) * lap
        return out
    r = dt / (2.0 * dx * dx)
    rhs = forcing.copy()
    rhs[0] += r * a
    rhs[-1] += r * a
    out[1:-1] = solve_banded((1, 1), _banded_matrix(grid.nx, r), rhs, check_finite=False)
    return out


def solve_penalized(initial, config, grid, noise):
    """Full path of the penalized equation (explicit drift, no projection)."""
    if not config.penalized:
        raise ValueError("solve_penalized needs penalization parameters; use solve_reflected otherwise")
    a = config.boundary_value
    initial = _check_initial(initial, grid, a)
    row = initial.copy()
    values = np.empty((grid.nt + 1, grid.nx + 2))
    values[0] = row
    inc = noise.component(0)
    for k in range(grid.nt):
        row = step_penalized(row, inc[k], config, grid)
        values[k + 1] = row
    return FieldPath(grid=grid, values=values, boundary_value=a, eta=None)


def solve_reflected(initial, grid, noise, a=0.0):
    """Reflected equation: linear semi-implicit update, then projection.

    The projected deficit is recorded as the reflection density, giving
    exact per-cell complementarity with the returned field.
    """
    if a < 0.0:
        raise ValueError(f"boundary value must be >= 0, got {a}")
    initial = _check_initial(initial, grid, a)
    r = grid.dt / (2.0 * grid.dx * grid.dx)
    values, eta = _kernels.ordered_kernel(
        noise.component(0), initial, a, r, 0.0, 1.0, grid.dt, grid.dx, True
    )
    return FieldPath(grid=grid, values=values, boundary_value=a, eta=eta)


def _ordered_solve(config, grid, noise, initial, lam):
    r = grid.dt / (2.0 * grid.dx * grid.dx)
    values, eta = _kernels.ordered_kernel(
        noise.component(0),
        initial,
        config.boundary_value,
        r,
        config.repulsion,
        lam,
        grid.dt,
        grid.dx,
        True,
    )
    return FieldPath(grid=grid, values=values, boundary_value=config.boundary_value, eta=eta)


def solve_coupled_family(members, grid, noise, initial):
    """Solve a family of configurations against one shared noise realization.

    All members run the monotone scheme (exact repulsion flow + projection),
    so the returned paths are ordered pointwise: larger delta, or smaller
    lam, dominates.  Members must share the boundary value; the reflected
    member is simply the one with delta = 3.  The below-zero penalty term is
    subsumed by the projection, so ``epsilon`` does not enter here.
    """
    members = list(members)
    if not members:
        raise ValueError("family must contain at least one member")
    a = members[0].boundary_value
    if any(m.boundary_value != a for m in members):
        raise ValueError("family members must share the boundary value")
    initial = _check_initial(initial, grid, a)
    if noise.grid != grid:
        raise ValueError("noise was generated for a different grid")
    out = []
    for m in members:
        lam = m.lam if m.lam is not None else 1.0
        out.append(_ordered_solve(m, grid, noise, initial, lam))
    return out


def solve_monotone_limit(delta, grid, noise, initial, a=0.0, lam0=0.1, factor=10.0, max_len=5, tol=1e-4):
    """Repulsive solve driven down a geometric penalization ladder.

    Runs the monotone scheme with lam = lam0, lam0/factor, ... until the
    sup-norm change drops below ``tol`` or the ladder is exhausted; returns
    the last path and the ladder actually used.  At delta = 3 the drift
    vanishes and the reflected solution is returned directly.
    """
    config = SolverConfig(delta=delta, boundary_value=a)
    if config.repulsion == 0.0:
        return solve_reflected(initial, grid, noise, a=a), [0.0]
    lams = []
    prev = None
    lam = lam0
    for _ in range(max_len):
        lams.append(lam)
        path = _ordered_solve(config, grid, noise, np.asarray(initial, dtype=float), lam)
        if prev is not None and float(np.max(np.abs(path.values - prev.values))) < tol:
            prev = path
            break
        prev = path
        lam /= factor
    return prev, lams


def solve_vector_dirichlet(d, initial, grid, noise):
    """d independent linear stochastic heat solves with zero boundary."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if noise.dim < d:
        raise ValueError(f"noise carries {noise.dim} components, need {d}")
    initial = np.asarray(initial, dtype=float)
    if initial.ndim == 1:
        initial = initial[:, None]
    if initial.shape != (grid.nx + 2, d):
        raise ValueError(f"initial must have shape ({grid.nx + 2}, {d})")
    if np.any(np.abs(initial[0]) > 1e-12) or np.any(np.abs(initial[-1]) > 1e-12):
        raise ValueError("initial components must vanish at the boundary")
    r = grid.dt / (2.0 * grid.dx * grid.dx)
    values = np.empty((grid.nt + 1, grid.nx + 2, d))
    for j in range(d):
        values[:, :, j] = _kernels.linear_kernel(noise.component(j), initial[:, j], 0.0, r, grid.dx)
    return FieldPath(grid=grid, values=values if d > 1 else values[:, :, 0], boundary_value=0.0, eta=None)
