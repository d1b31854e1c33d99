"""Simulation of the vector-valued stationary pinned string on a buffered window.

The field solves the linear stochastic heat equation on the whole line with
two-sided Brownian initial data pinned to 0 at the origin.  Simulation runs
on [-R-m, R+m] with a margin m sized so that kernel mass leaking past the
buffer stays below 1e-6 (m >= 10 sqrt(T)); statistics are read off [-R, R].
Each time step convolves the field with the exact Gaussian kernel sampled on
the grid (simply truncated at the window ends) and injects fresh white noise
with the same cell-variance convention as the interval solvers.

Per component the initial increments have variance |x - y|: that is the
two-sided Brownian motion consistent with the linear-in-distance covariance
bounds the tests check.  ``exact_increment_variance`` evaluates the exact
squared-increment function of the continuum field by quadrature and serves
as the analytic reference curve.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .spde_solver import FieldPath, GridSpec

__all__ = [
    "StringSpec",
    "StringField",
    "sample_initial_string",
    "simulate_string",
    "scaling_transform",
    "translate_and_reverse",
    "exact_increment_variance",
]

_MARGIN_FACTOR = 10.0  # 2 sqrt(T) times safety factor 5


@dataclass(frozen=True)
class StringSpec:
    """Window, resolution and component count for one string simulation.

    ``nx`` plays the same role as in GridSpec but across the analysis window
    [-R, R]: dx = 2R/(nx + 1).  ``nt`` defaults to parabolic scaling
    dt = dx^2; ``margin`` defaults to the smallest buffer satisfying the
    leakage rule.
    """

    d: int
    half_width: float
    nx: int
    T: float
    nt: int | None = None
    margin: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.half_width <= 0.0:
            raise ValueError(f"half_width must be > 0, got {self.half_width}")
        if self.nx < 2:
            raise ValueError(f"nx must be >= 2, got {self.nx}")
        if self.T <= 0.0:
            raise ValueError(f"T must be > 0, got {self.T}")
        if self.margin is not None and self.margin < _MARGIN_FACTOR * math.sqrt(self.T):
            raise ValueError(
                f"margin {self.margin} too small: need >= {_MARGIN_FACTOR}*sqrt(T) "
                "to keep kernel leakage below 1e-6"
            )

    @property
    def dx(self):
        return 2.0 * self.half_width / (self.nx + 1)

    @property
    def dt(self):
        steps = self.nt if self.nt is not None else max(1, round(self.T / self.dx ** 2))
        return self.T / steps

    @property
    def steps(self):
        return self.nt if self.nt is not None else max(1, round(self.T / self.dx ** 2))

    @property
    def buffer(self):
        return self.margin if self.margin is not None else _MARGIN_FACTOR * math.sqrt(self.T)

    @property
    def side_nodes(self):
        """Nodes strictly on one side of the pinned origin."""
        return int(math.ceil((self.half_width + self.buffer) / self.dx))


@dataclass
class StringField:
    """Sampled string field with its own lattice metadata.

    ``values`` has shape (nt + 1, nodes, d) with nodes symmetric about 0.
    Transforms return new StringField objects on their induced lattices.
    """

    values: np.ndarray
    dx: float
    dt: float
    half_width: float
    margin: float
    seed: int | None = None

    @property
    def d(self):
        return self.values.shape[2]

    @property
    def nodes(self):
        return self.values.shape[1]

    @property
    def steps(self):
        return self.values.shape[0] - 1

    @property
    def center(self):
        return (self.nodes - 1) // 2

    @property
    def x_nodes(self):
        return (np.arange(self.nodes) - self.center) * self.dx

    @property
    def t_nodes(self):
        return np.arange(self.steps + 1) * self.dt

    def value_at(self, t, x):
        """Field vector at a lattice point (t, x); raises off-lattice."""
        k = t / self.dt
        i = x / self.dx
        if abs(k - round(k)) > 1e-9 or abs(i - round(i)) > 1e-9:
            raise ValueError(f"({t}, {x}) is not on the lattice")
        k, i = int(round(k)), int(round(i)) + self.center
        if not (0 <= k <= self.steps and 0 <= i < self.nodes):
            raise ValueError(f"({t}, {x}) lies outside the simulated window")
        return self.values[k, i]

    def analysis_path(self):
        """FieldPath view restricted to the analysis window [-R, R]."""
        n = int(math.floor(self.half_width / self.dx + 1e-9))
        sel = slice(self.center - n, self.center + n + 1)
        vals = self.values[:, sel, :]
        if self.d == 1:
            vals = vals[:, :, 0]
        grid = GridSpec(b=-n * self.dx, c=n * self.dx, nx=2 * n - 1,
                        T=self.steps * self.dt, nt=self.steps)
        return FieldPath(grid=grid, values=vals, boundary_value=0.0, eta=None)


def sample_initial_string(spec, rng):
    """Two-sided Brownian start pinned at the origin, increment variance dx."""
    n = spec.side_nodes
    std = math.sqrt(spec.dx)
    right = np.cumsum(rng.normal(0.0, std, size=(n, spec.d)), axis=0)
    left = np.cumsum(rng.normal(0.0, std, size=(n, spec.d)), axis=0)
    out = np.empty((2 * n + 1, spec.d))
    out[n] = 0.0
    out[n + 1:] = right
    out[n - 1::-1] = left
    return out


def _kernel_taps(dt, dx):
    reach = int(math.ceil(8.6 * math.sqrt(dt) / dx))
    j = np.arange(-reach, reach + 1)
    taps = np.exp(-(j * dx) ** 2 / (2.0 * dt)) * dx / math.sqrt(2.0 * math.pi * dt)
    return taps


def simulate_string(spec, rng, seed=None):
    """Evolve the pinned string; returns the full sampled field.

    One step is a truncated convolution with the exact heat kernel followed
    by white-noise injection (increment std sqrt(dt*dx), divided by dx per
    node), independently per component.
    """
    u = sample_initial_string(spec, rng)
    nodes = u.shape[0]
    steps = spec.steps
    dt = spec.T / steps
    dx = spec.dx
    taps = _kernel_taps(dt, dx)
    noise_std = math.sqrt(dt * dx) / dx
    values = np.empty((steps + 1, nodes, spec.d))
    values[0] = u
    cur = u.copy()
    for k in range(steps):
        for j in range(spec.d):
            cur[:, j] = np.convolve(cur[:, j], taps, mode="same")
        cur += rng.normal(0.0, noise_std, size=(nodes, spec.d))
        values[k + 1] = cur
    return StringField(values=values, dx=dx, dt=dt,
                       half_width=spec.half_width, margin=spec.buffer, seed=seed)


def _as_integer(x, what):
    if abs(x - round(x)) > 1e-9:
        raise ValueError(f"{what} must be an integer for a grid-commensurate transform, got {x}")
    return int(round(x))


def scaling_transform(field, L):
    """Resample (t, x) -> U(L^4 t, L^2 x)/L by pure grid reindexing.

    Supported when L^2 or 1/L^2 is an integer (e.g. L = sqrt(2) strides the
    source lattice; L = 1/sqrt(2) re-labels it with expanded spacing).  The
    transformed field has the law of the original on its lattice.
    """
    if L <= 0.0:
        raise ValueError(f"L must be > 0, got {L}")
    if L >= 1.0:
        s = _as_integer(L * L, "L^2")
        stride_t, stride_x = s * s, s
        kmax = field.steps // stride_t
        nside = ((field.nodes - 1) // 2) // stride_x
        if kmax < 1 or nside < 1:
            raise ValueError("source field too small for this scaling stride")
        ks = np.arange(kmax + 1) * stride_t
        xs = field.center + stride_x * (np.arange(-nside, nside + 1))
        vals = field.values[np.ix_(ks, xs)] / L
        new_half = min(field.half_width / (L * L), nside * field.dx)
        if new_half < field.dx:
            raise ValueError("analysis window collapses under this scaling")
        return StringField(values=vals, dx=field.dx, dt=field.dt,
                           half_width=new_half,
                           margin=field.margin / (L * L), seed=field.seed)
    s = _as_integer(1.0 / (L * L), "1/L^2")
    vals = field.values / L
    return StringField(values=vals.copy(), dx=field.dx * s, dt=field.dt * s * s,
                       half_width=field.half_width * s, margin=field.margin * s,
                       seed=field.seed)


def translate_and_reverse(field, t0=0.0, x0=0.0, mode="translate"):
    """Pathwise shift or time reversal, re-pinned at the new origin.

    translate: (t, x) -> U(t0 + t, x0 + x) - U(t0, x0);
    reverse:   (t, x) -> U(T - t, x) - U(T, 0).
    Shifts must be lattice-commensurate and stay inside the window.
    """
    if mode == "reverse":
        if t0 != 0.0 or x0 != 0.0:
            raise ValueError("reverse mode takes no shift")
        vals = field.values[::-1] - field.values[-1, field.center]
        return StringField(values=vals.copy(), dx=field.dx, dt=field.dt,
                           half_width=field.half_width, margin=field.margin,
                           seed=field.seed)
    if mode != "translate":
        raise ValueError(f"unknown mode {mode!r}")
    k0 = _as_integer(t0 / field.dt, "t0/dt")
    i0 = _as_integer(x0 / field.dx, "x0/dx")
    if not 0 <= k0 <= field.steps:
        raise ValueError("t0 outside the simulated horizon")
    new_half = field.half_width - abs(x0)
    if new_half < field.dx:
        raise ValueError("x0 shifts the analysis window out of range")
    nside = (field.nodes - 1) // 2 - abs(i0)
    sel = np.arange(-nside, nside + 1) + field.center + i0
    base = field.values[k0, field.center + i0]
    vals = field.values[k0:, sel] - base
    return StringField(values=vals.copy(), dx=field.dx, dt=field.dt,
                       half_width=new_half, margin=field.margin, seed=field.seed)


def exact_increment_variance(t, x, s, y, n=4000):
    """Exact E[(U_t(x) - U_s(y))^2] per component, by quadrature.

    Splits into the initial-data part (a white-noise integral of the
    difference of two Gaussian CDFs) and the forcing part (Gaussian-product
    integrals reduced to one dimension).  Requires t, s > 0.
    """
    if min(t, s) <= 0.0:
        raise ValueError("both times must be > 0")
    if t < s:
        t, s, x, y = s, t, y, x
    st, ss = math.sqrt(t), math.sqrt(s)
    lo = min(x - 10.0 * st, y - 10.0 * ss)
    hi = max(x + 10.0 * st, y + 10.0 * ss)
    z = np.linspace(lo, hi, n)
    h = ndtr((z - x) / st) - ndtr((z - y) / ss)
    part_initial = np.trapezoid(h * h, z)

    # forcing part: sqrt(t/pi) + sqrt(s/pi) - int_{t-s}^{t+s} G_tau(x-y) dtau
    # with tau = w^2 the integrand becomes sqrt(2/pi) exp(-(x-y)^2/(2 w^2))
    w = np.linspace(math.sqrt(max(t - s, 0.0)), math.sqrt(t + s), n)
    dxy = x - y
    if dxy == 0.0:
        integrand = np.full_like(w, math.sqrt(2.0 / math.pi))
    else:
        with np.errstate(divide="ignore"):
            integrand = math.sqrt(2.0 / math.pi) * np.exp(
                -np.divide(dxy * dxy, 2.0 * w * w, out=np.full_like(w, np.inf), where=w > 0)
            )
        integrand[w == 0.0] = 0.0
    part_forcing = math.sqrt(t / math.pi) + math.sqrt(s / math.pi) - np.trapezoid(integrand, w)
    return float(part_initial + part_forcing)
