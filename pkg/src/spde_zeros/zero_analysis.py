"""Zero-set statistics of sampled fields: thresholded cluster counts, their
sup over time, closed-form count bounds, Hölder-modulus estimators, and
reflection-measure diagnostics.

A discrete field never lands on zero exactly (outside of projection events),
so "zero" means "below a threshold".  The default threshold is tied to the
spatial resolution as coeff * dx^(alpha/2); counts are meaningful as trends
across resolutions, not as exact continuum cardinalities.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ClusterConfig",
    "ZeroReport",
    "HolderReport",
    "ReflectionProfile",
    "default_threshold",
    "count_zero_clusters",
    "count_zero_clusters_block",
    "zeta_sup",
    "zero_count_bound",
    "string_zero_bound",
    "holder_estimate",
    "reflection_measure_profile",
]


def default_threshold(dx, coeff=0.5, alpha=0.7):
    """Resolution-tied threshold coeff * dx^(alpha/2) with alpha in (0, 1)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return coeff * dx ** (alpha / 2.0)


@dataclass(frozen=True)
class ClusterConfig:
    """Threshold and clustering rules for counting near-zeros of a slice.

    ``boundary_exclusion`` drops that many nodes at each end of the slice
    (the boundary itself is pinned to the boundary value, so at least one
    node must go).  Runs of sub-threshold nodes closer than
    ``min_separation`` nodes merge into one cluster.
    """

    threshold: float
    min_separation: int = 4
    boundary_exclusion: int = 1

    def __post_init__(self):
        if self.threshold <= 0.0:
            raise ValueError(f"threshold must be > 0, got {self.threshold}")
        if self.min_separation < 1:
            raise ValueError(f"min_separation must be >= 1, got {self.min_separation}")
        if self.boundary_exclusion < 1:
            raise ValueError(f"boundary_exclusion must be >= 1, got {self.boundary_exclusion}")


@dataclass
class ZeroReport:
    """Per-slice cluster counts and their sup over positive times."""

    counts: np.ndarray
    zeta_sup: int
    threshold: float
    min_separation: int
    boundary_exclusion: int
    nx: int
    nt: int

    def to_rows(self, t_nodes):
        return [(float(t_nodes[k]), int(self.counts[k])) for k in range(self.counts.size)]


@dataclass
class HolderReport:
    """Empirical modulus statistics at exponent beta.

    ``gamma_space`` is the sup of |du| / dx^beta over dyadic node lags;
    ``gamma_time_lower`` the sup of the one-sided drop -du / dt^(beta/2)
    over dyadic time lags; ``gamma_time_abs`` the two-sided version, which
    is reported for observation only.  ``refinement_ratio`` compares the
    space statistic on a refined path when one is supplied.
    """

    beta: float
    gamma_space: float
    gamma_time_lower: float
    gamma_time_abs: float
    refinement_ratio: float | None = None


@dataclass
class ReflectionProfile:
    """Cluster counts on the time slices that carry the reflection mass."""

    total_mass: float
    heavy_slice_count: int
    fraction_single_cluster: float
    misplaced_mass: float
    counts: np.ndarray


def _slice_magnitude(slice_values):
    """Map vector nodes through the Euclidean norm; scalars pass through."""
    arr = np.asarray(slice_values, dtype=float)
    if arr.ndim == 2:
        return np.sqrt(np.sum(arr * arr, axis=1))
    return arr


def count_zero_clusters(slice_values, config):
    """Number of merged sub-threshold runs in one spatial slice."""
    mag = _slice_magnitude(slice_values)
    ex = config.boundary_exclusion
    if mag.size < 2 * ex + 1:
        raise ValueError("slice too short for the requested boundary exclusion")
    interior = mag[ex:-ex]
    below = interior < config.threshold
    if not np.any(below):
        return 0
    idx = np.flatnonzero(below)
    gaps = np.diff(idx) - 1
    return 1 + int(np.sum(gaps >= config.min_separation))


def count_zero_clusters_block(values, config):
    """Per-row cluster counts for a stack of slices (rows of ``values``).

    Equivalent to mapping count_zero_clusters over the rows: a sub-threshold
    node opens a new cluster exactly when no sub-threshold node sits within
    ``min_separation`` columns to its left.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 3:
        arr = np.sqrt(np.sum(arr * arr, axis=2))
    ex = config.boundary_exclusion
    if arr.shape[1] < 2 * ex + 1:
        raise ValueError("slices too short for the requested boundary exclusion")
    below = arr[:, ex:-ex] < config.threshold
    opens = below.copy()
    for g in range(1, config.min_separation + 1):
        opens[:, g:] &= ~below[:, :-g]
        # columns with fewer than g left neighbours keep their current state
    return np.sum(opens, axis=1).astype(np.int64)


def zeta_sup(path, config, t_start=0.0):
    """Per-slice counts and their sup over slices with t in (t_start, T].

    ``path`` may be a FieldPath or any object with ``values`` on a grid with
    ``t_nodes``; the t = 0 slice never enters the sup.  Vector-valued fields
    are reduced through the node-wise Euclidean norm before counting.
    """
    values = path.values
    t_nodes = path.grid.t_nodes
    nt = values.shape[0] - 1
    counts = count_zero_clusters_block(values, config)
    live = t_nodes > max(t_start, 0.0)
    live[0] = False
    sup = int(np.max(counts[live])) if np.any(live) else 0
    return ZeroReport(
        counts=counts,
        zeta_sup=sup,
        threshold=config.threshold,
        min_separation=config.min_separation,
        boundary_exclusion=config.boundary_exclusion,
        nx=values.shape[1] - 2,
        nt=nt,
    )


def zero_count_bound(delta):
    """Largest possible simultaneous zero count, floor(4/(delta-2)).

    Case list: 0 for delta > 6, 1 on (4, 6], 2 on (10/3, 4], 3 on (3, 10/3],
    4 at delta = 3.  A small relative bump keeps boundary points (which are
    not representable exactly in binary) on their closed side.
    """
    if delta < 3.0:
        raise ValueError(f"delta must be >= 3, got {delta}")
    q = 4.0 / (delta - 2.0)
    return int(math.floor(q + 1e-9))


def string_zero_bound(d):
    """Simultaneous zero bound for the d-component pinned string.

    0 for d >= 6, 1 for d in {4, 5}, 3 for d = 3, unbounded (inf) for d <= 2.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if d >= 6:
        return 0
    if d >= 4:
        return 1
    if d == 3:
        return 3
    return math.inf


def _dyadic_lags(n):
    lags = []
    lag = 1
    while lag < n:
        lags.append(lag)
        lag *= 2
    return lags


def holder_estimate(path, beta, refined=None):
    """Empirical space/time modulus statistics over dyadic lags.

    beta must lie in (0, 1/2).  When ``refined`` (a finer-resolution path of
    the same field family) is supplied, ``refinement_ratio`` is the ratio of
    its space statistic to this one.
    """
    if not 0.0 < beta < 0.5:
        raise ValueError(f"beta must lie in (0, 1/2), got {beta}")
    values = path.values
    if values.ndim == 3:
        values = np.sqrt(np.sum(values * values, axis=2))
    dx, dt = path.grid.dx, path.grid.dt
    nt1, nxb = values.shape

    g_space = 0.0
    for lag in _dyadic_lags(nxb):
        diff = np.max(np.abs(values[:, lag:] - values[:, :-lag]))
        g_space = max(g_space, diff / (lag * dx) ** beta)

    g_time_lower = 0.0
    g_time_abs = 0.0
    for lag in _dyadic_lags(nt1):
        d = values[lag:, :] - values[:-lag, :]
        denom = (lag * dt) ** (beta / 2.0)
        g_time_lower = max(g_time_lower, float(np.max(-d)) / denom)
        g_time_abs = max(g_time_abs, float(np.max(np.abs(d))) / denom)

    ratio = None
    if refined is not None:
        fine = holder_estimate(refined, beta)
        ratio = fine.gamma_space / g_space if g_space > 0.0 else math.inf
    return HolderReport(
        beta=beta,
        gamma_space=g_space,
        gamma_time_lower=max(g_time_lower, 0.0),
        gamma_time_abs=g_time_abs,
        refinement_ratio=ratio,
    )


def reflection_measure_profile(path, config, mass_quantile=0.99):
    """Cluster counts at the times that carry the reflection mass.

    Restricts both the mass accounting and the counting to the interior
    window left by ``boundary_exclusion``.  Reports the fraction of the
    heaviest slices (covering ``mass_quantile`` of the interior mass) whose
    post-step field shows exactly one cluster, and the reflection mass
    sitting on cells whose post-step value exceeds the threshold (exactly
    zero by construction of the projection).
    """
    if path.eta is None:
        raise ValueError("path carries no reflection increments (penalized paths have none)")
    eta = path.eta
    values = path.values
    ex = config.boundary_exclusion
    inner = slice(ex - 1, eta.shape[1] - (ex - 1)) if ex > 1 else slice(None)
    eta_in = eta[:, inner]
    slice_mass = np.sum(eta_in, axis=1) * path.grid.dx * path.grid.dt
    total = float(np.sum(slice_mass))

    post = values[1:, 1:-1]
    misplaced = float(np.sum(eta[post > config.threshold]))

    if total <= 0.0:
        return ReflectionProfile(
            total_mass=0.0,
            heavy_slice_count=0,
            fraction_single_cluster=float("nan"),
            misplaced_mass=misplaced,
            counts=np.zeros(0, dtype=np.int64),
        )

    order = np.argsort(slice_mass)[::-1]
    cum = np.cumsum(slice_mass[order])
    need = int(np.searchsorted(cum, mass_quantile * total)) + 1
    heavy = np.sort(order[:need])
    counts = np.array(
        [count_zero_clusters(values[k + 1], config) for k in heavy], dtype=np.int64
    )
    frac = float(np.mean(counts == 1))
    return ReflectionProfile(
        total_mass=total,
        heavy_slice_count=need,
        fraction_single_cluster=frac,
        misplaced_mass=misplaced,
        counts=counts,
    )
