"""Experiment orchestration: seeding, replica execution, statistics, reports.

Replica seeds derive from the master seed by hashing (SHA-256 of master and
replica index), so two configurations differing only in replica count agree
on the shared prefix of seeds and replicas can run in any order or in
parallel without coordination.  Aggregation is a single fold over replica
rows in index order; output files are written once and are byte-identical
across repeated runs of the same configuration.

Statistical checks use the asymptotic Kolmogorov distribution for p-values;
experiments that assert on p run with sample sizes >= 500 where that
approximation is comfortable.
"""

import hashlib
import json
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bessel import BesselParams, bridge_marginal_cdf, sample_bessel_bridge
from .pinned_string import StringSpec, scaling_transform, simulate_string
from .spde_solver import (
    GridSpec,
    NoiseRealization,
    SolverConfig,
    solve_coupled_family,
    solve_reflected,
)
from .zero_analysis import ClusterConfig, default_threshold, zeta_sup

__all__ = [
    "ks_statistic",
    "derive_seed",
    "TestResult",
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
    "run_replicas",
    "summarize",
]

SCHEMA_VERSION = 1

KINDS = (
    "invariant-test",
    "hitting-sweep",
    "zeta-histogram",
    "string-zeros",
    "scaling-check",
    "coupling-check",
    "holder-check",
)


def _kolmogorov_sf(y):
    """Asymptotic Kolmogorov survival function 2 sum (-1)^{k-1} exp(-2 k^2 y^2)."""
    if y < 1e-8:
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, 101):
        term = math.exp(-2.0 * (k * y) ** 2)
        total += sign * term
        if term < 1e-18:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def ks_statistic(samples, cdf):
    """Two-sided KS statistic of samples against a reference CDF.

    Returns (D, p) with p from the asymptotic Kolmogorov distribution.
    Requires at least 20 samples and a nondegenerate sample.
    """
    samples = np.sort(np.asarray(samples, dtype=float))
    n = samples.size
    if n < 20:
        raise ValueError(f"need at least 20 samples, got {n}")
    if samples[0] == samples[-1]:
        raise ValueError("degenerate sample: all values equal")
    f = np.asarray(cdf(samples), dtype=float)
    if np.any(np.diff(f) < -1e-12):
        raise ValueError("reference cdf is not nondecreasing on the sample range")
    steps = np.arange(1, n + 1) / n
    d_plus = float(np.max(steps - f))
    d_minus = float(np.max(f - (steps - 1.0 / n)))
    d = max(d_plus, d_minus)
    return d, _kolmogorov_sf(math.sqrt(n) * d)


def derive_seed(master_seed, index):
    """Counter-based replica seed: hash of master seed and replica index."""
    digest = hashlib.sha256(struct.pack("<QQ", master_seed & (2 ** 64 - 1), index)).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class TestResult:
    """One named check; pass is a pure function of value, op and threshold."""

    name: str
    value: float
    threshold: float
    op: str = "<="
    n: int | None = None
    seed_info: str | None = None

    _OPS = {
        "<=": lambda v, t: v <= t,
        ">=": lambda v, t: v >= t,
        "<": lambda v, t: v < t,
        ">": lambda v, t: v > t,
    }

    @property
    def passed(self):
        return bool(self._OPS[self.op](self.value, self.threshold))

    def to_dict(self):
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "op": self.op,
            "pass": self.passed,
            "n": self.n,
            "seed_info": self.seed_info,
        }

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: value={self.value:.6g} {self.op} {self.threshold:.6g}"


@dataclass
class ExperimentConfig:
    """Declarative experiment description (JSON round-trippable)."""

    kind: str
    replicas: int
    master_seed: int
    params: dict = field(default_factory=dict)
    out_dir: str | None = None
    jobs: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; known: {KINDS}")
        if self.replicas < 0:
            raise ValueError("replicas must be >= 0")
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")

    def to_json(self):
        payload = {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "replicas": self.replicas,
            "master_seed": self.master_seed,
            "params": self.params,
            "out_dir": self.out_dir,
            "jobs": self.jobs,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        raw = json.loads(text)
        unknown = set(raw) - {"schema_version", "kind", "replicas", "master_seed",
                              "params", "out_dir", "jobs"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(
            kind=raw["kind"],
            replicas=int(raw["replicas"]),
            master_seed=int(raw["master_seed"]),
            params=raw.get("params", {}),
            out_dir=raw.get("out_dir"),
            jobs=int(raw.get("jobs", 1)),
            schema_version=int(raw.get("schema_version", SCHEMA_VERSION)),
        )


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list
    results: list
    summary: dict
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.results)


def _replica_entry(task):
    kind, seed, params = task
    try:
        return _REPLICA_FNS[kind](seed, params)
    except Exception as exc:  # surface the offending seed
        raise RuntimeError(f"replica with seed {seed} failed: {exc}") from exc


def run_replicas(kind, seeds, params, jobs=1):
    """Run one replica per seed, in seed order, optionally across processes."""
    tasks = [(kind, s, params) for s in seeds]
    if jobs <= 1 or len(tasks) < 2:
        return [_replica_entry(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_replica_entry, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def summarize(rows):
    """mean / stderr / min / max per metric plus zero-count histograms."""
    if not rows:
        return {"n": 0, "metrics": {}, "histograms": {}}
    keys = sorted(rows[0].keys())
    for r in rows:
        if sorted(r.keys()) != keys:
            raise ValueError("replica output schema mismatch")
    out = {"n": len(rows), "metrics": {}, "histograms": {}}
    for k in keys:
        vals = np.asarray([r[k] for r in rows], dtype=float)
        stderr = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        out["metrics"][k] = {
            "mean": float(np.mean(vals)),
            "stderr": stderr,
            "min": float(np.min(vals)),
            "max": float(np.max(vals)),
        }
        if k.startswith("zeta_sup"):
            unique, counts = np.unique(vals.astype(np.int64), return_counts=True)
            out["histograms"][k] = {str(int(u)): int(c) for u, c in zip(unique, counts)}
    return out


def _write_rows_csv(path, rows):
    with open(path, "w") as fh:
        if not rows:
            fh.write("\n")
            return
        keys = sorted(rows[0].keys())
        fh.write(",".join(["replica"] + keys) + "\n")
        for i, r in enumerate(rows):
            fh.write(",".join([str(i)] + [repr(float(r[k])) for k in keys]) + "\n")


def _write_summary_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


# ----------------------------------------------------------------------
# replica bodies (module level so process pools can pick them up)


def _cluster_config(dx, nx, params):
    threshold = params.get("threshold")
    if threshold is None:
        threshold = default_threshold(dx, params.get("threshold_coeff", 0.5),
                                      params.get("threshold_alpha", 0.7))
    margin = params.get("margin_frac", 0.0)
    excl = max(1, int(round(margin * (nx + 1))))
    return ClusterConfig(
        threshold=threshold,
        min_separation=int(params.get("min_separation", 4)),
        boundary_exclusion=excl,
    )


def _family_members(deltas, lam, epsilon):
    members = []
    for d in deltas:
        if d <= 3.0:
            members.append(SolverConfig(delta=3.0))
        else:
            members.append(SolverConfig(delta=d, epsilon=epsilon, lam=lam))
    return members


def _bridge_initial(grid, rng, delta=3.0):
    params = BesselParams(delta=delta, a=0.0, interval=(grid.b, grid.c))
    return sample_bessel_bridge(params, grid.x_nodes, rng).values


def _replica_invariant(seed, params):
    nx = int(params.get("nx", 64))
    T = float(params.get("T", 0.5))
    grid = GridSpec.default_resolution(nx, T)
    rng = np.random.default_rng(seed)
    initial = _bridge_initial(grid, rng)
    noise = NoiseRealization.generate(grid, derive_seed(seed, 1))
    path = solve_reflected(initial, grid, noise, a=0.0)
    probe = int(params.get("probe_index", (nx + 2) // 2))
    return {"terminal_value": float(path.values[-1, probe])}


def _replica_hitting(seed, params):
    nx = int(params["nx"])
    T = float(params["T"])
    deltas = [float(d) for d in params["deltas"]]
    grid = GridSpec.default_resolution(nx, T)
    rng = np.random.default_rng(seed)
    initial = _bridge_initial(grid, rng)
    noise = NoiseRealization.generate(grid, derive_seed(seed, 1))
    members = _family_members(deltas, float(params.get("lam", 1e-5)),
                              float(params.get("epsilon", 1e-3)))
    paths = solve_coupled_family(members, grid, noise, initial)
    config = _cluster_config(grid.dx, nx, params)
    t_start = float(params.get("burn_in", 0.0))
    out = {}
    for d, p in zip(deltas, paths):
        out[f"zeta_sup_delta_{d:g}"] = int(zeta_sup(p, config, t_start=t_start).zeta_sup)
    return out


def _replica_histogram(seed, params):
    nx = int(params["nx"])
    T = float(params["T"])
    delta = float(params["delta"])
    grid = GridSpec.default_resolution(nx, T)
    rng = np.random.default_rng(seed)
    initial = _bridge_initial(grid, rng)
    noise = NoiseRealization.generate(grid, derive_seed(seed, 1))
    members = _family_members([delta], float(params.get("lam", 1e-5)),
                              float(params.get("epsilon", 1e-3)))
    path = solve_coupled_family(members, grid, noise, initial)[0]
    t_start = float(params.get("burn_in", 0.0))
    out = {}
    base = _cluster_config(grid.dx, nx, params)
    out["zeta_sup"] = int(zeta_sup(path, base, t_start=t_start).zeta_sup)
    for ms in params.get("sensitivity_separations", []):
        cfg = ClusterConfig(threshold=base.threshold, min_separation=int(ms),
                            boundary_exclusion=base.boundary_exclusion)
        out[f"zeta_sup_minsep_{int(ms)}"] = int(zeta_sup(path, cfg, t_start=t_start).zeta_sup)
    return out


def _replica_string_zeros(seed, params):
    spec = StringSpec(
        d=int(params["d"]),
        half_width=float(params.get("half_width", 0.5)),
        nx=int(params["nx"]),
        T=float(params.get("T", 1.0)),
    )
    rng = np.random.default_rng(seed)
    fld = simulate_string(spec, rng, seed=seed)
    config = ClusterConfig(
        threshold=float(params.get("threshold", 0.02)),
        min_separation=int(params.get("min_separation", 4)),
        boundary_exclusion=int(params.get("boundary_exclusion", 1)),
    )
    rep = zeta_sup(fld.analysis_path(), config)
    return {
        "zeta_sup": int(rep.zeta_sup),
        "has_zero": float(rep.zeta_sup >= 1),
        "multi_cluster": float(rep.zeta_sup >= 2),
        "triple_cluster": float(rep.zeta_sup >= 3),
    }


def _replica_scaling(seed, params):
    L = float(params["L"])
    s2 = L * L
    pairs = params["pairs"]
    nx = int(params["nx"])
    T_unit = float(params["T_unit"])
    R_unit = float(params["half_width"])
    rng = np.random.default_rng(seed)
    # source lattice must restrict exactly onto the unit-scale probe lattice
    src_spec = StringSpec(d=1, half_width=R_unit * s2, nx=int(round(s2 * (nx + 1))) - 1,
                          T=T_unit * s2 * s2)
    src = simulate_string(src_spec, rng, seed=seed)
    scaled = scaling_transform(src, L)
    # the transform of the scheme at (dx, dt) has exactly the law of the
    # scheme at (dx/L^2, dt/L^4); simulate the fresh field there and read it
    # on the probe sub-lattice so both sides share one discrete law
    fresh_spec = StringSpec(d=1, half_width=R_unit, nx=int(round(s2 * (nx + 1))) - 1,
                            T=T_unit)
    fresh = simulate_string(fresh_spec, np.random.default_rng(derive_seed(seed, 1)))
    out = {}
    for i, (t, x, s, y) in enumerate(pairs):
        dv = scaled.value_at(t, x)[0] - scaled.value_at(s, y)[0]
        out[f"pair_{i}_scaled"] = float(dv * dv)
        dv = fresh.value_at(t, x)[0] - fresh.value_at(s, y)[0]
        out[f"pair_{i}_fresh"] = float(dv * dv)
    return out


def _replica_coupling(seed, params):
    nx = int(params["nx"])
    T = float(params["T"])
    grid = GridSpec.default_resolution(nx, T)
    rng = np.random.default_rng(seed)
    initial = _bridge_initial(grid, rng)
    noise = NoiseRealization.generate(grid, derive_seed(seed, 1))
    members = []
    for d, lam in params["members"]:
        if float(d) <= 3.0 and lam is None:
            members.append(SolverConfig(delta=3.0))
        else:
            members.append(SolverConfig(delta=float(d), epsilon=float(params.get("epsilon", 1e-3)),
                                         lam=float(lam)))
    paths = solve_coupled_family(members, grid, noise, initial)
    out = {}
    for j in range(len(paths) - 1):
        diff = paths[j + 1].values - paths[j].values
        out[f"min_ordered_diff_{j}"] = float(np.min(diff))
    return out


def _replica_holder(seed, params):
    from .zero_analysis import holder_estimate

    T = float(params.get("T", 0.5))
    beta = float(params.get("beta", 0.4))
    out = {}
    paths = []
    for tag, nx in (("coarse", int(params["nx_coarse"])), ("fine", int(params["nx_fine"]))):
        grid = GridSpec.default_resolution(nx, T)
        rng = np.random.default_rng(derive_seed(seed, nx))
        initial = _bridge_initial(grid, rng)
        noise = NoiseRealization.generate(grid, derive_seed(seed, nx + 1))
        paths.append(solve_reflected(initial, grid, noise, a=0.0))
        rep = holder_estimate(paths[-1], beta)
        out[f"gamma_space_{tag}"] = rep.gamma_space
        out[f"gamma_time_lower_{tag}"] = rep.gamma_time_lower
    out["refinement_ratio"] = out["gamma_space_fine"] / out["gamma_space_coarse"]
    return out


_REPLICA_FNS = {
    "invariant-test": _replica_invariant,
    "hitting-sweep": _replica_hitting,
    "zeta-histogram": _replica_histogram,
    "string-zeros": _replica_string_zeros,
    "scaling-check": _replica_scaling,
    "coupling-check": _replica_coupling,
    "holder-check": _replica_holder,
}


# ----------------------------------------------------------------------
# assessments: turn replica rows into TestResults


def _assess_invariant(config, rows):
    results = []
    extra = {}
    if rows:
        nx = int(config.params.get("nx", 64))
        grid = GridSpec.default_resolution(nx, float(config.params.get("T", 0.5)))
        probe = int(config.params.get("probe_index", (nx + 2) // 2))
        theta = grid.x_nodes[probe]
        params = BesselParams(delta=float(config.params.get("delta", 3.0)), a=0.0,
                              interval=(grid.b, grid.c))
        samples = np.asarray([r["terminal_value"] for r in rows])
        d, p = ks_statistic(samples, lambda ys: bridge_marginal_cdf(params, theta, ys))
        extra = {"ks_distance": d, "probe_theta": float(theta)}
        results.append(TestResult("stationarity_ks_p", p,
                                  float(config.params.get("p_min", 0.001)), op=">",
                                  n=len(rows), seed_info=str(config.master_seed)))
    return results, extra


def _assess_hitting(config, rows):
    results = []
    extra = {}
    if not rows:
        return results, extra
    deltas = [float(d) for d in config.params["deltas"]]
    fracs = []
    for d in deltas:
        vals = np.asarray([r[f"zeta_sup_delta_{d:g}"] for r in rows])
        fracs.append(float(np.mean(vals >= 1)))
    extra["hit_fractions"] = {f"{d:g}": f for d, f in zip(deltas, fracs)}
    if len(fracs) > 1:
        worst = max(fracs[j + 1] - fracs[j] for j in range(len(fracs) - 1))
        results.append(TestResult("hit_fraction_monotone_violation", worst, 0.0, op="<=",
                                  n=len(rows), seed_info=str(config.master_seed)))
    if "first_fraction_min" in config.params:
        results.append(TestResult("hit_fraction_first", fracs[0],
                                  float(config.params["first_fraction_min"]), op=">=",
                                  n=len(rows)))
    if "last_fraction_max" in config.params:
        results.append(TestResult("hit_fraction_last", fracs[-1],
                                  float(config.params["last_fraction_max"]), op="<=",
                                  n=len(rows)))
    return results, extra


def _assess_histogram(config, rows):
    results = []
    extra = {}
    if not rows:
        return results, extra
    bound = int(config.params.get("bound", 4))
    vals = np.asarray([r["zeta_sup"] for r in rows])
    frac = float(np.mean(vals <= bound))
    results.append(TestResult(f"zeta_sup_within_{bound}", frac,
                              float(config.params.get("quantile_min", 0.99)), op=">=",
                              n=len(rows), seed_info=str(config.master_seed)))
    excess = np.flatnonzero(vals > bound)
    detail = []
    for idx in excess:
        row = rows[idx]
        detail.append({k: int(v) for k, v in row.items()})
    extra["excess_replicas"] = detail
    extra["max_zeta_sup"] = int(np.max(vals))
    return results, extra


def _assess_string(config, rows):
    results = []
    extra = {}
    if not rows:
        return results, extra
    p = config.params
    for key, op, bound_key in (
        ("has_zero", ">=", "has_zero_min"),
        ("has_zero", "<=", "has_zero_max"),
        ("multi_cluster", "<=", "multi_cluster_max"),
        ("triple_cluster", ">", "triple_cluster_above"),
    ):
        if bound_key in p:
            frac = float(np.mean([r[key] for r in rows]))
            results.append(TestResult(f"string_{bound_key}", frac, float(p[bound_key]),
                                      op=op, n=len(rows), seed_info=str(config.master_seed)))
    extra["fractions"] = {
        k: float(np.mean([r[k] for r in rows]))
        for k in ("has_zero", "multi_cluster", "triple_cluster")
    }
    return results, extra


def _assess_scaling(config, rows):
    results = []
    extra = {}
    if not rows:
        return results, extra
    pairs = config.params["pairs"]
    n = len(rows)
    worst = 0.0
    detail = {}
    for i in range(len(pairs)):
        sc = np.asarray([r[f"pair_{i}_scaled"] for r in rows])
        fr = np.asarray([r[f"pair_{i}_fresh"] for r in rows])
        diff = float(np.mean(sc) - np.mean(fr))
        se = math.sqrt(np.var(sc, ddof=1) / n + np.var(fr, ddof=1) / n)
        z = abs(diff) / se if se > 0 else math.inf
        detail[f"pair_{i}"] = {"scaled_mean": float(np.mean(sc)),
                               "fresh_mean": float(np.mean(fr)), "z": z}
        worst = max(worst, z)
    extra["pairs"] = detail
    results.append(TestResult("scaling_worst_z", worst,
                              float(config.params.get("z_max", 3.0)), op="<=", n=n,
                              seed_info=str(config.master_seed)))
    return results, extra


def _assess_coupling(config, rows):
    results = []
    extra = {}
    if not rows:
        return results, extra
    nmem = len(config.params["members"])
    worst = min(
        min(r[f"min_ordered_diff_{j}"] for j in range(nmem - 1)) for r in rows
    )
    results.append(TestResult("coupled_min_ordered_diff", worst,
                              float(config.params.get("tol", -1e-8)), op=">=",
                              n=len(rows), seed_info=str(config.master_seed)))
    return results, extra


def _assess_holder(config, rows):
    results = []
    extra = {}
    if not rows:
        return results, extra
    ratios = np.asarray([r["refinement_ratio"] for r in rows])
    results.append(TestResult("holder_refinement_ratio_max", float(np.max(ratios)),
                              float(config.params.get("ratio_max", 2.0)), op="<=",
                              n=len(rows), seed_info=str(config.master_seed)))
    finite = all(
        np.isfinite([r["gamma_space_coarse"], r["gamma_space_fine"],
                     r["gamma_time_lower_coarse"], r["gamma_time_lower_fine"]]).all()
        for r in rows
    )
    results.append(TestResult("holder_gammas_finite", 1.0 if finite else 0.0, 1.0, op=">="))
    return results, extra


_ASSESS_FNS = {
    "invariant-test": _assess_invariant,
    "hitting-sweep": _assess_hitting,
    "zeta-histogram": _assess_histogram,
    "string-zeros": _assess_string,
    "scaling-check": _assess_scaling,
    "coupling-check": _assess_coupling,
    "holder-check": _assess_holder,
}


def run_experiment(config):
    """Execute an experiment: replicas, aggregation, optional report files.

    Re-running the same configuration reproduces the output files byte for
    byte.  Returns an ExperimentReport whose ``passed`` is True when every
    attached check holds (vacuously true for zero replicas).
    """
    seeds = [derive_seed(config.master_seed, i) for i in range(config.replicas)]
    rows = run_replicas(config.kind, seeds, config.params, jobs=config.jobs)
    results, extra = _ASSESS_FNS[config.kind](config, rows)
    summary = summarize(rows)
    report = ExperimentReport(config=config, rows=rows, results=results,
                              summary=summary, extra=extra)
    if config.out_dir is not None:
        os.makedirs(config.out_dir, exist_ok=True)
        _write_rows_csv(os.path.join(config.out_dir, f"{config.kind}-replicas.csv"), rows)
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": config.kind,
            "master_seed": config.master_seed,
            "replicas": config.replicas,
            "params": config.params,
            "summary": summary,
            "extra": extra,
            "results": [r.to_dict() for r in results],
            "pass": report.passed,
        }
        _write_summary_json(os.path.join(config.out_dir, f"{config.kind}-summary.json"), payload)
    return report


def write_zero_report_csv(path, report, t_nodes):
    """ZeroReport CSV contract: per-slice columns (t, count)."""
    with open(path, "w") as fh:
        fh.write("t,count\n")
        for t, c in report.to_rows(t_nodes):
            fh.write(f"{t!r},{c}\n")


def write_zero_report_json(path, report, grid, seed):
    """ZeroReport summary contract: zeta_sup, threshold, grid, seed."""
    payload = {
        "zeta_sup": int(report.zeta_sup),
        "threshold": report.threshold,
        "grid": {"b": grid.b, "c": grid.c, "nx": grid.nx, "T": grid.T, "nt": grid.nt},
        "seed": seed,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
