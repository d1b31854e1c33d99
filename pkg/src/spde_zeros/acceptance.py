"""Acceptance suite: one callable per criterion, each returning TestResults.

Every statistical check runs at a pre-registered seed (constants below,
fixed before the final runs; they are never re-rolled).  ``run_all`` writes
one report directory per criterion and returns the results keyed by
criterion name; running it twice against two directories must produce
byte-identical trees, which is itself the final criterion.

Several checks are expected to fail at the mandated settings; they are
implemented exactly as mandated and report honestly.  See the repository
notes for the quantitative analysis.
"""

import json
import math
import os
import time

import numpy as np
from scipy.integrate import quad
from scipy.stats import chi

from .bessel import (
    BesselParams,
    sample_bessel_bridge,
    sample_bessel_process,
    transition_cdf,
    transition_density,
)
from .mc_harness import (
    ExperimentConfig,
    TestResult,
    derive_seed,
    ks_statistic,
    ks_two_sample,
    run_experiment,
)
from .pinned_string import StringSpec, simulate_string
from .spde_solver import GridSpec, NoiseRealization, solve_reflected
from .zero_analysis import ClusterConfig, reflection_measure_profile

# Pre-registered master seeds, one per criterion (plus design constants such
# as probe layouts).  Fixed once; statistical outcomes are reported as-is.
SEEDS = {
    "density": 510001,
    "sampler": 510002,
    "complementarity": 510003,
    "coupling": 510004,
    "stationarity": 510005,
    "hitting": 510006,
    "histogram": 510007,
    "reflection": 510008,
    "string_cov": 510009,
    "scaling_pairs": 510010,
    "scaling": 510011,
    "string_zeros": 510012,
}

MARGIN_FRAC = 0.1  # physical window margin excluded from zero counting


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _result_payload(results, extra=None):
    out = {"results": [r.to_dict() for r in results]}
    if extra:
        out["extra"] = extra
    return out


# ----------------------------------------------------------------------


def criterion_density(out_dir):
    """1: normalization within 1e-6 and semigroup residual within 1e-5."""
    worst_norm = 0.0
    for delta in (3.0, 4.0, 5.0, 7.0):
        params = BesselParams(delta=delta, a=0.0, interval=(0.0, 1.0))
        for t in (0.25, 1.0):
            for x in (0.0, 0.5, 1.0):
                hi = x + 12.0 * math.sqrt(t) + 5.0
                val, _ = quad(lambda y: transition_density(params, t, x, y), 0.0, hi, limit=200)
                worst_norm = max(worst_norm, abs(val - 1.0))
    worst_ck = 0.0
    for delta in (3.0, 5.0):
        params = BesselParams(delta=delta, a=0.0, interval=(0.0, 1.0))
        for s, t in ((0.25, 0.25), (0.5, 1.0)):
            for x in (0.2, 0.8):
                for y in (0.3, 0.9):
                    lhs, _ = quad(
                        lambda z: transition_density(params, s, x, z) * transition_density(params, t, z, y),
                        0.0, 12.0, limit=200,
                    )
                    worst_ck = max(worst_ck, abs(lhs - transition_density(params, s + t, x, y)))
    results = [
        TestResult("density_normalization_dev", worst_norm, 1e-6, op="<"),
        TestResult("density_chapman_kolmogorov_dev", worst_ck, 1e-5, op="<"),
    ]
    _write_json(os.path.join(out_dir, "density-suite.json"), _result_payload(results))
    return results


def criterion_sampler(out_dir):
    """2: process and bridge samplers against quadrature and modulus laws."""
    seed = SEEDS["sampler"]
    n = 10_000
    params = BesselParams(delta=3.0, a=0.0, interval=(0.0, 1.0))

    rng = np.random.default_rng(derive_seed(seed, 0))
    times = np.linspace(0.0, 1.0, 9)
    path = sample_bessel_process(params, 0.0, times, rng, size=n)
    finals = path.values[:, -1]
    _, p_quad = ks_statistic(finals, lambda ys: transition_cdf(params, 1.0, 0.0, ys))
    # modulus of a 3-dimensional Brownian motion at t=1 has the chi(3) law
    _, p_mod = ks_statistic(finals, lambda ys: chi.cdf(ys, 3))

    rng = np.random.default_rng(derive_seed(seed, 1))
    mid = np.empty(n)
    grid3 = np.array([0.0, 0.5, 1.0])
    for i in range(n):
        mid[i] = sample_bessel_bridge(params, grid3, rng).values[1]
    # |3-d Brownian bridge| at 1/2: chi(3) scaled by sqrt(1/4)
    _, p_bridge = ks_statistic(mid, lambda ys: chi.cdf(ys / 0.5, 3))

    rng = np.random.default_rng(derive_seed(seed, 2))
    grid9 = np.linspace(0.0, 1.0, 9)
    mid9 = np.empty(n)
    for i in range(n):
        mid9[i] = sample_bessel_bridge(params, grid9, rng).values[4]
    _, p_bridge9 = ks_statistic(mid9, lambda ys: chi.cdf(ys / 0.5, 3))

    rng = np.random.default_rng(derive_seed(seed, 3))
    grid4 = np.array([0.0, 0.3, 0.7, 1.0])
    fwd = np.empty(n)
    rev = np.empty(n)
    for i in range(n):
        vals = sample_bessel_bridge(params, grid4, rng).values
        fwd[i] = vals[1]
        rev[i] = vals[2]
    _, p_reversal = ks_two_sample(fwd, rev)

    results = [
        TestResult("process_vs_quadrature_ks_p", p_quad, 0.01, op=">", n=n),
        TestResult("process_vs_modulus_ks_p", p_mod, 0.01, op=">", n=n),
        TestResult("bridge_vs_modulus_ks_p", p_bridge, 0.01, op=">", n=n),
        TestResult("bridge_dense_grid_ks_p", p_bridge9, 0.01, op=">", n=n),
        TestResult("bridge_time_reversal_ks_p", p_reversal, 0.01, op=">", n=n),
    ]
    _write_json(os.path.join(out_dir, "sampler-fidelity.json"), _result_payload(results))
    return results


def criterion_complementarity(out_dir):
    """3: u >= 0, eta >= 0 and exact per-cell complementarity, 20 seeds."""
    seed = SEEDS["complementarity"]
    params = BesselParams(delta=3.0, a=0.0, interval=(0.0, 1.0))
    worst_value = 0.0
    worst_eta = 0.0
    worst_prod = 0.0
    for nx in (32, 64):
        grid = GridSpec.default_resolution(nx, 0.5)
        for i in range(20):
            rng = np.random.default_rng(derive_seed(seed, 1000 * nx + i))
            initial = sample_bessel_bridge(params, grid.x_nodes, rng).values
            noise = NoiseRealization.generate(grid, derive_seed(seed, 1000 * nx + i + 500))
            path = solve_reflected(initial, grid, noise, a=0.0)
            worst_value = min(worst_value, float(np.min(path.values)))
            worst_eta = min(worst_eta, float(np.min(path.eta)))
            prod = np.abs(path.values[1:, 1:-1] * path.eta)
            worst_prod = max(worst_prod, float(np.max(prod)))
    results = [
        TestResult("reflected_min_value", worst_value, 0.0, op=">="),
        TestResult("reflected_min_eta", worst_eta, 0.0, op=">="),
        TestResult("complementarity_max_product", worst_prod, 0.0, op="<="),
    ]
    _write_json(os.path.join(out_dir, "complementarity.json"), _result_payload(results))
    return results


def criterion_coupling(out_dir, jobs=1):
    """4: shared-noise family ordering within -1e-8, 10 seeds at nx=64."""
    config = ExperimentConfig(
        kind="coupling-check",
        replicas=10,
        master_seed=SEEDS["coupling"],
        params={"nx": 64, "T": 0.25, "epsilon": 1e-3,
                "members": [[3.0, None], [5.0, 1e-3], [8.0, 1e-3]], "tol": -1e-8},
        out_dir=out_dir,
        jobs=jobs,
    )
    return run_experiment(config).results


def criterion_stationarity(out_dir, jobs=1):
    """5: reflected delta=3 marginal vs bridge marginal, KS p > 0.001.

    Mandated settings nx=64, T=0.5, 2000 replicas.  The node-based scheme's
    stationary law deviates from the continuum bridge by far more than the
    KS resolution at this size (see notes); the check reports the honest p.
    """
    config = ExperimentConfig(
        kind="invariant-test",
        replicas=2000,
        master_seed=SEEDS["stationarity"],
        params={"nx": 64, "T": 0.5, "p_min": 0.001},
        out_dir=out_dir,
        jobs=jobs,
    )
    return run_experiment(config).results


def criterion_hitting(out_dir, jobs=1):
    """6: hit-fraction trend over delta, plus delta=7 refinement trend."""
    results = []
    sweep = ExperimentConfig(
        kind="hitting-sweep",
        replicas=200,
        master_seed=SEEDS["hitting"],
        params={"nx": 64, "T": 1.5, "burn_in": 0.5,
                "deltas": [3.0, 3.5, 4.0, 5.0, 7.0],
                "lam": 1e-5, "epsilon": 1e-3, "margin_frac": MARGIN_FRAC,
                "first_fraction_min": 0.95, "last_fraction_max": 0.05},
        out_dir=out_dir,
        jobs=jobs,
    )
    rep = run_experiment(sweep)
    results.extend(rep.results)

    fracs = []
    for i, nx in enumerate((32, 64, 128)):
        cfg = ExperimentConfig(
            kind="hitting-sweep",
            replicas=200,
            master_seed=derive_seed(SEEDS["hitting"], 777 + i),
            params={"nx": nx, "T": 1.5, "burn_in": 0.5, "deltas": [7.0],
                    "lam": 1e-5, "epsilon": 1e-3, "margin_frac": MARGIN_FRAC},
            out_dir=os.path.join(out_dir, f"refine-nx{nx}"),
            jobs=jobs,
        )
        fracs.append(run_experiment(cfg).extra["hit_fractions"]["7"])
    violation = max(fracs[1] - fracs[0], fracs[2] - fracs[1])
    results.append(TestResult("hit7_refinement_violation", violation, 0.0, op="<=", n=200,
                              seed_info=f"fractions={fracs}"))
    _write_json(os.path.join(out_dir, "hitting-refinement.json"),
                {"delta7_fractions_by_nx": dict(zip(["32", "64", "128"], fracs))})
    return results


def criterion_histogram(out_dir, jobs=1):
    """7: zeta_sup histogram bounds for delta 3 and 5 at default clustering."""
    results = []
    for delta, bound in ((3.0, 4), (5.0, 1)):
        cfg = ExperimentConfig(
            kind="zeta-histogram",
            replicas=200,
            master_seed=derive_seed(SEEDS["histogram"], int(delta * 10)),
            params={"nx": 64, "T": 1.5, "burn_in": 0.5, "delta": delta,
                    "lam": 1e-5, "epsilon": 1e-3, "margin_frac": MARGIN_FRAC,
                    "bound": bound, "quantile_min": 0.99,
                    "sensitivity_separations": [8, 16]},
            out_dir=os.path.join(out_dir, f"delta{delta:g}"),
            jobs=jobs,
        )
        rep = run_experiment(cfg)
        for r in rep.results:
            r.name = f"delta{delta:g}_{r.name}"
        results.extend(rep.results)
    return results


def criterion_reflection_profile(out_dir, jobs=1):
    """8: share of reflection-mass slices with exactly one cluster, 20 seeds."""
    seed = SEEDS["reflection"]
    params = BesselParams(delta=3.0, a=0.0, interval=(0.0, 1.0))
    grid = GridSpec.default_resolution(64, 1.0)
    excl = max(1, round(MARGIN_FRAC * (grid.nx + 1)))
    config = ClusterConfig(threshold=1e-9, min_separation=4, boundary_exclusion=excl)
    fracs = []
    misplaced = 0.0
    for i in range(20):
        rng = np.random.default_rng(derive_seed(seed, i))
        initial = sample_bessel_bridge(params, grid.x_nodes, rng).values
        noise = NoiseRealization.generate(grid, derive_seed(seed, i + 100))
        path = solve_reflected(initial, grid, noise, a=0.0)
        prof = reflection_measure_profile(path, config)
        fracs.append(prof.fraction_single_cluster)
        misplaced = max(misplaced, prof.misplaced_mass)
    mean_frac = float(np.mean(fracs))
    results = [
        TestResult("eta_slices_single_cluster_fraction", mean_frac, 0.9, op=">=", n=20),
        TestResult("eta_support_misplaced_mass", misplaced, 0.0, op="<="),
    ]
    _write_json(os.path.join(out_dir, "reflection-profile.json"),
                _result_payload(results, extra={"per_seed_fractions": [float(f) for f in fracs]}))
    return results


def _covariance_pairs(n_pairs, dx, dt, rng):
    pairs = []
    seen = set()
    while len(pairs) < n_pairs:
        t = round(rng.uniform(1.0, 2.0) / dt) * dt
        s = round(rng.uniform(1.0, 2.0) / dt) * dt
        x = round(rng.uniform(-1.0, 1.0) / dx) * dx
        y = round(rng.uniform(-1.0, 1.0) / dx) * dx
        t, s = max(t, s), min(t, s)
        key = (t, x, s, y)
        if (t == s and x == y) or key in seen:
            continue
        seen.add(key)
        pairs.append(key)
    return pairs


def criterion_string_covariance(out_dir):
    """9: squared increments inside the [c1, 2] band, 5000 replicas, d=1."""
    seed = SEEDS["string_cov"]
    spec = StringSpec(d=1, half_width=1.0, nx=31, T=2.0)
    dx, dt = spec.dx, spec.dt
    pairs = _covariance_pairs(200, dx, dt, np.random.default_rng(derive_seed(seed, 0)))
    den = np.array([abs(x - y) + math.sqrt(t - s) for (t, x, s, y) in pairs])

    # index maps for fast extraction
    probe = sorted({(t, x) for (t, x, s, y) in pairs} | {(s, y) for (t, x, s, y) in pairs})
    k_idx = np.array([round(t / dt) for (t, x) in probe])
    # node index relative to the buffered window
    side = spec.side_nodes
    i_idx = np.array([side + round(x / dx) for (t, x) in probe])
    pos = {p: j for j, p in enumerate(probe)}
    a_idx = np.array([pos[(t, x)] for (t, x, s, y) in pairs])
    b_idx = np.array([pos[(s, y)] for (t, x, s, y) in pairs])

    nrep = 5000
    acc = np.zeros(len(pairs))
    acc2 = np.zeros(len(pairs))
    for i in range(nrep):
        fld = simulate_string(spec, np.random.default_rng(derive_seed(seed, 1 + i)))
        vals = fld.values[k_idx, i_idx, 0]
        sq = (vals[a_idx] - vals[b_idx]) ** 2
        acc += sq
        acc2 += sq * sq
    mean = acc / nrep
    se = np.sqrt(np.maximum(acc2 / nrep - mean ** 2, 0.0) / nrep)

    upper_excess = float(np.max(mean - (2.0 * den + 3.0 * se)))
    lower_ratio = float(np.min(mean / den))
    results = [
        TestResult("covariance_upper_band_excess", upper_excess, 0.0, op="<=", n=nrep),
        TestResult("covariance_lower_ratio", lower_ratio, 0.3, op=">=", n=nrep),
    ]
    _write_json(os.path.join(out_dir, "string-covariance.json"), _result_payload(
        results,
        extra={"max_ratio": float(np.max(mean / den)), "pairs": len(pairs)},
    ))
    return results


def criterion_scaling(out_dir, jobs=1):
    """10: transformed covariance vs matched-resolution field at 10 pairs."""
    dx, dt = 1.0 / 16.0, 1.0 / 256.0
    rng = np.random.default_rng(SEEDS["scaling_pairs"])
    pairs = []
    while len(pairs) < 10:
        t = round(rng.uniform(0.1, 0.25) / dt) * dt
        s = round(rng.uniform(0.1, 0.25) / dt) * dt
        x = round(rng.uniform(-0.9, 0.9) / dx) * dx
        y = round(rng.uniform(-0.9, 0.9) / dx) * dx
        if (t, x) == (s, y):
            continue
        pairs.append([max(t, s), x, min(t, s), y])
    config = ExperimentConfig(
        kind="scaling-check",
        replicas=3000,
        master_seed=SEEDS["scaling"],
        params={"L": float(math.sqrt(2.0)), "pairs": pairs, "nx": 31,
                "T_unit": 0.25, "half_width": 1.0, "z_max": 3.0},
        out_dir=out_dir,
        jobs=jobs,
    )
    return run_experiment(config).results


def criterion_string_zeros(out_dir, jobs=1):
    """11: near-zero trends of |U| across component counts at threshold 0.02."""
    seed = SEEDS["string_zeros"]
    results = []

    def run(d, nx, extra_params, tag, master):
        cfg = ExperimentConfig(
            kind="string-zeros",
            replicas=200,
            master_seed=master,
            params={"d": d, "half_width": 0.5, "nx": nx, "T": 1.0,
                    "threshold": 0.02, **extra_params},
            out_dir=os.path.join(out_dir, tag),
            jobs=jobs,
        )
        return run_experiment(cfg)

    rep = run(1, 31, {"has_zero_min": 0.99}, "d1", derive_seed(seed, 1))
    for r in rep.results:
        r.name = "d1_" + r.name
    results.extend(rep.results)

    rep = run(2, 63, {"has_zero_min": 0.5, "triple_cluster_above": 0.0}, "d2", derive_seed(seed, 2))
    for r in rep.results:
        r.name = "d2_" + r.name
    results.extend(rep.results)

    rep = run(4, 31, {"multi_cluster_max": 0.01}, "d4", derive_seed(seed, 4))
    for r in rep.results:
        r.name = "d4_" + r.name
    results.extend(rep.results)

    fr = []
    for i, nx in enumerate((15, 31, 63)):
        rep = run(6, nx, {}, f"d6-nx{nx}", derive_seed(seed, 60 + i))
        fr.append(rep.extra["fractions"]["has_zero"])
    results.append(TestResult("d6_has_zero_fraction", fr[1], 0.05, op="<=", n=200))
    violation = max(fr[1] - fr[0], fr[2] - fr[1])
    results.append(TestResult("d6_refinement_violation", violation, 0.0, op="<=", n=200,
                              seed_info=f"fractions={fr}"))
    _write_json(os.path.join(out_dir, "string-zeros-summary.json"),
                {"d6_fractions_by_nx": dict(zip(["15", "31", "63"], fr))})
    return results


CRITERIA = (
    ("criterion_01_density", criterion_density, False),
    ("criterion_02_sampler", criterion_sampler, False),
    ("criterion_03_complementarity", criterion_complementarity, False),
    ("criterion_04_coupling", criterion_coupling, True),
    ("criterion_05_stationarity", criterion_stationarity, True),
    ("criterion_06_hitting", criterion_hitting, True),
    ("criterion_07_histogram", criterion_histogram, True),
    ("criterion_08_reflection", criterion_reflection_profile, True),
    ("criterion_09_string_covariance", criterion_string_covariance, False),
    ("criterion_10_scaling", criterion_scaling, True),
    ("criterion_11_string_zeros", criterion_string_zeros, True),
)


def run_all(base_dir, jobs=1, echo=print):
    """Run criteria 1-11, write reports under base_dir, return results."""
    t_start = time.time()
    all_results = {}
    for name, fn, takes_jobs in CRITERIA:
        out_dir = os.path.join(base_dir, name)
        os.makedirs(out_dir, exist_ok=True)
        t0 = time.time()
        results = fn(out_dir, jobs=jobs) if takes_jobs else fn(out_dir)
        all_results[name] = results
        status = "PASS" if all(r.passed for r in results) else "FAIL"
        if echo:
            echo(f"[{status}] {name} ({time.time() - t0:.1f}s)")
            for r in results:
                echo("    " + r.line())
    if echo:
        echo(f"total {time.time() - t_start:.1f}s")
    return all_results


def compare_trees(dir_a, dir_b):
    """Byte-compare two report trees; returns a list of differences."""
    diffs = []
    files_a = sorted(
        os.path.relpath(os.path.join(root, f), dir_a)
        for root, _, files in os.walk(dir_a) for f in files
    )
    files_b = sorted(
        os.path.relpath(os.path.join(root, f), dir_b)
        for root, _, files in os.walk(dir_b) for f in files
    )
    if files_a != files_b:
        diffs.append(f"file sets differ: {set(files_a) ^ set(files_b)}")
        return diffs
    for rel in files_a:
        with open(os.path.join(dir_a, rel), "rb") as fa:
            ba = fa.read()
        with open(os.path.join(dir_b, rel), "rb") as fb:
            bb = fb.read()
        if ba != bb:
            diffs.append(rel)
    return diffs


def criterion_determinism(base_a, base_b, jobs=1, echo=None):
    """12: two full runs of the suite produce byte-identical report trees."""
    run_all(base_a, jobs=jobs, echo=echo)
    run_all(base_b, jobs=jobs, echo=echo)
    diffs = compare_trees(base_a, base_b)
    return [TestResult("determinism_differing_files", float(len(diffs)), 0.0, op="<=",
                       seed_info=";".join(diffs[:5]) if diffs else None)]
