"""Pipelines binding simulation, reconstruction and evaluation.

The CLI subcommands and the acceptance suite both drive these functions, so
results on disk and results asserted in tests come from the same code path.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import baselines, metrics, solvers
from .arrayio import read_array, write_array
from .config import RunConfig
from .errors import ConfigError, DataError
from .objective import (CompositeObjective, LeastSquares, NonnegIndicator,
                        TransmissionLikelihood, TVNonneg)
from .phantom import Phantom, PhantomSpec, RoiPair, generate_phantom
from .radon import Geometry, RadonOperator, make_geometry
from .simulate import CountData, estimate_sinogram, simulate_counts, uniform_init

# Offset separating the count-sampling stream from the phantom stream when
# both are derived from one base seed.
COUNT_SEED_OFFSET = 500_000


def _limit_worker_threads(workers: int) -> None:
    """Keep pool workers from oversubscribing cores with nested parallelism."""
    try:
        import numba

        numba.set_num_threads(max(1, (os.cpu_count() or 1) // workers))
    except (ImportError, ValueError):
        pass


@dataclass
class Dataset:
    geometry: Geometry
    operator: RadonOperator
    phantom: Phantom | None
    counts: CountData
    sinogram: np.ndarray


def geometry_from_config(cfg: RunConfig) -> Geometry:
    g = cfg.geometry
    return make_geometry(g.views, g.rays, g.grid, g.extent)


def simulate_dataset(cfg: RunConfig, phantom_seed: int | None = None,
                     counts_seed: int | None = None) -> Dataset:
    if phantom_seed is None:
        phantom_seed = cfg.counts.seed
    if counts_seed is None:
        counts_seed = phantom_seed + COUNT_SEED_OFFSET
    geometry = geometry_from_config(cfg)
    ph = generate_phantom(phantom_seed, cfg.phantom_spec())
    counts = simulate_counts(ph, geometry, cfg.counts.flat, cfg.counts.dark,
                             counts_seed, cfg.counts.noiseless)
    sinogram = estimate_sinogram(counts)
    return Dataset(geometry, RadonOperator(geometry), ph, counts, sinogram)


# ---------------------------------------------------------------------------
# dataset files (simulate writes exactly these four)
# ---------------------------------------------------------------------------

PHANTOM_FILE = "phantom.dat"
COUNTS_FILE = "counts.dat"
SINOGRAM_FILE = "sinogram.dat"
ROIS_FILE = "rois.csv"


def write_dataset(ds: Dataset, out_dir) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g = ds.geometry
    common = dict(views=g.n_views, rays=g.n_rays, grid=g.n_side,
                  extent=repr(g.extent))
    if ds.phantom is None:
        raise ValueError("dataset has no phantom to write")
    write_array(out / PHANTOM_FILE, ds.phantom.image, kind="image",
                seed=ds.phantom.seed, **common)
    stacked = np.stack([ds.counts.counts, ds.counts.flat, ds.counts.dark])
    write_array(out / COUNTS_FILE, stacked, kind="counts",
                channels="counts flat dark", seed=ds.counts.seed,
                noiseless=int(ds.counts.noiseless), **common)
    write_array(out / SINOGRAM_FILE,
                ds.sinogram.reshape(g.n_views, g.n_rays), kind="sinogram",
                **common)
    with open(out / ROIS_FILE, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair", "side", "tumor_x", "tumor_y",
                         "control_x", "control_y", "radius"])
        for j, pair in enumerate(ds.phantom.roi_pairs):
            writer.writerow([
                j, pair.side,
                repr(pair.tumor_center[0]), repr(pair.tumor_center[1]),
                repr(pair.control_center[0]), repr(pair.control_center[1]),
                repr(pair.radius),
            ])
    return [PHANTOM_FILE, COUNTS_FILE, SINOGRAM_FILE, ROIS_FILE]


def read_dataset(data_dir) -> Dataset:
    data = Path(data_dir)
    counts_arr, cmeta = read_array(data / COUNTS_FILE)
    geometry = make_geometry(int(cmeta["views"]), int(cmeta["rays"]),
                             int(cmeta["grid"]), float(cmeta["extent"]))
    if counts_arr.shape != (3, geometry.nrows):
        raise DataError("counts file shape does not match its geometry")
    counts = CountData(counts_arr[0], counts_arr[1], counts_arr[2], geometry,
                       int(cmeta.get("seed", -1)),
                       bool(int(cmeta.get("noiseless", 0))))
    sino, _ = read_array(data / SINOGRAM_FILE)
    phantom = None
    if (data / PHANTOM_FILE).exists():
        img, pmeta = read_array(data / PHANTOM_FILE)
        pairs = []
        with open(data / ROIS_FILE, newline="") as fh:
            for row in csv.DictReader(fh):
                pairs.append(RoiPair(
                    (float(row["tumor_x"]), float(row["tumor_y"])),
                    (float(row["control_x"]), float(row["control_y"])),
                    float(row["radius"]), row["side"],
                ))
        spec = PhantomSpec(n_side=geometry.n_side, extent=geometry.extent)
        phantom = Phantom(img, spec, int(pmeta.get("seed", -1)), tuple(pairs))
    return Dataset(geometry, RadonOperator(geometry), phantom, counts,
                   sino.reshape(-1))


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------


def make_objective(model: str, ds: Dataset, lam: float = 0.0,
                   tv_inner_iters: int = 10,
                   tv_warm_start: bool = True) -> CompositeObjective:
    if model == "transmission_nonneg":
        f = TransmissionLikelihood(ds.operator, ds.counts.flat,
                                   ds.counts.dark, ds.counts.counts)
        phi = NonnegIndicator()
    elif model == "ls_tv":
        f = LeastSquares(ds.operator, ds.sinogram)
        phi = TVNonneg(lam, (ds.geometry.n_side, ds.geometry.n_side),
                       tv_inner_iters, tv_warm_start)
    else:
        raise ConfigError(f"unknown model {model!r}")
    return CompositeObjective(f, phi)


_BENCH_VARIANTS = {
    "fista": dict(variant="fista"),
    "mfista": dict(variant="mfista"),
    "oista": dict(variant="oista"),
    "fpgm": dict(variant="fpgm"),
    "mfpgm": dict(variant="mfpgm"),
    "fpgm_inf": dict(variant="fpgm", K=math.inf, eta_bar=math.inf),
}


def solver_config(section, algorithm: str | None = None,
                  L0: float | None = None,
                  N: int | None = None) -> solvers.SolverConfig:
    """SolverConfig from a config section, with optional overrides."""
    token = algorithm if algorithm is not None else section.algorithm
    if token not in _BENCH_VARIANTS:
        raise ConfigError(f"unknown solver algorithm {token!r}")
    kw = dict(_BENCH_VARIANTS[token])
    kw.setdefault("K", section.K)
    kw.setdefault("eta_bar", section.eta_bar)
    return solvers.SolverConfig(
        t1=section.t1,
        L0=section.L0 if L0 is None else L0,
        beta=section.beta,
        N=section.N if N is None else N,
        skip_delta_c=section.skip_delta_c,
        **kw,
    )


@dataclass
class ReconResult:
    image: np.ndarray
    records: list
    residual_sq: float
    psi_final: float
    sweeps: int | None = None
    epsilon: float | None = None


def _residual_sq(ds: Dataset, x: np.ndarray) -> float:
    r = ds.operator.apply(x) - ds.sinogram
    return float(r @ r)


def reconstruct_solver(ds: Dataset, section, algorithm: str | None = None,
                       L0: float | None = None, N: int | None = None,
                       lam: float | None = None,
                       on_iteration=None) -> ReconResult:
    lam = section.lam if lam is None else lam
    problem = make_objective(section.model, ds, lam, section.tv_inner_iters,
                             section.tv_warm_start)
    x0 = uniform_init(ds.operator, ds.sinogram)
    cfg = solver_config(section, algorithm, L0, N)
    x, records = solvers.run(cfg, problem, x0, on_iteration)
    n = ds.geometry.n_side
    return ReconResult(x.reshape(n, n), records, _residual_sq(ds, x),
                       records[-1].psi)


def calibrate_epsilon(ds: Dataset, section, lam: float) -> float:
    """Squared residual the default accelerated solver reaches at ``lam``.

    Mirrors how the row-action stopping threshold was originally chosen:
    match the data fidelity the proximal gradient method attains within its
    iteration budget.
    """
    probe = reconstruct_solver(ds, section, algorithm="fpgm", lam=lam)
    return probe.residual_sq


def reconstruct_supart(ds: Dataset, section, epsilon: float | None = None,
                       on_sweep=None) -> ReconResult:
    if section.model != "ls_tv":
        raise ConfigError("supart needs the ls_tv model (row-action data)")
    if epsilon is None:
        epsilon = section.epsilon
    if epsilon is None or math.isnan(epsilon):
        epsilon = calibrate_epsilon(ds, section, section.lam)
    g = ds.geometry
    order = baselines.efficient_order(g.n_views, g.n_rays)
    x0 = uniform_init(ds.operator, ds.sinogram).reshape(g.n_side, g.n_side)
    sweep_rows = []

    def record(k, res, tv_before, tv_after, l):
        sweep_rows.append((k, res, tv_after, l))
        if on_sweep is not None:
            on_sweep(k, res, tv_before, tv_after, l)

    img, sweeps = baselines.supart(
        ds.operator, ds.sinogram, x0, epsilon,
        alpha=section.art_alpha, order=order, a=section.sup_a,
        sup_b=section.sup_b, I=section.sup_I, on_sweep=record,
    )
    return ReconResult(img, sweep_rows, _residual_sq(ds, img),
                       math.nan, sweeps=sweeps, epsilon=epsilon)


# ---------------------------------------------------------------------------
# benchmark (objective-decay comparison)
# ---------------------------------------------------------------------------


@dataclass
class BenchmarkLeg:
    name: str
    algorithm: str
    L0: float
    records: list
    final_psi: float
    gaps: np.ndarray
    cum_ms: np.ndarray
    convergent: bool


@dataclass
class BenchmarkResult:
    reference_records: list
    psi_ref: float
    legs: list[BenchmarkLeg]


def run_benchmark(cfg: RunConfig, out_dir=None) -> BenchmarkResult:
    """Long-reference objective-decay comparison across solver legs.

    Runs a reference solver for ``reference_multiplier`` times the budget,
    then every (algorithm, L0) pair, and reports per-iteration relative
    optimality gaps against the reference objective value.
    """
    b = cfg.benchmark
    ds = simulate_dataset(cfg)
    section = cfg.solver

    ref = reconstruct_solver(ds, section, algorithm="fista",
                             L0=b.reference_L0,
                             N=b.budget * b.reference_multiplier)
    psi_ref = ref.psi_final

    legs = []
    for token in b.algorithms:
        for L0 in b.L0_values:
            res = reconstruct_solver(ds, section, algorithm=token, L0=L0,
                                     N=b.budget)
            gaps = metrics.optimality_gap_trace(res.records, psi_ref)
            cum_ms = np.cumsum([r.wall_ms for r in res.records])
            legs.append(BenchmarkLeg(
                name=f"{token}_L0_{L0:g}", algorithm=token, L0=L0,
                records=res.records, final_psi=res.psi_final, gaps=gaps,
                cum_ms=cum_ms, convergent=(token != "fpgm_inf"),
            ))

    result = BenchmarkResult(ref.records, psi_ref, legs)
    if out_dir is not None:
        _write_benchmark(result, out_dir)
    return result


def _write_benchmark(result: BenchmarkResult, out_dir) -> None:
    from . import report

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    solvers.write_trace_csv(out / "reference_trace.csv",
                            result.reference_records)
    for leg in result.legs:
        solvers.write_trace_csv(out / f"trace_{leg.name}.csv", leg.records)
        with open(out / f"gap_{leg.name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "gap", "cum_wall_ms"])
            for rec, gap, ms in zip(leg.records, leg.gaps, leg.cum_ms):
                writer.writerow([rec.k, f"{gap:.17g}", f"{ms:.17g}"])
    with open(out / "benchmark_manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["leg", "algorithm", "L0", "final_psi", "final_gap",
                         "convergence_guarantee"])
        for leg in result.legs:
            writer.writerow([
                leg.name, leg.algorithm, f"{leg.L0:.17g}",
                f"{leg.final_psi:.17g}", f"{leg.gaps[-1]:.17g}",
                int(leg.convergent),
            ])
    report.save_gap_curves(out / "benchmark_iterations.png",
                           {leg.name: (np.arange(1, len(leg.gaps) + 1), leg.gaps)
                            for leg in result.legs},
                           xlabel="iteration")
    report.save_gap_curves(out / "benchmark_time.png",
                           {leg.name: (leg.cum_ms / 1e3, leg.gaps)
                            for leg in result.legs},
                           xlabel="seconds")


# ---------------------------------------------------------------------------
# repeated phantom study
# ---------------------------------------------------------------------------


@dataclass
class StudyRow:
    algorithm: str
    seed: int
    iroi: float
    residual_sq: float
    psi_final: float
    sweeps: int | None = None
    epsilon: float | None = None


@dataclass(frozen=True)
class SweepEvent:
    """One superiorized sweep: residual after, TV around the perturbation."""

    rep: int
    k: int
    residual_sq: float
    tv_before: float
    tv_after: float
    l: int


@dataclass
class StudyResult:
    rows: list[StudyRow]
    summary: list[tuple[str, float, float]]
    sweep_log: list[SweepEvent]


def _study_rep(cfg: RunConfig, rep: int,
               collect_sweeps: bool) -> tuple[list[StudyRow], list[SweepEvent]]:
    """One repetition of the study cycle; top level so workers can run it."""
    st = cfg.study
    seed = st.base_seed + rep
    ds = simulate_dataset(cfg, phantom_seed=seed,
                          counts_seed=seed + COUNT_SEED_OFFSET)
    # The study compares the regularized least-squares model against the
    # row-action baseline regardless of the solver section's model.
    section = replace(cfg.solver, model="ls_tv")
    rows: list[StudyRow] = []
    eps = st.epsilon
    for lam in st.lambdas:
        res = reconstruct_solver(ds, section, algorithm="fpgm",
                                 L0=st.L0, N=st.budget, lam=lam)
        rows.append(StudyRow(f"fpgm_lam_{lam:g}", seed,
                             metrics.iroi(res.image, ds.phantom),
                             res.residual_sq, res.psi_final))
        if lam == st.calibration_lambda and math.isnan(eps):
            eps = res.residual_sq
    log: list[SweepEvent] = []
    monitor = None
    if collect_sweeps:
        monitor = (lambda k, res_sq, tvb, tva, l:
                   log.append(SweepEvent(rep, k, res_sq, tvb, tva, l)))
    sup = reconstruct_supart(ds, section, epsilon=eps, on_sweep=monitor)
    rows.append(StudyRow("supart", seed,
                         metrics.iroi(sup.image, ds.phantom),
                         sup.residual_sq, math.nan, sweeps=sup.sweeps,
                         epsilon=sup.epsilon))
    return rows, log


def run_study(cfg: RunConfig, out_dir=None, threads: int = 1,
              collect_sweeps: bool = False) -> StudyResult:
    """Repeated cycle: random phantom, simulated data, reconstructions, IROI.

    Per repetition the regularized solver runs once per regularization
    weight; the row-action baseline stops at a squared-residual threshold
    calibrated (unless fixed in the config) to what the solver reached at
    the calibration weight. Repetitions are independent and deterministic
    given the base seed, also under the worker pool.
    """
    st = cfg.study
    if st.calibration_lambda not in st.lambdas:
        raise ConfigError("calibration_lambda must be one of the study lambdas")

    reps = range(st.seeds)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads,
                                 initializer=_limit_worker_threads,
                                 initargs=(threads,)) as pool:
            per_rep = list(pool.map(_study_rep, [cfg] * st.seeds, reps,
                                    [collect_sweeps] * st.seeds))
    else:
        per_rep = [_study_rep(cfg, r, collect_sweeps) for r in reps]

    rows = [row for chunk, _ in per_rep for row in chunk]
    rows.sort(key=lambda r: (r.seed, r.algorithm))
    sweep_log = [ev for _, log in per_rep for ev in log]

    supart_by_seed = {r.seed: r.iroi for r in rows if r.algorithm == "supart"}
    seeds_in_order = sorted(supart_by_seed)
    summary = []
    for lam in st.lambdas:
        name = f"fpgm_lam_{lam:g}"
        mine = {r.seed: r.iroi for r in rows if r.algorithm == name}
        a = [mine[s] for s in seeds_in_order]
        bvals = [supart_by_seed[s] for s in seeds_in_order]
        mean_a, _, p = metrics.paired_compare(a, bvals)
        summary.append((name, mean_a, p))
    summary.append(("supart",
                    float(np.mean([supart_by_seed[s] for s in seeds_in_order])),
                    math.nan))

    result = StudyResult(rows, summary, sweep_log)
    if out_dir is not None:
        _write_study(result, out_dir)
    return result


def _write_study(result: StudyResult, out_dir) -> None:
    from . import report

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_results_csv(
        out / "results.csv",
        [(r.algorithm, r.seed, r.iroi, r.residual_sq, r.psi_final)
         for r in result.rows],
    )
    metrics.write_summary_csv(out / "summary.csv", result.summary)
    report.save_study_figure(out / "study_iroi.png", result.rows,
                             result.summary)
