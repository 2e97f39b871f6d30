"""Scenario orchestration: seeded user drops, tilting baselines and the
experiment runners behind the command-line interface."""

from __future__ import annotations

import dataclasses
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._version import __version__
from .angular import AngularSpectrum, LaplacianElevation, VonMisesAzimuth
from .beamforming import (LinkBudget, MultiUserScene,
                          optimal_single_user_weights, sir_deterministic,
                          snr_deterministic)
from .channel import draw_correlated_channels
from .config import ScenarioConfig
from .correlation import (PortWeightMatrix, build_element_correlation,
                          port_correlation, scf_element, scf_mc_grid)
from .grouping import (assign_users, build_group_subspaces, kmeans_baseline,
                       ug_sdb, user_eigenspace)
from .maxmin_sdp import sdb_solve
from .rng import child_seed, substream

__all__ = [
    "UserDrop",
    "ExperimentResult",
    "drop_users",
    "build_scene",
    "baseline_cst",
    "baseline_sbt",
    "baseline_muab",
    "run_experiment",
    "EXPERIMENTS",
]

SBT_PAIRS = ((113.75, 21.0), (96.51, 6.5))
SBT_THRESHOLD_DEG = (SBT_PAIRS[0][0] + SBT_PAIRS[1][0]) / 2.0


@dataclass(frozen=True)
class UserDrop:
    """One placed user: geometry-derived angles plus link budget."""

    distance_m: float
    bearing_rad: float
    elevation_los_rad: float
    spectrum: AngularSpectrum
    budget: LinkBudget


@dataclass(frozen=True)
class ExperimentResult:
    name: str
    metadata: dict
    tables: dict  # table name -> (column names, rows)


def _elevation_los(cfg: ScenarioConfig, distance_m: float) -> float:
    gap = cfg.cell.bs_height_m - cfg.cell.user_height_m
    return math.pi / 2.0 + math.atan2(gap, distance_m)


def _budget(cfg: ScenarioConfig, distance_m: float) -> LinkBudget:
    pl = min(1.0, (distance_m / cfg.link.pathloss_ref_m)
             ** (-cfg.link.pathloss_exponent))
    return LinkBudget(cfg.link.tx_power_w, pl, cfg.link.shadow_linear,
                      cfg.pattern.g_e_max_dbi, cfg.link.noise_power_w)


def _user_at(cfg: ScenarioConfig, distance_m: float, bearing_rad: float,
             elevation_mean_rad: float | None = None) -> UserDrop:
    theta_los = _elevation_los(cfg, distance_m)
    spec = AngularSpectrum(
        LaplacianElevation(
            elevation_mean_rad if elevation_mean_rad is not None
            else theta_los,
            math.radians(cfg.spectrum.elevation_spread_deg)),
        VonMisesAzimuth(bearing_rad, cfg.spectrum.azimuth_concentration),
        cfg.pattern)
    return UserDrop(distance_m, bearing_rad, theta_los, spec,
                    _budget(cfg, distance_m))


def drop_users(cfg: ScenarioConfig, seed: int) -> list[UserDrop]:
    """Place users uniformly over the serving annulus.

    The mean elevation AoD is the line-of-sight depression angle mapped
    to the convention where angles past 90 degrees point below the
    horizon; the mean azimuth AoD is the user bearing.
    """
    rng = substream(seed)
    users = []
    for _ in range(cfg.k_users):
        r = math.sqrt(rng.uniform(cfg.cell.min_distance_m ** 2,
                                  cfg.cell.radius_m ** 2))
        bearing = rng.uniform(-math.pi, math.pi)
        users.append(_user_at(cfg, r, bearing))
    return users


def drop_users_grouped(cfg: ScenarioConfig, seed: int) -> list[UserDrop]:
    """Place users with mean elevation AoDs inside the configured group
    supports (distances and bearings still uniform over the annulus)."""
    if cfg.grouping is None:
        raise ValueError("grouped drops need a [grouping] section")
    rng = substream(seed)
    users = []
    for _ in range(cfg.k_users):
        r = math.sqrt(rng.uniform(cfg.cell.min_distance_m ** 2,
                                  cfg.cell.radius_m ** 2))
        bearing = rng.uniform(-math.pi, math.pi)
        g = int(rng.integers(cfg.grouping.n_groups))
        center = cfg.grouping.mean_elevation_rad[g]
        mean = rng.uniform(center - cfg.grouping.half_spread_rad,
                           center + cfg.grouping.half_spread_rad)
        users.append(_user_at(cfg, r, bearing, elevation_mean_rad=mean))
    return users


def build_scene(cfg: ScenarioConfig, users: list[UserDrop],
                weights: PortWeightMatrix | None = None) -> MultiUserScene:
    """Assemble the correlation matrices for a drop (the expensive step)."""
    n0 = cfg.series_terms
    mats = [build_element_correlation(u.spectrum, cfg.geometry, n0)
            for u in users]
    if weights is None:
        weights = PortWeightMatrix.uniform_tilt(math.pi / 2.0, cfg.geometry)
    return MultiUserScene(mats, weights, [u.budget for u in users])


def _min_sir(scene: MultiUserScene) -> float:
    return min(sir_deterministic(k, scene) for k in range(scene.n_users))


def baseline_cst(theta_tilt: float, scene: MultiUserScene) -> float:
    """Common fixed tilt on every port; deterministic min-SIR."""
    tilted = scene.with_weights(
        PortWeightMatrix.uniform_tilt(theta_tilt, scene.geometry))
    return _min_sir(tilted)


def baseline_muab(scene: MultiUserScene, users: list[UserDrop]) -> tuple:
    """Tilt at the arithmetic mean of the user LoS elevation angles."""
    tilt = statistics.fmean(u.elevation_los_rad for u in users)
    return tilt, baseline_cst(tilt, scene)


def baseline_sbt(cfg: ScenarioConfig, users: list[UserDrop]) -> tuple:
    """Two-region switched tilting, time-shared by region occupancy.

    Each region re-derives the user correlation matrices with its own
    vertical beamwidth, serves only its own users in its slot, and the
    reported figure is the occupancy-weighted mean of the per-region
    minimum SIR.
    """
    regions = {0: [], 1: []}
    for i, u in enumerate(users):
        lower = math.degrees(u.elevation_los_rad) > SBT_THRESHOLD_DEG
        regions[0 if lower else 1].append(i)
    aggregate = 0.0
    detail = []
    for region, (tilt_deg, bw_deg) in enumerate(SBT_PAIRS):
        members = regions[region]
        activity = len(members) / len(users)
        if not members:
            detail.append((tilt_deg, bw_deg, 0.0, math.nan))
            continue
        pattern = dataclasses.replace(cfg.pattern, theta_3db_deg=bw_deg)
        region_cfg = dataclasses.replace(cfg, pattern=pattern)
        region_users = [
            dataclasses.replace(u, spectrum=dataclasses.replace(
                u.spectrum, pattern=pattern))
            for i, u in enumerate(users) if i in members]
        scene = build_scene(region_cfg, region_users,
                            PortWeightMatrix.uniform_tilt(
                                math.radians(tilt_deg), cfg.geometry))
        min_sir = (_min_sir(scene) if len(region_users) > 1 else math.inf)
        detail.append((tilt_deg, bw_deg, activity, min_sir))
        aggregate += activity * min_sir
    return aggregate, detail


def _mc_mean_sinr(scene: MultiUserScene, n_draws: int, seed: int,
                  with_noise: bool = True) -> np.ndarray:
    """Per-user average SINR (or SIR) over correlated Rayleigh draws with
    maximum ratio transmission.

    Signal, interference and power-normalisation terms are averaged over
    the draws before the ratio is formed (link-level average SINR).  The
    instantaneous-ratio mean is dominated by the heavy lower tail of the
    interference denominator at these array sizes and is not the quantity
    the large-system analysis approximates term by term.
    """
    k_users = scene.n_users
    nbs = scene.geometry.n_ports
    h = np.empty((n_draws, nbs, k_users), dtype=complex)
    for k in range(k_users):
        h[:, :, k] = draw_correlated_channels(scene.port_matrices[k],
                                              n_draws, child_seed(seed, k))
    cross = np.einsum("dik,dil->dkl", h.conj(), h)
    power = np.abs(cross) ** 2                     # |h_k^H h_l|^2
    norms = np.einsum("dkk->dk", cross).real       # ||h_k||^2
    sig = norms.mean(axis=0) ** 2
    interf = (power.sum(axis=2) - np.einsum("dkk->dk", power)).mean(axis=0)
    if with_noise:
        total = norms.sum(axis=1).mean()           # E tr(H H^H)
        noise = np.array([b.noise_var_w / b.rho for b in scene.budgets])
        interf = interf + noise * total
    return sig / interf


def _median(values) -> float:
    return float(statistics.median(values))


# ---------------------------------------------------------------------------
# experiment runners

def _metadata(cfg: ScenarioConfig, name: str, extra: dict | None = None) -> dict:
    geom = cfg.geometry
    meta = {
        "experiment": name,
        "package_version": __version__,
        "config_hash": cfg.config_hash(),
        "n_elements": geom.n_elements,
        "n_ports": geom.n_ports,
        "series_terms": cfg.series_terms,
        "k_users": cfg.k_users,
        "seed_drop": cfg.seeds.drop,
        "seed_channel": cfg.seeds.channel,
        "seed_solver": cfg.seeds.solver,
    }
    if extra:
        meta.update(extra)
    return meta


def run_validate_scf(cfg: ScenarioConfig, threads: int = 1,
                     verbose: bool = False) -> ExperimentResult:
    """Closed form against the Monte Carlo oracle over the full lag grid."""
    geom = cfg.geometry
    spec = cfg.fixed_spectrum()
    n0 = cfg.series_terms
    lags = [(ds, dz)
            for ds in range(-(geom.n_ports - 1), geom.n_ports)
            for dz in range(-(geom.n_elements - 1), geom.n_elements)]
    estimates = scf_mc_grid(lags, spec, geom, cfg.experiment.mc_samples,
                            cfg.seeds.channel)
    rows = []
    for (ds, dz), est in zip(lags, estimates):
        theory = scf_element(ds, dz, spec, geom, n0)
        ok = (abs(theory.real - est.value.real) <= 3.0 * est.sem_re
              and abs(theory.imag - est.value.imag) <= 3.0 * est.sem_im)
        rows.append((ds, dz, theory.real, theory.imag, est.value.real,
                     est.value.imag, abs(theory - est.value),
                     3.0 * est.sem_re, 3.0 * est.sem_im, int(ok)))
    cols = ("ds", "dz", "theory_re", "theory_im", "mc_re", "mc_im",
            "abs_err", "bound_re", "bound_im", "within_3sigma")
    return ExperimentResult(
        "validate_scf",
        _metadata(cfg, "validate_scf",
                  {"mc_samples": cfg.experiment.mc_samples}),
        {"lags": (cols, rows)})


def run_single_user(cfg: ScenarioConfig, threads: int = 1,
                    verbose: bool = False) -> ExperimentResult:
    """Cell-edge user: fixed-tilt sweep against the eigenbeamformer."""
    user = _user_at(cfg, cfg.cell.radius_m, 0.0)
    re = build_element_correlation(user.spectrum, cfg.geometry,
                                   cfg.series_terms)
    draws = cfg.experiment.channel_draws
    rows = []

    def snr_pair(weights):
        det = snr_deterministic(re, weights, user.budget)
        rbs = port_correlation(re, weights)
        h = draw_correlated_channels(rbs, draws, cfg.seeds.channel)
        mc = float(np.mean(user.budget.snr_scale
                           * np.sum(np.abs(h) ** 2, axis=1)))
        return det, mc

    for tilt_deg in cfg.experiment.cst_tilt_grid_deg:
        det, mc = snr_pair(PortWeightMatrix.uniform_tilt(
            math.radians(tilt_deg), cfg.geometry))
        rows.append(("fixed", tilt_deg, det, mc, math.log2(1 + det),
                     math.log2(1 + mc)))
    det, mc = snr_pair(optimal_single_user_weights(re))
    rows.append(("eigen", math.nan, det, mc, math.log2(1 + det),
                 math.log2(1 + mc)))
    cols = ("weights", "tilt_deg", "snr_det", "snr_mc", "rate_det", "rate_mc")
    meta = _metadata(cfg, "single_user",
                     {"los_elevation_deg":
                      round(math.degrees(user.elevation_los_rad), 4)})
    return ExperimentResult("single_user", meta, {"snr": (cols, rows)})


def _map_drops(fn, n_drops: int, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n_drops)))
    return [fn(d) for d in range(n_drops)]


def run_sdb(cfg: ScenarioConfig, threads: int = 1,
            verbose: bool = False) -> ExperimentResult:
    """Fixed-tilt sweep, solver point and relaxation bound per drop."""
    trace_rows = []

    def one_drop(d: int):
        users = drop_users(cfg, child_seed(cfg.seeds.drop, d))
        scene = build_scene(cfg, users)
        rows = []
        for tilt_deg in cfg.experiment.cst_tilt_grid_deg:
            rows.append((d, "cst", tilt_deg,
                         baseline_cst(math.radians(tilt_deg), scene),
                         math.nan))
        sol = sdb_solve(scene, cfg.solver, child_seed(cfg.seeds.solver, d))
        sdb_sir = sol.randomization.achieved_min_sir
        sdb_scene = scene.with_weights(PortWeightMatrix.from_common(
            sol.randomization.weight_vector, cfg.geometry.n_ports))
        mc_sir = float(np.min(_mc_mean_sinr(
            sdb_scene, cfg.experiment.channel_draws,
            child_seed(cfg.seeds.channel, d), with_noise=False)))
        rows.append((d, "sdb", math.nan, sdb_sir, mc_sir))
        rows.append((d, "sdr_bound", math.nan, sol.sdr_bound, math.nan))
        trace = [(d, i + 1, lam, f_val, used)
                 for i, ((lam, f_val), used)
                 in enumerate(zip(sol.state.history,
                                  sol.state.inner_iterations))]
        return rows, trace

    results = _map_drops(one_drop, cfg.experiment.drops, threads)
    rows = [r for drop_rows, _ in results for r in drop_rows]
    tables = {"min_sir": (("drop", "strategy", "tilt_deg", "min_sir_det",
                           "min_sir_mc"), rows)}
    if verbose:
        trace_rows = [r for _, trace in results for r in trace]
        tables["solver_trace"] = (("drop", "outer_iter", "lambda", "F",
                                   "inner_iters"), trace_rows)
    return ExperimentResult("sdb", _metadata(cfg, "sdb"), tables)


def run_baselines(cfg: ScenarioConfig, threads: int = 1,
                  verbose: bool = False) -> ExperimentResult:
    """Solver against the three fixed-tilt strategies, per drop."""

    def one_drop(d: int):
        users = drop_users(cfg, child_seed(cfg.seeds.drop, d))
        scene = build_scene(cfg, users)
        cst_vals = [(tilt,
                     baseline_cst(math.radians(tilt), scene))
                    for tilt in cfg.experiment.cst_tilt_grid_deg]
        best_tilt, best_cst = max(cst_vals, key=lambda tv: tv[1])
        sbt_val, _ = baseline_sbt(cfg, users)
        muab_tilt, muab_val = baseline_muab(scene, users)
        sol = sdb_solve(scene, cfg.solver, child_seed(cfg.seeds.solver, d))
        return (d, sol.randomization.achieved_min_sir, sol.sdr_bound,
                best_cst, best_tilt, sbt_val, muab_val,
                math.degrees(muab_tilt))

    rows = _map_drops(one_drop, cfg.experiment.drops, threads)
    cols = ("drop", "sdb", "sdr_bound", "cst_best", "cst_best_tilt_deg",
            "sbt", "muab", "muab_tilt_deg")
    med = ("median", _median([r[1] for r in rows]), math.nan,
           _median([r[3] for r in rows]), math.nan,
           _median([r[5] for r in rows]), _median([r[6] for r in rows]),
           math.nan)
    summary = (("quantity", "sdb", "sdr_bound", "cst_best",
                "cst_best_tilt_deg", "sbt", "muab", "muab_tilt_deg"), [med])
    return ExperimentResult("baselines", _metadata(cfg, "baselines"),
                            {"min_sir": (cols, rows), "summary": summary})


def run_ugsdb(cfg: ScenarioConfig, threads: int = 1,
              verbose: bool = False) -> ExperimentResult:
    """Grouped against ungrouped optimisation, plus a clustering baseline."""
    if cfg.grouping is None:
        raise ValueError("the grouped experiment needs a [grouping] section")
    base_spec = cfg.fixed_spectrum()
    n0 = cfg.series_terms
    bases = build_group_subspaces(cfg.grouping, base_spec, cfg.geometry, n0)

    def one_drop(d: int):
        users = drop_users_grouped(cfg, child_seed(cfg.seeds.drop, d))
        scene = build_scene(cfg, users)
        solver_seed = child_seed(cfg.seeds.solver, d)

        sol = sdb_solve(scene, cfg.solver, solver_seed)
        sdb_sir = sol.randomization.achieved_min_sir

        spaces = [user_eigenspace(u) for u in scene.users]
        assignment, dists = assign_users(spaces, bases)
        res = ug_sdb(scene, assignment, cfg.grouping, cfg.solver, solver_seed)
        ug_sir = min(res.user_min_sir)

        km = kmeans_baseline(spaces, cfg.grouping.n_groups,
                             child_seed(cfg.seeds.solver, d, 1))
        km_res = ug_sdb(scene, km, cfg.grouping, cfg.solver, solver_seed)
        km_sir = min(km_res.user_min_sir)

        assign_rows = [
            (d, k, assignment[k], km[k],
             *(float(x) for x in dists[k])) for k in range(len(users))]
        return (d, sdb_sir, ug_sir, km_sir, len(res.overloaded_groups),
                max(res.leakage_ratio)), assign_rows

    results = _map_drops(one_drop, cfg.experiment.drops, threads)
    rows = [r for r, _ in results]
    assign_rows = [a for _, rows_a in results for a in rows_a]
    cols = ("drop", "sdb", "ug_sdb", "ug_sdb_kmeans", "overloaded_groups",
            "max_leakage_ratio")
    dist_cols = tuple(f"dist_group{g}" for g in range(cfg.grouping.n_groups))
    assign_cols = ("drop", "user", "group", "kmeans_group") + dist_cols
    med = [("sdb", _median([r[1] for r in rows])),
           ("ug_sdb", _median([r[2] for r in rows])),
           ("ug_sdb_kmeans", _median([r[3] for r in rows]))]
    return ExperimentResult(
        "ugsdb", _metadata(cfg, "ugsdb", {"n_groups": cfg.grouping.n_groups}),
        {"min_sir": (cols, rows),
         "assignment": (assign_cols, assign_rows),
         "summary": (("strategy", "median_min_sir"), med)})


def run_sweep(cfg: ScenarioConfig, threads: int = 1,
              verbose: bool = False) -> ExperimentResult:
    """Median strategy comparison swept over the user count."""
    rows = []
    for k in cfg.experiment.k_sweep:
        sub_cfg = dataclasses.replace(cfg, k_users=int(k))
        res = run_baselines(sub_cfg, threads=threads)
        med = res.tables["summary"][1][0]
        rows.append((int(k), med[1], med[3], med[5], med[6]))
    cols = ("k_users", "sdb_median", "cst_best_median", "sbt_median",
            "muab_median")
    return ExperimentResult("sweep", _metadata(cfg, "sweep"),
                            {"median_min_sir": (cols, rows)})


EXPERIMENTS = {
    "validate-scf": run_validate_scf,
    "single-user": run_single_user,
    "sdb": run_sdb,
    "ugsdb": run_ugsdb,
    "baselines": run_baselines,
    "sweep": run_sweep,
}


def run_experiment(cfg: ScenarioConfig, kind: str, threads: int = 1,
                   verbose: bool = False) -> ExperimentResult:
    """Dispatch one named experiment; outputs are pure functions of the
    configuration, seeds included."""
    try:
        runner = EXPERIMENTS[kind]
    except KeyError:
        raise ValueError(f"unknown experiment '{kind}'; expected one of "
                         f"{sorted(EXPERIMENTS)}")
    return runner(cfg, threads=threads, verbose=verbose)
