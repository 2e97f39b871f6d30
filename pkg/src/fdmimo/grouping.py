"""User-group-specific single downtilt beamforming: disjoint elevation
supports define group subspaces, users join by chordal distance, and each
port group gets its own max-min solve."""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .angular import AngularSpectrum, LaplacianElevation
from .beamforming import MultiUserScene, _principal_eigenvector
from .correlation import (ArrayGeometry, ElementCorrelationMatrix,
                          PortWeightMatrix, build_element_correlation)
from .maxmin_sdp import SolverConfig, _sdp_data, sdb_solve

__all__ = [
    "GroupingConfig",
    "UgSdbResult",
    "build_group_subspaces",
    "chordal_distance",
    "user_eigenspace",
    "assign_users",
    "kmeans_baseline",
    "ug_sdb",
    "run_ug_sdb",
]

USER_RANK_ENERGY = 0.95
USER_RANK_CAP = 60


@dataclass(frozen=True)
class GroupingConfig:
    """Group layout: mean elevation directions with a common half-spread
    whose intervals must be pairwise disjoint."""

    n_groups: int
    mean_elevation_rad: tuple
    half_spread_rad: float
    subspace_ranks: tuple | None = None

    def __post_init__(self):
        # G = 1 is allowed so that the single-group case can be checked
        # against the plain solver; real groupings use G >= 2
        if self.n_groups < 1:
            raise ValueError("grouping needs at least one group")
        if len(self.mean_elevation_rad) != self.n_groups:
            raise ValueError("one mean elevation per group required")
        centers = sorted(self.mean_elevation_rad)
        for lo, hi in zip(centers, centers[1:]):
            if hi - lo < 2.0 * self.half_spread_rad:
                raise ValueError(
                    f"elevation supports overlap: centres {lo:.4f} and "
                    f"{hi:.4f} with half-spread {self.half_spread_rad:.4f}")

    def ranks(self, total_dim: int) -> tuple:
        """Per-group subspace ranks; equal split of the full dimension
        when not configured explicitly."""
        if self.subspace_ranks is not None:
            if sum(self.subspace_ranks) != total_dim:
                raise ValueError("subspace ranks must sum to the array "
                                 "dimension")
            return tuple(self.subspace_ranks)
        if total_dim % self.n_groups:
            raise ValueError("group count must divide the array dimension")
        return tuple([total_dim // self.n_groups] * self.n_groups)


def build_group_subspaces(cfg: GroupingConfig, base_spec: AngularSpectrum,
                          geom: ArrayGeometry, n0: int) -> list[np.ndarray]:
    """Dominant eigenspaces of per-group correlation matrices.

    Each group's matrix uses its own mean elevation with the group
    half-spread as the elevation spread; azimuth law and element pattern
    are inherited from the base spectrum.
    """
    total = geom.n_total
    ranks = cfg.ranks(total)
    if geom.n_ports % cfg.n_groups:
        raise ValueError("group count must divide the number of ports")
    bases = []
    for theta_g, r_g in zip(cfg.mean_elevation_rad, ranks):
        if r_g > total:
            raise ValueError("subspace rank exceeds the array dimension")
        spec_g = dataclasses.replace(
            base_spec,
            elevation=LaplacianElevation(theta_g, cfg.half_spread_rad))
        r_mat = build_element_correlation(spec_g, geom, n0)
        eigs, vecs = np.linalg.eigh(r_mat.entries)
        bases.append(vecs[:, ::-1][:, :r_g])
    return bases


def _check_orthonormal(u: np.ndarray, tol: float = 1e-8) -> None:
    gram = u.conj().T @ u
    if np.max(np.abs(gram - np.eye(u.shape[1]))) > tol:
        raise ValueError("subspace basis is not orthonormal")


def chordal_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Squared Frobenius distance of the two column-span projectors,
    computed without forming them."""
    _check_orthonormal(u)
    _check_orthonormal(v)
    cross = np.linalg.norm(u.conj().T @ v) ** 2
    return float(u.shape[1] + v.shape[1] - 2.0 * cross)


def user_eigenspace(re: ElementCorrelationMatrix,
                    energy: float = USER_RANK_ENERGY,
                    cap: int = USER_RANK_CAP) -> np.ndarray:
    """Dominant eigenvectors capturing the requested share of the trace,
    capped in rank."""
    eigs, vecs = np.linalg.eigh(re.entries)
    eigs = eigs[::-1]
    vecs = vecs[:, ::-1]
    cum = np.cumsum(np.clip(eigs, 0.0, None))
    rank = int(np.searchsorted(cum, energy * cum[-1]) + 1)
    rank = min(rank, cap, re.entries.shape[0])
    return vecs[:, :rank]


def assign_users(user_spaces, bases) -> tuple[list[int], np.ndarray]:
    """Nearest-subspace assignment by chordal distance.

    Returns per-user group indices (ties to the lowest group) and the
    full distance table, one row per user.
    """
    dists = np.array([[chordal_distance(u, v) for v in bases]
                      for u in user_spaces])
    return [int(i) for i in np.argmin(dists, axis=1)], dists


def kmeans_baseline(user_spaces, n_groups: int, seed: int,
                    max_iter: int = 100) -> list[int]:
    """Lloyd clustering of user eigenspaces under chordal distance.

    Centroids are means of member projectors, re-orthonormalised through
    their dominant eigenvectors; an emptied cluster keeps its previous
    centroid.  Deterministic for a fixed seed.
    """
    if n_groups > len(user_spaces):
        raise ValueError("more groups than users")
    rng = np.random.default_rng(seed)
    projectors = [u @ u.conj().T for u in user_spaces]
    ranks = [u.shape[1] for u in user_spaces]
    init = rng.choice(len(user_spaces), size=n_groups, replace=False)
    centroids = [user_spaces[i] for i in init]
    assignment = [-1] * len(user_spaces)
    for _ in range(max_iter):
        new_assignment, _ = assign_users(user_spaces, centroids)
        if new_assignment == assignment:
            break
        assignment = new_assignment
        for g in range(n_groups):
            members = [i for i, a in enumerate(assignment) if a == g]
            if not members:
                continue
            mean_proj = sum(projectors[i] for i in members) / len(members)
            rank = max(1, round(sum(ranks[i] for i in members) / len(members)))
            _, vecs = np.linalg.eigh(mean_proj)
            centroids[g] = vecs[:, ::-1][:, :rank]
    return assignment


@dataclass(frozen=True)
class UgSdbResult:
    """Per-group weights plus per-user intra-group performance."""

    assignment: tuple
    group_weights: tuple          # per group: weight vector or None (empty)
    user_min_sir: tuple           # per user: deterministic SIR in its group
    overloaded_groups: tuple      # groups with more users than ports
    leakage_ratio: tuple          # per user: cross-group vs own beam power


def _restricted_scene(scene: MultiUserScene, members, port_lo: int,
                      n_ports_g: int) -> MultiUserScene:
    geom = scene.geometry
    ne = geom.n_elements
    sub_geom = ArrayGeometry(ne, n_ports_g, geom.port_spacing_wl,
                             geom.element_spacing_wl)
    sel = slice(port_lo * ne, (port_lo + n_ports_g) * ne)
    users = [ElementCorrelationMatrix(sub_geom, scene.users[k].entries[sel, sel])
             for k in members]
    budgets = [scene.budgets[k] for k in members]
    weights = PortWeightMatrix.uniform_tilt(math.pi / 2.0, sub_geom)
    return MultiUserScene(users, weights, budgets)


def ug_sdb(scene: MultiUserScene, assignment, cfg: GroupingConfig,
           solver_cfg: SolverConfig = SolverConfig(),
           seed: int = 0) -> UgSdbResult:
    """Optimise one downtilt vector per port group for its user group.

    Ports are split into contiguous equal groups.  Interference inside
    each solve is intra-group only (the grouped ports are disjoint);
    cross-group beam leakage is reported as a diagnostic ratio, not
    optimised.  Single-user groups take the interference-free optimum
    (the principal eigenvector of the summed diagonal blocks); groups
    with more users than ports are flagged.
    """
    geom = scene.geometry
    if geom.n_ports % cfg.n_groups:
        raise ValueError("group count must divide the number of ports")
    n_ports_g = geom.n_ports // cfg.n_groups
    ne = geom.n_elements

    group_weights: list = [None] * cfg.n_groups
    overloaded = []
    members_of = [[k for k, a in enumerate(assignment) if a == g]
                  for g in range(cfg.n_groups)]
    sub_scenes = [None] * cfg.n_groups
    for g, members in enumerate(members_of):
        if not members:
            warnings.warn(f"user group {g} is empty; its ports stay idle")
            continue
        if len(members) > n_ports_g:
            overloaded.append(g)
        sub = _restricted_scene(scene, members, g * n_ports_g, n_ports_g)
        sub_scenes[g] = sub
        if len(members) == 1:
            group_weights[g] = _principal_eigenvector(sub.block_sums[0])
        else:
            group_weights[g] = sdb_solve(sub, solver_cfg, seed
                                         ).randomization.weight_vector

    user_sir = [math.inf] * scene.n_users
    for g, members in enumerate(members_of):
        if len(members) < 2:
            continue  # empty group, or a lone user with no interferer
        data = _sdp_data(sub_scenes[g])
        w_mat = np.outer(group_weights[g], group_weights[g].conj())
        f = data.f_all(w_mat)
        gd, _ = data.g_all(w_mat)
        for j, k in enumerate(members):
            user_sir[k] = (float((f[j] / gd[j]) ** 2) if gd[j] > 0
                           else math.inf)

    leakage = []
    for k in range(scene.n_users):
        g = assignment[k]
        own = 0.0
        other = 0.0
        r4 = scene.users[k].entries.reshape(geom.n_ports, ne, geom.n_ports, ne)
        for gp in range(cfg.n_groups):
            w_g = group_weights[gp]
            if w_g is None:
                continue
            for s in range(gp * n_ports_g, (gp + 1) * n_ports_g):
                p = float(np.vdot(w_g, r4[s, :, s, :] @ w_g).real)
                if gp == g:
                    own += p
                else:
                    other += p
        leakage.append(other / own if own > 0 else math.inf)

    return UgSdbResult(tuple(assignment), tuple(group_weights),
                       tuple(user_sir), tuple(overloaded), tuple(leakage))


def run_ug_sdb(scene: MultiUserScene, cfg: GroupingConfig,
               base_spec: AngularSpectrum, n0: int,
               solver_cfg: SolverConfig = SolverConfig(),
               seed: int = 0):
    """Full pipeline: subspaces, assignment, per-group solves.

    Returns (result, assignment distance table).
    """
    bases = build_group_subspaces(cfg, base_spec, scene.geometry, n0)
    spaces = [user_eigenspace(u) for u in scene.users]
    assignment, dists = assign_users(spaces, bases)
    return ug_sdb(scene, assignment, cfg, solver_cfg, seed), dists
