import math

import numpy as np
import pytest

from conftest import synthetic_correlation
from fdmimo.angular import (AngularSpectrum, ElementPattern,
                            LaplacianElevation, VonMisesAzimuth)
from fdmimo.beamforming import LinkBudget, MultiUserScene
from fdmimo.correlation import (ArrayGeometry, ElementCorrelationMatrix,
                                PortWeightMatrix, build_element_correlation)
from fdmimo.grouping import (GroupingConfig, assign_users,
                             build_group_subspaces, chordal_distance,
                             kmeans_baseline, ug_sdb, user_eigenspace)
from fdmimo.maxmin_sdp import sdb_solve


def unit_budget():
    return LinkBudget(1.0, 1.0, 1.0, 0.0, 1e-2)


def spectrum_at(elev_deg, azim=0.5, spread_deg=15.0):
    return AngularSpectrum(
        LaplacianElevation(math.radians(elev_deg), math.radians(spread_deg)),
        VonMisesAzimuth(azim, 10.0), ElementPattern.default_3gpp())


def random_orthonormal(rng, rows, cols):
    x = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal(
        (rows, cols))
    q, _ = np.linalg.qr(x)
    return q[:, :cols]


class TestGroupingConfig:
    def test_overlapping_supports_rejected(self):
        with pytest.raises(ValueError):
            GroupingConfig(2, (math.radians(95.0), math.radians(100.0)),
                           math.radians(5.0))

    def test_rank_split(self):
        cfg = GroupingConfig(3, tuple(math.radians(v)
                                      for v in (93.0, 101.0, 109.0)),
                             math.radians(3.0))
        assert cfg.ranks(180) == (60, 60, 60)
        with pytest.raises(ValueError):
            cfg.ranks(100)  # not divisible by 3

    def test_explicit_ranks_must_sum(self):
        cfg = GroupingConfig(2, (math.radians(95.0), math.radians(110.0)),
                             math.radians(4.0), subspace_ranks=(10, 10))
        assert cfg.ranks(20) == (10, 10)
        with pytest.raises(ValueError):
            cfg.ranks(30)


class TestChordalDistance:
    def test_identical_subspaces(self):
        rng = np.random.default_rng(1)
        u = random_orthonormal(rng, 8, 3)
        assert chordal_distance(u, u) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_ranges(self):
        u = np.eye(8)[:, :3].astype(complex)
        v = np.eye(8)[:, 3:6].astype(complex)
        assert chordal_distance(u, v) == pytest.approx(6.0, abs=1e-12)

    def test_matches_projector_formula(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            u = random_orthonormal(rng, 10, 4)
            v = random_orthonormal(rng, 10, 3)
            direct = np.linalg.norm(u @ u.conj().T - v @ v.conj().T) ** 2
            assert chordal_distance(u, v) == pytest.approx(direct, abs=1e-10)
            assert chordal_distance(v, u) \
                == pytest.approx(chordal_distance(u, v), abs=1e-12)

    def test_rejects_non_orthonormal(self):
        rng = np.random.default_rng(3)
        u = random_orthonormal(rng, 6, 2)
        with pytest.raises(ValueError):
            chordal_distance(2.0 * u, u)


class TestGroupSubspaces:
    def test_orthonormal_bases(self):
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        cfg = GroupingConfig(2, (math.radians(95.0), math.radians(112.0)),
                             math.radians(6.0))
        bases = build_group_subspaces(cfg, spectrum_at(100.0), geom, 30)
        assert len(bases) == 2
        for b in bases:
            assert b.shape == (12, 6)
            gram = b.conj().T @ b
            assert np.max(np.abs(gram - np.eye(6))) < 1e-10

    def test_eigenvalue_ordering(self):
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        cfg = GroupingConfig(2, (math.radians(95.0), math.radians(112.0)),
                             math.radians(6.0))
        bases = build_group_subspaces(cfg, spectrum_at(100.0), geom, 30)
        import dataclasses
        spec_g = dataclasses.replace(
            spectrum_at(100.0),
            elevation=LaplacianElevation(math.radians(95.0),
                                         math.radians(6.0)))
        mat = build_element_correlation(spec_g, geom, 30)
        eigs = np.linalg.eigvalsh(mat.entries)[::-1]
        retained = np.sort(np.real(np.diag(
            bases[0].conj().T @ mat.entries @ bases[0])))[::-1]
        assert retained[-1] >= eigs[6] - 1e-10

    def test_group_count_must_divide_ports(self):
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        cfg = GroupingConfig(3, tuple(math.radians(v)
                                      for v in (93.0, 101.0, 109.0)),
                             math.radians(3.0))
        with pytest.raises(ValueError):
            build_group_subspaces(cfg, spectrum_at(100.0), geom, 30)


class TestUserEigenspace:
    def test_energy_capture(self):
        rng = np.random.default_rng(4)
        geom = ArrayGeometry(4, 3, 0.5, 0.5)
        mat = synthetic_correlation(geom, rng)
        u = user_eigenspace(mat, energy=0.95)
        eigs = np.sort(np.linalg.eigvalsh(mat.entries))[::-1]
        assert eigs[: u.shape[1]].sum() >= 0.95 * eigs.sum() - 1e-9
        if u.shape[1] > 1:
            assert eigs[: u.shape[1] - 1].sum() < 0.95 * eigs.sum()

    def test_rank_cap(self):
        rng = np.random.default_rng(5)
        geom = ArrayGeometry(10, 10, 0.5, 0.5)
        mat = synthetic_correlation(geom, rng)
        u = user_eigenspace(mat, energy=0.9999, cap=7)
        assert u.shape[1] <= 7


class TestAssignment:
    def test_self_match(self):
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        cfg = GroupingConfig(2, (math.radians(95.0), math.radians(112.0)),
                             math.radians(6.0))
        base = spectrum_at(100.0)
        bases = build_group_subspaces(cfg, base, geom, 30)
        users = []
        for center in (95.0, 112.0):
            spec = AngularSpectrum(
                LaplacianElevation(math.radians(center), math.radians(6.0)),
                base.azimuth, base.pattern)
            users.append(user_eigenspace(
                build_element_correlation(spec, geom, 30)))
        assignment, dists = assign_users(users, bases)
        assert assignment == [0, 1]
        assert dists.shape == (2, 2)

    def test_identical_users_same_group(self):
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        cfg = GroupingConfig(2, (math.radians(95.0), math.radians(112.0)),
                             math.radians(6.0))
        bases = build_group_subspaces(cfg, spectrum_at(100.0), geom, 30)
        u = user_eigenspace(
            build_element_correlation(spectrum_at(97.0), geom, 30))
        assignment, _ = assign_users([u, u], bases)
        assert assignment[0] == assignment[1]

    def test_partition(self):
        rng = np.random.default_rng(6)
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        cfg = GroupingConfig(2, (math.radians(95.0), math.radians(112.0)),
                             math.radians(6.0))
        bases = build_group_subspaces(cfg, spectrum_at(100.0), geom, 30)
        users = [user_eigenspace(synthetic_correlation(geom, rng))
                 for _ in range(7)]
        assignment, _ = assign_users(users, bases)
        assert len(assignment) == 7
        assert set(assignment) <= {0, 1}


class TestKmeans:
    def test_one_cluster_per_user(self):
        rng = np.random.default_rng(7)
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        users = [user_eigenspace(synthetic_correlation(geom, rng))
                 for _ in range(4)]
        assignment = kmeans_baseline(users, 4, seed=0)
        assert sorted(assignment) == [0, 1, 2, 3]

    def test_recovers_separated_clusters(self):
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        spaces = []
        truth = []
        for c, center in enumerate((94.0, 114.0)):
            for j in range(6):
                spec = spectrum_at(center + 0.4 * j, azim=0.5,
                                   spread_deg=6.0)
                spaces.append(user_eigenspace(
                    build_element_correlation(spec, geom, 30)))
                truth.append(c)
        hits = 0
        for seed in range(100):
            assignment = kmeans_baseline(spaces, 2, seed=seed)
            first = assignment[0]
            ok = all((a == first) == (t == truth[0])
                     for a, t in zip(assignment, truth))
            hits += ok
        assert hits >= 95

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        users = [user_eigenspace(synthetic_correlation(geom, rng))
                 for _ in range(6)]
        a = kmeans_baseline(users, 2, seed=3)
        b = kmeans_baseline(users, 2, seed=3)
        assert a == b

    def test_more_groups_than_users_rejected(self):
        rng = np.random.default_rng(9)
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        users = [user_eigenspace(synthetic_correlation(geom, rng))]
        with pytest.raises(ValueError):
            kmeans_baseline(users, 2, seed=0)


class TestUgSdb:
    def test_single_group_matches_plain_solver(self):
        rng = np.random.default_rng(10)
        geom = ArrayGeometry(4, 4, 0.5, 0.5)
        users = [synthetic_correlation(geom, rng) for _ in range(3)]
        scene = MultiUserScene(users,
                               PortWeightMatrix.uniform_tilt(1.5, geom),
                               [unit_budget()] * 3)
        cfg = GroupingConfig(1, (math.radians(100.0),), math.radians(5.0))
        res = ug_sdb(scene, [0, 0, 0], cfg, seed=42)
        sol = sdb_solve(scene, seed=42)
        assert np.array_equal(res.group_weights[0],
                              sol.randomization.weight_vector)
        assert min(res.user_min_sir) \
            == pytest.approx(sol.randomization.achieved_min_sir, rel=1e-12)

    def test_lone_user_group_gets_eigen_weights(self):
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        users = [build_element_correlation(spectrum_at(95.0, spread_deg=6.0),
                                           geom, 30),
                 build_element_correlation(spectrum_at(112.0, spread_deg=6.0),
                                           geom, 30)]
        scene = MultiUserScene(users,
                               PortWeightMatrix.uniform_tilt(1.5, geom),
                               [unit_budget()] * 2)
        cfg = GroupingConfig(2, (math.radians(95.0), math.radians(112.0)),
                             math.radians(6.0))
        res = ug_sdb(scene, [0, 1], cfg, seed=0)
        # single-user groups take the interference-free eigen direction
        for g, k in ((0, 0), (1, 1)):
            ne = geom.n_elements
            lo = g * (geom.n_ports // 2) * ne
            sel = slice(lo, lo + (geom.n_ports // 2) * ne)
            sub = users[k].entries[sel, sel].reshape(2, ne, 2, ne)
            block_sum = np.einsum("sisj->ij", sub)
            eigs, vecs = np.linalg.eigh(block_sum)
            top = vecs[:, -1]
            overlap = abs(np.vdot(top, res.group_weights[g]))
            assert overlap == pytest.approx(1.0, abs=1e-9)
        assert res.user_min_sir == (math.inf, math.inf)

    def test_overloaded_group_flagged(self):
        rng = np.random.default_rng(11)
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        users = [synthetic_correlation(geom, rng) for _ in range(4)]
        scene = MultiUserScene(users,
                               PortWeightMatrix.uniform_tilt(1.5, geom),
                               [unit_budget()] * 4)
        cfg = GroupingConfig(2, (math.radians(95.0), math.radians(112.0)),
                             math.radians(6.0))
        res = ug_sdb(scene, [0, 0, 0, 1], cfg, seed=0)
        assert res.overloaded_groups == (0,)

    def test_empty_group_warns(self):
        rng = np.random.default_rng(12)
        geom = ArrayGeometry(3, 4, 0.5, 0.5)
        users = [synthetic_correlation(geom, rng) for _ in range(2)]
        scene = MultiUserScene(users,
                               PortWeightMatrix.uniform_tilt(1.5, geom),
                               [unit_budget()] * 2)
        cfg = GroupingConfig(2, (math.radians(95.0), math.radians(112.0)),
                             math.radians(6.0))
        with pytest.warns(UserWarning):
            res = ug_sdb(scene, [0, 0], cfg, seed=0)
        assert res.group_weights[1] is None
