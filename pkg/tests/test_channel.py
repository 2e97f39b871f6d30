import math

import numpy as np
import pytest

from fdmimo.angular import (AngularSpectrum, ElementPattern,
                            LaplacianElevation, VonMisesAzimuth)
from fdmimo.channel import (ChannelRealization, RayChannelConfig,
                            array_response, array_response_matrix,
                            draw_correlated_channel, draw_correlated_channels,
                            draw_ray_channel, psd_sqrt)
from fdmimo.correlation import (ArrayGeometry, PortWeightMatrix,
                                build_element_correlation, port_correlation)
from fdmimo.rng import child_seed, substream


class TestArrayResponse:
    def test_reference_element(self, fig3_geom):
        assert array_response(0.7, 1.1, 1, 1, fig3_geom) == 1.0 + 0.0j

    def test_broadside(self, fig3_geom):
        for z in (1, 5, 10):
            for s in (1, 4, 8):
                assert array_response(0.0, math.pi / 2.0, z, s, fig3_geom) \
                    == pytest.approx(1.0 + 0.0j, abs=1e-13)

    def test_half_wavelength_phase(self, fig3_geom):
        val = array_response(math.pi / 2.0, math.pi / 2.0, 1, 2, fig3_geom)
        assert val == pytest.approx(-1.0 + 0.0j, abs=1e-12)

    def test_index_bounds(self, fig3_geom):
        with pytest.raises(ValueError):
            array_response(0.0, 1.0, 0, 1, fig3_geom)
        with pytest.raises(ValueError):
            array_response(0.0, 1.0, 1, 9, fig3_geom)

    def test_matrix_matches_scalar(self, fig3_geom):
        v = array_response_matrix(0.4, 1.9, fig3_geom)
        assert v.shape == (10, 8)
        for z, s in [(1, 1), (3, 2), (10, 8)]:
            assert v[z - 1, s - 1] == pytest.approx(
                array_response(0.4, 1.9, z, s, fig3_geom), abs=1e-14)


def small_setup():
    spec = AngularSpectrum(
        LaplacianElevation(math.radians(100.0), math.radians(15.0)),
        VonMisesAzimuth(math.pi / 3.0, 10.0),
        ElementPattern.default_3gpp())
    geom = ArrayGeometry(4, 4, 0.5, 0.5)
    weights = PortWeightMatrix.uniform_tilt(math.pi / 2.0, geom)
    return spec, geom, weights


class TestRayChannel:
    def test_deterministic(self):
        spec, geom, weights = small_setup()
        cfg = RayChannelConfig(20, spec, geom, weights)
        a = draw_ray_channel(cfg, seed=5)
        b = draw_ray_channel(cfg, seed=5)
        assert np.array_equal(a.h, b.h)
        assert a.model_tag == "ray"

    def test_single_path_bound(self):
        spec, geom, weights = small_setup()
        spec = AngularSpectrum(spec.elevation, spec.azimuth,
                               ElementPattern.isotropic())
        cfg = RayChannelConfig(1, spec, geom, weights)
        for seed in range(5):
            h = draw_ray_channel(cfg, seed).h
            rng = substream(seed)
            phi, theta = spec.sample(rng, 1)
            alpha = (rng.standard_normal(1)
                     + 1j * rng.standard_normal(1)) / math.sqrt(2.0)
            # Cauchy-Schwarz: |w^T v| <= ||w|| ||v|| = sqrt(n_elements)
            bound = abs(alpha[0]) * math.sqrt(geom.n_elements)
            assert np.all(np.abs(h) <= bound + 1e-12)

    def test_covariance_matches_port_correlation(self):
        """The sample covariance of ray draws reproduces the analytic port
        correlation (entry [s', s] pairs with E[h_s h_s'*])."""
        spec, geom, weights = small_setup()
        mat = build_element_correlation(spec, geom)
        rbs = port_correlation(mat, weights)
        cfg = RayChannelConfig(50, spec, geom, weights)
        n_draws = 20_000
        acc = np.zeros((4, 4), dtype=complex)
        for d in range(n_draws):
            h = draw_ray_channel(cfg, child_seed(1234, d)).h
            acc += np.outer(h, h.conj())
        cov = acc / n_draws
        err = np.max(np.abs(cov - rbs.T))
        assert err < 3.0 / math.sqrt(n_draws)

    def test_ray_vs_correlated_power(self):
        """Rich scattering: per-port power agrees across channel models."""
        spec, geom, weights = small_setup()
        mat = build_element_correlation(spec, geom)
        rbs = port_correlation(mat, weights)
        cfg = RayChannelConfig(200, spec, geom, weights)
        n_draws = 8000
        ray_pow = np.zeros(4)
        for d in range(n_draws):
            ray_pow += np.abs(draw_ray_channel(cfg, child_seed(77, d)).h) ** 2
        ray_pow /= n_draws
        corr_pow = np.mean(
            np.abs(draw_correlated_channels(rbs, n_draws, 78)) ** 2, axis=0)
        assert np.all(np.abs(ray_pow - corr_pow) / corr_pow < 0.05)


class TestCorrelatedChannel:
    def test_white_when_identity(self):
        n = 6
        draws = draw_correlated_channels(np.eye(n, dtype=complex), 100_000,
                                         seed=9)
        cov = draws.conj().T @ draws / draws.shape[0]
        assert np.max(np.abs(cov - np.eye(n))) < 3.0 / math.sqrt(1e5) * 1.5

    def test_rank_one_range(self):
        u = np.array([1.0, 1j, -1.0, 0.5]) / math.sqrt(3.25)
        r = np.outer(u, u.conj())
        for seed in range(4):
            h = draw_correlated_channel(r, seed).h
            # scalar multiple of u up to sqrt-amplified eigen-noise
            proj = np.vdot(u, h) * u
            assert np.max(np.abs(h - proj)) < 1e-7

    def test_sample_covariance_recovers_matrix(self, fig3_spec):
        geom = ArrayGeometry(4, 4, 0.5, 0.5)
        mat = build_element_correlation(fig3_spec, geom)
        rbs = port_correlation(
            mat, PortWeightMatrix.uniform_tilt(math.pi / 2.0, geom))
        draws = draw_correlated_channels(rbs, 100_000, seed=2)
        cov = draws.conj().T @ draws / draws.shape[0]
        # entries are means of bounded products; generous 3-sigma envelope
        assert np.max(np.abs(cov - rbs.T)) < 3.0 * np.max(np.abs(rbs)) \
            / math.sqrt(1e5) * 4.0

    def test_rejects_indefinite(self):
        bad = np.diag([1.0, -0.5]).astype(complex)
        with pytest.raises(ValueError):
            draw_correlated_channel(bad, 0)

    def test_realization_validates_finiteness(self):
        with pytest.raises(ValueError):
            ChannelRealization(np.array([np.nan + 0j]), "ray")


class TestTraceLemmaConcentration:
    def test_quadratic_form_concentrates(self):
        """(1/N) h^H h tightens around (1/N) tr(R) as the array grows."""
        def toeplitz_cov(n):
            k = np.arange(n)
            col = (0.6 ** k) * np.exp(1j * 0.4 * k)
            out = np.empty((n, n), dtype=complex)
            for i in range(n):
                for j in range(n):
                    out[i, j] = col[abs(i - j)] if i >= j \
                        else col[abs(i - j)].conjugate()
            return out

        stds = []
        for n in (20, 40, 80):
            r = toeplitz_cov(n)
            draws = draw_correlated_channels(r, 1000, seed=31 + n)
            q = np.sum(np.abs(draws) ** 2, axis=1) / n
            assert np.mean(q) == pytest.approx(np.trace(r).real / n, rel=0.05)
            stds.append(np.std(q))
        for a, b in zip(stds, stds[1:]):
            assert 0.6 <= b / a <= 0.85


class TestPsdSqrt:
    def test_square_recovers_matrix(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        r = a @ a.conj().T
        root = psd_sqrt(r)
        assert np.max(np.abs(root @ root - r)) < 1e-10 * np.max(np.abs(r))
