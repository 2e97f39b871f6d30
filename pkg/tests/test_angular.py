import math
from dataclasses import dataclass

import numpy as np
import pytest
from scipy.special import iv

from fdmimo.angular import (AngularSpectrum, ElementPattern,
                            LaplacianElevation, VonMisesAzimuth,
                            element_field_linear, element_gain_db,
                            element_gain_h, element_gain_v, fourier_coeffs)


@dataclass(frozen=True)
class _StubLaw:
    """Custom angle law for coefficient tests (pdf given analytically)."""
    mean_rad: float
    density: object

    def pdf(self, x):
        return self.density(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class _StubSpectrum:
    elevation: object
    azimuth: object
    pattern: object


def uniform_azimuth():
    return _StubLaw(0.0, lambda x: np.full_like(x, 1.0 / (2.0 * math.pi)))


def sine_elevation():
    return _StubLaw(math.pi / 2.0, lambda x: np.sin(x) / 2.0)


class TestElementPattern:
    def test_gain_db_boresight(self):
        p = ElementPattern.default_3gpp()
        assert element_gain_db(0.0, math.pi / 2.0, p) == 8.0

    def test_gain_db_at_beamwidth(self):
        p = ElementPattern.default_3gpp()
        assert element_gain_db(math.radians(65.0), math.pi / 2.0, p) \
            == pytest.approx(-4.0, abs=1e-12)

    def test_gain_db_clipped_behind(self):
        p = ElementPattern.default_3gpp()
        # horizontal attenuation 12*(180/65)^2 = 91.9 dB clips at a_m
        assert element_gain_db(math.pi, math.pi / 2.0, p) \
            == pytest.approx(-22.0, abs=1e-12)

    def test_field_linear(self):
        p = ElementPattern.default_3gpp()
        assert element_field_linear(0.0, math.pi / 2.0, p) == 1.0
        assert element_field_linear(math.radians(65.0), math.pi / 2.0, p) \
            == pytest.approx(10.0 ** -1.2, rel=1e-12)
        theta = math.pi / 2.0 + math.radians(65.0)
        assert element_field_linear(0.0, theta, p) \
            == pytest.approx(10.0 ** -1.2, rel=1e-12)

    def test_isotropic(self):
        p = ElementPattern.isotropic()
        assert element_field_linear(1.0, 2.0, p) == 1.0
        assert element_gain_db(1.0, 2.0, p) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ElementPattern(-1.0, 65.0, 30.0, 30.0, 8.0)
        with pytest.raises(ValueError):
            ElementPattern(65.0, 65.0, -2.0, 30.0, 8.0)


class TestDistributions:
    def test_laplacian_normalised(self):
        law = LaplacianElevation(math.radians(100.0), math.radians(15.0))
        theta = np.linspace(1e-9, math.pi - 1e-9, 200001)
        mass = np.trapezoid(law.pdf(theta), theta)
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_laplacian_sampling_matches_moments(self):
        law = LaplacianElevation(math.radians(100.0), math.radians(15.0))
        rng = np.random.default_rng(5)
        samples = law.sample(rng, 400_000)
        theta = np.linspace(1e-9, math.pi - 1e-9, 200001)
        pdf = law.pdf(theta)
        mean = np.trapezoid(theta * pdf, theta)
        var = np.trapezoid((theta - mean) ** 2 * pdf, theta)
        assert samples.mean() == pytest.approx(mean, abs=4 * math.sqrt(var / samples.size))
        assert samples.var() == pytest.approx(var, rel=0.02)

    def test_von_mises_normalised(self):
        law = VonMisesAzimuth(0.3, 10.0)
        phi = np.linspace(-math.pi, math.pi, 200001)
        assert np.trapezoid(law.pdf(phi), phi) == pytest.approx(1.0, abs=1e-8)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            LaplacianElevation(-0.1, 0.2)
        with pytest.raises(ValueError):
            VonMisesAzimuth(0.0, 0.0)


class TestFourierCoefficients:
    def test_uniform_azimuth_isotropic(self):
        spec = _StubSpectrum(sine_elevation(), uniform_azimuth(),
                             ElementPattern.isotropic())
        fc = fourier_coeffs(spec, 8)
        assert fc.a_phi[0] == pytest.approx(1.0 / math.pi, abs=1e-10)
        assert np.max(np.abs(fc.a_phi[1:])) < 1e-10
        assert np.max(np.abs(fc.b_phi)) < 1e-10

    def test_sine_elevation(self):
        spec = _StubSpectrum(sine_elevation(), uniform_azimuth(),
                             ElementPattern.isotropic())
        fc = fourier_coeffs(spec, 8)
        assert fc.b_theta[1] == pytest.approx(1.0 / math.pi, abs=1e-10)
        assert fc.b_theta[0] == 0.0

    def test_von_mises_bessel_identity(self):
        spec = _StubSpectrum(sine_elevation(), VonMisesAzimuth(0.0, 10.0),
                             ElementPattern.isotropic())
        fc = fourier_coeffs(spec, 10)
        for m in range(11):
            expected = iv(m, 10.0) / (math.pi * iv(0, 10.0))
            assert fc.a_phi[m] == pytest.approx(expected, abs=1e-10)
        assert np.max(np.abs(fc.b_phi)) < 1e-10

    def test_zero_lag_anchor_against_monte_carlo(self, fig3_spec):
        fc = fourier_coeffs(fig3_spec, 8)
        rng = np.random.default_rng(99)
        phi, theta = fig3_spec.sample(rng, 1_000_000)
        e_gh = element_gain_h(phi, fig3_spec.pattern).mean()
        e_gv = element_gain_v(theta, fig3_spec.pattern).mean()
        # agreement to three significant figures of values near 0.16
        assert math.pi * fc.a_phi[0] == pytest.approx(e_gh, abs=5e-4)
        assert math.pi * fc.b_theta[1] == pytest.approx(e_gv, abs=5e-4)

    def test_symmetric_azimuth_sine_terms_vanish(self, fig3_spec):
        spec = AngularSpectrum(fig3_spec.elevation, VonMisesAzimuth(0.0, 10.0),
                               fig3_spec.pattern)
        fc = fourier_coeffs(spec, 12)
        assert np.max(np.abs(fc.b_phi)) < 1e-10

    def test_harmonic_extension_is_stable(self, fig3_spec):
        fc1 = fourier_coeffs(fig3_spec, 21)
        fc2 = fourier_coeffs(fig3_spec, 61)
        n = 22
        assert np.max(np.abs(fc1.a_phi - fc2.a_phi[:n])) < 1e-9
        assert np.max(np.abs(fc1.b_phi - fc2.b_phi[:n])) < 1e-9
        assert np.max(np.abs(fc1.b_theta - fc2.b_theta[:n])) < 1e-9
        d1 = fc1.a_theta[:-2] - fc1.a_theta[2:]
        d2 = fc2.a_theta[: n - 2] - fc2.a_theta[2:n]
        assert np.max(np.abs(d1 - d2)) < 1e-9

    def test_rejects_bad_harmonic(self, fig3_spec):
        with pytest.raises(ValueError):
            fourier_coeffs(fig3_spec, 0)
