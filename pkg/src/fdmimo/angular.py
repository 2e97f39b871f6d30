"""Antenna element patterns, angle-of-departure distributions and the
Fourier-series coefficients of the power spectra."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import i0e, roots_legendre

from .specfun import QuadratureConvergenceError

__all__ = [
    "ElementPattern",
    "LaplacianElevation",
    "VonMisesAzimuth",
    "AngularSpectrum",
    "FourierCoefficients",
    "element_gain_db",
    "element_gain_h",
    "element_gain_v",
    "element_field_linear",
    "fourier_coeffs",
]

_LN10 = math.log(10.0)


@dataclass(frozen=True)
class ElementPattern:
    """3GPP-style element pattern parameters (beamwidths in degrees)."""

    phi_3db_deg: float
    theta_3db_deg: float
    a_m_db: float       # maximum attenuation
    sla_v_db: float     # vertical side-lobe attenuation
    g_e_max_dbi: float  # peak directional gain

    def __post_init__(self):
        if not (self.phi_3db_deg > 0 and self.theta_3db_deg > 0):
            raise ValueError("beamwidths must be positive")
        if self.a_m_db < 0 or self.sla_v_db < 0:
            raise ValueError("attenuation limits must be non-negative")

    @classmethod
    def default_3gpp(cls) -> "ElementPattern":
        return cls(65.0, 65.0, 30.0, 30.0, 8.0)

    @classmethod
    def isotropic(cls) -> "ElementPattern":
        return cls(math.inf, math.inf, 0.0, 0.0, 0.0)


def element_gain_db(phi, theta, pattern: ElementPattern):
    """Composite element pattern in dB, with side-lobe clipping.

    phi in [-pi, pi] and theta in [0, pi] are radians; the result includes
    the peak gain, so the boresight value is g_e_max_dbi.
    """
    phi_deg = np.degrees(phi)
    theta_deg = np.degrees(theta)
    a_h = -np.minimum(12.0 * (phi_deg / pattern.phi_3db_deg) ** 2,
                      pattern.a_m_db)
    a_v = -np.minimum(12.0 * ((theta_deg - 90.0) / pattern.theta_3db_deg) ** 2,
                      pattern.sla_v_db)
    return pattern.g_e_max_dbi - np.minimum(-(a_h + a_v), pattern.a_m_db)


def element_gain_h(phi, pattern: ElementPattern):
    """Horizontal cut of the separable linear power pattern (no clipping)."""
    phi_deg = np.degrees(phi)
    return np.exp(-1.2 * _LN10 * (phi_deg / pattern.phi_3db_deg) ** 2)


def element_gain_v(theta, pattern: ElementPattern):
    """Vertical cut of the separable linear power pattern (no clipping)."""
    theta_deg = np.degrees(theta)
    return np.exp(-1.2 * _LN10
                  * ((theta_deg - 90.0) / pattern.theta_3db_deg) ** 2)


def element_field_linear(phi, theta, pattern: ElementPattern):
    """Separable linear element power gain g_EH(phi) * g_EV(theta).

    This is the analytical-track pattern: relative to the peak, without
    the a_m / sla_v clipping of the dB pattern.
    """
    return element_gain_h(phi, pattern) * element_gain_v(theta, pattern)


@dataclass(frozen=True)
class LaplacianElevation:
    """Laplacian elevation AoD density truncated to (0, pi).

    The density is proportional to exp(-sqrt(2) |theta - mean| / spread),
    renormalised after truncation, so `spread_rad` keeps the role of the
    standard deviation of the untruncated law.
    """

    mean_rad: float
    spread_rad: float

    def __post_init__(self):
        if not 0.0 < self.mean_rad < math.pi:
            raise ValueError("mean elevation must lie in (0, pi)")
        if self.spread_rad <= 0:
            raise ValueError("spread must be positive")

    def _scale(self) -> float:
        return math.sqrt(2.0) / self.spread_rad

    def _norm(self) -> float:
        b = self._scale()
        mass = (2.0 - math.exp(-b * self.mean_rad)
                - math.exp(-b * (math.pi - self.mean_rad))) / b
        return 1.0 / mass

    def pdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = self._norm() * np.exp(-self._scale()
                                    * np.abs(theta - self.mean_rad))
        return np.where((theta > 0.0) & (theta < math.pi), out, 0.0)

    def ppf(self, u):
        """Inverse CDF on (0, 1), used for inverse-transform sampling."""
        u = np.asarray(u, dtype=float)
        b = self._scale()
        c = self._norm()
        lo = math.exp(-b * self.mean_rad)
        f_mean = c / b * (1.0 - lo)  # CDF at the mean
        below = u <= f_mean
        arg_lo = np.maximum(lo + b * u / c, 1e-300)
        arg_hi = np.maximum(1.0 - b * (u - f_mean) / c, 1e-300)
        theta = np.where(below,
                         self.mean_rad + np.log(arg_lo) / b,
                         self.mean_rad - np.log(arg_hi) / b)
        return np.clip(theta, 1e-12, math.pi - 1e-12)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.ppf(rng.uniform(size=size))


@dataclass(frozen=True)
class VonMisesAzimuth:
    """Von Mises azimuth AoD density on (-pi, pi]."""

    mean_rad: float
    concentration: float

    def __post_init__(self):
        if not -math.pi < self.mean_rad <= math.pi:
            raise ValueError("mean azimuth must lie in (-pi, pi]")
        if self.concentration <= 0:
            raise ValueError("concentration must be positive")

    def pdf(self, phi):
        phi = np.asarray(phi, dtype=float)
        kappa = self.concentration
        # exponentially scaled Bessel keeps this stable for large kappa
        return (np.exp(kappa * (np.cos(phi - self.mean_rad) - 1.0))
                / (2.0 * math.pi * i0e(kappa)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.vonmises(self.mean_rad, self.concentration, size=size)


@dataclass(frozen=True)
class AngularSpectrum:
    """Per-user angular description: elevation and azimuth AoD laws plus
    the element pattern weighting the power spectra."""

    elevation: LaplacianElevation
    azimuth: VonMisesAzimuth
    pattern: ElementPattern

    def sample(self, rng: np.random.Generator, size: int):
        """Draw i.i.d. (phi, theta) AoD pairs."""
        return (self.azimuth.sample(rng, size),
                self.elevation.sample(rng, size))


@dataclass(frozen=True)
class FourierCoefficients:
    """Harmonic coefficients of the power azimuth/elevation spectra.

    Arrays are indexed directly by the harmonic number, so e.g.
    ``a_theta[k]`` integrates PES(theta) * cos(k theta) / pi over (0, pi).
    ``b_phi[0]`` and ``b_theta[0]`` are zero by construction.

    The elevation spectrum carries a 1/sin(theta) factor that is only
    log-integrable on its own; all quantities consumed downstream are
    same-parity differences of the ``a_theta`` values (plus the
    ``b_theta`` values), which are genuine integrals.  Every harmonic is
    therefore evaluated on one shared quadrature rule so those
    combinations cancel the endpoint contributions exactly.
    """

    max_harmonic: int
    a_phi: np.ndarray
    b_phi: np.ndarray
    a_theta: np.ndarray
    b_theta: np.ndarray

    def __post_init__(self):
        for arr in (self.a_phi, self.b_phi, self.a_theta, self.b_theta):
            arr.setflags(write=False)


def _panel_rule(edges: np.ndarray, order: int):
    """Composite Gauss-Legendre nodes/weights over consecutive panels."""
    nodes, weights = roots_legendre(order)
    lo = edges[:-1, None]
    hi = edges[1:, None]
    x = (0.5 * (hi - lo) * (nodes + 1.0) + lo).ravel()
    w = (0.5 * (hi - lo) * np.broadcast_to(weights, (len(edges) - 1, order))).ravel()
    return x, w


def _azimuth_pass(spec, k_max: int, panels: int):
    edges = np.linspace(-math.pi, math.pi, panels + 1)
    # put a breakpoint at the spectrum peak
    edges = np.unique(np.concatenate([edges, [spec.azimuth.mean_rad]]))
    x, w = _panel_rule(edges, 16)
    pas = element_gain_h(x, spec.pattern) * spec.azimuth.pdf(x) * w
    m = np.arange(k_max + 1)
    a = (np.cos(np.outer(m, x)) @ pas) / math.pi
    b = (np.sin(np.outer(m, x)) @ pas) / math.pi
    return a, b


def _elevation_pass(spec, k_max: int, panels: int):
    mean = spec.elevation.mean_rad
    edges = np.unique(np.concatenate([
        np.linspace(0.0, mean, panels + 1),
        np.linspace(mean, math.pi, panels + 1)]))
    x, w = _panel_rule(edges, 16)
    pes = (element_gain_v(x, spec.pattern) * spec.elevation.pdf(x)
           / np.sin(x)) * w
    k = np.arange(k_max + 1)
    a = (np.cos(np.outer(k, x)) @ pes) / math.pi
    b = (np.sin(np.outer(k, x)) @ pes) / math.pi
    return a, b


@functools.lru_cache(maxsize=64)
def fourier_coeffs(spec: AngularSpectrum, max_harmonic: int) -> FourierCoefficients:
    """Compute spectrum Fourier coefficients up to ``max_harmonic``.

    Panel counts are doubled until the convergent functionals (azimuth
    coefficients, elevation sine coefficients and same-parity differences
    of elevation cosine coefficients) agree to 1e-10 between passes.
    """
    if max_harmonic < 1:
        raise ValueError("max_harmonic must be >= 1")

    panels = max(8, (max_harmonic + 3) // 4)
    a_phi, b_phi = _azimuth_pass(spec, max_harmonic, panels)
    a_th, b_th = _elevation_pass(spec, max_harmonic, panels)
    for _ in range(10):
        panels *= 2
        a_phi2, b_phi2 = _azimuth_pass(spec, max_harmonic, panels)
        a_th2, b_th2 = _elevation_pass(spec, max_harmonic, panels)
        diff = max(
            np.max(np.abs(a_phi2 - a_phi)),
            np.max(np.abs(b_phi2 - b_phi)),
            np.max(np.abs(b_th2 - b_th)),
            np.max(np.abs((a_th2[:-2] - a_th2[2:]) - (a_th[:-2] - a_th[2:]))),
        )
        a_phi, b_phi, a_th, b_th = a_phi2, b_phi2, a_th2, b_th2
        if diff <= 1e-10:
            b_phi = b_phi.copy()
            b_th = b_th.copy()
            b_phi[0] = 0.0
            b_th[0] = 0.0
            return FourierCoefficients(max_harmonic, a_phi, b_phi, a_th, b_th)
    raise QuadratureConvergenceError(
        f"power-spectrum projection failed to stabilise at harmonic "
        f"{max_harmonic} with {panels} panels (sup-difference {diff:.3e})")
