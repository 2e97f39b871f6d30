import math

import numpy as np
import pytest

from fdmimo.angular import (AngularSpectrum, ElementPattern,
                            LaplacianElevation, VonMisesAzimuth)
from fdmimo.correlation import ArrayGeometry, ElementCorrelationMatrix


@pytest.fixture(scope="session")
def fig3_spec():
    """Correlation-validation spectrum used throughout the suite."""
    return AngularSpectrum(
        LaplacianElevation(math.radians(100.0), math.radians(15.0)),
        VonMisesAzimuth(math.pi / 3.0, 10.0),
        ElementPattern.default_3gpp())


@pytest.fixture(scope="session")
def fig3_geom():
    return ArrayGeometry(n_elements=10, n_ports=8, port_spacing_wl=0.5,
                         element_spacing_wl=0.5)


def random_spectrum(rng) -> AngularSpectrum:
    return AngularSpectrum(
        LaplacianElevation(rng.uniform(math.radians(92), math.radians(120)),
                           math.radians(rng.uniform(5.0, 20.0))),
        VonMisesAzimuth(rng.uniform(-math.pi / 2, math.pi / 2),
                        rng.uniform(3.0, 20.0)),
        ElementPattern.default_3gpp())


def synthetic_correlation(geom: ArrayGeometry, rng,
                          extra_rank: int = 4) -> ElementCorrelationMatrix:
    """Random Hermitian PSD stand-in for an element correlation matrix."""
    m = geom.n_total
    a = (rng.standard_normal((m, m + extra_rank))
         + 1j * rng.standard_normal((m, m + extra_rank))) / np.sqrt(2.0)
    return ElementCorrelationMatrix(geom, a @ a.conj().T / (m + extra_rank))
