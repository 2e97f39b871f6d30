"""Channel generation: element array responses, ray-traced port channels
and correlated Rayleigh channels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angular import AngularSpectrum, element_field_linear
from .correlation import ArrayGeometry, PortWeightMatrix
from .rng import complex_normal, substream

__all__ = [
    "RayChannelConfig",
    "ChannelRealization",
    "array_response",
    "array_response_matrix",
    "draw_ray_channel",
    "draw_correlated_channel",
    "draw_correlated_channels",
    "psd_sqrt",
]


@dataclass(frozen=True)
class RayChannelConfig:
    """Path-sum channel model parameters."""

    n_paths: int
    spec: AngularSpectrum
    geom: ArrayGeometry
    weights: PortWeightMatrix

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the per-port channel vector."""

    h: np.ndarray
    model_tag: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.h)):
            raise ValueError("channel realization has non-finite entries")
        self.h.setflags(write=False)


def array_response(phi: float, theta: float, z: int, s: int,
                   geom: ArrayGeometry) -> complex:
    """Unit-modulus response of element z (1-based, vertical) in port s
    (1-based, horizontal), phase-referenced at element (1, 1)."""
    if not 1 <= z <= geom.n_elements:
        raise ValueError(f"element index {z} outside 1..{geom.n_elements}")
    if not 1 <= s <= geom.n_ports:
        raise ValueError(f"port index {s} outside 1..{geom.n_ports}")
    phase = 2.0 * math.pi * (
        (s - 1) * geom.port_spacing_wl * math.sin(phi) * math.sin(theta)
        + (z - 1) * geom.element_spacing_wl * math.cos(theta))
    return complex(math.cos(phase), math.sin(phase))


def array_response_matrix(phi, theta, geom: ArrayGeometry) -> np.ndarray:
    """Vectorised responses for all elements and ports.

    Returns shape (..., n_elements, n_ports) for broadcastable angle
    arrays phi/theta.
    """
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    z = np.arange(geom.n_elements)
    s = np.arange(geom.n_ports)
    vert = np.exp(2j * math.pi * geom.element_spacing_wl
                  * np.multiply.outer(np.cos(theta), z))
    horiz = np.exp(2j * math.pi * geom.port_spacing_wl
                   * np.multiply.outer(np.sin(phi) * np.sin(theta), s))
    return vert[..., :, None] * horiz[..., None, :]


def draw_ray_channel(cfg: RayChannelConfig, seed: int) -> ChannelRealization:
    """One realization of the path-sum port channel.

    Angles are drawn from the configured spectrum, path amplitudes are
    i.i.d. complex Gaussian with variance 1/n_paths, and each port sees
    the plain (un-conjugated) weighted sum of its element channels.
    """
    rng = substream(seed)
    phi, theta = cfg.spec.sample(rng, cfg.n_paths)
    alpha = complex_normal(rng, cfg.n_paths) / math.sqrt(cfg.n_paths)
    amp = alpha * np.sqrt(element_field_linear(phi, theta, cfg.spec.pattern))
    v = array_response_matrix(phi, theta, cfg.geom)   # (n, z, s)
    elem_sum = np.einsum("n,nzs->zs", amp, v)
    h = np.einsum("sz,zs->s", cfg.weights.vectors, elem_sum)
    return ChannelRealization(h, "ray")


def psd_sqrt(mat: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Hermitian PSD square root; eigenvalues within -tol*max of zero are
    clamped, anything lower raises."""
    eigs, vecs = np.linalg.eigh(mat)
    if eigs[0] < -tol * max(eigs[-1], 0.0):
        raise ValueError(
            f"matrix is not positive semi-definite within tolerance "
            f"(min eigenvalue {eigs[0]:.3e}, max {eigs[-1]:.3e})")
    return (vecs * np.sqrt(np.clip(eigs, 0.0, None))) @ vecs.conj().T


def draw_correlated_channels(r_bs: np.ndarray, n_draws: int,
                             seed: int) -> np.ndarray:
    """Stack of correlated Rayleigh channel draws, shape (n_draws, n)."""
    root = psd_sqrt(r_bs)
    rng = substream(seed)
    z = complex_normal(rng, n_draws, r_bs.shape[0])
    return z @ root.T


def draw_correlated_channel(r_bs: np.ndarray, seed: int) -> ChannelRealization:
    """One correlated Rayleigh draw h = R^(1/2) z with white complex z."""
    return ChannelRealization(draw_correlated_channels(r_bs, 1, seed)[0],
                              "correlated")
