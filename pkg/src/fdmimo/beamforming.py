"""Beamforming performance expressions: single-user SNR with its
eigenbeamformer, MRT precoding, instantaneous SINR and the large-system
deterministic equivalents."""

from __future__ import annotations

import functools
import math

import numpy as np

from .channel import ChannelRealization
from .correlation import ElementCorrelationMatrix, PortWeightMatrix

__all__ = [
    "LinkBudget",
    "MultiUserScene",
    "snr_instantaneous",
    "optimal_single_user_weights",
    "snr_deterministic",
    "mrt_precoder",
    "sinr_instantaneous",
    "sinr_deterministic",
    "sir_deterministic",
]


class LinkBudget:
    """Link-level scaling: transmit power, large-scale gains and noise."""

    __slots__ = ("tx_power_w", "path_loss_linear", "shadow_linear",
                 "max_gain_dbi", "noise_var_w")

    def __init__(self, tx_power_w: float, path_loss_linear: float,
                 shadow_linear: float, max_gain_dbi: float,
                 noise_var_w: float):
        if min(tx_power_w, path_loss_linear, shadow_linear, noise_var_w) <= 0:
            raise ValueError("link budget terms must be positive")
        if path_loss_linear > 1.0:
            raise ValueError("path loss must be a linear attenuation <= 1")
        self.tx_power_w = tx_power_w
        self.path_loss_linear = path_loss_linear
        self.shadow_linear = shadow_linear
        self.max_gain_dbi = max_gain_dbi
        self.noise_var_w = noise_var_w

    @property
    def rho(self) -> float:
        """Received power scale: P_tx * PL * SF * peak element gain."""
        return (self.tx_power_w * self.path_loss_linear * self.shadow_linear
                * 10.0 ** (self.max_gain_dbi / 10.0))

    @property
    def snr_scale(self) -> float:
        return self.rho / self.noise_var_w


class MultiUserScene:
    """Immutable bundle of per-user element correlation matrices, the
    shared port weights and per-user link budgets."""

    def __init__(self, user_correlations, weights: PortWeightMatrix, budgets):
        self.users = tuple(user_correlations)
        self.weights = weights
        self.budgets = tuple(budgets)
        if not self.users:
            raise ValueError("scene needs at least one user")
        if len(self.budgets) != len(self.users):
            raise ValueError("one link budget per user required")
        geom = self.users[0].geometry
        for u in self.users:
            if u.geometry != geom:
                raise ValueError("all users must share the array geometry")
        if (weights.n_ports, weights.n_elements) != (geom.n_ports,
                                                     geom.n_elements):
            raise ValueError("weights do not match the array geometry")
        self.geometry = geom

    @property
    def n_users(self) -> int:
        return len(self.users)

    def with_weights(self, weights: PortWeightMatrix) -> "MultiUserScene":
        return MultiUserScene(self.users, weights, self.budgets)

    @functools.cached_property
    def port_matrices(self) -> np.ndarray:
        """Per-user port correlation matrices under the scene weights,
        computed blockwise, shape (K, n_ports, n_ports)."""
        geom = self.geometry
        nbs, ne = geom.n_ports, geom.n_elements
        w = self.weights.vectors
        out = np.empty((self.n_users, nbs, nbs), dtype=complex)
        for k, u in enumerate(self.users):
            r4 = u.entries.reshape(nbs, ne, nbs, ne)
            out[k] = np.einsum("ai,aibj,bj->ab", w.conj(), r4, w,
                               optimize=True)
        out.setflags(write=False)
        return out

    @functools.cached_property
    def block_sums(self) -> np.ndarray:
        """Per-user sum of diagonal port blocks, shape (K, n_e, n_e).

        This is the matrix behind both tr(R_BSk) and the numerators of
        the deterministic SINR: tr(R_BSk) = sum_s w_s^H R_k,ss w_s.
        """
        ne = self.geometry.n_elements
        nbs = self.geometry.n_ports
        out = np.empty((self.n_users, ne, ne), dtype=complex)
        for k, u in enumerate(self.users):
            r4 = u.entries.reshape(nbs, ne, nbs, ne)
            out[k] = np.einsum("sisj->ij", r4)
        out.setflags(write=False)
        return out


def snr_instantaneous(h: ChannelRealization | np.ndarray,
                      lb: LinkBudget) -> float:
    """Received SNR of one channel draw."""
    vec = h.h if isinstance(h, ChannelRealization) else np.asarray(h)
    return lb.snr_scale * float(np.vdot(vec, vec).real)


def _principal_eigenvector(mat: np.ndarray) -> np.ndarray:
    """Unit-norm top eigenvector with a reproducible sign/phase fix:
    among eigenvalues tied at the top (1e-12 relative), the first is
    taken, and the first non-negligible entry is made real positive."""
    eigs, vecs = np.linalg.eigh(mat)
    top = eigs[-1]
    tied = np.nonzero(eigs >= top - 1e-12 * max(abs(top), 1.0))[0]
    v = vecs[:, tied[0]]
    idx = np.nonzero(np.abs(v) > 1e-12)[0][0]
    v = v * (np.abs(v[idx]) / v[idx])
    return v / np.linalg.norm(v)


def optimal_single_user_weights(re: ElementCorrelationMatrix,
                                ) -> PortWeightMatrix:
    """Per-port SNR-maximising weights: the principal eigenvector of each
    port's own element correlation block."""
    vecs = [_principal_eigenvector(re.diagonal_block(s))
            for s in range(re.geometry.n_ports)]
    return PortWeightMatrix(np.array(vecs))


def snr_deterministic(re: ElementCorrelationMatrix, w: PortWeightMatrix,
                      lb: LinkBudget) -> float:
    """Large-system SNR approximation (rho/sigma^2) sum_s w_s^H R_ss w_s."""
    total = sum(
        np.vdot(w.port(s), re.diagonal_block(s) @ w.port(s)).real
        for s in range(re.geometry.n_ports))
    return lb.snr_scale * float(total)


def mrt_precoder(h_matrix: np.ndarray) -> np.ndarray:
    """Conjugate-channel precoder scaled to unit total transmit power."""
    h_matrix = np.asarray(h_matrix)
    norm = np.linalg.norm(h_matrix)
    if norm == 0.0:
        raise ValueError("cannot precode an all-zero channel matrix")
    return h_matrix / norm


def sinr_instantaneous(k: int, h_matrix: np.ndarray, g_matrix: np.ndarray,
                       scene: MultiUserScene) -> float:
    """Instantaneous SINR of user k under precoding G (columns per user)."""
    if not 0 <= k < scene.n_users:
        raise IndexError(f"user index {k} outside 0..{scene.n_users - 1}")
    lb = scene.budgets[k]
    cross = h_matrix[:, k].conj() @ g_matrix          # (K,)
    power = np.abs(cross) ** 2
    interference = power.sum() - power[k]
    return float(power[k] / (interference + lb.noise_var_w / lb.rho))


def _deterministic_ratio(k: int, scene: MultiUserScene,
                         with_noise: bool) -> float:
    rbs = scene.port_matrices
    traces = np.einsum("kaa->k", rbs).real
    interference = sum(
        np.einsum("ab,ba->", rbs[k], rbs[el]).real
        for el in range(scene.n_users) if el != k)
    denom = interference
    if with_noise:
        lb = scene.budgets[k]
        denom = denom + traces.sum() * lb.noise_var_w / lb.rho
    if denom == 0.0:
        return math.inf
    return float(traces[k] ** 2 / denom)


def sinr_deterministic(k: int, scene: MultiUserScene) -> float:
    """Large-system SINR of user k under MRT.

    The noise contribution enters through the MRT power normalisation,
    i.e. as (sigma_k^2 / rho_k) * sum_l tr(R_BSl)."""
    return _deterministic_ratio(k, scene, with_noise=True)


def sir_deterministic(k: int, scene: MultiUserScene) -> float:
    """Large-system SIR of user k; +inf when no interferer exists."""
    return _deterministic_ratio(k, scene, with_noise=False)
