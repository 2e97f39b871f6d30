"""Max-min-SIR downtilt optimisation over the unit-trace PSD cone:
generalized Dinkelbach outer loop, projected supergradient inner solver
and rank-one extraction by Gaussian randomization."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .beamforming import MultiUserScene
from .rng import complex_normal, substream

__all__ = [
    "InterferenceFreeError",
    "SolverConfig",
    "SdrVariable",
    "DinkelbachState",
    "RandomizationResult",
    "SdbSolution",
    "evaluate_fk",
    "evaluate_gk",
    "project_unit_trace_psd",
    "inner_maxmin",
    "dinkelbach",
    "gaussian_randomization",
    "principal_extraction",
    "min_sir_of_weight",
    "sdb_solve",
]


class InterferenceFreeError(RuntimeError):
    """All candidate denominators vanish: the max-min SIR is unbounded and
    the fractional iteration has nothing to optimise."""


@dataclass(frozen=True)
class SolverConfig:
    """Termination and effort knobs for the fractional solver."""

    epsilon: float = 1e-4
    inner_tol: float = 1e-6
    inner_max_iter: int = 5000
    plateau_iters: int = 200
    randomization_trials: int = 100
    max_outer_iter: int = 100


@dataclass(frozen=True)
class SdrVariable:
    """Feasible point of the relaxed problem: Hermitian PSD, unit trace."""

    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError("relaxation variable must be Hermitian")
        eigs = np.linalg.eigvalsh(m)
        if eigs[0] < -1e-9:
            raise ValueError(f"negative eigenvalue {eigs[0]:.3e}")
        if abs(np.trace(m).real - 1.0) > 1e-9:
            raise ValueError("trace must equal one")
        m.setflags(write=False)


@dataclass(frozen=True)
class DinkelbachState:
    """Terminal state of the outer fractional iteration."""

    lam: float
    F: float
    iteration: int
    W_star: SdrVariable
    history: tuple                 # (lam, F) per outer iteration
    inner_warning: bool = False
    inner_iterations: tuple = ()   # ascent iterations used per outer step


@dataclass(frozen=True)
class RandomizationResult:
    """Best feasible weight vector extracted from the relaxed solution."""

    weight_vector: np.ndarray
    achieved_min_sir: float
    best_trial: int
    trials: int


@dataclass(frozen=True)
class SdbSolution:
    state: DinkelbachState
    randomization: RandomizationResult
    sdr_bound: float


class _SdpData:
    """Per-scene arrays driving the solver.

    a[k]: sum over ports of the diagonal correlation blocks, so the
    numerator is the linear form Re tr(W a[k]).

    q[k]: the quadratic-form matrix acting on the column-stacked W, built
    from Kronecker products of cross blocks, so the squared denominator
    is vec(W)^H q[k] vec(W).
    """

    def __init__(self, scene: MultiUserScene):
        geom = scene.geometry
        nbs, ne = geom.n_ports, geom.n_elements
        kk = scene.n_users
        self.n_elements = ne
        self.a = np.array(scene.block_sums)

        # x holds the transposed cross blocks entering the left Kronecker
        # slot: tr(A^T B C D^T) = vec(A)^T (D x B) vec(C) puts the
        # interferer block in transposed
        x = np.empty((kk, nbs * nbs, ne * ne), dtype=complex)
        u = np.empty((kk, nbs * nbs, ne * ne), dtype=complex)
        for k, user in enumerate(scene.users):
            r4 = user.entries.reshape(nbs, ne, nbs, ne)
            x[k] = np.einsum("ajbi->baij", r4).reshape(nbs * nbs, ne * ne)
            u[k] = np.einsum("aibj->abij", r4).reshape(nbs * nbs, ne * ne)
        x_total = x.sum(axis=0)
        self.q = np.empty((kk, ne * ne, ne * ne), dtype=complex)
        for k in range(kk):
            g = (x_total - x[k]).T @ u[k]
            g4 = g.reshape(ne, ne, ne, ne)
            self.q[k] = g4.transpose(0, 2, 1, 3).reshape(ne * ne, ne * ne)

    def f_all(self, w_mat: np.ndarray) -> np.ndarray:
        return np.einsum("kij,ji->k", self.a, w_mat).real

    def g_all(self, w_mat: np.ndarray):
        """All user denominators plus the per-user Q vec(W) products
        (reused for the supergradient)."""
        vec = w_mat.flatten(order="F")
        qv = self.q @ vec
        rad = (vec.conj() @ qv.T).real
        if np.min(rad) < -1e-12:
            raise ValueError(
                f"denominator radicand {np.min(rad):.3e} below tolerance; "
                "correlation inputs are not Hermitian PSD")
        return np.sqrt(np.clip(rad, 0.0, None)), qv

    def g_grad(self, qv_k: np.ndarray, g_k: float) -> np.ndarray:
        ne = self.n_elements
        raw = qv_k.reshape(ne, ne, order="F")
        return (raw + raw.conj().T) / (2.0 * g_k)


@functools.lru_cache(maxsize=32)
def _sdp_data(scene: MultiUserScene) -> _SdpData:
    return _SdpData(scene)


def evaluate_fk(w, k: int, scene: MultiUserScene) -> float:
    """Numerator of user k's deterministic SIR ratio at the relaxation
    variable: the sum over ports of tr(W R_k,ss)."""
    w_mat = w.matrix if isinstance(w, SdrVariable) else np.asarray(w)
    data = _sdp_data(scene)
    if w_mat.shape != data.a[k].shape:
        raise ValueError("variable dimension does not match the scene")
    return float(data.f_all(w_mat)[k])


def evaluate_gk(w, k: int, scene: MultiUserScene) -> float:
    """Denominator of user k's ratio: the square root of the interference
    quadratic form, clamped at zero within tolerance."""
    w_mat = w.matrix if isinstance(w, SdrVariable) else np.asarray(w)
    data = _sdp_data(scene)
    if w_mat.shape != data.a[k].shape:
        raise ValueError("variable dimension does not match the scene")
    g, _ = data.g_all(w_mat)
    return float(g[k])


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_unit_trace_psd(mat: np.ndarray) -> np.ndarray:
    """Frobenius-nearest Hermitian PSD matrix with unit trace."""
    herm = (mat + mat.conj().T) / 2.0
    eigs, vecs = np.linalg.eigh(herm)
    lam = _project_simplex(eigs)
    return (vecs * lam) @ vecs.conj().T


def _inner_maxmin(lam: float, data: _SdpData, cfg: SolverConfig,
                  warm_starts=()):
    """Maximise min_k (f_k - lam g_k) over the unit-trace PSD cone by
    projected supergradient ascent with step c/sqrt(t)."""
    ne = data.n_elements

    def objective(w_mat):
        f = data.f_all(w_mat)
        g, qv = data.g_all(w_mat)
        vals = f - lam * g
        k_star = int(np.argmin(vals))
        return vals[k_star], k_star, g, qv

    w = np.eye(ne, dtype=complex) / ne
    best_obj, _, _, _ = objective(w)
    best_w = w
    for cand in warm_starts:
        val, _, _, _ = objective(cand)
        if val > best_obj:
            best_obj, best_w = val, cand

    c = 1.0 / max(np.linalg.norm(data.a[k]) for k in range(len(data.a)))
    stall = 0
    clean_stop = False
    t = 0
    for t in range(1, cfg.inner_max_iter + 1):
        _, k_star, g, qv = objective(w)
        grad = data.a[k_star].copy()
        if g[k_star] > 1e-8:
            grad -= lam * data.g_grad(qv[k_star], g[k_star])
        w = project_unit_trace_psd(w + (c / math.sqrt(t)) * grad)
        val, _, _, _ = objective(w)
        if val > best_obj + cfg.inner_tol:
            best_obj, best_w = val, w
            stall = 0
        else:
            if val > best_obj:
                best_obj, best_w = val, w
            stall += 1
            if stall >= cfg.plateau_iters:
                clean_stop = True
                break
    return best_w, best_obj, not clean_stop, t


def inner_maxmin(lam: float, scene: MultiUserScene,
                 cfg: SolverConfig = SolverConfig()):
    """Solve the parametric inner problem; returns (SdrVariable, warning)."""
    if lam < 0:
        raise ValueError("the fractional parameter must be non-negative")
    w, _, warning, _ = _inner_maxmin(lam, _sdp_data(scene), cfg)
    return SdrVariable(w), warning


def dinkelbach(scene: MultiUserScene, eps: float | None = None,
               cfg: SolverConfig = SolverConfig(),
               warm_starts=()) -> DinkelbachState:
    """Generalized Dinkelbach iteration on the relaxed max-min SIR problem.

    The parameter lam starts at zero, each step maximises
    min_k (f_k - lam g_k) and lam is updated to the worst ratio at the
    maximiser; iteration stops once the parametric optimum drops below
    eps.  The previous maximiser is kept as a warm-start candidate, which
    guarantees the non-decreasing lam sequence even with an approximate
    inner solver; extra feasible candidates can be injected the same way.
    """
    if scene.n_users < 2:
        raise ValueError("max-min SIR needs at least two users")
    if eps is None:
        eps = cfg.epsilon
    data = _sdp_data(scene)
    lam = 0.0
    w_prev = None
    history = []
    inner_iters = []
    warned = False
    extra = tuple(warm_starts)
    for it in range(1, cfg.max_outer_iter + 1):
        warm = extra if w_prev is None else (w_prev,) + extra
        w_star, f_val, warning, used = _inner_maxmin(lam, data, cfg, warm)
        warned = warned or warning
        f = data.f_all(w_star)
        g, _ = data.g_all(w_star)
        history.append((lam, f_val))
        inner_iters.append(used)
        if np.all(g <= 1e-12):
            raise InterferenceFreeError(
                "every user's interference denominator vanishes at the "
                "solution; the min-SIR objective is unbounded")
        ratios = np.where(g > 1e-12, f / np.where(g > 1e-12, g, 1.0), np.inf)
        lam = float(np.min(ratios))
        w_prev = w_star
        if f_val < eps:
            return DinkelbachState(lam, float(f_val), it, SdrVariable(w_star),
                                   tuple(history), warned, tuple(inner_iters))
    raise RuntimeError(
        f"fractional iteration did not terminate in {cfg.max_outer_iter} "
        f"steps (last F={f_val:.3e}, eps={eps:.1e})")


def min_sir_of_weight(w_vec: np.ndarray, scene: MultiUserScene) -> float:
    """Deterministic min-SIR when every port transmits with w_vec."""
    data = _sdp_data(scene)
    w_mat = np.outer(w_vec, w_vec.conj())
    f = data.f_all(w_mat)
    g, _ = data.g_all(w_mat)
    ratios = np.where(g > 0.0, (f / np.where(g > 0, g, 1.0)) ** 2, np.inf)
    return float(np.min(ratios))


def sdr_bound(w_star, scene: MultiUserScene) -> float:
    """Relaxed objective value: the upper bound on any rank-one min-SIR."""
    data = _sdp_data(scene)
    w_mat = w_star.matrix if isinstance(w_star, SdrVariable) else w_star
    f = data.f_all(w_mat)
    g, _ = data.g_all(w_mat)
    ratios = np.where(g > 0.0, (f / np.where(g > 0, g, 1.0)) ** 2, np.inf)
    return float(np.min(ratios))


def _complex_sign(z: np.ndarray) -> np.ndarray:
    mag = np.abs(z)
    out = np.ones_like(z)
    nz = mag > 0.0
    out[nz] = z[nz] / mag[nz]
    return out


def gaussian_randomization(w_star, scene: MultiUserScene, trials: int,
                           seed: int) -> RandomizationResult:
    """Draw CN(0, W*) candidates, clamp them to constant-modulus unit-norm
    vectors and keep the best deterministic min-SIR.

    Candidate l uses the substream (seed, l), so a longer run scores a
    superset of the candidates of a shorter run on the same seed.
    """
    if trials < 1:
        raise ValueError("at least one randomization trial is required")
    w_mat = w_star.matrix if isinstance(w_star, SdrVariable) else w_star
    ne = w_mat.shape[0]
    eigs, vecs = np.linalg.eigh((w_mat + w_mat.conj().T) / 2.0)
    root = (vecs * np.sqrt(np.clip(eigs, 0.0, None))) @ vecs.conj().T
    best = (-math.inf, 0, None)
    for el in range(trials):
        zeta = root @ complex_normal(substream(seed, el), ne)
        cand = _complex_sign(zeta) / math.sqrt(ne)
        sir = min_sir_of_weight(cand, scene)
        if sir > best[0]:
            best = (sir, el, cand)
    return RandomizationResult(best[2], best[0], best[1], trials)


def principal_extraction(w_star) -> np.ndarray:
    """Secondary extraction mode: unit-norm principal eigenvector of the
    relaxed solution."""
    w_mat = w_star.matrix if isinstance(w_star, SdrVariable) else w_star
    eigs, vecs = np.linalg.eigh(w_mat)
    v = vecs[:, -1]
    idx = np.nonzero(np.abs(v) > 1e-12)[0][0]
    return v * (np.abs(v[idx]) / v[idx])


def sdb_solve(scene: MultiUserScene, cfg: SolverConfig = SolverConfig(),
              seed: int = 0) -> SdbSolution:
    """Full single-downtilt pipeline: fractional solve plus extraction.

    A randomized candidate that beats the relaxed objective exposes an
    under-converged inner solve, so the winning rank-one point is folded
    back in as a warm start and the solve repeated until the relaxation
    dominates its own extraction.
    """
    warm = ()
    for _ in range(4):
        state = dinkelbach(scene, cfg=cfg, warm_starts=warm)
        rand = gaussian_randomization(state.W_star, scene,
                                      cfg.randomization_trials, seed)
        bound = sdr_bound(state.W_star, scene)
        if rand.achieved_min_sir <= bound:
            break
        warm = (np.outer(rand.weight_vector, rand.weight_vector.conj()),)
    return SdbSolution(state, rand, bound)
