"""Legendre, associated Legendre and spherical Bessel functions, plus the
trigonometric-expansion coefficient tables used by the spatial correlation
series."""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

__all__ = [
    "QuadratureConvergenceError",
    "TrigExpansionTable",
    "legendre",
    "legendre_all",
    "assoc_legendre_norm",
    "assoc_legendre_norm_triangle",
    "spherical_bessel",
    "spherical_bessel_all",
    "build_trig_expansion",
    "dump_trig_expansion_csv",
]

_DOMAIN_SLACK = 1e-12


class QuadratureConvergenceError(RuntimeError):
    """Raised when a projection quadrature fails to stabilise."""


def _check_domain(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + _DOMAIN_SLACK):
        raise ValueError(f"argument outside [-1, 1]: {x!r}")
    return np.clip(x, -1.0, 1.0)


def legendre(n: int, x) -> float | np.ndarray:
    """Evaluate the Legendre polynomial P_n(x) by the Bonnet recurrence."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    x = _check_domain(x)
    if n == 0:
        return np.ones_like(x) if x.ndim else 1.0
    p_prev = np.ones_like(x)
    p_cur = x.copy()
    for k in range(2, n + 1):
        p_prev, p_cur = p_cur, ((2 * k - 1) * x * p_cur - (k - 1) * p_prev) / k
    return p_cur if x.ndim else float(p_cur)


def legendre_all(n_max: int, x) -> np.ndarray:
    """Return [P_0(x), ..., P_{n_max}(x)]; a vector of points adds a
    trailing axis."""
    x_arr = np.atleast_1d(_check_domain(x))
    out = np.empty((n_max + 1, x_arr.size))
    out[0] = 1.0
    if n_max >= 1:
        out[1] = x_arr
    for k in range(2, n_max + 1):
        out[k] = ((2 * k - 1) * x_arr * out[k - 1] - (k - 1) * out[k - 2]) / k
    return out if np.ndim(x) else out[:, 0]


def assoc_legendre_norm(n: int, m: int, x) -> float | np.ndarray:
    """Evaluate the L2-normalised associated Legendre function.

    The normalisation makes each function of unit L2([-1, 1]) norm, i.e.
    the plain P_n^m is scaled by sqrt((n + 1/2) (n-m)! / (n+m)!).  The
    Condon-Shortley phase is included.  The recurrence keeps the scale
    inside so no factorials are formed.
    """
    if not 0 <= m <= n:
        raise ValueError(f"order must satisfy 0 <= m <= n, got n={n}, m={m}")
    x = _check_domain(x)
    y = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    # diagonal term P̄_m^m
    cur = np.full_like(x, 1.0 / np.sqrt(2.0))
    for j in range(1, m + 1):
        cur = -np.sqrt(1.0 + 0.5 / j) * y * cur
    if n == m:
        return cur if x.ndim else float(cur)
    prev = np.zeros_like(x)
    for k in range(m + 1, n + 1):
        a = np.sqrt((4.0 * k * k - 1.0) / (k * k - m * m))
        b = np.sqrt(((k - 1.0) ** 2 - m * m) / (4.0 * (k - 1.0) ** 2 - 1.0))
        prev, cur = cur, a * (x * cur - b * prev)
    return cur if x.ndim else float(cur)


def assoc_legendre_norm_triangle(n_max: int, x) -> np.ndarray:
    """Full table of normalised associated Legendre values.

    For scalar ``x`` returns an array ``t`` of shape (n_max+1, n_max+1)
    with ``t[n, m] = P̄_n^m(x)`` for m <= n and zeros elsewhere; for a
    vector of points an extra trailing axis runs over the points.
    """
    x_arr = np.atleast_1d(_check_domain(x))
    y = np.sqrt(np.maximum(0.0, 1.0 - x_arr * x_arr))
    t = np.zeros((n_max + 1, n_max + 1, x_arr.size))
    diag = np.full(x_arr.size, 1.0 / np.sqrt(2.0))
    for m in range(n_max + 1):
        if m > 0:
            diag = -np.sqrt(1.0 + 0.5 / m) * y * diag
        t[m, m] = diag
        prev, cur = np.zeros_like(diag), diag
        for n in range(m + 1, n_max + 1):
            a = np.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = np.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            prev, cur = cur, a * (x_arr * cur - b * prev)
            t[n, m] = cur
    return t if np.ndim(x) else t[:, :, 0]


def spherical_bessel_all(n_max: int, x: float) -> np.ndarray:
    """Return [j_0(x), ..., j_{n_max}(x)] for x >= 0.

    Uses downward (Miller) recurrence normalised against the closed forms
    of j_0 and j_1, which is stable for every order including n > x.
    """
    if x < 0:
        raise ValueError("argument must be non-negative")
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    if x < 1e-6:
        # leading series term; higher orders underflow harmlessly
        out[0] = 1.0 - x * x / 6.0
        term = 1.0
        for n in range(1, n_max + 1):
            term *= x / (2 * n + 1)
            out[n] = term * (1.0 - x * x / (2.0 * (2 * n + 3)))
            if out[n] == 0.0:
                break
        return out

    start = int(max(n_max, x)) + 32 + int(2.0 * np.sqrt(max(n_max, x)))
    raw = np.zeros(start + 2)
    raw[start + 1] = 0.0
    raw[start] = 1e-30
    for k in range(start, 0, -1):
        raw[k - 1] = (2 * k + 1) / x * raw[k] - raw[k + 1]
        if abs(raw[k - 1]) > 1e250:
            raw[k - 1:] /= 1e250
    j0 = np.sin(x) / x
    j1 = np.sin(x) / (x * x) - np.cos(x) / x
    # normalise against whichever anchor is better conditioned
    if abs(raw[0]) >= abs(raw[1]):
        scale = j0 / raw[0]
    else:
        scale = j1 / raw[1]
    return raw[: n_max + 1] * scale


def spherical_bessel(n: int, x: float) -> float:
    """Spherical Bessel function of the first kind j_n(x), x >= 0."""
    if n < 0:
        raise ValueError("order must be non-negative")
    return float(spherical_bessel_all(n, float(x))[n])


@dataclass(frozen=True)
class TrigExpansionTable:
    """Coefficients expanding Legendre-type functions of cos(x) in harmonics.

    For degrees up to 2*max_degree the stored arrays satisfy

        P_{2n}(cos x)          = p[n]^2 + 2 sum_k p[n-k] p[n+k] cos(2kx)
        P_{2n-1}(cos x)        = 2 sum_k p[n-k] p[n+k-1] cos((2k-1)x)
        P̄_{2n}^{2m}(cos x)    = sum_{k=0..n} c_even[n, m, k] cos(2kx)
        P̄_{2n}^{2m-1}(cos x)  = sum_{k=1..n} d_even[n, m, k] sin(2kx)
        P̄_{2n-1}^{2m}(cos x)  = sum_{k=1..n} c_odd[n, m, k]  cos((2k-1)x)
        P̄_{2n-1}^{2m-1}(cos x)= sum_{k=1..n} d_odd[n, m, k]  sin((2k-1)x)

    with P̄ the unit-L2-norm associated Legendre functions.  All
    coefficients are obtained by projecting onto the harmonic basis with
    Gauss-Legendre quadrature on (0, pi), refined until two successive
    orders agree.
    """

    max_degree: int
    p: np.ndarray
    c_even: np.ndarray
    d_even: np.ndarray
    c_odd: np.ndarray
    d_odd: np.ndarray

    def __post_init__(self):
        for arr in (self.p, self.c_even, self.d_even, self.c_odd, self.d_odd):
            arr.setflags(write=False)


def _project_tables(n0: int, n_nodes: int):
    """One quadrature pass of all coefficient projections at a fixed rule."""
    deg = 2 * n0
    nodes, weights = roots_legendre(n_nodes)
    theta = 0.5 * np.pi * (nodes + 1.0)
    wt = 0.5 * np.pi * weights
    x = np.cos(theta)
    y = np.sin(theta)

    harmonics = np.arange(deg + 1)
    cos_w = np.cos(np.outer(harmonics, theta)) * wt  # (deg+1, q)
    sin_w = np.sin(np.outer(harmonics, theta)) * wt
    # projection scale: 1/pi for the constant, 2/pi otherwise
    scale = np.full(deg + 1, 2.0 / np.pi)
    scale[0] = 1.0 / np.pi

    # plain Legendre -> p values, read off the top harmonic of each degree
    p = np.zeros(deg + 1)
    p_prev = np.ones_like(theta)
    p_cur = x.copy()
    p[0] = np.sqrt(scale[0] * (cos_w[0] @ p_prev))
    if deg >= 1:
        p[1] = scale[1] * (cos_w[1] @ p_cur) / (2.0 * p[0])
    for n in range(2, deg + 1):
        p_prev, p_cur = p_cur, ((2 * n - 1) * x * p_cur - (n - 1) * p_prev) / n
        p[n] = scale[n] * (cos_w[n] @ p_cur) / (2.0 * p[0])

    shape = (n0 + 1, n0 + 1, n0 + 1)
    c_even = np.zeros(shape)
    d_even = np.zeros(shape)
    c_odd = np.zeros(shape)
    d_odd = np.zeros(shape)

    diag = np.full_like(theta, 1.0 / np.sqrt(2.0))
    for mu in range(1, deg + 1):
        diag = -np.sqrt(1.0 + 0.5 / mu) * y * diag
        prev, cur = np.zeros_like(theta), diag
        for n in range(mu, deg + 1):
            if n > mu:
                a = np.sqrt((4.0 * n * n - 1.0) / (n * n - mu * mu))
                b = np.sqrt(((n - 1.0) ** 2 - mu * mu)
                            / (4.0 * (n - 1.0) ** 2 - 1.0))
                prev, cur = cur, a * (x * cur - b * prev)
            if n % 2 == 0:
                ni = n // 2
                if mu % 2 == 0:
                    ks = 2 * np.arange(ni + 1)
                    c_even[ni, mu // 2, : ni + 1] = scale[ks] * (cos_w[ks] @ cur)
                else:
                    ks = 2 * np.arange(1, ni + 1)
                    d_even[ni, (mu + 1) // 2, 1: ni + 1] = (
                        scale[ks] * (sin_w[ks] @ cur))
            else:
                ni = (n + 1) // 2
                ks = 2 * np.arange(1, ni + 1) - 1
                if mu % 2 == 0:
                    c_odd[ni, mu // 2, 1: ni + 1] = scale[ks] * (cos_w[ks] @ cur)
                else:
                    d_odd[ni, (mu + 1) // 2, 1: ni + 1] = (
                        scale[ks] * (sin_w[ks] @ cur))
    return p, c_even, d_even, c_odd, d_odd


@functools.lru_cache(maxsize=8)
def build_trig_expansion(max_degree: int) -> TrigExpansionTable:
    """Build the coefficient table covering degrees up to 2*max_degree.

    The quadrature order is doubled until two successive passes agree to
    1e-10 on every coefficient.  The result is cached per process.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    n_nodes = 4 * max_degree + 64
    prev = _project_tables(max_degree, n_nodes)
    for _ in range(8):
        n_nodes *= 2
        cur = _project_tables(max_degree, n_nodes)
        diff = max(np.max(np.abs(a - b)) for a, b in zip(prev, cur))
        if diff <= 1e-10:
            return TrigExpansionTable(max_degree, *cur)
        prev = cur
    raise QuadratureConvergenceError(
        f"projection failed to stabilise for degrees up to {2 * max_degree} "
        f"at {n_nodes} nodes (last sup-difference {diff:.3e})")


def dump_trig_expansion_csv(table: TrigExpansionTable, path) -> None:
    """Debug dump: rows of (degree, order, harmonic, value).

    The p values are written with order 0 and harmonic equal to their own
    index; the four associated-Legendre families follow with their true
    degree/order/harmonic labels.  Zero entries are skipped.
    """
    n0 = table.max_degree
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["degree", "order", "harmonic", "value"])
        for n, val in enumerate(table.p):
            writer.writerow([n, 0, n, repr(float(val))])
        for n in range(n0 + 1):
            for m in range(1, n + 1):
                for k in range(n + 1):
                    if table.c_even[n, m, k]:
                        writer.writerow(
                            [2 * n, 2 * m, 2 * k, repr(float(table.c_even[n, m, k]))])
                    if table.d_even[n, m, k]:
                        writer.writerow(
                            [2 * n, 2 * m - 1, 2 * k, repr(float(table.d_even[n, m, k]))])
                    if table.c_odd[n, m, k]:
                        writer.writerow(
                            [2 * n - 1, 2 * m, 2 * k - 1, repr(float(table.c_odd[n, m, k]))])
                    if table.d_odd[n, m, k]:
                        writer.writerow(
                            [2 * n - 1, 2 * m - 1, 2 * k - 1, repr(float(table.d_odd[n, m, k]))])
