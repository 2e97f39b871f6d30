"""Spatial correlation of the 2D active antenna array: closed-form
element-pair correlation series, its Monte Carlo oracle, and assembly of
element- and port-level correlation matrices."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .angular import AngularSpectrum, element_field_linear, fourier_coeffs
from .specfun import (assoc_legendre_norm_triangle, build_trig_expansion,
                      legendre_all, spherical_bessel_all)

__all__ = [
    "ArrayGeometry",
    "PairGeometry",
    "ElementCorrelationMatrix",
    "PortWeightMatrix",
    "MCEstimate",
    "min_series_terms",
    "pair_geometry",
    "scf_element",
    "scf_element_mc",
    "scf_element_mc_estimate",
    "scf_mc_grid",
    "build_element_correlation",
    "downtilt_weights_3gpp",
    "port_correlation",
    "write_correlation_csv",
    "read_correlation_csv",
]

DEFAULT_SERIES_TERMS = 30

_BATCH_LAGS = 192


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar array layout: vertical elements per port, horizontal ports,
    spacings in wavelengths."""

    n_elements: int
    n_ports: int
    port_spacing_wl: float
    element_spacing_wl: float

    def __post_init__(self):
        if self.n_elements < 1 or self.n_ports < 1:
            raise ValueError("array dimensions must be positive")
        if self.port_spacing_wl <= 0 or self.element_spacing_wl <= 0:
            raise ValueError("spacings must be positive")

    @property
    def n_total(self) -> int:
        return self.n_elements * self.n_ports


@dataclass(frozen=True)
class PairGeometry:
    """Separation of an element pair: total distance in wavelengths and the
    polar angle of the separation vector measured from the vertical axis."""

    distance_wl: float
    polar_angle_rad: float


def min_series_terms(geom: ArrayGeometry) -> int:
    """Smallest series order covering the full aperture of the array.

    The series terms carry spherical Bessel factors of argument up to
    2*pi*Z_max; orders past the argument (plus an Airy-type transition
    margin) decay super-exponentially, so truncating below that leaves
    oscillatory residue at the far lags that can push the assembled
    correlation matrix slightly indefinite.
    """
    z_max = math.hypot((geom.n_ports - 1) * geom.port_spacing_wl,
                       (geom.n_elements - 1) * geom.element_spacing_wl)
    x = 2.0 * math.pi * z_max
    return max(DEFAULT_SERIES_TERMS,
               math.ceil((x + 4.0 * x ** (1.0 / 3.0) + 10.0) / 2.0))


def pair_geometry(ds: int, dz: int, geom: ArrayGeometry) -> PairGeometry:
    """Distance/angle pair for the port lag ds and element lag dz.

    Only the lag quadrants with a direct series evaluation are accepted:
    (0, 0), (ds > 0, dz >= 0) and (ds >= 0, dz < 0).  The remaining
    quadrants are obtained by the conjugate symmetry of the correlation
    and must be mapped by the caller before reaching here.
    """
    zy = ds * geom.port_spacing_wl
    zz = dz * geom.element_spacing_wl
    if ds == 0 and dz == 0:
        return PairGeometry(0.0, 0.0)
    if not ((ds > 0 and dz >= 0) or (ds >= 0 and dz < 0)):
        raise ValueError(
            f"lag ({ds}, {dz}) outside the directly evaluated quadrants; "
            "use the conjugate of the negated lag")
    return PairGeometry(math.hypot(zy, zz), math.atan2(zy, zz))


@functools.lru_cache(maxsize=64)
def _series_tables(spec: AngularSpectrum, n0: int):
    """Lag-independent reduction of the correlation series.

    Folds the expansion-table coefficients with the spectrum Fourier
    coefficients, leaving per-lag work of order n0^2.
    """
    table = build_trig_expansion(n0)
    fc = fourier_coeffs(spec, 2 * n0 + 1)
    a_th, b_th = fc.a_theta, fc.b_theta
    a_ph, b_ph = fc.a_phi, fc.b_phi
    pi2 = math.pi ** 2

    def b_signed(k: int) -> float:
        return -b_th[-k] if k < 0 else b_th[k]

    p = table.p
    n_idx = np.arange(1, n0 + 1)

    # order-zero (plain Legendre) reductions
    leg_even = np.zeros(n0 + 1)
    leg_odd = np.zeros(n0 + 1)
    for n in range(1, n0 + 1):
        k = np.arange(-n, n + 1)
        db = np.array([b_signed(2 * kk + 1) - b_signed(2 * kk - 1) for kk in k])
        leg_even[n] = pi2 * a_ph[0] * 0.5 * np.sum(p[n - k] * p[n + k] * db)
        k = np.arange(1, n + 1)
        db = b_th[2 * k] - b_th[2 * k - 2]
        leg_odd[n] = pi2 * a_ph[0] * np.sum(p[n - k] * p[n + k - 1] * db)

    # associated-Legendre reductions; rows n, columns m (zero when m > n)
    ks = np.arange(n0 + 1)
    db_odd = np.array([b_signed(2 * kk + 1) - b_signed(2 * kk - 1) for kk in ks])
    db_even = np.zeros(n0 + 1)
    db_even[1:] = b_th[2 * ks[1:]] - b_th[2 * ks[1:] - 2]
    da_odd = np.zeros(n0 + 1)
    da_odd[1:] = a_th[2 * ks[1:] - 1] - a_th[2 * ks[1:] + 1]
    da_even = np.zeros(n0 + 1)
    da_even[1:] = a_th[2 * ks[1:] - 2] - a_th[2 * ks[1:]]

    m = np.arange(n0 + 1)
    a_2m = a_ph[2 * m]
    b_2m1 = np.zeros(n0 + 1)
    b_2m1[1:] = b_ph[2 * m[1:] - 1]

    e_ce = 0.5 * pi2 * (table.c_even @ db_odd) * a_2m[None, :]
    e_de = 0.5 * pi2 * (table.d_even @ da_odd) * b_2m1[None, :]
    e_dc = 0.5 * pi2 * (table.d_odd @ da_even) * b_2m1[None, :]
    e_co = 0.5 * pi2 * (table.c_odd @ db_even) * a_2m[None, :]

    zero_lag = pi2 * a_ph[0] * b_th[1]
    sign_n = np.where(n_idx % 2 == 0, 1.0, -1.0)
    sign_m = np.where(m % 2 == 0, 1.0, -1.0)
    return {
        "n0": n0,
        "zero_lag": zero_lag,
        "leg_even": leg_even,
        "leg_odd": leg_odd,
        "e_ce": e_ce,
        "e_de": e_de,
        "e_dc": e_dc,
        "e_co": e_co,
        "sign_n": sign_n,
        "sign_m": sign_m,
    }


def _eval_series(tables: dict, distance_wl: np.ndarray,
                 beta: np.ndarray) -> np.ndarray:
    """Evaluate the correlation series at a batch of (distance, angle)
    pairs; returns a complex array aligned with the inputs."""
    n0 = tables["n0"]
    distance_wl = np.atleast_1d(np.asarray(distance_wl, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    j = np.stack([spherical_bessel_all(2 * n0, 2.0 * math.pi * d)
                  for d in distance_wl], axis=-1)     # (2n0+1, L)
    cb = np.cos(beta)
    leg = legendre_all(2 * n0, cb)                    # (2n0+1, L)
    pbar = assoc_legendre_norm_triangle(2 * n0, cb)   # (2n0+1, 2n0+1, L)

    n = np.arange(1, n0 + 1)
    sgn = tables["sign_n"][:, None]
    sm = tables["sign_m"]

    even_leg = np.sum(sgn * (4 * n[:, None] + 1) * j[2 * n] * leg[2 * n]
                      * tables["leg_even"][1:, None], axis=0)
    odd_leg = np.sum(sgn * (4 * n[:, None] - 1) * j[2 * n - 1]
                     * leg[2 * n - 1] * tables["leg_odd"][1:, None], axis=0)

    mm = np.arange(n0 + 1)
    mo = np.maximum(2 * mm - 1, 0)
    s_ce = np.einsum("nml,nm,m->nl", pbar[2 * n][:, 2 * mm],
                     tables["e_ce"][1:], sm)
    s_de = np.einsum("nml,nm,m->nl", pbar[2 * n][:, mo],
                     tables["e_de"][1:], sm)
    s_dc = np.einsum("nml,nm,m->nl", pbar[2 * n - 1][:, mo],
                     tables["e_dc"][1:], sm)
    s_co = np.einsum("nml,nm,m->nl", pbar[2 * n - 1][:, 2 * mm],
                     tables["e_co"][1:], sm)

    even_m = np.sum(4.0 * sgn * j[2 * n] * (s_ce - s_de), axis=0)
    odd_m = np.sum(4.0 * sgn * j[2 * n - 1] * (s_dc - s_co), axis=0)

    return (tables["zero_lag"] * j[0] + even_leg + even_m
            + 1j * (-odd_leg + odd_m))


def scf_element(ds: int, dz: int, spec: AngularSpectrum, geom: ArrayGeometry,
                n0: int = DEFAULT_SERIES_TERMS) -> complex:
    """Closed-form spatial correlation between element pairs at the given
    port lag ds and vertical element lag dz, truncated at n0 series terms.

    Lags outside the directly evaluated quadrants are resolved through
    the conjugate symmetry rho(-ds, -dz) = conj(rho(ds, dz)).
    """
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    direct = (ds == 0 and dz == 0) or (ds > 0 and dz >= 0) or (ds >= 0 and dz < 0)
    if not direct:
        return scf_element(-ds, -dz, spec, geom, n0).conjugate()
    pg = pair_geometry(ds, dz, geom)
    return complex(_eval_series(_series_tables(spec, n0), pg.distance_wl,
                                pg.polar_angle_rad)[0])


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with per-part standard errors."""

    value: complex
    sem_re: float
    sem_im: float
    n_samples: int


def scf_mc_grid(lags, spec: AngularSpectrum, geom: ArrayGeometry,
                n_samples: int, seed: int,
                block: int = 1 << 16) -> list[MCEstimate]:
    """Monte Carlo correlation estimates for many lags on shared draws.

    One stream of (phi, theta) draws is reused for every lag so that the
    estimates are comparable across the lag grid, as in a measured sweep.
    Deterministic for a fixed seed, accumulated block-wise in fixed order.
    """
    lags = list(lags)
    rng = np.random.default_rng(seed)
    sums = np.zeros(len(lags), dtype=complex)
    sq_re = np.zeros(len(lags))
    sq_im = np.zeros(len(lags))
    done = 0
    while done < n_samples:
        n = min(block, n_samples - done)
        phi, theta = spec.sample(rng, n)
        gain = element_field_linear(phi, theta, spec.pattern)
        a = np.sin(phi) * np.sin(theta)
        b = np.cos(theta)
        for i, (ds, dz) in enumerate(lags):
            zy = ds * geom.port_spacing_wl
            zz = dz * geom.element_spacing_wl
            e = gain * np.exp(2j * math.pi * (zy * a + zz * b))
            sums[i] += e.sum()
            sq_re[i] += (e.real ** 2).sum()
            sq_im[i] += (e.imag ** 2).sum()
        done += n
    out = []
    for i in range(len(lags)):
        mean = sums[i] / n_samples
        var_re = max(0.0, (sq_re[i] / n_samples - mean.real ** 2))
        var_im = max(0.0, (sq_im[i] / n_samples - mean.imag ** 2))
        denom = max(1, n_samples - 1)
        out.append(MCEstimate(mean,
                              math.sqrt(var_re * n_samples / denom / n_samples),
                              math.sqrt(var_im * n_samples / denom / n_samples),
                              n_samples))
    return out


def scf_element_mc_estimate(ds: int, dz: int, spec: AngularSpectrum,
                            geom: ArrayGeometry, n_samples: int,
                            seed: int) -> MCEstimate:
    return scf_mc_grid([(ds, dz)], spec, geom, n_samples, seed)[0]


def scf_element_mc(ds: int, dz: int, spec: AngularSpectrum,
                   geom: ArrayGeometry, n_samples: int, seed: int) -> complex:
    """Sample-mean estimate of the element-pair correlation."""
    return scf_element_mc_estimate(ds, dz, spec, geom, n_samples, seed).value


@dataclass(frozen=True)
class ElementCorrelationMatrix:
    """Correlation matrix of all array elements.

    Entries follow the stacking where row (s'-1)*n_elements + z' and
    column (s-1)*n_elements + z hold the correlation at lag
    (s - s', z - z'); transposing this convention silently flips the
    conjugation, so every consumer goes through :meth:`block`.
    """

    geometry: ArrayGeometry
    entries: np.ndarray

    def __post_init__(self):
        m = self.geometry.n_total
        if self.entries.shape != (m, m):
            raise ValueError("entry matrix does not match the geometry")
        self.entries.setflags(write=False)

    def block(self, s: int, sp: int) -> np.ndarray:
        """Cross-correlation block of port s rows against port sp columns
        (0-based ports)."""
        ne = self.geometry.n_elements
        return self.entries[s * ne:(s + 1) * ne, sp * ne:(sp + 1) * ne]

    def diagonal_block(self, s: int) -> np.ndarray:
        return self.block(s, s)


def build_element_correlation(spec: AngularSpectrum, geom: ArrayGeometry,
                              n0: int = DEFAULT_SERIES_TERMS,
                              ) -> ElementCorrelationMatrix:
    """Assemble the full element correlation matrix from the closed form.

    Only the (2*n_ports - 1) x (2*n_elements - 1) distinct lags are
    evaluated; the rest of the matrix follows from the two-dimensional
    lag structure and conjugate symmetry.
    """
    nbs, ne = geom.n_ports, geom.n_elements
    rho = np.zeros((2 * nbs - 1, 2 * ne - 1), dtype=complex)
    tables = _series_tables(spec, n0)
    direct = [(ds, dz) for ds in range(nbs) for dz in range(-(ne - 1), ne)
              if not (ds == 0 and dz > 0)]
    pgs = [pair_geometry(ds, dz, geom) for ds, dz in direct]
    dist = np.array([pg.distance_wl for pg in pgs])
    angle = np.array([pg.polar_angle_rad for pg in pgs])
    vals = np.concatenate([
        _eval_series(tables, dist[i:i + _BATCH_LAGS], angle[i:i + _BATCH_LAGS])
        for i in range(0, len(direct), _BATCH_LAGS)])
    for (ds, dz), val in zip(direct, vals):
        rho[ds + nbs - 1, dz + ne - 1] = val
        rho[nbs - 1 - ds, ne - 1 - dz] = val.conjugate()

    s_of = np.repeat(np.arange(nbs), ne)
    z_of = np.tile(np.arange(ne), nbs)
    ds_mat = s_of[None, :] - s_of[:, None]
    dz_mat = z_of[None, :] - z_of[:, None]
    entries = rho[ds_mat + nbs - 1, dz_mat + ne - 1]

    eigs = np.linalg.eigvalsh(entries)
    if eigs[0] < -1e-9 * max(eigs[-1], 0.0):
        raise ValueError(
            f"element correlation matrix is not positive semi-definite "
            f"within tolerance (min eigenvalue {eigs[0]:.3e}, max "
            f"{eigs[-1]:.3e}); increase n0 or check the spectrum")
    return ElementCorrelationMatrix(geom, entries)


def downtilt_weights_3gpp(theta_tilt: float, geom: ArrayGeometry) -> np.ndarray:
    """Equal-magnitude progressive-phase downtilt weights for one port."""
    if not 0.0 < theta_tilt < math.pi:
        raise ValueError("tilt angle must lie in (0, pi)")
    z = np.arange(geom.n_elements)
    phase = -2.0 * math.pi * z * geom.element_spacing_wl * math.cos(theta_tilt)
    return np.exp(1j * phase) / math.sqrt(geom.n_elements)


@dataclass(frozen=True)
class PortWeightMatrix:
    """Per-port unit-norm downtilt weight vectors, stored as rows."""

    vectors: np.ndarray  # (n_ports, n_elements)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vectors, dtype=complex))
        object.__setattr__(self, "vectors", v)
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("every port weight vector must have unit norm")
        v.setflags(write=False)

    @property
    def n_ports(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_elements(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def from_common(cls, w: np.ndarray, n_ports: int) -> "PortWeightMatrix":
        return cls(np.tile(np.asarray(w, dtype=complex), (n_ports, 1)))

    @classmethod
    def uniform_tilt(cls, theta_tilt: float,
                     geom: ArrayGeometry) -> "PortWeightMatrix":
        return cls.from_common(downtilt_weights_3gpp(theta_tilt, geom),
                               geom.n_ports)

    def port(self, s: int) -> np.ndarray:
        return self.vectors[s]

    def block_diagonal(self) -> np.ndarray:
        """Materialise the (n_ports*n_elements) x n_ports block matrix."""
        nbs, ne = self.vectors.shape
        out = np.zeros((nbs * ne, nbs), dtype=complex)
        for s in range(nbs):
            out[s * ne:(s + 1) * ne, s] = self.vectors[s]
        return out


def port_correlation(re: ElementCorrelationMatrix,
                     weights: PortWeightMatrix) -> np.ndarray:
    """Port-level correlation matrix obtained by folding the element
    correlation with the per-port weights."""
    geom = re.geometry
    if (weights.n_ports, weights.n_elements) != (geom.n_ports,
                                                 geom.n_elements):
        raise ValueError("weight matrix does not match the array geometry")
    r4 = re.entries.reshape(geom.n_ports, geom.n_elements,
                            geom.n_ports, geom.n_elements)
    return np.einsum("ai,aibj,bj->ab", weights.vectors.conj(), r4,
                     weights.vectors, optimize=True)


def write_correlation_csv(mat: ElementCorrelationMatrix, path) -> None:
    """Self-describing CSV dump: geometry header plus row-major re,im pairs."""
    g = mat.geometry
    with open(path, "w") as fh:
        fh.write("n_ports,n_elements,port_spacing_wl,element_spacing_wl\n")
        fh.write(f"{g.n_ports},{g.n_elements},{g.port_spacing_wl!r},"
                 f"{g.element_spacing_wl!r}\n")
        for row in mat.entries:
            fh.write(",".join(f"{float(v.real)!r},{float(v.imag)!r}"
                              for v in row) + "\n")


def read_correlation_csv(path) -> ElementCorrelationMatrix:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != ["n_ports", "n_elements", "port_spacing_wl",
                      "element_spacing_wl"]:
            raise ValueError(f"unrecognised correlation file header: {header}")
        vals = fh.readline().strip().split(",")
        geom = ArrayGeometry(n_ports=int(vals[0]), n_elements=int(vals[1]),
                             port_spacing_wl=float(vals[2]),
                             element_spacing_wl=float(vals[3]))
        rows = []
        for line in fh:
            nums = [float(tok) for tok in line.strip().split(",")]
            rows.append(np.array(nums[0::2]) + 1j * np.array(nums[1::2]))
    return ElementCorrelationMatrix(geom, np.array(rows))
