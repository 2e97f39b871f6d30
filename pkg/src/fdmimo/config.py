"""Scenario configuration: TOML loading, dotted-key overrides and
whole-file validation that reports every problem at once."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import tomli

from .angular import (AngularSpectrum, ElementPattern, LaplacianElevation,
                      VonMisesAzimuth)
from .correlation import ArrayGeometry, min_series_terms
from .grouping import GroupingConfig
from .maxmin_sdp import SolverConfig

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "parse_overrides"]


class ConfigError(ValueError):
    """Carries the full list of validation problems."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  "
                         + "\n  ".join(self.problems))


@dataclass(frozen=True)
class CellConfig:
    radius_m: float = 250.0
    min_distance_m: float = 30.0
    bs_height_m: float = 25.0
    user_height_m: float = 1.5


@dataclass(frozen=True)
class LinkConfig:
    tx_power_w: float = 1.0
    noise_power_w: float = 1e-7
    pathloss_exponent: float = 3.76
    pathloss_ref_m: float = 30.0
    shadow_linear: float = 1.0


@dataclass(frozen=True)
class SpectrumConfig:
    elevation_spread_deg: float = 15.0
    azimuth_concentration: float = 10.0
    series_terms: int = 0          # 0 = automatic from the array aperture
    elevation_mean_deg: float = 100.0   # fixed-spectrum runs only
    azimuth_mean_deg: float = 60.0


@dataclass(frozen=True)
class SeedConfig:
    drop: int = 1
    channel: int = 2
    solver: int = 3


@dataclass(frozen=True)
class ExperimentConfig:
    drops: int = 20
    channel_draws: int = 1000
    mc_samples: int = 100_000
    cst_tilt_grid_deg: tuple = tuple(float(v) for v in range(90, 121, 3))
    k_sweep: tuple = (4, 6, 8)
    ray_paths: int = 100


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: ArrayGeometry
    pattern: ElementPattern
    spectrum: SpectrumConfig
    cell: CellConfig
    link: LinkConfig
    seeds: SeedConfig
    solver: SolverConfig
    experiment: ExperimentConfig
    k_users: int = 8
    grouping: GroupingConfig | None = None
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def series_terms(self) -> int:
        """Effective series order: configured value, raised to the minimum
        the aperture needs."""
        auto = min_series_terms(self.geometry)
        return max(self.spectrum.series_terms, auto)

    def fixed_spectrum(self) -> AngularSpectrum:
        """The single spectrum used by correlation-validation runs."""
        return AngularSpectrum(
            LaplacianElevation(math.radians(self.spectrum.elevation_mean_deg),
                               math.radians(self.spectrum.elevation_spread_deg)),
            VonMisesAzimuth(math.radians(self.spectrum.azimuth_mean_deg),
                            self.spectrum.azimuth_concentration),
            self.pattern)

    def config_hash(self) -> str:
        """Stable digest of the effective configuration."""
        canon = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def parse_overrides(pairs) -> dict:
    """Parse repeated KEY=VALUE strings with dotted section paths; values
    use TOML literal syntax (bare words fall back to strings)."""
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError([f"override '{pair}' is not KEY=VALUE"])
        key, _, value = pair.partition("=")
        try:
            parsed = tomli.loads(f"v = {value}")["v"]
        except tomli.TOMLDecodeError:
            parsed = value
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = parsed
    return out


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _section(raw, name, fields, problems, builder):
    data = raw.get(name, {})
    if not isinstance(data, dict):
        problems.append(f"[{name}] must be a table")
        return None
    unknown = set(data) - set(fields)
    if unknown:
        problems.append(f"[{name}] has unknown keys: {sorted(unknown)}")
    kwargs = {k: data[k] for k in fields if k in data}
    try:
        return builder(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"[{name}]: {exc}")
        return None


def build_config(raw: dict) -> ScenarioConfig:
    """Validate a raw config mapping; every detected problem is reported."""
    problems: list[str] = []

    geometry = _section(raw, "array",
                        ("n_elements", "n_ports", "port_spacing_wl",
                         "element_spacing_wl"),
                        problems, ArrayGeometry)
    pattern = _section(raw, "pattern",
                       ("phi_3db_deg", "theta_3db_deg", "a_m_db",
                        "sla_v_db", "g_e_max_dbi"),
                       problems,
                       lambda **kw: ElementPattern(
                           **{**dict(phi_3db_deg=65.0, theta_3db_deg=65.0,
                                     a_m_db=30.0, sla_v_db=30.0,
                                     g_e_max_dbi=8.0), **kw}))
    spectrum = _section(raw, "spectrum",
                        ("elevation_spread_deg", "azimuth_concentration",
                         "series_terms", "elevation_mean_deg",
                         "azimuth_mean_deg"),
                        problems, SpectrumConfig)
    cell = _section(raw, "cell",
                    ("radius_m", "min_distance_m", "bs_height_m",
                     "user_height_m"), problems, CellConfig)
    link = _section(raw, "link",
                    ("tx_power_w", "noise_power_w", "pathloss_exponent",
                     "pathloss_ref_m", "shadow_linear"), problems, LinkConfig)
    seeds = _section(raw, "seeds", ("drop", "channel", "solver"),
                     problems, SeedConfig)
    solver = _section(raw, "solver",
                      ("epsilon", "inner_tol", "inner_max_iter",
                       "plateau_iters", "randomization_trials",
                       "max_outer_iter"), problems, SolverConfig)
    experiment = _section(raw, "experiment",
                          ("drops", "channel_draws", "mc_samples",
                           "cst_tilt_grid_deg", "k_sweep", "ray_paths"),
                          problems,
                          lambda **kw: ExperimentConfig(
                              **{k: tuple(v) if isinstance(v, list) else v
                                 for k, v in kw.items()}))

    users = raw.get("users", {})
    k_users = users.get("count", 8) if isinstance(users, dict) else 8
    if not isinstance(k_users, int) or k_users < 1:
        problems.append("[users] count must be a positive integer")

    grouping = None
    if "grouping" in raw:
        def build_grouping(count, mean_elevation_deg, half_spread_deg):
            return GroupingConfig(
                count, tuple(math.radians(v) for v in mean_elevation_deg),
                math.radians(half_spread_deg))
        grouping = _section(raw, "grouping",
                            ("count", "mean_elevation_deg",
                             "half_spread_deg"), problems, build_grouping)

    if cell is not None:
        if cell.min_distance_m >= cell.radius_m:
            problems.append("[cell] min_distance_m must be below radius_m")
        if cell.bs_height_m <= cell.user_height_m:
            problems.append("[cell] base station must sit above the users")
    if geometry is not None and isinstance(k_users, int):
        if k_users >= geometry.n_ports:
            problems.append("[users] count must stay below the port count "
                            "for the max-min solver regime")
    if geometry is not None and grouping is not None:
        if geometry.n_ports % grouping.n_groups:
            problems.append("[grouping] count must divide [array] n_ports")

    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(geometry, pattern, spectrum, cell, link, seeds,
                          solver, experiment, k_users, grouping, raw)


def load_config(path, overrides=()) -> ScenarioConfig:
    """Read a TOML scenario file, apply overrides, validate."""
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"])
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"config file {path} is not valid TOML: {exc}"])
    if overrides:
        raw = _merge(raw, parse_overrides(overrides))
    return build_config(raw)
