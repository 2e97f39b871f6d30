"""Elevation beamforming toolkit for planar active antenna arrays:
exact 3D spatial correlation, correlated channel models, deterministic
performance equivalents and max-min-SIR downtilt optimisation."""

from ._version import __version__
from .angular import (AngularSpectrum, ElementPattern, FourierCoefficients,
                      LaplacianElevation, VonMisesAzimuth, element_field_linear,
                      element_gain_db, fourier_coeffs)
from .beamforming import (LinkBudget, MultiUserScene, mrt_precoder,
                          optimal_single_user_weights, sinr_deterministic,
                          sinr_instantaneous, sir_deterministic,
                          snr_deterministic, snr_instantaneous)
from .channel import (ChannelRealization, RayChannelConfig, array_response,
                      draw_correlated_channel, draw_ray_channel)
from .config import ConfigError, ScenarioConfig, load_config
from .correlation import (ArrayGeometry, ElementCorrelationMatrix,
                          PairGeometry, PortWeightMatrix,
                          build_element_correlation, downtilt_weights_3gpp,
                          min_series_terms, pair_geometry, port_correlation,
                          scf_element, scf_element_mc)
from .grouping import (GroupingConfig, assign_users, build_group_subspaces,
                       chordal_distance, kmeans_baseline, ug_sdb,
                       user_eigenspace)
from .maxmin_sdp import (DinkelbachState, RandomizationResult, SdrVariable,
                         SolverConfig, dinkelbach, evaluate_fk, evaluate_gk,
                         gaussian_randomization, inner_maxmin, sdb_solve)
from .sim import ExperimentResult, drop_users, run_experiment
from .specfun import (TrigExpansionTable, assoc_legendre_norm,
                      build_trig_expansion, legendre, spherical_bessel)
