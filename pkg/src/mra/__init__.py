"""Spectral Galerkin simulation of non-local reaction-diffusion equations,
with or without multiplicative Ito noise, and numerical checks of their
mean-square absorbing bounds."""
from .attractor import (
    ConvergenceError,
    DerivedConstants,
    RateRangeError,
    absorbing_radius_random,
    absorbing_radius_stochastic,
    continuity_gap,
    decay_bound,
    derive_constants,
    pullback_entry_time,
    radius_boundedness,
    steady_state,
)
from .ensemble import FamilySpec, RadiusProfile, UniverseError, family_norm, run_ensemble, sample_initial
from .experiments import run_experiment
from .integrate import BlowUpError, energy_residual, simulate_path, step_deterministic, step_stochastic
from .manifest import Manifest, ManifestError, parse_manifest, serialize_manifest
from .model import ModelParams, validate_params
from .presets import ForcingSpec, IntegrabilityError, Noise, NonlocalCoefficient, Reaction
from .rng import BrownianStream, brownian_increment
from .spectral import Basis, ConfigurationError, SpectralState, analyze, build_basis, synthesize

__version__ = "0.1.0"
