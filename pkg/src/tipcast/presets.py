"""Shipped benchmark configurations and their analysis defaults.

Each preset freezes a complete SystemSpec: drift law, noise level,
sampling interval, initial state, and discarded transient.  The
companion table ``ANALYSIS_DEFAULTS`` records the window plan and
reservoir settings that work well for each preset, so the command line
can analyze a preset without further tuning.
"""

from __future__ import annotations

import math
from dataclasses import replace

from .errors import ConfigError
from .systems import ParameterSchedule, SystemSpec

_KS_LADDER = ((36.0, 10000), (35.2, 10000), (34.4, 10000),
              (33.6, 10000), (32.8, 10000), (32.0, 10000))

_PRESETS: dict[str, SystemSpec] = {
    # parameter ramps crossing or approaching a local bifurcation
    "fold_fig2": SystemSpec(
        system_id="fold_map",
        schedule=ParameterSchedule.linear(1.0, 1.0),
        length=20000,
        noise_intensity=0.01,
    ),
    "period_doubling_fig2": SystemSpec(
        system_id="period_doubling_map",
        schedule=ParameterSchedule.linear(0.15, 0.25),
        length=20000,
        noise_intensity=0.01,
    ),
    "pitchfork_fig2": SystemSpec(
        system_id="pitchfork_flow",
        schedule=ParameterSchedule.linear(1.65, -0.50),
        length=20000,
        noise_intensity=0.01,
        dt=0.1,
    ),
    "hopf_fig2": SystemSpec(
        system_id="hopf_flow",
        schedule=ParameterSchedule.linear(-2.0, 2.5),
        length=20000,
        noise_intensity=0.01,
        dt=0.05,
    ),
    # limit cycle shrinking onto an equilibrium
    "hopf_cycle_to_eq": SystemSpec(
        system_id="hopf_flow",
        schedule=ParameterSchedule.linear(-2.3, 2.0),
        length=20000,
        noise_intensity=0.01,
        dt=0.05,
    ),
    # period-4 window drifting through the doubling cascade into chaos
    "logistic_fig2": SystemSpec(
        system_id="logistic_map",
        schedule=ParameterSchedule.linear(0.13, 3.44),
        length=50000,
        noise_intensity=0.003,
    ),
    "lorenz_eq_to_chaos": SystemSpec(
        system_id="lorenz63",
        schedule=ParameterSchedule.linear(22.0, 2.0),
        length=20000,
        noise_intensity=0.001,
        dt=0.01,
        transient=500,
    ),
    "lorenz_chaos_to_eq": SystemSpec(
        system_id="lorenz63",
        schedule=ParameterSchedule.linear(-30.0, 50.0),
        length=20000,
        noise_intensity=0.001,
        dt=0.01,
        transient=500,
    ),
    # noisy motion near a stable spiral equilibrium
    "lorenz_near_equilibrium": SystemSpec(
        system_id="lorenz63",
        schedule=ParameterSchedule.constant(10.0),
        length=3000,
        noise_intensity=0.001,
        dt=0.005,
        transient=500,
    ),
    "lorenz_chaotic": SystemSpec(
        system_id="lorenz63",
        schedule=ParameterSchedule.constant(28.0),
        length=4000,
        noise_intensity=0.001,
        dt=0.01,
        transient=500,
    ),
    "ks_periodic_to_chaos": SystemSpec(
        system_id="ks_pde",
        schedule=ParameterSchedule.linear(0.0056, 0.076),
        length=20000,
        noise_intensity=1e-4,
        dt=0.02,
        domain_size=2.0 * math.pi,
        spatial_points=64,
        transient=1000,
    ),
    "ks_chaotic_l22": SystemSpec(
        system_id="ks_pde",
        schedule=ParameterSchedule.constant(1.0),
        length=10000,
        noise_intensity=1e-4,
        dt=0.25,
        domain_size=22.0,
        spatial_points=64,
        transient=1000,
    ),
    # domain length stepping down through the chaotic-to-periodic boundary
    "ks_chaos_to_periodic": SystemSpec(
        system_id="ks_pde",
        schedule=ParameterSchedule.constant(1.0),
        length=60000,
        noise_intensity=1e-4,
        dt=0.25,
        spatial_points=64,
        domain_schedule=ParameterSchedule.stepwise(_KS_LADDER),
        transient=1000,
    ),
}

# Window plan and reservoir settings tuned per preset.  "rc" holds
# ReservoirConfig keyword arguments; measure-specific options sit beside
# them.  These are defaults, not hard requirements; every command-line
# flag can override them.
ANALYSIS_DEFAULTS: dict[str, dict] = {
    # Noise-around-equilibrium presets want the reservoir nearly linear
    # (small input/bias scales) with a strong ridge: the dominant closure
    # eigenvalue then tracks the local multiplier instead of the slow
    # parameter drift, which otherwise leaks in as a spurious pole near
    # the stability threshold.
    "fold_fig2": {
        "plan": {"d": 1000, "k": 500},
        "mode": "discrete",
        "kinds": ("DEJ",),
        "rc": {"n": 100, "spectral_radius": 0.2, "density": 0.1, "input_scale": 0.1,
               "bias_scale": 0.0, "gamma": 1.0, "ridge_lambda": 2.0},
        "mfm": {"t_min": 2},
    },
    "period_doubling_fig2": {
        "plan": {"d": 1000, "k": 500},
        "mode": "discrete",
        "kinds": ("DEJ",),
        "rc": {"n": 100, "spectral_radius": 0.2, "density": 0.1, "input_scale": 0.1,
               "bias_scale": 0.0, "gamma": 1.0, "ridge_lambda": 2.0},
        "mfm": {"t_min": 2},
    },
    "pitchfork_fig2": {
        "plan": {"d": 1000, "k": 500},
        "mode": "continuous",
        "kinds": ("DEJ",),
        "rc": {"n": 100, "spectral_radius": 0.2, "density": 0.1, "input_scale": 0.1,
               "bias_scale": 0.0, "gamma": 10.0, "ridge_lambda": 2.0},
    },
    # Limit-cycle data instead needs a moderately nonlinear reservoir so
    # the closure extrapolates the amplitude dynamics inward to the
    # unstable focus the cycle encircles.
    "hopf_fig2": {
        "plan": {"d": 1000, "k": 500},
        "mode": "continuous",
        "kinds": ("DEJ",),
        "rc": {"n": 200, "spectral_radius": 0.8, "density": 0.05, "input_scale": 0.4,
               "bias_scale": 0.1, "gamma": 8.0, "ridge_lambda": 1e-2},
    },
    "hopf_cycle_to_eq": {
        "plan": {"d": 1000, "k": 500},
        "mode": "continuous",
        "kinds": ("MFM",),
        "rc": {"n": 200, "spectral_radius": 0.8, "density": 0.05, "input_scale": 0.4,
               "bias_scale": 0.1, "gamma": 4.0, "ridge_lambda": 1e-2},
        "mfm": {"t_min": 50},
    },
    "logistic_fig2": {
        "plan": {"d": 1000, "k": 500},
        "mode": "discrete",
        "kinds": ("DEJ", "MFM"),
        "rc": {"n": 100, "spectral_radius": 0.3, "density": 0.1, "input_scale": 1.0,
               "bias_scale": 0.5, "gamma": 1.0, "ridge_lambda": 1e-6},
        "mfm": {"t_min": 2},
    },
    "lorenz_eq_to_chaos": {
        "plan": {"d": 2000, "k": 1000},
        "mode": "continuous",
        "kinds": ("DEJ", "MLE"),
        "rc": {"n": 300, "spectral_radius": 0.6, "density": 0.05, "input_scale": 0.5,
               "bias_scale": 0.5, "gamma": 10.0, "ridge_lambda": 1e-4},
        "mle": {"total_steps": 6000},
    },
    "lorenz_chaos_to_eq": {
        "plan": {"d": 2000, "k": 1000},
        "mode": "continuous",
        "kinds": ("MLE",),
        "rc": {"n": 300, "spectral_radius": 0.6, "density": 0.05, "input_scale": 0.5,
               "bias_scale": 0.5, "gamma": 10.0, "ridge_lambda": 1e-4},
        "mle": {"total_steps": 6000},
    },
    "lorenz_near_equilibrium": {
        "plan": {"d": 1000, "k": 1000},
        "mode": "continuous",
        "kinds": ("DEJ",),
        "rc": {"n": 100, "spectral_radius": 0.2, "density": 0.1, "input_scale": 0.1,
               "bias_scale": 0.0, "gamma": 20.0, "ridge_lambda": 1e-6},
    },
    "lorenz_chaotic": {
        "plan": {"d": 3000, "k": 1000},
        "mode": "continuous",
        "kinds": ("MLE",),
        "rc": {"n": 300, "spectral_radius": 0.6, "density": 0.05, "input_scale": 0.5,
               "bias_scale": 0.5, "gamma": 10.0, "ridge_lambda": 1e-4},
        "mle": {"total_steps": 6000},
    },
    "ks_periodic_to_chaos": {
        "plan": {"d": 4000, "k": 2000},
        "mode": "continuous",
        "kinds": ("MLE",),
        "rc": {"n": 512, "spectral_radius": 0.6, "density": 0.02, "input_scale": 0.5,
               "bias_scale": 0.5, "gamma": 5.0, "ridge_lambda": 1e-6},
        "mle": {"total_steps": 12000},
    },
    "ks_chaotic_l22": {
        "plan": {"d": 6000, "k": 2000},
        "mode": "continuous",
        "kinds": ("MLE",),
        "rc": {"n": 512, "spectral_radius": 0.6, "density": 0.02, "input_scale": 0.5,
               "bias_scale": 0.5, "gamma": 4.0, "ridge_lambda": 1e-6},
        "mle": {"total_steps": 16000},
    },
    "ks_chaos_to_periodic": {
        "plan": {"d": 6000, "k": 2000},
        "mode": "continuous",
        "kinds": ("MLE",),
        "rc": {"n": 512, "spectral_radius": 0.6, "density": 0.02, "input_scale": 0.5,
               "bias_scale": 0.5, "gamma": 4.0, "ridge_lambda": 1e-6},
        "mle": {"total_steps": 16000},
    },
}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def paper_preset(name: str, *, seed: int = 0, length: int | None = None) -> SystemSpec:
    """Return the named benchmark spec, optionally reseeded or resized.

    Raises ConfigError listing the valid names when the name is unknown.
    """
    if name not in _PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        )
    spec = replace(_PRESETS[name], seed=seed)
    if length is not None:
        if spec.domain_schedule is not None and length != spec.length:
            raise ConfigError(f"preset {name!r} has a fixed stepwise length {spec.length}")
        spec = replace(spec, length=int(length))
    spec.validate()
    return spec


def default_analysis(name: str) -> dict:
    """Analysis defaults for a preset (deep copy, safe to mutate)."""
    if name not in ANALYSIS_DEFAULTS:
        raise ConfigError(
            f"no analysis defaults for {name!r}; available: {', '.join(sorted(ANALYSIS_DEFAULTS))}"
        )
    import copy

    return copy.deepcopy(ANALYSIS_DEFAULTS[name])
