"""Tipping-point forecasting from time series via reservoir computing.

The package trains windowed reservoir computers on a drifting system's
output, extracts stability measures (dominant Jacobian eigenvalue,
maximum Floquet multiplier, maximum Lyapunov exponent) from the learned
autonomous dynamics, and extrapolates their trends to forecast when a
critical transition will occur.

Names are resolved lazily so that the command-line layer can configure
the numeric environment before numpy loads.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    # errors
    "TipcastError": ".errors",
    "ConfigError": ".errors",
    "NumericError": ".errors",
    # series container and CSV contract
    "TimeSeries": ".timeseries",
    "parse_timeseries_csv": ".timeseries",
    "read_timeseries_csv": ".timeseries",
    # synthetic systems and oracles
    "ParameterSchedule": ".systems",
    "SystemSpec": ".systems",
    "simulate": ".systems",
    "spec_to_dict": ".systems",
    "spec_from_dict": ".systems",
    "ground_truth_dej": ".systems",
    "ground_truth_mle": ".systems",
    "paper_preset": ".presets",
    "preset_names": ".presets",
    "default_analysis": ".presets",
    # reservoir machinery
    "ReservoirConfig": ".reservoir",
    "ReservoirModel": ".reservoir",
    "ReadoutModel": ".reservoir",
    "AutonomousRC": ".reservoir",
    "build_reservoir": ".reservoir",
    "drive": ".reservoir",
    "train_readout": ".reservoir",
    "close_loop": ".reservoir",
    "predict_autonomous": ".reservoir",
    "forecast_error": ".reservoir",
    "select_hyperparameters": ".reservoir",
    "save_model": ".reservoir",
    "load_model": ".reservoir",
    # stability measures
    "newton_equilibrium": ".measures",
    "dynamics_jacobian": ".measures",
    "dominant_eigenvalue": ".measures",
    "compute_dej": ".measures",
    "detect_period": ".measures",
    "monodromy": ".measures",
    "compute_mfm": ".measures",
    "compute_mle": ".measures",
    # sliding-window pipeline
    "WindowPlan": ".pipeline",
    "MeasureOptions": ".pipeline",
    "MeasurePoint": ".pipeline",
    "MeasureSeries": ".pipeline",
    "analyze_windows": ".pipeline",
    "run_sliding_analysis": ".pipeline",
    "scalar_component": ".pipeline",
    "critical_threshold": ".pipeline",
    "fit_trend": ".pipeline",
    "TrendModel": ".pipeline",
    "extrapolate_to_threshold": ".pipeline",
    "WarningConfig": ".pipeline",
    "epsilon_from_range": ".pipeline",
    "evaluate_warning": ".pipeline",
    "classify_bifurcation": ".pipeline",
    "TippingForecast": ".pipeline",
    "forecast_tipping": ".pipeline",
    "lead_time_curve": ".pipeline",
    "measures_to_csv": ".pipeline",
    "parse_measures_csv": ".pipeline",
    # evaluation against classical indicators
    "rolling_ews": ".baselines",
    "roc_auc": ".baselines",
    "compare_methods": ".baselines",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    try:
        module_name = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}") from None
    value = getattr(importlib.import_module(module_name, __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
