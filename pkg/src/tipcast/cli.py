"""Command-line entry points.

Five subcommands cover the full workflow: `simulate` writes synthetic
series, `analyze` turns a series into stability measures and a tipping
forecast, `evaluate` scores measures against classical early-warning
indicators, `leadtime` sweeps forecast cutoffs, and `presets` lists the
bundled scenarios.  Every run persists its resolved options to
`config.txt` in the output directory; `--config FILE` replays such a
file, overriding everything except `--out`.

Exit codes: 0 success, 1 configuration/usage errors, 2 numeric
failures, 3 I/O errors.

Heavy imports happen inside the command handlers so `--threads` can pin
the BLAS thread pools before numpy first loads.
"""

import argparse
import json
import os
import sys

from .errors import ConfigError, NumericError, TipcastError

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

# CLI flag dest -> ReservoirConfig field
_RC_FIELDS = {
    "rc_n": "n",
    "rc_spectral_radius": "spectral_radius",
    "rc_density": "density",
    "rc_input_scale": "input_scale",
    "rc_bias_scale": "bias_scale",
    "rc_gamma": "gamma",
    "rc_ridge_lambda": "ridge_lambda",
    "rc_washout": "washout_fraction",
}


class _Parser(argparse.ArgumentParser):
    """argparse's exit code 2 belongs to numeric failures here."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", metavar="DIR",
                        help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for data generation")
    common.add_argument("--threads", type=int, default=None,
                        help="pin numeric libraries to this many threads")
    common.add_argument("--no-plots", action="store_true",
                        help="skip SVG emission")
    common.add_argument("--config", default=None, metavar="FILE",
                        help="replay a persisted config.txt, keeping only --out")

    analysis = argparse.ArgumentParser(add_help=False)
    analysis.add_argument("--preset", metavar="NAME",
                          help="bundled scenario to simulate and analyze")
    analysis.add_argument("--input", metavar="CSV",
                          help="externally supplied series (header t,x1,...,xN)")
    analysis.add_argument("--length", type=int, default=None,
                          help="override the preset series length")
    analysis.add_argument("--mode", choices=("discrete", "continuous"), default=None,
                          help="reservoir time structure (required with --input)")
    analysis.add_argument("-d", "--window", type=int, default=None,
                          help="window length in samples")
    analysis.add_argument("-k", "--step", type=int, default=None,
                          help="window slide step in samples")
    analysis.add_argument("--rc-n", type=int, default=None, help="reservoir size")
    analysis.add_argument("--rc-spectral-radius", type=float, default=None)
    analysis.add_argument("--rc-density", type=float, default=None)
    analysis.add_argument("--rc-input-scale", type=float, default=None)
    analysis.add_argument("--rc-bias-scale", type=float, default=None)
    analysis.add_argument("--rc-gamma", type=float, default=None)
    analysis.add_argument("--rc-ridge-lambda", type=float, default=None)
    analysis.add_argument("--rc-washout", type=float, default=None,
                          help="washout fraction discarded before regression")
    analysis.add_argument("--rc-seed", type=int, default=0,
                          help="seed for the reservoir draw")
    analysis.add_argument("--grid", metavar="JSON", default=None,
                          help="JSON list of reservoir overrides; the best by "
                               "forecast error is selected")
    analysis.add_argument("--outlier-windows", default=None, metavar="I,J,...",
                          help="window indices to skip and mark")
    analysis.add_argument("--no-standardize", action="store_true",
                          help="feed windows to the reservoir unnormalized")
    analysis.add_argument("--period-t-min", type=int, default=None,
                          help="shortest period accepted by cycle detection")
    analysis.add_argument("--mle-steps", type=int, default=None,
                          help="free-run length for the Lyapunov estimate")

    parser = _Parser(
        prog="tipcast",
        description="Tipping-point forecasts from reservoir-learned dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", parents=[common],
                         help="integrate a preset or spec and write series.csv")
    sim.add_argument("--preset", metavar="NAME")
    sim.add_argument("--spec", metavar="JSON", help="resolved spec.json to rerun")
    sim.add_argument("--length", type=int, default=None)
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", parents=[common, analysis],
                         help="sliding-window measures plus a tipping forecast")
    ana.add_argument("--kinds", default=None, metavar="K1,K2",
                     help="measure kinds (DEJ, MFM, MLE)")
    ana.add_argument("--epsilon", type=float, default=None,
                     help="absolute warning margin")
    ana.add_argument("--epsilon-fraction", type=float, default=0.15,
                     help="warning margin as a fraction of the component range")
    ana.add_argument("--t-l", type=float, default=None,
                     help="fit cutoff; measures after it are held out")
    ana.add_argument("--horizon", type=float, default=None,
                     help="how far past the cutoff to extrapolate")
    ana.add_argument("--t-p", type=float, default=None,
                     help="reference transition time, for lead-time reporting")
    ana.add_argument("--im-tol", type=float, default=0.05,
                     help="imaginary-part tolerance for classification")
    ana.set_defaults(func=cmd_analyze)

    ev = sub.add_parser("evaluate", parents=[common, analysis],
                        help="ROC comparison of measures and classical indicators")
    ev.add_argument("--t-p", type=float, default=None,
                    help="reference transition time labeling the windows")
    ev.add_argument("--methods", default="DEJ,variance,lag1_ac,skewness",
                    metavar="M1,M2", help="measure kinds and/or indicators")
    ev.add_argument("--warning-fraction", type=float, default=0.3,
                    help="fraction of pre-transition windows labeled positive")
    ev.add_argument("--detrend-bandwidth", type=float, default=None,
                    help="Gaussian detrend bandwidth (fraction of the window)")
    ev.add_argument("--epsilon-fraction", type=float, default=0.15)
    ev.set_defaults(func=cmd_evaluate)

    lt = sub.add_parser("leadtime", parents=[common, analysis],
                        help="prediction error as a function of the fit cutoff")
    lt.add_argument("--t-p", type=float, default=None,
                    help="reference transition time")
    lt.add_argument("--kind", default=None, help="measure kind (default DEJ)")
    lt.add_argument("--cutoffs", default=None, metavar="T1,T2,...",
                    help="explicit fit cutoffs")
    lt.add_argument("--n-cutoffs", type=int, default=None,
                    help="derive this many cutoffs from the accepted points")
    lt.add_argument("--horizon", type=float, default=None)
    lt.add_argument("--accuracy-bound", type=float, default=None,
                    help="admissible absolute prediction error")
    lt.add_argument("--accuracy-fraction", type=float, default=None,
                    help="admissible error as a fraction of the series duration")
    lt.set_defaults(func=cmd_leadtime)

    pr = sub.add_parser("presets", parents=[common],
                        help="list the bundled scenarios")
    pr.set_defaults(func=cmd_presets)
    return parser


def _configure_threads(threads) -> None:
    if threads is None:
        return
    if threads < 1:
        raise ConfigError("--threads must be at least 1")
    for var in _THREAD_VARS:
        os.environ[var] = str(threads)


def _apply_config_file(ns) -> None:
    from .config import read_config

    recorded = read_config(ns.config)
    command = recorded.pop("command", None)
    if command is not None and command != ns.command:
        raise ConfigError(
            f"{ns.config} was written by {command!r}, not {ns.command!r}"
        )
    for key, value in recorded.items():
        if key in ("out", "config"):
            continue
        setattr(ns, key, value)


def _write_run_config(ns, outdir: str) -> None:
    from .config import dumps_config
    from .ioutil import atomic_write_text

    payload = {
        key: value
        for key, value in vars(ns).items()
        if key not in ("func", "config")
    }
    atomic_write_text(os.path.join(outdir, "config.txt"), dumps_config(payload))


def _emit(outdir: str, name: str, text: str) -> str:
    from .ioutil import atomic_write_text

    path = os.path.join(outdir, name)
    atomic_write_text(path, text)
    return path


def _split_csv(text) -> tuple[str, ...]:
    if not text:
        return ()
    return tuple(part.strip() for part in text.split(",") if part.strip())


# ---------------------------------------------------------------------------
# shared option resolution


def _load_series(ns):
    """Series plus per-preset analysis defaults ({} for external input)."""
    from . import presets, systems

    has_preset = getattr(ns, "preset", None) is not None
    has_input = getattr(ns, "input", None) is not None
    if has_preset == has_input:
        raise ConfigError("exactly one of --preset or --input is required")
    if has_preset:
        spec = presets.paper_preset(
            ns.preset,
            seed=ns.seed if ns.seed is not None else 0,
            length=ns.length,
        )
        return systems.simulate(spec), presets.default_analysis(ns.preset)
    from .timeseries import read_timeseries_csv

    return read_timeseries_csv(ns.input), {}


def _resolve_analysis(ns):
    """Turn flags plus preset defaults into concrete analysis inputs."""
    from dataclasses import replace

    from .pipeline import MeasureOptions, WindowPlan
    from .reservoir import ReservoirConfig, select_hyperparameters

    series, defaults = _load_series(ns)

    mode = ns.mode or defaults.get("mode")
    if mode is None:
        raise ConfigError("--mode is required when analyzing external input")
    plan_defaults = defaults.get("plan", {})
    d = ns.window if ns.window is not None else plan_defaults.get("d")
    k = ns.step if ns.step is not None else plan_defaults.get("k")
    if d is None or k is None:
        raise ConfigError("-d/--window and -k/--step are required for external input")
    plan = WindowPlan(int(d), int(k))

    rc_kwargs = dict(defaults.get("rc", {}))
    for dest, rc_field in _RC_FIELDS.items():
        value = getattr(ns, dest, None)
        if value is not None:
            rc_kwargs[rc_field] = value
    rc = ReservoirConfig(mode=mode, seed=ns.rc_seed, **rc_kwargs)

    grid_table = None
    if getattr(ns, "grid", None):
        with open(ns.grid, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
        if not isinstance(entries, list) or not all(isinstance(e, dict) for e in entries):
            raise ConfigError("--grid must be a JSON list of reservoir override objects")
        try:
            candidates = [replace(rc, **entry) for entry in entries]
        except TypeError as exc:
            raise ConfigError(f"bad grid entry: {exc}") from exc
        rc, grid_table = select_hyperparameters(series, plan.d, plan.k, candidates)

    opt_kwargs = {}
    if "t_min" in defaults.get("mfm", {}):
        opt_kwargs["period_t_min"] = defaults["mfm"]["t_min"]
    if "total_steps" in defaults.get("mle", {}):
        opt_kwargs["mle_total_steps"] = defaults["mle"]["total_steps"]
    if ns.period_t_min is not None:
        opt_kwargs["period_t_min"] = ns.period_t_min
    if ns.mle_steps is not None:
        opt_kwargs["mle_total_steps"] = ns.mle_steps
    if ns.outlier_windows:
        try:
            opt_kwargs["outlier_windows"] = tuple(
                int(part) for part in _split_csv(ns.outlier_windows)
            )
        except ValueError as exc:
            raise ConfigError(f"--outlier-windows: {exc}") from exc
    if ns.no_standardize:
        opt_kwargs["standardize"] = False
    options = MeasureOptions(**opt_kwargs)

    return series, defaults, mode, plan, rc, options, grid_table


def _hyperparams_json(rc, grid_table) -> str:
    from dataclasses import asdict

    payload = {"selected": asdict(rc)}
    if grid_table is not None:
        payload["grid"] = [
            {"config": asdict(cfg), "e_dyn": err} for cfg, err in grid_table
        ]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(ns) -> int:
    from dataclasses import replace

    from . import systems
    from .ioutil import ensure_dir
    from .presets import paper_preset

    has_preset = ns.preset is not None
    has_spec = ns.spec is not None
    if has_preset == has_spec:
        raise ConfigError("exactly one of --preset or --spec is required")
    if has_preset:
        spec = paper_preset(
            ns.preset,
            seed=ns.seed if ns.seed is not None else 0,
            length=ns.length,
        )
    else:
        with open(ns.spec, "r", encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{ns.spec}: {exc}") from exc
        spec = systems.spec_from_dict(payload)
        if ns.seed is not None:
            spec = replace(spec, seed=ns.seed)
        if ns.length is not None:
            spec = replace(spec, length=ns.length)
        spec.validate()

    series = systems.simulate(spec)
    outdir = ensure_dir(ns.out)
    csv_path = _emit(outdir, "series.csv", series.to_csv())
    _emit(
        outdir, "spec.json",
        json.dumps(systems.spec_to_dict(spec), indent=2, sort_keys=True) + "\n",
    )
    _write_run_config(ns, outdir)
    if not ns.no_plots:
        from .plots import save_series_plot

        save_series_plot(
            series, os.path.join(outdir, "series.svg"), heatmap=spec.kind == "pde"
        )
    print(f"wrote {csv_path} ({series.n_samples} rows, {1 + series.n_vars} columns)")
    return 0


def cmd_analyze(ns) -> int:
    from . import pipeline
    from .ioutil import ensure_dir

    series, defaults, mode, plan, rc, options, grid_table = _resolve_analysis(ns)
    kinds = _split_csv(ns.kinds) or tuple(defaults.get("kinds", ())) or ("DEJ",)

    measures = pipeline.analyze_windows(series, plan, rc, kinds, options)
    dej = measures.get("DEJ")
    forecasts = {}
    reports = {}
    for kind in kinds:
        try:
            fc = pipeline.forecast_tipping(
                measures[kind],
                mode,
                t_l=ns.t_l,
                epsilon=ns.epsilon,
                epsilon_fraction=ns.epsilon_fraction,
                horizon=ns.horizon,
                t_p_reference=ns.t_p,
                im_tol=ns.im_tol,
                classify_from=dej,
            )
        except ConfigError as exc:
            # a kind with too few accepted points is an outcome, not a crash
            reports[kind] = {"error": str(exc)}
            continue
        forecasts[kind] = fc
        reports[kind] = fc.to_json_dict()

    outdir = ensure_dir(ns.out)
    _emit(outdir, "measures.csv", pipeline.measures_to_csv(measures))
    _emit(outdir, "forecast.json", json.dumps(reports, indent=2, sort_keys=True) + "\n")
    _emit(outdir, "hyperparams.json", _hyperparams_json(rc, grid_table))
    _write_run_config(ns, outdir)
    if not ns.no_plots:
        from .plots import save_measures_plot

        save_measures_plot(
            measures, mode, os.path.join(outdir, "measures.svg"), forecasts
        )

    for kind in kinds:
        report = reports[kind]
        n_ok = len(measures[kind].accepted())
        if "error" in report:
            print(f"{kind}: {n_ok}/{len(measures[kind])} accepted; {report['error']}")
        else:
            t_hat = report["t_hat_p"]
            print(
                f"{kind}: {n_ok}/{len(measures[kind])} accepted; "
                f"warned={report['warned']} t_hat_p="
                f"{'none' if t_hat is None else format(t_hat, '.6g')} "
                f"class={report['bifurcation_class']}"
            )
    return 0


def cmd_evaluate(ns) -> int:
    from .baselines import compare_methods, comparison_to_csv, roc_to_csv
    from .ioutil import ensure_dir

    if ns.t_p is None:
        raise ConfigError("--t-p is required to label the windows")
    methods = _split_csv(ns.methods)
    if not methods:
        raise ConfigError("--methods must name at least one method")

    series, _, mode, plan, rc, options, _ = _resolve_analysis(ns)
    rows = compare_methods(
        series,
        ns.t_p,
        methods,
        plan,
        mode,
        rc_config=rc,
        options=options,
        warning_fraction=ns.warning_fraction,
        detrend_bandwidth=ns.detrend_bandwidth,
        epsilon_fraction=ns.epsilon_fraction,
    )
    # the lead method defines roc.csv; its failure is the command's failure
    first = rows[0]
    if first.error is not None:
        raise first.error

    outdir = ensure_dir(ns.out)
    _emit(outdir, "roc.csv", roc_to_csv(first.roc))
    _emit(outdir, "comparison.csv", comparison_to_csv(rows))
    _write_run_config(ns, outdir)
    if not ns.no_plots:
        from .plots import save_roc_plot

        save_roc_plot(first.roc, os.path.join(outdir, "roc.svg"))

    for row in rows:
        auc = "n/a" if row.auc is None else format(row.auc, ".4f")
        suffix = f"  ({row.note})" if row.note else ""
        print(f"{row.method:12s} auc={auc}{suffix}")
    return 0


def _leadtime_csv(rows) -> str:
    from .timeseries import format_float as ff

    lines = ["t_l,lead_time,t_hat_p,abs_error,note"]
    for r in rows:
        t_hat = ff(r.t_hat_p) if r.t_hat_p is not None else ""
        err = ff(r.abs_error) if r.abs_error is not None else ""
        lines.append(
            f"{ff(r.t_l)},{ff(r.lead_time)},{t_hat},{err},{r.note.replace(',', ';')}"
        )
    return "\n".join(lines) + "\n"


def cmd_leadtime(ns) -> int:
    import numpy as np

    from .ioutil import ensure_dir
    from .pipeline import MIN_FIT_POINTS, lead_time_curve, run_sliding_analysis

    if ns.t_p is None:
        raise ConfigError("--t-p is required")
    if (ns.cutoffs is None) == (ns.n_cutoffs is None):
        raise ConfigError("supply exactly one of --cutoffs or --n-cutoffs")
    if ns.accuracy_bound is not None and ns.accuracy_fraction is not None:
        raise ConfigError("--accuracy-bound and --accuracy-fraction are exclusive")

    series, defaults, mode, plan, rc, options, _ = _resolve_analysis(ns)
    kinds = defaults.get("kinds", ())
    kind = ns.kind or (kinds[0] if kinds else "DEJ")
    measures = run_sliding_analysis(series, plan, rc, kind, options)

    if ns.cutoffs is not None:
        try:
            cutoffs = [float(part) for part in _split_csv(ns.cutoffs)]
        except ValueError as exc:
            raise ConfigError(f"--cutoffs: {exc}") from exc
    else:
        if ns.n_cutoffs < 1:
            raise ConfigError("--n-cutoffs must be at least 1")
        usable = [p.t_mid for p in measures.accepted() if p.t_mid <= ns.t_p]
        if len(usable) <= MIN_FIT_POINTS:
            raise ConfigError(
                f"only {len(usable)} accepted points before t_p; "
                f"need more than {MIN_FIT_POINTS} to place cutoffs"
            )
        candidates = usable[MIN_FIT_POINTS - 1:]
        picks = np.unique(
            np.linspace(0, len(candidates) - 1, ns.n_cutoffs).round().astype(int)
        )
        cutoffs = [candidates[j] for j in picks]
    if not cutoffs:
        raise ConfigError("no usable cutoffs")

    bound = ns.accuracy_bound
    if ns.accuracy_fraction is not None:
        duration = series.time_at(series.n_samples - 1) - series.time_at(0)
        bound = ns.accuracy_fraction * duration
    rows, max_lead = lead_time_curve(
        measures, mode, ns.t_p, cutoffs, horizon=ns.horizon, accuracy_bound=bound
    )

    outdir = ensure_dir(ns.out)
    _emit(outdir, "leadtime.csv", _leadtime_csv(rows))
    _write_run_config(ns, outdir)
    if not ns.no_plots:
        from .plots import save_leadtime_plot

        save_leadtime_plot(rows, os.path.join(outdir, "leadtime.svg"), max_lead)

    predicted = sum(1 for r in rows if r.t_hat_p is not None)
    print(f"{len(rows)} cutoffs, {predicted} produced a prediction")
    if bound is not None:
        if max_lead is None:
            print("no lead time meets the accuracy bound")
        else:
            print(f"max admissible lead time: {format(max_lead, '.6g')}")
    return 0


def cmd_presets(ns) -> int:
    from .presets import default_analysis, paper_preset, preset_names

    for name in preset_names():
        spec = paper_preset(name)
        defaults = default_analysis(name)
        kinds = ",".join(defaults["kinds"])
        print(
            f"{name:24s} {spec.system_id:20s} T={spec.length:<7d} "
            f"mode={defaults['mode']:<10s} kinds={kinds}"
        )
    return 0


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if getattr(ns, "config", None):
            _apply_config_file(ns)
        _configure_threads(getattr(ns, "threads", None))
        return int(ns.func(ns) or 0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TipcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
