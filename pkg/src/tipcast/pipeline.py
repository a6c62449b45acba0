"""Sliding-window analysis and tipping-time extrapolation.

The driver slides a training window across the series, retrains the
readout of one frozen reservoir per window, closes the loop, and
extracts the requested stability measures.  Measure trends against
window midpoint time are fit with a low-order polynomial and pushed
forward to the critical threshold of each measure, giving a predicted
transition time well before the transition shows in the raw data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .measures import compute_dej, compute_mfm, compute_mle
from .reservoir import (
    ReservoirConfig,
    build_reservoir,
    close_loop,
    drive,
    train_readout,
    window_affine,
)
from .timeseries import TimeSeries, format_float

KINDS = ("DEJ", "MFM", "MLE")
BASELINE_KINDS = ("variance", "lag1_ac", "skewness")

# vocabulary of excluding quality flags; numeric_error marks windows
# whose training or measure computation failed outright
FLAG_NAMES = ("degenerate", "no_period", "newton_failed", "skipped_outlier", "numeric_error")


def scalar_component(value: complex, kind: str, mode: str) -> float:
    """Scalar used for trends, warnings, and scoring, per measure kind.

    DEJ tracks its real part in continuous mode and its modulus in
    discrete mode; MFM always its modulus; MLE is already real.
    """
    if kind == "DEJ":
        return value.real if mode == "continuous" else abs(value)
    if kind == "MFM":
        return abs(value)
    return value.real


def critical_threshold(kind: str, mode: str) -> float:
    """Threshold the scalar component crosses at the transition."""
    if kind == "DEJ":
        return 0.0 if mode == "continuous" else 1.0
    if kind == "MFM":
        return 1.0
    if kind == "MLE":
        return 0.0
    raise ConfigError(f"no critical threshold for kind {kind!r}")


@dataclass(frozen=True)
class WindowPlan:
    """Sliding-window geometry: length d, slide step k, both in samples."""

    d: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.d:
            raise ConfigError(f"need 1 <= k <= d, got d={self.d}, k={self.k}")

    def count(self, n_samples: int) -> int:
        if self.d > n_samples:
            raise ConfigError(f"window d={self.d} exceeds series length {n_samples}")
        return (n_samples - self.d) // self.k


@dataclass(frozen=True)
class MeasurePoint:
    index: int
    t_mid: float
    kind: str
    value: complex | None
    flags: tuple[str, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.value is not None and not self.flags


@dataclass(frozen=True)
class MeasureSeries:
    """One measure kind across all windows, flagged points included."""

    kind: str
    points: tuple[MeasurePoint, ...]

    def accepted(self) -> list[MeasurePoint]:
        return [p for p in self.points if p.accepted]

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class MeasureOptions:
    """Per-measure knobs for the sliding analysis."""

    outlier_windows: tuple[int, ...] = ()
    standardize: bool = True
    newton_tol: float = 1e-10
    newton_max_iter: int = 100
    period_beta: float = 0.95
    period_t_min: int = 10
    mfm_settle: int | None = None
    mfm_detect: int | None = None
    mle_total_steps: int = 10000
    mle_k: int = 1
    mle_reorth_interval: int = 10
    mle_burn_in_fraction: float = 0.2
    mle_tol: float = 0.02


def _window_mid(series: TimeSeries, lo: int, d: int) -> float:
    return 0.5 * (series.time_at(lo) + series.time_at(lo + d))


def analyze_windows(
    series: TimeSeries,
    plan: WindowPlan,
    rc_config: ReservoirConfig,
    kinds,
    options: MeasureOptions | None = None,
) -> dict[str, MeasureSeries]:
    """Train per window, close the loop, extract every requested measure.

    One reservoir is built from rc_config and reused across windows;
    only the readout is retrained.  Windows listed in
    options.outlier_windows are skipped and marked, and windows whose
    computation fails are flagged rather than fatal.  Raises when no
    window yields any accepted measure at all.
    """
    options = options or MeasureOptions()
    kinds = [kinds] if isinstance(kinds, str) else list(kinds)
    if not kinds:
        raise ConfigError("no measure kinds requested")
    for kind in kinds:
        if kind not in KINDS:
            raise ConfigError(f"unknown measure kind {kind!r}; choose from {KINDS}")
    if rc_config.mode == "continuous" and series.dt is None:
        raise ConfigError("continuous mode needs a sampled time axis (dt)")
    n_d = plan.count(series.n_samples)
    if n_d < 1:
        raise ConfigError("plan produces no windows")

    model = build_reservoir(rc_config, series.n_vars)
    d, k = plan.d, plan.k
    settle = options.mfm_settle if options.mfm_settle is not None else d // 2
    detect = options.mfm_detect if options.mfm_detect is not None else d
    dt = series.dt
    outliers = set(options.outlier_windows)

    collected: dict[str, list[MeasurePoint]] = {kind: [] for kind in kinds}
    for i in range(n_d):
        lo = i * k
        t_mid = _window_mid(series, lo, d)
        if i in outliers:
            for kind in kinds:
                collected[kind].append(
                    MeasurePoint(i, t_mid, kind, None, ("skipped_outlier",))
                )
            continue
        win = series.window(lo, lo + d)
        try:
            eff = window_affine(model, win.values) if options.standardize else model
            hidden = drive(eff, win)
            readout = train_readout(
                hidden, win, rc_config.ridge_lambda, rc_config.washout_fraction
            )
            auto = close_loop(eff, readout)
        except NumericError:
            for kind in kinds:
                collected[kind].append(
                    MeasurePoint(i, t_mid, kind, None, ("numeric_error",))
                )
            continue

        for kind in kinds:
            collected[kind].append(
                _measure_window(
                    kind, i, t_mid, auto, readout, hidden, settle, detect, dt, options
                )
            )

    result = {kind: MeasureSeries(kind, tuple(collected[kind])) for kind in kinds}
    if all(not series_.accepted() for series_ in result.values()):
        raise NumericError("no window produced an accepted measure")
    return result


def _measure_window(kind, i, t_mid, auto, readout, hidden, settle, detect, dt, options):
    flags: list[str] = []
    value: complex | None = None
    try:
        if kind == "DEJ":
            res = compute_dej(
                auto, hidden[-1], readout.W_out,
                tol=options.newton_tol, max_iter=options.newton_max_iter,
            )
            if not res.newton.converged:
                # a second start often rescues windows whose final state
                # sits outside the equilibrium's Newton basin
                retry = compute_dej(
                    auto, hidden.mean(axis=0), readout.W_out,
                    tol=options.newton_tol, max_iter=options.newton_max_iter,
                )
                if retry.newton.converged:
                    res = retry
                else:
                    flags.append("newton_failed")
            value = res.value
            if res.degenerate:
                flags.append("degenerate")
        elif kind == "MFM":
            res = compute_mfm(
                auto, readout, hidden[-1], settle, detect, dt=dt,
                beta=options.period_beta, t_min=options.period_t_min,
            )
            value = res.value
            if res.no_period:
                flags.append("no_period")
            elif res.degenerate:
                flags.append("degenerate")
        else:
            res = compute_mle(
                auto, hidden[-1], options.mle_total_steps, dt=dt,
                k=options.mle_k,
                reorth_interval=options.mle_reorth_interval,
                burn_in_fraction=options.mle_burn_in_fraction,
                tol=options.mle_tol,
            )
            value = complex(res.value)
    except NumericError:
        return MeasurePoint(i, t_mid, kind, None, ("numeric_error",))
    return MeasurePoint(i, t_mid, kind, value, tuple(flags))


def run_sliding_analysis(
    series: TimeSeries,
    plan: WindowPlan,
    rc_config: ReservoirConfig,
    kind: str,
    options: MeasureOptions | None = None,
) -> MeasureSeries:
    """Single-kind sliding analysis; errors if no window is accepted."""
    result = analyze_windows(series, plan, rc_config, kind, options)[kind]
    if not result.accepted():
        raise NumericError(f"no accepted {kind} values in any window")
    return result


# ---------------------------------------------------------------------------
# trend fitting and extrapolation

MIN_FIT_POINTS = 8


@dataclass(frozen=True)
class TrendModel:
    """Low-order polynomial fit of a measure component against time."""

    coefficients: tuple[float, ...]
    order: int
    t_first: float
    t_l: float
    rms_residual: float
    poly: np.polynomial.Polynomial = field(repr=False, compare=False)

    def __call__(self, t):
        return self.poly(t)


def _aicc(n: int, rss: float, n_params: int) -> float:
    if n - n_params - 1 <= 0:
        return math.inf
    if rss <= 0:
        return -math.inf
    return (
        n * math.log(rss / n)
        + 2 * n_params
        + 2 * n_params * (n_params + 1) / (n - n_params - 1)
    )


def fit_trend(
    measures: MeasureSeries,
    t_l: float | None = None,
    component: str = "real",
) -> TrendModel:
    """Ordinary least squares of the chosen component against t_mid.

    Uses accepted points at or before t_l (all accepted points when t_l
    is None) and picks polynomial order from {1, 2, 3} by corrected
    AIC.  Fewer than 8 usable points is an error suggesting a later
    cutoff.
    """
    if component not in ("real", "modulus"):
        raise ConfigError("component must be 'real' or 'modulus'")
    pts = measures.accepted()
    if t_l is not None:
        pts = [p for p in pts if p.t_mid <= t_l]
    if len(pts) < MIN_FIT_POINTS:
        raise ConfigError(
            f"only {len(pts)} accepted points at or before the cutoff;"
            f" need {MIN_FIT_POINTS} (move t_l later or shrink the slide step)"
        )
    t = np.array([p.t_mid for p in pts])
    y = np.array([
        p.value.real if component == "real" else abs(p.value) for p in pts
    ])
    n = len(t)
    best = None
    for order in (1, 2, 3):
        poly = np.polynomial.Polynomial.fit(t, y, order)
        rss = float(np.sum((poly(t) - y) ** 2))
        score = _aicc(n, rss, order + 1)
        if best is None or score < best[0]:
            best = (score, order, poly, rss)
    _, order, poly, rss = best
    return TrendModel(
        coefficients=tuple(float(c) for c in poly.convert().coef),
        order=order,
        t_first=float(t[0]),
        t_l=float(t_l) if t_l is not None else float(t[-1]),
        rms_residual=math.sqrt(rss / n),
        poly=poly,
    )


def _bisect_root(f, a: float, b: float) -> float:
    fa = f(a)
    if fa == 0.0:
        return a
    for _ in range(200):
        m = 0.5 * (a + b)
        if b - a <= 1e-13 * max(1.0, abs(m)):
            return m
        fm = f(m)
        if fm == 0.0:
            return m
        if (fa < 0) != (fm < 0):
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def _first_crossing(f, lo: float, hi: float, n_grid: int = 4096) -> float | None:
    grid = np.linspace(lo, hi, n_grid)
    vals = f(grid)
    signs = np.sign(vals)
    for j in range(len(grid) - 1):
        if signs[j] == 0.0:
            return float(grid[j])
        if signs[j] * signs[j + 1] < 0:
            return _bisect_root(f, float(grid[j]), float(grid[j + 1]))
    if signs[-1] == 0.0:
        return float(grid[-1])
    return None


def extrapolate_to_threshold(
    trend: TrendModel, tau_c: float, horizon: float
) -> float | None:
    """First time the fitted trend meets tau_c.

    If the trend already crosses inside its fit range that crossing is
    returned; otherwise the polynomial is pushed forward and the
    smallest root in (t_l, t_l + horizon] is located by bracketing and
    bisection.  None means no crossing within the horizon.
    """
    if horizon <= 0:
        raise ConfigError("horizon must be positive")

    def f(t):
        return trend.poly(t) - tau_c

    if trend.t_l > trend.t_first:
        inside = _first_crossing(f, trend.t_first, trend.t_l)
        if inside is not None:
            return inside
    return _first_crossing(f, np.nextafter(trend.t_l, math.inf), trend.t_l + horizon)


# ---------------------------------------------------------------------------
# warning logic and classification


@dataclass(frozen=True)
class WarningConfig:
    """Margin-based early-warning rule for one measure kind."""

    epsilon: float
    kind: str
    mode: str

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}")

    def fires(self, value: complex) -> bool:
        s = scalar_component(value, self.kind, self.mode)
        if self.kind == "DEJ" and self.mode == "continuous":
            return s > -self.epsilon
        if self.kind in ("DEJ", "MFM"):
            return s > 1.0 - self.epsilon
        return s < self.epsilon


def epsilon_from_range(
    measures: MeasureSeries, mode: str, fraction: float = 0.15
) -> float:
    """Warning margin as a fraction of the observed component range."""
    pts = measures.accepted()
    if not pts:
        raise ConfigError("no accepted points to set a margin from")
    scalars = [scalar_component(p.value, measures.kind, mode) for p in pts]
    spread = max(scalars) - min(scalars)
    return fraction * spread if spread > 0 else 1e-9


def evaluate_warning(
    measures: MeasureSeries, config: WarningConfig
) -> tuple[bool, float | None]:
    """First accepted point where the margin rule fires."""
    pts = measures.accepted()
    if not pts:
        raise ConfigError("no accepted measures to evaluate")
    for p in pts:
        if config.fires(p.value):
            return True, p.t_mid
    return False, None


def classify_bifurcation(
    measures: MeasureSeries, mode: str, im_tol: float = 0.05
) -> str:
    """Read the bifurcation type off the final DEJ trend segment.

    Uses medians over the last quarter (at least 5) of accepted points.
    A clearly nonzero imaginary part means a rotating instability; on
    the real axis the discrete map distinguishes flip (negative) from
    saddle-node-like (positive) approaches.
    """
    if measures.kind != "DEJ":
        raise ConfigError("classification reads DEJ measures")
    pts = measures.accepted()
    if len(pts) < 5:
        raise ConfigError("need at least 5 accepted DEJ points to classify")
    seg = pts[-max(5, math.ceil(len(pts) / 4)):]
    med_re = float(np.median([p.value.real for p in seg]))
    med_im = float(np.median([abs(p.value.imag) for p in seg]))
    if med_im > im_tol:
        return "hopf"
    if mode == "continuous":
        return "fold_or_pitchfork"
    if med_re < 0:
        return "period_doubling"
    if med_re > 0:
        return "fold_or_pitchfork"
    return "unclassified"


# ---------------------------------------------------------------------------
# the composed forecast


@dataclass(frozen=True)
class TippingForecast:
    """Everything the extrapolation concluded, JSON-serializable."""

    kind: str
    mode: str
    component: str
    tau_c: float
    epsilon: float
    t_l: float
    horizon: float
    t_hat_p: float | None
    warned: bool
    warning_onset: float | None
    lead_time: float | None
    bifurcation_class: str
    trend: TrendModel

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mode": self.mode,
            "component": self.component,
            "tau_c": self.tau_c,
            "epsilon": self.epsilon,
            "t_l": self.t_l,
            "horizon": self.horizon,
            "t_hat_p": self.t_hat_p,
            "warned": self.warned,
            "warning_onset": self.warning_onset,
            "lead_time": self.lead_time,
            "bifurcation_class": self.bifurcation_class,
            "trend": {
                "order": self.trend.order,
                "coefficients": list(self.trend.coefficients),
                "fit_range": [self.trend.t_first, self.trend.t_l],
                "rms_residual": self.trend.rms_residual,
            },
        }


def forecast_tipping(
    measures: MeasureSeries,
    mode: str,
    t_l: float | None = None,
    epsilon: float | None = None,
    epsilon_fraction: float = 0.15,
    horizon: float | None = None,
    t_p_reference: float | None = None,
    im_tol: float = 0.05,
    classify_from: MeasureSeries | None = None,
) -> TippingForecast:
    """Fit, extrapolate, and wrap the warning state of one measure series.

    The horizon defaults to twice the time span of the measure record.
    Classification needs DEJ values; a non-DEJ forecast can borrow them
    through classify_from, otherwise it reports unclassified.
    """
    kind = measures.kind
    component = "real" if (
        kind == "MLE" or (kind == "DEJ" and mode == "continuous")
    ) else "modulus"
    tau_c = critical_threshold(kind, mode)
    trend = fit_trend(measures, t_l=t_l, component=component)
    pts = [p for p in measures.accepted() if p.t_mid <= trend.t_l]
    if horizon is None:
        span = measures.points[-1].t_mid - measures.points[0].t_mid
        horizon = 2.0 * span if span > 0 else 1.0
    t_hat_p = extrapolate_to_threshold(trend, tau_c, horizon)

    cut = MeasureSeries(kind, tuple(pts))
    if epsilon is None:
        epsilon = epsilon_from_range(cut, mode, epsilon_fraction)
    warned, onset = evaluate_warning(cut, WarningConfig(epsilon, kind, mode))

    source = measures if kind == "DEJ" else classify_from
    if source is not None and source.kind == "DEJ":
        try:
            visible = MeasureSeries(
                "DEJ", tuple(p for p in source.points if p.t_mid <= trend.t_l)
            )
            bif = classify_bifurcation(visible, mode, im_tol=im_tol)
        except ConfigError:
            bif = "unclassified"
    else:
        bif = "unclassified"

    lead = t_p_reference - trend.t_l if t_p_reference is not None else None
    return TippingForecast(
        kind=kind,
        mode=mode,
        component=component,
        tau_c=tau_c,
        epsilon=float(epsilon),
        t_l=trend.t_l,
        horizon=float(horizon),
        t_hat_p=t_hat_p,
        warned=warned,
        warning_onset=onset,
        lead_time=lead,
        bifurcation_class=bif,
        trend=trend,
    )


# ---------------------------------------------------------------------------
# lead-time sweep


@dataclass(frozen=True)
class LeadTimeRow:
    t_l: float
    lead_time: float
    t_hat_p: float | None
    abs_error: float | None
    note: str = ""


def lead_time_curve(
    measures: MeasureSeries,
    mode: str,
    t_p_reference: float,
    cutoffs,
    horizon: float | None = None,
    accuracy_bound: float | None = None,
) -> tuple[list[LeadTimeRow], float | None]:
    """Prediction error as a function of how early the fit stops.

    For every cutoff t_l the trend is refit on data up to t_l and
    extrapolated; rows record the lead time t_p_reference - t_l and the
    absolute prediction error.  Cutoffs with too few points are kept as
    annotated rows.  The second return value is the largest lead time
    whose error stays within accuracy_bound, None when no row
    qualifies or no bound is given.
    """
    last = max((p.t_mid for p in measures.accepted()), default=-math.inf)
    rows: list[LeadTimeRow] = []
    for t_l in sorted(float(c) for c in cutoffs):
        lead = t_p_reference - t_l
        if t_l > last:
            rows.append(
                LeadTimeRow(t_l, lead, None, None, note="cutoff beyond the measure record")
            )
            continue
        try:
            fc = forecast_tipping(
                measures, mode, t_l=t_l, horizon=horizon, t_p_reference=t_p_reference
            )
        except ConfigError as exc:
            rows.append(LeadTimeRow(t_l, lead, None, None, note=str(exc)))
            continue
        if fc.t_hat_p is None:
            rows.append(LeadTimeRow(t_l, lead, None, None, note="no crossing in horizon"))
            continue
        rows.append(LeadTimeRow(t_l, lead, fc.t_hat_p, abs(t_p_reference - fc.t_hat_p)))
    best = None
    if accuracy_bound is not None:
        ok = [r.lead_time for r in rows if r.abs_error is not None and r.abs_error <= accuracy_bound]
        best = max(ok) if ok else None
    return rows, best


# ---------------------------------------------------------------------------
# measure CSV round trip

MEASURES_HEADER = "t_mid,kind,re,im,modulus,quality_flags"


def measures_to_csv(series_by_kind) -> str:
    """Render one or many measure series to the documented CSV layout."""
    if isinstance(series_by_kind, MeasureSeries):
        series_list = [series_by_kind]
    elif isinstance(series_by_kind, dict):
        series_list = list(series_by_kind.values())
    else:
        series_list = list(series_by_kind)
    lines = [MEASURES_HEADER]
    for series in series_list:
        for p in series.points:
            if p.value is None:
                re = im = mod = ""
            else:
                re = format_float(p.value.real)
                im = format_float(p.value.imag)
                mod = format_float(abs(p.value))
            lines.append(
                f"{format_float(p.t_mid)},{p.kind},{re},{im},{mod},{'|'.join(p.flags)}"
            )
    return "\n".join(lines) + "\n"


def parse_measures_csv(text: str) -> dict[str, MeasureSeries]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != MEASURES_HEADER:
        raise ConfigError(f"measure CSV must start with header {MEASURES_HEADER!r}")
    collected: dict[str, list[MeasurePoint]] = {}
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 6:
            raise ConfigError(f"malformed measure row: {ln!r}")
        t_mid, kind, re, im, _mod, flags_txt = cells
        value = complex(float(re), float(im)) if re else None
        flags = tuple(f for f in flags_txt.split("|") if f)
        pts = collected.setdefault(kind, [])
        pts.append(MeasurePoint(len(pts), float(t_mid), kind, value, flags))
    return {kind: MeasureSeries(kind, tuple(pts)) for kind, pts in collected.items()}
