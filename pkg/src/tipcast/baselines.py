"""Classical early-warning indicators and the ROC evaluation protocol.

Variance, lag-1 autocorrelation, and skewness computed over the same
sliding windows as the reservoir measures, plus the labeling and
threshold-sweep machinery that turns any indicator series into an ROC
curve against a known transition time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage
import scipy.stats

from .errors import ConfigError, NumericError, TipcastError
from .pipeline import (
    KINDS,
    MeasurePoint,
    MeasureSeries,
    WindowPlan,
    WarningConfig,
    analyze_windows,
    critical_threshold,
    epsilon_from_range,
    evaluate_warning,
    scalar_component,
)
from .timeseries import TimeSeries, format_float

INDICATORS = ("variance", "lag1_ac", "skewness")
DIRECTIONS = ("higher_is_warning", "closer_to_threshold_is_warning")


def _indicator_value(x: np.ndarray, indicator: str) -> tuple[complex | None, tuple[str, ...]]:
    if indicator == "variance":
        return complex(np.var(x, ddof=1)), ()
    if float(np.std(x)) == 0.0:
        # lag-1 correlation and skewness are undefined on a flat window
        return None, ("degenerate",)
    if indicator == "lag1_ac":
        a = x[:-1]
        b = x[1:]
        sa = float(np.std(a))
        sb = float(np.std(b))
        if sa == 0.0 or sb == 0.0:
            return None, ("degenerate",)
        c = float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))
        return complex(c), ()
    return complex(float(scipy.stats.skew(x, bias=False))), ()


def rolling_ews(
    series: TimeSeries,
    plan: WindowPlan,
    indicator: str,
    detrend_bandwidth: float | None = None,
) -> MeasureSeries:
    """One classical indicator over the sliding-window plan.

    Works on the first coordinate of the series.  detrend_bandwidth, a
    fraction of the window length, turns on within-window Gaussian
    detrending before the indicator is computed.  Flat windows yield
    flagged points for lag-1 autocorrelation and skewness.
    """
    if indicator not in INDICATORS:
        raise ConfigError(f"unknown indicator {indicator!r}; choose from {INDICATORS}")
    min_d = 4 if indicator == "skewness" else 3
    if plan.d < min_d:
        raise ConfigError(f"{indicator} needs window length >= {min_d}")
    n_d = plan.count(series.n_samples)
    if n_d < 1:
        raise ConfigError("plan produces no windows")
    if detrend_bandwidth is not None and not 0 < detrend_bandwidth:
        raise ConfigError("detrend_bandwidth must be positive")
    x_all = series.values[:, 0]
    points = []
    for i in range(n_d):
        lo = i * plan.k
        x = x_all[lo:lo + plan.d]
        if detrend_bandwidth is not None:
            smooth = scipy.ndimage.gaussian_filter1d(
                x, sigma=detrend_bandwidth * plan.d, mode="nearest"
            )
            x = x - smooth
        value, flags = _indicator_value(x, indicator)
        t_mid = 0.5 * (series.time_at(lo) + series.time_at(lo + plan.d))
        points.append(MeasurePoint(i, t_mid, indicator, value, flags))
    return MeasureSeries(indicator, tuple(points))


# ---------------------------------------------------------------------------
# ROC / AUC against a known transition time


@dataclass(frozen=True)
class RocResult:
    """Threshold sweep of an indicator against the pre-transition labels."""

    thresholds: tuple[float, ...]
    fpr: tuple[float, ...]
    tpr: tuple[float, ...]
    auc: float
    t_w: float
    t_p: float
    direction: str


def roc_auc(
    measures: MeasureSeries,
    t_p: float,
    warning_fraction: float = 0.3,
    direction: str = "higher_is_warning",
    mode: str | None = None,
    tau_c: float | None = None,
) -> RocResult:
    """ROC curve from the top-fraction-nearest-transition labeling.

    Accepted points up to t_p are labeled 1 on the latest
    warning_fraction of points and 0 before; scores are the measure
    component itself or, for the threshold-seeking direction, the
    negated distance to tau_c.  Thresholds sweep every unique score;
    the area comes from the trapezoid rule and equals the
    tie-corrected rank statistic.
    """
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}")
    if not 0 < warning_fraction < 1:
        raise ConfigError("warning_fraction must lie in (0, 1)")
    kind = measures.kind
    if kind in KINDS and mode is None:
        raise ConfigError(f"kind {kind} needs the reservoir mode to pick its component")
    pts = [p for p in measures.accepted() if p.t_mid <= t_p]
    m = len(pts)
    if m < 10:
        raise ConfigError(f"need at least 10 accepted points before t_p, have {m}")
    n_warn = int(round(warning_fraction * m))
    if n_warn < 1 or n_warn >= m:
        raise NumericError("labeling is degenerate: one class is empty")

    scalars = np.array([scalar_component(p.value, kind, mode or "discrete") for p in pts])
    if direction == "closer_to_threshold_is_warning":
        if tau_c is None:
            if kind not in KINDS:
                raise ConfigError("closer_to_threshold direction needs tau_c")
            tau_c = critical_threshold(kind, mode)
        scores = -np.abs(scalars - tau_c)
    else:
        scores = scalars
    labels = np.zeros(m, dtype=int)
    labels[m - n_warn:] = 1
    t_w = pts[m - n_warn].t_mid

    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    l_sorted = labels[order]
    P = int(labels.sum())
    N = m - P
    thresholds = [math.inf]
    fpr = [0.0]
    tpr = [0.0]
    tp = fp = 0
    i = 0
    while i < m:
        theta = s_sorted[i]
        j = i
        while j < m and s_sorted[j] == theta:
            if l_sorted[j] == 1:
                tp += 1
            else:
                fp += 1
            j += 1
        thresholds.append(float(theta))
        tpr.append(tp / P)
        fpr.append(fp / N)
        i = j
    auc = float(np.trapezoid(tpr, fpr))
    return RocResult(
        thresholds=tuple(thresholds),
        fpr=tuple(fpr),
        tpr=tuple(tpr),
        auc=auc,
        t_w=t_w,
        t_p=t_p,
        direction=direction,
    )


def roc_to_csv(roc: RocResult) -> str:
    lines = ["threshold,fpr,tpr"]
    for theta, f, t in zip(roc.thresholds, roc.fpr, roc.tpr):
        lines.append(f"{format_float(theta)},{format_float(f)},{format_float(t)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# side-by-side method comparison


@dataclass(frozen=True)
class MethodRow:
    method: str
    auc: float | None
    warning_onset: float | None
    note: str = ""
    # kept for callers that need the curve or the failure type; the CSV
    # rendering ignores both
    roc: RocResult | None = field(default=None, repr=False, compare=False)
    error: Exception | None = field(default=None, repr=False, compare=False)


def compare_methods(
    series: TimeSeries,
    t_p: float,
    methods,
    plan: WindowPlan,
    mode: str,
    rc_config=None,
    options=None,
    warning_fraction: float = 0.3,
    detrend_bandwidth: float | None = None,
    epsilon_fraction: float = 0.15,
) -> list[MethodRow]:
    """AUC and warning onset for each requested method on shared windows.

    Reservoir measures share one training pass; classical indicators
    run per window on the raw series.  Indicator rows carry no warning
    onset since no margin rule applies to them; per-method failures
    become annotated rows instead of aborting the table.
    """
    methods = list(methods)
    if not methods:
        raise ConfigError("no methods requested")
    rc_kinds = [m for m in methods if m in KINDS]
    rc_series: dict[str, MeasureSeries] = {}
    rc_error: TipcastError | None = None
    if rc_kinds:
        if rc_config is None:
            raise ConfigError("reservoir methods need an rc_config")
        try:
            rc_series = analyze_windows(series, plan, rc_config, rc_kinds, options)
        except TipcastError as exc:
            rc_error = exc

    rows: list[MethodRow] = []
    for method in methods:
        try:
            if method in KINDS:
                if rc_error is not None:
                    raise rc_error
                meas = rc_series[method]
                roc = roc_auc(
                    meas, t_p, warning_fraction,
                    direction="closer_to_threshold_is_warning", mode=mode,
                )
                eps = epsilon_from_range(meas, mode, epsilon_fraction)
                _, onset = evaluate_warning(meas, WarningConfig(eps, method, mode))
                rows.append(MethodRow(method, roc.auc, onset, roc=roc))
            elif method in INDICATORS:
                meas = rolling_ews(series, plan, method, detrend_bandwidth)
                roc = roc_auc(meas, t_p, warning_fraction, direction="higher_is_warning")
                rows.append(
                    MethodRow(method, roc.auc, None, note="no margin rule; AUC only", roc=roc)
                )
            else:
                raise ConfigError(f"unknown method {method!r}")
        except TipcastError as exc:
            rows.append(MethodRow(method, None, None, note=str(exc), error=exc))
    return rows


def comparison_to_csv(rows) -> str:
    lines = ["method,auc,warning_onset,notes"]
    for r in rows:
        auc = format_float(r.auc) if r.auc is not None else ""
        onset = format_float(r.warning_onset) if r.warning_onset is not None else ""
        note = r.note.replace(",", ";")
        lines.append(f"{r.method},{auc},{onset},{note}")
    return "\n".join(lines) + "\n"
