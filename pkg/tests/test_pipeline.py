"""Sliding-window driver, trend extrapolation, warning and lead-time logic."""

import json
import math

import numpy as np
import pytest

from tipcast import (
    ConfigError,
    MeasureOptions,
    MeasurePoint,
    MeasureSeries,
    NumericError,
    ReservoirConfig,
    WarningConfig,
    WindowPlan,
    analyze_windows,
    classify_bifurcation,
    critical_threshold,
    epsilon_from_range,
    evaluate_warning,
    extrapolate_to_threshold,
    fit_trend,
    forecast_tipping,
    lead_time_curve,
    measures_to_csv,
    parse_measures_csv,
    run_sliding_analysis,
    scalar_component,
)
from tipcast.pipeline import MEASURES_HEADER, MIN_FIT_POINTS
from tipcast.systems import ParameterSchedule, SystemSpec, simulate
from tipcast.timeseries import TimeSeries


def mk_series(kind, values, times=None, flags_at=None):
    """Hand-made MeasureSeries; flags_at maps index -> flag tuple."""
    flags_at = flags_at or {}
    pts = []
    for i, v in enumerate(values):
        t = float(times[i]) if times is not None else float(i)
        val = None if v is None else complex(v)
        pts.append(MeasurePoint(i, t, kind, val, tuple(flags_at.get(i, ()))))
    return MeasureSeries(kind, tuple(pts))


# ---------------------------------------------------------------------------
# component and threshold tables


def test_scalar_component_table():
    v = complex(-0.3, 0.4)
    assert scalar_component(v, "DEJ", "continuous") == -0.3
    assert scalar_component(v, "DEJ", "discrete") == pytest.approx(0.5)
    assert scalar_component(v, "MFM", "continuous") == pytest.approx(0.5)
    assert scalar_component(v, "MFM", "discrete") == pytest.approx(0.5)
    assert scalar_component(complex(0.7, 0.0), "MLE", "discrete") == 0.7


def test_critical_threshold_table():
    assert critical_threshold("DEJ", "continuous") == 0.0
    assert critical_threshold("DEJ", "discrete") == 1.0
    assert critical_threshold("MFM", "continuous") == 1.0
    assert critical_threshold("MFM", "discrete") == 1.0
    assert critical_threshold("MLE", "continuous") == 0.0
    with pytest.raises(ConfigError):
        critical_threshold("variance", "discrete")


# ---------------------------------------------------------------------------
# window plan


def test_window_plan_counts():
    plan = WindowPlan(d=40, k=5)
    assert plan.count(50) == 2
    assert plan.count(45) == 1
    assert plan.count(44) == 0
    assert plan.count(40) == 0
    with pytest.raises(ConfigError):
        plan.count(39)
    with pytest.raises(ConfigError):
        WindowPlan(d=10, k=11)
    with pytest.raises(ConfigError):
        WindowPlan(d=10, k=0)


def test_window_midpoints_are_exact():
    vals = np.zeros((60, 1))
    indexed = TimeSeries(values=vals, dt=None)
    timed = TimeSeries(values=vals, dt=0.25, start=2.0)
    d, k = 20, 10
    for i in range(4):
        lo = i * k
        assert 0.5 * (indexed.time_at(lo) + indexed.time_at(lo + d)) == lo + d / 2
        expect = 0.5 * ((2.0 + 0.25 * lo) + (2.0 + 0.25 * (lo + d)))
        assert 0.5 * (timed.time_at(lo) + timed.time_at(lo + d)) == expect


# ---------------------------------------------------------------------------
# sliding analysis on a constant-parameter map


LOGISTIC_RC = ReservoirConfig(n=50, spectral_radius=0.3, density=0.1,
                              input_scale=0.1, bias_scale=0.1, gamma=1.0,
                              ridge_lambda=1e-2, seed=0)


def logistic_series(p=2.8, length=4000, seed=3, omega=0.01):
    spec = SystemSpec("logistic_map", ParameterSchedule.constant(p), length,
                      noise_intensity=omega, seed=seed, transient=500)
    return simulate(spec)


def test_analyze_windows_recovers_logistic_dej():
    # fixed point of the logistic map at p = 2.8 has multiplier 2 - p
    ser = logistic_series()
    plan = WindowPlan(d=1000, k=500)
    out = analyze_windows(ser, plan, LOGISTIC_RC, ["DEJ"],
                          MeasureOptions(period_t_min=2))
    dej = out["DEJ"]
    assert len(dej) == plan.count(ser.n_samples)
    assert [p.index for p in dej.points] == list(range(len(dej)))
    vals = [p.value for p in dej.accepted()]
    assert len(vals) >= 5
    med = float(np.median([v.real for v in vals]))
    assert med == pytest.approx(-0.8, abs=0.05)


def test_analyze_windows_flags_outliers():
    ser = logistic_series()
    out = analyze_windows(ser, WindowPlan(d=1000, k=500), LOGISTIC_RC, "DEJ",
                          MeasureOptions(period_t_min=2, outlier_windows=(1,)))
    pt = out["DEJ"].points[1]
    assert pt.flags == ("skipped_outlier",)
    assert pt.value is None
    assert not pt.accepted
    assert out["DEJ"].points[0].accepted


def test_analyze_windows_mixed_kinds():
    # at a fixed point the forecast settles, so MFM finds no cycle in
    # most windows while DEJ stays usable
    ser = logistic_series()
    out = analyze_windows(ser, WindowPlan(d=1000, k=500), LOGISTIC_RC,
                          ["DEJ", "MFM"], MeasureOptions(period_t_min=2))
    assert set(out) == {"DEJ", "MFM"}
    assert len(out["DEJ"].accepted()) >= 5
    no_period = [p for p in out["MFM"].points if "no_period" in p.flags]
    assert len(no_period) >= 3


def test_analyze_windows_validation():
    ser = logistic_series(length=1500)
    plan = WindowPlan(d=1000, k=500)
    with pytest.raises(ConfigError):
        analyze_windows(ser, plan, LOGISTIC_RC, [])
    with pytest.raises(ConfigError):
        analyze_windows(ser, plan, LOGISTIC_RC, ["variance"])
    with pytest.raises(ConfigError):
        analyze_windows(ser, WindowPlan(d=1400, k=1400), LOGISTIC_RC, "DEJ")
    cont = ReservoirConfig(mode="continuous")
    with pytest.raises(ConfigError):
        analyze_windows(ser, plan, cont, "DEJ")  # map series has no dt


def test_analyze_windows_raises_when_nothing_accepted():
    ser = logistic_series()
    plan = WindowPlan(d=1000, k=500)
    n_d = plan.count(ser.n_samples)
    everything = tuple(range(n_d))
    with pytest.raises(NumericError):
        analyze_windows(ser, plan, LOGISTIC_RC, ["DEJ", "MFM"],
                        MeasureOptions(outlier_windows=everything))
    with pytest.raises(NumericError):
        run_sliding_analysis(ser, plan, LOGISTIC_RC, "DEJ",
                             MeasureOptions(outlier_windows=everything))


def test_run_sliding_analysis_single_kind():
    ser = logistic_series()
    res = run_sliding_analysis(ser, WindowPlan(d=1000, k=500), LOGISTIC_RC,
                               "DEJ", MeasureOptions(period_t_min=2))
    assert res.kind == "DEJ"
    assert res.accepted()


# ---------------------------------------------------------------------------
# trend fitting


def test_fit_trend_orders_by_aicc():
    rng = np.random.default_rng(17)
    t = np.arange(20, dtype=float)
    noisy_lin = 2.0 - 0.1 * t + 0.05 * rng.normal(size=20)
    assert fit_trend(mk_series("MLE", noisy_lin)).order == 1
    noisy_quad = 0.02 * (t - 5) ** 2 - 1.0 + 0.05 * rng.normal(size=20)
    assert fit_trend(mk_series("MLE", noisy_quad)).order == 2


def test_fit_trend_exact_fit_and_rss_zero():
    t = np.arange(12, dtype=float)
    exact = 0.01 * t**2 - 0.5
    tr = fit_trend(mk_series("MLE", exact))
    # machine-noise residuals make AICc prefer either exact order
    assert tr.order in (2, 3)
    assert np.max(np.abs(tr(t) - exact)) < 1e-10
    assert tr.coefficients[0] == pytest.approx(-0.5, abs=1e-9)
    assert tr.t_first == 0.0
    assert tr.t_l == 11.0

    flat = fit_trend(mk_series("MLE", np.zeros(12)))
    assert flat.order == 1
    assert flat.rms_residual == 0.0


def test_fit_trend_modulus_component():
    t = np.arange(10, dtype=float)
    values = [(0.5 + 0.04 * ti) * np.exp(1j * 0.3) for ti in t]
    tr = fit_trend(mk_series("MFM", values), component="modulus")
    assert tr(np.array([12.5]))[0] == pytest.approx(1.0, abs=1e-9)


def test_fit_trend_skips_flagged_and_cut_points():
    t = np.arange(13, dtype=float)
    y = list(0.1 * t - 1.0)
    y[5] = 50.0  # wrecking value, excluded by its flag
    ser = mk_series("MLE", y, flags_at={5: ("numeric_error",)})
    tr = fit_trend(ser)
    assert tr.rms_residual < 1e-10
    cut = fit_trend(ser, t_l=9.0)
    assert cut.t_l == 9.0
    with pytest.raises(ConfigError):
        fit_trend(ser, t_l=6.0)  # 6 usable points only
    with pytest.raises(ConfigError):
        fit_trend(ser, component="imag")


def test_min_fit_points_is_eight():
    assert MIN_FIT_POINTS == 8
    ser = mk_series("MLE", np.zeros(7))
    with pytest.raises(ConfigError):
        fit_trend(ser)
    assert fit_trend(mk_series("MLE", np.zeros(8))).order == 1


# ---------------------------------------------------------------------------
# extrapolation


def test_extrapolate_linear_forward():
    t = np.arange(8, dtype=float)
    tr = fit_trend(mk_series("MLE", 0.1 * t - 1.0))
    hit = extrapolate_to_threshold(tr, 0.0, horizon=20.0)
    assert hit == pytest.approx(10.0, abs=1e-6)


def test_extrapolate_prefers_in_range_crossing():
    t = np.arange(8, dtype=float)
    tr = fit_trend(mk_series("MLE", 0.1 * t - 0.4))
    hit = extrapolate_to_threshold(tr, 0.0, horizon=20.0)
    assert hit == pytest.approx(4.0, abs=1e-6)


def test_extrapolate_first_of_multiple_roots():
    t = np.arange(9, dtype=float)
    y = (t - 10.0) * (t - 12.0) / 100.0
    tr = fit_trend(mk_series("MLE", y))
    hit = extrapolate_to_threshold(tr, 0.0, horizon=30.0)
    assert hit == pytest.approx(10.0, abs=1e-5)


def test_extrapolate_no_crossing_returns_none():
    t = np.arange(8, dtype=float)
    tr = fit_trend(mk_series("MLE", 0.001 * t - 1.0))
    assert extrapolate_to_threshold(tr, 0.0, horizon=10.0) is None
    with pytest.raises(ConfigError):
        extrapolate_to_threshold(tr, 0.0, horizon=0.0)


# ---------------------------------------------------------------------------
# warnings


def test_epsilon_from_range():
    ser = mk_series("DEJ", [-1.0, -0.6, -0.2])
    assert epsilon_from_range(ser, "continuous") == pytest.approx(0.15 * 0.8)
    assert epsilon_from_range(ser, "continuous", fraction=0.5) == pytest.approx(0.4)
    flat = mk_series("DEJ", [-0.5, -0.5])
    assert epsilon_from_range(flat, "continuous") == 1e-9
    with pytest.raises(ConfigError):
        epsilon_from_range(mk_series("DEJ", [None, None]), "continuous")


def test_warning_rules_per_kind():
    dej_c = WarningConfig(0.1, "DEJ", "continuous")
    assert dej_c.fires(complex(-0.05, 0.0))
    assert not dej_c.fires(complex(-0.2, 0.0))
    dej_d = WarningConfig(0.1, "DEJ", "discrete")
    assert dej_d.fires(complex(-0.95, 0.0))  # modulus 0.95 > 0.9
    assert not dej_d.fires(complex(0.5, 0.0))
    mfm = WarningConfig(0.1, "MFM", "discrete")
    assert mfm.fires(complex(0.0, 0.95))
    assert not mfm.fires(complex(0.5, 0.0))
    mle = WarningConfig(0.1, "MLE", "continuous")
    assert mle.fires(complex(0.05, 0.0))
    assert mle.fires(complex(-0.3, 0.0))
    assert not mle.fires(complex(0.5, 0.0))
    with pytest.raises(ConfigError):
        WarningConfig(0.0, "DEJ", "continuous")
    with pytest.raises(ConfigError):
        WarningConfig(0.1, "variance", "continuous")


def test_evaluate_warning_onset():
    ser = mk_series("DEJ", [-1.0, -0.5, -0.05, -0.02], times=[0.0, 1.0, 2.0, 3.0])
    warned, onset = evaluate_warning(ser, WarningConfig(0.1, "DEJ", "continuous"))
    assert warned
    assert onset == 2.0
    calm = mk_series("DEJ", [-1.0, -0.9])
    warned, onset = evaluate_warning(calm, WarningConfig(0.1, "DEJ", "continuous"))
    assert not warned
    assert onset is None
    with pytest.raises(ConfigError):
        evaluate_warning(mk_series("DEJ", [None]), WarningConfig(0.1, "DEJ", "continuous"))


# ---------------------------------------------------------------------------
# classification


def test_classify_bifurcation_classes():
    rot = mk_series("DEJ", [complex(-0.1, 0.5)] * 10)
    assert classify_bifurcation(rot, "continuous") == "hopf"
    real_c = mk_series("DEJ", [complex(-0.1, 0.0)] * 10)
    assert classify_bifurcation(real_c, "continuous") == "fold_or_pitchfork"
    flip = mk_series("DEJ", [complex(-0.9, 0.01)] * 10)
    assert classify_bifurcation(flip, "discrete") == "period_doubling"
    saddle = mk_series("DEJ", [complex(0.9, 0.01)] * 10)
    assert classify_bifurcation(saddle, "discrete") == "fold_or_pitchfork"
    odd = mk_series("DEJ", [complex(0.0, 0.01)] * 10)
    assert classify_bifurcation(odd, "discrete") == "unclassified"


def test_classify_bifurcation_uses_last_quarter():
    early = [complex(-0.5, 0.0)] * 15
    late = [complex(-0.3, 0.5)] * 5
    ser = mk_series("DEJ", early + late)
    assert classify_bifurcation(ser, "continuous") == "hopf"


def test_classify_bifurcation_validation():
    with pytest.raises(ConfigError):
        classify_bifurcation(mk_series("MLE", [0.1] * 10), "discrete")
    with pytest.raises(ConfigError):
        classify_bifurcation(mk_series("DEJ", [complex(-0.5)] * 4), "discrete")


# ---------------------------------------------------------------------------
# composed forecast


def test_forecast_tipping_linear_dej():
    t = np.arange(12, dtype=float)
    ser = mk_series("DEJ", 0.05 * t - 1.0)
    fc = forecast_tipping(ser, "continuous", t_p_reference=20.0)
    assert fc.kind == "DEJ"
    assert fc.component == "real"
    assert fc.tau_c == 0.0
    assert fc.t_hat_p == pytest.approx(20.0, abs=1e-6)
    assert not fc.warned
    assert fc.warning_onset is None
    assert fc.lead_time == pytest.approx(20.0 - 11.0)
    assert fc.bifurcation_class == "fold_or_pitchfork"
    assert fc.horizon == pytest.approx(2.0 * 11.0)
    doc = fc.to_json_dict()
    json.dumps(doc)
    assert doc["trend"]["order"] == fc.trend.order
    assert doc["trend"]["fit_range"] == [0.0, 11.0]


def test_forecast_tipping_warns_near_threshold():
    t = np.arange(12, dtype=float)
    ser = mk_series("DEJ", 0.09 * t - 1.0)
    fc = forecast_tipping(ser, "continuous")
    assert fc.warned
    assert fc.warning_onset == 10.0
    assert fc.t_hat_p == pytest.approx(1.0 / 0.09, abs=1e-6)


def test_forecast_tipping_explicit_epsilon_and_cutoff():
    t = np.arange(12, dtype=float)
    ser = mk_series("DEJ", 0.05 * t - 1.0)
    fc = forecast_tipping(ser, "continuous", t_l=8.0, epsilon=0.7)
    assert fc.t_l == 8.0
    assert fc.epsilon == 0.7
    assert fc.warned  # -0.6 at t=8 is above -0.7
    # t=6 sits exactly on the margin and the rule is strict, so the
    # first firing point is t=7
    assert fc.warning_onset == 7.0
    assert fc.t_hat_p == pytest.approx(20.0, abs=1e-4)


def test_forecast_tipping_classify_from():
    t = np.arange(12, dtype=float)
    mle = mk_series("MLE", 0.04 * t - 0.5)
    dej = mk_series("DEJ", [complex(-0.9, 0.0)] * 12)
    with_src = forecast_tipping(mle, "discrete", classify_from=dej)
    assert with_src.component == "real"
    assert with_src.bifurcation_class == "period_doubling"
    without = forecast_tipping(mle, "discrete")
    assert without.bifurcation_class == "unclassified"
    wrong = forecast_tipping(mle, "discrete", classify_from=mk_series("MLE", t))
    assert wrong.bifurcation_class == "unclassified"


def test_forecast_tipping_mfm_modulus():
    t = np.arange(12, dtype=float)
    values = [(0.5 + 0.04 * ti) * complex(math.cos(0.2), math.sin(0.2))
              for ti in t]
    fc = forecast_tipping(mk_series("MFM", values), "continuous")
    assert fc.component == "modulus"
    assert fc.tau_c == 1.0
    assert fc.t_hat_p == pytest.approx(12.5, abs=1e-6)


# ---------------------------------------------------------------------------
# lead-time sweep


def test_lead_time_curve_rows_and_best():
    t = np.arange(20, dtype=float)
    ser = mk_series("DEJ", 0.1 * t - 1.0)
    rows, best = lead_time_curve(ser, "continuous", t_p_reference=10.0,
                                 cutoffs=[8.5, 3.0, 25.0, 7.0],
                                 accuracy_bound=0.1)
    assert [r.t_l for r in rows] == [3.0, 7.0, 8.5, 25.0]
    few = rows[0]
    assert few.t_hat_p is None and few.abs_error is None and few.note
    ok = rows[1]
    assert ok.t_hat_p == pytest.approx(10.0, abs=1e-6)
    assert ok.abs_error == pytest.approx(0.0, abs=1e-6)
    assert ok.lead_time == pytest.approx(3.0)
    beyond = rows[3]
    assert beyond.note == "cutoff beyond the measure record"
    assert beyond.lead_time == pytest.approx(-15.0)
    assert best == pytest.approx(3.0)


def test_lead_time_curve_no_crossing_note():
    t = np.arange(20, dtype=float)
    ser = mk_series("DEJ", 0.001 * t - 1.0)
    rows, best = lead_time_curve(ser, "continuous", t_p_reference=15.0,
                                 cutoffs=[10.0])
    assert rows[0].note == "no crossing in horizon"
    assert rows[0].t_hat_p is None
    assert best is None


# ---------------------------------------------------------------------------
# CSV round trip


def test_measures_csv_exact_rows():
    ser = mk_series("DEJ", [-0.8, None], times=[0.0, 1.0],
                    flags_at={1: ("no_period", "degenerate")})
    text = measures_to_csv(ser)
    lines = text.splitlines()
    assert lines[0] == MEASURES_HEADER
    assert lines[1] == "0.0,DEJ,-0.8,0.0,0.8,"
    assert lines[2] == "1.0,DEJ,,,,no_period|degenerate"


def test_measures_csv_round_trip():
    t = np.arange(6, dtype=float)
    dej = mk_series("DEJ", [complex(-0.5, 0.25), complex(-0.4, -0.1),
                            None, complex(-0.2, 0.0), complex(-0.1, 0.3),
                            complex(0.05, 0.0)],
                    times=t * 0.5 + 1.0,
                    flags_at={2: ("numeric_error",), 4: ("degenerate",)})
    mle = mk_series("MLE", [0.1, 0.2, 0.3], times=[1.0, 2.0, 3.0])
    text = measures_to_csv({"DEJ": dej, "MLE": mle})
    back = parse_measures_csv(text)
    assert set(back) == {"DEJ", "MLE"}
    for orig, parsed in ((dej, back["DEJ"]), (mle, back["MLE"])):
        assert len(parsed) == len(orig)
        for a, b in zip(orig.points, parsed.points):
            assert a.t_mid == b.t_mid
            assert a.kind == b.kind
            assert a.value == b.value
            assert a.flags == b.flags
            assert a.accepted == b.accepted


def test_parse_measures_csv_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_measures_csv("time,kind\n")
    with pytest.raises(ConfigError):
        parse_measures_csv(MEASURES_HEADER + "\n1.0,DEJ,0.1\n")
