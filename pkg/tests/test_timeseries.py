import numpy as np
import pytest

from tipcast.timeseries import (
    TimeSeries,
    TimeSeriesError,
    format_float,
    parse_timeseries_csv,
)


def test_format_float_round_trips_exactly():
    values = [0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0, -0.0, 123456.78901]
    for x in values:
        assert float(format_float(x)) == x


def test_format_float_is_shortest_repr():
    assert format_float(0.1) == "0.1"
    assert format_float(2.0) == "2.0"
    assert format_float(np.float64(0.25)) == "0.25"


def test_values_promoted_and_locked():
    ts = TimeSeries(np.arange(4.0))
    assert ts.values.shape == (4, 1)
    assert ts.n_samples == 4 and ts.n_vars == 1
    with pytest.raises(ValueError):
        ts.values[0, 0] = 99.0


def test_map_series_uses_index_time():
    ts = TimeSeries(np.zeros((5, 2)))
    assert ts.dt is None
    assert ts.time_per_sample == 1.0
    assert ts.time_at(3) == 3.0
    assert np.array_equal(ts.times(), np.arange(5.0))


def test_flow_series_time_axis():
    ts = TimeSeries(np.zeros((4, 1)), dt=0.25, start=1.0)
    assert ts.time_at(0) == 1.0
    assert ts.time_at(2) == 1.5
    assert np.allclose(ts.times(), [1.0, 1.25, 1.5, 1.75])


def test_dt_must_be_positive():
    with pytest.raises(TimeSeriesError):
        TimeSeries(np.zeros((3, 1)), dt=0.0)
    with pytest.raises(TimeSeriesError):
        TimeSeries(np.zeros((3, 1)), dt=-1.0)


def test_empty_values_rejected():
    with pytest.raises(TimeSeriesError):
        TimeSeries(np.zeros((0, 2)))


def test_window_bounds_and_start():
    ts = TimeSeries(np.arange(10.0), dt=0.5)
    w = ts.window(4, 8)
    assert w.n_samples == 4
    assert w.start == ts.time_at(4)
    assert np.array_equal(w.values[:, 0], [4.0, 5.0, 6.0, 7.0])
    with pytest.raises(TimeSeriesError):
        ts.window(4, 11)
    with pytest.raises(TimeSeriesError):
        ts.window(5, 5)


def test_csv_round_trip_bit_faithful():
    rng = np.random.default_rng(7)
    ts = TimeSeries(rng.standard_normal((20, 3)), dt=0.013)
    back = parse_timeseries_csv(ts.to_csv())
    assert np.array_equal(back.values, ts.values)
    assert back.to_csv() == ts.to_csv()


def test_csv_header_and_layout():
    ts = TimeSeries(np.array([[1.5, -2.0], [0.5, 3.0]]))
    text = ts.to_csv()
    lines = text.splitlines()
    assert lines[0] == "t,x1,x2"
    assert lines[1] == "0.0,1.5,-2.0"
    assert lines[2] == "1.0,0.5,3.0"
    assert text.endswith("\n")


def test_parse_rejects_bad_header():
    with pytest.raises(TimeSeriesError):
        parse_timeseries_csv("time,x1\n0,1\n1,2\n")
    with pytest.raises(TimeSeriesError):
        parse_timeseries_csv("t,x2\n0,1\n1,2\n")
    with pytest.raises(TimeSeriesError):
        parse_timeseries_csv("t\n0\n1\n")


def test_parse_rejects_nonuniform_time():
    with pytest.raises(TimeSeriesError):
        parse_timeseries_csv("t,x1\n0.0,1\n1.0,2\n2.5,3\n")
    with pytest.raises(TimeSeriesError):
        parse_timeseries_csv("t,x1\n2.0,1\n1.0,2\n0.0,3\n")


def test_parse_tolerates_tiny_jitter():
    # one part in 1e12 is far inside the documented 1e-9 tolerance
    t = [0.0, 0.1, 0.2 + 2e-13, 0.3]
    text = "t,x1\n" + "\n".join(f"{ti},{i}" for i, ti in enumerate(t)) + "\n"
    ts = parse_timeseries_csv(text)
    assert ts.n_samples == 4


def test_parse_rejects_short_ragged_or_nonnumeric():
    with pytest.raises(TimeSeriesError):
        parse_timeseries_csv("t,x1\n0.0,1\n")
    with pytest.raises(TimeSeriesError):
        parse_timeseries_csv("t,x1\n0.0,1\n1.0\n")
    with pytest.raises(TimeSeriesError):
        parse_timeseries_csv("t,x1\n0.0,1\n1.0,abc\n")
