"""Synthetic systems: schedules, simulation, and analytic oracles.

Ground-truth checks recompute every reference value independently here
(bisection for equilibria, central differences for Jacobians, dense
eigensolves) rather than trusting the library's own formulas.
"""

import json
import math

import numpy as np
import pytest

from tipcast.systems import (
    GroundTruthError,
    ParameterSchedule,
    SimulationError,
    SpecError,
    SystemSpec,
    ground_truth_dej,
    ground_truth_mle,
    simulate,
    spec_from_dict,
    spec_to_dict,
)


def const_spec(sid, p, **kw):
    return SystemSpec(system_id=sid, schedule=ParameterSchedule.constant(p), length=1000, **kw)


# ---------------------------------------------------------------------------
# schedules


def test_constant_schedule():
    s = ParameterSchedule.constant(2.5)
    assert np.array_equal(s.values(4), [2.5, 2.5, 2.5, 2.5])
    assert s.at_fraction(0.7, 4) == 2.5


def test_linear_schedule_values():
    s = ParameterSchedule.linear(k=1.0, b=2.0)
    v = s.values(10)
    # p_i = k * i / T + b
    assert v[0] == 2.0
    assert v[9] == 2.0 + 9.0 / 10.0
    assert s.at_fraction(0.5, 10) == 2.5


def test_stepwise_schedule_values_and_validation():
    s = ParameterSchedule.stepwise([(1.0, 3), (4.0, 2)])
    assert np.array_equal(s.values(5), [1.0, 1.0, 1.0, 4.0, 4.0])
    assert s.at_fraction(0.0, 5) == 1.0
    assert s.at_fraction(0.99, 5) == 4.0
    with pytest.raises(SpecError):
        s.validate(6)  # holds sum to 5
    with pytest.raises(SpecError):
        ParameterSchedule.stepwise([(1.0, 0)]).validate(0)
    with pytest.raises(SpecError):
        ParameterSchedule(form="nope").validate(4)


# ---------------------------------------------------------------------------
# spec validation and serialization


def test_spec_validation():
    with pytest.raises(SpecError):
        const_spec("unknown_system", 1.0).validate()
    with pytest.raises(SpecError):
        const_spec("lorenz63", 10.0).validate()  # flow without dt
    with pytest.raises(SpecError):
        const_spec("fold_map", 1.0, noise_intensity=-0.1).validate()
    with pytest.raises(SpecError):
        SystemSpec("fold_map", ParameterSchedule.constant(1.0), length=1).validate()


def test_spec_json_round_trip():
    spec = SystemSpec(
        system_id="ks_pde",
        schedule=ParameterSchedule.linear(0.5, 1.0),
        length=200,
        noise_intensity=0.01,
        dt=0.25,
        seed=42,
        transient=50,
        spatial_points=64,
        domain_schedule=ParameterSchedule.stepwise([(12.0, 100), (22.0, 100)]),
    )
    payload = spec_to_dict(spec)
    assert spec_from_dict(json.loads(json.dumps(payload))) == spec


def test_spec_from_dict_rejects_garbage():
    with pytest.raises(SpecError):
        spec_from_dict({"system_id": "fold_map"})


# ---------------------------------------------------------------------------
# simulation behavior


def test_map_simulation_shape_and_determinism():
    spec = const_spec("logistic_map", 3.5, noise_intensity=0.01, seed=3)
    a = simulate(spec)
    b = simulate(spec)
    assert a.values.shape == (1000, 1)
    assert a.dt is None
    assert np.array_equal(a.values, b.values)
    c = simulate(SystemSpec("logistic_map", ParameterSchedule.constant(3.5), 1000,
                            noise_intensity=0.01, seed=4))
    assert not np.array_equal(a.values, c.values)


def test_first_sample_is_initial_state():
    spec = const_spec("fold_map", 1.0)
    out = simulate(spec)
    assert out.values[0, 0] == 3.0  # documented initial state, no transient
    spec2 = SystemSpec("logistic_map", ParameterSchedule.constant(3.5), 100,
                       initial_state=(0.25,))
    assert simulate(spec2).values[0, 0] == 0.25


def test_transient_discards_samples():
    base = SystemSpec("logistic_map", ParameterSchedule.constant(3.9), 50, seed=0)
    shifted = SystemSpec("logistic_map", ParameterSchedule.constant(3.9), 50,
                         seed=0, transient=10)
    long = simulate(SystemSpec("logistic_map", ParameterSchedule.constant(3.9), 60, seed=0))
    assert np.allclose(simulate(shifted).values[0], long.values[10])
    assert not np.allclose(simulate(base).values[0], simulate(shifted).values[0])


def test_flow_simulation_rk4_accuracy():
    # same trajectory at dt and dt/10 must agree to RK4's global order
    coarse = simulate(SystemSpec("lorenz63", ParameterSchedule.constant(10.0), 200,
                                 dt=0.01, seed=0))
    fine = simulate(SystemSpec("lorenz63", ParameterSchedule.constant(10.0), 2000,
                               dt=0.001, seed=0))
    assert np.allclose(coarse.values[100], fine.values[1000], rtol=1e-6, atol=1e-6)


def test_map_blowup_raises_with_index():
    spec = SystemSpec("logistic_map", ParameterSchedule.constant(4.5), 200,
                      initial_state=(0.9,))
    with pytest.raises(SimulationError) as err:
        simulate(spec)
    assert err.value.index >= 0


def test_linear_ramp_reaches_endpoint_parameter():
    # fold ramp 1 -> 2 tips before the series end; state collapses to 0
    spec = SystemSpec("fold_map", ParameterSchedule.linear(1.0, 1.0), 20000, seed=0)
    out = simulate(spec)
    assert abs(out.values[-1, 0]) < 1.0
    assert out.values[0, 0] > 2.0


def test_ks_shapes_and_determinism():
    spec = SystemSpec("ks_pde", ParameterSchedule.constant(1.0), 200, dt=0.25,
                      seed=1, domain_size=22.0, spatial_points=64, transient=100)
    a = simulate(spec)
    assert a.values.shape == (200, 64)
    assert a.dt == 0.25
    assert np.array_equal(a.values, simulate(spec).values)


def test_ks_small_domain_decays():
    # below L = 2*pi every mode is linearly damped and the field dies
    spec = SystemSpec("ks_pde", ParameterSchedule.constant(1.0), 400, dt=0.25,
                      seed=2, domain_size=6.0, spatial_points=32, transient=0)
    out = simulate(spec)
    assert np.max(np.abs(out.values[-1])) < 1e-3
    assert np.max(np.abs(out.values[0])) > 1e-4


def test_ks_chaotic_domain_stays_bounded_and_active():
    spec = SystemSpec("ks_pde", ParameterSchedule.constant(1.0), 800, dt=0.25,
                      seed=3, domain_size=22.0, spatial_points=64, transient=400)
    out = simulate(spec)
    assert np.max(np.abs(out.values)) < 10.0
    assert np.std(out.values[-200:]) > 0.1


def test_ks_requires_domain():
    with pytest.raises(SpecError):
        SystemSpec("ks_pde", ParameterSchedule.constant(1.0), 100, dt=0.25,
                   spatial_points=64).validate()


# ---------------------------------------------------------------------------
# analytic ground truths, re-derived here independently


def _numeric_jacobian(f, s, h=1e-7):
    s = np.asarray(s, dtype=float)
    n = s.size
    J = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (f(s + e) - f(s - e)) / (2.0 * h)
    return J


def _dominant(eigs, discrete):
    key = (lambda z: abs(z)) if discrete else (lambda z: z.real)
    return max(eigs, key=key)


def test_gt_dej_logistic_matches_2_minus_p():
    for p in (2.2, 2.8, 3.4):
        got = ground_truth_dej(const_spec("logistic_map", p), p)
        assert got == pytest.approx(2.0 - p, abs=1e-12)


def test_gt_dej_fold_map_against_bisection_oracle():
    # upper equilibrium of x e^{0.75-0.1x} - p x^2/(x^2+0.5625) at p=1
    def f(x, p=1.0):
        return x * math.exp(0.75 - 0.1 * x) - p * x * x / (x * x + 0.5625)

    a, b = 3.0, 12.0
    ga, gb = f(a) - a, f(b) - b
    assert ga * gb < 0
    for _ in range(200):
        m = 0.5 * (a + b)
        if (f(a) - a) * (f(m) - m) <= 0:
            b = m
        else:
            a = m
    x_star = 0.5 * (a + b)
    assert x_star == pytest.approx(5.97471626036768, abs=1e-9)
    h = 1e-6
    slope = (f(x_star + h) - f(x_star - h)) / (2 * h)
    got = ground_truth_dej(const_spec("fold_map", 1.0), 1.0)
    assert got.imag == 0.0
    assert got.real == pytest.approx(slope, abs=1e-6)
    assert got.real == pytest.approx(0.46374284, abs=1e-6)


def test_gt_dej_period_doubling_map_numdiff_oracle():
    p = 0.2

    def step(s):
        return np.array([1.0 - p * s[0] ** 2 + s[1], 0.3 * s[0]])

    s = np.array([0.5, 0.1])
    for _ in range(5000):
        s = step(s)
    eigs = np.linalg.eigvals(_numeric_jacobian(step, s))
    want = _dominant(eigs, discrete=True)
    got = ground_truth_dej(const_spec("period_doubling_map", p), p)
    assert got == pytest.approx(want, abs=1e-5)
    assert got.real == pytest.approx(-0.8073621365, abs=1e-8)


def test_gt_dej_hopf_interior():
    for p in (-0.5, -0.1):
        got = ground_truth_dej(const_spec("hopf_flow", p, dt=0.05), p)
        assert got.real == pytest.approx(p, abs=1e-12)
        assert abs(got.imag) == pytest.approx(1.0, abs=1e-12)


def test_gt_dej_pitchfork_tracked_branch():
    # largest real root of x^3 - p x - 0.5 by bisection, then J = p - 3 x^2
    p = 1.0

    def g(x):
        return 0.5 + p * x - x ** 3

    a, b = 1.0, 3.0
    assert g(a) > 0 > g(b)
    for _ in range(200):
        m = 0.5 * (a + b)
        if g(m) > 0:
            a = m
        else:
            b = m
    x_star = 0.5 * (a + b)
    got = ground_truth_dej(const_spec("pitchfork_flow", p, dt=0.1), p)
    assert got == pytest.approx(p - 3.0 * x_star ** 2, abs=1e-9)
    assert got.real == pytest.approx(-3.2589301328, abs=1e-6)


def test_gt_dej_lorenz_c_plus():
    sigma, beta, rho = 10.0, 8.0 / 3.0, 10.0
    xe = math.sqrt(beta * (rho - 1.0))
    J = np.array([[-sigma, sigma, 0.0], [1.0, -1.0, -xe], [xe, xe, -beta]])
    want = _dominant(np.linalg.eigvals(J), discrete=False)
    got = ground_truth_dej(const_spec("lorenz63", rho, dt=0.01), rho)
    assert got.real == pytest.approx(want.real, abs=1e-9)
    assert abs(got.imag) == pytest.approx(abs(want.imag), abs=1e-9)
    assert got.real == pytest.approx(-0.5954970955, abs=1e-6)


def test_gt_dej_near_selects_branch():
    # logistic at p = 2.8 has equilibria 0 (unstable) and 1 - 1/p (stable)
    p = 2.8
    at_zero = ground_truth_dej(const_spec("logistic_map", p), p, near=np.array([0.0]))
    assert at_zero.real == pytest.approx(p, abs=1e-9)
    tracked = ground_truth_dej(const_spec("logistic_map", p), p)
    assert tracked.real == pytest.approx(2.0 - p, abs=1e-9)


def test_gt_mle_logistic_chaotic_point():
    spec = const_spec("logistic_map", 4.0)
    res = ground_truth_mle(spec, 4.0)
    assert res.converged
    assert res.value == pytest.approx(math.log(2.0), abs=0.01)
    # independent oracle: time average of log |f'(x)| along the orbit
    x = 0.4
    acc = 0.0
    n = 200000
    for i in range(n + 1000):
        if i >= 1000:
            acc += math.log(abs(4.0 * (1.0 - 2.0 * x)))
        x = 4.0 * x * (1.0 - x)
    assert res.value == pytest.approx(acc / n, abs=0.01)


def test_gt_mle_stable_fixed_point_is_negative():
    res = ground_truth_mle(const_spec("logistic_map", 2.8), 2.8)
    # contraction rate log|2-p| at the fixed point
    assert res.value == pytest.approx(math.log(abs(2.0 - 2.8)), abs=0.02)


def test_gt_mle_lorenz_chaotic():
    res = ground_truth_mle(const_spec("lorenz63", 28.0, dt=0.01), 28.0,
                           steps=60000)
    assert res.value == pytest.approx(0.905, abs=0.08)


def test_gt_errors():
    with pytest.raises(GroundTruthError):
        ground_truth_dej(
            SystemSpec("ks_pde", ParameterSchedule.constant(1.0), 100, dt=0.25,
                       domain_size=22.0, spatial_points=64),
            1.0,
        )
    with pytest.raises(GroundTruthError):
        ground_truth_mle(
            SystemSpec("ks_pde", ParameterSchedule.constant(1.0), 100, dt=0.25,
                       domain_size=22.0, spatial_points=64),
            1.0,
        )
    # past the fold only the small lower-branch equilibrium survives;
    # tracking falls back to it rather than failing
    val = ground_truth_dej(const_spec("fold_map", 2.5), 2.5)
    assert abs(val) < 1.0
