"""Benchmark systems: noisy maps, flows, and a fourth-order spectral PDE.

Each system couples a deterministic update with multiplicative noise
``omega * zeta * s`` (zeta standard normal, drawn per component per
step).  Maps add the noise term per iterate; flows take one fourth-order
Runge-Kutta drift step and add ``omega * s * zeta * sqrt(dt)``; the PDE
advances with an exponential fourth-order integrator on a Fourier grid
and receives the noise in physical space.

The module also provides analytic stability oracles used to validate
model-based estimates: equilibrium eigenvalues from the true equations
and Lyapunov exponents from tangent propagation along true trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .timeseries import TimeSeries

_BLOWUP_LIMIT = 1e12


class SpecError(ConfigError):
    """Invalid system specification."""


class SimulationError(NumericError):
    """Trajectory blow-up or non-finite state.

    Attributes
    ----------
    index : int
        First sample index at which the state was invalid.
    """

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class GroundTruthError(NumericError):
    """Equilibrium continuation or oracle evaluation failed."""


# ---------------------------------------------------------------------------
# parameter schedules


@dataclass(frozen=True)
class ParameterSchedule:
    """Drift law for the control parameter over a run of T samples.

    Linear schedules follow p_i = k * i / T + b, which for flows sampled
    at interval dt equals k * t / (T dt) + b.  Stepwise schedules hold
    each level for a fixed number of samples; the holds must sum to T.
    """

    form: str = "constant"
    k: float = 0.0
    b: float = 0.0
    steps: tuple[tuple[float, int], ...] = ()

    @classmethod
    def constant(cls, value: float) -> "ParameterSchedule":
        return cls(form="constant", b=float(value))

    @classmethod
    def linear(cls, k: float, b: float) -> "ParameterSchedule":
        return cls(form="linear", k=float(k), b=float(b))

    @classmethod
    def stepwise(cls, steps) -> "ParameterSchedule":
        return cls(form="stepwise", steps=tuple((float(v), int(h)) for v, h in steps))

    def validate(self, length: int) -> None:
        if self.form not in ("constant", "linear", "stepwise"):
            raise SpecError(f"unknown schedule form {self.form!r}")
        if self.form == "stepwise":
            if not self.steps:
                raise SpecError("stepwise schedule needs at least one (level, hold) pair")
            holds = sum(h for _, h in self.steps)
            if holds != length:
                raise SpecError(f"stepwise holds sum to {holds}, series length is {length}")
            if any(h <= 0 for _, h in self.steps):
                raise SpecError("stepwise holds must be positive")

    def values(self, length: int) -> np.ndarray:
        """Parameter value at each sample index."""
        if self.form == "constant":
            return np.full(length, self.b)
        if self.form == "linear":
            return self.k * np.arange(length) / length + self.b
        return np.concatenate([np.full(h, v) for v, h in self.steps])

    def at_fraction(self, frac: float, length: int) -> float:
        """Parameter at a fractional position frac = i/T (flows: t/(T dt))."""
        if self.form == "constant":
            return self.b
        if self.form == "linear":
            return self.k * frac + self.b
        idx = min(int(frac * length), length - 1)
        return float(self.values(length)[idx])


# ---------------------------------------------------------------------------
# system registry


@dataclass(frozen=True)
class _SystemDef:
    kind: str                      # "map" | "flow" | "pde"
    dim: int
    step: object = None            # maps: s_next = step(s, p)
    rhs: object = None             # flows: ds/dt = rhs(s, p)
    jac: object = None
    default_init: object = None    # callable(p0) -> ndarray
    default_dt: float | None = None


def _fold_step(s, p):
    x = s[0]
    return np.array([x * math.exp(0.75 - 0.1 * x) - p * x * x / (x * x + 0.5625)])


def _fold_jac(s, p):
    x = s[0]
    d = math.exp(0.75 - 0.1 * x) * (1.0 - 0.1 * x) - p * 1.125 * x / (x * x + 0.5625) ** 2
    return np.array([[d]])


def _pd_step(s, p):
    return np.array([1.0 - p * s[0] ** 2 + s[1], 0.3 * s[0]])


def _pd_jac(s, p):
    return np.array([[-2.0 * p * s[0], 1.0], [0.3, 0.0]])


def _pd_fixed_point(p):
    x = (-0.7 + math.sqrt(0.49 + 4.0 * p)) / (2.0 * p)
    return np.array([x, 0.3 * x])


def _logistic_step(s, p):
    return np.array([p * s[0] * (1.0 - s[0])])


def _logistic_jac(s, p):
    return np.array([[p * (1.0 - 2.0 * s[0])]])


def _pitchfork_rhs(s, p):
    return np.array([0.5 + p * s[0] - s[0] ** 3])


def _pitchfork_jac(s, p):
    return np.array([[p - 3.0 * s[0] ** 2]])


def _pitchfork_positive_root(p):
    roots = np.roots([1.0, 0.0, -p, -0.5])
    real = np.real(roots[np.abs(np.imag(roots)) < 1e-9])
    return np.array([float(np.max(real))])


def _hopf_rhs(s, p):
    x, y = s
    r2 = x * x + y * y
    return np.array([p * x - y - x * r2, x + p * y - y * r2])


def _hopf_jac(s, p):
    x, y = s
    return np.array(
        [
            [p - 3.0 * x * x - y * y, -1.0 - 2.0 * x * y],
            [1.0 - 2.0 * x * y, p - x * x - 3.0 * y * y],
        ]
    )


def _lorenz_rhs(s, p):
    x, y, z = s
    return np.array([10.0 * (y - x), p * x - y - x * z, x * y - (8.0 / 3.0) * z])


def _lorenz_jac(s, p):
    x, y, z = s
    return np.array([[-10.0, 10.0, 0.0], [p - z, -1.0, -x], [y, x, -8.0 / 3.0]])


SYSTEMS: dict[str, _SystemDef] = {
    "fold_map": _SystemDef(
        kind="map", dim=1, step=_fold_step, jac=_fold_jac,
        default_init=lambda p: np.array([3.0]),
    ),
    "period_doubling_map": _SystemDef(
        kind="map", dim=2, step=_pd_step, jac=_pd_jac,
        default_init=_pd_fixed_point,
    ),
    "logistic_map": _SystemDef(
        kind="map", dim=1, step=_logistic_step, jac=_logistic_jac,
        default_init=lambda p: np.array([0.4]),
    ),
    "pitchfork_flow": _SystemDef(
        kind="flow", dim=1, rhs=_pitchfork_rhs, jac=_pitchfork_jac,
        default_init=_pitchfork_positive_root, default_dt=0.1,
    ),
    "hopf_flow": _SystemDef(
        kind="flow", dim=2, rhs=_hopf_rhs, jac=_hopf_jac,
        default_init=lambda p: np.array([1.0, 0.0]), default_dt=0.05,
    ),
    "lorenz63": _SystemDef(
        kind="flow", dim=3, rhs=_lorenz_rhs, jac=_lorenz_jac,
        default_init=lambda p: np.array([1.0, 1.0, 1.0]), default_dt=0.01,
    ),
    "ks_pde": _SystemDef(kind="pde", dim=0, default_dt=0.25),
}


# ---------------------------------------------------------------------------
# system specification


@dataclass(frozen=True)
class SystemSpec:
    """Complete recipe for one stochastic simulation.

    ``schedule`` drives the control parameter p.  The optional
    ``domain_schedule`` is only meaningful for the PDE and moves the
    domain length L stepwise while p stays on ``schedule``.
    ``transient`` samples are integrated and discarded before recording,
    at the first scheduled parameter value.
    """

    system_id: str
    schedule: ParameterSchedule
    length: int
    noise_intensity: float = 0.0
    dt: float | None = None
    seed: int = 0
    initial_state: tuple[float, ...] | None = None
    transient: int = 0
    domain_size: float | None = None
    spatial_points: int | None = None
    domain_schedule: ParameterSchedule | None = None

    def validate(self) -> None:
        if self.system_id not in SYSTEMS:
            raise SpecError(
                f"unknown system {self.system_id!r}; known: {', '.join(sorted(SYSTEMS))}"
            )
        sd = SYSTEMS[self.system_id]
        if self.length < 2:
            raise SpecError("length must be at least 2")
        if self.noise_intensity < 0:
            raise SpecError("noise_intensity must be >= 0")
        if self.transient < 0:
            raise SpecError("transient must be >= 0")
        self.schedule.validate(self.length)
        if sd.kind in ("flow", "pde"):
            if self.dt is None or not self.dt > 0:
                raise SpecError(f"{self.system_id} requires a positive dt")
        if sd.kind == "pde":
            n = self.spatial_points
            if n is None or n < 8 or (n & (n - 1)) != 0:
                raise SpecError("spatial_points must be a power of two, at least 8")
            if self.domain_schedule is not None:
                self.domain_schedule.validate(self.length)
                if self.domain_schedule.form != "stepwise":
                    raise SpecError("domain_schedule must be stepwise")
            elif self.domain_size is None or not self.domain_size > 0:
                raise SpecError("pde requires domain_size or a domain_schedule")
        if self.initial_state is not None and sd.kind != "pde":
            if len(self.initial_state) != sd.dim:
                raise SpecError(
                    f"{self.system_id} state has dimension {sd.dim},"
                    f" got {len(self.initial_state)}"
                )

    @property
    def kind(self) -> str:
        return SYSTEMS[self.system_id].kind

    @property
    def dimension(self) -> int:
        sd = SYSTEMS[self.system_id]
        return self.spatial_points if sd.kind == "pde" else sd.dim

    def initial(self, p0: float) -> np.ndarray:
        if self.initial_state is not None:
            return np.asarray(self.initial_state, dtype=float)
        return np.asarray(SYSTEMS[self.system_id].default_init(p0), dtype=float)


def _schedule_to_dict(s: ParameterSchedule | None):
    if s is None:
        return None
    return {
        "form": s.form,
        "k": s.k,
        "b": s.b,
        "steps": [[v, h] for v, h in s.steps],
    }


def _schedule_from_dict(d) -> ParameterSchedule | None:
    if d is None:
        return None
    return ParameterSchedule(
        form=d["form"],
        k=float(d["k"]),
        b=float(d["b"]),
        steps=tuple((float(v), int(h)) for v, h in d["steps"]),
    )


def spec_to_dict(spec: SystemSpec) -> dict:
    """Plain-JSON form of a SystemSpec, all fields explicit."""
    return {
        "system_id": spec.system_id,
        "schedule": _schedule_to_dict(spec.schedule),
        "length": spec.length,
        "noise_intensity": spec.noise_intensity,
        "dt": spec.dt,
        "seed": spec.seed,
        "initial_state": list(spec.initial_state) if spec.initial_state is not None else None,
        "transient": spec.transient,
        "domain_size": spec.domain_size,
        "spatial_points": spec.spatial_points,
        "domain_schedule": _schedule_to_dict(spec.domain_schedule),
    }


def spec_from_dict(d: dict) -> SystemSpec:
    try:
        spec = SystemSpec(
            system_id=d["system_id"],
            schedule=_schedule_from_dict(d["schedule"]),
            length=int(d["length"]),
            noise_intensity=float(d.get("noise_intensity", 0.0)),
            dt=None if d.get("dt") is None else float(d["dt"]),
            seed=int(d.get("seed", 0)),
            initial_state=(
                None if d.get("initial_state") is None
                else tuple(float(x) for x in d["initial_state"])
            ),
            transient=int(d.get("transient", 0)),
            domain_size=None if d.get("domain_size") is None else float(d["domain_size"]),
            spatial_points=(
                None if d.get("spatial_points") is None else int(d["spatial_points"])
            ),
            domain_schedule=_schedule_from_dict(d.get("domain_schedule")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"malformed system spec: {exc}") from exc
    spec.validate()
    return spec


# ---------------------------------------------------------------------------
# simulation


def _check_state(s: np.ndarray, index: int) -> None:
    if not np.all(np.isfinite(s)) or np.max(np.abs(s)) > _BLOWUP_LIMIT:
        raise SimulationError(f"state blow-up at sample {index}", index)


def _rk4(rhs, s, p_of, t, h):
    k1 = rhs(s, p_of(t))
    pm = p_of(t + 0.5 * h)
    k2 = rhs(s + 0.5 * h * k1, pm)
    k3 = rhs(s + 0.5 * h * k2, pm)
    k4 = rhs(s + h * k3, p_of(t + h))
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(spec: SystemSpec) -> TimeSeries:
    """Integrate the specified system and return the recorded series.

    Raises SimulationError on blow-up, with the first bad sample index.
    """
    spec.validate()
    sd = SYSTEMS[spec.system_id]
    if sd.kind == "pde":
        return _simulate_ks(spec)

    rng = np.random.default_rng(spec.seed)
    T = spec.length
    omega = spec.noise_intensity
    p_values = spec.schedule.values(T)
    s = spec.initial(float(p_values[0]))
    dim = sd.dim

    if sd.kind == "map":
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(spec.transient):
                s = SYSTEMS[spec.system_id].step(s, p_values[0])
                if omega > 0:
                    s = s + omega * rng.standard_normal(dim) * s
            _check_state(s, 0)
            out = np.empty((T, dim))
            out[0] = s
            for i in range(T - 1):
                s = sd.step(s, p_values[i])
                if omega > 0:
                    s = s + omega * rng.standard_normal(dim) * s
                _check_state(s, i + 1)
                out[i + 1] = s
        return TimeSeries(out, dt=None)

    # flow: RK4 drift plus Euler-Maruyama noise increment
    h = float(spec.dt)
    total = T * h
    p_of = lambda t: spec.schedule.at_fraction(t / total, T)  # noqa: E731
    sqrt_h = math.sqrt(h)

    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(spec.transient):
            s_prev = s
            s = _rk4(sd.rhs, s, lambda t: p_values[0], 0.0, h)
            if omega > 0:
                s = s + omega * s_prev * rng.standard_normal(dim) * sqrt_h
        _check_state(s, 0)
        out = np.empty((T, dim))
        out[0] = s
        for i in range(T - 1):
            s_prev = s
            s = _rk4(sd.rhs, s, p_of, i * h, h)
            if omega > 0:
                s = s + omega * s_prev * rng.standard_normal(dim) * sqrt_h
            _check_state(s, i + 1)
            out[i + 1] = s
    return TimeSeries(out, dt=h)


# ---------------------------------------------------------------------------
# Kuramoto-Sivashinsky, Fourier pseudo-spectral with an ETDRK4 stepper


class _KsStepper:
    """One (p, L, dt) exponential stepper on the rfft grid.

    Quadrature coefficients follow the contour-integral construction
    over roots of unity, which stays stable for the nearly singular
    small-wavenumber factors.
    """

    def __init__(self, n_points: int, domain: float, p: float, dt: float):
        self.n = n_points
        k = 2.0 * np.pi * np.fft.rfftfreq(n_points, d=1.0 / n_points) / domain
        self.k = k
        lin = k**2 - p * k**4
        self.E = np.exp(dt * lin)
        self.E2 = np.exp(0.5 * dt * lin)
        M = 32
        r = np.exp(1j * np.pi * (np.arange(M) + 0.5) / M)
        LR = dt * lin[:, None] + r[None, :]
        self.Q = dt * np.real(np.mean((np.exp(LR / 2) - 1) / LR, axis=1))
        self.f1 = dt * np.real(
            np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR**2)) / LR**3, axis=1)
        )
        self.f2 = dt * np.real(np.mean((2 + LR + np.exp(LR) * (-2 + LR)) / LR**3, axis=1))
        self.f3 = dt * np.real(
            np.mean((-4 - 3 * LR - LR**2 + np.exp(LR) * (4 - LR)) / LR**3, axis=1)
        )
        # 2/3 dealiasing of the quadratic term
        kmax = n_points // 2
        self.dealias = np.fft.rfftfreq(n_points, d=1.0 / n_points) <= (2.0 / 3.0) * kmax

    def _nonlin(self, vhat):
        u = np.fft.irfft(vhat, n=self.n)
        what = np.fft.rfft(u * u)
        what[~self.dealias] = 0.0
        return -0.5j * self.k * what

    def step(self, vhat):
        Nv = self._nonlin(vhat)
        a = self.E2 * vhat + self.Q * Nv
        Na = self._nonlin(a)
        b = self.E2 * vhat + self.Q * Na
        Nb = self._nonlin(b)
        c = self.E2 * a + self.Q * (2 * Nb - Nv)
        Nc = self._nonlin(c)
        return self.E * vhat + self.f1 * Nv + 2 * self.f2 * (Na + Nb) + self.f3 * Nc


def _simulate_ks(spec: SystemSpec) -> TimeSeries:
    rng = np.random.default_rng(spec.seed)
    T = spec.length
    n = spec.spatial_points
    h = float(spec.dt)
    omega = spec.noise_intensity
    sqrt_h = math.sqrt(h)

    p_values = spec.schedule.values(T)
    if spec.domain_schedule is not None:
        l_values = spec.domain_schedule.values(T)
    else:
        l_values = np.full(T, float(spec.domain_size))

    if spec.initial_state is not None:
        u = np.asarray(spec.initial_state, dtype=float)
        if u.shape != (n,):
            raise SpecError(f"initial_state must have {n} grid values")
    else:
        u = 0.01 * rng.standard_normal(n)
        u -= u.mean()

    stepper = None
    key = None

    def get_stepper(p, L):
        nonlocal stepper, key
        if key != (p, L):
            stepper = _KsStepper(n, L, p, h)
            key = (p, L)
        return stepper

    def advance(u, p, L):
        st = get_stepper(p, L)
        vhat = np.fft.rfft(u)
        u_next = np.fft.irfft(st.step(vhat), n=n)
        if omega > 0:
            u_next = u_next + omega * u * rng.standard_normal(n) * sqrt_h
        return u_next

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(spec.transient):
            u = advance(u, float(p_values[0]), float(l_values[0]))
        _check_state(u, 0)
        out = np.empty((T, n))
        out[0] = u
        for i in range(T - 1):
            u = advance(u, float(p_values[i]), float(l_values[i]))
            _check_state(u, i + 1)
            out[i + 1] = u
    return TimeSeries(out, dt=h)


# ---------------------------------------------------------------------------
# ground-truth stability oracles


def _newton_equilibrium(fun, jac, x0, tol=1e-12, max_iter=100):
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        g = fun(x)
        if np.max(np.abs(g)) < tol:
            return x
        J = jac(x)
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -g, rcond=None)
        # damped update, halving until the residual shrinks
        base = np.max(np.abs(g))
        alpha = 1.0
        for _ in range(30):
            xn = x + alpha * step
            if np.max(np.abs(fun(xn))) < base:
                x = xn
                break
            alpha *= 0.5
        else:
            break
    g = fun(x)
    if np.max(np.abs(g)) < 1e-8:
        return x
    raise GroundTruthError(
        f"equilibrium search stalled, residual {np.max(np.abs(g)):.3e}"
    )


def _dominant(eigvals: np.ndarray, kind: str) -> complex:
    """Dominant eigenvalue: largest real part for flows, largest modulus
    for maps; among near-ties, the member with non-negative imaginary part."""
    key = eigvals.real if kind == "flow" else np.abs(eigvals)
    best = np.max(key)
    tol = 1e-9 * max(1.0, abs(best))
    cands = np.where(key >= best - tol)[0]
    pick = cands[np.argmax(eigvals[cands].imag)]
    return complex(eigvals[pick])


def _map_equilibria_scan(step, jac, p, lo, hi, n_grid=2000):
    """All fixed points of a scalar map located by sign scan plus polish."""
    xs = np.linspace(lo, hi, n_grid)
    with np.errstate(over="ignore", invalid="ignore"):
        g = np.array([step(np.array([x]), p)[0] - x for x in xs])
    roots = []
    for i in range(len(xs) - 1):
        if not (np.isfinite(g[i]) and np.isfinite(g[i + 1])):
            continue
        if g[i] == 0.0:
            roots.append(xs[i])
        elif g[i] * g[i + 1] < 0:
            a, b = xs[i], xs[i + 1]
            for _ in range(80):
                m = 0.5 * (a + b)
                gm = step(np.array([m]), p)[0] - m
                if g[i] * gm <= 0:
                    b = m
                else:
                    a = m
            roots.append(0.5 * (a + b))
    # dedupe
    out = []
    for r in roots:
        if not any(abs(r - q) < 1e-6 for q in out):
            out.append(r)
    return out


def ground_truth_dej(spec: SystemSpec, p: float, near=None) -> complex:
    """Dominant equilibrium eigenvalue of the true equations at parameter p.

    ``near`` selects the tracked branch when several equilibria coexist;
    by default the branch the shipped initial conditions settle on.
    Raises GroundTruthError when no equilibrium can be continued.
    """
    spec.validate()
    sd = SYSTEMS[spec.system_id]
    sid = spec.system_id

    if sid == "ks_pde":
        raise GroundTruthError("no analytic equilibrium oracle for the pde")

    if sid == "logistic_map":
        cands = [0.0] if p == 0 else [0.0, 1.0 - 1.0 / p]
        if near is None:
            x = cands[-1] if p > 1.0 else 0.0
        else:
            target = float(np.atleast_1d(near)[0])
            x = min(cands, key=lambda c: abs(c - target))
        return _dominant(np.linalg.eigvals(sd.jac(np.array([x]), p)), "map")

    if sid == "fold_map":
        roots = _map_equilibria_scan(sd.step, sd.jac, p, 1e-6, 20.0)
        if not roots:
            raise GroundTruthError(f"fold map has no positive equilibrium at p={p}")
        target = 20.0 if near is None else float(np.atleast_1d(near)[0])
        s_star = np.array([min(roots, key=lambda r: abs(r - target))])
        return _dominant(np.linalg.eigvals(sd.jac(s_star, p)), "map")

    if sid == "period_doubling_map":
        s_star = _pd_fixed_point(p)
        s_star = _newton_equilibrium(
            lambda s: sd.step(s, p) - s, lambda s: sd.jac(s, p) - np.eye(2), s_star
        )
        return _dominant(np.linalg.eigvals(sd.jac(s_star, p)), "map")

    if sid == "pitchfork_flow":
        roots = np.roots([1.0, 0.0, -p, -0.5])
        real = np.real(roots[np.abs(np.imag(roots)) < 1e-9])
        if near is None:
            candidates = [r for r in real if p - 3 * r * r < 0]
            if not candidates:
                raise GroundTruthError(f"no stable pitchfork equilibrium at p={p}")
            s0 = max(candidates)
        else:
            target = float(np.atleast_1d(near)[0])
            s0 = min(real, key=lambda r: abs(r - target))
        return complex(p - 3.0 * s0 * s0)

    if sid == "hopf_flow":
        x0 = np.zeros(2) if near is None else np.asarray(near, dtype=float)
        s_star = _newton_equilibrium(lambda s: sd.rhs(s, p), lambda s: sd.jac(s, p), x0)
        return _dominant(np.linalg.eigvals(sd.jac(s_star, p)), "flow")

    if sid == "lorenz63":
        cands = [np.zeros(3)]
        if p > 1.0:
            w = math.sqrt((8.0 / 3.0) * (p - 1.0))
            cands.append(np.array([w, w, p - 1.0]))
            cands.append(np.array([-w, -w, p - 1.0]))
        if near is None:
            x0 = cands[1] if p > 1.0 else cands[0]
        else:
            ref = np.asarray(near, dtype=float)
            x0 = min(cands, key=lambda c: float(np.linalg.norm(c - ref)))
        s_star = _newton_equilibrium(lambda s: sd.rhs(s, p), lambda s: sd.jac(s, p), x0)
        return _dominant(np.linalg.eigvals(sd.jac(s_star, p)), "flow")

    raise GroundTruthError(f"no oracle for system {sid!r}")


@dataclass(frozen=True)
class GroundTruthMle:
    """Lyapunov estimate from the true equations.

    value is per iterate for maps, per time unit for flows.  converged
    reflects the spread of the running estimate over its last decile.
    """

    value: float
    trace: np.ndarray
    converged: bool


def ground_truth_mle(
    spec: SystemSpec,
    p: float,
    steps: int = 200_000,
    *,
    dt: float | None = None,
    transient: int = 2000,
    tol: float = 0.02,
) -> GroundTruthMle:
    """Largest Lyapunov exponent of the noiseless system at constant p.

    Propagates one tangent vector along the true trajectory with
    per-step renormalization.  Non-convergence lowers the flag instead
    of raising.
    """
    spec.validate()
    sd = SYSTEMS[spec.system_id]
    if sd.kind == "pde":
        raise GroundTruthError("pde exponents are outside the oracle's scope")

    s = spec.initial(p)
    v = np.ones(sd.dim) / math.sqrt(sd.dim)
    log_sum = 0.0
    trace = []

    if sd.kind == "map":
        for _ in range(transient):
            s = sd.step(s, p)
        for i in range(steps):
            v = sd.jac(s, p) @ v
            s = sd.step(s, p)
            nrm = float(np.linalg.norm(v))
            if nrm == 0.0 or not np.isfinite(nrm):
                raise GroundTruthError(f"tangent degenerated at iterate {i}")
            log_sum += math.log(nrm)
            v /= nrm
            if (i + 1) % max(1, steps // 400) == 0:
                trace.append(log_sum / (i + 1))
        value = log_sum / steps
    else:
        h = float(dt if dt is not None else (spec.dt or sd.default_dt))

        def joint_deriv(s, v):
            return sd.rhs(s, p), sd.jac(s, p) @ v

        for _ in range(transient):
            s = _rk4(sd.rhs, s, lambda t: p, 0.0, h)
        for i in range(steps):
            k1s, k1v = joint_deriv(s, v)
            k2s, k2v = joint_deriv(s + 0.5 * h * k1s, v + 0.5 * h * k1v)
            k3s, k3v = joint_deriv(s + 0.5 * h * k2s, v + 0.5 * h * k2v)
            k4s, k4v = joint_deriv(s + h * k3s, v + h * k3v)
            s = s + (h / 6.0) * (k1s + 2 * k2s + 2 * k3s + k4s)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            nrm = float(np.linalg.norm(v))
            if nrm == 0.0 or not np.isfinite(nrm):
                raise GroundTruthError(f"tangent degenerated at step {i}")
            log_sum += math.log(nrm)
            v /= nrm
            if (i + 1) % max(1, steps // 400) == 0:
                trace.append(log_sum / ((i + 1) * h))
        value = log_sum / (steps * h)

    trace = np.asarray(trace)
    tail = trace[-max(1, len(trace) // 10):]
    converged = bool(len(tail) > 0 and (tail.max() - tail.min()) < tol)
    return GroundTruthMle(value=float(value), trace=trace, converged=converged)
