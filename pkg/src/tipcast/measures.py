"""Stability measures of a closed-loop reservoir.

Three measures summarize how close the learned autonomous dynamics sit
to an instability:

* dominant equilibrium eigenvalue: Newton-refine an equilibrium of the
  closed loop, then take the leading eigenvalue of the dynamics
  Jacobian there (largest real part in continuous mode, largest modulus
  in discrete mode);
* maximum Floquet multiplier: detect a periodic orbit in the free-run
  forecast and take the leading nontrivial eigenvalue of the
  once-around-the-loop monodromy matrix;
* maximum Lyapunov exponent: Benettin iteration with periodic QR
  renormalization along the free-running trajectory.

All three read only the closed-loop matrices, never the training data,
so they describe what the reservoir learned rather than the window it
saw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .reservoir import AutonomousRC, ReadoutModel, predict_autonomous

DEGENERATE_RTOL = 1e-8


def _dyn_jac(auto: AutonomousRC, r: np.ndarray) -> np.ndarray:
    # no finiteness check: integrators call this on trial states and
    # rely on their own divergence handling
    z = auto.A_tilde @ r + auto.b_tilde
    d = 1.0 - np.tanh(z) ** 2
    DA = d[:, None] * auto.A_tilde
    n = auto.n
    if auto.mode == "continuous":
        return auto.gamma * (DA - np.eye(n))
    return (1.0 - auto.gamma) * np.eye(n) + auto.gamma * DA


def dynamics_jacobian(auto: AutonomousRC, r: np.ndarray) -> np.ndarray:
    """Jacobian of the autonomous update at state r.

    Continuous mode differentiates the drift, discrete mode the map;
    both share the diagonal tanh' factor."""
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ConfigError("state must be finite")
    return _dyn_jac(auto, r)


def _residual_jacobian(auto: AutonomousRC, r: np.ndarray) -> np.ndarray:
    # derivative of field(r); equals the continuous dynamics Jacobian
    # but differs from the discrete one, which is why the Newton solve
    # never calls dynamics_jacobian
    z = auto.A_tilde @ r + auto.b_tilde
    d = 1.0 - np.tanh(z) ** 2
    return auto.gamma * (d[:, None] * auto.A_tilde - np.eye(auto.n))


@dataclass(frozen=True)
class NewtonResult:
    r_star: np.ndarray
    residual: float
    iterations: int
    converged: bool
    used_fallback: bool


def newton_equilibrium(
    auto: AutonomousRC,
    r0: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> NewtonResult:
    """Damped Newton search for a root of gamma (tanh(A~ r + b~) - r).

    The same root is an equilibrium of the flow and a fixed point of
    the map.  Steps are halved up to 20 times until the max-norm
    residual decreases; a singular Newton system falls back to least
    squares and is reported through used_fallback.  Converged means
    the final residual max-norm fell below tol.
    """
    r = np.asarray(r0, dtype=float).copy()
    if r.shape != (auto.n,) or not np.all(np.isfinite(r)):
        raise ConfigError("r0 must be a finite state of the right dimension")
    used_fallback = False
    g = auto.field(r)
    res = float(np.max(np.abs(g)))
    iterations = 0
    for _ in range(max_iter):
        if res < tol:
            break
        J = _residual_jacobian(auto, r)
        try:
            delta = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            delta = None
        if delta is None or not np.all(np.isfinite(delta)):
            delta = np.linalg.lstsq(J, -g, rcond=None)[0]
            used_fallback = True
        alpha = 1.0
        improved = False
        for _ in range(21):
            trial = r + alpha * delta
            g_trial = auto.field(trial)
            res_trial = float(np.max(np.abs(g_trial)))
            if np.isfinite(res_trial) and res_trial < res:
                r, g, res = trial, g_trial, res_trial
                improved = True
                break
            alpha *= 0.5
        iterations += 1
        if not improved:
            break
    return NewtonResult(
        r_star=r,
        residual=res,
        iterations=iterations,
        converged=res < tol,
        used_fallback=used_fallback,
    )


def _select_dominant(eigvals: np.ndarray, mode: str) -> int:
    key = eigvals.real if mode == "continuous" else np.abs(eigvals)
    best = float(np.max(key))
    band = 1e-9 * max(1.0, abs(best))
    tied = np.flatnonzero(key >= best - band)
    return int(tied[np.argmax(eigvals[tied].imag)])


def dominant_eigenvalue(J: np.ndarray, mode: str) -> tuple[complex, np.ndarray]:
    """Leading eigenpair of a dynamics Jacobian or monodromy matrix.

    Continuous convention ranks by real part, discrete by modulus;
    conjugate ties resolve toward positive imaginary part.  The
    returned eigenvector has unit norm.
    """
    if mode not in ("continuous", "discrete"):
        raise ConfigError(f"unknown convention {mode!r}")
    eigvals, eigvecs = np.linalg.eig(J)
    idx = _select_dominant(eigvals, mode)
    v = eigvecs[:, idx]
    return complex(eigvals[idx]), v / np.linalg.norm(v)


@dataclass(frozen=True)
class DejResult:
    """Dominant equilibrium eigenvalue with its supporting pieces."""

    value: complex
    eigenvector: np.ndarray
    image_norm: float
    spectrum: np.ndarray
    degenerate: bool
    newton: NewtonResult

    @property
    def r_star(self) -> np.ndarray:
        return self.newton.r_star


def compute_dej(
    auto: AutonomousRC,
    r_init: np.ndarray,
    W_out: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> DejResult:
    """Newton from r_init, then the leading Jacobian eigenvalue there.

    When W_out is given the result is marked degenerate if the leading
    eigenvector is invisible to the readout, meaning the mode lives in
    directions the observables cannot express.
    """
    newton = newton_equilibrium(auto, r_init, tol=tol, max_iter=max_iter)
    J = dynamics_jacobian(auto, newton.r_star)
    eigvals, eigvecs = np.linalg.eig(J)
    idx = _select_dominant(eigvals, auto.mode)
    v = eigvecs[:, idx] / np.linalg.norm(eigvecs[:, idx])
    image_norm = float("nan")
    degenerate = False
    if W_out is not None:
        image_norm = float(np.linalg.norm(W_out @ v))
        degenerate = bool(image_norm <= DEGENERATE_RTOL * np.linalg.norm(W_out))
    return DejResult(
        value=complex(eigvals[idx]),
        eigenvector=v,
        image_norm=image_norm,
        spectrum=eigvals,
        degenerate=degenerate,
        newton=newton,
    )


# ---------------------------------------------------------------------------
# period detection on a forecast trajectory


@dataclass(frozen=True)
class PeriodResult:
    """Outcome of the split-and-compare period search."""

    samples: float | None
    lag: int
    correlation: float
    mismatch: float
    accepted: bool


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.linalg.norm(xc))
    sy = float(np.linalg.norm(yc))
    scale = max(float(np.max(np.abs(x))), float(np.max(np.abs(y))), 1.0)
    if sx <= 1e-13 * scale * math.sqrt(x.size) or sy <= 1e-13 * scale * math.sqrt(y.size):
        return 0.0
    return float(xc @ yc / (sx * sy))


def detect_period(
    values: np.ndarray,
    beta: float = 0.95,
    t_min: int = 10,
) -> PeriodResult:
    """Smallest lag at which a trajectory repeats itself.

    Scans lags t = t_min, t_min+1, ... on the first observable
    coordinate, comparing the first t samples against the next t.  The
    first lag whose segments correlate above beta and differ in
    normalized Euclidean error by less than 1 - beta is accepted and
    refined to sub-sample precision by a parabolic fit of the
    correlation around the peak.  A scan that exhausts half the record
    returns accepted=False with the best correlation seen.
    """
    if not 0 < beta < 1:
        raise ConfigError("beta must lie in (0, 1)")
    v = np.asarray(values, dtype=float)
    s = v if v.ndim == 1 else v[:, 0]
    L = s.shape[0]
    t_min = max(int(t_min), 1)
    tiny = np.finfo(float).tiny

    def corr_at(t: int) -> float:
        return _pearson(s[:t], s[t:2 * t])

    best_c = -np.inf
    best = (0, 0.0, 1.0)
    for t in range(t_min, L // 2 + 1):
        a = s[:t]
        b = s[t:2 * t]
        c = _pearson(a, b)
        e = float(np.linalg.norm(a - b) / (np.linalg.norm(a) + np.linalg.norm(b) + tiny))
        if c > best_c:
            best_c = c
            best = (t, c, e)
        if c <= beta or e >= 1.0 - beta:
            continue
        delta = 0.0
        if t - 1 >= 1 and 2 * (t + 1) <= L:
            c_lo = corr_at(t - 1)
            c_hi = corr_at(t + 1)
            den = c_lo - 2.0 * c + c_hi
            if abs(den) > 1e-12:
                delta = float(np.clip(0.5 * (c_lo - c_hi) / den, -0.5, 0.5))
        return PeriodResult(
            samples=t + delta, lag=t, correlation=c, mismatch=e, accepted=True
        )
    lag, c, e = best
    return PeriodResult(samples=None, lag=lag, correlation=c, mismatch=e, accepted=False)


# ---------------------------------------------------------------------------
# Floquet multipliers


def monodromy(
    auto: AutonomousRC,
    r_on_orbit: np.ndarray,
    period: float,
    dt: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Fundamental matrix once around a loop starting at r_on_orbit.

    Continuous mode integrates state and variational equation jointly
    with RK4, refining the data grid dt by a factor of four; discrete
    mode multiplies the per-step Jacobians along round(period) iterates.
    Returns (Phi, r_end).
    """
    r = np.asarray(r_on_orbit, dtype=float).copy()
    if r.shape != (auto.n,):
        raise ConfigError(f"r_on_orbit must have shape ({auto.n},)")
    if period < 0:
        raise ConfigError("period must be nonnegative")
    Phi = np.eye(auto.n)

    if auto.mode == "discrete":
        for _ in range(int(round(period))):
            Phi = _dyn_jac(auto, r) @ Phi
            r = auto.step(r)
            if not np.all(np.isfinite(r)):
                raise NumericError("orbit diverged during monodromy product")
        return Phi, r

    if dt is None:
        raise ConfigError("continuous mode needs dt")
    if period == 0:
        return Phi, r
    n_steps = max(1, math.ceil(period / (float(dt) / 4.0)))
    h = float(period) / n_steps

    def deriv(r, Phi):
        return auto.field(r), _dyn_jac(auto, r) @ Phi

    for i in range(n_steps):
        k1r, k1P = deriv(r, Phi)
        k2r, k2P = deriv(r + 0.5 * h * k1r, Phi + 0.5 * h * k1P)
        k3r, k3P = deriv(r + 0.5 * h * k2r, Phi + 0.5 * h * k2P)
        k4r, k4P = deriv(r + h * k3r, Phi + h * k3P)
        r = r + (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        Phi = Phi + (h / 6.0) * (k1P + 2.0 * k2P + 2.0 * k3P + k4P)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(Phi))):
            raise NumericError(f"monodromy integration diverged at substep {i + 1}")
    return Phi, r


@dataclass(frozen=True)
class MfmResult:
    """Leading Floquet multiplier of a detected forecast cycle."""

    value: complex | None
    period: PeriodResult
    trivial: complex | None = None
    spectrum: np.ndarray | None = None
    poor_closure: bool = False
    degenerate: bool = False

    @property
    def no_period(self) -> bool:
        return not self.period.accepted

    @property
    def modulus(self) -> float:
        return abs(self.value) if self.value is not None else float("nan")


def compute_mfm(
    auto: AutonomousRC,
    readout: ReadoutModel,
    r_start: np.ndarray,
    settle_steps: int,
    detect_steps: int,
    dt: float | None = None,
    beta: float = 0.95,
    t_min: int = 10,
) -> MfmResult:
    """Free-run the closed loop, find a cycle, take its leading multiplier.

    The forecast first settles for settle_steps, then detect_steps are
    scanned for a period.  In continuous mode the multiplier spectrum
    comes from the monodromy matrix and the trivial unit multiplier
    (eigenvector aligned with the flow) is removed before reporting; a
    trivial multiplier far from one marks the orbit as poorly closed.
    In discrete mode the spectrum is the Jacobian product along the
    cycle and every multiplier counts.  An unaccepted period is an
    ordinary no-measure outcome, not an error.
    """
    if settle_steps < 0 or detect_steps < 4:
        raise ConfigError("need settle_steps >= 0 and detect_steps >= 4")
    traj = predict_autonomous(auto, r_start, settle_steps + detect_steps, dt=dt)
    H = traj[settle_steps:]
    obs = readout.predict(H)
    per = detect_period(obs, beta=beta, t_min=t_min)
    if not per.accepted:
        return MfmResult(value=None, period=per)

    W_out = readout.W_out
    w_norm = float(np.linalg.norm(W_out))

    if auto.mode == "discrete":
        m = max(1, int(round(per.samples)))
        Phi, _ = monodromy(auto, H[0], m)
        value, v = dominant_eigenvalue(Phi, "discrete")
        degenerate = bool(np.linalg.norm(W_out @ v) <= DEGENERATE_RTOL * w_norm)
        return MfmResult(
            value=value,
            period=per,
            spectrum=np.linalg.eigvals(Phi),
            degenerate=degenerate,
        )

    if dt is None:
        raise ConfigError("continuous mode needs dt")
    period_time = per.samples * float(dt)
    Phi, _ = monodromy(auto, H[0], period_time, dt=dt)
    eigvals, eigvecs = np.linalg.eig(Phi)

    u = auto.field(H[0])
    u_norm = float(np.linalg.norm(u))
    if u_norm <= 1e-12:
        # no flow direction to anchor the trivial multiplier; the orbit
        # is effectively an equilibrium and the cycle reading is suspect
        value, v = dominant_eigenvalue(Phi, "discrete")
        degenerate = bool(np.linalg.norm(W_out @ v) <= DEGENERATE_RTOL * w_norm)
        return MfmResult(
            value=value,
            period=per,
            spectrum=eigvals,
            poor_closure=True,
            degenerate=degenerate,
        )

    align = np.abs(eigvecs.conj().T @ u) / (np.linalg.norm(eigvecs, axis=0) * u_norm)
    trivial_idx = int(np.argmax(align))
    trivial = complex(eigvals[trivial_idx])
    poor_closure = abs(trivial - 1.0) > 0.1

    rest = np.delete(np.arange(auto.n), trivial_idx)
    if rest.size == 0:
        return MfmResult(
            value=None,
            period=per,
            trivial=trivial,
            spectrum=eigvals,
            poor_closure=poor_closure,
            degenerate=True,
        )
    idx = int(rest[_select_dominant(eigvals[rest], "discrete")])
    v = eigvecs[:, idx] / np.linalg.norm(eigvecs[:, idx])
    degenerate = bool(np.linalg.norm(W_out @ v) <= DEGENERATE_RTOL * w_norm)
    return MfmResult(
        value=complex(eigvals[idx]),
        period=per,
        trivial=trivial,
        spectrum=eigvals,
        poor_closure=poor_closure,
        degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# Lyapunov exponents


@dataclass(frozen=True)
class MleResult:
    """Leading Lyapunov exponents from Benettin iteration."""

    value: float
    exponents: np.ndarray
    trace: np.ndarray
    reorth_interval: int
    converged: bool


def compute_mle(
    auto: AutonomousRC,
    r0: np.ndarray,
    total_steps: int,
    dt: float | None = None,
    k: int = 1,
    reorth_interval: int = 10,
    burn_in_fraction: float = 0.2,
    tol: float = 0.02,
) -> MleResult:
    """Benettin estimate of the k leading Lyapunov exponents.

    Tangent vectors start as identity columns, are QR-renormalized
    every reorth_interval steps, and accumulate log |R_ii| only after a
    burn_in_fraction of the trajectory has passed.  The running
    estimate is recorded at every renormalization; the result counts as
    converged when the leading estimate varies by less than tol across
    the final tenth of the record.  Exponents are per unit time in
    continuous mode and per iterate in discrete mode.
    """
    n = auto.n
    if not 1 <= k <= n:
        raise ConfigError(f"k must lie in [1, {n}]")
    if reorth_interval < 1:
        raise ConfigError("reorth_interval must be positive")
    if not 0 <= burn_in_fraction < 1:
        raise ConfigError("burn_in_fraction must lie in [0, 1)")
    burn_in = int(burn_in_fraction * total_steps)
    if total_steps - burn_in < 2 * reorth_interval:
        raise ConfigError("too few steps after burn-in for a stable estimate")
    r = np.asarray(r0, dtype=float).copy()
    if r.shape != (n,):
        raise ConfigError(f"r0 must have shape ({n},)")
    if auto.mode == "continuous":
        if dt is None:
            raise ConfigError("continuous mode needs dt")
        h = float(dt)
        unit = h
    else:
        unit = 1.0

    V = np.eye(n)[:, :k]
    sums = np.zeros(k)
    trace: list[list[float]] = []

    def advance(r, V):
        if auto.mode == "discrete":
            V = _dyn_jac(auto, r) @ V
            return auto.step(r), V

        def deriv(r, V):
            return auto.field(r), _dyn_jac(auto, r) @ V

        k1r, k1V = deriv(r, V)
        k2r, k2V = deriv(r + 0.5 * h * k1r, V + 0.5 * h * k1V)
        k3r, k3V = deriv(r + 0.5 * h * k2r, V + 0.5 * h * k2V)
        k4r, k4V = deriv(r + h * k3r, V + h * k3V)
        return (
            r + (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r),
            V + (h / 6.0) * (k1V + 2.0 * k2V + 2.0 * k3V + k4V),
        )

    for i in range(1, total_steps + 1):
        r, V = advance(r, V)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(V))):
            raise NumericError(f"tangent iteration diverged at step {i}")
        if i < burn_in:
            if i % reorth_interval == 0:
                V = np.linalg.qr(V)[0]
        elif i == burn_in:
            V = np.linalg.qr(V)[0]
        elif (i - burn_in) % reorth_interval == 0 or i == total_steps:
            Q, R = np.linalg.qr(V)
            V = Q
            diag = np.abs(np.diag(R))
            if np.any(diag <= 0.0):
                raise NumericError("tangent basis collapsed during renormalization")
            sums += np.log(diag)
            elapsed = (i - burn_in) * unit
            trace.append([elapsed, *(sums / elapsed)])

    trace_arr = np.array(trace)
    exponents = trace_arr[-1, 1:]
    tail = trace_arr[int(0.9 * len(trace_arr)):, 1]
    converged = bool(len(tail) >= 2 and (tail.max() - tail.min()) < tol)
    return MleResult(
        value=float(exponents[0]),
        exponents=exponents,
        trace=trace_arr,
        reorth_interval=reorth_interval,
        converged=converged,
    )
