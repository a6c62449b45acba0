"""Echo-state reservoirs and their closed-loop autonomous form.

A reservoir holds a fixed sparse random recurrence A, an input map
W_in, and a node bias b_r.  Driving a window of data produces hidden
states; a ridge readout (W_out, b_s) maps hidden states back to
observables; substituting the readout for the input closes the loop and
yields an input-free system

    A_tilde = A + W_in W_out,    b_tilde = W_in b_s + b_r

whose stability properties are analyzed downstream.  Discrete mode uses
the leaky map r' = (1 - gamma) r + gamma tanh(A r + W_in s + b_r);
continuous mode integrates dr/dt = gamma (-r + tanh(A r + W_in s + b_r))
with a fourth-order Runge-Kutta step and linear input interpolation.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ConfigError, NumericError
from .timeseries import TimeSeries, format_float

MODES = ("discrete", "continuous")


class ReservoirBuildError(NumericError):
    """Could not construct a usable recurrence matrix."""


class RidgeError(ConfigError):
    """Readout training failed in a way more regularization would fix."""


class DriveError(NumericError):
    """Hidden state became non-finite.

    Attributes
    ----------
    index : int
        Step index at which the state degenerated.
    """

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class ReservoirConfig:
    """Construction and training settings for one reservoir."""

    n: int = 200
    spectral_radius: float = 0.9
    density: float = 0.05
    input_scale: float = 1.0
    bias_scale: float = 0.2
    gamma: float = 1.0
    ridge_lambda: float = 1e-6
    washout_fraction: float = 0.1
    seed: int = 0
    mode: str = "discrete"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n < 1:
            raise ConfigError("n must be positive")
        if not 0 < self.density <= 1:
            raise ConfigError("density must lie in (0, 1]")
        if not self.spectral_radius > 0:
            raise ConfigError("spectral_radius must be positive")
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if self.mode == "discrete" and self.gamma > 1:
            raise ConfigError("discrete mode requires gamma <= 1")
        if self.ridge_lambda < 0:
            raise ConfigError("ridge_lambda must be >= 0")
        if not 0 <= self.washout_fraction < 0.5:
            raise ConfigError("washout_fraction must lie in [0, 0.5)")


@dataclass(frozen=True)
class ReservoirModel:
    """Frozen random matrices; never mutated by training."""

    A: np.ndarray
    W_in: np.ndarray
    b_r: np.ndarray
    gamma: float
    mode: str
    seed: int | None = None

    def __post_init__(self):
        for name in ("A", "W_in", "b_r"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.W_in.shape[1]

    def with_input_affine(self, shift: np.ndarray, scale: np.ndarray) -> "ReservoirModel":
        """Model that consumes raw inputs as if they had been mapped to
        (s - shift) / scale first.  Folding the affine map into W_in and
        b_r keeps the update equation unchanged."""
        shift = np.asarray(shift, dtype=float)
        scale = np.asarray(scale, dtype=float)
        if np.any(scale <= 0):
            raise ConfigError("scale entries must be positive")
        w_eff = self.W_in / scale[None, :]
        b_eff = self.b_r - w_eff @ shift
        return ReservoirModel(
            A=self.A, W_in=w_eff, b_r=b_eff,
            gamma=self.gamma, mode=self.mode, seed=self.seed,
        )


@dataclass(frozen=True)
class ReadoutModel:
    """Affine readout from hidden state to observables."""

    W_out: np.ndarray
    b_s: np.ndarray

    def __post_init__(self):
        for name in ("W_out", "b_s"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def predict(self, hidden: np.ndarray) -> np.ndarray:
        return hidden @ self.W_out.T + self.b_s


@dataclass(frozen=True)
class AutonomousRC:
    """Input-free closed-loop reservoir."""

    A_tilde: np.ndarray
    b_tilde: np.ndarray
    gamma: float
    mode: str

    def __post_init__(self):
        for name in ("A_tilde", "b_tilde"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.A_tilde.shape[0]

    def field(self, r: np.ndarray) -> np.ndarray:
        """Continuous-time drift gamma (tanh(A~ r + b~) - r).

        The same expression is the fixed-point residual of the discrete
        map, so equilibrium search uses it in both modes."""
        return self.gamma * (np.tanh(self.A_tilde @ r + self.b_tilde) - r)

    def step(self, r: np.ndarray) -> np.ndarray:
        """One iterate of the discrete autonomous map."""
        return (1.0 - self.gamma) * r + self.gamma * np.tanh(self.A_tilde @ r + self.b_tilde)


def spectral_radius_estimate(A: np.ndarray) -> float:
    """Largest eigenvalue modulus, via an Arnoldi power estimate for
    matrices large enough, dense eigenvalues otherwise."""
    n = A.shape[0]
    if n < 128:
        return float(np.max(np.abs(np.linalg.eigvals(A))))
    v0 = np.linspace(1.0, 2.0, n)
    try:
        vals = scipy.sparse.linalg.eigs(
            A, k=1, which="LM", v0=v0, maxiter=50 * n, tol=0,
            return_eigenvectors=False,
        )
        return float(np.abs(vals[0]))
    except (scipy.sparse.linalg.ArpackNoConvergence, RuntimeError):
        return float(np.max(np.abs(np.linalg.eigvals(A))))


def build_reservoir(config: ReservoirConfig, n_inputs: int) -> ReservoirModel:
    """Sample the frozen random matrices for a reservoir.

    A starts from a Bernoulli(density) sparsity mask filled with
    uniform [-1, 1] weights and is rescaled to the requested spectral
    radius.  A degenerate draw (zero spectral radius) is resampled with
    an incremented sub-seed, at most eight times.
    """
    if n_inputs < 1:
        raise ConfigError("n_inputs must be positive")
    n = config.n
    for attempt in range(9):
        rng = np.random.default_rng([config.seed, attempt])
        mask = rng.random((n, n)) < config.density
        A = np.where(mask, rng.uniform(-1.0, 1.0, (n, n)), 0.0)
        rho = spectral_radius_estimate(A) if A.any() else 0.0
        if rho > 1e-12:
            break
    else:
        raise ReservoirBuildError(
            f"no usable recurrence after 9 draws (n={n}, density={config.density})"
        )
    A *= config.spectral_radius / rho
    W_in = rng.uniform(-config.input_scale, config.input_scale, (n, n_inputs))
    b_r = rng.uniform(-config.bias_scale, config.bias_scale, n)
    return ReservoirModel(
        A=A, W_in=W_in, b_r=b_r,
        gamma=config.gamma, mode=config.mode, seed=config.seed,
    )


def _as_values(window) -> np.ndarray:
    if isinstance(window, TimeSeries):
        return window.values
    v = np.asarray(window, dtype=float)
    return v[:, None] if v.ndim == 1 else v


def _window_dt(window, dt: float | None) -> float:
    if dt is not None:
        return float(dt)
    if isinstance(window, TimeSeries) and window.dt is not None:
        return float(window.dt)
    raise ConfigError("continuous mode needs a sampling interval dt")


def drive(model: ReservoirModel, window, dt: float | None = None) -> np.ndarray:
    """Run the controlled reservoir over a window of samples.

    Returns hidden states aligned one to one with the samples; the
    initial hidden state is zero.  The state at index i has seen inputs
    up to sample i - 1, so regressing it onto sample i trains the
    one-step structure the closed loop needs.
    """
    values = _as_values(window)
    T = values.shape[0]
    if T < 2:
        raise ConfigError("window must hold at least 2 samples")
    if values.shape[1] != model.n_inputs:
        raise ConfigError(
            f"window has {values.shape[1]} variables, model expects {model.n_inputs}"
        )
    n = model.n
    gamma = model.gamma
    A = model.A
    U = values @ model.W_in.T + model.b_r
    H = np.zeros((T, n))
    r = np.zeros(n)

    if model.mode == "discrete":
        one_minus = 1.0 - gamma
        for i in range(T - 1):
            r = one_minus * r + gamma * np.tanh(A @ r + U[i])
            if not np.all(np.isfinite(r)):
                raise DriveError(f"hidden state non-finite at step {i + 1}", i + 1)
            H[i + 1] = r
        return H

    h = _window_dt(window, dt)
    U_mid = 0.5 * (U[:-1] + U[1:])

    def f(r, u):
        return gamma * (np.tanh(A @ r + u) - r)

    for i in range(T - 1):
        k1 = f(r, U[i])
        k2 = f(r + 0.5 * h * k1, U_mid[i])
        k3 = f(r + 0.5 * h * k2, U_mid[i])
        k4 = f(r + h * k3, U[i + 1])
        r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(r)):
            raise DriveError(f"hidden state non-finite at step {i + 1}", i + 1)
        H[i + 1] = r
    return H


def train_readout(
    hidden: np.ndarray,
    targets,
    ridge_lambda: float = 1e-6,
    washout_fraction: float = 0.1,
) -> ReadoutModel:
    """Ridge-regress observables onto hidden states.

    Solves the regularized normal equations for the augmented system
    [hidden, 1], penalizing weights and intercept alike, through a
    symmetric positive definite factorization.  The first
    washout_fraction of the window is excluded from the fit.
    """
    S = _as_values(targets)
    T, n = hidden.shape
    if S.shape[0] != T:
        raise ConfigError("hidden states and targets must align")
    w0 = int(washout_fraction * T)
    R = hidden[w0:]
    Sfit = S[w0:]
    m = R.shape[0]
    if m < n + 1:
        warnings.warn(
            f"only {m} post-washout samples for {n + 1} readout parameters;"
            " the fit is underdetermined",
            stacklevel=2,
        )
    X = np.hstack([R, np.ones((m, 1))])
    G = X.T @ X
    if ridge_lambda > 0:
        G[np.diag_indices_from(G)] += ridge_lambda
    B = X.T @ Sfit
    try:
        c, low = scipy.linalg.cho_factor(G)
        W = scipy.linalg.cho_solve((c, low), B)
    except np.linalg.LinAlgError as exc:
        if ridge_lambda == 0:
            raise RidgeError(
                "normal equations are singular; set ridge_lambda > 0"
            ) from exc
        raise NumericError(f"readout solve failed: {exc}") from exc
    return ReadoutModel(W_out=W[:n].T, b_s=W[n])


def close_loop(model: ReservoirModel, readout: ReadoutModel) -> AutonomousRC:
    """Substitute the readout for the input and return the closed loop."""
    if readout.W_out.shape[1] != model.n or readout.W_out.shape[0] != model.n_inputs:
        raise ConfigError("readout shape does not match the reservoir")
    A_tilde = model.A + model.W_in @ readout.W_out
    b_tilde = model.W_in @ readout.b_s + model.b_r
    return AutonomousRC(A_tilde=A_tilde, b_tilde=b_tilde, gamma=model.gamma, mode=model.mode)


def predict_autonomous(
    auto: AutonomousRC, r0: np.ndarray, steps: int, dt: float | None = None
) -> np.ndarray:
    """Free-run the closed loop for `steps` steps from r0.

    Returns steps + 1 hidden states including the start.  Continuous
    mode advances with RK4 at the data interval dt.
    """
    r = np.asarray(r0, dtype=float).copy()
    if r.shape != (auto.n,):
        raise ConfigError(f"r0 must have shape ({auto.n},)")
    out = np.empty((steps + 1, auto.n))
    out[0] = r
    if auto.mode == "discrete":
        for i in range(steps):
            r = auto.step(r)
            if not np.all(np.isfinite(r)):
                raise DriveError(f"autonomous state non-finite at step {i + 1}", i + 1)
            out[i + 1] = r
        return out
    if dt is None:
        raise ConfigError("continuous mode needs dt")
    h = float(dt)
    for i in range(steps):
        k1 = auto.field(r)
        k2 = auto.field(r + 0.5 * h * k1)
        k3 = auto.field(r + 0.5 * h * k2)
        k4 = auto.field(r + h * k3)
        r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(r)):
            raise DriveError(f"autonomous state non-finite at step {i + 1}", i + 1)
        out[i + 1] = r
    return out


def window_affine(model: ReservoirModel, values: np.ndarray) -> ReservoirModel:
    """Per-window input normalization folded into the model.

    Uses the window mean and standard deviation per channel; channels
    with (near) zero spread keep unit scale so constant data stays
    representable."""
    values = _as_values(values)
    mu = values.mean(axis=0)
    sigma = values.std(axis=0)
    sigma = np.where(sigma > 1e-12 * np.maximum(1.0, np.abs(mu)), sigma, 1.0)
    return model.with_input_affine(mu, sigma)


def forecast(
    model: ReservoirModel,
    readout: ReadoutModel,
    r_last: np.ndarray,
    steps: int,
    dt: float | None = None,
) -> np.ndarray:
    """Closed-loop observable forecast of `steps` samples past the window."""
    auto = close_loop(model, readout)
    hidden = predict_autonomous(auto, r_last, steps, dt=dt)
    return readout.predict(hidden[1:])


# ---------------------------------------------------------------------------
# hyperparameter selection by held-out closed-loop forecast error


def forecast_error(series: TimeSeries, d: int, k: int, config: ReservoirConfig) -> float:
    """Mean squared closed-loop forecast error over the sliding plan.

    Each of the floor((T - d) / k) windows [ik, ik + d) trains a readout
    and forecasts the next k samples; errors are averaged over windows,
    horizon, and observable components.  Returns inf when any window
    fails numerically.
    """
    T = series.n_samples
    if not 1 <= k <= d <= T:
        raise ConfigError(f"need 1 <= k <= d <= T, got d={d}, k={k}, T={T}")
    n_d = (T - d) // k
    if n_d < 1:
        raise ConfigError("plan produces no windows")
    model = build_reservoir(config, series.n_vars)
    dt = series.dt
    total = 0.0
    count = 0
    try:
        for i in range(n_d):
            lo = i * k
            win = series.values[lo:lo + d]
            eff = window_affine(model, win)
            hidden = drive(eff, win, dt=dt)
            readout = train_readout(hidden, win, config.ridge_lambda, config.washout_fraction)
            pred = forecast(eff, readout, hidden[-1], k, dt=dt)
            actual = series.values[lo + d:lo + d + k]
            if not np.all(np.isfinite(pred)):
                return float("inf")
            total += float(np.sum((pred - actual) ** 2))
            count += k
    except NumericError:
        return float("inf")
    return total / (n_d * k)


def select_hyperparameters(
    series: TimeSeries, d: int, k: int, grid
) -> tuple[ReservoirConfig, list[tuple[ReservoirConfig, float]]]:
    """Pick the grid configuration with the smallest forecast error.

    Ties prefer the smaller reservoir, then the earlier grid position.
    Raises NumericError if every candidate fails.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("empty hyperparameter grid")
    table = [(cfg, forecast_error(series, d, k, cfg)) for cfg in grid]
    best_idx = min(
        range(len(grid)),
        key=lambda i: (table[i][1], grid[i].n, i),
    )
    if not np.isfinite(table[best_idx][1]):
        raise NumericError("every hyperparameter candidate failed to forecast")
    return grid[best_idx], table


# ---------------------------------------------------------------------------
# text serialization

_MODEL_MAGIC = "#tipcast-model v1"


def save_model(path, model: ReservoirModel, readout: ReadoutModel | None = None) -> None:
    """Write model matrices to a text file that reloads bit-faithfully."""
    blocks: list[tuple[str, np.ndarray]] = [
        ("A", model.A), ("W_in", model.W_in), ("b_r", model.b_r[None, :]),
    ]
    if readout is not None:
        blocks.append(("W_out", readout.W_out))
        blocks.append(("b_s", readout.b_s[None, :]))
    header = {
        "mode": model.mode,
        "gamma": model.gamma,
        "n": model.n,
        "n_inputs": model.n_inputs,
        "seed": model.seed,
        "blocks": {name: list(arr.shape) for name, arr in blocks},
    }
    lines = [_MODEL_MAGIC, json.dumps(header, sort_keys=True)]
    for name, arr in blocks:
        lines.append(f"#block {name}")
        for row in np.atleast_2d(arr):
            lines.append(",".join(format_float(x) for x in row))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_model(path) -> tuple[ReservoirModel, ReadoutModel | None]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MODEL_MAGIC:
        raise ConfigError(f"{path} is not a reservoir model file")
    header = json.loads(lines[1])
    arrays: dict[str, np.ndarray] = {}
    name = None
    rows: list[list[float]] = []
    for ln in lines[2:]:
        if ln.startswith("#block "):
            if name is not None:
                arrays[name] = np.array(rows)
            name = ln.split(" ", 1)[1]
            rows = []
        elif ln.strip():
            rows.append([float(x) for x in ln.split(",")])
    if name is not None:
        arrays[name] = np.array(rows)
    for bname, shape in header["blocks"].items():
        if bname not in arrays:
            raise ConfigError(f"model file missing block {bname}")
        arrays[bname] = arrays[bname].reshape(shape)
    model = ReservoirModel(
        A=arrays["A"],
        W_in=arrays["W_in"],
        b_r=arrays["b_r"].ravel(),
        gamma=float(header["gamma"]),
        mode=header["mode"],
        seed=header.get("seed"),
    )
    readout = None
    if "W_out" in arrays:
        readout = ReadoutModel(W_out=arrays["W_out"], b_s=arrays["b_s"].ravel())
    return model, readout
