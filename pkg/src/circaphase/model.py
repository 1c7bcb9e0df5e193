"""Deterministic model kernels.

Holds the van der Pol-type pacemaker with its photic processor, the
piecewise steps-to-light conversion used when no light channel is recorded,
and forward simulation of the circadian heart-rate rhythm with AR(1) noise.

Time is measured in hours everywhere. Wearable channels are sampled on a
1-minute grid; the light input is treated as piecewise-constant over each
minute (zero-order hold). The photoreceptor equation carries an explicit
factor 60 because its rates are per-minute quantities embedded in the
per-hour system.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigurationError, InputDomainError, NumericalError

MINUTES_PER_HOUR = 60
MINUTES_PER_DAY = 1440


@dataclass(frozen=True)
class ClockParams:
    """Constants of the pacemaker (x, x_c) and photic processor (n)."""

    vdp_mu: float = 0.23
    tau_x: float = 24.2
    light_k: float = 0.55
    alpha0: float = 0.16
    p_exp: float = 0.6
    i0: float = 9500.0
    beta: float = 0.013
    photic_gain: float = 19.875
    phi_ref: float = -1.0

    def __post_init__(self):
        positive = {
            "vdp_mu": self.vdp_mu,
            "tau_x": self.tau_x,
            "light_k": self.light_k,
            "alpha0": self.alpha0,
            "p_exp": self.p_exp,
            "i0": self.i0,
            "beta": self.beta,
            "photic_gain": self.photic_gain,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigurationError(f"{name} must be strictly positive, got {value}")
        if not 20.0 < self.tau_x < 28.0:
            raise ConfigurationError(f"tau_x must lie in (20, 28), got {self.tau_x}")


@dataclass(frozen=True)
class ClockState:
    """Pacemaker state: oscillator pair (x, x_c) and used-receptor fraction n."""

    x: float
    x_c: float
    n: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.x_c, self.n])):
            raise InputDomainError(f"non-finite clock state {(self.x, self.x_c, self.n)}")

    def as_array(self):
        return np.array([self.x, self.x_c, self.n], dtype=float)

    @classmethod
    def from_array(cls, arr):
        x, x_c, n = np.asarray(arr, dtype=float)
        return cls(float(x), float(x_c), float(n))


@dataclass(frozen=True)
class HRModelParams:
    """Harmonic-plus-AR(1) heart-rate model.

    `noise_sd` is the innovation SD of the AR(1) disturbance; its stationary
    SD is noise_sd / sqrt(1 - ar_coef**2).
    """

    hr_baseline: float
    amplitude: float
    hr_phase: float
    activity_gain: float
    ar_coef: float
    noise_sd: float
    period: float = 24.0

    def __post_init__(self):
        if not abs(self.ar_coef) < 1:
            raise ConfigurationError(f"|ar_coef| must be < 1, got {self.ar_coef}")
        if self.amplitude < 0:
            raise ConfigurationError(f"amplitude must be >= 0, got {self.amplitude}")
        if not self.noise_sd > 0:
            raise ConfigurationError(f"noise_sd must be > 0, got {self.noise_sd}")
        if not 0 <= self.hr_phase < 24:
            raise ConfigurationError(f"hr_phase must lie in [0, 24), got {self.hr_phase}")

    def stationary_sd(self):
        return self.noise_sd / np.sqrt(1.0 - self.ar_coef**2)


@dataclass(frozen=True)
class ActivityTrace:
    """Minute-resolution step counts over one recording.

    The light-conversion scale m is half the maximum per-minute step count
    over the whole record, never per day.
    """

    times_min: np.ndarray
    steps: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times_min)
        s = np.asarray(self.steps, dtype=float)
        if t.shape != s.shape or t.ndim != 1 or len(t) == 0:
            raise ConfigurationError("times and steps must be equal-length 1-D arrays")
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("activity times must be strictly increasing")
        if np.any(s < 0):
            raise ConfigurationError("step counts must be nonnegative")
        object.__setattr__(self, "times_min", t)
        object.__setattr__(self, "steps", s)

    @property
    def activity_scale(self):
        return float(np.max(self.steps)) / 2.0

    @property
    def times_hours(self):
        return self.times_min / MINUTES_PER_HOUR

    def light(self):
        """Per-minute equivalent light (lux) using the full-record scale."""
        return steps_to_light(self.steps, self.activity_scale)


def photic_alpha(intensity, params: ClockParams = ClockParams()):
    """Photoreceptor activation rate alpha0 * (I / I0)**p."""
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise InputDomainError("light intensity must be nonnegative")
    out = params.alpha0 * (intensity / params.i0) ** params.p_exp
    return float(out) if out.ndim == 0 else out


def photic_drive(state, intensity, params: ClockParams = ClockParams()):
    """Drive B onto the pacemaker, gated by (1 - n) and modulated by (x, x_c)."""
    x, x_c, n = _state_array(state)
    alpha = photic_alpha(intensity, params)
    bhat = params.photic_gain * alpha * (1.0 - n)
    out = bhat * (1.0 - 0.4 * x) * (1.0 - 0.4 * x_c)
    return float(out) if np.ndim(out) == 0 else out


def clock_drift(state, intensity, params: ClockParams = ClockParams()):
    """Velocity (dx/dt, dx_c/dt, dn/dt) in per-hour units.

    Accepts a single state (shape (3,) or ClockState) or a batch of states
    with shape (3, k); the batch form is what the filter evaluates.
    """
    arr = _state_array(state, stacked=True)
    if not np.all(np.isfinite(arr)):
        raise NumericalError("non-finite state passed to clock_drift")
    x, x_c, n = arr[0], arr[1], arr[2]
    b = photic_drive(arr, intensity, params)
    omega = np.pi / 12.0
    stiff = (24.0 / (0.99669 * params.tau_x)) ** 2
    alpha = photic_alpha(intensity, params)
    dx = omega * (x_c + b)
    dx_c = omega * (params.vdp_mu * (x_c - (4.0 / 3.0) * x_c**3) - x * (stiff + params.light_k * b))
    dn = 60.0 * (alpha * (1.0 - n) - params.beta * n)
    out = np.stack([dx, dx_c, dn])
    return out if arr.ndim == 2 else out.reshape(3)


def _state_array(state, stacked=False):
    if isinstance(state, ClockState):
        arr = state.as_array()
    else:
        arr = np.asarray(state, dtype=float)
    if arr.shape[0] != 3:
        raise InputDomainError(f"clock state must have 3 components, got shape {arr.shape}")
    if stacked:
        return arr
    return arr[0], arr[1], arr[2]


_LIGHT_LEVELS = (0.0, 100.0, 200.0, 500.0, 2000.0)


def steps_to_light(steps, m):
    """Piecewise conversion of per-minute step counts to equivalent lux.

    Breakpoints at 0, 0.1m, 0.25m and 0.4m (half-open on the right);
    anything at or above 0.4m maps to 2000 lux.
    """
    if not m > 0:
        raise ConfigurationError("activity scale m must be positive (record has no movement)")
    a = np.asarray(steps, dtype=float)
    out = np.select(
        [a <= 0, a < 0.1 * m, a < 0.25 * m, a < 0.4 * m],
        _LIGHT_LEVELS[:4],
        default=_LIGHT_LEVELS[4],
    )
    return float(out) if out.ndim == 0 else out


def hr_forward(params: HRModelParams, activity: ActivityTrace, rng):
    """Simulate the heart-rate series (bpm) on the activity's minute grid.

    HR_t = baseline - amplitude*cos(2*pi/period*(t - hr_phase))
           + activity_gain*steps_t + v_t,
    with v_t = ar_coef*v_{t-1} + eps_t per minute. v starts from its
    stationary distribution, and across a k-minute gap the carryover is
    ar_coef**k with matching inflated innovation variance.
    """
    rng = _as_generator(rng)
    t = activity.times_hours
    n = len(t)
    alpha = params.ar_coef
    v = np.empty(n)
    v[0] = rng.standard_normal() * params.stationary_sd()
    gaps = np.diff(activity.times_min).astype(int)
    carry = np.power(alpha, gaps)
    innov_sd = params.noise_sd * np.sqrt((1.0 - np.power(alpha, 2 * gaps)) / (1.0 - alpha**2))
    eps = rng.standard_normal(n - 1) * innov_sd
    for i in range(1, n):
        v[i] = carry[i - 1] * v[i - 1] + eps[i - 1]
    harmonic = params.hr_baseline - params.amplitude * np.cos(
        2.0 * np.pi / params.period * (t - params.hr_phase)
    )
    return harmonic + params.activity_gain * activity.steps + v


def drift_factory(light_minutes, params: ClockParams = ClockParams(), t0_hours=0.0):
    """Fast batched drift under minute-sampled zero-order-hold light.

    The photoreceptor activation rate depends only on the minute's light
    level, so it is precomputed for the whole record; the returned callable
    maps (t, states (3, k)) to velocities without per-call validation and is
    what the filter integrates.
    """
    alpha_minutes = photic_alpha(np.asarray(light_minutes, dtype=float), params)
    alpha_minutes = np.atleast_1d(alpha_minutes)
    n = len(alpha_minutes)
    omega = np.pi / 12.0
    stiff = (24.0 / (0.99669 * params.tau_x)) ** 2
    gain, mu, kb, beta = params.photic_gain, params.vdp_mu, params.light_k, params.beta

    def drift(t, pts):
        idx = int((t - t0_hours) * MINUTES_PER_HOUR)
        alpha = alpha_minutes[0 if idx < 0 else (n - 1 if idx >= n else idx)]
        x, x_c, nn = pts[0], pts[1], pts[2]
        b = gain * alpha * (1.0 - nn) * (1.0 - 0.4 * x) * (1.0 - 0.4 * x_c)
        out = np.empty_like(pts)
        out[0] = omega * (x_c + b)
        out[1] = omega * (mu * (x_c - (4.0 / 3.0) * x_c**3) - x * (stiff + kb * b))
        out[2] = 60.0 * (alpha * (1.0 - nn) - beta * nn)
        return out

    return drift


def light_lookup(light_minutes, t0_hours=0.0):
    """Zero-order-hold light as a function of time in hours.

    Returns a callable clamping to the first/last minute outside the record.
    """
    light = np.asarray(light_minutes, dtype=float)
    n = len(light)

    def at(t):
        idx = int(np.floor((t - t0_hours) * MINUTES_PER_HOUR))
        return light[min(max(idx, 0), n - 1)]

    return at


def integrate_clock(
    light_minutes,
    t_span,
    y0,
    params: ClockParams = ClockParams(),
    rtol=1e-6,
    atol=1e-8,
    t_eval=None,
    t0_hours=0.0,
):
    """Integrate the deterministic clock under minute-sampled light.

    The step size is capped at one minute so the zero-order-hold input is
    never stepped over. n is clamped to [0, 1] on output.
    """
    light_at = light_lookup(light_minutes, t0_hours)

    def rhs(t, y):
        return clock_drift(y, light_at(t), params)

    sol = solve_ivp(
        rhs,
        t_span,
        np.asarray(y0, dtype=float),
        method="RK45",
        rtol=rtol,
        atol=atol,
        max_step=1.0 / MINUTES_PER_HOUR,
        t_eval=t_eval,
    )
    if not sol.success:
        raise NumericalError(f"clock integration failed: {sol.message}")
    sol.y[2] = np.clip(sol.y[2], 0.0, 1.0)
    return sol.t, sol.y


def _as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
