"""In-silico wearable data for the three benchmark scenarios.

A virtual subject sleeps 23:00-07:00, moves little in the morning and
evening and more in the afternoon; heart rate follows the harmonic-AR(1)
model with its nightly minimum at 3:00 and the internal clock truth fixed
at 4:00. Scenario 1 randomizes only wake activity, Scenario 2 adds sleep
timing jitter, Scenario 3 adds nonzero sleep-time activity and noisier
heart rate.

Random draws are organized so the scenarios nest: every minute consumes
exactly one standard-normal draw from a per-day child stream regardless of
the stage it falls in, sleep times always consume two draws, and the
heart-rate noise has its own stream. Setting a higher scenario's extra
noise terms to zero therefore reproduces the lower scenario bit for bit.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, InstabilityError
from .lskf import ProcessNoise
from .model import (
    MINUTES_PER_DAY,
    ActivityTrace,
    ClockParams,
    HRModelParams,
    clock_drift,
    hr_forward,
    light_lookup,
)

TRUE_INTERNAL_PHASE = 4.0
# typical converted daylight pattern: ordinary-bright-ordinary
ORDINARY_LUX = 500.0
BRIGHT_LUX = 2000.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Generation parameters; presets 1-3 via ScenarioConfig.preset()."""

    scenario: int = 1
    n_days: int = 20
    seed: int = 0
    mu_low: float = 5.0
    mu_high: float = 25.0
    sigma_low: float = 7.5
    sigma_high: float = 30.0
    sigma_sleep: float = 0.0
    sigma_time: float = 0.0
    sleep_offset: float = 7.0
    sleep_onset: float = 23.0
    hr_baseline: float = 70.0
    hr_amplitude: float = 4.0
    hr_phase: float = 3.0
    activity_gain: float = 0.3
    hr_noise_sd: float = 3.0  # stationary SD of the AR(1) disturbance
    hr_ar_coef: float = 0.9
    true_phase: float = TRUE_INTERNAL_PHASE

    def __post_init__(self):
        for name in ("sigma_low", "sigma_high", "sigma_sleep", "sigma_time"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be nonnegative")
        if not self.sleep_onset > self.sleep_offset:
            raise ConfigurationError("sleep onset must follow sleep offset")
        if self.scenario not in (1, 2, 3):
            raise ConfigurationError(f"scenario must be 1, 2 or 3, got {self.scenario}")
        if self.n_days < 1:
            raise ConfigurationError("need at least one day")

    @classmethod
    def preset(cls, scenario, n_days=20, seed=0):
        base = dict(scenario=scenario, n_days=n_days, seed=seed)
        if scenario == 1:
            return cls(**base)
        if scenario == 2:
            return cls(**base, sigma_time=1.5)
        if scenario == 3:
            return cls(**base, sigma_time=1.5, sigma_sleep=2.0,
                       hr_noise_sd=7.0, hr_ar_coef=0.95)
        raise ConfigurationError(f"unknown scenario {scenario}")

    def hr_params(self):
        """Heart-rate model parameters; the configured stationary noise SD is
        converted to the model's innovation SD."""
        innovation_sd = self.hr_noise_sd * np.sqrt(1.0 - self.hr_ar_coef**2)
        return HRModelParams(
            hr_baseline=self.hr_baseline,
            amplitude=self.hr_amplitude,
            hr_phase=self.hr_phase,
            activity_gain=self.activity_gain,
            ar_coef=self.hr_ar_coef,
            noise_sd=innovation_sd,
        )


@dataclass
class SyntheticDataset:
    """Minute records plus per-day ground truth."""

    config: ScenarioConfig
    times_min: np.ndarray
    steps: np.ndarray
    hr: np.ndarray
    sleep_offsets: np.ndarray
    sleep_onsets: np.ndarray

    @property
    def n_days(self):
        return self.config.n_days

    @property
    def true_phases(self):
        return np.full(self.n_days, self.config.true_phase)

    def activity_trace(self):
        return ActivityTrace(self.times_min, self.steps)


def gen_sleep_times(cfg: ScenarioConfig, day, rng):
    """Sleep offset/onset for one day; clipped so offset + 1 < onset, both in (0, 24)."""
    z_off, z_on = rng.standard_normal(2)
    t_off = cfg.sleep_offset + cfg.sigma_time * z_off
    t_on = cfg.sleep_onset + cfg.sigma_time * z_on
    t_off = float(np.clip(t_off, 1e-6, 22.0))
    t_on = float(np.clip(t_on, t_off + 1.0 + 1e-6, 24.0 - 1e-6))
    return t_off, t_on


def gen_activity(cfg: ScenarioConfig, sleep_times, rng):
    """Per-minute step counts for one day.

    Wake time splits into morning/afternoon/evening five-hour-style stages
    with low/high/low mean activity; sleep minutes draw zero-mean noise.
    Every minute consumes one draw so streams align across scenarios.
    """
    t_off, t_on = sleep_times
    hours = np.arange(MINUTES_PER_DAY) / 60.0
    z = rng.standard_normal(MINUTES_PER_DAY)
    sleep = (hours < t_off) | (hours >= t_on)
    morning = ~sleep & (hours < t_off + 5.0)
    afternoon = ~sleep & ~morning & (hours < t_off + 10.0)
    evening = ~sleep & ~morning & ~afternoon
    mu = np.where(morning | evening, cfg.mu_low, np.where(afternoon, cfg.mu_high, 0.0))
    sd = np.where(
        morning | evening, cfg.sigma_low, np.where(afternoon, cfg.sigma_high, cfg.sigma_sleep)
    )
    return np.maximum(mu + sd * z, 0.0)


def gen_dataset(cfg: ScenarioConfig):
    """Generate the full minute-resolution dataset for a scenario config."""
    root = np.random.SeedSequence(cfg.seed)
    ss_hr, ss_days = root.spawn(2)
    day_seeds = ss_days.spawn(cfg.n_days)
    steps = np.empty(cfg.n_days * MINUTES_PER_DAY)
    offsets = np.empty(cfg.n_days)
    onsets = np.empty(cfg.n_days)
    for day, ss in enumerate(day_seeds):
        ss_sleep, ss_act = ss.spawn(2)
        sleep_times = gen_sleep_times(cfg, day, np.random.default_rng(ss_sleep))
        offsets[day], onsets[day] = sleep_times
        steps[day * MINUTES_PER_DAY : (day + 1) * MINUTES_PER_DAY] = gen_activity(
            cfg, sleep_times, np.random.default_rng(ss_act)
        )
    times_min = np.arange(cfg.n_days * MINUTES_PER_DAY)
    trace = ActivityTrace(times_min, steps)
    hr = hr_forward(cfg.hr_params(), trace, np.random.default_rng(ss_hr))
    return SyntheticDataset(cfg, times_min, steps, hr, offsets, onsets)


def mean_light_profile(cfg: ScenarioConfig = ScenarioConfig()):
    """Per-minute light (lux) for one day under the scenario's mean schedule.

    The mean low/high activity levels are calibrated to ordinary (500 lux) -
    bright (2000 lux) - ordinary daylight exposure; sleep is dark.
    """
    hours = np.arange(MINUTES_PER_DAY) / 60.0
    t_off, t_on = cfg.sleep_offset, cfg.sleep_onset
    light = np.zeros(MINUTES_PER_DAY)
    light[(hours >= t_off) & (hours < t_off + 5.0)] = ORDINARY_LUX
    light[(hours >= t_off + 5.0) & (hours < t_off + 10.0)] = BRIGHT_LUX
    light[(hours >= t_off + 10.0) & (hours < t_on)] = ORDINARY_LUX
    return light


def simulate_truth_sde(
    light_minutes,
    noise,
    t_span,
    y0,
    params: ClockParams = ClockParams(),
    dt=1.0 / 600.0,
    rng=None,
):
    """Euler-Maruyama simulation of the stochastic clock.

    x_{t+dt} = x_t + v(x_t) dt + sqrt(K) sqrt(dt) N(0, I); n is clamped to
    [0, 1] after every step. Intended for filter-consistency checks, not for
    scenario ground truth.
    """
    if dt > 1.0 / 60.0 + 1e-12:
        raise ConfigurationError("Euler-Maruyama step must be at most one minute")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if isinstance(noise, ProcessNoise):
        k = noise.matrix()
    else:
        k = np.atleast_2d(np.asarray(noise, dtype=float))
    sqrt_k = np.linalg.cholesky(k) if np.any(k) else np.zeros_like(k)
    light_at = light_lookup(light_minutes, t_span[0])
    t0, t1 = float(t_span[0]), float(t_span[1])
    n_steps = int(np.ceil((t1 - t0) / dt))
    t = t0 + np.arange(n_steps + 1) * dt
    t[-1] = t1
    states = np.empty((3, n_steps + 1))
    states[:, 0] = np.asarray(y0, dtype=float)
    for i in range(n_steps):
        step = t[i + 1] - t[i]
        y = states[:, i]
        y_new = y + clock_drift(y, light_at(t[i]), params) * step
        if np.any(k):
            y_new = y_new + sqrt_k @ rng.standard_normal(3) * np.sqrt(step)
        y_new[2] = min(max(y_new[2], 0.0), 1.0)
        if np.max(np.abs(y_new)) > 1e3:
            raise InstabilityError(f"trajectory blew up at t={t[i + 1]:.3f}")
        states[:, i + 1] = y_new
    return t, states
