"""Between the oscillator's state space and clock time.

The phase angle is the clockwise angle of (x, x_c) around the origin, which
increases monotonically along the limit cycle. Each day's mean trajectory
yields an interpolation from unrolled angle to absolute time; composing it
with the angle map converts states (and Gaussian beliefs, by Monte Carlo)
into clock times.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .circular import (
    circular_mean,
    circular_sd,
    shortest_arc_interval,
    wrap_hours,
)
from .errors import DegenerateBeliefError, DegenerateCycleError, UndefinedAngleError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def state_angle(x, x_c):
    """Angle in [0, 2*pi) of the projection onto the (x, x_c) plane.

    Equals -atan2(x_c, x) mod 2*pi, so it is continuous across branch
    boundaries and increases along the clock's direction of rotation.
    """
    x = np.asarray(x, dtype=float)
    x_c = np.asarray(x_c, dtype=float)
    if np.any((x == 0.0) & (x_c == 0.0)):
        raise UndefinedAngleError("angle undefined at the origin of the (x, x_c) plane")
    out = (-np.arctan2(x_c, x)) % TWO_PI
    return float(out) if out.ndim == 0 else out


@dataclass
class DayPhaseMap:
    """Monotone interpolant from unrolled angle to absolute time for one day."""

    day_index: int
    angles: np.ndarray  # strictly increasing, spans ~2*pi
    times: np.ndarray   # absolute hours, strictly increasing

    @property
    def t_start(self):
        return float(self.times[0])

    @property
    def t_end(self):
        return float(self.times[-1])

    def time_of(self, theta):
        """Absolute hours for angles in [0, 2*pi)."""
        theta = np.asarray(theta, dtype=float)
        a0, a1 = self.angles[0], self.angles[-1]
        rep = a0 + (theta - a0) % TWO_PI
        # the day may slightly under-cover one revolution; snap gap angles
        # to whichever end of the arc is circularly closer
        over = rep > a1
        if np.any(over):
            to_end = rep - a1
            to_start = a0 + TWO_PI - rep
            rep = np.where(over & (to_end <= to_start), a1, rep)
            rep = np.where(over & (to_end > to_start), a0, rep)
        out = np.interp(rep, self.angles, self.times)
        return float(out) if out.ndim == 0 else out

    def clock_time_of(self, theta):
        return wrap_hours(self.time_of(theta))


def build_day_map(times, states, day_index, rel_tol=0.1):
    """Build the angle-to-time interpolant from a day's mean trajectory.

    `states` is (3, n) sampled at <= 1-minute spacing over [t_i, t_{i+1}].
    Angles are unrolled (adding 2*pi at wraps) and samples that do not
    strictly advance the angle are dropped. A total advance outside
    2*pi*(1 +/- rel_tol) raises DegenerateCycleError.
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    theta = state_angle(states[0], states[1])
    step = np.diff(theta)
    step = (step + np.pi) % TWO_PI - np.pi
    unrolled = theta[0] + np.concatenate([[0.0], np.cumsum(step)])
    prev_max = np.concatenate([[-np.inf], np.maximum.accumulate(unrolled)[:-1]])
    keep = unrolled > prev_max
    angles = unrolled[keep]
    kept_times = times[keep]
    total = angles[-1] - angles[0]
    if not (TWO_PI * (1 - rel_tol) <= total <= TWO_PI * (1 + rel_tol)):
        raise DegenerateCycleError(
            f"day {day_index}: trajectory advanced {total / TWO_PI:.3f} revolutions"
        )
    return DayPhaseMap(day_index, angles, kept_times)


def minimum_time(times, values):
    """Absolute time of the minimum, refined by local quadratic interpolation.

    Emits a warning and keeps the earliest one when several separated minima
    lie within 1% (of the value range) of the global minimum.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    i = int(np.argmin(values))
    rng = np.ptp(values)
    if rng > 0:
        near = np.flatnonzero(values <= values.min() + 0.01 * rng)
        if np.any(np.diff(times[near]) > 2.0):
            warnings.warn(
                "multiple separated minima within 1%; keeping the earliest",
                stacklevel=2,
            )
            i = int(near[0])
    if 0 < i < len(values) - 1:
        f0, f1, f2 = values[i - 1], values[i], values[i + 1]
        denom = f0 - 2.0 * f1 + f2
        if denom > 0:
            offset = 0.5 * (f0 - f2) / denom
            offset = float(np.clip(offset, -1.0, 1.0))
            return float(times[i] + offset * (times[i + 1] - times[i]))
    return float(times[i])


def predicted_phase(times, x_values):
    """Clock time (hours mod 24) of the day's minimum of the x component."""
    return wrap_hours(minimum_time(times, x_values))


def measurement_fn(states, day_map: DayPhaseMap, phi_ref):
    """Expected measurement for clock states: clock time of the state's angle
    plus the measured rhythm's reference offset, in hours mod 24. Ignores n."""
    states = np.asarray(states, dtype=float)
    theta = state_angle(states[0], states[1])
    return wrap_hours(day_map.clock_time_of(theta) + phi_ref)


@dataclass
class PhasePosterior:
    """Per-day posterior of the internal phase on the 24-hour clock."""

    day_index: int
    mean: float
    sd: float
    ci_lower: float
    ci_upper: float
    samples: np.ndarray | None = None

    @property
    def n_samples(self):
        return 0 if self.samples is None else len(self.samples)

    def to_dict(self, include_samples=False):
        out = {
            "day_index": self.day_index,
            "mean_hours": self.mean,
            "sd_hours": self.sd,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "n_samples": self.n_samples,
        }
        if include_samples and self.samples is not None:
            out["samples"] = self.samples.tolist()
        return out


def mc_transform(belief, day_map: DayPhaseMap, n_samples=10000, rng=None, keep_samples=True):
    """Monte Carlo push of a Gaussian belief through the angle/time maps.

    Draws from N(mean, F F^T), maps each sample to a clock time, and
    summarizes with the circular mean/SD and the 95% shortest-arc interval.
    """
    if n_samples < 1000:
        raise ValueError("mc_transform needs at least 1000 samples")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    draws = belief.mean[:, None] + belief.factor @ rng.standard_normal((belief.dim, n_samples))
    radius = np.hypot(draws[0], draws[1])
    degenerate = radius < 1e-12
    if np.mean(degenerate) > 0.01:
        raise DegenerateBeliefError("more than 1% of samples have no defined angle")
    good = ~degenerate
    theta = state_angle(draws[0, good], draws[1, good])
    hours = wrap_hours(day_map.time_of(theta))
    lo, hi = shortest_arc_interval(hours, 0.95)
    return PhasePosterior(
        day_index=day_map.day_index,
        mean=circular_mean(hours),
        sd=circular_sd(hours),
        ci_lower=lo,
        ci_upper=hi,
        samples=hours if keep_samples else None,
    )
