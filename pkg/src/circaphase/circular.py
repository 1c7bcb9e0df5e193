"""Circular statistics on the 24-hour clock.

All quantities are in hours unless noted. Angles on the circle are mapped
via 2*pi/24; means use the resultant-vector method and the standard
deviation is sqrt(-2 ln Rbar) converted back to hours.
"""

import numpy as np

HOURS_PER_DAY = 24.0
_RAD_PER_HOUR = 2.0 * np.pi / HOURS_PER_DAY


def wrap_hours(t):
    """Reduce hours to the representative in [0, 24)."""
    return np.asarray(t) % HOURS_PER_DAY if np.ndim(t) else float(t) % HOURS_PER_DAY


def wrap_diff(a, b):
    """Signed circular difference a - b in (-12, 12]."""
    d = (np.asarray(a) - np.asarray(b)) % HOURS_PER_DAY
    out = np.where(d > HOURS_PER_DAY / 2, d - HOURS_PER_DAY, d)
    return float(out) if np.ndim(out) == 0 else out


def resultant(hours):
    """Mean resultant vector of a sample of clock times, as a complex number."""
    ang = np.asarray(hours, dtype=float) * _RAD_PER_HOUR
    return np.mean(np.exp(1j * ang))


def circular_mean(hours):
    """Circular mean in [0, 24)."""
    z = resultant(hours)
    if np.abs(z) < 1e-15:
        raise ValueError("circular mean undefined: resultant length ~ 0")
    return float((np.angle(z) % (2 * np.pi)) / _RAD_PER_HOUR)


def circular_sd(hours):
    """Circular standard deviation in hours, sqrt(-2 ln Rbar)."""
    r = np.abs(resultant(hours))
    r = min(max(r, 1e-300), 1.0)
    return float(np.sqrt(-2.0 * np.log(r)) / _RAD_PER_HOUR)


def circular_var(hours):
    """Circular dispersion expressed in hours^2 (square of circular_sd)."""
    return circular_sd(hours) ** 2


def shortest_arc_interval(hours, mass=0.95):
    """Shortest arc containing `mass` of the sample; returns (lo, hi) in [0, 24).

    The interval may wrap midnight, in which case lo > hi.
    """
    s = np.sort(np.asarray(hours, dtype=float) % HOURS_PER_DAY)
    n = len(s)
    if n == 0:
        raise ValueError("empty sample")
    k = max(1, int(np.ceil(mass * n)))
    if k >= n:
        # full-sample arc: smallest gap between consecutive points bounds it
        gaps = np.diff(np.concatenate([s, [s[0] + HOURS_PER_DAY]]))
        j = int(np.argmax(gaps))
        return float(s[(j + 1) % n]), float(s[j])
    ext = np.concatenate([s, s + HOURS_PER_DAY])
    widths = ext[k - 1 : k - 1 + n] - s
    i = int(np.argmin(widths))
    return float(s[i]), float(ext[i + k - 1] % HOURS_PER_DAY)


def interval_contains(lo, hi, t):
    """Circular containment test for an interval that may wrap midnight."""
    t = wrap_hours(t)
    lo = wrap_hours(lo)
    hi = wrap_hours(hi)
    if lo <= hi:
        return bool(lo <= t <= hi)
    return bool(t >= lo or t <= hi)
