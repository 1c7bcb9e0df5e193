"""Embedded Dormand-Prince 4(5) stepper for piecewise-smooth systems.

The clock's light input is piecewise constant per minute, so a step that
straddles a minute boundary sees a discontinuous right-hand side and a
generic adaptive solver burns rejections there. This stepper takes the
standard DP45 pair (FSAL, fifth-order propagation) but never steps across
a supplied stop point, which keeps the dynamics smooth inside every step.

Stage evaluations at a step's right endpoint are nudged left by 1e-12 so a
zero-order-hold input keeps its old value up to the boundary, and the FSAL
derivative is re-evaluated after landing on a stop point so the next step
starts with the new input value.
"""

import numpy as np

from .errors import NumericalError

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4

_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_SAFETY = 0.9
_MAX_REJECTS = 60
_EDGE = 1e-12  # left nudge at the step's right endpoint


def _step(f, t, y, h, k1):
    """One DP45 trial step; returns (y5, error_vector, k7)."""
    k = np.empty((7, y.shape[0]))
    k[0] = k1
    t_right = t + h - _EDGE
    for i, a_row in enumerate(_A, start=1):
        k[i] = f(min(t + _C[i] * h, t_right), y + h * (a_row @ k[:i]))
    y5 = y + h * (_B5[:6] @ k[:6])
    k[6] = f(t_right, y5)
    return y5, h * (_E @ k), k[6]


def integrate(f, t0, t1, y0, rtol=1e-6, atol=1e-8, max_step=np.inf, stop_points=None,
              record_times=None):
    """Integrate y' = f(t, y) from t0 to t1.

    `stop_points` are interior times a step must land on exactly (the
    zero-order-hold boundaries); `record_times` must be a sorted subset of
    {t0} | stop_points | {t1} and selects which landings are returned.
    Returns (recorded states as an (n_record, dim) array, final state).
    """
    y = np.asarray(y0, dtype=float).copy()
    t = float(t0)
    t1 = float(t1)
    if not t1 > t:
        raise NumericalError(f"integration needs t1 > t0, got [{t0}, {t1}]")
    stops = np.asarray([] if stop_points is None else stop_points, dtype=float)
    stops = np.unique(stops[(stops > t + 1e-12) & (stops < t1 - 1e-12)])
    targets = np.concatenate([stops, [t1]])
    record = np.asarray([] if record_times is None else record_times, dtype=float)
    recorded = np.empty((len(record), y.shape[0]))
    rec_i = 0
    if rec_i < len(record) and abs(record[rec_i] - t) < 1e-9:
        recorded[rec_i] = y
        rec_i += 1

    k1 = f(t, y)
    h = min(max_step, targets[0] - t)
    for target in targets:
        while t < target - 1e-12:
            h = min(h, target - t, max_step)
            rejects = 0
            while True:
                y_new, err, k7 = _step(f, t, y, h, k1)
                scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
                norm = np.sqrt(np.mean((err / scale) ** 2))
                if norm <= 1.0:
                    break
                rejects += 1
                if rejects > _MAX_REJECTS or h <= 1e-12:
                    raise NumericalError(f"step size collapsed near t={t:.6f}")
                h *= max(_MIN_FACTOR, _SAFETY * norm ** -0.2)
            landed = target - (t + h) <= 1e-12
            t = target if landed else t + h
            y = y_new
            k1 = f(t, y) if landed else k7
            factor = _MAX_FACTOR if norm == 0 else min(_MAX_FACTOR, _SAFETY * norm ** -0.2)
            h = h * max(_MIN_FACTOR, factor)
        if rec_i < len(record) and abs(record[rec_i] - target) < 1e-9:
            recorded[rec_i] = y
            rec_i += 1
    if rec_i != len(record):
        raise NumericalError("record_times must be stop points of the integration")
    return recorded, y
