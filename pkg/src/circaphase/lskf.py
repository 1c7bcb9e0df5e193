"""Level-set Kalman filter core.

The belief is a Gaussian N(mean, F F^T) carried as the pair (mean, F). The
time update integrates the coupled ODE system

    dF_i/dt   = v(mean + F_i) - avg + (1/2) K (F^T)^{-1} e_i
    dmean/dt  = avg,   avg = (1/2d) sum_i [v(mean + F_i) + v(mean - F_i)]

where F_i are the columns of the factor, which is exact for linear drift
(dSigma/dt = J Sigma + Sigma J^T + K). The measurement update is the
third-degree square-root cubature step: points mean +/- sqrt(d) F_i with
weights 1/2d, a QR factorization over the weighted centered deviations
stacked with sqrt(R), and a triangular solve for the gain. Measurement
space is the 24-hour circle by default; all innovations are wrapped to
(-12, 12].
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, qr

from . import ode
from .circular import circular_mean, wrap_diff, wrap_hours
from .errors import CovarianceDegeneracyError, InputDomainError, NumericalError

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
_REL_SV_FLOOR = 1e-8


@dataclass
class SqrtGaussian:
    """Gaussian belief as (mean, factor) with covariance = factor @ factor.T."""

    mean: np.ndarray
    factor: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.factor = np.atleast_2d(np.asarray(self.factor, dtype=float))
        d = self.mean.shape[0]
        if self.factor.shape != (d, d):
            raise InputDomainError(f"factor must be {d}x{d}, got {self.factor.shape}")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.factor))):
            raise InputDomainError("non-finite belief")

    @property
    def dim(self):
        return self.mean.shape[0]

    def cov(self):
        return self.factor @ self.factor.T

    def copy(self):
        return SqrtGaussian(self.mean.copy(), self.factor.copy())


@dataclass(frozen=True)
class ProcessNoise:
    """Diffusion magnitudes for the pacemaker pair and the light processor."""

    sigma_p: float
    sigma_l: float

    def __post_init__(self):
        if self.sigma_p < 0 or self.sigma_l < 0:
            raise InputDomainError("noise magnitudes must be nonnegative")

    @classmethod
    def isotropic(cls, sigma_k):
        return cls(float(sigma_k), float(sigma_k))

    def matrix(self):
        return np.diag([self.sigma_p**2, self.sigma_p**2, self.sigma_l**2])


@dataclass(frozen=True)
class Measurement:
    """Scalar clock-time measurement with variance, both in hours."""

    value: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise InputDomainError(f"measurement variance must be > 0, got {self.variance}")


@dataclass
class MeasurementUpdateResult:
    belief: SqrtGaussian
    accepted: bool
    reason: str | None = None
    predicted: float | None = None
    innovation: float | None = None
    gain: np.ndarray | None = None


def _noise_matrix(noise, d):
    if noise is None:
        return np.zeros((d, d))
    if isinstance(noise, ProcessNoise):
        k = noise.matrix()
    else:
        k = np.atleast_2d(np.asarray(noise, dtype=float))
    if k.shape != (d, d):
        raise InputDomainError(f"process noise must be {d}x{d}, got {k.shape}")
    return k


def regularize_factor(factor, rel_floor=_REL_SV_FLOOR, max_condition=MAX_CONDITION):
    """Refactor to a lower-triangular factor if the singular values degenerate.

    If min(sv) < rel_floor * max(sv), rel_floor * I is added to the
    covariance before the Cholesky refactorization.
    """
    sv = np.linalg.svd(factor, compute_uv=False)
    if sv[0] == 0.0:
        raise CovarianceDegeneracyError("covariance factor is exactly zero")
    if sv[-1] >= rel_floor * sv[0]:
        if sv[0] / max(sv[-1], np.finfo(float).tiny) > max_condition:
            raise CovarianceDegeneracyError("factor condition number above the ceiling")
        return factor
    sigma = factor @ factor.T + rel_floor * np.eye(factor.shape[0])
    try:
        out = cholesky(sigma, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise CovarianceDegeneracyError("covariance refactorization failed") from exc
    sv = np.linalg.svd(out, compute_uv=False)
    if sv[-1] <= 0 or sv[0] / sv[-1] > max_condition:
        raise CovarianceDegeneracyError("factor still degenerate after regularization")
    return out


def level_set_rhs(mean, factor, drift, noise):
    """Time derivative of the concatenated (mean | factor) system.

    `drift` maps a (d, k) batch of states to (d, k) velocities. Returns a
    d x (d+1) array whose first column is dmean/dt and whose remaining
    columns are dF/dt. The averaged velocity is subtracted once from each
    factor column.
    """
    mean = np.asarray(mean, dtype=float)
    factor = np.asarray(factor, dtype=float)
    d = mean.shape[0]
    k = _noise_matrix(noise, d)
    pts = mean[:, None] + np.hstack([factor, -factor])
    vel = drift(pts)
    avg = vel.mean(axis=1)
    dfactor = vel[:, :d] - avg[:, None]
    if np.any(k):
        try:
            inv_ft = np.linalg.inv(factor.T)
        except np.linalg.LinAlgError as exc:
            raise CovarianceDegeneracyError("singular factor in diffusion term") from exc
        dfactor = dfactor + 0.5 * k @ inv_ft
    return np.column_stack([avg, dfactor])


def _make_system_rhs(drift_with_input, noise, d):
    """Flattened (mean | factor) right-hand side for the integrator."""
    k_mat = _noise_matrix(noise, d)
    has_noise = bool(np.any(k_mat))

    def rhs(t, y):
        mean = y[:d]
        factor = y[d:].reshape(d, d)
        pts = np.hstack([mean[:, None] + factor, mean[:, None] - factor])
        vel = drift_with_input(t, pts)
        avg = vel.mean(axis=1)
        dfactor = vel[:, :d] - avg[:, None]
        if has_noise:
            try:
                dfactor = dfactor + 0.5 * k_mat @ np.linalg.inv(factor.T)
            except np.linalg.LinAlgError as exc:
                raise CovarianceDegeneracyError("singular factor in diffusion term") from exc
        out = np.empty(d + d * d)
        out[:d] = avg
        out[d:] = dfactor.ravel()
        return out

    return rhs


def time_update(
    belief: SqrtGaussian,
    drift_with_input,
    noise,
    t0,
    t1,
    rtol=1e-6,
    atol=1e-8,
    max_step=1.0 / 60.0,
    t_eval=None,
    stop_points=None,
):
    """Propagate the belief from t0 to t1 by integrating the level-set ODE.

    `drift_with_input(t, pts)` maps a (d, k) batch to velocities at time t.
    `t_eval` (sorted, within [t0, t1]) selects recording times for the full
    (mean | factor) state; `stop_points` are input-discontinuity times the
    stepper must land on (t_eval points are stop points automatically).
    Returns a TimeUpdateResult whose `.belief` is the propagated belief.
    """
    if not t1 > t0:
        raise InputDomainError(f"time update requires t1 > t0, got [{t0}, {t1}]")
    d = belief.dim
    factor0 = regularize_factor(belief.factor)
    y0 = np.concatenate([belief.mean, factor0.ravel()])
    rhs = _make_system_rhs(drift_with_input, noise, d)
    stops = np.asarray([] if t_eval is None else t_eval, dtype=float)
    if stop_points is not None:
        stops = np.union1d(stops, np.asarray(stop_points, dtype=float))
    recorded, y_final = ode.integrate(
        rhs, t0, t1, y0, rtol=rtol, atol=atol, max_step=max_step,
        stop_points=stops, record_times=t_eval,
    )
    out = SqrtGaussian(y_final[:d].copy(), y_final[d:].reshape(d, d).copy())
    return TimeUpdateResult(
        out,
        None if t_eval is None else np.asarray(t_eval, dtype=float),
        recorded[:, :d].T if t_eval is not None else None,
        recorded if t_eval is not None else None,
        rhs,
        (rtol, atol, max_step),
        d,
    )


@dataclass
class TimeUpdateResult:
    belief: SqrtGaussian
    t: np.ndarray | None
    mean_path: np.ndarray | None
    _states: np.ndarray | None
    _rhs: object
    _tols: tuple
    _dim: int

    def belief_at(self, t):
        """Belief at an interior time, re-integrated from the nearest
        recorded state at or before t."""
        if self.t is None:
            raise InputDomainError("no recorded states; pass t_eval to time_update")
        i = int(np.searchsorted(self.t, t + 1e-12) - 1)
        if i < 0:
            raise InputDomainError(f"t={t} precedes the recorded grid")
        d = self._dim
        y = self._states[i]
        if t - self.t[i] > 1e-9:
            rtol, atol, max_step = self._tols
            _, y = ode.integrate(self._rhs, self.t[i], t, y,
                                 rtol=rtol, atol=atol, max_step=max_step)
        return SqrtGaussian(y[:d].copy(), y[d:].reshape(d, d).copy())


def cubature_points(belief: SqrtGaussian):
    """Third-degree cubature points mean +/- sqrt(d) F_i, as a (d, 2d) array."""
    d = belief.dim
    scaled = np.sqrt(d) * belief.factor
    return belief.mean[:, None] + np.hstack([scaled, -scaled])


def _qr_lower(block):
    """Lower-triangular T with T T^T = block block^T and nonnegative diagonal."""
    r = qr(block.T, mode="economic")[1]
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return (signs[:, None] * r).T


def measurement_update(
    belief: SqrtGaussian,
    meas: Measurement,
    h,
    period=24.0,
    gate=6.0,
    soft_gate=2.5,
):
    """Square-root cubature correction of the belief by a scalar measurement.

    `h` maps a (d, k) batch of states to k measurement values. With the
    default `period` the measurement space is circular: the predicted
    measurement is the circular mean of the propagated points and every
    residual is wrapped. Passing period=None selects plain linear
    arithmetic (used by the exactness oracles).

    Robustness: an innovation beyond `gate` predicted standard deviations
    (or a singular innovation factor) rejects the measurement, returning
    the belief unchanged with a diagnostic flag. An accepted innovation
    beyond `soft_gate` predicted SDs is absorbed with the measurement
    variance inflated until the standardized innovation equals
    `soft_gate`: a badly mis-phased prior then walks toward the
    measurements over a few days without ever overcommitting its
    covariance to one linearized long-arc jump. Inside `soft_gate` the
    update is the exact square-root cubature step.
    """
    d = belief.dim
    pts = cubature_points(belief)
    z_pts = np.asarray(h(pts), dtype=float).reshape(-1)
    if z_pts.shape[0] != 2 * d:
        raise InputDomainError("measurement function must return one value per point")

    if period is None:
        z_bar = float(np.mean(z_pts))
        z_dev = z_pts - z_bar
        innovation = float(meas.value - z_bar)
    else:
        z_bar = circular_mean(z_pts)
        z_dev = wrap_diff(z_pts, z_bar)
        innovation = float(wrap_diff(meas.value, z_bar))

    w = 1.0 / np.sqrt(2.0 * d)
    z_dev = w * z_dev
    x_dev = w * (pts - belief.mean[:, None])
    pred_var = float(z_dev @ z_dev)
    t11_sq = pred_var + meas.variance
    if not np.isfinite(t11_sq) or t11_sq <= meas.variance * 1e-24:
        logger.warning("measurement rejected: singular innovation factor")
        return MeasurementUpdateResult(belief.copy(), False, "singular innovation factor",
                                       z_bar, innovation)
    if abs(innovation) > gate * np.sqrt(t11_sq):
        logger.warning(
            "measurement rejected: innovation %.3f beyond %.1f predicted SDs (%.3f)",
            innovation, gate, gate * np.sqrt(t11_sq),
        )
        return MeasurementUpdateResult(belief.copy(), False, "innovation gate",
                                       z_bar, innovation)
    variance = meas.variance
    if soft_gate is not None and abs(innovation) > soft_gate * np.sqrt(t11_sq):
        variance = (innovation / soft_gate) ** 2 - pred_var
        logger.info(
            "innovation %.3f beyond %.2f predicted SDs; measurement variance "
            "inflated %.3f -> %.3f", innovation, soft_gate, meas.variance, variance,
        )

    block = np.zeros((d + 1, 2 * d + 1))
    block[0, : 2 * d] = z_dev
    block[0, 2 * d] = np.sqrt(variance)
    block[1:, : 2 * d] = x_dev
    t_mat = _qr_lower(block)
    t11 = t_mat[0, 0]
    gain = t_mat[1:, 0] / t11
    new_mean = belief.mean + gain * innovation
    new_factor = t_mat[1:, 1:]
    return MeasurementUpdateResult(
        SqrtGaussian(new_mean, new_factor), True, None, z_bar, innovation, gain
    )
