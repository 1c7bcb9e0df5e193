"""Quality measures for daily phase estimates.

RMSE is the root mean square of the circular error between each day's
posterior mean and the true phase. NCR is the fraction of days whose true
phase falls outside the day's 95% credible interval.
"""

from dataclasses import dataclass, field

import numpy as np

from .circular import interval_contains, wrap_diff
from .errors import ValidationError


@dataclass
class EvaluationReport:
    errors: np.ndarray        # per-day circular error, hours
    posterior_sds: np.ndarray
    rmse: float
    ncr: float
    n_days: int
    day_indices: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "rmse_hours": self.rmse,
            "ncr": self.ncr,
            "n_days": self.n_days,
            "day_indices": list(self.day_indices),
            "errors_hours": np.asarray(self.errors).tolist(),
            "posterior_sds_hours": np.asarray(self.posterior_sds).tolist(),
            "metadata": dict(self.metadata),
        }


def _check_lengths(estimates, truth):
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    if len(truth) == 1 and len(estimates) > 1:
        truth = np.full(len(estimates), truth[0])
    if len(estimates) != len(truth):
        raise ValidationError(
            f"got {len(estimates)} estimates but {len(truth)} truth values"
        )
    if len(estimates) == 0:
        raise ValidationError("need at least one day to evaluate")
    return truth


def rmse(estimates, truth):
    """Root mean square circular error of the posterior means, in hours."""
    truth = _check_lengths(estimates, truth)
    errors = np.array([wrap_diff(e.mean, t) for e, t in zip(estimates, truth)])
    return float(np.sqrt(np.mean(errors**2)))


def ncr(estimates, truth):
    """Fraction of days whose truth lies outside the 95% credible interval."""
    truth = _check_lengths(estimates, truth)
    covered = [
        interval_contains(e.ci_lower, e.ci_upper, t) for e, t in zip(estimates, truth)
    ]
    return float(1.0 - np.mean(covered))


def evaluate(estimates, truth, metadata=None):
    truth = _check_lengths(estimates, truth)
    errors = np.array([wrap_diff(e.mean, t) for e, t in zip(estimates, truth)])
    sds = np.array([e.sd for e in estimates])
    return EvaluationReport(
        errors=errors,
        posterior_sds=sds,
        rmse=float(np.sqrt(np.mean(errors**2))),
        ncr=ncr(estimates, truth),
        n_days=len(estimates),
        day_indices=[e.day_index for e in estimates],
        metadata=metadata or {},
    )


def sweep_aggregate(grouped_reports):
    """Mean and SEM of RMSE and NCR per noise level.

    `grouped_reports` maps a noise magnitude to its replicate reports.
    Returns rows sorted by noise level, ready for serialization.
    """
    rows = []
    for sigma in sorted(grouped_reports):
        reports = grouped_reports[sigma]
        if not reports:
            raise ValidationError(f"no reports for noise level {sigma}")
        rmses = np.array([r.rmse for r in reports])
        ncrs = np.array([r.ncr for r in reports])
        rows.append(
            {
                "sigma": float(sigma),
                "n_replicates": len(reports),
                "rmse_mean": float(np.mean(rmses)),
                "rmse_sem": _sem(rmses),
                "ncr_mean": float(np.mean(ncrs)),
                "ncr_sem": _sem(ncrs),
            }
        )
    return rows


def _sem(values):
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))
