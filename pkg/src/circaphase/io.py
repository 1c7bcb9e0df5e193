"""Reading and writing the canonical wearable CSV and result files.

The canonical CSV is UTF-8, comma-separated, `.` decimal, with the header
`timestamp,heart_rate,steps`. Timestamps are either ISO-8601 or plain
minutes from the start of the record; empty cells mark missing values.
Records are resampled to the 1-minute grid by left alignment (each sample
lands in the minute bin containing it; the first sample per bin wins).
"""

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import ValidationError
from .model import MINUTES_PER_DAY

SCHEMA_VERSION = 1
CSV_HEADER = ("timestamp", "heart_rate", "steps")


@dataclass(frozen=True)
class WearableRecord:
    """One minute of wearable data; None marks a missing channel."""

    minute: int
    hr: float | None = None
    steps: float | None = None


@dataclass
class GapReport:
    n_minutes: int
    n_hr_missing: int
    n_steps_missing: int
    hr_gap_runs: list = field(default_factory=list)  # (start_minute, length)

    def to_dict(self):
        return {
            "n_minutes": self.n_minutes,
            "n_hr_missing": self.n_hr_missing,
            "n_steps_missing": self.n_steps_missing,
            "hr_gap_runs": [list(run) for run in self.hr_gap_runs],
        }


@dataclass
class MinuteSeries:
    """Dense minute grid with NaN for missing values; t = 0 is the first
    day's midnight."""

    times_min: np.ndarray
    hr: np.ndarray
    steps: np.ndarray

    @property
    def n_days(self):
        return (len(self.times_min)) // MINUTES_PER_DAY

    def gap_report(self):
        missing = ~np.isfinite(self.hr)
        runs = []
        start = None
        for i, gap in enumerate(missing):
            if gap and start is None:
                start = i
            elif not gap and start is not None:
                runs.append((start, i - start))
                start = None
        if start is not None:
            runs.append((start, len(missing) - start))
        return GapReport(
            n_minutes=len(self.times_min),
            n_hr_missing=int(missing.sum()),
            n_steps_missing=int((~np.isfinite(self.steps)).sum()),
            hr_gap_runs=runs,
        )


def _parse_timestamp(raw, lineno):
    raw = raw.strip()
    if not raw:
        raise ValidationError(f"line {lineno}: empty timestamp")
    try:
        return float(raw), False
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(raw), True
    except ValueError as exc:
        raise ValidationError(f"line {lineno}: unparseable timestamp {raw!r}") from exc


def _parse_optional(raw, name, lineno):
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError as exc:
        raise ValidationError(f"line {lineno}: bad {name} value {raw!r}") from exc
    if value < 0:
        raise ValidationError(f"line {lineno}: negative {name} value {value}")
    return value


def ingest(path):
    """Parse a canonical CSV into a dense MinuteSeries.

    Validates the header, timestamp monotonicity and nonnegative values;
    raises ValidationError with a line number otherwise. ISO timestamps are
    aligned to the midnight of the first record's day.
    """
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("empty file") from None
        if tuple(h.strip().lower() for h in header) != CSV_HEADER:
            raise ValidationError(
                f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}"
            )
        iso_mode = None
        origin = None
        prev = None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ValidationError(f"line {lineno}: expected 3 columns, got {len(row)}")
            ts, is_iso = _parse_timestamp(row[0], lineno)
            if iso_mode is None:
                iso_mode = is_iso
            elif iso_mode != is_iso:
                raise ValidationError(f"line {lineno}: mixed timestamp formats")
            if is_iso:
                if origin is None:
                    origin = ts.replace(hour=0, minute=0, second=0, microsecond=0)
                minutes = (ts - origin).total_seconds() / 60.0
            else:
                minutes = ts
            if prev is not None and minutes <= prev:
                raise ValidationError(f"line {lineno}: timestamps not strictly increasing")
            prev = minutes
            hr = _parse_optional(row[1], "heart_rate", lineno)
            steps = _parse_optional(row[2], "steps", lineno)
            records.append(WearableRecord(int(np.floor(minutes)), hr, steps))
    if not records:
        raise ValidationError("no data rows")
    return records_to_series(records)


def records_to_series(records):
    """Left-aligned dense minute grid; the first record per minute wins."""
    last = records[-1].minute
    n = last + 1
    hr = np.full(n, np.nan)
    steps = np.full(n, np.nan)
    seen = set()
    for rec in records:
        if rec.minute in seen:
            continue
        seen.add(rec.minute)
        if rec.hr is not None:
            hr[rec.minute] = rec.hr
        if rec.steps is not None:
            steps[rec.minute] = rec.steps
    return MinuteSeries(np.arange(n), hr, steps)


def write_records_csv(path, times_min, hr, steps):
    """Write the canonical CSV with minutes-from-start timestamps."""
    hr = np.asarray(hr, dtype=float)
    steps = np.asarray(steps, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for t, h, s in zip(times_min, hr, steps):
            writer.writerow([
                int(t),
                "" if not np.isfinite(h) else repr(float(h)),
                "" if not np.isfinite(s) else repr(float(s)),
            ])


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def run_result_dict(cfg, results, evaluation=None, include_samples=False):
    from dataclasses import asdict

    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": _jsonify(asdict(cfg)),
        "days": [_jsonify(r.to_dict(include_samples)) for r in results],
    }
    if evaluation is not None:
        doc["evaluation"] = _jsonify(evaluation.to_dict())
    return doc


def write_json(path, doc):
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonify(doc), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def write_daily_csv(path, results):
    """Flat per-day summary for plotting."""
    cols = (
        "day_index", "posterior_mean", "posterior_sd", "ci_lower", "ci_upper",
        "predicted_mean", "measurement_phase", "measurement_var", "accepted",
        "skip_reason",
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for r in results:
            post = r.posterior
            pred = r.predicted
            meas = r.measurement
            writer.writerow([
                r.day_index,
                "" if post is None else repr(post.mean),
                "" if post is None else repr(post.sd),
                "" if post is None else repr(post.ci_lower),
                "" if post is None else repr(post.ci_upper),
                "" if pred is None else repr(pred.mean),
                "" if meas is None else repr(meas.phase_mean),
                "" if meas is None else repr(meas.phase_var),
                int(r.measurement_accepted),
                r.skip_reason or "",
            ])


def write_sweep_csv(path, rows):
    cols = ("sigma", "n_replicates", "rmse_mean", "rmse_sem", "ncr_mean", "ncr_sem")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
