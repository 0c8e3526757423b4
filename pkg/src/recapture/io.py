"""Data ingestion, configuration and report emission for the CLI."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import CaptureHistory, CountSummary
from .errors import DataError

__all__ = [
    "IngestConfig",
    "load_config",
    "ingest",
    "read_counts",
    "write_dataset",
    "report_to_json",
    "write_report",
    "REPORT_SCHEMA",
]


@dataclass(frozen=True)
class IngestConfig:
    """Parsed ingestion configuration.

    ``covariates`` is a list of column transforms: categorical columns
    expand to reference-coded dummies named ``column:level``; numeric
    columns may be centered and squared (the square gets ``column^2``).
    """

    tau: float
    covariates: tuple = ()
    window_start: _dt.datetime | None = None

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DataError("config: tau must be a positive real")


def load_config(path) -> IngestConfig:
    with open(path) as fh:
        raw = json.load(fh)
    if "tau" not in raw:
        raise DataError("config: missing required key 'tau'")
    window_start = None
    if raw.get("window_start"):
        window_start = _dt.datetime.fromisoformat(raw["window_start"])
    covs = []
    for spec in raw.get("covariates", []):
        kind = spec.get("type")
        if kind not in ("categorical", "numeric"):
            raise DataError(f"config: covariate type must be categorical or numeric, got {kind!r}")
        if "column" not in spec:
            raise DataError("config: covariate entry missing 'column'")
        if kind == "categorical" and "reference" not in spec:
            raise DataError(f"config: categorical column {spec['column']!r} needs a reference level")
        covs.append(dict(spec))
    return IngestConfig(tau=float(raw["tau"]), covariates=tuple(covs),
                        window_start=window_start)


def _parse_time(value: str, config: IngestConfig, where: str) -> float:
    try:
        return float(value)
    except ValueError:
        pass
    if config.window_start is None:
        raise DataError(f"{where}: time {value!r} is not numeric and no window_start is configured")
    try:
        stamp = _dt.datetime.fromisoformat(value)
    except ValueError as exc:
        raise DataError(f"{where}: unparseable time {value!r}") from exc
    return (stamp - config.window_start).total_seconds() / 86400.0


def _read_events(path, config: IngestConfig, truncate_at: float | None):
    tau = config.tau if truncate_at is None else float(truncate_at)
    if truncate_at is not None and not (0 < truncate_at <= config.tau):
        raise DataError("truncation point must lie in (0, tau]")
    events: dict[str, list[float]] = {}
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["subject_id", "time"]:
            raise DataError(f"{path}: expected header 'subject_id,time'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: expected 'subject_id,time'")
            sid = row[0].strip()
            if not sid:
                raise DataError(f"{path}:{lineno}: empty subject id")
            t = _parse_time(row[1].strip(), config, f"{path}:{lineno}")
            if truncate_at is not None and t > truncate_at:
                continue
            if not (0.0 < t <= tau):
                raise DataError(
                    f"{path}:{lineno}: time {t} outside the observation window (0, {tau}]"
                )
            key = (sid, t)
            if key in seen:
                raise DataError(f"{path}:{lineno}: duplicate capture (subject {sid!r}, time {t})")
            seen.add(key)
            events.setdefault(sid, []).append(t)
    if not events:
        raise DataError(f"{path}: no events inside the observation window")
    return events, tau


def _read_subjects(path, config: IngestConfig):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "subject_id":
            raise DataError(f"{path}: expected a header starting with 'subject_id'")
        columns = [c.strip() for c in header[1:]]
        rows: dict[str, dict[str, str]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(columns) + 1:
                raise DataError(f"{path}:{lineno}: expected {len(columns) + 1} fields")
            sid = row[0].strip()
            if sid in rows:
                raise DataError(f"{path}:{lineno}: duplicate subject {sid!r}")
            rows[sid] = dict(zip(columns, (c.strip() for c in row[1:])))
    missing = [c["column"] for c in config.covariates if c["column"] not in columns]
    if missing:
        raise DataError(f"{path}: missing covariate columns {missing}")
    return rows


def _expand_covariates(rows, config: IngestConfig):
    """(names, per-subject vectors) after categorical/numeric transforms."""
    names: list[str] = []
    builders = []
    for spec in config.covariates:
        col = spec["column"]
        if spec["type"] == "categorical":
            levels = sorted({r[col] for r in rows.values()})
            ref = str(spec["reference"])
            if ref not in levels:
                raise DataError(
                    f"categorical column {col!r}: reference level {ref!r} not present "
                    f"(levels: {levels})"
                )
            for level in levels:
                if level == ref:
                    continue
                names.append(f"{col}:{level}")
                builders.append((col, "dummy", level))
        else:
            center = 0.0
            if spec.get("center"):
                center = float(np.mean([float(r[col]) for r in rows.values()]))
            names.append(col)
            builders.append((col, "numeric", center))
            if spec.get("square"):
                names.append(f"{col}^2")
                builders.append((col, "square", center))
    vectors = {}
    for sid, r in rows.items():
        vec = []
        for col, kind, arg in builders:
            if kind == "dummy":
                vec.append(1.0 if r[col] == arg else 0.0)
            else:
                try:
                    x = float(r[col]) - arg
                except ValueError as exc:
                    raise DataError(f"subject {sid!r}: non-numeric value in column {col!r}") from exc
                vec.append(x * x if kind == "square" else x)
        vectors[sid] = tuple(vec)
    return tuple(names), vectors


def ingest(events_path, subjects_path, config: IngestConfig, truncate_at: float | None = None):
    """Read and validate a dataset.

    Returns ``(histories, covariate_names, tau, warnings)``; the window may
    have been shortened by ``truncate_at``.
    """
    events, tau = _read_events(events_path, config, truncate_at)
    warnings: list[str] = []
    if subjects_path is not None:
        if not config.covariates:
            # No transforms declared: use every column as a numeric covariate.
            with open(subjects_path, newline="") as fh:
                header = next(csv.reader(fh), None)
            if header and len(header) > 1:
                auto = tuple(
                    {"column": c.strip(), "type": "numeric"} for c in header[1:]
                )
                config = IngestConfig(
                    tau=config.tau, covariates=auto, window_start=config.window_start
                )
        rows = _read_subjects(subjects_path, config)
        missing = sorted(set(events) - set(rows))
        if missing:
            raise DataError(
                f"subjects present in events but absent from covariates: {missing[:20]}"
                + (" ..." if len(missing) > 20 else "")
            )
        unused = sorted(set(rows) - set(events))
        if unused:
            warnings.append(
                f"{len(unused)} covariate-only subjects ignored (no captures in window)"
            )
        names, vectors = _expand_covariates(
            {sid: rows[sid] for sid in events}, config
        )
    else:
        if config.covariates:
            raise DataError("config declares covariates but no subjects file was given")
        names, vectors = (), {sid: () for sid in events}
    histories = [
        CaptureHistory(sid, tuple(sorted(ts)), vectors[sid])
        for sid, ts in events.items()
    ]
    histories.sort(key=lambda h: h.subject_id)
    return histories, names, tau, warnings


def read_counts(path) -> CountSummary:
    """Read a frequency-of-frequencies table: header ``captures,frequency``."""
    freq: dict[int, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["captures", "frequency"]:
            raise DataError(f"{path}: expected header 'captures,frequency'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                j, f = int(row[0]), int(row[1])
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: expected integers 'captures,frequency'") from exc
            if j < 1 or f < 0:
                raise DataError(f"{path}:{lineno}: captures must be >= 1 and frequency >= 0")
            if j in freq:
                raise DataError(f"{path}:{lineno}: duplicate captures value {j}")
            freq[j] = f
    if not freq:
        raise DataError(f"{path}: empty counts file")
    top = max(freq)
    return CountSummary(tuple(freq.get(j, 0) for j in range(1, top + 1)))


def write_dataset(out_dir, histories, covariate_names):
    """Emit events.csv / subjects.csv in the ingestion format."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "events.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "time"])
        for h in histories:
            for t in h.times:
                w.writerow([h.subject_id, repr(float(t))])
    with open(out / "subjects.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", *covariate_names])
        for h in histories:
            w.writerow([h.subject_id, *[repr(float(z)) for z in h.covariates]])
    return out / "events.csv", out / "subjects.csv"


REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema", "command", "timestamp", "warnings"],
    "properties": {
        "schema": {"const": 1},
        "command": {"type": "string"},
        "timestamp": {"type": "string"},
        "seed": {"type": ["integer", "null"]},
        "model": {
            "type": "object",
            "properties": {
                "effects": {"type": "string"},
                "tau": {"type": "number"},
                "conditioning": {"type": "string"},
                "covariates": {"type": "array", "items": {"type": "string"}},
                "behavior": {"type": ["object", "null"]},
            },
        },
        "data": {
            "type": "object",
            "properties": {
                "n_observed": {"type": "integer"},
                "total_captures": {"type": "integer"},
                "count_distribution": {"type": "object"},
            },
        },
        "fit": {
            "type": "object",
            "properties": {
                "loglik": {"type": "number"},
                "converged": {"type": "boolean"},
                "n_iter": {"type": "integer"},
                "parameters": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["name", "estimate"],
                        "properties": {
                            "name": {"type": "string"},
                            "estimate": {"type": "number"},
                            "se": {"type": ["number", "null"]},
                            "z": {"type": ["number", "null"]},
                            "p": {"type": ["number", "null"]},
                        },
                    },
                },
            },
        },
        "population": {"type": ["object", "null"]},
        "baseline": {"type": ["object", "null"]},
        "grid": {"type": ["array", "null"]},
        "compare": {"type": ["object", "null"]},
        "provenance": {"type": ["object", "null"]},
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}


def _float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def report_to_json(report: dict) -> str:
    """Deterministic serialized form (stable key order, full float repr)."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False)


def write_report(out_dir, report: dict, summary: str):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_to_json(report) + "\n")
    (out / "summary.txt").write_text(summary)
    return out / "report.json"
