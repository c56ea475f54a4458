"""Line-delimited log formats shared by the server, the analysis CLI, and the
browser client: a CSV gaze log and a JSONL trial log."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dotprobe import TrialRecord

GAZE_LOG_HEADER = "timestamp_ms,x_px,y_px,valid,source_tag"


class LogFormatError(ValueError):
    """Malformed log line; the message carries the 1-based line number."""


def write_gaze_log(path: str | Path, rows) -> None:
    """rows: iterable of (timestamp_ms, x_px, y_px, valid, source_tag)."""
    with Path(path).open("w") as fh:
        fh.write(GAZE_LOG_HEADER + "\n")
        for t, x, y, valid, tag in rows:
            fh.write(f"{int(t)},{float(x):.3f},{float(y):.3f},{1 if valid else 0},{tag}\n")


def read_gaze_log(path: str | Path):
    """Returns (t_ms, x, y, valid, source_tag) arrays; validates per line."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != GAZE_LOG_HEADER:
        raise LogFormatError(f"line 1: expected header {GAZE_LOG_HEADER!r}")
    t, x, y, valid, tags = [], [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise LogFormatError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            t.append(int(parts[0]))
            x.append(float(parts[1]))
            y.append(float(parts[2]))
            valid.append(bool(int(parts[3])))
        except ValueError as exc:
            raise LogFormatError(f"line {lineno}: {exc}") from exc
        tags.append(parts[4])
    tag = tags[0] if tags and all(s == tags[0] for s in tags) else ""
    return (np.array(t, dtype=np.int64), np.array(x), np.array(y),
            np.array(valid, dtype=bool), tag)


def write_trial_log(path: str | Path, records) -> None:
    with Path(path).open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), separators=(",", ":")) + "\n")


def read_trial_log(path: str | Path) -> list[TrialRecord]:
    records = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(TrialRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise LogFormatError(f"line {lineno}: {exc}") from exc
    return records
