"""Delimited-file and JSON I/O with deterministic formatting.

All CSV writers use fixed headers and repr-stable %.*g number formatting so
that a rerun with identical inputs produces byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .analysis import HistogramTrace, ScanTrace


class DataFileError(ValueError):
    pass


def _fmt(value, precision: int = 12) -> str:
    if isinstance(value, (str, np.str_)):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.{precision}g}"


def write_csv(path, header: list[str], columns: list, precision: int = 12) -> None:
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(header):
        raise DataFileError("header and column count mismatch")
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise DataFileError("columns must have equal length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            w.writerow([_fmt(c[i], precision) for c in cols])


def read_csv(path, expected_header: list[str] | None = None
             ) -> tuple[list[str], list[np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise DataFileError(f"file not found: {path}")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFileError(f"empty file: {path}")
    header, body = rows[0], rows[1:]
    if expected_header is not None and header != expected_header:
        raise DataFileError(
            f"{path}: expected header {expected_header}, found {header}")
    try:
        cols = [np.array([float(r[j]) for r in body])
                for j in range(len(header))]
    except (ValueError, IndexError) as exc:
        raise DataFileError(f"{path}: malformed numeric row: {exc}") from exc
    return header, cols


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True,
                               allow_nan=False) + "\n")


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataFileError(f"file not found: {path}")
    return json.loads(path.read_text())


# ------------------------------------------------ fixed-format conveniences

def write_scan_trace(path, trace: ScanTrace, precision: int = 12) -> None:
    write_csv(path, ["frequency_hz", "counts"],
              [trace.frequency, trace.counts], precision)
    write_json(Path(path).with_suffix(".meta.json"),
               {"integration_time_s": trace.integration_time,
                **{k: v for k, v in trace.metadata.items()}})


def read_scan_trace(path) -> ScanTrace:
    _, (f, c) = read_csv(path, ["frequency_hz", "counts"])
    meta_path = Path(path).with_suffix(".meta.json")
    meta = read_json(meta_path) if meta_path.exists() else {}
    dt = meta.pop("integration_time_s", 50e-3)
    return ScanTrace(f, c.astype(np.int64), dt, meta)


def write_histogram_trace(path, hist: HistogramTrace, precision: int = 12) -> None:
    write_csv(path, ["time_s", "counts"],
              [hist.time_bins, hist.counts], precision)


def read_histogram_trace(path) -> HistogramTrace:
    _, (t, c) = read_csv(path, ["time_s", "counts"])
    return HistogramTrace(t, c.astype(np.int64))
