"""File formats and parsing: stream CSV, score CSV, model snapshots,
human duration suffixes.

Stream CSV: UTF-8 with a header row; column 1 is `t` (seconds), then
features `f0..f{D-1}`, optionally a trailing `label` column (0 normal,
1 spatial outlier, 2 contextual outlier). Timestamps non-decreasing.

Score CSV: header `t,score,warmup,n_active,sampled`, one row per input
row; booleans encoded as 0/1.

Snapshots: JSON documents produced by the model/ensemble `snapshot()`
methods; floats survive the round trip exactly.
"""

import csv
import json

import numpy as np

from .errors import ParameterError, SnapshotError, StreamParseError
from .model import ENSEMBLE_FORMAT, SNAPSHOT_FORMAT, Ensemble, ObserverModel

DURATION_UNITS = {"s": 1.0, "m": 60.0, "h": 3600.0, "d": 86400.0, "w": 604800.0}

SCORE_HEADER = ["t", "score", "warmup", "n_active", "sampled"]


def parse_duration(text):
    """Parse '300', '1.5h', '2000m', '1w' ... into seconds (1w = 604800s)."""
    text = str(text).strip()
    if not text:
        raise ParameterError("empty duration")
    unit = 1.0
    if text[-1] in DURATION_UNITS:
        unit = DURATION_UNITS[text[-1]]
        text = text[:-1]
    try:
        value = float(text)
    except ValueError:
        raise ParameterError(f"cannot parse duration: {text!r}") from None
    return value * unit


def fmt(x):
    """Shortest decimal form that parses back to the same float."""
    return repr(float(x))


def stream_header(dims, with_label):
    cols = ["t"] + [f"f{d}" for d in range(dims)]
    if with_label:
        cols.append("label")
    return cols


def write_stream(path, points, with_label=True):
    """Write LabeledPoint records to a stream CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        first = True
        for p in points:
            if first:
                w.writerow(stream_header(len(p.v), with_label))
                first = False
            row = [fmt(p.t)] + [fmt(x) for x in p.v]
            if with_label:
                row.append(int(p.label))
            w.writerow(row)
        if first:
            raise ParameterError("refusing to write an empty stream")


def read_stream(path):
    """Iterate (line_number, t, features, label_or_None) from a stream CSV.

    Yields one row at a time; nothing else is buffered. Raises
    StreamParseError with the offending line number on malformed input.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise StreamParseError("file is empty", line=1) from None
        header = [h.strip() for h in header]
        if not header or header[0] != "t":
            raise StreamParseError("first column must be 't'", line=1)
        has_label = header[-1] == "label"
        n_features = len(header) - 1 - (1 if has_label else 0)
        if n_features < 1:
            raise StreamParseError("no feature columns found", line=1)
        expected = [f"f{d}" for d in range(n_features)]
        if header[1 : 1 + n_features] != expected:
            raise StreamParseError(
                f"feature columns must be named {expected}", line=1
            )
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise StreamParseError(
                    f"expected {width} columns, found {len(row)}", line=lineno
                )
            try:
                t = float(row[0])
                v = np.array([float(x) for x in row[1 : 1 + n_features]])
            except ValueError as exc:
                raise StreamParseError(str(exc), line=lineno) from None
            label = None
            if has_label:
                try:
                    label = int(row[-1])
                except ValueError as exc:
                    raise StreamParseError(str(exc), line=lineno) from None
                if label not in (0, 1, 2):
                    raise StreamParseError(
                        f"label must be 0, 1 or 2, got {label}", line=lineno
                    )
            yield lineno, t, v, label


class ScoreWriter:
    """Streaming score CSV writer; one row per processed point."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(SCORE_HEADER)

    def write(self, rec):
        self._w.writerow(
            [fmt(rec.t), fmt(rec.score), int(rec.warmup), rec.n_active, int(rec.sampled)]
        )

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_scores(path):
    """Load a score CSV into a dict of aligned numpy arrays.

    Extra trailing columns (e.g. a merged `label`) are tolerated.
    """
    t, score, warmup, n_active, sampled = [], [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[: len(SCORE_HEADER)] != SCORE_HEADER:
            raise StreamParseError(
                f"expected score header {SCORE_HEADER}, got {header}", line=1
            )
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise StreamParseError(
                    f"expected {width} columns, found {len(row)}", line=lineno
                )
            try:
                t.append(float(row[0]))
                score.append(float(row[1]))
                warmup.append(int(row[2]))
                n_active.append(int(row[3]))
                sampled.append(int(row[4]))
            except ValueError as exc:
                raise StreamParseError(str(exc), line=lineno) from None
    return {
        "t": np.array(t),
        "score": np.array(score),
        "warmup": np.array(warmup, dtype=bool),
        "n_active": np.array(n_active, dtype=int),
        "sampled": np.array(sampled, dtype=bool),
    }


def read_label_column(path):
    """Read the `label` column (and `t` when present) from any CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise StreamParseError("file is empty", line=1)
        header = [h.strip() for h in header]
        if "label" not in header:
            raise StreamParseError(f"no 'label' column in {path}", line=1)
        li = header.index("label")
        ti = header.index("t") if "t" in header else None
        labels, times = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                labels.append(int(row[li]))
                if ti is not None:
                    times.append(float(row[ti]))
            except (ValueError, IndexError) as exc:
                raise StreamParseError(str(exc), line=lineno) from None
    return (np.array(times) if ti is not None else None), np.array(labels, dtype=int)


def save_snapshot(path, snap):
    with open(path, "w") as fh:
        json.dump(snap, fh, indent=1)
        fh.write("\n")


def load_snapshot(path):
    try:
        with open(path) as fh:
            snap = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"not valid JSON: {exc}") from None
    if not isinstance(snap, dict):
        raise SnapshotError("snapshot must be a JSON object")
    return snap


def load_model(path):
    """Load a snapshot file into a model or ensemble."""
    snap = load_snapshot(path)
    tag = snap.get("format")
    if tag == SNAPSHOT_FORMAT:
        return ObserverModel.restore(snap)
    if tag == ENSEMBLE_FORMAT:
        return Ensemble.restore(snap)
    raise SnapshotError(f"unknown snapshot format: {tag!r}")
