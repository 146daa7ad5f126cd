"""CSV and sidecar writers.

Floats are written with 17 significant digits so that files round-trip
exactly and identical runs give identical bytes.  Anything that varies
between runs (wall-clock times, thread counts) goes to sidecar files.
"""

import csv
import os

import numpy as np

__all__ = ["fmt", "write_csv", "write_sidecar", "write_columns", "write_events", "read_csv"]


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(h) for h in header]
            w.writerow([fmt(v) for v in row])
    return path


def write_columns(path, columns):
    """CSV from a mapping of equal-length columns."""
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    return write_csv(path, names, zip(*cols))


def write_events(path, paths):
    """One CSV of (replicate, class, unit, jump_time) rows for a list of EventPaths."""
    def rows():
        for ev in paths:
            cls = ev.unit_class[ev.units]
            for c, u, t in zip(cls, ev.units, ev.times):
                yield ev.replicate, c, u, t
    return write_csv(path, ("replicate", "class", "unit", "jump_time"), rows())


def write_sidecar(path, items):
    """Plain ``key: value`` metadata block."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k}: {fmt(v)}\n")
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
