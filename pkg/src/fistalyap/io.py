"""CSV emitters for traces and diagnostic series.

Header row, comma separator, LF endings, floats written with 17 significant
digits so that parsing returns the exact in-memory values.  Missing values
are empty fields.
"""

import csv
import math

import numpy as np


def fmt(v):
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    return "%.17g" % v


def _parse(s):
    return math.nan if s == "" else float(s)


def _cell(c):
    if isinstance(c, str):
        return c
    if isinstance(c, (int, np.integer)):
        return str(c)
    return fmt(c)


def write_csv(path, header, rows):
    """Write to a path or an open text stream."""
    if hasattr(path, "write"):
        w = csv.writer(path, lineterminator="\n")
        w.writerow(header)
        w.writerows([_cell(c) for c in row] for row in rows)
        return
    with open(path, "w", newline="") as fh:
        write_csv(fh, header, rows)


def _column(cells):
    try:
        return np.array([_parse(c) for c in cells], dtype=float)
    except ValueError:
        return list(cells)  # text column, e.g. rule names


def read_csv(path):
    """Return (header, dict column -> float array, or list of str for text columns)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        cols = [[] for _ in header]
        for row in r:
            for i, cell in enumerate(row):
                cols[i].append(cell)
    return header, {h: _column(c) for h, c in zip(header, cols)}


def write_trace_csv(path, trace):
    """Columns: k, t, objective, gap, vel, x1..xd, y1..yd (y_k where recorded)."""
    d = trace.xs.shape[1]
    header = (["k", "t", "objective", "gap", "vel"]
              + [f"x{i + 1}" for i in range(d)] + [f"y{i + 1}" for i in range(d)])
    ypos = {int(k): j for j, k in enumerate(trace.y_ks)}
    rows = []
    for j, k in enumerate(trace.ks):
        k = int(k)
        t = trace.t_values[k - 1] if k >= 1 else None
        gap = trace.gaps[k] if trace.gaps is not None else None
        y = trace.ys[ypos[k]] if k in ypos else [None] * d
        rows.append([k, t, trace.objective[k], gap, trace.vel[k], *trace.xs[j], *y])
    write_csv(path, header, rows)


def write_series_csv(path, series, two_point=None):
    """Columns k, t, s, gap, vel, W, E, h and, with two-point data, R, D."""
    header = ["k", "t", "s", "gap", "vel", "W", "E", "h"]
    if two_point is not None:
        header += ["R", "D"]
    rows = []
    for j, k in enumerate(series.ks):
        row = [int(k), series.t[j], series.s[j], series.gap[j], series.vel[j],
               series.W[j], series.E[j], series.h[j]]
        if two_point is not None:
            row += [two_point.R[k], two_point.D[k]]
        rows.append(row)
    write_csv(path, header, rows)
