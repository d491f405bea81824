"""Compensated (Neumaier) summation for running sums of scalars and vectors."""

import numpy as np


def two_sum(a, b):
    """Error-free transform: a + b == s + e exactly (elementwise for arrays)."""
    s = a + b
    bp = s - a
    ap = s - bp
    return s, (a - ap) + (b - bp)


class CompensatedSum:
    """Running sum carrying a correction term.

    Works with floats or numpy arrays of a fixed shape.
    """

    def __init__(self, start=0.0):
        self.total = np.array(start, dtype=float) if np.ndim(start) else float(start)
        self.comp = np.zeros_like(self.total) if np.ndim(start) else 0.0

    def add(self, value):
        self.total, err = two_sum(self.total, value)
        self.comp = self.comp + err
        return self

    @property
    def value(self):
        return self.total + self.comp


def cumsum_compensated(values, start=0.0):
    """Compensated cumulative sum along axis 0.

    Returns an array of the same shape where entry ``i`` is
    ``start + values[0] + ... + values[i]``.
    """
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    if values.ndim == 1:
        # scalar path avoids numpy overhead per element
        total, comp = float(start), 0.0
        for i, v in enumerate(values.tolist()):
            s = total + v
            bp = s - total
            comp += (total - (s - bp)) + (v - bp)
            total = s
            out[i] = total + comp
        return out
    acc = CompensatedSum(np.broadcast_to(np.asarray(start, dtype=float), values.shape[1:]).copy())
    for i in range(values.shape[0]):
        acc.add(values[i])
        out[i] = acc.value
    return out
