"""Benjamini-Hochberg step-up adjustment."""

from __future__ import annotations

import numpy as np


def bh_adjust(pvalues) -> np.ndarray:
    """BH-adjusted p-values, returned in the input order.

    For ascending p_(1..m): adjusted_(i) = min(1, min_{j >= i} m p_(j) / j).
    """
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 1:
        raise ValueError("expected a one-dimensional sequence of p-values")
    if p.size == 0:
        return p.copy()
    if np.any((p < 0) | (p > 1)) or np.any(~np.isfinite(p)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="mergesort")
    scaled = p[order] * m / np.arange(1, m + 1)
    stepped = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(stepped, 1.0)
    # never below the raw value (guards float rounding when m * p / rank == p)
    return np.maximum(out, p)
