"""Plug-in entropy and mutual information for discrete variables, in bits.

All quantities are computed from an integer contingency table so that the
processing-chain inequalities hold exactly on the reported values:
I is assembled as H(col) - H(col|row) with H(col|row) a sum of non-negative
terms, and entropies are clamped at their log2(support) ceiling (the true
value is below it; the clamp only removes float rounding).
"""

from __future__ import annotations

import math

import numpy as np


def joint_counts(x: np.ndarray, y: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """Integer contingency table of two label arrays, shape (nx, ny)."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError("label arrays must have the same length")
    flat = np.bincount(x * ny + y, minlength=nx * ny)
    return flat.reshape(nx, ny)


def entropy_bits(counts: np.ndarray) -> float:
    """Entropy of the empirical distribution of an integer count vector."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    h = math.fsum(-pi * math.log2(pi) for pi in p)
    return min(h, math.log2(len(counts))) if len(counts) > 1 else 0.0


def conditional_entropy_bits(joint: np.ndarray) -> float:
    """H(col | row) of an integer contingency table; non-negative by construction."""
    joint = np.asarray(joint, dtype=float)
    total = joint.sum()
    if total <= 0:
        return 0.0
    h = 0.0
    for row in joint:
        n_row = row.sum()
        if n_row > 0:
            h += (n_row / total) * entropy_bits(row)
    return h


def mutual_information_bits(joint: np.ndarray) -> float:
    """I(row; col) = H(col) - H(col|row); never exceeds the reported H(col)."""
    h_col = entropy_bits(np.asarray(joint).sum(axis=0))
    return h_col - conditional_entropy_bits(joint)
