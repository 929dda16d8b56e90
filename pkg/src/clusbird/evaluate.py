"""Cluster-recovery and loading-support metrics."""

from __future__ import annotations

import itertools
import warnings

import numpy as np


def _pairs(x: np.ndarray) -> int:
    x = np.asarray(x, dtype=np.int64)
    return int((x * (x - 1) // 2).sum())


def contingency(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def adjusted_rand_index(a, b) -> float:
    """Adjusted Rand index of two labelings (Hubert-Arabie form).

    Computed in exact integer arithmetic from the contingency table, with a single
    final division. When both partitions are trivial (all singletons or one block)
    the index is undefined; it is then reported as 1 if the partitions agree and 0
    otherwise, with a warning.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label vectors must be one-dimensional and of equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two items")
    table = contingency(a, b)
    total = n * (n - 1) // 2
    together = _pairs(table)
    rows = _pairs(table.sum(axis=1))
    cols = _pairs(table.sum(axis=0))
    num = 2 * (total * together - rows * cols)
    den = total * (rows + cols) - 2 * rows * cols
    if den == 0:
        same = rows == cols == together
        warnings.warn("adjusted Rand index is undefined for these partitions", RuntimeWarning,
                      stacklevel=2)
        return 1.0 if same else 0.0
    return num / den


def _column_matching(true_a: np.ndarray, est_a: np.ndarray) -> tuple[int, ...]:
    """Permutation ``p`` such that estimated column ``p[l]`` pairs with true column ``l``."""
    l = true_a.shape[1]  # noqa: E741
    score = np.abs(true_a.T @ est_a)
    if l <= 3:
        perms = itertools.permutations(range(l))
        return max(perms, key=lambda p: sum(score[i, p[i]] for i in range(l)))
    perm = [-1] * l
    free_rows, free_cols = set(range(l)), set(range(l))
    for _ in range(l):
        i, j = max(((i, j) for i in free_rows for j in free_cols), key=lambda ij: score[ij])
        perm[i] = j
        free_rows.discard(i)
        free_cols.discard(j)
    return tuple(perm)


def align_columns(true_a: np.ndarray, est_a: np.ndarray) -> np.ndarray:
    """Permute and sign-flip columns of ``est_a`` to best match ``true_a``."""
    true_a = np.asarray(true_a, dtype=float)
    est_a = np.asarray(est_a, dtype=float)
    if true_a.shape != est_a.shape:
        raise ValueError("loading matrices must have the same shape")
    out = est_a[:, list(_column_matching(true_a, est_a))]
    signs = np.where(np.sum(true_a * out, axis=0) < 0, -1.0, 1.0)
    return out * signs


def support_recovery(true_a, est_a) -> tuple[float, float]:
    """Fractions of true zeros estimated as exactly zero and of true nonzeros estimated nonzero.

    Columns are aligned first (exhaustively over permutations for L <= 3, greedily by
    absolute inner product otherwise). A rate is ``nan`` when its denominator is empty.
    """
    true_a = np.asarray(true_a, dtype=float)
    est = align_columns(true_a, est_a)
    zero = true_a == 0
    with np.errstate(invalid="ignore"):
        zero_rate = float(np.mean(est[zero] == 0)) if zero.any() else float("nan")
        nonzero_rate = float(np.mean(est[~zero] != 0)) if (~zero).any() else float("nan")
    return zero_rate, nonzero_rate
