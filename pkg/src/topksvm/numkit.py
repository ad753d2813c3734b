"""Dense float64 vector/matrix helpers and order statistics.

Everything operates on plain numpy arrays.  All public entry points reject
non-finite input, since the projection and solver routines downstream assume
clean floating point data.
"""

import numpy as np


def as_vector(v, name="v"):
    """Coerce to a finite 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_matrix(m, name="m"):
    """Coerce to a finite 2-D float64 array (column-major)."""
    arr = np.asfortranarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def _check_k(k, d):
    if not isinstance(k, (int, np.integer)):
        raise ValueError(f"k must be an integer, got {k!r}")
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")


def sum_top_k(v, k):
    """Sum of the k largest entries of v."""
    v = as_vector(v)
    _check_k(k, v.size)
    if k == v.size:
        return float(v.sum())
    return float(np.partition(v, v.size - k)[v.size - k:].sum())


def kth_largest(v, k):
    """The k-th largest value of v (ties resolved by value, not index)."""
    v = as_vector(v)
    _check_k(k, v.size)
    return float(np.partition(v, v.size - k)[v.size - k])


def sorted_desc_with_index(v):
    """Stable descending sort.

    Returns ``(order, values)`` where ``values = v[order]`` is sorted in
    descending order and equal values keep ascending original index order,
    so downstream partition searches are deterministic.
    """
    v = as_vector(v)
    order = np.argsort(-v, kind="stable")
    return order, v[order]


def rank1_update(W, x, delta):
    """In place ``W += x delta^T`` for W of shape (len(x), len(delta))."""
    x = as_vector(x, "x")
    delta = as_vector(delta, "delta")
    if W.shape != (x.size, delta.size):
        raise ValueError(
            f"W has shape {W.shape}, expected {(x.size, delta.size)}"
        )
    W += np.outer(x, delta)
    return W
