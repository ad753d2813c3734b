"""Shared test utilities: reference projections, samplers, synthetic data."""

import numpy as np

from topksvm.io import Dataset


def reference_simplex_projection(a, r=1.0):
    """Classic sort-based Euclidean projection onto {x >= 0, <1,x> <= r}.

    Independent of the package's knapsack machinery on purpose: sort
    descending, find the pivot, threshold.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.sum() <= r and (a >= 0).all():
        return a.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - r
    idx = np.arange(1, a.size + 1)
    cond = u - css / idx > 0
    if not cond.any():
        return np.zeros_like(a)
    rho = int(np.nonzero(cond)[0][-1])
    theta = max(0.0, css[rho] / (rho + 1))
    return np.maximum(a - theta, 0.0)


def sample_topk_simplex(rng, m, k, r=1.0, n_vertices=4):
    """Random point of {<1,x> <= r, 0 <= x_i <= <1,x>/k}.

    Convex combination of polytope vertices (the origin plus uniform r/k
    spikes on random k-subsets), which is always feasible even when the set
    is thin (k close to m).
    """
    verts = [np.zeros(m)]
    for _ in range(n_vertices):
        v = np.zeros(m)
        v[rng.choice(m, size=k, replace=False)] = r / k
        verts.append(v)
    w = rng.dirichlet(np.ones(len(verts)))
    return sum(wi * vi for wi, vi in zip(w, verts))


def sample_capped_box(rng, m, k, r=1.0):
    """Random point of {<1,x> <= r, 0 <= x_i <= 1/k}."""
    x = rng.uniform(0.0, 1.0 / k, size=m)
    total = x.sum()
    if total > r:
        x *= r * rng.uniform(0.0, 1.0) / total
    return x


def random_margins(rng, m, y, scale=1.0):
    """Margin vector with a zero ground-truth coordinate."""
    a = rng.standard_normal(m) * scale
    a[y - 1] = 0.0
    return a


def gaussian_blobs(rng, n, d, m, spread=2.0):
    """Linearly structured multiclass data: one Gaussian blob per class."""
    centers = rng.standard_normal((d, m)) * spread
    y = rng.integers(1, m + 1, size=n)
    X = centers[:, y - 1] + rng.standard_normal((d, n))
    return Dataset(X=X, y=y, m=m)


def separable_two_class():
    """Four separable points in the plane, two classes."""
    X = np.array([[1.0, 2.0, -1.0, -2.0],
                  [1.0, 0.5, -1.0, -0.5]])
    y = np.array([1, 1, 2, 2])
    return Dataset(X=X, y=y, m=2)
