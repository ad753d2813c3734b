"""Multiclass hinge losses over the k highest margins, and top-k error.

Margins are expressed relative to the ground-truth class: for an example with
label y (1-based) and class scores s, the margin vector is
``a_j = s_j - s_y`` (so ``a_y = 0``), and the comparison shift is
``c = 1 - e_y``.

Two convex surrogates of the top-k zero-one error are provided:

* ``alpha``: threshold the average of the k largest entries of a + c,
* ``beta``:  average the k largest thresholded entries of a + c.

Both coincide with the standard multiclass hinge loss for k = 1, and alpha
never exceeds beta.  Their convex conjugates are linear (``-<c, b>``) on the
top-k simplex (alpha) respectively the 1/k-capped box (beta), and +inf
outside; the conjugate domains drive the dual solver's projection step.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .numkit import as_vector, kth_largest

VARIANTS = ("alpha", "beta")

# Tolerance on the conjugate domain membership inequalities.
DOMAIN_TOL = 1e-9


@dataclass(frozen=True)
class LossSpec:
    """Loss family member: variant in {"alpha", "beta"} and the rank cutoff k."""

    variant: str = "alpha"
    k: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}"
            )
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")


@dataclass(frozen=True)
class MarginVector:
    """Ground-truth-relative margins ``a`` (``a[y-1] == 0``) and label y."""

    a: np.ndarray
    y: int

    def __post_init__(self):
        a = as_vector(self.a, "a")
        object.__setattr__(self, "a", a)
        if not 1 <= self.y <= a.size:
            raise ValueError(f"y must be in [1, {a.size}], got {self.y}")
        if a[self.y - 1] != 0.0:
            raise ValueError("margin at the ground-truth coordinate must be 0")


def _shifted(mv):
    """a + c with c = 1 - e_y."""
    h = mv.a + 1.0
    h[mv.y - 1] -= 1.0
    return h


def loss_primal(mv, spec):
    """Evaluate the chosen top-k hinge surrogate at a margin vector."""
    m = mv.a.size
    if spec.k >= m:
        raise ValueError(f"need k < m for the training loss, got k={spec.k}, m={m}")
    h = _shifted(mv)
    top = np.partition(h, m - spec.k)[m - spec.k:]
    if spec.variant == "alpha":
        return float(max(0.0, top.sum() / spec.k))
    return float(np.maximum(0.0, top).sum() / spec.k)


def loss_conjugate(b, y, spec):
    """Convex conjugate of the top-k hinge loss at b.

    Returns ``-<c, b>`` when b lies in the conjugate domain (top-k simplex for
    alpha, 1/k-capped box for beta, both with unit sum bound) within a 1e-9
    tolerance, and ``math.inf`` otherwise.  Infeasibility is a sentinel, not
    an error: the solver never lands outside the domain but tests do.
    """
    b = as_vector(b, "b")
    m = b.size
    if not 1 <= y <= m:
        raise ValueError(f"y must be in [1, {m}], got {y}")
    if spec.k > m:
        raise ValueError(f"k must be at most m={m}, got {spec.k}")
    total = float(b.sum())
    if b.min() < -DOMAIN_TOL or total > 1.0 + DOMAIN_TOL:
        return math.inf
    cap = total / spec.k if spec.variant == "alpha" else 1.0 / spec.k
    if b.max() > cap + DOMAIN_TOL:
        return math.inf
    return -(total - float(b[y - 1]))


def loss_primal_via_lp(mv, spec):
    """Alpha loss as a maximum over the vertices of the top-k simplex.

    The domain has one vertex per k-subset (uniform 1/k on the subset) plus
    the origin, so this enumerates ``C(m, k) + 1`` candidates.  Testing
    reference for small m; must match :func:`loss_primal` for alpha.
    """
    m = mv.a.size
    if spec.k >= m:
        raise ValueError(f"need k < m, got k={spec.k}, m={m}")
    h = _shifted(mv)
    best = 0.0
    for subset in itertools.combinations(range(m), spec.k):
        best = max(best, float(h[list(subset)].sum()) / spec.k)
    return best


def topk_error(scores, y, k):
    """Top-k zero-one error: 1 iff the k-th best score strictly beats class y."""
    scores = as_vector(scores, "scores")
    if not 1 <= y <= scores.size:
        raise ValueError(f"y must be in [1, {scores.size}], got {y}")
    return int(kth_largest(scores, k) > scores[y - 1])
