"""Exact (optionally biased) Euclidean projections onto top-k polytopes.

Constraint sets, for a point ``a`` in R^d:

* knapsack polytope   ``{x : <1,x> = rhs,  lo <= x_i <= up}``
* top-k cone          ``{x : 0 <= x_i <= (1/k) <1,x>}``
* top-k simplex       ``{x : <1,x> <= r,  0 <= x_i <= (1/k) <1,x>}``
* capped box          ``{x : <1,x> <= r,  0 <= x_i <= 1/k}``

All routines minimise ``0.5 ||a - x||^2 + 0.5 rho <1,x>^2`` over the set
(``rho = 0`` gives the plain Euclidean projection; the quadratic bias on the
coordinate sum is what the dual coordinate ascent solver needs).

Every solution has the threshold form ``x = min(max(0, a - t), u)`` and the
returned :class:`ProjectionResult` carries the thresholds ``(t, u)`` plus the
index partition

* ``U`` -- coordinates clamped at the upper bound,
* ``M`` -- coordinates strictly between the bounds,
* ``L`` -- coordinates at zero (or the lower bound),

which certify optimality and are handy for diagnostics.

The solvers work by variable fixing (knapsack) and by searching sorted index
partitions for thresholds that satisfy the stationarity system together with
its feasibility window.  ``oracle_project`` is an independent brute-force
reference that enumerates all ``3^d`` active-set assignments; it is meant for
testing only.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

try:
    from numba import njit as _njit
except ImportError:                                    # pragma: no cover
    _njit = None

from .numkit import as_vector, sum_top_k

logger = logging.getLogger(__name__)

# Absolute feasibility tolerance on returned points and oracle candidates.
FEASIBILITY_TOL = 1e-9
# Slack that makes the partition feasibility windows non-strict, absorbing
# rounding at partition boundaries.
WINDOW_SLACK = 1e-12

# Number of times the biased cone projection hit its zero fallback without a
# validated partition.  The zero-sum check is only sufficient for rho > 0, so
# we count these events instead of asserting the fallback is optimal.
cone_fallback_count = 0


@dataclass(frozen=True)
class TopKSimplexSpec:
    """Parameters of the top-k simplex: k, sum bound r, and bias weight rho."""

    k: int
    r: float
    rho: float = 0.0

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if not np.isfinite(self.r) or self.r < 0:
            raise ValueError(f"r must be a nonnegative real, got {self.r!r}")
        if not np.isfinite(self.rho) or self.rho < 0:
            raise ValueError(f"rho must be a nonnegative real, got {self.rho!r}")


@dataclass
class ProjectionResult:
    """Projected point plus the thresholds and partition that certify it.

    ``x`` reconstructs as ``min(max(lower, a - t), u)`` from the input ``a``;
    ``lower`` is 0 for every set except a general knapsack box.
    """

    x: np.ndarray
    t: float
    u: float
    partition: np.ndarray = field(repr=False)  # per-index tags 'U'/'M'/'L'
    lower: float = 0.0

    @property
    def sum(self):
        return float(self.x.sum())


def _tags(n_up=None, n_mid=None, up_mask=None, low_mask=None, d=None):
    """Build the per-index tag array either from masks or from sorted counts."""
    if up_mask is not None:
        tags = np.full(up_mask.size, "M", dtype="<U1")
        tags[up_mask] = "U"
        tags[low_mask & ~up_mask] = "L"
        return tags
    tags = np.full(d, "L", dtype="<U1")
    tags[:n_up] = "U"
    tags[n_up:n_up + n_mid] = "M"
    return tags


def _zero_result(a):
    """x = 0 with thresholds chosen so the clamp formula reproduces it."""
    t = max(0.0, float(a.max())) if a.size else 0.0
    return ProjectionResult(
        x=np.zeros_like(a), t=t, u=0.0,
        partition=np.full(a.size, "L", dtype="<U1"),
    )


def project_knapsack(a, lower, upper, rhs):
    """Project onto ``{x : <1,x> = rhs, lower <= x_i <= upper}``.

    Uses variable fixing: repeatedly solve the unconstrained mean threshold on
    the free coordinates, then permanently fix the side of the box that the
    excess proves active.  No sorting; linear passes that shrink geometrically
    in practice.

    Returns the projection together with the multiplier ``t`` such that
    ``x = clip(a - t, lower, upper)``.  When the optimal multiplier is an
    interval (no free coordinate remains), the upper end of the interval is
    returned.
    """
    a = as_vector(a, "a")
    d = a.size
    if d == 0:
        raise ValueError("cannot project an empty vector")
    if not (np.isfinite(lower) and np.isfinite(upper) and np.isfinite(rhs)):
        raise ValueError("lower, upper and rhs must be finite")
    if lower > upper:
        raise ValueError(f"empty box: lower={lower} > upper={upper}")
    scale = max(1.0, abs(rhs), d * abs(lower), d * abs(upper))
    tol = FEASIBILITY_TOL * scale
    if rhs < d * lower - tol or rhs > d * upper + tol:
        raise ValueError(
            f"infeasible: rhs={rhs} outside [{d * lower}, {d * upper}]"
        )

    vals = a
    residual = float(rhs)
    max_fixed_low = -np.inf   # largest a_i fixed at the lower bound
    min_fixed_up = np.inf     # smallest a_i fixed at the upper bound
    t = 0.0
    while vals.size:
        t = (vals.sum() - residual) / vals.size
        diff = vals - t
        low_viol = diff < lower
        up_viol = diff > upper
        n_low = int(low_viol.sum())
        n_up = int(up_viol.sum())
        if n_low == 0 and n_up == 0:
            break
        # Excess of the clamped sum over the residual decides which side is
        # provably active at the optimum.
        excess = (n_low * lower - diff[low_viol].sum()) \
            - (diff[up_viol].sum() - n_up * upper)
        if n_low and (excess >= 0 or n_up == 0):
            low_vals = vals[low_viol]
            max_fixed_low = max(max_fixed_low, float(low_vals.max()))
            residual -= lower * n_low
            vals = vals[~low_viol]
        else:
            up_vals = vals[up_viol]
            min_fixed_up = min(min_fixed_up, float(up_vals.min()))
            residual -= upper * n_up
            vals = vals[~up_viol]
    if vals.size == 0:
        # Degenerate: every coordinate at a bound; any multiplier in
        # [max_fixed_low - lower, min_fixed_up - upper] works.
        t = min_fixed_up - upper if np.isfinite(min_fixed_up) \
            else max_fixed_low - lower
    if not ((a - t > lower) & (a - t < upper)).any():
        # No strictly free coordinate: the optimal multiplier is an interval;
        # report its upper end so all knapsack routines agree on t.
        up_m = a - t >= upper
        t = float(a[up_m].min()) - upper if up_m.any() \
            else float(a.max()) - lower

    x = np.clip(a - t, lower, upper)
    up_mask = a - t >= upper
    low_mask = a - t <= lower
    return ProjectionResult(
        x=x, t=float(t), u=float(upper),
        partition=_tags(up_mask=up_mask, low_mask=low_mask),
        lower=float(lower),
    )


def project_knapsack_sorted(a, lower, upper, rhs):
    """Sort-based knapsack projection; must agree with :func:`project_knapsack`.

    Evaluates the clamped sum ``s(t) = sum_i clip(a_i - t, lower, upper)`` at
    every breakpoint and interpolates on the bracketing linear segment.  Kept
    as an independent cross-check for the variable-fixing routine.
    """
    a = as_vector(a, "a")
    d = a.size
    if d == 0:
        raise ValueError("cannot project an empty vector")
    if lower > upper:
        raise ValueError(f"empty box: lower={lower} > upper={upper}")
    scale = max(1.0, abs(rhs), d * abs(lower), d * abs(upper))
    tol = FEASIBILITY_TOL * scale
    if rhs < d * lower - tol or rhs > d * upper + tol:
        raise ValueError(
            f"infeasible: rhs={rhs} outside [{d * lower}, {d * upper}]"
        )

    z = np.sort(a)
    pref = np.concatenate(([0.0], np.cumsum(z)))

    def clamped_sum(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        n_up = d - np.searchsorted(z, ts + upper, side="left")
        n_low = np.searchsorted(z, ts + lower, side="right")
        mid = pref[d - n_up] - pref[n_low]
        n_mid = d - n_up - n_low
        return upper * n_up + lower * n_low + mid - ts * n_mid, n_mid

    bps = np.sort(np.concatenate((a - lower, a - upper)))
    s_at_bps, _ = clamped_sum(bps)
    # s is nonincreasing in t; find the largest breakpoint with s >= rhs.
    ge = s_at_bps >= rhs
    if not ge.any():
        t = float(bps[0])                       # rhs ~= d*upper
    else:
        j = int(np.nonzero(ge)[0][-1])
        if s_at_bps[j] <= rhs + tol:
            t = float(bps[j])                   # plateau: right end
        else:
            # Root lies in the open segment (bps[j], bps[j+1]).
            _, n_mid = clamped_sum((bps[j] + bps[min(j + 1, bps.size - 1)]) / 2.0)
            n_mid = int(n_mid[0])
            if n_mid == 0:
                t = float(bps[j])
            else:
                t = float(bps[j] + (s_at_bps[j] - rhs) / n_mid)
    x = np.clip(a - t, lower, upper)
    up_mask = a - t >= upper
    low_mask = a - t <= lower
    return ProjectionResult(
        x=x, t=t, u=float(upper),
        partition=_tags(up_mask=up_mask, low_mask=low_mask),
        lower=float(lower),
    )


def _constant_cone_candidate(z, k, rho):
    """Try the all-at-upper-bound cone solution on the k largest entries.

    Returns ``(t, u)`` if the feasibility window is nonempty, else None.  The
    window leaves one degree of freedom in t; we take max(0, max_L a_i)
    clamped into the window so the clamp formula reconstructs x exactly.
    """
    d = z.size
    sigma = float(z[:k].sum())
    s = sigma / (1.0 + rho * k)
    u = s / k
    t_lo = float(z[k]) if d > k else -np.inf
    t_hi = float(z[k - 1]) - u
    if t_lo > t_hi + WINDOW_SLACK:
        return None
    base = max(0.0, t_lo) if np.isfinite(t_lo) else 0.0
    t = min(base, t_hi)
    return t, u


def project_topk_cone(a, k, rho=0.0):
    """Biased projection onto ``{x : 0 <= x_i <= (1/k) <1,x>}``.

    Dispatch: return zero when the k largest entries sum to <= 0 (necessary
    and sufficient for rho = 0, sufficient otherwise); try the constant
    solution on the top k; otherwise search sorted partitions with
    ``|U| ascending then |M| ascending`` and accept the first threshold pair
    that lands inside its feasibility window.  For rho > 0 an exhausted
    search falls back to zero and bumps :data:`cone_fallback_count`.
    """
    global cone_fallback_count
    a = as_vector(a, "a")
    d = a.size
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k!r}")
    if not np.isfinite(rho) or rho < 0:
        raise ValueError(f"rho must be a nonnegative real, got {rho!r}")
    k = int(k)

    order = np.argsort(-a, kind="stable")
    z = a[order]
    if float(z[:k].sum()) <= 0.0:
        return _zero_result(a)

    constant = _constant_cone_candidate(z, k, rho)
    if constant is not None:
        t, u = constant
        x = np.minimum(np.maximum(0.0, a - t), u)
        tags = _tags(n_up=k, n_mid=0, d=d)[np.argsort(order, kind="stable")]
        return ProjectionResult(x=x, t=t, u=u, partition=tags)

    hit = _search_cone_partitions(z, k, rho)
    if hit is None:
        if rho > 0:
            cone_fallback_count += 1
            logger.debug(
                "biased cone projection fell back to zero (count=%d)",
                cone_fallback_count,
            )
            return _zero_result(a)
        raise RuntimeError(
            "no feasible partition found for the Euclidean cone projection; "
            "this indicates a numerical failure"
        )
    n_up, n_mid, t, u = hit
    x = np.minimum(np.maximum(0.0, a - t), u)
    tags = _tags(n_up=n_up, n_mid=n_mid, d=d)[np.argsort(order, kind="stable")]
    return ProjectionResult(x=x, t=t, u=u, partition=tags)


def _search_cone_partitions(z, k, rho):
    """First (|U| asc, |M| asc) partition whose thresholds satisfy the window.

    ``z`` is sorted descending.  For each candidate size pair the linear
    stationarity system gives (u, t'); t = t' + rho*u*k.  All |M| values for
    one |U| are evaluated vectorised.
    """
    d = z.size
    pref = np.concatenate(([0.0], np.cumsum(z)))
    for n_up in range(0, k):
        s_up = pref[n_up]
        m_lo = max(1, k - n_up)
        m_hi = d - n_up
        if m_lo > m_hi:
            continue
        n_mid = np.arange(m_lo, m_hi + 1)
        s_mid = pref[n_up + n_mid] - s_up
        denom = (k - n_up) ** 2 + (n_up + rho * k * k) * n_mid
        u = (n_mid * s_up + (k - n_up) * s_mid) / denom
        t_prime = (n_up * (1.0 + rho * k) * s_mid
                   - (k - n_up + rho * k * n_mid) * s_up) / denom
        t = t_prime + rho * k * u

        last = n_up + n_mid          # index of the first L element, may be d
        max_low = np.where(last < d, z[np.minimum(last, d - 1)], -np.inf)
        min_mid = z[n_up + n_mid - 1]
        max_mid = z[n_up]
        min_up = z[n_up - 1] if n_up > 0 else np.inf
        ok = (
            (max_low <= t + WINDOW_SLACK)
            & (t <= min_mid + WINDOW_SLACK)
            & (max_mid <= t + u + WINDOW_SLACK)
            & (t + u <= min_up + WINDOW_SLACK)
        )
        if ok.any():
            j = int(np.argmax(ok))
            return n_up, int(n_mid[j]), float(t[j]), float(u[j])
    return None


def project_topk_simplex(a, spec):
    """Biased projection onto the top-k simplex described by ``spec``.

    After the zero and constant special cases, solve the sum-equality
    knapsack subproblem (upper bound r/k, right-hand side r) and accept it
    when the multiplier of the sum constraint is nonnegative; otherwise the
    sum constraint is slack and the answer is the cone projection.
    """
    if not isinstance(spec, TopKSimplexSpec):
        raise ValueError(f"spec must be a TopKSimplexSpec, got {type(spec)!r}")
    a = as_vector(a, "a")
    d = a.size
    k, r, rho = spec.k, float(spec.r), float(spec.rho)
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")

    if r == 0.0:
        return _zero_result(a)
    if d == 1:
        # 1-D set is the interval [0, r]; the bias shrinks the free optimum.
        x0 = float(a[0]) / (1.0 + rho)
        x = min(max(0.0, x0), r)
        tag = "L" if x == 0.0 else "U"
        return ProjectionResult(
            x=np.array([x]), t=float(a[0]) - x, u=x,
            partition=np.array([tag], dtype="<U1"),
        )

    order = np.argsort(-a, kind="stable")
    z = a[order]
    sigma = float(z[:k].sum())
    if sigma <= 0.0:
        return _zero_result(a)

    # Constant cone solution, valid for the simplex when its sum fits in r.
    s_const = sigma / (1.0 + rho * k)
    if s_const <= r + WINDOW_SLACK:
        constant = _constant_cone_candidate(z, k, rho)
        if constant is not None:
            t, u = constant
            x = np.minimum(np.maximum(0.0, a - t), u)
            tags = _tags(n_up=k, n_mid=0, d=d)[np.argsort(order, kind="stable")]
            return ProjectionResult(x=x, t=t, u=u, partition=tags)

    knap = project_knapsack(a, 0.0, r / k, r)
    p = float(np.maximum(0.0, a - knap.t - knap.u).sum())
    lam = knap.t + p / k - rho * r
    if lam >= -WINDOW_SLACK:
        return knap
    return project_topk_cone(a, k, rho)


def project_topk_box(a, k, r, rho=0.0):
    """Biased projection onto ``{x : <1,x> <= r, 0 <= x_i <= 1/k}``.

    If the sum-equality knapsack multiplier exceeds rho*r the sum constraint
    is active and the knapsack solution is returned.  Otherwise the sum is
    slack: for rho = 0 this is plain clipping to the box, and for rho > 0 the
    threshold solves ``t = rho * (u|U| + sum_M a_i) / (1 + rho |M|)``, found
    by scanning the breakpoints of the clamp pattern (the equation is
    monotone in t, so the consistent partition is unique).
    """
    a = as_vector(a, "a")
    d = a.size
    if d == 0:
        raise ValueError("cannot project an empty vector")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if not np.isfinite(r) or r < 0:
        raise ValueError(f"r must be a nonnegative real, got {r!r}")
    if not np.isfinite(rho) or rho < 0:
        raise ValueError(f"rho must be a nonnegative real, got {rho!r}")
    k = int(k)
    u = 1.0 / k

    if r == 0.0:
        return _zero_result(a)

    if d * u > r + FEASIBILITY_TOL * max(1.0, r):
        knap = project_knapsack(a, 0.0, u, r)
        if knap.t > rho * r + WINDOW_SLACK:
            return knap

    # Sum constraint slack at the optimum.
    if rho == 0.0:
        t = 0.0
    else:
        t = _box_threshold(a, u, rho)
    x = np.minimum(np.maximum(0.0, a - t), u)
    up_mask = a - t >= u
    low_mask = a - t <= 0.0
    return ProjectionResult(
        x=x, t=t, u=u, partition=_tags(up_mask=up_mask, low_mask=low_mask),
    )


def _box_threshold(a, u, rho):
    """Root of ``t / rho = sum_i clip(a_i - t, 0, u)`` (strictly increasing)."""
    d = a.size
    z = np.sort(a)
    pref = np.concatenate(([0.0], np.cumsum(z)))

    def pattern(ts):
        n_up = d - np.searchsorted(z, ts + u, side="left")
        n_low = np.searchsorted(z, ts, side="right")
        s_mid = pref[d - n_up] - pref[n_low]
        n_mid = d - n_up - n_low
        return n_up, n_mid, s_mid

    bps = np.sort(np.concatenate((a - u, a)))
    n_up, n_mid, s_mid = pattern(bps)
    h = bps / rho - (u * n_up + s_mid - bps * n_mid)
    ge = h >= 0.0
    if ge[0]:
        t = rho * d * u                      # everything at the upper bound
    elif not ge.any():
        t = 0.0                              # everything below zero
    else:
        j = int(np.argmax(ge))
        mid = (bps[j - 1] + bps[j]) / 2.0
        n_up_j, n_mid_j, s_mid_j = pattern(np.array([mid]))
        t = rho * (u * float(n_up_j[0]) + float(s_mid_j[0])) \
            / (1.0 + rho * float(n_mid_j[0]))
    return max(0.0, float(t))


# ---------------------------------------------------------------------------
# Brute-force oracle (testing only)
# ---------------------------------------------------------------------------

_ORACLE_MAX_DIM = 10


@lru_cache(maxsize=16)
def _partition_masks(d):
    """Boolean masks of all 3^d assignments of coordinates to L/M/U."""
    idx = np.arange(3 ** d)
    digits = (idx[:, None] // 3 ** np.arange(d)[None, :]) % 3
    return digits == 0, digits == 1, digits == 2   # L, M, U


class _OraclePack:
    """Per-partition sums shared by every constraint applied to one batch.

    Everything here depends only on the input columns, so the acceptance
    suite can reuse one pack across the whole (k, rho, r) grid.
    """

    def __init__(self, A):
        self.A = A
        d, n = A.shape
        self.L_mask, self.M_mask, self.U_mask = _partition_masks(d)
        Lf = self.L_mask.astype(np.float64)
        Mf = self.M_mask.astype(np.float64)
        Uf = self.U_mask.astype(np.float64)
        self.n_low = self.L_mask.sum(axis=1).astype(np.float64)[:, None]
        self.n_mid = self.M_mask.sum(axis=1).astype(np.float64)[:, None]
        self.n_up = self.U_mask.sum(axis=1).astype(np.float64)[:, None]
        self.SL = Lf @ A
        self.SM = Mf @ A
        self.SU = Uf @ A
        A2 = A * A
        self.QL = Lf @ A2
        self.QU = Uf @ A2
        big = np.inf
        with np.errstate(invalid="ignore"):
            self.min_mid = np.where(
                self.M_mask[:, :, None], A[None, :, :], big
            ).min(axis=1)
            self.max_mid = np.where(
                self.M_mask[:, :, None], A[None, :, :], -big
            ).max(axis=1)

    def mid_feasible(self, t, lo, up):
        tol = FEASIBILITY_TOL
        no_mid = self.n_mid == 0
        ok_lo = no_mid | (self.min_mid - t >= lo - tol)
        ok_up = no_mid | (self.max_mid - t <= up + tol)
        return ok_lo & ok_up


def oracle_project(a, constraint, rho=0.0):
    """Exact projection by enumerating all 3^d active-set assignments.

    ``constraint`` is a tuple describing the set:

    * ``("knapsack", lower, upper, rhs)``
    * ``("topk_cone", k)``
    * ``("topk_simplex", k, r)``
    * ``("topk_box", k, r)``

    Each assignment fixes coordinates to the lower bound, the upper bound, or
    leaves them free; the resulting equality-constrained quadratic is solved
    in closed form, candidates are filtered by primal feasibility, and the
    feasible candidate with the least objective wins.  Requires d <= 10.

    ``a`` may be a (d,) vector or a (d, n) batch; batches return (d, n).
    """
    return oracle_project_many(a, [(constraint, rho)])[0]


def oracle_project_many(a, jobs):
    """Run :func:`oracle_project` for several ``(constraint, rho)`` jobs.

    The per-partition sums are computed once per input batch and shared by
    all jobs, which is what keeps grid-shaped test sweeps fast.  Returns one
    array per job.
    """
    arr = np.asarray(a, dtype=np.float64)
    single = arr.ndim == 1
    A = arr[:, None] if single else arr
    if A.ndim != 2:
        raise ValueError(f"a must be 1-D or 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("a contains NaN or Inf")
    d = A.shape[0]
    if d > _ORACLE_MAX_DIM:
        raise ValueError(
            f"oracle limited to d <= {_ORACLE_MAX_DIM}, got d = {d}"
        )
    for _, rho in jobs:
        if not np.isfinite(rho) or rho < 0:
            raise ValueError(f"rho must be a nonnegative real, got {rho!r}")
    # The feasibility scan materialises 3^d x d x chunk temporaries; keep the
    # column chunks small enough that those stay a few dozen megabytes.
    chunk = max(1, 8_000_000 // (3 ** d * d))
    apply = _oracle_apply if _njit is None else _oracle_apply_compiled
    outs = [[] for _ in jobs]
    for j in range(0, A.shape[1], chunk):
        pack = _OraclePack(A[:, j:j + chunk])
        for i, (constraint, rho) in enumerate(jobs):
            outs[i].append(apply(pack, constraint, float(rho)))
    results = [np.concatenate(parts, axis=1) for parts in outs]
    if single:
        results = [X[:, 0] for X in results]
    return results


def _oracle_apply(pack, constraint, rho):
    A = pack.A
    d, n = A.shape
    n_low, n_mid, n_up = pack.n_low, pack.n_mid, pack.n_up
    SL, SM, SU, QL, QU = pack.SL, pack.SM, pack.SU, pack.QL, pack.QU
    kind = constraint[0]
    tol = FEASIBILITY_TOL

    candidates = []  # (objective, feasible, t, upper-value, lower-value)

    if kind == "knapsack":
        _, lo, up, rhs = constraint
        fixed = lo * n_low + up * n_up
        t = np.where(n_mid > 0, (SM - (rhs - fixed)) / np.maximum(n_mid, 1), 0.0)
        feas = pack.mid_feasible(t, lo, up)
        feas &= (n_mid > 0) | (np.abs(fixed - rhs) <= tol * max(1.0, abs(rhs)))
        obj = 0.5 * ((QL - 2 * lo * SL + n_low * lo * lo)
                     + n_mid * t * t
                     + (QU - 2 * up * SU + n_up * up * up))
        candidates.append((obj, feas, t, np.full_like(t, up), lo))
    elif kind in ("topk_cone", "topk_simplex"):
        k = int(constraint[1])
        # Sum-slack case: upper bound is s/k with s free; solve the 2x2
        # stationarity system for (t, s) per partition.
        a12 = 1.0 - n_up / k
        a22 = n_up / (k * k) + rho
        det = n_mid * a22 + a12 * a12
        degenerate = det == 0.0          # exactly |M| = 0 and |U| = k (rho=0)
        safe_det = np.where(degenerate, 1.0, det)
        t = (a22 * SM - a12 * SU / k) / safe_det
        s = (n_mid * SU / k + a12 * SM) / safe_det
        t = np.where(degenerate, 0.0, t)
        s = np.where(
            degenerate, np.where(np.abs(n_up - k) < 0.5, SU / (1.0 + rho * k), 0.0), s
        )
        u = s / k
        feas = (s >= -tol) & pack.mid_feasible(t, 0.0, u)
        if kind == "topk_simplex":
            r = float(constraint[2])
            feas &= s <= r + tol * max(1.0, r)
        obj = 0.5 * (QL + n_mid * t * t
                     + (QU - 2 * u * SU + n_up * u * u)
                     + rho * s * s)
        candidates.append((obj, feas, t, u, 0.0))
        if kind == "topk_simplex":
            # Sum-active case: s = r, upper bound r/k.
            r = float(constraint[2])
            ur = r / k
            fixed = ur * n_up
            t_eq = np.where(n_mid > 0, (SM - (r - fixed)) / np.maximum(n_mid, 1), 0.0)
            feas_eq = pack.mid_feasible(t_eq, 0.0, ur)
            feas_eq &= (n_mid > 0) | (np.abs(fixed - r) <= tol * max(1.0, r))
            obj_eq = 0.5 * (QL + n_mid * t_eq * t_eq
                            + (QU - 2 * ur * SU + n_up * ur * ur)
                            + rho * r * r)
            candidates.append((obj_eq, feas_eq, t_eq, np.full_like(t_eq, ur), 0.0))
    elif kind == "topk_box":
        k = int(constraint[1])
        r = float(constraint[2])
        ub = 1.0 / k
        # Sum-slack case: t = rho * s with s = ub|U| + sum_M a_i - t|M|.
        t = rho * (ub * n_up + SM) / (1.0 + rho * n_mid)
        s = ub * n_up + SM - t * n_mid
        feas = pack.mid_feasible(t, 0.0, ub) & (s <= r + tol * max(1.0, r))
        obj = 0.5 * (QL + n_mid * t * t
                     + (QU - 2 * ub * SU + n_up * ub * ub)
                     + rho * s * s)
        candidates.append((obj, feas, t, np.full_like(t, ub), 0.0))
        # Sum-active case: s = r.
        fixed = ub * n_up
        t_eq = np.where(n_mid > 0, (SM - (r - fixed)) / np.maximum(n_mid, 1), 0.0)
        feas_eq = pack.mid_feasible(t_eq, 0.0, ub)
        feas_eq &= (n_mid > 0) | (np.abs(fixed - r) <= tol * max(1.0, r))
        obj_eq = 0.5 * (QL + n_mid * t_eq * t_eq
                        + (QU - 2 * ub * SU + n_up * ub * ub)
                        + rho * r * r)
        candidates.append((obj_eq, feas_eq, t_eq, np.full_like(t_eq, ub), 0.0))
    else:
        raise ValueError(f"unknown constraint kind {kind!r}")

    best_obj = np.full(n, np.inf)
    best = [None] * n
    cols = np.arange(n)
    for obj, feas, t, uval, lo in candidates:
        obj = np.where(feas, obj, np.inf)
        part = np.argmin(obj, axis=0)
        vals = obj[part, cols]
        better = vals < best_obj
        for j in np.nonzero(better)[0]:
            p = part[j]
            best[j] = (p, float(t[p, j]), float(uval[p, j]), lo)
        best_obj = np.where(better, vals, best_obj)

    if any(b is None for b in best):
        raise ValueError("no feasible active-set assignment: infeasible problem")

    X = np.empty_like(A)
    for j, (p, t, uval, lo) in enumerate(best):
        X[:, j] = np.where(
            pack.U_mask[p], uval, np.where(pack.M_mask[p], A[:, j] - t, lo)
        )
    return X


_KIND_CODES = {"knapsack": 0, "topk_cone": 1, "topk_simplex": 2, "topk_box": 3}

if _njit is not None:

    @_njit(cache=True)
    def _oracle_scan(kind, k, r, rho, lo, up, rhs,
                     n_low, n_mid, n_up, SL, SM, SU, QL, QU, MinM, MaxM,
                     best_obj, best_t, best_u, best_p):
        """Scan all partitions, keeping the best feasible candidate per column.

        Compiled twin of the candidate construction in ``_oracle_apply``;
        identical formulas, merged into one pass over (partition, column).
        """
        P, n = SM.shape
        tol = 1e-9
        for p in range(P):
            nl = n_low[p]
            nm = n_mid[p]
            nu = n_up[p]
            for j in range(n):
                sm = SM[p, j]
                su = SU[p, j]
                base = QL[p, j] + QU[p, j]
                mn = MinM[p, j]
                mx = MaxM[p, j]
                for fam in range(2):
                    feas = True
                    t = 0.0
                    uval = 0.0
                    obj = np.inf
                    if kind == 0:                      # knapsack, one family
                        if fam == 1:
                            continue
                        fixed = lo * nl + up * nu
                        if nm > 0:
                            t = (sm - (rhs - fixed)) / nm
                        else:
                            feas = abs(fixed - rhs) <= tol * max(1.0, abs(rhs))
                        if nm > 0 and not (mn - t >= lo - tol and mx - t <= up + tol):
                            feas = False
                        if feas:
                            uval = up
                            obj = 0.5 * (base - 2 * lo * SL[p, j] + nl * lo * lo
                                         + nm * t * t - 2 * up * su + nu * up * up)
                    elif (kind == 1 and fam == 0) or kind == 2:
                        if fam == 0:                   # sum-slack: bound s/k free
                            a12 = 1.0 - nu / k
                            a22 = nu / (k * k) + rho
                            det = nm * a22 + a12 * a12
                            if det == 0.0:
                                t = 0.0
                                s = su / (1.0 + rho * k) if abs(nu - k) < 0.5 else 0.0
                            else:
                                t = (a22 * sm - a12 * su / k) / det
                                s = (nm * su / k + a12 * sm) / det
                            uval = s / k
                            feas = s >= -tol
                            if kind == 2:
                                feas = feas and s <= r + tol * max(1.0, r)
                            if feas and nm > 0:
                                feas = mn - t >= -tol and mx - t <= uval + tol
                            if feas:
                                obj = 0.5 * (base + nm * t * t - 2 * uval * su
                                             + nu * uval * uval + rho * s * s)
                        else:                          # sum fixed at r
                            if kind == 1:
                                continue
                            uval = r / k
                            fixed = uval * nu
                            if nm > 0:
                                t = (sm - (r - fixed)) / nm
                            else:
                                feas = abs(fixed - r) <= tol * max(1.0, r)
                            if feas and nm > 0:
                                feas = mn - t >= -tol and mx - t <= uval + tol
                            if feas:
                                obj = 0.5 * (base + nm * t * t - 2 * uval * su
                                             + nu * uval * uval + rho * r * r)
                    elif kind == 3:                    # capped box
                        uval = 1.0 / k
                        if fam == 0:                   # sum-slack: t = rho * s
                            t = rho * (uval * nu + sm) / (1.0 + rho * nm)
                            s = uval * nu + sm - t * nm
                            feas = s <= r + tol * max(1.0, r)
                        else:                          # sum fixed at r
                            s = r
                            fixed = uval * nu
                            if nm > 0:
                                t = (sm - (r - fixed)) / nm
                            else:
                                feas = abs(fixed - r) <= tol * max(1.0, r)
                        if feas and nm > 0:
                            feas = mn - t >= -tol and mx - t <= uval + tol
                        if feas:
                            obj = 0.5 * (base + nm * t * t - 2 * uval * su
                                         + nu * uval * uval + rho * s * s)
                    else:
                        continue
                    if feas and obj < best_obj[j]:
                        best_obj[j] = obj
                        best_t[j] = t
                        best_u[j] = uval
                        best_p[j] = p


def _oracle_apply_compiled(pack, constraint, rho):
    """Numba-backed twin of :func:`_oracle_apply`."""
    A = pack.A
    d, n = A.shape
    kind = _KIND_CODES[constraint[0]]
    k = r = 1.0
    lo = up = rhs = 0.0
    if kind == 0:
        _, lo, up, rhs = constraint
    else:
        k = float(constraint[1])
        if kind != 1:
            r = float(constraint[2])
    best_obj = np.full(n, np.inf)
    best_t = np.zeros(n)
    best_u = np.zeros(n)
    best_p = np.zeros(n, dtype=np.int64)
    _oracle_scan(kind, k, r, rho, float(lo), float(up), float(rhs),
                 pack.n_low[:, 0], pack.n_mid[:, 0], pack.n_up[:, 0],
                 pack.SL, pack.SM, pack.SU, pack.QL, pack.QU,
                 pack.min_mid, pack.max_mid,
                 best_obj, best_t, best_u, best_p)
    if not np.all(np.isfinite(best_obj)):
        raise ValueError("no feasible active-set assignment: infeasible problem")
    X = np.empty_like(A)
    low_val = lo if kind == 0 else 0.0
    for j in range(n):
        p = best_p[j]
        X[:, j] = np.where(
            pack.U_mask[p], best_u[j],
            np.where(pack.M_mask[p], A[:, j] - best_t[j], low_val),
        )
    return X
