import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from topksvm import numkit

finite_vectors = arrays(
    np.float64,
    st.integers(1, 12),
    elements=st.floats(-100, 100, allow_nan=False, allow_infinity=False),
)


class TestSumTopK:
    def test_two_largest(self):
        assert numkit.sum_top_k([3.0, 1.0, 2.0], 2) == 5.0

    def test_whole_vector(self):
        assert numkit.sum_top_k([-1.0, -2.0, -3.0], 3) == -6.0

    def test_ties(self):
        v = [5.0, 5.0, 0.0]
        assert numkit.sum_top_k(v, 2) == 10.0
        # The same value is the minimum of k*t + sum of positive parts over
        # the breakpoints t in v; here the minimum sits at t = 5.
        vals = {t: 2 * t + sum(max(0.0, x - t) for x in v) for t in v}
        assert min(vals.values()) == 10.0
        assert vals[5.0] == 10.0

    @pytest.mark.parametrize("k", [0, 4, -1])
    def test_k_out_of_range(self, k):
        with pytest.raises(ValueError):
            numkit.sum_top_k([1.0, 2.0, 3.0], k)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            numkit.sum_top_k([1.0, np.nan], 1)

    @given(finite_vectors, st.data())
    @settings(max_examples=200, deadline=None)
    def test_breakpoint_identity(self, v, data):
        # sum of the k largest equals min_t (k t + sum_j [v_j - t]_+), and the
        # minimum over all reals is attained at an entry of v.
        k = data.draw(st.integers(1, len(v)))
        expected = min(k * t + np.maximum(v - t, 0.0).sum() for t in v)
        assert numkit.sum_top_k(v, k) == pytest.approx(expected, abs=1e-9)

    @given(finite_vectors, st.data())
    @settings(max_examples=200, deadline=None)
    def test_convexity(self, u, data):
        v = data.draw(
            arrays(np.float64, len(u),
                   elements=st.floats(-100, 100, allow_nan=False,
                                      allow_infinity=False))
        )
        k = data.draw(st.integers(1, len(u)))
        theta = data.draw(st.floats(0.0, 1.0))
        lhs = numkit.sum_top_k(theta * u + (1 - theta) * v, k)
        rhs = theta * numkit.sum_top_k(u, k) + (1 - theta) * numkit.sum_top_k(v, k)
        assert lhs <= rhs + 1e-8


class TestKthLargest:
    def test_examples(self):
        assert numkit.kth_largest([3.0, 1.0, 2.0], 2) == 2.0
        assert numkit.kth_largest([2.0, 2.0], 1) == 2.0
        assert numkit.kth_largest([-1.0, -2.0, -3.0], 3) == -3.0

    def test_agrees_with_full_sort_on_ties(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            v = rng.integers(-3, 4, size=rng.integers(1, 10)).astype(float)
            ordered = np.sort(v)[::-1]
            for k in range(1, v.size + 1):
                assert numkit.kth_largest(v, k) == ordered[k - 1]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            numkit.kth_largest([1.0], 2)


class TestSortedDescWithIndex:
    def test_stable_tie_break(self):
        order, values = numkit.sorted_desc_with_index([1.0, 3.0, 1.0, 3.0])
        assert values.tolist() == [3.0, 3.0, 1.0, 1.0]
        assert order.tolist() == [1, 3, 0, 2]

    @given(finite_vectors)
    @settings(max_examples=200, deadline=None)
    def test_idempotent_and_bijective(self, v):
        order, values = numkit.sorted_desc_with_index(v)
        assert sorted(order.tolist()) == list(range(len(v)))
        order2, values2 = numkit.sorted_desc_with_index(values)
        assert np.array_equal(values2, values)
        assert np.array_equal(order2, np.arange(len(v)))


class TestRank1Update:
    def test_basic(self):
        W = np.zeros((2, 2))
        numkit.rank1_update(W, [1.0, 0.0], [2.0, 3.0])
        assert W.tolist() == [[2.0, 3.0], [0.0, 0.0]]

    def test_zero_delta_is_identity(self):
        W = np.arange(6, dtype=float).reshape(2, 3)
        before = W.copy()
        numkit.rank1_update(W, [1.0, 2.0], [0.0, 0.0, 0.0])
        assert np.array_equal(W, before)

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(1)
        W = rng.standard_normal((3, 3))
        x = rng.standard_normal(3)
        delta = rng.standard_normal(3)
        expected = W.copy()
        for i in range(3):
            for j in range(3):
                expected[i, j] += x[i] * delta[j]
        numkit.rank1_update(W, x, delta)
        assert np.allclose(W, expected, atol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            numkit.rank1_update(np.zeros((2, 2)), [1.0], [1.0, 2.0])
