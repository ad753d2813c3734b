import itertools
import math

import numpy as np
import pytest

from topksvm import losses
from topksvm.losses import LossSpec, MarginVector
from topksvm.numkit import kth_largest

from _helpers import random_margins, sample_capped_box, sample_topk_simplex


def margin_indicator(a, y, k):
    """Thresholded k-th largest shifted margin (the nonconvex loss)."""
    h = np.asarray(a) + 1.0
    h[y - 1] -= 1.0
    return max(0.0, kth_largest(h, k))


class TestLossSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            LossSpec(variant="gamma", k=1)
        with pytest.raises(ValueError):
            LossSpec(variant="alpha", k=0)

    def test_margin_vector_requires_zero_at_truth(self):
        with pytest.raises(ValueError):
            MarginVector(a=np.array([0.5, 0.0]), y=1)
        MarginVector(a=np.array([0.0, -1.0]), y=1)


class TestLossPrimal:
    def test_all_scores_equal(self):
        mv = MarginVector(a=np.zeros(3), y=1)
        for variant in ("alpha", "beta"):
            assert losses.loss_primal(mv, LossSpec(variant, 1)) == 1.0

    def test_margin_satisfied(self):
        mv = MarginVector(a=np.array([0.0, -2.0, -2.0]), y=1)
        assert losses.loss_primal(mv, LossSpec("alpha", 2)) == 0.0
        assert losses.loss_primal(mv, LossSpec("beta", 2)) == 0.0

    def test_gap_between_variants(self):
        spec_a = LossSpec("alpha", 2)
        spec_b = LossSpec("beta", 2)
        mv = MarginVector(a=np.array([0.0, 1.5, -2.0]), y=1)
        assert losses.loss_primal(mv, spec_a) == pytest.approx(1.25)
        assert losses.loss_primal(mv, spec_b) == pytest.approx(1.25)
        mv = MarginVector(a=np.array([0.0, 1.5, -0.5]), y=1)
        assert losses.loss_primal(mv, spec_a) == pytest.approx(1.5)
        assert losses.loss_primal(mv, spec_b) == pytest.approx(1.5)
        # The ground-truth zero always occupies a top-2 slot when some margin
        # is positive, so the variants coincide for every k = 2 instance; the
        # alpha average only drops below beta once k >= 3 lets a negative
        # shifted margin into the top-k window.
        mv = MarginVector(a=np.array([0.0, 1.5, -3.0]), y=1)
        assert losses.loss_primal(mv, spec_a) == pytest.approx(1.25)
        assert losses.loss_primal(mv, spec_b) == pytest.approx(1.25)
        mv = MarginVector(a=np.array([0.0, 2.0, -2.0, -3.0]), y=1)
        alpha3 = losses.loss_primal(mv, LossSpec("alpha", 3))
        beta3 = losses.loss_primal(mv, LossSpec("beta", 3))
        assert alpha3 == pytest.approx((3.0 + 0.0 - 1.0) / 3.0)
        assert beta3 == pytest.approx((3.0 + 0.0 + 0.0) / 3.0)
        assert alpha3 < beta3

    def test_rejects_k_at_class_count(self):
        mv = MarginVector(a=np.zeros(3), y=1)
        with pytest.raises(ValueError):
            losses.loss_primal(mv, LossSpec("alpha", 3))


class TestLossConjugate:
    def test_zero_is_feasible(self):
        assert losses.loss_conjugate(np.zeros(4), 2, LossSpec("alpha", 2)) == 0.0
        assert losses.loss_conjugate(np.zeros(4), 2, LossSpec("beta", 2)) == 0.0

    def test_basis_vector_feasible_only_for_k1(self):
        m = 4
        for y in (1, 3):
            b = np.zeros(m)
            b[y - 1] = 1.0
            assert losses.loss_conjugate(b, y, LossSpec("alpha", 1)) == 0.0
            assert losses.loss_conjugate(b, y, LossSpec("alpha", 2)) == math.inf

    def test_uniform_vector(self):
        for m in (3, 5, 8):
            b = np.full(m, 1.0 / m)
            for k in range(1, m + 1):
                val = losses.loss_conjugate(b, 1, LossSpec("alpha", k))
                assert val == pytest.approx(-(m - 1) / m, abs=1e-12)

    def test_infeasible_sum(self):
        b = np.full(3, 0.5)
        assert losses.loss_conjugate(b, 1, LossSpec("alpha", 1)) == math.inf

    def test_beta_cap(self):
        # sum fine, but one coordinate exceeds the 1/k cap
        b = np.array([0.6, 0.1, 0.0])
        assert losses.loss_conjugate(b, 1, LossSpec("beta", 2)) == math.inf
        assert losses.loss_conjugate(b, 1, LossSpec("beta", 1)) == pytest.approx(-0.1)


class TestVertexEnumeration:
    def test_matches_alpha_loss(self):
        rng = np.random.default_rng(21)
        for _ in range(300):
            m = int(rng.integers(2, 9))
            y = int(rng.integers(1, m + 1))
            k = int(rng.integers(1, m))
            mv = MarginVector(a=random_margins(rng, m, y, scale=2.0), y=y)
            spec = LossSpec("alpha", k)
            lp = losses.loss_primal_via_lp(mv, spec)
            assert losses.loss_primal(mv, spec) == pytest.approx(lp, abs=1e-10)


class TestTopKError:
    def test_examples(self):
        s = np.array([3.0, 2.0, 1.0])
        assert losses.topk_error(s, 3, 1) == 1
        assert losses.topk_error(s, 3, 2) == 1
        assert losses.topk_error(s, 3, 3) == 0
        assert losses.topk_error(np.array([2.0, 2.0]), 1, 1) == 0  # tie: no error
        s = np.array([5.0, 4.0, 3.0, 2.0])
        assert losses.topk_error(s, 2, 1) == 1
        assert losses.topk_error(s, 2, 2) == 0

    def test_k_equals_m_never_errs(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            m = int(rng.integers(1, 12))
            s = rng.standard_normal(m)
            y = int(rng.integers(1, m + 1))
            assert losses.topk_error(s, y, m) == 0


class TestOrderingChain:
    def test_chain_and_equality_condition(self):
        rng = np.random.default_rng(23)
        for _ in range(2000):
            m = int(rng.integers(3, 21))
            y = int(rng.integers(1, m + 1))
            k = int(rng.integers(1, m))
            a = random_margins(rng, m, y, scale=float(rng.choice([0.5, 1, 3])))
            mv = MarginVector(a=a, y=y)
            psi = margin_indicator(a, y, k)
            phi_k = losses.loss_primal(mv, LossSpec("alpha", k))
            phi_tilde = losses.loss_primal(mv, LossSpec("beta", k))
            phi_1 = losses.loss_primal(mv, LossSpec("alpha", 1))
            phi_1_beta = losses.loss_primal(mv, LossSpec("beta", 1))
            assert psi <= phi_k + 1e-12
            assert phi_k <= phi_tilde + 1e-12
            assert phi_tilde <= phi_1 + 1e-12
            assert phi_1 == pytest.approx(phi_1_beta, abs=1e-12)
            h = a + 1.0
            h[y - 1] -= 1.0
            h_sorted = np.sort(h)[::-1]
            if h_sorted[0] <= 0.0 or h_sorted[k - 1] >= 0.0:
                assert phi_k == pytest.approx(phi_tilde, abs=1e-12)

    def test_k1_is_multiclass_hinge(self):
        rng = np.random.default_rng(24)
        for _ in range(300):
            m = int(rng.integers(2, 10))
            y = int(rng.integers(1, m + 1))
            a = random_margins(rng, m, y, scale=2.0)
            mv = MarginVector(a=a, y=y)
            direct = max(
                (1.0 if j != y - 1 else 0.0) + a[j] for j in range(m)
            )
            direct = max(0.0, direct)
            assert losses.loss_primal(mv, LossSpec("alpha", 1)) == pytest.approx(direct)
            assert losses.loss_primal(mv, LossSpec("beta", 1)) == pytest.approx(direct)


def _argmax_vertex(a, y, k):
    """Best vertex of the top-k simplex for the linear form <a + c, .>."""
    m = a.size
    h = a + 1.0
    h[y - 1] -= 1.0
    top = np.argsort(-h, kind="stable")[:k]
    if h[top].sum() < 0.0:
        return np.zeros(m)
    b = np.zeros(m)
    b[top] = 1.0 / k
    return b


class TestFenchel:
    def test_fenchel_young_and_tightness(self):
        rng = np.random.default_rng(25)
        for _ in range(500):
            m = int(rng.integers(3, 9))
            y = int(rng.integers(1, m + 1))
            k = int(rng.integers(1, m))
            a = random_margins(rng, m, y, scale=2.0)
            mv = MarginVector(a=a, y=y)
            spec = LossSpec("alpha", k)
            phi = losses.loss_primal(mv, spec)
            b = sample_topk_simplex(rng, m, k)
            conj = losses.loss_conjugate(b, y, spec)
            assert phi + conj >= float(a @ b) - 1e-10
            # Equality at the maximising vertex of the conjugate domain.
            b_star = _argmax_vertex(a, y, k)
            conj_star = losses.loss_conjugate(b_star, y, spec)
            assert phi + conj_star == pytest.approx(float(a @ b_star), abs=1e-10)

    def test_fenchel_young_beta(self):
        rng = np.random.default_rng(26)
        for _ in range(300):
            m = int(rng.integers(3, 9))
            y = int(rng.integers(1, m + 1))
            k = int(rng.integers(1, m))
            a = random_margins(rng, m, y, scale=2.0)
            mv = MarginVector(a=a, y=y)
            spec = LossSpec("beta", k)
            phi = losses.loss_primal(mv, spec)
            b = sample_capped_box(rng, m, k)
            conj = losses.loss_conjugate(b, y, spec)
            assert phi + conj >= float(a @ b) - 1e-10

    def test_restricted_conjugate_matches(self):
        # Restricting the conjugate's sup to margin vectors with a zero
        # ground-truth coordinate loses nothing when b_y = 0: solve the sup
        # as a linear program over the loss's vertex hypograph.
        linprog = pytest.importorskip("scipy.optimize").linprog
        rng = np.random.default_rng(27)
        for _ in range(40):
            m = int(rng.integers(3, 7))
            y = int(rng.integers(1, m + 1))
            k = int(rng.integers(1, m - 1 + 1))
            others = [j for j in range(m) if j != y - 1]
            if k > len(others):
                continue
            subsets = [
                s for s in itertools.combinations(range(m), k)
                if (y - 1) not in s
            ]
            weights = rng.exponential(size=3)
            weights /= weights.sum()
            chosen = rng.choice(len(subsets), size=3)
            b = np.zeros(m)
            for w, ci in zip(weights, chosen):
                for j in subsets[ci]:
                    b[j] += w / k
            b *= rng.uniform(0.3, 1.0)          # stay inside the domain
            expected = losses.loss_conjugate(b, y, LossSpec("alpha", k))
            assert math.isfinite(expected)

            # Variables: margins a (a_y fixed to 0) and epigraph value s.
            free = [j for j in range(m) if j != y - 1]
            nv = len(free) + 1
            c_obj = np.zeros(nv)
            c_obj[:-1] = -b[free]               # maximise <a, b>
            c_obj[-1] = 1.0                     # ... minus s
            A_ub, b_ub = [], []
            verts = [np.zeros(m)]
            for s in itertools.combinations(range(m), k):
                v = np.zeros(m)
                v[list(s)] = 1.0 / k
                verts.append(v)
            cshift = np.ones(m)
            cshift[y - 1] = 0.0
            for v in verts:
                row = np.zeros(nv)
                row[:-1] = v[free]
                row[-1] = -1.0
                A_ub.append(row)
                b_ub.append(-float(cshift @ v))
            res = linprog(
                c_obj, A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                bounds=[(None, None)] * nv, method="highs",
            )
            assert res.status == 0
            assert -res.fun == pytest.approx(expected, abs=1e-7)
