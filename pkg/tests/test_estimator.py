import math

import numpy as np
import pytest

from conftest import random_space
from varlex.errors import ValidationError
from varlex.estimator import (
    MzWitness,
    OperatorMatrix,
    blowup_experiment,
    blowup_predicted,
    estimate_k_lower,
    fd_gradient,
    mz_certified_ratio,
    op_norm_lower,
    op_norm_lower_run,
    op_norm_upper_certified,
    ratio_objective,
)
from varlex.norms import associate_norm, luxemburg_norm
from varlex.spaces import Cell, CellKind, SpaceSpec, conjugate_space


def identity(n, q, p):
    return OperatorMatrix(np.eye(n), SpaceSpec.constant(q, n), SpaceSpec.constant(p, n))


class TestOperatorMatrix:
    def test_shape_checked(self):
        with pytest.raises(ValidationError):
            OperatorMatrix(np.ones((2, 3)), SpaceSpec.constant(2, 2), SpaceSpec.constant(2, 2))

    def test_entries_finite(self):
        with pytest.raises(ValidationError):
            OperatorMatrix([[np.nan]], SpaceSpec.constant(2, 1), SpaceSpec.constant(2, 1))


class TestOpNormLower:
    def test_identity_l2(self):
        assert op_norm_lower(identity(5, 2, 2), restarts=3, iters=50) == pytest.approx(1, abs=1e-6)

    @pytest.mark.parametrize("n", [1, 3, 10])
    def test_identity_embedding(self, n):
        val = op_norm_lower(identity(n, 3, 1.5), restarts=2, iters=80)
        assert val == pytest.approx(n ** (1 / 1.5 - 1 / 3), rel=1e-4)

    def test_rank_one(self, rng):
        source = SpaceSpec.from_exponents([1.5, 3, 2.2, 4], [1, 0.5, 2, 1])
        target = SpaceSpec.from_exponents([1.3, 2.5, 5])
        u = rng.standard_normal(3)
        v = rng.standard_normal(4)
        T = OperatorMatrix(np.outer(u, v), source, target)
        want = luxemburg_norm(target, u).value * associate_norm(conjugate_space(source), v / source.weights)
        got = op_norm_lower(T, restarts=6, iters=300, seed=1)
        assert got == pytest.approx(want, rel=1e-3)
        # brute force over random f never beats the ascent
        fun = ratio_objective(T)
        brute = fun(rng.standard_normal((5000, 4))).max()
        assert brute <= got * (1 + 1e-9)

    def test_zero_matrix(self):
        T = OperatorMatrix(np.zeros((2, 3)), SpaceSpec.constant(2, 3), SpaceSpec.constant(2, 2))
        assert op_norm_lower(T) == 0 and op_norm_upper_certified(T) == 0

    def test_history_monotone(self, rng):
        for k in range(10):
            source, target = random_space(rng, 6), random_space(rng, 5)
            T = OperatorMatrix(rng.standard_normal((5, 6)), source, target)
            run = op_norm_lower_run(T, restarts=1, iters=40, seed=k)
            h = run.history
            assert all(b >= a - 1e-12 for a, b in zip(h, h[1:]))

    def test_deterministic(self, rng):
        source, target = random_space(rng, 6), random_space(rng, 4)
        T = OperatorMatrix(rng.standard_normal((4, 6)), source, target)
        assert op_norm_lower(T, 3, 30, seed=2) == op_norm_lower(T, 3, 30, seed=2)


class TestUpper:
    def test_one_by_one(self):
        T = OperatorMatrix([[-3.0]], SpaceSpec.constant(2, 1), SpaceSpec.constant(2, 1))
        assert op_norm_upper_certified(T) == pytest.approx(6, rel=1e-12)
        assert op_norm_lower(T, 2, 20) == pytest.approx(3, rel=1e-9)

    def test_identity_l2(self):
        n = 9
        assert op_norm_upper_certified(identity(n, 2, 2)) == pytest.approx(2 * math.sqrt(n), rel=1e-12)

    def test_lower_below_upper(self, rng):
        for k in range(40):
            m, n = rng.integers(1, 8, size=2)
            source, target = random_space(rng, int(n)), random_space(rng, int(m))
            T = OperatorMatrix(rng.standard_normal((m, n)), source, target)
            assert op_norm_lower(T, 2, 30, seed=k) <= op_norm_upper_certified(T)


class TestFiniteDifference:
    def test_half_step_agreement(self, rng):
        source = SpaceSpec.from_exponents([1.5, 2.5, 3.5, 2])
        target = SpaceSpec.from_exponents([1.8, 4, 2.2])
        T = OperatorMatrix(rng.standard_normal((3, 4)), source, target)
        fun = ratio_objective(T)
        for _ in range(10):
            f = rng.standard_normal(4)
            h = 1e-4 * np.max(np.abs(f))
            g1 = fd_gradient(fun, f, h)
            g2 = fd_gradient(fun, f, h / 2)
            np.testing.assert_allclose(g1, g2, rtol=1e-4, atol=1e-4 * np.linalg.norm(g2))

    def test_quadratic(self):
        fun = lambda X: np.sum(X**2, axis=1)
        x = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(fd_gradient(fun, x, 1e-4), 2 * x, rtol=1e-8)


class TestCertifiedRatio:
    def test_single_function_below_one(self, rng):
        for _ in range(30):
            source, target = random_space(rng, 5), random_space(rng, 4)
            T = OperatorMatrix(rng.standard_normal((4, 5)), source, target)
            w = MzWitness(T, rng.standard_normal((1, 5)), 2)
            assert mz_certified_ratio(w) <= 1 + 1e-9

    def test_identity_basis_l2(self):
        # factor 2 from Hölder and sqrt(n) from the row norms of the identity
        assert mz_certified_ratio(MzWitness(identity(1, 2, 2), np.eye(1), 2)) == pytest.approx(0.5, rel=1e-12)
        for n in (2, 4, 9):
            val = mz_certified_ratio(MzWitness(identity(n, 2, 2), np.eye(n), 2))
            assert val == pytest.approx(1 / (2 * math.sqrt(n)), rel=1e-12)

    def test_zero_denominator(self):
        with pytest.raises(ValidationError):
            mz_certified_ratio(MzWitness(identity(2, 2, 2), np.zeros((2, 2)), 2))

    @pytest.mark.parametrize("r", [1, 1.5, 2, 3, "inf"])
    def test_positive_operators(self, rng, r):
        for _ in range(10):
            m, n = rng.integers(1, 10, size=2)
            source, target = random_space(rng, int(n)), random_space(rng, int(m))
            T = OperatorMatrix(rng.random((m, n)), source, target)
            F = rng.standard_normal((int(rng.integers(1, 6)), n))
            assert mz_certified_ratio(MzWitness(T, F, r)) <= 1 + 1e-9

    def test_rescaling(self, rng):
        source, target = random_space(rng, 6), random_space(rng, 5)
        T = OperatorMatrix(rng.standard_normal((5, 6)), source, target)
        F = rng.standard_normal((3, 6))
        base = mz_certified_ratio(MzWitness(T, F, 1.5))
        for c in (0.125, 4.0, 1024.0):
            assert mz_certified_ratio(MzWitness(T.scaled(c), F, 1.5)) == base
        assert mz_certified_ratio(MzWitness(T.scaled(3.3), F, 1.5)) == pytest.approx(base, rel=1e-11)

    def test_restriction_zero_extension(self, rng):
        for _ in range(10):
            source, target = random_space(rng, 4), random_space(rng, 3)
            big_s = SpaceSpec(source.cells + random_space(rng, 3).cells)
            big_t = SpaceSpec(target.cells + random_space(rng, 2).cells)
            T = rng.standard_normal((3, 4))
            F = rng.standard_normal((2, 4))
            small = mz_certified_ratio(MzWitness(OperatorMatrix(T, source, target), F, 2.5))
            Tb = np.zeros((5, 7))
            Tb[:3, :4] = T
            Fb = np.zeros((2, 7))
            Fb[:, :4] = F
            big = mz_certified_ratio(MzWitness(OperatorMatrix(Tb, big_s, big_t), Fb, 2.5))
            assert big == pytest.approx(small, rel=1e-10)


class TestEstimateK:
    def test_l2(self):
        s = SpaceSpec.constant(2, 4)
        w = estimate_k_lower(s, s, 2, 3, 12, seed=0)
        assert w.certified_lower_bound <= 1 + 1e-9
        assert w.certified_lower_bound <= w.optimistic_ratio

    def test_l1_source(self):
        s = SpaceSpec.constant(1, 4)
        t = SpaceSpec.from_exponents([1.5, 2, 3])
        w = estimate_k_lower(s, t, 3, 3, 12, seed=0)
        assert w.certified_lower_bound <= 1 + 1e-9

    def test_budget_zero(self):
        s = SpaceSpec.constant(2, 2)
        with pytest.raises(ValidationError):
            estimate_k_lower(s, s, 2, 2, 0, seed=0)

    def test_deterministic_and_thread_independent(self, monkeypatch):
        s = SpaceSpec.from_exponents([1.5, 2.5, 3])
        t = SpaceSpec.from_exponents([1.2, 4])
        a = estimate_k_lower(s, t, 4, 2, 9, seed=3)
        monkeypatch.setenv("VARLEX_THREADS", "3")
        b = estimate_k_lower(s, t, 4, 2, 9, seed=3)
        assert a.certified_lower_bound == b.certified_lower_bound
        assert a.optimistic_ratio == b.optimistic_ratio
        assert np.array_equal(a.functions, b.functions)

    def test_witness_certified_matches(self):
        s = SpaceSpec.from_exponents([1.5, 2.5, 3])
        w = estimate_k_lower(s, s, 1.5, 3, 9, seed=1)
        assert mz_certified_ratio(w) == pytest.approx(w.certified_lower_bound, rel=1e-12)


class TestBlowup:
    def test_predicted_positive_exponent(self):
        lam = 1 / math.sqrt(math.log(6))
        assert 1 / 1.2 - 1 / (1.2 + lam) > 0
        assert blowup_predicted(1.2, 4) == pytest.approx(4 ** (1 / 1.2 - 1 / (1.2 + lam)), rel=1e-14)
        assert blowup_predicted(1.2, 4) > 1

    @pytest.mark.parametrize("q0,p0", [(1.5, 1.2), (1.0, 1.5), (1.2, 2.0), (1.2, 1.2)])
    def test_invalid_ordering(self, q0, p0):
        with pytest.raises(ValidationError):
            blowup_experiment(q0, p0, n_list=(4,), budget=1)

    def test_small_run(self):
        rows = blowup_experiment(1.2, 1.5, n_list=(4, 8), budget=6, seed=0)
        assert [r[0] for r in rows] == [4, 8]
        for n, cert, opt, pred in rows:
            assert 0 < cert <= opt and pred == blowup_predicted(1.2, n)
