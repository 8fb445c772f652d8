import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classgain import (
    DegenerateSignalError,
    InfeasibleRateError,
    class_stats,
    classification_gain,
    classified_distortion,
    entropy_bits,
    gaussian_distortion,
    grad_log_objective,
    log_objective,
    optimal_rate_allocation,
)
from classgain.model import ClassStats, one_hot

import oracles


def stats_of(p, sigma2, sigma2_x=1.0):
    p, sigma2 = np.asarray(p, float), np.asarray(sigma2, float)
    return ClassStats(p, np.zeros_like(p), sigma2, sigma2_x, 0.0, np.ones(p.size, bool))


SPLIT = np.array([-1.0, 1.0, 9.0, 11.0])
SPLIT_A = one_hot([0, 0, 1, 1], 2)


class TestDistortionAndEntropy:
    @pytest.mark.parametrize("s2,R,want", [(4, 1, 1.0), (1, 0, 1.0), (2500, 3, 39.0625)])
    def test_gaussian_distortion(self, s2, R, want):
        assert gaussian_distortion(s2, R) == want

    @pytest.mark.parametrize(
        "p,want", [((0.5, 0.5), 1.0), ((1.0, 0.0), 0.0), ((0.25, 0.75), 0.8112781244591328)]
    )
    def test_entropy(self, p, want):
        assert entropy_bits(p) == pytest.approx(want, abs=1e-15)


class TestRateAllocation:
    def test_two_class_active(self):
        alloc = optimal_rate_allocation(stats_of([0.5, 0.5], [4, 1]), 2.0)
        assert alloc.lam == pytest.approx(0.5, rel=1e-10)
        np.testing.assert_allclose(alloc.rates, [1.5, 0.5], rtol=1e-10)
        # substituting back into the budget constraint
        assert alloc.coding_rate == pytest.approx(2.0 - 1.0, abs=1e-9)

    @pytest.mark.parametrize("s,R", [(3.0, 1.0), (0.2, 4.5)])
    def test_single_class(self, s, R):
        alloc = optimal_rate_allocation(stats_of([1.0], [s]), R)
        assert alloc.rates[0] == pytest.approx(R, rel=1e-10)
        assert alloc.lam == pytest.approx(s * 2 ** (-2 * R), rel=1e-10)

    def test_symmetric_split(self):
        alloc = optimal_rate_allocation(stats_of([0.5, 0.5], [1, 1]), 3.0)
        np.testing.assert_allclose(alloc.rates, [2, 2], rtol=1e-10)

    def test_low_rate_regime_budget(self):
        p = np.array([0.2, 0.3, 0.5])
        alloc = optimal_rate_allocation(stats_of(p, [100, 1, 1e-4]), 2.5)
        assert alloc.rates[2] == 0.0
        assert alloc.coding_rate == pytest.approx(2.5 - entropy_bits(p), abs=1e-9)
        active = alloc.rates > 0
        np.testing.assert_allclose(
            alloc.rates[active], 0.5 * np.log2(np.array([100, 1])[active[:2]] / alloc.lam), rtol=1e-9
        )

    def test_infeasible_rate(self):
        with pytest.raises(InfeasibleRateError):
            optimal_rate_allocation(stats_of([0.5, 0.5], [1, 1]), 1.0)

    def test_degenerate_sources(self):
        with pytest.raises(DegenerateSignalError):
            optimal_rate_allocation(stats_of([0.5, 0.5], [0, 0]), 3.0)


class TestClassifiedDistortion:
    def test_single_class_matches_naive(self):
        d = classified_distortion(stats_of([1.0], [7.0], 7.0), 2.0)
        assert d.high_rate
        assert d.value == pytest.approx(gaussian_distortion(7.0, 2.0), rel=1e-12)

    def test_two_class_both_forms(self):
        d = classified_distortion(stats_of([0.5, 0.5], [4, 1]), 2.0)
        assert d.closed_form == pytest.approx(0.5, rel=1e-12)
        assert d.sum_form == pytest.approx(0.5, rel=1e-9)

    @pytest.mark.parametrize("J,s,R", [(2, 3.0, 4.0), (3, 0.5, 6.0), (4, 10.0, 5.0)])
    def test_equal_variances_uniform_p(self, J, s, R):
        d = classified_distortion(stats_of(np.full(J, 1 / J), np.full(J, s)), R)
        assert d.value == pytest.approx(s * J**2 * 2 ** (-2 * R), rel=1e-9)
        assert d.sum_form == pytest.approx(d.closed_form, rel=1e-9)

    def test_low_rate_flag(self):
        d = classified_distortion(stats_of([0.5, 0.5], [100, 1e-6]), 1.5)
        assert not d.high_rate
        assert d.closed_form is None and d.value == d.sum_form


class TestGain:
    def test_single_class(self):
        x = np.random.default_rng(0).normal(size=20)
        assert classification_gain(x, np.ones((20, 1))) == pytest.approx(1.0, rel=1e-12)

    def test_four_point_split(self):
        assert classification_gain(SPLIT, SPLIT_A) == pytest.approx(6.5, rel=1e-12)

    def test_permutation(self):
        assert classification_gain(SPLIT, SPLIT_A[:, ::-1]) == pytest.approx(6.5, rel=1e-12)

    def test_zero_variance_class_is_infinite(self):
        assert classification_gain([0, 0, 10, 10], SPLIT_A) == math.inf

    def test_constant_signal(self):
        with pytest.raises(DegenerateSignalError):
            classification_gain([3, 3, 3], np.ones((3, 1)))


class TestLogObjective:
    def test_four_point_split(self):
        assert log_objective(SPLIT, SPLIT_A) == pytest.approx(2.0, abs=1e-12)
        assert log_objective(SPLIT, SPLIT_A) == pytest.approx(math.log2(26 / 6.5), abs=1e-12)

    def test_single_class(self):
        x = np.random.default_rng(1).normal(size=30) * 3
        assert log_objective(x, np.ones((30, 1))) == pytest.approx(math.log2(x.var()), rel=1e-12)

    def test_exponentiation_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            N, J = int(rng.integers(3, 20)), int(rng.integers(1, 5))
            x = rng.normal(size=N) * rng.uniform(0.1, 10)
            a = rng.dirichlet(np.ones(J), size=N)
            direct = oracles.product_objective_loop(x.tolist(), a.tolist())
            assert 2 ** log_objective(x, a) == pytest.approx(direct, rel=1e-9)

    def test_upper_bound(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            N, J = int(rng.integers(2, 30)), int(rng.integers(1, 5))
            x = rng.normal(size=N)
            a = rng.dirichlet(np.ones(J) * rng.uniform(0.1, 3), size=N)
            F = log_objective(x, a)
            assert math.isfinite(F)
            assert F <= math.log2(x.var()) + 2 * math.log2(J) + 1e-9


def central_difference(x, a, h_rel=1e-6):
    xs = x.tolist()
    out = np.empty_like(a)
    for n in range(a.shape[0]):
        for i in range(a.shape[1]):
            h = h_rel * max(abs(a[n, i]), 1e-2)
            up, dn = a.copy(), a.copy()
            up[n, i] += h
            dn[n, i] -= h
            out[n, i] = (oracles.log_objective_loop(xs, up.tolist()) - oracles.log_objective_loop(xs, dn.tolist())) / (2 * h)
    return out


class TestGradient:
    def test_symmetric_columns(self):
        x = np.array([-3.0, -1.0, 1.0, 3.0])
        g = grad_log_objective(x, np.full((4, 2), 0.5))
        np.testing.assert_allclose(g[:, 0], g[:, 1], atol=1e-14)
        np.testing.assert_allclose(g[:, 0], g[::-1, 0], atol=1e-12)

    def test_finite_differences(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            x = rng.normal(size=8) * 3
            a = rng.dirichlet(np.ones(2), size=8)
            np.testing.assert_allclose(grad_log_objective(x, a), central_difference(x, a), atol=1e-5)

    def test_translation_invariant(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=12)
        a = rng.dirichlet(np.ones(3), size=12)
        np.testing.assert_allclose(grad_log_objective(x, a), grad_log_objective(x + 37.5, a), atol=1e-10)

    def test_floor_subgradient_is_finite(self):
        x = np.array([0.0, 0.0, 5.0, 7.0])
        g = grad_log_objective(x, SPLIT_A)
        assert np.all(np.isfinite(g))


@st.composite
def soft_instances(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    N, J = int(rng.integers(2, 40)), int(rng.integers(1, 5))
    x = rng.normal(size=N) * rng.uniform(0.01, 100) + rng.uniform(-50, 50)
    a = rng.dirichlet(np.ones(J) * rng.uniform(0.2, 5), size=N)
    return x, a


@settings(max_examples=200, deadline=None)
@given(soft_instances())
def test_objective_times_gain_is_signal_variance(inst):
    x, a = inst
    s = class_stats(x, a)
    G = classification_gain(x, a)
    assert 2 ** log_objective(x, a) * G == pytest.approx(s.sigma2_x, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(soft_instances(), st.floats(-100, 100), st.floats(0.01, 100))
def test_gain_affine_invariance(inst, shift, scale):
    x, a = inst
    G = classification_gain(x, a)
    assert classification_gain(x + shift, a) == pytest.approx(G, rel=1e-9)
    assert classification_gain(scale * x, a) == pytest.approx(G, rel=1e-9)


@st.composite
def allocation_cases(draw):
    J = draw(st.integers(1, 5))
    p = np.asarray(draw(st.lists(st.floats(0.05, 1), min_size=J, max_size=J)))
    p = p / p.sum()
    s2 = np.asarray(draw(st.lists(st.floats(1e-3, 1e3), min_size=J, max_size=J)))
    R = entropy_bits(p) + draw(st.floats(0.1, 12))
    return p, s2, R


@settings(max_examples=200, deadline=None)
@given(allocation_cases())
def test_closed_form_matches_sum_form(case):
    p, s2, R = case
    d = classified_distortion(stats_of(p, s2), R)
    alloc = optimal_rate_allocation(stats_of(p, s2), R)
    assert alloc.coding_rate == pytest.approx(R - entropy_bits(p), abs=1e-9)
    if d.high_rate:
        assert d.closed_form == pytest.approx(d.sum_form, rel=1e-9)
