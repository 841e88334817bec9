"""Relaxation solver and decomposition tests with brute-force LP oracles."""

import numpy as np
import pytest

from matroid_ocrs.errors import InfeasibleError
from matroid_ocrs.exante import (
    BasePriceCache,
    Decomposition,
    assert_in_polytope,
    base_price,
    base_price_vector,
    decompose,
    reduce_to_bernoulli,
    remaining_value,
    sample_correlated,
    saturation_capacity,
    solve_exante,
    solve_exante_general,
)
from matroid_ocrs.instance import BernoulliInstance, GeneralInstance, substream
from matroid_ocrs.matroid import (
    UniformMatroid,
    all_subsets,
    hat_fractional_vector,
    hat_matroid,
)
from tests.util import check_in_polytope, polytope_lp_optimum, random_matroid


def random_bernoulli(rng, max_n=6):
    m = random_matroid(rng, max_n=max_n)
    p = tuple(float(v) for v in rng.uniform(0, 1, size=m.n))
    y = tuple(float(v) for v in rng.uniform(0, 3, size=m.n))
    return BernoulliInstance(m, p, y)


class TestSaturationCapacity:
    def test_uniform_closed_form_matches_generic(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            r = int(rng.integers(1, n + 1))
            m = UniformMatroid(n, r)
            # build a feasible x by scaling a random vector into the polytope
            x = rng.uniform(0, 1, size=n)
            x *= min(1.0, (r - 0.05) / max(x.sum(), 1e-9))
            x = np.minimum(x, 0.95)
            i = int(rng.integers(n))
            fast = saturation_capacity(m, x, i)
            support = [e for e in range(n) if x[e] > 0 and e != i]
            best = m.rank(frozenset({i})) - x[i]
            for S in all_subsets(support):
                T = frozenset(S) | {i}
                best = min(best, m.rank(T) - sum(x[e] for e in T))
            assert fast == pytest.approx(max(best, 0.0), abs=1e-12)


class TestSolveExante:
    def test_rank1_symmetric(self):
        inst = BernoulliInstance(UniformMatroid(2, 1), (0.5, 0.5), (1.0, 1.0))
        sol = solve_exante(inst)
        assert sol.x == (0.5, 0.5)
        assert sol.objective == pytest.approx(1.0)

    def test_rank1_budget_exhausted(self):
        inst = BernoulliInstance(UniformMatroid(2, 1), (1.0, 1.0), (2.0, 1.0))
        sol = solve_exante(inst)
        assert sol.x == (1.0, 0.0)
        assert sol.objective == pytest.approx(2.0)

    def test_hat_canonical_vector(self):
        m = hat_matroid(2)
        x = hat_fractional_vector(2)
        inst = BernoulliInstance(m, x, (1.0,) * 5)
        sol = solve_exante(inst)
        assert sol.objective >= sum(x) - 1e-9
        assert check_in_polytope(m, sol.x)

    def test_zero_values_get_zero_mass(self):
        inst = BernoulliInstance(UniformMatroid(3, 2), (1.0, 1.0, 1.0), (0.0, 1.0, 0.0))
        sol = solve_exante(inst)
        assert sol.x == (0.0, 1.0, 0.0)

    def test_matches_lp_oracle_on_random_instances(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            inst = random_bernoulli(rng, max_n=6)
            sol = solve_exante(inst)
            opt, _ = polytope_lp_optimum(inst.matroid, inst.y, inst.p)
            assert sol.objective == pytest.approx(opt, abs=1e-9)
            assert check_in_polytope(inst.matroid, sol.x)
            assert all(xi <= pi + 1e-12 for xi, pi in zip(sol.x, inst.p))


class TestDecompose:
    def test_rank1_split(self):
        m = UniformMatroid(2, 1)
        dec = decompose((0.5, 0.5), m)
        assert np.allclose(dec.marginals(2), [0.5, 0.5], atol=1e-8)
        assert all(m.is_independent(S) for S in dec.sets)
        assert sum(dec.weights) == pytest.approx(1.0, abs=1e-10)

    def test_uniform_rank2(self):
        m = UniformMatroid(3, 2)
        dec = decompose((1.0, 0.5, 0.5), m)
        assert np.allclose(dec.marginals(3), [1.0, 0.5, 0.5], atol=1e-8)
        assert len(dec.sets) <= 4

    def test_zero_vector(self):
        dec = decompose((0.0, 0.0), UniformMatroid(2, 1))
        assert dec.sets == (frozenset(),)
        assert dec.weights == (1.0,)

    def test_infeasible_detected(self):
        with pytest.raises(InfeasibleError):
            decompose((0.9, 0.9), UniformMatroid(2, 1))

    def test_hat_vector(self):
        m = hat_matroid(3)
        x = hat_fractional_vector(3)
        dec = decompose(x, m)
        assert np.allclose(dec.marginals(m.n), x, atol=1e-8)
        assert all(m.is_independent(S) for S in dec.sets)

    def test_random_solutions_decompose(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            inst = random_bernoulli(rng, max_n=7)
            sol = solve_exante(inst)
            dec = decompose(sol.x, inst.matroid)
            assert np.allclose(dec.marginals(inst.n), sol.x, atol=1e-8)
            assert all(inst.matroid.is_independent(S) for S in dec.sets)


class TestSampleCorrelated:
    def test_marginal_value(self):
        dec = Decomposition((frozenset({0}), frozenset({1})), (0.5, 0.5))
        rng = substream(0, 42)
        trials = 100_000
        tot = sum(sample_correlated(dec, (2.0, 1.0), rng).values[0]
                  for _ in range(trials))
        se = np.sqrt(0.25 * 4 / trials)
        assert abs(tot / trials - 1.0) < 3 * se

    def test_deterministic_cases(self):
        dec = Decomposition((frozenset({0, 1}),), (1.0,))
        cv = sample_correlated(dec, (1.0, 2.0), substream(0))
        assert cv.values == (1.0, 2.0)
        dec0 = Decomposition((frozenset(),), (1.0,))
        assert sample_correlated(dec0, (1.0, 2.0), substream(0)).values == (0.0, 0.0)


class TestRemainingValue:
    def test_rank1(self):
        m = UniformMatroid(2, 1)
        assert remaining_value(m, frozenset(), (1.0, 0.0)) == 1.0
        assert remaining_value(m, frozenset({0}), (1.0, 0.0)) == 0.0

    def test_hat_all_ones(self):
        assert remaining_value(hat_matroid(2), frozenset(), (1.0,) * 5) == 3.0

    def test_zero_values(self):
        m = hat_matroid(2)
        for A in (frozenset(), frozenset({0})):
            assert remaining_value(m, A, (0.0,) * 5) == 0.0

    def test_monotone_in_accepted_set(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            m = random_matroid(rng, max_n=6)
            if m.n == 0:
                continue
            v = tuple(float(t) for t in rng.uniform(0, 2, size=m.n))
            A = frozenset(int(e) for e in rng.choice(
                m.n, size=rng.integers(0, m.n), replace=False))
            r0 = remaining_value(m, A, v)
            for i in set(m.elements) - A:
                assert remaining_value(m, A | {i}, v) <= r0 + 1e-12


class TestBasePrice:
    def test_rank1_table(self):
        m = UniformMatroid(2, 1)
        dec = Decomposition((frozenset({0}), frozenset({1})), (0.5, 0.5))
        prices = base_price_vector(m, frozenset(), dec, (1.0, 1.0))
        assert prices == pytest.approx((1.0, 1.0))
        prices_after = base_price_vector(m, frozenset({0}), dec, (1.0, 1.0))
        assert prices_after[1] == pytest.approx(0.0)

    def test_zero_values(self):
        m = UniformMatroid(2, 1)
        dec = Decomposition((frozenset({0}), frozenset({1})), (0.5, 0.5))
        assert base_price_vector(m, frozenset(), dec, (0.0, 0.0)) == (0.0, 0.0)

    def test_monte_carlo_agrees_with_exact(self):
        m = hat_matroid(2)
        x = hat_fractional_vector(2)
        dec = decompose(x, m)
        y = (1.0, 2.0, 0.5, 1.5, 1.0)
        exact = base_price_vector(m, frozenset(), dec, y)
        table = base_price(m, frozenset(), dec, y, mode="monte_carlo",
                           samples=20000, rng=substream(0, 9))
        for e_val, mc_val, se in zip(exact, table.prices, table.std_err):
            assert abs(e_val - mc_val) <= 4 * max(se, 1e-9)

    def test_price_sum_bounded_by_remaining_value(self):
        # for every realization in the decomposition support and every
        # independent S in M/A: sum of per-realization prices over S <= R(A)
        rng = np.random.default_rng(21)
        for _ in range(8):
            inst = random_bernoulli(rng, max_n=6)
            m = inst.matroid
            sol = solve_exante(inst)
            dec = decompose(sol.x, m)
            for A in all_subsets(range(m.n)):
                if not m.is_independent(A):
                    continue
                sub = m.contract(A)
                for S_dec in dec.sets:
                    v_hat = [inst.y[e] if e in S_dec else 0.0 for e in range(m.n)]
                    r0 = remaining_value(m, A, v_hat)
                    drops = {i: r0 - remaining_value(m, A | {i}, v_hat)
                             for i in set(m.elements) - set(A)}
                    for S in all_subsets(drops.keys()):
                        if sub.is_independent(S):
                            assert sum(drops[i] for i in S) <= r0 + 1e-9

    def test_cache_is_transparent(self):
        m = hat_matroid(2)
        dec = decompose(hat_fractional_vector(2), m)
        cache = BasePriceCache(m, dec, (1.0,) * 5)
        direct = base_price_vector(m, frozenset({0}), dec, (1.0,) * 5)
        assert cache.prices(frozenset({0})) == direct
        assert cache.prices(frozenset({0})) == direct  # cached path


class TestGeneralReduction:
    def test_reduction_preserves_objective(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            m = random_matroid(rng, max_n=5)
            if m.n == 0:
                continue
            dists = []
            for _ in range(m.n):
                k = int(rng.integers(2, 4))
                vals = sorted(set(float(v) for v in rng.uniform(0.5, 5, size=k)))
                raw = rng.uniform(0.1, 1, size=len(vals))
                dists.append(tuple(zip(vals, raw / raw.sum())))
            ginst = GeneralInstance(m, tuple(dists))
            bern, sol, rules = reduce_to_bernoulli(ginst)
            assert bern.p == sol.x
            assert sum(px * py for px, py in zip(bern.p, bern.y)) == pytest.approx(
                sol.objective, abs=1e-9)
            assert check_in_polytope(m, sol.x)

    def test_general_matches_lp_on_expanded_segments(self):
        # objective of the segment greedy equals an LP over per-atom variables
        from scipy.optimize import linprog
        rng = np.random.default_rng(37)
        for _ in range(8):
            m = random_matroid(rng, max_n=4)
            if m.n == 0:
                continue
            dists = []
            for _ in range(m.n):
                vals = sorted(set(float(v) for v in rng.uniform(0.5, 5, size=2)))
                raw = rng.uniform(0.1, 1, size=len(vals))
                dists.append(tuple(zip(vals, raw / raw.sum())))
            ginst = GeneralInstance(m, tuple(dists))
            sol, _ = solve_exante_general(ginst)
            # LP: one variable per atom, box = atom mass, matroid constraints
            segs = [(i, v, q) for i, d in enumerate(dists) for v, q in d]
            rows, rhs = [], []
            for S in all_subsets(range(m.n)):
                if not S:
                    continue
                row = [1.0 if i in S else 0.0 for i, _, _ in segs]
                rows.append(row)
                rhs.append(m.rank(S))
            res = linprog([-v for _, v, _ in segs], A_ub=rows, b_ub=rhs,
                          bounds=[(0, q) for _, _, q in segs], method="highs")
            assert res.status == 0
            assert sol.objective == pytest.approx(-res.fun, abs=1e-9)


def test_expected_correlated_value_identity():
    rng = np.random.default_rng(5)
    inst = random_bernoulli(rng, max_n=6)
    sol = solve_exante(inst)
    dec = decompose(sol.x, inst.matroid)
    expect = np.zeros(inst.n)
    for S, w in zip(dec.sets, dec.weights):
        for e in S:
            expect[e] += w * inst.y[e]
    assert np.allclose(expect, np.array(sol.x) * np.array(inst.y), atol=1e-8)


def test_assert_in_polytope():
    m = UniformMatroid(2, 1)
    assert_in_polytope(m, (0.5, 0.5))
    with pytest.raises(InfeasibleError):
        assert_in_polytope(m, (0.9, 0.9))
