"""Instance model tests: quantile reduction arithmetic and sampling laws."""

import math
from itertools import product

import numpy as np
import pytest
from scipy import stats

from matroid_ocrs.errors import InputError
from matroid_ocrs.instance import (
    ArrivalOrder,
    BernoulliInstance,
    GeneralInstance,
    activate,
    build_quantile_rule,
    instance_from_json,
    sample_active_set,
    sample_arrival,
    substream,
)
from matroid_ocrs.matroid import UniformMatroid

TWO_ATOM = ((10.0, 0.3), (5.0, 0.7))


class TestQuantileRule:
    def test_exact_boundary_uses_lower_threshold(self):
        rule = build_quantile_rule(TWO_ATOM, 0.3)
        assert rule.threshold == 5.0
        assert rule.boundary_prob == 0.0
        assert rule.conditional_value == pytest.approx(10.0)

    def test_atom_splitting(self):
        rule = build_quantile_rule(TWO_ATOM, 0.65)
        assert rule.threshold == 5.0
        assert rule.boundary_prob == pytest.approx(0.5)
        # (0.3*10 + 0.35*5) / 0.65 == 95/13; cross-checked by simulation below
        assert rule.conditional_value == pytest.approx(95.0 / 13.0)

    def test_atom_splitting_value_by_simulation(self):
        rule = build_quantile_rule(TWO_ATOM, 0.65)
        rng = np.random.default_rng(12)
        trials = 200_000
        tot, hits = 0.0, 0
        for _ in range(trials):
            v = 10.0 if rng.random() < 0.3 else 5.0
            if activate(rule, v, rng):
                tot += v
                hits += 1
        assert hits / trials == pytest.approx(0.65, abs=0.005)
        assert tot / hits == pytest.approx(rule.conditional_value, abs=0.02)

    def test_zero_mass_never_active(self):
        rule = build_quantile_rule(TWO_ATOM, 0.0)
        assert rule.conditional_value == 0.0
        rng = np.random.default_rng(0)
        assert not any(activate(rule, v, rng) for v in (5.0, 10.0))

    def test_full_mass(self):
        rule = build_quantile_rule(TWO_ATOM, 1.0)
        assert rule.threshold == -math.inf
        assert rule.conditional_value == pytest.approx(0.3 * 10 + 0.7 * 5)

    def test_activation_probability_exact(self):
        # Pr[v > tau] + rho * Pr[v = tau] == x for random dists and masses
        rng = np.random.default_rng(9)
        for _ in range(50):
            k = int(rng.integers(1, 5))
            values = sorted(set(float(v) for v in rng.uniform(0, 10, size=k)))
            raw = rng.uniform(0.05, 1, size=len(values))
            probs = raw / raw.sum()
            dist = tuple(zip(values, probs))
            x = float(rng.uniform(0, 1))
            rule = build_quantile_rule(dist, x)
            pr = sum(q for v, q in dist if v > rule.threshold)
            pr += rule.boundary_prob * sum(q for v, q in dist if v == rule.threshold)
            assert pr == pytest.approx(x, abs=1e-12)

    def test_value_preservation(self):
        # E[v * active] == x * E[v | active] for the same random dists
        rng = np.random.default_rng(10)
        for _ in range(25):
            values = sorted(set(float(v) for v in rng.uniform(0, 10, size=3)))
            raw = rng.uniform(0.05, 1, size=len(values))
            probs = raw / raw.sum()
            dist = tuple(zip(values, probs))
            x = float(rng.uniform(0.01, 1))
            rule = build_quantile_rule(dist, x)
            ev = sum(q * v for v, q in dist if v > rule.threshold)
            ev += rule.boundary_prob * sum(q * v for v, q in dist if v == rule.threshold)
            assert ev == pytest.approx(x * rule.conditional_value, abs=1e-12)

    def test_bad_mass_rejected(self):
        with pytest.raises(InputError):
            build_quantile_rule(TWO_ATOM, 1.5)


class TestActivate:
    def test_above_threshold(self):
        rule = build_quantile_rule(TWO_ATOM, 0.3)
        rng = np.random.default_rng(0)
        assert activate(rule, 10.0, rng)
        assert not activate(rule, 5.0, rng)

    def test_empirical_rate_matches_mass(self):
        rule = build_quantile_rule(TWO_ATOM, 0.65)
        rng = np.random.default_rng(1)
        trials = 100_000
        vals = np.where(rng.random(trials) < 0.3, 10.0, 5.0)
        hits = sum(activate(rule, float(v), rng) for v in vals)
        se = math.sqrt(0.65 * 0.35 / trials)
        assert abs(hits / trials - 0.65) < 3 * se


class TestSampleActiveSet:
    def test_deterministic_inclusion(self):
        rng = np.random.default_rng(0)
        assert sample_active_set((1.0, 1.0, 0.0), rng) == frozenset({0, 1})

    def test_marginals(self):
        rng = np.random.default_rng(2)
        trials = 100_000
        counts = np.zeros(2)
        for _ in range(trials):
            for e in sample_active_set((0.5, 0.5), rng):
                counts[e] += 1
        se = math.sqrt(0.25 / trials)
        assert np.all(np.abs(counts / trials - 0.5) < 3 * se)

    def test_empty_probability(self):
        n = 4
        x = (1.0 / n,) * n
        rng = np.random.default_rng(3)
        trials = 100_000
        empty = sum(not sample_active_set(x, rng) for _ in range(trials))
        target = (1 - 1 / n) ** n
        se = math.sqrt(target * (1 - target) / trials)
        assert abs(empty / trials - target) < 3 * se

    def test_out_of_range_rejected(self):
        with pytest.raises(InputError):
            sample_active_set((1.2,), np.random.default_rng(0))

    def test_joint_independence_chi2_flag(self, capsys):
        # chi-square on the 2^n joint table; flagged, not hard-failed
        x = (0.3, 0.6, 0.5)
        rng = np.random.default_rng(4)
        trials = 50_000
        counts = {S: 0 for S in product((0, 1), repeat=3)}
        for _ in range(trials):
            active = sample_active_set(x, rng)
            counts[tuple(int(i in active) for i in range(3))] += 1
        chi2 = 0.0
        for pattern, c in counts.items():
            pr = 1.0
            for xi, bit in zip(x, pattern):
                pr *= xi if bit else 1 - xi
            chi2 += (c - trials * pr) ** 2 / (trials * pr)
        pval = stats.chi2.sf(chi2, df=len(counts) - 1)
        if pval < 1e-3:
            print(f"WARNING: joint-independence chi2 p={pval:.2e}")
        assert pval >= 0.0  # informational only


class TestCompositionAgreement:
    def test_total_variation_small(self):
        # sampling R(x) directly vs sampling values then applying quantile rules
        dists = (((10.0, 0.3), (5.0, 0.7)), ((4.0, 0.5), (1.0, 0.5)))
        x = (0.65, 0.4)
        rules = [build_quantile_rule(d, xi, i) for i, (d, xi) in enumerate(zip(dists, x))]
        inst = GeneralInstance(UniformMatroid(2, 2), dists)
        trials = 100_000
        rng1, rng2 = np.random.default_rng(5), np.random.default_rng(6)
        freq_direct = {}
        freq_comp = {}
        for _ in range(trials):
            s = sample_active_set(x, rng1)
            freq_direct[s] = freq_direct.get(s, 0) + 1
            vals = inst.sample_values(rng2)
            s2 = frozenset(i for i, r in enumerate(rules) if activate(r, vals[i], rng2))
            freq_comp[s2] = freq_comp.get(s2, 0) + 1
        tv = 0.5 * sum(abs(freq_direct.get(S, 0) - freq_comp.get(S, 0)) / trials
                       for S in set(freq_direct) | set(freq_comp))
        assert tv < 0.01


class TestArrival:
    def test_fixed_echo(self):
        order = sample_arrival("fixed", 3, np.random.default_rng(0), permutation=(2, 0, 1))
        assert order.sequence() == (2, 0, 1)

    def test_uniform_symmetry_two(self):
        rng = np.random.default_rng(7)
        trials = 100_000
        first = sum(sample_arrival("uniform", 2, rng).sequence()[0] == 0
                    for _ in range(trials))
        se = math.sqrt(0.25 / trials)
        assert abs(first / trials - 0.5) < 3 * se

    def test_uniform_all_orders_three(self):
        rng = np.random.default_rng(8)
        trials = 60_000
        counts = {}
        for _ in range(trials):
            seq = sample_arrival("uniform", 3, rng).sequence()
            counts[seq] = counts.get(seq, 0) + 1
        se = math.sqrt((1 / 6) * (5 / 6) / trials)
        assert len(counts) == 6
        for c in counts.values():
            assert abs(c / trials - 1 / 6) < 3 * se

    def test_bad_permutation_rejected(self):
        with pytest.raises(InputError):
            ArrivalOrder(permutation=(0, 0, 1))


class TestInstanceJson:
    def test_bernoulli_roundtrip(self):
        inst = BernoulliInstance(UniformMatroid(2, 1), (0.5, 0.5), (1.0, 1.0))
        import json
        inst2 = instance_from_json(json.dumps(inst.to_json_obj()))
        assert inst2.p == inst.p and inst2.y == inst.y
        assert inst2.content_hash() == inst.content_hash()

    def test_general_validation(self):
        with pytest.raises(InputError):
            GeneralInstance(UniformMatroid(1, 1), (((5.0, 0.5), (5.0, 0.5)),))
        with pytest.raises(InputError):
            GeneralInstance(UniformMatroid(1, 1), (((5.0, 0.4),),))

    def test_bad_json(self):
        with pytest.raises(InputError):
            instance_from_json("}{")


def test_substreams_are_reproducible_and_distinct():
    a1 = substream(0, 1, 5).random(3)
    a2 = substream(0, 1, 5).random(3)
    b = substream(0, 1, 6).random(3)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
