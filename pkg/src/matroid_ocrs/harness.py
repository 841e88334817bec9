"""Verification engine: exact and Monte Carlo selectability, value-ratio
measurement, brute-force offline baselines, and the two headline
experiments (optimality ceilings and the two-apex regression).

Monte Carlo runs are chunked: each fixed-size chunk derives its own
substream from (seed, tag, chunk index), so results are reproducible and
independent of how chunks are spread over workers.  Fixed-order threshold
runs deduplicate activity patterns: the trajectory is a deterministic
function of the pattern, so sampled patterns are aggregated and each unique
trajectory is evaluated once.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import permutations
from typing import Sequence

import numpy as np

from .errors import InputError
from .exante import (
    Decomposition,
    ExAnteSolution,
    base_price_vector,
    decompose,
)
from .instance import (
    ArrivalOrder,
    BernoulliInstance,
    GeneralInstance,
    activate,
    sample_active_set,
    substream,
)
from .lpcrs import (
    RandomizedOCRS,
    build_randomized_crs,
    execute_randomized_crs,
    solve_full_policy_lp,
)
from .matroid import Matroid, UniformMatroid, hat_fractional_vector, hat_matroid
from .schemes import (
    quarter_exact_probabilities,
    rank1_ocrs_exact_probabilities,
    rank1_rcrs_exact_probabilities,
    run_quarter_baseline,
    run_rank1_ocrs,
    run_rank1_rcrs,
)

CHUNK = 1 << 14
TAG_SELECT = 1
TAG_RATIO = 2
TAG_ORDERS = 3

E_TARGET = 1.0 - 1.0 / math.e


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class SelectabilityReport:
    scheme: str
    x: tuple[float, ...]
    probabilities: tuple[float, ...]
    mode: str  # "exact" | "estimate"
    std_err: tuple[float, ...] | None
    trials: int | None
    c: float
    seed: int | None = None
    instance_hash: str | None = None

    def to_json_obj(self) -> dict:
        return {"scheme": self.scheme, "x": list(self.x),
                "probabilities": list(self.probabilities), "mode": self.mode,
                "std_err": list(self.std_err) if self.std_err else None,
                "trials": self.trials, "c": self.c, "seed": self.seed,
                "instance_hash": self.instance_hash}

    def to_csv_rows(self) -> list[str]:
        rows = ["element,x_i,p_select,mode,se,trials"]
        for i, p in enumerate(self.probabilities):
            se = self.std_err[i] if self.std_err else 0.0
            rows.append(f"{i},{self.x[i]},{p},{self.mode},{se},{self.trials or 0}")
        return rows


@dataclass(frozen=True)
class RatioReport:
    scheme: str
    alg_mean: float
    revenue_mean: float
    utility_mean: float
    exante_objective: float
    ratio: float | None
    std_err: float
    trials: int
    seed: int | None = None

    def to_json_obj(self) -> dict:
        return {"scheme": self.scheme, "alg_mean": self.alg_mean,
                "revenue_mean": self.revenue_mean, "utility_mean": self.utility_mean,
                "exante_objective": self.exante_objective, "ratio": self.ratio,
                "std_err": self.std_err, "trials": self.trials, "seed": self.seed}


# ---------------------------------------------------------------------------
# scheme runners: a uniform simulate-one-trial surface over the five schemes


@dataclass(frozen=True)
class Rank1OcrsRunner:
    x: tuple[float, ...]
    order: tuple[int, ...]
    name: str = "rank1-ocrs"
    arrival_mode: str = "fixed"

    def simulate(self, rng):
        active = sample_active_set(self.x, rng)
        return run_rank1_ocrs(self.x, self.order, active, rng)

    def exact_probabilities(self):
        return rank1_ocrs_exact_probabilities(self.x)


@dataclass(frozen=True)
class Rank1RcrsRunner:
    x: tuple[float, ...]
    name: str = "rank1-rcrs"
    arrival_mode: str = "random"

    def simulate(self, rng):
        times = tuple(float(t) for t in rng.random(len(self.x)))
        active = sample_active_set(self.x, rng)
        return run_rank1_rcrs(self.x, times, active, rng)

    def exact_probabilities(self):
        return rank1_rcrs_exact_probabilities(self.x)

    def fast_counts(self, lo, hi, rng):
        """Vectorized chunk: selection counts per element for trials [lo, hi)."""
        t = hi - lo
        n = len(self.x)
        xv = np.asarray(self.x)
        times = rng.random((t, n))
        active = rng.random((t, n)) < xv
        coins = rng.random((t, n)) < np.exp(-times * xv)
        eligible = active & coins
        masked = np.where(eligible, times, 2.0)
        winner = masked.argmin(axis=1)
        any_hit = eligible.any(axis=1)
        return np.bincount(winner[any_hit], minlength=n)


@dataclass(frozen=True)
class QuarterRunner:
    x: tuple[float, ...]
    order: tuple[int, ...]
    name: str = "quarter"
    arrival_mode: str = "fixed"

    def simulate(self, rng):
        active = sample_active_set(self.x, rng)
        return run_quarter_baseline(self.x, self.order, active, rng)

    def exact_probabilities(self):
        return quarter_exact_probabilities(self.x, self.order)


class MixtureRunner:
    """Runs a constructed randomized scheme end to end."""

    def __init__(self, scheme: RandomizedOCRS):
        self.scheme = scheme
        self.x = scheme.x
        self.name = "lp-ocrs" if scheme.mode == "fixed" else "lp-rcrs"
        self.arrival_mode = scheme.mode

    def simulate(self, rng):
        active = sample_active_set(self.x, rng)
        if self.scheme.mode == "fixed":
            arrival = ArrivalOrder(permutation=self.scheme.order)
        else:
            n = len(self.x)
            arrival = ArrivalOrder(permutation=tuple(int(v) for v in rng.permutation(n)))
        return execute_randomized_crs(self.scheme, arrival, active, rng)

    def exact_probabilities(self):
        return tuple(float(v) for v in self.scheme.mixture_q())


# ---------------------------------------------------------------------------
# fast fixed-order threshold machinery (bitmask states)


class ThresholdSimulator:
    """Mask-based evaluator for the threshold rules on one Bernoulli instance.

    Precomputes the feasibility table over accepted-set bitmasks and caches
    base-price vectors per mask, shared across trajectories, orders, and
    exact DP sweeps.
    """

    def __init__(self, inst: BernoulliInstance, sol: ExAnteSolution,
                 dec: Decomposition):
        self.inst = inst
        self.sol = sol
        self.dec = dec
        self.m = inst.matroid
        self.n = self.m.n
        if self.n > 20:
            raise InputError("threshold simulator capped at n = 20")
        self._indep = None
        self._prices: dict[int, tuple[float, ...]] = {}

    def _independent(self, mask: int) -> bool:
        if self._indep is None:
            self._indep = {}
        got = self._indep.get(mask)
        if got is None:
            got = self.m.is_independent(
                frozenset(i for i in range(self.n) if mask >> i & 1))
            self._indep[mask] = got
        return got

    def prices(self, mask: int) -> tuple[float, ...]:
        got = self._prices.get(mask)
        if got is None:
            A = frozenset(i for i in range(self.n) if mask >> i & 1)
            got = base_price_vector(self.m, A, self.dec, self.sol.y)
            self._prices[mask] = got
        return got

    def run_fixed(self, order: Sequence[int], active_mask: int):
        """One fixed-order trajectory; returns (accepted_mask, total, revenue)."""
        y = self.sol.y
        accepted = 0
        total = revenue = 0.0
        for e in order:
            if not active_mask >> e & 1:
                continue
            t = 0.5 * self.prices(accepted)[e]
            if y[e] > t and self._independent(accepted | (1 << e)):
                accepted |= 1 << e
                total += y[e]
                revenue += t
        return accepted, total, revenue

    def run_times(self, times: Sequence[float], active_mask: int):
        """One random-arrival trajectory with alpha(t) = 1 - exp(t-1)."""
        y = self.sol.y
        order = sorted(range(self.n), key=lambda e: (times[e], e))
        accepted = 0
        total = revenue = 0.0
        for e in order:
            if not active_mask >> e & 1:
                continue
            t = (1.0 - math.exp(times[e] - 1.0)) * self.prices(accepted)[e]
            if y[e] > t and self._independent(accepted | (1 << e)):
                accepted |= 1 << e
                total += y[e]
                revenue += t
        return accepted, total, revenue

    def exact_fixed_stats(self, order: Sequence[int]):
        """Exact (E[total], E[revenue], per-element selection prob) for a
        fixed order, by DP over reachable accepted masks with activity
        probabilities sol.x."""
        x = self.sol.x
        y = self.sol.y
        states = {0: 1.0}
        e_total = e_rev = 0.0
        q = np.zeros(self.n)
        for e in order:
            xe = x[e]
            if xe == 0.0:
                continue
            new: dict[int, float] = {}
            for mask, mass in states.items():
                t = 0.5 * self.prices(mask)[e]
                take = y[e] > t and self._independent(mask | (1 << e))
                if take:
                    pa = mass * xe
                    q[e] += pa
                    e_total += pa * y[e]
                    e_rev += pa * t
                    key = mask | (1 << e)
                    new[key] = new.get(key, 0.0) + pa
                    if xe < 1.0:
                        new[mask] = new.get(mask, 0.0) + mass * (1.0 - xe)
                else:
                    new[mask] = new.get(mask, 0.0) + mass
            states = new
        return e_total, e_rev, q


def worst_fixed_order(sim: ThresholdSimulator, seed: int = 0,
                      enumerate_limit: int = 6, sampled: int = 1000):
    """Order minimizing the exact expected value of the fixed-order rule:
    all n! orders when n <= enumerate_limit, else sampled ones."""
    n = sim.n
    if n <= enumerate_limit:
        candidates = permutations(range(n))
    else:
        rng = substream(seed, TAG_ORDERS)
        candidates = (tuple(int(v) for v in rng.permutation(n))
                      for _ in range(sampled))
    best_order, best_val = None, math.inf
    for order in candidates:
        val, _, _ = sim.exact_fixed_stats(order)
        if val < best_val:
            best_val, best_order = val, tuple(order)
    return best_order, best_val


# ---------------------------------------------------------------------------
# selectability measurement


def exact_selectability(runner, matroid: Matroid | None = None) -> SelectabilityReport:
    """Coin-integrated or enumerated selection probabilities.

    Supported: the rank-1 runners (closed forms), scheme mixtures
    (enumeration), and fixed-order threshold runners (DP).  Runners driven
    by continuous arrival times have no exact path; use
    estimate_selectability for those.
    """
    probs = runner.exact_probabilities()
    if probs is None:
        raise InputError(f"no exact mode for scheme {runner.name!r}; use estimates")
    x = runner.x
    ratios = [p / xi for p, xi in zip(probs, x) if xi > 0]
    return SelectabilityReport(runner.name, tuple(x), tuple(probs), "exact",
                               None, None, min(ratios) if ratios else 1.0)


def _select_chunk(runner, seed, lo, hi):
    n = len(runner.x)
    rng = substream(seed, TAG_SELECT, lo // CHUNK)
    if hasattr(runner, "fast_counts"):
        return runner.fast_counts(lo, hi, rng)
    counts = np.zeros(n)
    for _ in range(lo, hi):
        trace = runner.simulate(rng)
        for e in trace.accepted:
            counts[e] += 1
    return counts


def estimate_selectability(runner, trials: int, seed: int = 0,
                           workers: int = 1) -> SelectabilityReport:
    """Monte Carlo selection probabilities with per-element standard errors."""
    if trials < 1:
        raise InputError("need at least one trial")
    n = len(runner.x)
    bounds = [(lo, min(lo + CHUNK, trials)) for lo in range(0, trials, CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_select_chunk, [runner] * len(bounds),
                                  [seed] * len(bounds),
                                  [b[0] for b in bounds], [b[1] for b in bounds]))
    else:
        parts = [_select_chunk(runner, seed, lo, hi) for lo, hi in bounds]
    counts = np.sum(parts, axis=0)
    phat = counts / trials
    se = np.sqrt(phat * (1 - phat) / trials)
    ratios = [p / xi for p, xi in zip(phat, runner.x) if xi > 0]
    return SelectabilityReport(runner.name, tuple(runner.x),
                               tuple(float(p) for p in phat), "estimate",
                               tuple(float(s) for s in se), trials,
                               min(ratios) if ratios else 1.0, seed)


# ---------------------------------------------------------------------------
# value-ratio measurement for the threshold rules


def _ratio_chunk_fixed(sim_args, order, seed, lo, hi):
    inst, sol, dec = sim_args
    sim = ThresholdSimulator(inst, sol, dec)
    rng = substream(seed, TAG_RATIO, lo // CHUNK)
    n = sim.n
    x = np.asarray(sol.x)
    t = hi - lo
    patterns = (rng.random((t, n)) < x) @ (1 << np.arange(n))
    uniq, counts = np.unique(patterns, return_counts=True)
    tot = rev = sq = 0.0
    for mask, cnt in zip(uniq, counts):
        _, total, revenue = sim.run_fixed(order, int(mask))
        tot += cnt * total
        rev += cnt * revenue
        sq += cnt * total * total
    return tot, rev, sq, t


def _ratio_chunk_times(sim_args, seed, lo, hi):
    inst, sol, dec = sim_args
    sim = ThresholdSimulator(inst, sol, dec)
    rng = substream(seed, TAG_RATIO, lo // CHUNK)
    n = sim.n
    x = np.asarray(sol.x)
    t = hi - lo
    bits = 1 << np.arange(n)
    masks = (rng.random((t, n)) < x) @ bits
    all_times = rng.random((t, n))
    tot = rev = sq = 0.0
    for k in range(t):
        _, total, revenue = sim.run_times(all_times[k], int(masks[k]))
        tot += total
        rev += revenue
        sq += total * total
    return tot, rev, sq, t


def measure_ratio(inst: BernoulliInstance, sol: ExAnteSolution, dec: Decomposition,
                  mode: str, trials: int, seed: int = 0,
                  order: Sequence[int] | None = None,
                  workers: int = 1) -> RatioReport:
    """Monte Carlo estimate of the threshold rule's expected value against
    the relaxation objective, with the revenue/utility split.  Activity is
    sampled with the relaxation marginals sol.x."""
    objective = sol.objective
    if mode == "fixed":
        if order is None:
            raise InputError("fixed mode needs an order")
        order = tuple(int(e) for e in order)
    elif mode != "random":
        raise InputError(f"unknown mode {mode!r}")
    bounds = [(lo, min(lo + CHUNK, trials)) for lo in range(0, trials, CHUNK)]
    args = (inst, sol, dec)
    if mode == "fixed":
        jobs = [(args, order, seed, lo, hi) for lo, hi in bounds]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_ratio_chunk_fixed, *zip(*jobs)))
        else:
            parts = [_ratio_chunk_fixed(*j) for j in jobs]
    else:
        jobs = [(args, seed, lo, hi) for lo, hi in bounds]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_ratio_chunk_times, *zip(*jobs)))
        else:
            parts = [_ratio_chunk_times(*j) for j in jobs]
    tot = sum(p[0] for p in parts)
    rev = sum(p[1] for p in parts)
    sq = sum(p[2] for p in parts)
    t = sum(p[3] for p in parts)
    mean = tot / t
    var = max(sq / t - mean * mean, 0.0) * t / max(t - 1, 1)
    se = math.sqrt(var / t)
    ratio = mean / objective if objective > 1e-12 else None
    scheme = "adversarial" if mode == "fixed" else "random-order"
    return RatioReport(scheme, mean, rev / t, mean - rev / t, objective,
                       ratio, se, t, seed)


# ---------------------------------------------------------------------------
# brute-force baselines


def brute_force_offline(inst: BernoulliInstance, cap: int = 14) -> float:
    """Exact expected max-weight independent set value over all 2^n
    activity patterns (activation probabilities p)."""
    n = inst.n
    if n > cap:
        raise InputError(f"offline brute force capped at n = {cap}")
    m = inst.matroid
    total = 0.0
    for mask in range(1 << n):
        pr = 1.0
        for i in range(n):
            pr *= inst.p[i] if mask >> i & 1 else 1.0 - inst.p[i]
        if pr == 0.0:
            continue
        w = tuple(inst.y[i] if mask >> i & 1 else 0.0 for i in range(n))
        chosen = m.max_weight_independent_set(w)
        total += pr * sum(w[e] for e in chosen)
    return total


# ---------------------------------------------------------------------------
# experiments


def optimality_experiments(eps: float = 0.01, ns: Sequence[int] = (2, 5, 10),
                           trials: int = 200_000, seed: int = 0) -> dict:
    """The two ceiling experiments.

    (a) Two skewed elements under fixed order: the exact policy-LP optimum
        lands in [1/2, 1/2 + eps/2]; the cutting-plane build certifies 1/2.
    (b) Uniform 1/n vectors under random order: no scheme exceeds average
        selectability 1 - (1-1/n)^n, while the exponential-time rule stays
        above 1 - 1/e.
    """
    m2 = UniformMatroid(2, 1)
    x_skew = (1.0 - eps, eps)
    c_star, _, _ = solve_full_policy_lp(m2, x_skew, "fixed", order=(0, 1))
    built = build_randomized_crs(m2, x_skew, "fixed", order=(0, 1),
                                 target_c=0.5, eps=1e-6)
    part_a = {"eps": eps, "c_star": c_star, "ceiling": 0.5 + eps / 2,
              "built_c": built.certified_c,
              "closed_form": 1.0 / (2.0 - eps)}

    part_b = []
    for n in ns:
        x = (1.0 / n,) * n
        empty_exact = 1.0
        for xi in x:
            empty_exact *= 1.0 - xi
        analytic = (1.0 - 1.0 / n) ** n
        ceiling = 1.0 - analytic
        runner = Rank1RcrsRunner(x)
        report = estimate_selectability(runner, trials, seed=seed)
        avg_select = sum(report.probabilities)
        avg_se = math.sqrt(sum((s or 0.0) ** 2 for s in report.std_err))
        part_b.append({
            "n": n, "empty_prob": empty_exact, "analytic": analytic,
            "empty_abs_err": abs(empty_exact - analytic),
            "ceiling": ceiling,
            "avg_selection": avg_select, "avg_se": avg_se,
            "within_ceiling": avg_select <= ceiling + 3 * avg_se,
            "exact_c": exact_selectability(runner).c,
        })
    return {"skewed_pair": part_a, "uniform_family": part_b,
            "e_limit": E_TARGET}


def strawman_base_edge_survival(hats: int) -> float:
    """Exact probability that accept-any-active-feasible leaves the base
    edge selectable on the two-apex graph, enumerating hat-edge activity."""
    m = hat_matroid(hats)
    n_hat = 2 * hats
    base = n_hat
    survival = 0.0
    weight = 0.5 ** n_hat
    for mask in range(1 << n_hat):
        accepted: frozenset[int] = frozenset()
        for e in range(n_hat):
            if mask >> e & 1 and m.is_independent(accepted | {e}):
                accepted = accepted | {e}
        if m.is_independent(accepted | {base}):
            survival += weight
    return survival


def hat_regression(hats_list: Sequence[int] = (2, 3, 4, 5, 6),
                   trials: int = 100_000, seed: int = 0) -> dict:
    """Structure-blindness regression on the two-apex family.

    The matroid-oblivious straw man (accept every active feasible element)
    loses the base edge at a rate growing with the hat count, while the
    LP-built scheme and the threshold rule keep their constants.
    """
    curve = []
    for hats in hats_list:
        survival = strawman_base_edge_survival(hats)
        curve.append({"hats": hats, "base_edge_selectability": survival,
                      "closed_form": 0.75 ** hats})
    decreasing = all(curve[i]["base_edge_selectability"] >
                     curve[i + 1]["base_edge_selectability"]
                     for i in range(len(curve) - 1))

    m = hat_matroid(2)
    x = hat_fractional_vector(2)
    scheme = build_randomized_crs(m, x, "fixed", order=tuple(range(5)),
                                  target_c=0.5, eps=1e-6)
    inst = BernoulliInstance(m, x, (1.0,) * 5)
    sol = ExAnteSolution(x, inst.y, float(sum(xi * yi for xi, yi in zip(x, inst.y))))
    dec = decompose(x, m)
    sim = ThresholdSimulator(inst, sol, dec)
    worst, worst_val = worst_fixed_order(sim, seed=seed)
    ratio = measure_ratio(inst, sol, dec, "fixed", trials, seed=seed, order=worst)
    return {"strawman_curve": curve, "strawman_decreasing": decreasing,
            "lp_certified_c": scheme.certified_c,
            "worst_order": list(worst),
            "worst_order_exact_value": worst_val,
            "threshold_ratio": ratio.to_json_obj(),
            "objective": sol.objective}


# ---------------------------------------------------------------------------
# general-instance pipeline (quantile reduction end to end)


def run_general_adversarial(ginst: GeneralInstance, sim: ThresholdSimulator,
                            rules, order: Sequence[int],
                            rng) -> tuple[float, float, int]:
    """One trial of the reduced pipeline on a general instance: sample real
    values, activate by quantile rule, run the threshold decisions on the
    conditional values, and collect the realized values of accepted
    elements.  Returns (realized total, conditional-value total, active mask)."""
    values = ginst.sample_values(rng)
    active_mask = 0
    for i in range(ginst.n):
        if activate(rules[i], values[i], rng):
            active_mask |= 1 << i
    accepted_mask, total_y, _ = sim.run_fixed(order, active_mask)
    total_real = sum(values[i] for i in range(ginst.n) if accepted_mask >> i & 1)
    return total_real, total_y, active_mask
