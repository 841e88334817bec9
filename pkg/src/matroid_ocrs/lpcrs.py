"""Randomized scheme construction by column generation on the policy LP.

The primal LP maximizes c subject to sum_phi lambda_phi * q_{i,phi} >=
c * x_i per element, over deterministic online policies phi.  Its dual asks
for nonnegative prices y with sum x_i y_i = 1 minimizing the best policy
value sum q_{i,phi} y_i; a price vector is exactly a Bernoulli instance
(element i worth y_i with probability x_i), and the threshold selection
rule for that instance is a policy whose value is at least 1/2 under fixed
order (or 1 - 1/e under random order).  That makes the threshold rule a
separation oracle, and the cutting-plane loop below terminates with a
certified mixture.

Selection probabilities q_{i,phi} are computed exactly by dynamic
programming over reachable accepted sets, enumerating activity outcomes
element by element; random-order mode averages the DP over all n!
permutations (policies observe arrival position, not clock time; position k
maps to the expected arrival time k/(n+1) in the threshold schedule).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import permutations
from typing import Sequence

import numpy as np

from .errors import BuildStalledError, InfeasibleError, InputError
from .exante import (
    BasePriceCache,
    Decomposition,
    ExAnteSolution,
    decompose,
    solve_exante,
)
from .instance import ArrivalOrder, BernoulliInstance
from .matroid import Matroid, all_subsets, matroid_from_json_obj
from .schemes import ALPHA_FIXED, ArrivalRecord, SelectionTrace, alpha_exponential

FIXED_ENUM_CAP = 14
RANDOM_ENUM_CAP = 7
LP_FEAS_TOL = 1e-10
LP_OPT_TOL = 1e-9


@dataclass(frozen=True)
class DualPoint:
    """Prices y >= 0 with sum x_i y_i = 1 and the current dual objective."""

    y: tuple[float, ...]
    mu: float


def normalize_dual(raw: Sequence[float], x: Sequence[float], mu: float = 0.0) -> DualPoint:
    """Clip negatives and rescale so sum x_i y_i = 1; degenerate vectors fall
    back to uniform prices over the support of x."""
    y = np.maximum(np.asarray(raw, dtype=float), 0.0)
    s = float(np.asarray(x) @ y)
    if s <= 1e-9:
        total = float(sum(x))
        if total <= 0:
            raise InputError("cannot normalize a dual against x = 0")
        y = np.array([1.0 / total if xi > 0 else 0.0 for xi in x])
        s = float(np.asarray(x) @ y)
    y = y / s
    return DualPoint(tuple(float(v) for v in y), mu)


class ThresholdPolicy:
    """Deterministic online policy from a threshold rule.

    Accepts an active arrival iff it is feasible and its price y_i strictly
    exceeds schedule(t) * base_price(accepted), where t is the arrival
    position mapped to k/(n+1).  The embedded relaxation solution and
    decomposition come from the separation instance, not from the scheme
    being certified.
    """

    kind = "threshold"

    def __init__(self, matroid: Matroid, sol: ExAnteSolution, dec: Decomposition,
                 schedule: str):
        self.matroid = matroid
        self.sol = sol
        self.dec = dec
        self.schedule = schedule
        self._prices = BasePriceCache(matroid, dec, sol.y)

    def _alpha(self, position: int, n: int) -> float:
        if self.schedule == "constant":
            return ALPHA_FIXED
        if self.schedule == "exponential":
            return alpha_exponential(position / (n + 1.0))
        raise InputError(f"unknown schedule {self.schedule!r}")

    def decide(self, arrived: frozenset[int], accepted: frozenset[int],
               element: int, position: int) -> bool:
        if not self.matroid.is_independent(accepted | {element}):
            return False
        threshold = self._alpha(position, self.matroid.n) * \
            self._prices.prices(accepted)[element]
        return self.sol.y[element] > threshold

    def to_json_obj(self) -> dict:
        return {"type": "threshold", "schedule": self.schedule,
                "solution": self.sol.to_json_obj(),
                "decomposition": self.dec.to_json_obj()}


class GreedyAcceptPolicy:
    """Accept every active element that keeps the accepted set independent."""

    kind = "greedy"

    def __init__(self, matroid: Matroid):
        self.matroid = matroid

    def decide(self, arrived, accepted, element, position) -> bool:
        return self.matroid.is_independent(accepted | {element})

    def to_json_obj(self) -> dict:
        return {"type": "greedy"}


class TablePolicy:
    """Explicit decision table over (arrived, accepted, element) states.

    Missing states reject, which keeps the rule total.  Entries violating
    feasibility (element already arrived, accepted not a subset, or the
    extension dependent) are rejected at construction.
    """

    kind = "table"

    def __init__(self, matroid: Matroid,
                 entries: dict[tuple[frozenset[int], frozenset[int], int], bool]):
        self.matroid = matroid
        for (arrived, accepted, element), dec in entries.items():
            if not dec:
                continue
            if element in arrived or not accepted <= arrived:
                raise InputError(f"invalid table state ({arrived}, {accepted}, {element})")
            if not matroid.is_independent(accepted | {element}):
                raise InputError(f"infeasible acceptance in table at element {element}")
        self.entries = dict(entries)

    def decide(self, arrived, accepted, element, position) -> bool:
        return self.entries.get((arrived, accepted, element), False)

    def to_json_obj(self) -> dict:
        items = sorted(((sorted(a), sorted(b), e, bool(d))
                        for (a, b, e), d in self.entries.items()),
                       key=lambda t: (t[0], t[1], t[2]))
        return {"type": "table", "entries": [list(t) for t in items]}


def policy_from_json_obj(obj: dict, matroid: Matroid):
    t = obj.get("type")
    if t == "threshold":
        return ThresholdPolicy(matroid, ExAnteSolution.from_json_obj(obj["solution"]),
                               Decomposition.from_json_obj(obj["decomposition"]),
                               obj["schedule"])
    if t == "greedy":
        return GreedyAcceptPolicy(matroid)
    if t == "table":
        entries = {(frozenset(a), frozenset(b), int(e)): bool(d)
                   for a, b, e, d in obj["entries"]}
        return TablePolicy(matroid, entries)
    raise InputError(f"unknown policy type {t!r}")


def _dp_single_order(policy, x, order, collect=None):
    """Exact per-element selection probabilities for one arrival order.

    Walks positions keeping a distribution over reachable accepted sets;
    activity bits are independent across elements, so the state mass
    factorizes exactly.  `collect`, when given, records every consulted
    (position, accepted, element, decision) for behavioral fingerprinting.
    """
    n = len(x)
    q = np.zeros(n)
    states = {frozenset(): 1.0}
    arrived: set[int] = set()
    for pos, e in enumerate(order, start=1):
        arrived_fs = frozenset(arrived)
        xe = x[e]
        new: dict[frozenset[int], float] = {}
        for B, mass in states.items():
            take = policy.decide(arrived_fs, B, e, pos)
            if collect is not None:
                collect.add((pos, B, e, take))
            if take and xe > 0:
                q[e] += mass * xe
                key = B | {e}
                new[key] = new.get(key, 0.0) + mass * xe
                if xe < 1.0:
                    new[B] = new.get(B, 0.0) + mass * (1.0 - xe)
            else:
                new[B] = new.get(B, 0.0) + mass
        states = new
        arrived.add(e)
    return q


def exact_q(policy, x: Sequence[float], mode: str,
            order: Sequence[int] | None = None,
            mc_orders: int = 0, seed: int = 0,
            fixed_cap: int = FIXED_ENUM_CAP,
            random_cap: int = RANDOM_ENUM_CAP):
    """Exact selection probabilities of a deterministic policy.

    Fixed mode enumerates activity outcomes along the given order; random
    mode additionally averages over every permutation (n <= random_cap) or,
    with mc_orders > 0, over sampled permutations with a recorded standard
    error.  Returns (q, se) where se is None for exact computations.
    """
    n = len(x)
    x = tuple(float(v) for v in x)
    if mode == "fixed":
        if order is None:
            raise InputError("fixed mode needs an order")
        if n > fixed_cap:
            raise InputError(f"n={n} above fixed-order enumeration cap {fixed_cap}")
        return _dp_single_order(policy, x, tuple(order)), None
    if mode != "random":
        raise InputError(f"unknown mode {mode!r}")
    if n <= random_cap:
        total = np.zeros(n)
        count = 0
        for perm in permutations(range(n)):
            total += _dp_single_order(policy, x, perm)
            count += 1
        return total / count, None
    if mc_orders <= 0:
        raise InputError(
            f"n={n} above random-order enumeration cap {random_cap}; pass mc_orders")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 202]))
    acc = np.zeros(n)
    acc2 = np.zeros(n)
    for _ in range(mc_orders):
        perm = tuple(int(v) for v in rng.permutation(n))
        qi = _dp_single_order(policy, x, perm)
        acc += qi
        acc2 += qi * qi
    mean = acc / mc_orders
    var = np.maximum(acc2 / mc_orders - mean ** 2, 0.0)
    return mean, np.sqrt(var / mc_orders)


def policy_fingerprint(policy, x, mode, order=None, random_cap=RANDOM_ENUM_CAP):
    """Canonical behavior signature: every decision consulted on reachable states."""
    collect: set = set()
    n = len(x)
    if mode == "fixed":
        _dp_single_order(policy, x, tuple(order), collect=collect)
    else:
        for perm in permutations(range(n)):
            _dp_single_order(policy, x, perm, collect=collect)
    return tuple(sorted((pos, tuple(sorted(B)), e, dec)
                        for pos, B, e, dec in collect))


@dataclass(frozen=True)
class SeparationResult:
    policy: object
    value: float
    q: tuple[float, ...]


def separation_oracle(dual: DualPoint, matroid: Matroid, x: Sequence[float],
                      mode: str, order: Sequence[int] | None = None) -> SeparationResult:
    """Best-response policy for a normalized dual: build the Bernoulli
    instance (value y_i with probability x_i), solve its relaxation, and
    return the threshold policy with its exact value sum q_i y_i."""
    total = sum(xi * yi for xi, yi in zip(x, dual.y))
    if abs(total - 1.0) > 1e-6:
        raise InputError(f"dual not normalized: sum x*y = {total}")
    inst = BernoulliInstance(matroid, tuple(x), dual.y)
    sol = solve_exante(inst)
    dec = decompose(sol.x, matroid)
    schedule = "constant" if mode == "fixed" else "exponential"
    policy = ThresholdPolicy(matroid, sol, dec, schedule)
    q, _ = exact_q(policy, x, mode, order=order)
    value = float(q @ np.asarray(dual.y))
    return SeparationResult(policy, value, tuple(float(v) for v in q))


@dataclass
class RandomizedOCRS:
    """Mixture of deterministic policies with a certified selectability."""

    matroid: Matroid
    x: tuple[float, ...]
    mode: str
    order: tuple[int, ...] | None
    policies: list
    weights: tuple[float, ...]
    certified_c: float

    def to_json(self) -> str:
        obj = {"mode": self.mode, "x": list(self.x),
               "order": list(self.order) if self.order is not None else None,
               "certified_c": self.certified_c,
               "matroid": self.matroid.to_json_obj(),
               "weights": list(self.weights),
               "policies": [p.to_json_obj() for p in self.policies]}
        return json.dumps(obj, sort_keys=True, indent=1)

    @staticmethod
    def from_json(text: str) -> "RandomizedOCRS":
        try:
            obj = json.loads(text)
            matroid = matroid_from_json_obj(obj["matroid"])
            policies = [policy_from_json_obj(p, matroid) for p in obj["policies"]]
            order = obj["order"]
            return RandomizedOCRS(matroid, tuple(obj["x"]), obj["mode"],
                                  tuple(order) if order is not None else None,
                                  policies, tuple(obj["weights"]),
                                  float(obj["certified_c"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"malformed scheme JSON: {exc}") from exc

    def mixture_q(self) -> np.ndarray:
        """Mixture selection probabilities by fresh enumeration of every
        policy, independent of whatever the build computed."""
        total = np.zeros(self.matroid.n)
        for policy, w in zip(self.policies, self.weights):
            q, _ = exact_q(policy, self.x, self.mode, order=self.order)
            total += w * np.asarray(q)
        return total


def _solve_restricted_lp(qs: list[np.ndarray], x: Sequence[float]):
    """max c s.t. sum_j lambda_j q_j >= c x, sum lambda = 1, lambda >= 0.
    Returns (c, lambda, row duals)."""
    from .simplex import solve_lp

    n = len(x)
    k = len(qs)
    nvars = k + 1 + n  # lambdas, c, slacks
    A = np.zeros((n + 1, nvars))
    b = np.zeros(n + 1)
    for j, q in enumerate(qs):
        A[:n, j] = q
        A[n, j] = 1.0
    A[:n, k] = -np.asarray(x, dtype=float)
    for i in range(n):
        A[i, k + 1 + i] = -1.0
    b[n] = 1.0
    c_vec = np.zeros(nvars)
    c_vec[k] = -1.0
    res = solve_lp(c_vec, A, b)
    if res.status != "optimal":
        raise InfeasibleError(f"restricted policy LP returned {res.status}")
    lam = np.maximum(res.z[:k], 0.0)
    lam /= lam.sum()
    return float(res.z[k]), lam, res.duals[:n]


def build_randomized_crs(matroid: Matroid, x: Sequence[float], mode: str,
                         order: Sequence[int] | None = None,
                         target_c: float | None = None, eps: float = 1e-6,
                         iteration_cap: int = 200,
                         seed_greedy: bool = True) -> RandomizedOCRS:
    """Cutting-plane construction of a randomized scheme.

    Alternates restricted-LP solves with separation-oracle calls, adding the
    returned threshold policy while it certifies a violated dual constraint.
    Stops when the restricted value reaches target_c - eps, or at dual
    optimality when target_c is None (used for exact optimum experiments).
    Raises BuildStalledError when the loop cannot reach a requested target.
    """
    n = matroid.n
    x = tuple(float(v) for v in x)
    if mode == "fixed":
        if order is None:
            raise InputError("fixed mode needs an arrival order")
        order = tuple(int(e) for e in order)
        if sorted(order) != list(range(n)):
            raise InputError("order is not a permutation")
    elif mode == "random":
        order = None
        if n > RANDOM_ENUM_CAP:
            raise InputError(f"random-order build capped at n={RANDOM_ENUM_CAP}")
    else:
        raise InputError(f"unknown mode {mode!r}")
    target = float(target_c) if target_c is not None else None

    if max(x, default=0.0) <= 0.0:
        policy = GreedyAcceptPolicy(matroid)
        return RandomizedOCRS(matroid, x, mode, order, [policy], (1.0,), 1.0)

    policies: list = []
    fingerprints: set = set()
    qs: list[np.ndarray] = []

    def try_add(policy) -> bool:
        fp = policy_fingerprint(policy, x, mode, order=order)
        if fp in fingerprints:
            return False
        q, _ = exact_q(policy, x, mode, order=order)
        policies.append(policy)
        fingerprints.add(fp)
        qs.append(np.asarray(q))
        return True

    if seed_greedy:
        try_add(GreedyAcceptPolicy(matroid))
    first = separation_oracle(normalize_dual([0.0] * n, x), matroid, x, mode, order)
    try_add(first.policy)

    best_c = -math.inf
    lam = None
    for _ in range(iteration_cap):
        c, lam, duals = _solve_restricted_lp(qs, x)
        if c < best_c - 1e-9:
            raise InfeasibleError("restricted LP value regressed")
        best_c = max(best_c, c)
        if target is not None and c >= target - eps:
            break
        dual = normalize_dual(duals, x, mu=c)
        result = separation_oracle(dual, matroid, x, mode, order)
        if result.value <= c + LP_OPT_TOL or not try_add(result.policy):
            if target is not None and c < target - eps:
                raise BuildStalledError(
                    f"no improving policy at c={c:.8f} below target {target}",
                    best_c=c)
            break
    else:
        if target is not None and best_c < target - eps:
            raise BuildStalledError(
                f"iteration cap {iteration_cap} reached at c={best_c:.8f}",
                best_c=best_c)

    c, lam, _ = _solve_restricted_lp(qs, x)
    keep = [(p, q, w) for p, q, w in zip(policies, qs, lam) if w > 1e-12]
    weights = np.array([w for _, _, w in keep])
    weights /= weights.sum()
    return RandomizedOCRS(matroid, x, mode, order,
                          [p for p, _, _ in keep],
                          tuple(float(w) for w in weights), float(c))


def execute_randomized_crs(scheme: RandomizedOCRS, arrival: ArrivalOrder,
                           active: frozenset[int],
                           rng: np.random.Generator) -> SelectionTrace:
    """Sample one policy by its weight and run it online on the revealed
    active set.  Fixed-mode schemes require their build order."""
    if scheme.mode == "fixed":
        if arrival.permutation is None:
            raise InputError("fixed-mode scheme needs a permutation arrival")
        if tuple(arrival.permutation) != tuple(scheme.order):
            raise InputError("fixed-mode scheme certified for a different order")
    else:
        if arrival.permutation is None and arrival.times is None:
            raise InputError("random-mode scheme needs an arrival order")
    sequence = arrival.sequence()
    idx = int(rng.choice(len(scheme.policies),
                         p=np.asarray(scheme.weights) / sum(scheme.weights)))
    policy = scheme.policies[idx]
    accepted: frozenset[int] = frozenset()
    accepted_seq: list[int] = []
    records = []
    arrived: set[int] = set()
    for pos, e in enumerate(sequence, start=1):
        is_active = e in active
        take = bool(is_active and policy.decide(frozenset(arrived), accepted, e, pos))
        if take:
            accepted = accepted | {e}
            accepted_seq.append(e)
        t = arrival.times[e] if arrival.times is not None else None
        records.append(ArrivalRecord(e, pos, t, is_active,
                                     1.0 if is_active else 0.0, None, take))
        arrived.add(e)
    return SelectionTrace(tuple(records), tuple(accepted_seq))


def verify_selectability(scheme: RandomizedOCRS) -> float:
    """Recompute the mixture's selection probabilities from scratch and
    return min_i q_i / x_i over x_i > 0 (the scheme's actual constant)."""
    q = scheme.mixture_q()
    ratios = [q[i] / scheme.x[i] for i in range(len(scheme.x)) if scheme.x[i] > 0]
    return min(ratios) if ratios else 1.0


def enumerate_table_policies(matroid: Matroid, mode: str,
                             order: Sequence[int] | None = None,
                             max_bits: int = 12) -> list[TablePolicy]:
    """Every deterministic online policy over the reachable state space.

    Exponential in the number of free decision states, so only tiny
    instances are admitted (at most max_bits free states).
    """
    n = matroid.n
    if mode == "fixed":
        if order is None:
            raise InputError("fixed mode needs an order")
        arrive_sets = []
        prefix: set[int] = set()
        for e in tuple(order):
            arrive_sets.append((frozenset(prefix), e))
            prefix.add(e)
    else:
        arrive_sets = [(frozenset(A), e)
                       for A in all_subsets(range(n))
                       for e in range(n) if e not in A]
    states = []
    for A, e in arrive_sets:
        for B in all_subsets(A):
            if matroid.is_independent(B) and matroid.is_independent(B | {e}):
                states.append((A, frozenset(B), e))
    if len(states) > max_bits:
        raise InputError(
            f"{len(states)} free decision states exceed the cap {max_bits}")
    out = []
    for mask in range(1 << len(states)):
        entries = {states[i]: bool(mask >> i & 1) for i in range(len(states))}
        out.append(TablePolicy(matroid, entries))
    return out


def solve_full_policy_lp(matroid: Matroid, x: Sequence[float], mode: str,
                         order: Sequence[int] | None = None,
                         max_bits: int = 12):
    """Exact optimum of the policy LP by enumerating all of Phi*.

    Returns (c_star, weights, policies).  This is both a lower and an upper
    bound on any mixture's selectability, unlike the cutting-plane build
    whose certificate is one-sided.
    """
    policies = enumerate_table_policies(matroid, mode, order=order, max_bits=max_bits)
    qs = [np.asarray(exact_q(p, x, mode, order=order)[0]) for p in policies]
    c, lam, _ = _solve_restricted_lp(qs, x)
    return c, lam, policies
