"""Fractional relaxation machinery.

`solve_exante` maximizes sum(x_i * y_i) over the matroid polytope
intersected with the box x <= p by a polymatroid greedy: elements are
processed in descending value order and each is filled to the minimum of
its box cap and its saturation capacity in the polytope.  General discrete
instances reduce to the same greedy over per-atom segments, since the
objective as a function of x_i is the integral of the quantile function.

`decompose` writes a point of the matroid polytope as a convex combination
of independent sets by column generation: the restricted master is an L1
feasibility LP and pricing is a single weighted matroid greedy on the dual
prices.  The resulting correlated distribution over independent sets drives
`sample_correlated`, `remaining_value`, and the base prices used by the
threshold selection rules.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, InputError
from .instance import BernoulliInstance, GeneralInstance, QuantileRule, build_quantile_rule
from .matroid import Matroid, PartitionMatroid, UniformMatroid
from .simplex import solve_lp

MARGINAL_TOL = 1e-8
PRICING_TOL = 1e-9


@dataclass(frozen=True)
class ExAnteSolution:
    x: tuple[float, ...]
    y: tuple[float, ...]
    objective: float

    def to_json_obj(self) -> dict:
        return {"x": list(self.x), "y": list(self.y), "objective": self.objective}

    @staticmethod
    def from_json_obj(obj: dict) -> "ExAnteSolution":
        return ExAnteSolution(tuple(obj["x"]), tuple(obj["y"]), float(obj["objective"]))


@dataclass(frozen=True)
class Decomposition:
    sets: tuple[frozenset[int], ...]
    weights: tuple[float, ...]

    def marginals(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for S, w in zip(self.sets, self.weights):
            for e in S:
                out[e] += w
        return out

    def to_json_obj(self) -> dict:
        return {"sets": [sorted(S) for S in self.sets], "weights": list(self.weights)}

    @staticmethod
    def from_json_obj(obj: dict) -> "Decomposition":
        return Decomposition(tuple(frozenset(S) for S in obj["sets"]),
                             tuple(float(w) for w in obj["weights"]))


@dataclass(frozen=True)
class CorrelatedValues:
    values: tuple[float, ...]
    support: frozenset[int]


@dataclass(frozen=True)
class BasePriceTable:
    accepted: frozenset[int]
    prices: tuple[float, ...]
    mode: str
    std_err: tuple[float, ...] | None = None


def saturation_capacity(m: Matroid, x: Sequence[float], i: int) -> float:
    """Largest t >= 0 with x + t*e_i still inside the matroid polytope.

    Equals min over sets S containing i of rank(S) - x(S).  Uniform and
    partition matroids admit closed forms; otherwise the minimum is taken
    over subsets of the support of x, which is where it is attained.
    """
    n = m.n
    if isinstance(m, UniformMatroid):
        cap = 1.0 - x[i]
        if n > m.r:
            cap = min(cap, m.r - sum(x))
        return max(cap, 0.0)
    if isinstance(m, PartitionMatroid):
        j = m.block_of(i)
        block = m.blocks[j]
        cap = 1.0 - x[i]
        if len(block) > m.capacities[j]:
            cap = min(cap, m.capacities[j] - sum(x[e] for e in block))
        return max(cap, 0.0)
    support = [e for e in range(n) if x[e] > 1e-15 and e != i]
    best = float(m.rank(frozenset({i}))) - x[i]
    for k in range(1, len(support) + 1):
        for combo in combinations(support, k):
            S = frozenset(combo) | {i}
            g = m.rank(S) - x[i] - sum(x[e] for e in combo)
            if g < best:
                best = g
    return max(best, 0.0)


def _greedy_fill(m: Matroid, segments: list[tuple[float, int, float]]) -> list[float]:
    """Fill segments (value, element, mass) in descending value order."""
    x = [0.0] * m.n
    for _, elem, mass in sorted(segments, key=lambda s: (-s[0], s[1])):
        room = saturation_capacity(m, x, elem)
        take = min(mass, room)
        if take > 0:
            x[elem] += take
    return x


def solve_exante(inst: BernoulliInstance) -> ExAnteSolution:
    """Optimal x for a Bernoulli instance: maximize sum(x*y) over the
    matroid polytope with x <= p.  Zero-value elements get x_i = 0."""
    segments = [(inst.y[i], i, inst.p[i]) for i in range(inst.n) if inst.y[i] > 0]
    x = _greedy_fill(inst.matroid, segments)
    objective = float(sum(xi * yi for xi, yi in zip(x, inst.y)))
    return ExAnteSolution(tuple(x), inst.y, objective)


def solve_exante_general(inst: GeneralInstance) -> tuple[ExAnteSolution, tuple[QuantileRule, ...]]:
    """Optimal x for a general instance plus the quantile activation rules
    at that x.  Atoms become segments; the greedy takes each element's top
    atoms first, so the filled mass is exactly a top-quantile."""
    segments = []
    for i, dist in enumerate(inst.dists):
        for v, q in dist:
            if v > 0 and q > 0:
                segments.append((v, i, q))
    x = _greedy_fill(inst.matroid, segments)
    rules = tuple(build_quantile_rule(inst.dists[i], x[i], i) for i in range(inst.n))
    y = tuple(r.conditional_value for r in rules)
    objective = float(sum(xi * yi for xi, yi in zip(x, y)))
    return ExAnteSolution(tuple(x), y, objective), rules


def reduce_to_bernoulli(inst: GeneralInstance) -> tuple[BernoulliInstance, ExAnteSolution, tuple[QuantileRule, ...]]:
    """The quantile reduction: element i is worth its conditional top-quantile
    value with probability x_i.  Both instances share the same relaxation value."""
    sol, rules = solve_exante_general(inst)
    bern = BernoulliInstance(inst.matroid, sol.x, sol.y)
    return bern, sol, rules


def decompose(x: Sequence[float], m: Matroid, tol: float = MARGINAL_TOL,
              max_columns: int | None = None) -> Decomposition:
    """Express x in the matroid polytope as a convex combination of
    independent sets via column generation.

    Raises InfeasibleError (reporting the residual) when the feasibility LP
    cannot be closed, which signals x outside the polytope or a tolerance
    set too tight.
    """
    n = m.n
    x = [float(v) for v in x]
    if len(x) != n:
        raise InputError(f"x must have length {n}")
    for v in x:
        if v < -1e-12 or v > 1 + 1e-12:
            raise InfeasibleError(f"x entry {v} outside [0,1]")
    x = [min(max(v, 0.0), 1.0) for v in x]
    if max_columns is None:
        max_columns = 50 * max(n, 1) + 10

    columns: list[frozenset[int]] = [frozenset()]
    seen = {frozenset()}
    # warm start with the greedy set under x-weights
    warm = m.max_weight_independent_set(tuple(x))
    if warm not in seen:
        columns.append(warm)
        seen.add(warm)

    b = np.array(x + [1.0])
    while True:
        k = len(columns)
        A = np.zeros((n + 1, k + 2 * n))
        for j, S in enumerate(columns):
            for e in S:
                A[e, j] = 1.0
            A[n, j] = 1.0
        A[:n, k:k + n] = np.eye(n)       # s+
        A[:n, k + n:k + 2 * n] = -np.eye(n)  # s-
        c = np.concatenate([np.zeros(k), np.ones(2 * n)])
        res = solve_lp(c, A, b)
        if res.status != "optimal":
            raise InfeasibleError(f"decomposition master LP returned {res.status}")
        residual = res.objective
        if residual <= PRICING_TOL:
            lam = np.maximum(res.z[:k], 0.0)
            total = lam.sum()
            if total <= 0:
                raise InfeasibleError("decomposition collapsed to zero weight")
            lam /= total
            keep = [(S, float(w)) for S, w in zip(columns, lam) if w > 1e-15]
            dec = Decomposition(tuple(S for S, _ in keep), tuple(w for _, w in keep))
            gap = np.max(np.abs(dec.marginals(n) - np.array(x))) if n else 0.0
            if gap > tol:
                raise InfeasibleError(f"decomposition residual {gap:.3e} above {tol}")
            return dec
        w = res.duals[:n]
        theta = res.duals[n]
        pos = tuple(max(wi, 0.0) for wi in w)
        candidate = m.max_weight_independent_set(pos)
        gain = sum(w[e] for e in candidate) + theta
        if gain <= PRICING_TOL or candidate in seen:
            raise InfeasibleError(
                f"x not decomposable: residual {residual:.3e} with no improving set")
        columns.append(candidate)
        seen.add(candidate)
        if len(columns) > max_columns:
            raise InfeasibleError(
                f"decomposition exceeded {max_columns} columns, residual {residual:.3e}")


def sample_correlated(dec: Decomposition, y: Sequence[float],
                      rng: np.random.Generator) -> CorrelatedValues:
    """Draw an independent set from the decomposition and lift it to values."""
    idx = int(rng.choice(len(dec.sets), p=np.asarray(dec.weights) / sum(dec.weights)))
    support = dec.sets[idx]
    values = tuple(y[e] if e in support else 0.0 for e in range(len(y)))
    return CorrelatedValues(values, support)


def remaining_value(m: Matroid, A: Sequence[int], v_hat: Sequence[float]) -> float:
    """Value of the greedy max-weight independent set in M/A under v_hat."""
    A = frozenset(A)
    sub = m.contract(A) if A else m
    chosen = sub.max_weight_independent_set(tuple(v_hat))
    return float(sum(v_hat[e] for e in chosen))


def base_price_vector(m: Matroid, A: frozenset[int], dec: Decomposition,
                      y: Sequence[float]) -> tuple[float, ...]:
    """Exact base prices b_i(A): expected drop in remaining value from also
    accepting i, averaged over the decomposition."""
    n = m.n
    prices = [0.0] * n
    for S, w in zip(dec.sets, dec.weights):
        v_hat = [y[e] if e in S else 0.0 for e in range(n)]
        r0 = remaining_value(m, A, v_hat)
        for i in range(n):
            if i in A:
                continue
            ri = remaining_value(m, A | {i}, v_hat)
            prices[i] += w * (r0 - ri)
    return tuple(prices)


def base_price(m: Matroid, A: Sequence[int], dec: Decomposition, y: Sequence[float],
               mode: str = "exact", samples: int = 10000,
               rng: np.random.Generator | None = None) -> BasePriceTable:
    """Base prices for every element against accepted set A.

    Exact mode sums over the decomposition; monte_carlo mode samples
    correlated value vectors and reports the standard error per element.
    """
    A = frozenset(A)
    if mode == "exact":
        return BasePriceTable(A, base_price_vector(m, A, dec, y), "exact")
    if mode != "monte_carlo":
        raise InputError(f"unknown base-price mode {mode!r}")
    if rng is None:
        raise InputError("monte_carlo mode needs an rng")
    n = m.n
    sums = np.zeros(n)
    sqsums = np.zeros(n)
    for _ in range(samples):
        cv = sample_correlated(dec, y, rng)
        r0 = remaining_value(m, A, cv.values)
        for i in range(n):
            if i in A:
                continue
            d = r0 - remaining_value(m, A | {i}, cv.values)
            sums[i] += d
            sqsums[i] += d * d
    mean = sums / samples
    var = np.maximum(sqsums / samples - mean ** 2, 0.0)
    se = np.sqrt(var / samples)
    return BasePriceTable(A, tuple(float(v) for v in mean), "monte_carlo",
                          tuple(float(v) for v in se))


class BasePriceCache:
    """Memoized exact base prices keyed by accepted set.

    Memoization must not change results: entries are pure functions of
    (matroid, decomposition, y), all immutable.  Workers may each hold their
    own cache.
    """

    def __init__(self, m: Matroid, dec: Decomposition, y: Sequence[float]):
        self.matroid = m
        self.dec = dec
        self.y = tuple(y)
        self._memo: dict[frozenset[int], tuple[float, ...]] = {}

    def prices(self, A: frozenset[int]) -> tuple[float, ...]:
        got = self._memo.get(A)
        if got is None:
            got = base_price_vector(self.matroid, A, self.dec, self.y)
            self._memo[A] = got
        return got


def assert_in_polytope(m: Matroid, x: Sequence[float], exhaustive_limit: int = 12) -> None:
    """Exhaustive polytope membership check for small n; InfeasibleError on failure."""
    n = m.n
    if any(v < -1e-9 for v in x):
        raise InfeasibleError("negative coordinate")
    if n > exhaustive_limit:
        decompose(x, m)  # delegates the certificate to column generation
        return
    elems = list(range(n))
    for k in range(1, n + 1):
        for combo in combinations(elems, k):
            if sum(x[e] for e in combo) > m.rank(frozenset(combo)) + 1e-9:
                raise InfeasibleError(
                    f"rank constraint violated on {list(combo)}")


def solution_bundle_json(sol: ExAnteSolution, dec: Decomposition,
                         instance_hash: str) -> str:
    obj = {"instance_hash": instance_hash, "solution": sol.to_json_obj(),
           "decomposition": dec.to_json_obj()}
    return json.dumps(obj, sort_keys=True, indent=1)


def solution_bundle_from_json(text: str) -> tuple[ExAnteSolution, Decomposition, str]:
    try:
        obj = json.loads(text)
        return (ExAnteSolution.from_json_obj(obj["solution"]),
                Decomposition.from_json_obj(obj["decomposition"]),
                obj.get("instance_hash", ""))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"malformed solution bundle: {exc}") from exc
