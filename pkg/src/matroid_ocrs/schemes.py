"""Online selection rules.

Threshold rules for general matroids: under a fixed (adversarial) order an
element is taken iff it is active, feasible, and its value strictly exceeds
half its base price against the current accepted set; under random arrival
the multiplier is alpha(t) = 1 - exp(t-1) at the element's arrival time.

Rank-1 rules: the reach-recursion scheme (consider element i with bias
alpha / reach_i so it is considered with probability exactly alpha = 1/2),
the exponential-time rule (accept an active arrival at time t with
probability exp(-t * x_i)), and the coin-flip baseline that ignores each
element with probability 1/2.

Every runner takes the active set as an input rather than sampling it, so
callers can enumerate activity patterns exactly.  Runners are deterministic
given (active, order-or-times, and the scheme's own coins from the passed
rng); repeated runs produce identical traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, SchemeMismatchError
from .exante import BasePriceCache, Decomposition, ExAnteSolution
from .instance import BernoulliInstance

ALPHA_FIXED = 0.5


def alpha_exponential(t: float) -> float:
    return 1.0 - math.exp(t - 1.0)


@dataclass(frozen=True)
class ScheduleAlpha:
    """Threshold multiplier schedule: constant 1/2 or 1 - exp(t-1)."""

    kind: str  # "constant" | "exponential"

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return ALPHA_FIXED
        if self.kind == "exponential":
            return alpha_exponential(t)
        raise InputError(f"unknown schedule {self.kind!r}")


@dataclass(frozen=True)
class ArrivalRecord:
    element: int
    position: int
    time: float | None
    active: bool
    value: float
    threshold: float | None
    accepted: bool


@dataclass(frozen=True)
class SelectionTrace:
    records: tuple[ArrivalRecord, ...]
    accepted: tuple[int, ...]

    @property
    def revenue(self) -> float:
        return sum(r.threshold or 0.0 for r in self.records if r.accepted)

    @property
    def utility(self) -> float:
        return sum(max(r.value - (r.threshold or 0.0), 0.0)
                   for r in self.records if r.accepted)

    @property
    def total(self) -> float:
        return sum(r.value for r in self.records if r.accepted)

    def to_json_obj(self) -> dict:
        return {
            "accepted": list(self.accepted),
            "total": self.total,
            "revenue": self.revenue,
            "utility": self.utility,
            "records": [{"element": r.element, "position": r.position,
                         "time": r.time, "active": r.active, "value": r.value,
                         "threshold": r.threshold, "accepted": r.accepted}
                        for r in self.records],
        }


def _check_lengths(n, *vectors):
    for v in vectors:
        if len(v) != n:
            raise InputError(f"expected length {n}, got {len(v)}")


def run_adversarial(inst: BernoulliInstance, sol: ExAnteSolution, dec: Decomposition,
                    order: Sequence[int], active: frozenset[int],
                    price_cache: BasePriceCache | None = None) -> SelectionTrace:
    """Fixed-order threshold rule: accept iff active, feasible, and
    y_i > base_price(accepted)/2.  Deterministic given (order, active)."""
    m = inst.matroid
    _check_lengths(m.n, sol.x, sol.y)
    order = tuple(int(e) for e in order)
    if sorted(order) != list(range(m.n)):
        raise InputError(f"order is not a permutation of 0..{m.n - 1}")
    if price_cache is None:
        price_cache = BasePriceCache(m, dec, sol.y)
    accepted: frozenset[int] = frozenset()
    accepted_seq: list[int] = []
    records = []
    for pos, e in enumerate(order, start=1):
        is_active = e in active
        value = sol.y[e] if is_active else 0.0
        threshold = ALPHA_FIXED * price_cache.prices(accepted)[e]
        take = (is_active and value > threshold
                and m.is_independent(accepted | {e}))
        if take:
            accepted = accepted | {e}
            accepted_seq.append(e)
        records.append(ArrivalRecord(e, pos, None, is_active, value, threshold, take))
    return SelectionTrace(tuple(records), tuple(accepted_seq))


def run_random_order(inst: BernoulliInstance, sol: ExAnteSolution, dec: Decomposition,
                     times: Sequence[float], active: frozenset[int],
                     price_cache: BasePriceCache | None = None) -> SelectionTrace:
    """Random-arrival threshold rule with alpha(t) = 1 - exp(t-1); the
    accepted set seen by an arrival is everything accepted strictly earlier
    (time ties break by element id)."""
    m = inst.matroid
    _check_lengths(m.n, sol.x, sol.y, times)
    if any(not 0.0 <= t <= 1.0 for t in times):
        raise InputError("arrival times must lie in [0,1]")
    if price_cache is None:
        price_cache = BasePriceCache(m, dec, sol.y)
    sequence = sorted(range(m.n), key=lambda e: (times[e], e))
    accepted: frozenset[int] = frozenset()
    accepted_seq: list[int] = []
    records = []
    for pos, e in enumerate(sequence, start=1):
        t = float(times[e])
        is_active = e in active
        value = sol.y[e] if is_active else 0.0
        threshold = alpha_exponential(t) * price_cache.prices(accepted)[e]
        take = (is_active and value > threshold
                and m.is_independent(accepted | {e}))
        if take:
            accepted = accepted | {e}
            accepted_seq.append(e)
        records.append(ArrivalRecord(e, pos, t, is_active, value, threshold, take))
    return SelectionTrace(tuple(records), tuple(accepted_seq))


@dataclass(frozen=True)
class MagicianState:
    """Reach probabilities and consideration biases of the rank-1 scheme."""

    reach: tuple[float, ...]     # reach[k] = Pr[nothing accepted before arrival k+1]
    consider: tuple[float, ...]  # consider[k] = alpha / reach[k]
    alpha: float


def magician_schedule(x_in_arrival_order: Sequence[float],
                      alpha: float = ALPHA_FIXED) -> MagicianState:
    """Reach recursion r_1 = 1, r_{k+1} = r_k - alpha * x_k with biases
    q_k = alpha / r_k.  Raises unless every bias lies in [0,1], which holds
    whenever sum(x) <= 1 and alpha <= 1/2."""
    reach = [1.0]
    consider = []
    for xk in x_in_arrival_order:
        r = reach[-1]
        q = alpha / r
        if q > 1.0 + 1e-12:
            raise SchemeMismatchError(
                f"consideration bias {q} above 1; is sum(x) <= 1?")
        consider.append(min(q, 1.0))
        reach.append(r - alpha * xk)
    return MagicianState(tuple(reach), tuple(consider), alpha)


def _require_unit_budget(x):
    if sum(x) > 1.0 + 1e-9:
        raise SchemeMismatchError(f"rank-1 scheme needs sum(x) <= 1, got {sum(x)}")


def run_rank1_ocrs(x: Sequence[float], order: Sequence[int], active: frozenset[int],
                   rng: np.random.Generator) -> SelectionTrace:
    """Rank-1 reach-recursion scheme: flip a consideration coin with bias
    alpha/reach on each arrival while nothing is accepted; accept the first
    considered active element.  Values are recorded as 1 for active."""
    _require_unit_budget(x)
    order = tuple(int(e) for e in order)
    if sorted(order) != list(range(len(x))):
        raise InputError("order is not a permutation")
    state = magician_schedule([x[e] for e in order])
    records = []
    accepted_seq: list[int] = []
    done = False
    for pos, e in enumerate(order, start=1):
        is_active = e in active
        take = False
        if not done:
            considered = bool(rng.random() < state.consider[pos - 1])
            take = considered and is_active
        if take:
            accepted_seq.append(e)
            done = True
        records.append(ArrivalRecord(e, pos, None, is_active,
                                     1.0 if is_active else 0.0, None, take))
    return SelectionTrace(tuple(records), tuple(accepted_seq))


def run_rank1_rcrs(x: Sequence[float], times: Sequence[float], active: frozenset[int],
                   rng: np.random.Generator) -> SelectionTrace:
    """Rank-1 exponential-time scheme: while nothing is accepted, an active
    element arriving at time t is accepted with probability exp(-t * x_i)."""
    _require_unit_budget(x)
    _check_lengths(len(x), times)
    sequence = sorted(range(len(x)), key=lambda e: (times[e], e))
    records = []
    accepted_seq: list[int] = []
    done = False
    for pos, e in enumerate(sequence, start=1):
        t = float(times[e])
        is_active = e in active
        take = False
        if not done and is_active:
            take = bool(rng.random() < math.exp(-t * x[e]))
        if take:
            accepted_seq.append(e)
            done = True
        records.append(ArrivalRecord(e, pos, t, is_active,
                                     1.0 if is_active else 0.0, None, take))
    return SelectionTrace(tuple(records), tuple(accepted_seq))


def run_quarter_baseline(x: Sequence[float], order: Sequence[int],
                         active: frozenset[int],
                         rng: np.random.Generator) -> SelectionTrace:
    """Coin-flip baseline: ignore each element independently with
    probability 1/2, accept the first non-ignored active element."""
    _require_unit_budget(x)
    order = tuple(int(e) for e in order)
    records = []
    accepted_seq: list[int] = []
    done = False
    for pos, e in enumerate(order, start=1):
        is_active = e in active
        not_ignored = bool(rng.random() < 0.5)
        take = (not done) and not_ignored and is_active
        if take:
            accepted_seq.append(e)
            done = True
        records.append(ArrivalRecord(e, pos, None, is_active,
                                     1.0 if is_active else 0.0, None, take))
    return SelectionTrace(tuple(records), tuple(accepted_seq))


def rank1_ocrs_exact_probabilities(x: Sequence[float]) -> tuple[float, ...]:
    """Coin-integrated selection probabilities of the reach-recursion scheme:
    exactly alpha * x_i for every element, in any order."""
    _require_unit_budget(x)
    magician_schedule(tuple(x))  # validates the bias range
    return tuple(ALPHA_FIXED * xi for xi in x)


def rank1_rcrs_exact_probabilities(x: Sequence[float]) -> tuple[float, ...]:
    """Time-integrated selection probabilities of the exponential-time rule:
    x_i * (1 - exp(-S)) / S with S = sum(x)."""
    _require_unit_budget(x)
    s = float(sum(x))
    factor = 1.0 if s == 0 else (1.0 - math.exp(-s)) / s
    return tuple(xi * factor for xi in x)


def quarter_exact_probabilities(x: Sequence[float],
                                order: Sequence[int]) -> tuple[float, ...]:
    """Selection probabilities of the coin-flip baseline on a fixed order:
    x_i/2 times the survival product of earlier elements."""
    _require_unit_budget(x)
    out = [0.0] * len(x)
    survive = 1.0
    for e in order:
        out[e] = 0.5 * x[e] * survive
        survive *= 1.0 - 0.5 * x[e]
    return tuple(out)
