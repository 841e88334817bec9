"""Value-distribution models and sampling primitives.

Two instance forms: Bernoulli (each element is worth y_i with probability
p_i, else 0) and general finite discrete.  A general instance reduces to a
Bernoulli one by treating an element as *active* exactly when its value
lands in the top x_i quantile of its distribution; atoms on the quantile
boundary are split with an independent coin so the activation probability
is exactly x_i.

All sampling takes an explicit numpy Generator.  Trial-level substreams are
derived from (seed, stream tag, trial index) so runs are reproducible and
safe to distribute across workers.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .matroid import Matroid, matroid_from_json_obj

SCHEMA_VERSION = 1


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for a (seed, tag..., trial) path."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(p) for p in path]]))


def _validate_prob_vector(p, n, name):
    if len(p) != n:
        raise InputError(f"{name} must have length {n}")
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise InputError(f"{name} entries must lie in [0,1], got {v}")


@dataclass(frozen=True)
class BernoulliInstance:
    matroid: Matroid
    p: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        _validate_prob_vector(self.p, self.matroid.n, "p")
        if len(self.y) != self.matroid.n:
            raise InputError(f"y must have length {self.matroid.n}")
        for v in self.y:
            if v < 0:
                raise InputError(f"values must be nonnegative, got {v}")

    @property
    def n(self) -> int:
        return self.matroid.n

    def to_json_obj(self) -> dict:
        return {"v": SCHEMA_VERSION, "model": "bernoulli",
                "matroid": self.matroid.to_json_obj(),
                "p": list(self.p), "y": list(self.y)}

    def content_hash(self) -> str:
        payload = json.dumps(self.to_json_obj(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class GeneralInstance:
    matroid: Matroid
    dists: tuple[tuple[tuple[float, float], ...], ...]

    def __post_init__(self):
        norm = []
        for i, dist in enumerate(self.dists):
            atoms = tuple((float(v), float(q)) for v, q in dist)
            values = [v for v, _ in atoms]
            if len(set(values)) != len(values):
                raise InputError(f"distribution {i} has duplicate values")
            if any(v < 0 for v in values):
                raise InputError(f"distribution {i} has a negative value")
            if any(q < 0 for _, q in atoms):
                raise InputError(f"distribution {i} has a negative probability")
            total = sum(q for _, q in atoms)
            if abs(total - 1.0) > 1e-12:
                raise InputError(f"distribution {i} probabilities sum to {total}")
            norm.append(atoms)
        object.__setattr__(self, "dists", tuple(norm))
        if len(self.dists) != self.matroid.n:
            raise InputError(f"need {self.matroid.n} distributions")

    @property
    def n(self) -> int:
        return self.matroid.n

    def sample_values(self, rng: np.random.Generator) -> tuple[float, ...]:
        draws = rng.random(self.n)
        out = []
        for dist, u in zip(self.dists, draws):
            cum = 0.0
            value = dist[-1][0]
            for v, q in dist:
                cum += q
                if u < cum:
                    value = v
                    break
            out.append(value)
        return tuple(out)

    def to_json_obj(self) -> dict:
        return {"v": SCHEMA_VERSION, "model": "general",
                "matroid": self.matroid.to_json_obj(),
                "dists": [[[v, q] for v, q in d] for d in self.dists]}

    def content_hash(self) -> str:
        payload = json.dumps(self.to_json_obj(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def instance_from_json_obj(obj: dict):
    try:
        matroid = matroid_from_json_obj(obj["matroid"])
        model = obj["model"]
        if model == "bernoulli":
            return BernoulliInstance(matroid, tuple(obj["p"]), tuple(obj["y"]))
        if model == "general":
            dists = tuple(tuple((float(v), float(q)) for v, q in d) for d in obj["dists"])
            return GeneralInstance(matroid, dists)
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed instance object: {exc}") from exc
    raise InputError(f"unknown instance model {obj.get('model')!r}")


def instance_from_json(text: str):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from exc
    return instance_from_json_obj(obj)


@dataclass(frozen=True)
class QuantileRule:
    """Activation rule: active iff v > threshold, or v == threshold with an
    independent coin of bias boundary_prob.  Marginal activation probability
    is exactly the quantile mass."""

    element: int
    mass: float
    threshold: float
    boundary_prob: float
    conditional_value: float


def build_quantile_rule(dist: Sequence[tuple[float, float]], x_i: float,
                        element: int = 0) -> QuantileRule:
    """Top-x_i-quantile rule for a finite discrete distribution.

    When x_i lands exactly on an atom boundary the rule uses the next lower
    support value as threshold with boundary probability 0; otherwise the
    boundary atom is split.  x_i = 0 yields a never-active rule with
    conditional value 0.
    """
    if not 0.0 <= x_i <= 1.0:
        raise InputError(f"quantile mass must lie in [0,1], got {x_i}")
    atoms = sorted(((float(v), float(q)) for v, q in dist), key=lambda a: -a[0])
    if not atoms:
        raise InputError("empty distribution")
    total = sum(q for _, q in atoms)
    if abs(total - 1.0) > 1e-12:
        raise InputError(f"distribution probabilities sum to {total}")
    if x_i == 0.0:
        return QuantileRule(element, 0.0, math.inf, 0.0, 0.0)
    cum = 0.0
    mean_above = 0.0
    for j, (v, q) in enumerate(atoms):
        if q == 0.0:
            continue
        if cum + q >= x_i or j == len(atoms) - 1:
            taken = x_i - cum
            if abs(taken - q) <= 1e-15:  # boundary atom fully inside the quantile
                tau = atoms[j + 1][0] if j + 1 < len(atoms) else -math.inf
                rho = 0.0
                taken = q
            else:
                tau = v
                rho = taken / q
            mean_above += taken * v
            y = mean_above / x_i
            return QuantileRule(element, float(x_i), tau, rho, y)
        cum += q
        mean_above += q * v
    raise InputError("distribution probabilities sum below the requested mass")


def activate(rule: QuantileRule, v_i: float, rng: np.random.Generator) -> bool:
    """Decide activity of a realized value under a quantile rule."""
    if v_i > rule.threshold:
        return True
    if v_i == rule.threshold and rule.boundary_prob > 0.0:
        return bool(rng.random() < rule.boundary_prob)
    return False


def sample_active_set(x: Sequence[float], rng: np.random.Generator) -> frozenset[int]:
    """Each element independently present with probability x_i."""
    x = tuple(float(v) for v in x)
    _validate_prob_vector(x, len(x), "x")
    draws = rng.random(len(x))
    return frozenset(i for i, (u, xi) in enumerate(zip(draws, x)) if u < xi)


@dataclass(frozen=True)
class ArrivalOrder:
    """Either a fixed permutation or per-element arrival times in [0,1]."""

    permutation: tuple[int, ...] | None = None
    times: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.permutation is None) == (self.times is None):
            raise InputError("exactly one of permutation/times must be set")
        if self.permutation is not None:
            perm = tuple(int(e) for e in self.permutation)
            if sorted(perm) != list(range(len(perm))):
                raise InputError(f"not a permutation: {perm}")
            object.__setattr__(self, "permutation", perm)
        else:
            times = tuple(float(t) for t in self.times)
            if any(not 0.0 <= t <= 1.0 for t in times):
                raise InputError("arrival times must lie in [0,1]")
            object.__setattr__(self, "times", times)

    def sequence(self) -> tuple[int, ...]:
        """Arrival sequence; time ties break by ascending element id."""
        if self.permutation is not None:
            return self.permutation
        return tuple(sorted(range(len(self.times)), key=lambda e: (self.times[e], e)))


def sample_arrival(mode: str, n: int, rng: np.random.Generator,
                   permutation: Sequence[int] | None = None) -> ArrivalOrder:
    """mode='fixed' echoes the given permutation; mode='uniform' draws iid
    Uniform[0,1] arrival times."""
    if n < 1:
        raise InputError("need n >= 1")
    if mode == "fixed":
        if permutation is None:
            raise InputError("fixed mode needs a permutation")
        return ArrivalOrder(permutation=tuple(permutation))
    if mode == "uniform":
        return ArrivalOrder(times=tuple(float(t) for t in rng.random(n)))
    raise InputError(f"unknown arrival mode {mode!r}")
