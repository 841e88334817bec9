"""Finite matroid oracles over a ground set {0, ..., n-1}.

Four concrete families (uniform, partition, graphic, explicit) plus
contraction.  Every oracle is immutable after construction and purely
functional: repeated queries with equal arguments return equal answers, and
oracles can be shared freely across worker processes or threads.

Rank is computed by greedy insertion, which is exact for matroids.  The
weighted greedy (`max_weight_independent_set`) breaks ties by ascending
element id and skips zero-weight elements, so its output is a deterministic
function of the weight vector.
"""

from __future__ import annotations

import json
from itertools import combinations
from typing import Iterable, Sequence

from .errors import InputError


def _as_set(elements: Iterable[int]) -> frozenset[int]:
    return elements if isinstance(elements, frozenset) else frozenset(elements)


class Matroid:
    """Base class: an independence oracle over elements 0..n-1."""

    n: int

    @property
    def elements(self) -> range:
        return range(self.n)

    def _check_subset(self, S: frozenset[int]) -> None:
        for e in S:
            if not (isinstance(e, (int,)) and 0 <= e < self.n):
                raise InputError(f"element {e!r} outside ground set of size {self.n}")

    def is_independent(self, S: Iterable[int]) -> bool:
        raise NotImplementedError

    def rank(self, S: Iterable[int]) -> int:
        """Size of a maximum independent subset of S, by greedy insertion."""
        S = _as_set(S)
        self._check_subset(S)
        current: set[int] = set()
        for e in sorted(S):
            if self.is_independent(frozenset(current | {e})):
                current.add(e)
        return len(current)

    def full_rank(self) -> int:
        return self.rank(self.elements)

    def span(self, A: Iterable[int]) -> frozenset[int]:
        """Elements whose addition to A does not increase rank(A)."""
        A = _as_set(A)
        self._check_subset(A)
        r = self.rank(A)
        return frozenset(e for e in self.elements if self.rank(A | {e}) == r)

    def contract(self, A: Iterable[int]) -> "ContractedMatroid":
        return ContractedMatroid(self, _as_set(A))

    def max_weight_independent_set(self, weights: Sequence[float]) -> frozenset[int]:
        """Greedy maximum-weight independent set.

        Processes elements by descending weight (ties by ascending id) and
        keeps an element iff it stays independent.  Zero-weight elements are
        never included, so ties with the empty set resolve toward smaller
        sets.  Negative weights are rejected.
        """
        if len(weights) != self.n:
            raise InputError(f"expected {self.n} weights, got {len(weights)}")
        for e, w in enumerate(weights):
            if w < 0:
                raise InputError(f"negative weight {w} for element {e}")
        order = sorted((e for e in self.elements if weights[e] > 0),
                       key=lambda e: (-weights[e], e))
        current: set[int] = set()
        for e in order:
            if self.is_independent(frozenset(current | {e})):
                current.add(e)
        return frozenset(current)

    def to_json_obj(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"


class UniformMatroid(Matroid):
    """Independent iff |S| <= r."""

    def __init__(self, n: int, r: int):
        if n < 0 or r < 0:
            raise InputError("uniform matroid needs n >= 0 and rank >= 0")
        self.n = n
        self.r = r

    def is_independent(self, S: Iterable[int]) -> bool:
        S = _as_set(S)
        self._check_subset(S)
        return len(S) <= self.r

    def rank(self, S: Iterable[int]) -> int:
        S = _as_set(S)
        self._check_subset(S)
        return min(len(S), self.r)

    def to_json_obj(self) -> dict:
        return {"kind": "uniform", "n": self.n, "rank": self.r}


class PartitionMatroid(Matroid):
    """Independent iff |S ∩ block_j| <= capacity_j for every block."""

    def __init__(self, blocks: Sequence[Sequence[int]], capacities: Sequence[int]):
        if len(blocks) != len(capacities):
            raise InputError("one capacity per block required")
        flat = [e for b in blocks for e in b]
        n = len(flat)
        if sorted(flat) != list(range(n)):
            raise InputError("blocks must partition 0..n-1")
        for c in capacities:
            if c < 0:
                raise InputError("capacities must be nonnegative")
        self.n = n
        self.blocks = tuple(tuple(sorted(b)) for b in blocks)
        self.capacities = tuple(int(c) for c in capacities)
        self._block_of = {}
        for j, b in enumerate(self.blocks):
            for e in b:
                self._block_of[e] = j

    def block_of(self, e: int) -> int:
        return self._block_of[e]

    def is_independent(self, S: Iterable[int]) -> bool:
        S = _as_set(S)
        self._check_subset(S)
        counts = [0] * len(self.blocks)
        for e in S:
            counts[self._block_of[e]] += 1
        return all(c <= cap for c, cap in zip(counts, self.capacities))

    def rank(self, S: Iterable[int]) -> int:
        S = _as_set(S)
        self._check_subset(S)
        counts = [0] * len(self.blocks)
        for e in S:
            counts[self._block_of[e]] += 1
        return sum(min(c, cap) for c, cap in zip(counts, self.capacities))

    def to_json_obj(self) -> dict:
        return {"kind": "partition", "blocks": [list(b) for b in self.blocks],
                "capacities": list(self.capacities)}


class GraphicMatroid(Matroid):
    """Elements are edge ids; independent iff the edge set is a forest.

    Independence testing uses union-find with path compression, built per
    call so the oracle stays stateless.  Self-loops are dependent singletons
    and parallel edges are dependent pairs, as usual.
    """

    def __init__(self, vertices: int, edges: Sequence[Sequence[int]]):
        if vertices < 0:
            raise InputError("vertex count must be nonnegative")
        for u, v in edges:
            if not (0 <= u < vertices and 0 <= v < vertices):
                raise InputError(f"edge ({u},{v}) outside vertex range")
        self.vertices = vertices
        self.edges = tuple((int(u), int(v)) for u, v in edges)
        self.n = len(self.edges)

    def is_independent(self, S: Iterable[int]) -> bool:
        S = _as_set(S)
        self._check_subset(S)
        parent = list(range(self.vertices))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in S:
            u, v = self.edges[e]
            ru, rv = find(u), find(v)
            if ru == rv:
                return False
            parent[ru] = rv
        return True

    def rank(self, S: Iterable[int]) -> int:
        S = _as_set(S)
        self._check_subset(S)
        parent = list(range(self.vertices))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        r = 0
        for e in sorted(S):
            u, v = self.edges[e]
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
                r += 1
        return r

    def to_json_obj(self) -> dict:
        return {"kind": "graphic", "vertices": self.vertices,
                "edges": [list(e) for e in self.edges]}


class ExplicitMatroid(Matroid):
    """Matroid given by listing every independent set."""

    def __init__(self, n: int, independent_sets: Iterable[Iterable[int]]):
        self.n = n
        fam = {frozenset(S) for S in independent_sets}
        fam.add(frozenset())
        for S in fam:
            for e in S:
                if not 0 <= e < n:
                    raise InputError(f"element {e} outside ground set of size {n}")
        self.independent_sets = frozenset(fam)

    def is_independent(self, S: Iterable[int]) -> bool:
        S = _as_set(S)
        self._check_subset(S)
        return S in self.independent_sets

    def check_axioms(self) -> None:
        """Raise InputError unless the family is downward closed and satisfies exchange."""
        fam = self.independent_sets
        for S in fam:
            for e in S:
                if S - {e} not in fam:
                    raise InputError(f"family not downward closed at {sorted(S)}")
        for S in fam:
            for T in fam:
                if len(S) < len(T):
                    if not any(S | {e} in fam for e in T - S):
                        raise InputError(
                            f"exchange fails for {sorted(S)} and {sorted(T)}")

    def to_json_obj(self) -> dict:
        sets = sorted(self.independent_sets, key=lambda S: (len(S), sorted(S)))
        return {"kind": "explicit", "n": self.n,
                "independent_sets": [sorted(S) for S in sets]}


class ContractedMatroid(Matroid):
    """Contraction M/A on the same element ids.

    S is independent iff S avoids A and rank_M(S ∪ A) = |S| + rank_M(A).
    Elements of A become loops, which keeps element ids stable for callers
    holding weight vectors.  A may be dependent; the rank identity handles
    that case.
    """

    def __init__(self, base: Matroid, contracted: frozenset[int]):
        base._check_subset(contracted)
        self.base = base
        self.contracted = frozenset(contracted)
        self.n = base.n
        self._rank_of_contracted = base.rank(self.contracted)

    def is_independent(self, S: Iterable[int]) -> bool:
        S = _as_set(S)
        self._check_subset(S)
        if S & self.contracted:
            return False
        return self.base.rank(S | self.contracted) == len(S) + self._rank_of_contracted

    def rank(self, S: Iterable[int]) -> int:
        S = _as_set(S)
        self._check_subset(S)
        return self.base.rank(S | self.contracted) - self._rank_of_contracted

    def to_json_obj(self) -> dict:
        return {"kind": "contracted", "base": self.base.to_json_obj(),
                "contracted": sorted(self.contracted)}


def all_subsets(elements: Iterable[int]):
    """Yield every subset of the given elements as a frozenset."""
    elems = list(elements)
    for k in range(len(elems) + 1):
        for combo in combinations(elems, k):
            yield frozenset(combo)


def matroid_from_json_obj(obj: dict) -> Matroid:
    try:
        kind = obj["kind"]
        if kind == "uniform":
            return UniformMatroid(int(obj["n"]), int(obj["rank"]))
        if kind == "partition":
            return PartitionMatroid(obj["blocks"], obj["capacities"])
        if kind == "graphic":
            return GraphicMatroid(int(obj["vertices"]), obj["edges"])
        if kind == "explicit":
            m = ExplicitMatroid(int(obj["n"]), obj["independent_sets"])
            m.check_axioms()
            return m
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed matroid object: {exc}") from exc
    raise InputError(f"unknown matroid kind {obj.get('kind')!r}")


def matroid_from_json(text: str) -> Matroid:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from exc
    return matroid_from_json_obj(obj)


def hat_matroid(hats: int) -> GraphicMatroid:
    """Two-apex graph: hats paths u1-v_j-u2 plus the base edge u1-u2.

    Vertices: 0 = u1, 1 = u2, 2..hats+1 = v_1..v_hats.  Edge ids: for hat j,
    edge 2j is (u1, v_j) and edge 2j+1 is (v_j, u2); the base edge (u1, u2)
    is last, id 2*hats.
    """
    if hats < 1:
        raise InputError("need at least one hat")
    edges = []
    for j in range(hats):
        edges.append((0, 2 + j))
        edges.append((2 + j, 1))
    edges.append((0, 1))
    return GraphicMatroid(hats + 2, edges)


def hat_fractional_vector(hats: int) -> tuple[float, ...]:
    """The canonical point in the hat graphic-matroid polytope: 1/2 on every
    hat edge, 1 on the base edge."""
    return tuple([0.5] * (2 * hats) + [1.0])
