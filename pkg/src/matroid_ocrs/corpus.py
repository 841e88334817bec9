"""Canonical and seeded instance families used by the verifier and the CLI.

Everything here is deterministic: the seeded generators derive all
randomness from an explicit seed, so the verification corpus is stable
across runs and machines.
"""

from __future__ import annotations

import numpy as np

from .instance import BernoulliInstance, GeneralInstance, substream
from .matroid import (
    GraphicMatroid,
    Matroid,
    PartitionMatroid,
    UniformMatroid,
    hat_fractional_vector,
    hat_matroid,
)


def rank1_pair_instance() -> BernoulliInstance:
    return BernoulliInstance(UniformMatroid(2, 1), (0.5, 0.5), (1.0, 1.0))


def uniform_over_n_instance(n: int) -> BernoulliInstance:
    return BernoulliInstance(UniformMatroid(n, 1), (1.0 / n,) * n, (1.0,) * n)


def hat_instance(hats: int) -> BernoulliInstance:
    m = hat_matroid(hats)
    return BernoulliInstance(m, hat_fractional_vector(hats), (1.0,) * m.n)


def seeded_rank1_vectors(count: int, seed: int, max_n: int = 12,
                         total_cap: float = 0.97) -> list[tuple[float, ...]]:
    """Random nonnegative vectors with sum strictly below 1."""
    out = []
    for k in range(count):
        rng = substream(seed, 301, k)
        n = int(rng.integers(1, max_n + 1))
        x = rng.uniform(0.01, 1.0, size=n)
        x *= rng.uniform(0.3, total_cap) / x.sum()
        out.append(tuple(float(v) for v in x))
    return out


def _seeded_partition_matroid(rng) -> PartitionMatroid:
    n = int(rng.integers(4, 11))
    nblocks = int(rng.integers(2, max(3, n // 2)))
    ids = list(range(n))
    cuts = sorted(rng.choice(range(1, n), size=nblocks - 1, replace=False))
    blocks, prev = [], 0
    for c in list(cuts) + [n]:
        blocks.append(ids[prev:c])
        prev = c
    caps = [int(rng.integers(1, len(b) + 1)) for b in blocks]
    return PartitionMatroid(blocks, caps)


def _seeded_graphic_matroid(rng) -> GraphicMatroid:
    nv = int(rng.integers(3, 6))
    n = int(rng.integers(4, 11))
    edges = []
    for k in range(n):
        u = int(rng.integers(nv))
        v = int(rng.integers(nv))
        if u == v:
            v = (v + 1) % nv
        edges.append((u, v))
    return GraphicMatroid(nv, edges)


def seeded_ratio_corpus(count: int = 20, seed: int = 0) -> list[tuple[str, BernoulliInstance]]:
    """Partition and graphic Bernoulli instances with n <= 10 for the
    expected-value ratio checks."""
    out = []
    for k in range(count):
        rng = substream(seed, 302, k)
        if k % 2 == 0:
            m: Matroid = _seeded_partition_matroid(rng)
            name = f"partition-{k}"
        else:
            m = _seeded_graphic_matroid(rng)
            name = f"graphic-{k}"
        p = tuple(float(v) for v in rng.uniform(0.1, 0.95, size=m.n))
        y = tuple(float(v) for v in rng.uniform(0.2, 2.0, size=m.n))
        out.append((name, BernoulliInstance(m, p, y)))
    return out


def seeded_explicit_bernoulli(count: int = 50, seed: int = 0,
                              max_n: int = 6) -> list[BernoulliInstance]:
    """Random small instances over explicit matroids built from GF(2)
    column spaces, for solver-oracle equivalence checks."""
    from .matroid import ExplicitMatroid, all_subsets

    def gf2_rank(mat):
        mat = mat.copy() % 2
        r = 0
        rows, cols = mat.shape
        for c in range(cols):
            pivs = np.nonzero(mat[r:, c])[0]
            if len(pivs) == 0:
                continue
            p = pivs[0] + r
            mat[[r, p]] = mat[[p, r]]
            for o in range(rows):
                if o != r and mat[o, c]:
                    mat[o] = (mat[o] + mat[r]) % 2
            r += 1
            if r == rows:
                break
        return r

    out = []
    for k in range(count):
        rng = substream(seed, 303, k)
        n = int(rng.integers(2, max_n + 1))
        dim = int(rng.integers(1, 5))
        cols = rng.integers(0, 2, size=(dim, n))
        fam = [S for S in all_subsets(range(n))
               if len(S) == 0 or gf2_rank(cols[:, sorted(S)]) == len(S)]
        m = ExplicitMatroid(n, fam)
        p = tuple(float(v) for v in rng.uniform(0, 1, size=n))
        y = tuple(float(v) for v in rng.uniform(0, 2, size=n))
        out.append(BernoulliInstance(m, p, y))
    return out


def seeded_general_instances(count: int = 10, seed: int = 0,
                             max_n: int = 6) -> list[GeneralInstance]:
    """Finite discrete instances with 2-4 atoms per element."""
    out = []
    made = 0
    k = 0
    while made < count:
        rng = substream(seed, 304, k)
        k += 1
        kind = int(rng.integers(3))
        n = int(rng.integers(2, max_n + 1))
        if kind == 0:
            m: Matroid = UniformMatroid(n, int(rng.integers(1, max(2, n // 2 + 1))))
        elif kind == 1:
            rng2 = substream(seed, 305, k)
            m = _seeded_partition_matroid(rng2)
            if m.n > max_n:
                continue
        else:
            nv = int(rng.integers(3, 5))
            edges = []
            for _ in range(n):
                u = int(rng.integers(nv))
                v = int(rng.integers(nv))
                if u == v:
                    v = (v + 1) % nv
                edges.append((u, v))
            m = GraphicMatroid(nv, edges)
        dists = []
        for _ in range(m.n):
            atoms = int(rng.integers(2, 5))
            vals = sorted(set(round(float(v), 6)
                              for v in rng.uniform(0.1, 5.0, size=atoms)))
            raw = rng.uniform(0.1, 1.0, size=len(vals))
            probs = raw / raw.sum()
            probs[-1] = 1.0 - float(probs[:-1].sum())
            dists.append(tuple(zip(vals, (float(q) for q in probs))))
        out.append(GeneralInstance(m, tuple(dists)))
        made += 1
    return out


def lp_build_corpus() -> list[tuple[str, Matroid, tuple[float, ...]]]:
    """Ten named (matroid, x) pairs with n <= 7 for the construction checks."""
    tri = GraphicMatroid(3, [(0, 1), (1, 2), (2, 0)])
    return [
        ("rank1-even", UniformMatroid(2, 1), (0.5, 0.5)),
        ("rank1-three", UniformMatroid(3, 1), (0.3, 0.3, 0.3)),
        ("rank1-skew", UniformMatroid(2, 1), (0.99, 0.01)),
        ("rank1-fifth", UniformMatroid(5, 1), (0.2,) * 5),
        ("uniform42", UniformMatroid(4, 2), (0.5, 0.5, 0.5, 0.5)),
        ("uniform52", UniformMatroid(5, 2), (0.4,) * 5),
        ("partition22", PartitionMatroid([[0, 1], [2, 3]], [1, 1]),
         (0.5, 0.5, 0.5, 0.5)),
        ("partition32", PartitionMatroid([[0, 1, 2], [3, 4]], [2, 1]),
         (0.6, 0.6, 0.6, 0.5, 0.4)),
        ("triangle", tri, (2 / 3, 2 / 3, 2 / 3)),
        ("hat2", hat_matroid(2), hat_fractional_vector(2)),
    ]


def default_named_instances() -> dict[str, BernoulliInstance]:
    """The canonical instances shipped with the CLI."""
    out = {
        "rank1-pair": rank1_pair_instance(),
        "hat2": hat_instance(2),
        "hat4": hat_instance(4),
    }
    for n in (2, 5, 10):
        out[f"uniform-over-{n}"] = uniform_over_n_instance(n)
    for name, inst in seeded_ratio_corpus(count=4, seed=0):
        out[name] = inst
    return out
