"""Shared helpers for the test suite: random matroids and brute-force LP oracles."""

import numpy as np

from matroid_ocrs.matroid import (
    ExplicitMatroid,
    GraphicMatroid,
    PartitionMatroid,
    UniformMatroid,
    all_subsets,
)


def gf2_linear_matroid(rng, n, dim):
    """Explicit matroid of a random 0/1 matrix over GF(2): columns are elements."""
    cols = rng.integers(0, 2, size=(dim, n))

    def gf2_rank(mat):
        mat = mat.copy() % 2
        r = 0
        for c in range(mat.shape[1]):
            pivots = np.nonzero(mat[r:, c])[0]
            if len(pivots) == 0:
                continue
            p = pivots[0] + r
            mat[[r, p]] = mat[[p, r]]
            for other in range(mat.shape[0]):
                if other != r and mat[other, c]:
                    mat[other] = (mat[other] + mat[r]) % 2
            r += 1
            if r == mat.shape[0]:
                break
        return r

    independent = [S for S in all_subsets(range(n))
                   if len(S) == 0 or gf2_rank(cols[:, sorted(S)]) == len(S)]
    return ExplicitMatroid(n, independent)


def random_partition_matroid(rng, n):
    ids = list(rng.permutation(n))
    nblocks = int(rng.integers(1, max(2, n // 2 + 1)))
    cuts = sorted(rng.choice(range(1, n), size=min(nblocks - 1, n - 1),
                             replace=False)) if n > 1 and nblocks > 1 else []
    blocks, prev = [], 0
    for c in list(cuts) + [n]:
        blocks.append([int(e) for e in ids[prev:c]])
        prev = c
    capacities = [int(rng.integers(1, len(b) + 1)) for b in blocks]
    return PartitionMatroid(blocks, capacities)


def random_graphic_matroid(rng, n_edges):
    nv = int(rng.integers(3, 6))
    edges = [(int(rng.integers(nv)), int(rng.integers(nv))) for _ in range(n_edges)]
    return GraphicMatroid(nv, edges)


def random_matroid(rng, max_n=8):
    """A random small matroid from a mix of families."""
    n = int(rng.integers(1, max_n + 1))
    kind = rng.integers(4)
    if kind == 0:
        return UniformMatroid(n, int(rng.integers(0, n + 1)))
    if kind == 1:
        return random_partition_matroid(rng, n)
    if kind == 2:
        return random_graphic_matroid(rng, n)
    return gf2_linear_matroid(rng, n, dim=int(rng.integers(1, 5)))


def polytope_lp_optimum(m, y, p):
    """Brute-force LP oracle: maximize sum(y*x) over the matroid polytope
    intersected with [0, p], using every subset rank constraint explicitly."""
    from scipy.optimize import linprog

    n = m.n
    if n == 0:
        return 0.0, np.zeros(0)
    rows, rhs = [], []
    for S in all_subsets(range(n)):
        if not S:
            continue
        row = np.zeros(n)
        for e in S:
            row[e] = 1.0
        rows.append(row)
        rhs.append(m.rank(S))
    res = linprog(-np.asarray(y, dtype=float), A_ub=np.array(rows), b_ub=np.array(rhs),
                  bounds=[(0.0, float(pi)) for pi in p], method="highs")
    assert res.status == 0, res.message
    return -res.fun, res.x


def check_in_polytope(m, x, tol=1e-9):
    """Exhaustive membership test for the matroid polytope (small n only)."""
    if any(xi < -tol for xi in x):
        return False
    for S in all_subsets(range(m.n)):
        if S and sum(x[e] for e in S) > m.rank(S) + tol:
            return False
    return True
