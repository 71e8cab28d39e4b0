"""Independent reference implementations used only by the tests."""
import itertools
import math

import numpy as np
from scipy.stats import unitary_group


def simplex_grid(k, steps):
    """All weight vectors of length k with entries in multiples of 1/steps."""
    out = []
    for cuts in itertools.combinations(range(steps + k - 1), k - 1):
        prev, w = -1, []
        for c in cuts:
            w.append(c - prev - 1)
            prev = c
        w.append(steps + k - 2 - prev)
        out.append(w)
    return np.array(out, dtype=float) / steps


def permutohedron_margin(f, v, steps=12):
    """Largest ``min_a (R_a - f_a)`` over a grid of the permutohedron of ``v``.

    Every ``R`` majorized by ``v`` is a convex combination of permutations of ``v``,
    so this is a brute-force search that never uses partial sums or an LP.
    """
    perms = np.array(sorted(set(itertools.permutations(v))), dtype=float)
    W = simplex_grid(len(perms), steps)
    R = W @ perms
    return float(np.max(np.min(R - np.asarray(f, dtype=float), axis=1)))


def sorted_rank_vector(psi, tol=1e-8):
    """Sorted Schmidt ranks over every cut that keeps particle 0 on the left,
    by reshaping the amplitudes and counting singular values above ``tol``."""
    dims = tuple(psi.dims)
    N = len(dims)
    t = np.asarray(psi.amplitudes).reshape(dims)
    ranks = []
    for size in range(1, N):
        for rest in itertools.combinations(range(1, N), size - 1):
            left = (0,) + rest
            right = tuple(m for m in range(N) if m not in left)
            rows = math.prod(dims[m] for m in left)
            s = np.linalg.svd(t.transpose(left + right).reshape(rows, -1), compute_uv=False)
            ranks.append(int(np.sum(s > tol)))
    return tuple(sorted(ranks, reverse=True))


def grid_feasible(f, v, h):
    """Brute force: is there ``R`` on the grid ``h Z`` with ``R >= f`` and ``R`` majorized by ``v``?

    For ``f`` on the grid and integer ``v`` every vertex of the feasible polytope
    lies on the grid, so the search is exact.
    """
    k = len(v)
    axis = np.arange(0, round(max(v) / h) + 1) * h
    R = np.stack(np.meshgrid(*[axis] * k, indexing="ij"), -1).reshape(-1, k)
    R = R[np.all(R >= np.asarray(f) - 1e-12, axis=1)]
    Rs = -np.sort(-R, axis=1)
    vs = np.cumsum(sorted(v, reverse=True))
    ok = np.all(np.cumsum(Rs, axis=1)[:, :-1] <= vs[:-1] + 1e-9, axis=1)
    ok &= np.abs(Rs.sum(axis=1) - vs[-1]) < 1e-9
    return bool(np.any(ok))


def reference_density(D, rng):
    """Lebesgue-spectrum density matrix from scipy's Haar sampler and a Dirichlet draw."""
    U = unitary_group.rvs(D, random_state=rng)
    lam = rng.dirichlet(np.ones(D))
    m = (U * lam) @ U.conj().T
    return (m + m.conj().T) / 2


def ks_critical_1pct(n):
    return 1.628 / math.sqrt(n)
