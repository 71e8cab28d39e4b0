"""Reference criteria: correlation-tensor norm, linear-entropy-vector bounds and a
lower bound on the genuine multipartite concurrence."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .lattice import (
    SLACK,
    Candidate,
    CriterionReport,
    enumerate_bipartitions,
    make_report,
)
from .qudit import (
    DensityMatrix,
    InvalidDimensionError,
    Normalization,
    ValidationError,
    gellmann_basis,
    marginals,
    operator_tensor,
    purity,
)
from .states import PSI432_DIMS

# -- correlation tensor ------------------------------------------------------


def correlation_tensor(rho: DensityMatrix) -> np.ndarray:
    """``t[mu_1, ..., mu_N] = <s_mu1 x ... x s_muN>`` with SCALED Gell-Mann
    operators and ``s_0`` the identity; shape ``(d**2,) * N``."""
    d = _equal_dim(rho)
    G = gellmann_basis(d, Normalization.SCALED).coefficient_matrix()
    t = operator_tensor(rho)
    for _ in range(rho.N):
        # contract the leading axis and move the new index to the back
        t = np.tensordot(t, G, axes=([0], [1]))
    if np.max(np.abs(t.imag)) > 1e-10:
        raise ValidationError("correlations of Hermitian observables are not real")
    return t.real


def _equal_dim(rho: DensityMatrix) -> int:
    if len(set(rho.dims)) != 1:
        raise InvalidDimensionError(f"correlation-tensor criteria need equal local dimensions, got {rho.dims}")
    return rho.dims[0]


def correlation_block_norms(rho: DensityMatrix) -> np.ndarray:
    """``out[m]`` = sum of squared correlations with exactly ``m`` non-identity factors."""
    t = correlation_tensor(rho)
    order = np.zeros(t.shape, dtype=int)
    for axis in range(rho.N):
        shape = [1] * rho.N
        shape[axis] = -1
        order = order + (np.arange(t.shape[axis]) > 0).reshape(shape)
    return np.bincount(order.ravel(), weights=(t**2).ravel(), minlength=rho.N + 1)


def correlation_tensor_norm(rho: DensityMatrix, K: int) -> float:
    """``C_K``: squared 2-norms of all correlation tensors on ``K`` or more particles."""
    if not 0 <= K <= rho.N:
        raise ValueError(f"K must lie in [0, {rho.N}], got {K}")
    return float(correlation_block_norms(rho)[K:].sum())


def corrtensor_bound(k: Sequence[int], d: int) -> float:
    """Largest ``C_2`` compatible with single-particle ranks ``k``."""
    N = len(k)
    return d**N + N - 1 - sum(d / kn for kn in k)


def exclusion_by_corrtensor(rho: DensityMatrix, candidates: Sequence[Candidate]) -> CriterionReport:
    """Exclude candidates ``v`` whose top ``N`` entries, read as single-particle ranks,
    are incompatible with ``C_2``.

    Any decomposition with sorted ranks below ``v`` has single-particle ranks whose
    sorted vector lies below ``v[:N]``; the bound is increasing and symmetric in
    ``k`` and ``C_2`` is convex, so such a state obeys ``C_2 <= bound(v[:N])``.
    The report also carries the certified sorted single-particle ranks.
    """
    d = _equal_dim(rho)
    N = rho.N
    C2 = correlation_tensor_norm(rho, 2)
    excluded = [v for v in candidates if C2 > corrtensor_bound([min(x, d) for x in v[:N]], d) + SLACK]
    ranks = single_particle_ranks(C2, d, N)
    witness = {"C2": C2}
    witness.update({f"k_{n + 1}": float(r) for n, r in enumerate(ranks)})
    return make_report("corrtensor", candidates, excluded, witness_values=witness,
                       notes={"single_particle_ranks": "".join(map(str, ranks))})


def corrtensor_violated(C2: float, k: Sequence[int], d: int) -> bool:
    return C2 > corrtensor_bound(k, d) + SLACK


def single_particle_ranks(C2: float, d: int, N: int) -> tuple[int, ...]:
    """Sorted componentwise-minimal non-violated single-particle rank vector."""
    feasible = [k for k in itertools.product(range(1, d + 1), repeat=N) if not corrtensor_violated(C2, k, d)]
    if not feasible:
        return (d,) * N
    return tuple(sorted(np.min(np.array(feasible), axis=0).tolist(), reverse=True))


# -- linear-entropy vector -----------------------------------------------------


@dataclass(frozen=True)
class IndexPairSet:
    """Pairs of computational multi-indices (eta, eta') used by the entropy bounds."""

    pairs: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    k: int | None = None

    def __post_init__(self):
        pairs = tuple((tuple(a), tuple(b)) for a, b in self.pairs)
        if not pairs:
            raise ValidationError("an index pair set needs at least one pair")
        seen = set()
        for a, b in pairs:
            if a == b:
                raise ValidationError(f"pair ({a}, {b}) repeats a multi-index")
            key = frozenset((a, b))
            if key in seen:
                raise ValidationError(f"pair ({a}, {b}) listed twice")
            seen.add(key)
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_strings(cls, pairs: Sequence[tuple[str, str]], k: int | None = None) -> "IndexPairSet":
        return cls(tuple((tuple(int(c) for c in a), tuple(int(c) for c in b)) for a, b in pairs), k)

    def validate(self, dims: Sequence[int]) -> None:
        for a, b in self.pairs:
            for eta in (a, b):
                if len(eta) != len(dims) or any(not 0 <= i < d for i, d in zip(eta, dims)):
                    raise ValidationError(f"multi-index {eta} is invalid for dims {tuple(dims)}")


def ghz_pair_set(d: int, N: int, k: int | None = None) -> IndexPairSet:
    """All pairs ``(i...i, j...j)`` with ``i < j``."""
    return IndexPairSet(tuple(((i,) * N, (j,) * N) for i, j in itertools.combinations(range(d), 2)), k)


_PSI432_PAIRS = {
    1: [("000", "111"), ("000", "123"), ("012", "123"), ("000", "012"), ("111", "123"), ("111", "012")],
    2: [("000", "111"), ("000", "123"), ("012", "123"), ("000", "012"), ("111", "123")],
    3: [("000", "111"), ("000", "123"), ("012", "123")],
}


def psi432_pair_sets() -> list[IndexPairSet]:
    return [IndexPairSet.from_strings(_PSI432_PAIRS[k], k) for k in (1, 2, 3)]


def default_pair_sets(dims: Sequence[int]) -> list[IndexPairSet]:
    """One set per vector component: GHZ pairs for equal dims, the three listed
    sets for the (2, 3, 4) family."""
    n_cuts = len(enumerate_bipartitions(dims))
    if tuple(dims) == PSI432_DIMS:
        return psi432_pair_sets()
    if len(set(dims)) == 1:
        return [ghz_pair_set(dims[0], len(dims), k) for k in range(1, n_cuts + 1)]
    raise ValidationError(f"no default index pair sets for dims {tuple(dims)}")


def _swap(eta: tuple[int, ...], eta2: tuple[int, ...], members: Sequence[int]):
    a, b = list(eta), list(eta2)
    for m in members:
        a[m], b[m] = eta2[m], eta[m]
    return tuple(a), tuple(b)


@lru_cache(maxsize=None)
def check_doubling(C: IndexPairSet, dims: tuple[int, ...]) -> None:
    """Raise unless the factor-2 form of the bound is valid for ``C``.

    For a pure state and a cut ``alpha``, the squared linear entropy is a sum
    over ordered pairs in which (eta, eta'), (eta', eta) and their alpha-swapped
    versions all carry the same term. When, for every cut, these four-element
    orbits are distinct for distinct pairs of ``C`` that differ on both sides, each
    pair's term is counted four times and the bound doubles.
    """
    for b in enumerate_bipartitions(dims):
        seen: set = set()
        for eta, eta2 in C.pairs:
            sa, sb = _swap(eta, eta2, b.members)
            if {sa, sb} == {eta, eta2}:
                continue  # orbit of size two; its term is never positive
            orbit = {(eta, eta2), (eta2, eta), (sa, sb), (sb, sa)}
            if orbit & seen:
                raise ValidationError(
                    f"pairs of C overlap after exchanging the indices of {b.label()}; use prefactor 1"
                )
            seen |= orbit


def _flat(eta: tuple[int, ...], dims: Sequence[int]) -> int:
    return int(np.ravel_multi_index(eta, tuple(dims)))


@dataclass(frozen=True, eq=False)
class PairPlan:
    """Flat matrix indices needed to evaluate the entropy bound for one pair set."""

    rows: np.ndarray  # (|C|,) coherence entries rho[rows, cols]
    cols: np.ndarray
    swap_a: np.ndarray  # (n_cuts, |C|) diagonal entries after exchanging a cut's indices
    swap_b: np.ndarray
    size: int


@lru_cache(maxsize=None)
def pair_plan(C: IndexPairSet, dims: tuple[int, ...]) -> PairPlan:
    C.validate(dims)
    cuts = enumerate_bipartitions(dims)
    rows = np.array([_flat(a, dims) for a, _ in C.pairs])
    cols = np.array([_flat(b, dims) for _, b in C.pairs])
    sa = np.zeros((len(cuts), len(C.pairs)), dtype=int)
    sb = np.zeros_like(sa)
    for j, cut in enumerate(cuts):
        for i, (eta, eta2) in enumerate(C.pairs):
            x, y = _swap(eta, eta2, cut.members)
            sa[j, i], sb[j, i] = _flat(x, dims), _flat(y, dims)
    return PairPlan(rows, cols, sa, sb, len(C.pairs))


def pair_terms(matrix: np.ndarray, plan: PairPlan) -> tuple[float, np.ndarray]:
    """Sum of ``|rho_{eta eta'}|`` over the pairs and, per cut, the summed geometric
    means of the swapped diagonal entries."""
    diag = np.clip(np.real(np.diagonal(matrix)), 0.0, None)
    coh = float(np.sum(np.abs(matrix[plan.rows, plan.cols])))
    per_cut = np.sum(np.sqrt(diag[plan.swap_a] * diag[plan.swap_b]), axis=1)
    return coh, per_cut


def raw_entropy_bound(matrix: np.ndarray, plan: PairPlan, k: int, prefactor: float = 2.0) -> float:
    """Unclamped bound for component ``k`` (subtracting the ``k`` smallest cut totals)."""
    coh, per_cut = pair_terms(matrix, plan)
    return prefactor / math.sqrt(plan.size) * (coh - np.sort(per_cut)[:k].sum())


def linear_entropy_bound(rho: DensityMatrix, k: int, C: IndexPairSet, prefactor: float = 2.0,
                         per_pair_min: bool = False) -> float:
    """Lower bound on the ``k``-th largest entry of the linear-entropy vector.

    ``B_k = (prefactor / sqrt|C|) [sum_C |rho_{eta eta'}| - min_{|R| = k} sum_{alpha in R} s_alpha]``
    where ``s_alpha`` sums the geometric means of the alpha-swapped diagonal entries
    over ``C``, clamped at 0. ``prefactor=2`` is validated with ``check_doubling``.
    ``per_pair_min=True`` instead takes the minimum over ``R`` separately for
    each pair, which is the larger (not generally valid) variant.
    """
    n_cuts = len(enumerate_bipartitions(rho.dims))
    if not 1 <= k <= n_cuts:
        raise ValueError(f"k must lie in [1, {n_cuts}], got {k}")
    if prefactor == 2.0:
        check_doubling(C, tuple(rho.dims))
    plan = pair_plan(C, rho.dims)
    if not per_pair_min:
        return max(0.0, raw_entropy_bound(rho.matrix, plan, k, prefactor))
    coh, sub = 0.0, 0.0
    for pair in C.pairs:
        c1, pc = pair_terms(rho.matrix, pair_plan(IndexPairSet((pair,)), rho.dims))
        coh += c1
        sub += np.sort(pc)[:k].sum()
    return max(0.0, prefactor / math.sqrt(len(C.pairs)) * (coh - sub))


def entropy_threshold(v: int) -> float:
    """Largest linear entropy of a state with Schmidt number ``v`` across a cut."""
    return math.sqrt(2 * (1 - 1 / v))


def entropy_rank_bound(B: float) -> int:
    """Smallest Schmidt number compatible with linear entropy ``B`` (``B < sqrt 2``)."""
    if B >= math.sqrt(2):
        raise ValueError(f"linear entropy {B} is not below sqrt(2)")
    v = max(1, math.ceil(2 / (2 - B * B) - 1e-6))
    while v > 1 and B <= entropy_threshold(v - 1) + SLACK:
        v -= 1
    while B > entropy_threshold(v) + SLACK:
        v += 1
    return v


def exclusion_by_linentropy(rho: DensityMatrix, candidates: Sequence[Candidate],
                            pair_sets: Sequence[IndexPairSet] | None = None,
                            prefactor: float = 2.0, per_pair_min: bool = False) -> CriterionReport:
    pair_sets = default_pair_sets(rho.dims) if pair_sets is None else list(pair_sets)
    n_cuts = len(enumerate_bipartitions(rho.dims))
    if len(pair_sets) != n_cuts:
        raise ValidationError(f"need one index pair set per component ({n_cuts}), got {len(pair_sets)}")
    B = [min(linear_entropy_bound(rho, k + 1, C, prefactor, per_pair_min), math.sqrt(2) - 1e-12)
         for k, C in enumerate(pair_sets)]
    lower = [entropy_rank_bound(b) for b in B]
    excluded = [v for v in candidates if any(v[k] < lower[k] for k in range(n_cuts))]
    witness = {f"B_{k + 1}": b for k, b in enumerate(B)}
    return make_report("linentropy", candidates, excluded, witness_values=witness)


def gm_concurrence_lower_bound(rho: DensityMatrix, C: IndexPairSet, prefactor: float = 2.0) -> float:
    """Lower bound on the smallest entry of the linear-entropy vector."""
    return linear_entropy_bound(rho, len(enumerate_bipartitions(rho.dims)), C, prefactor)


def pure_linear_entropies(psi_density: DensityMatrix) -> np.ndarray:
    """Exact ``sqrt(2 (1 - tr rho_alpha^2))`` per cut, for checking bounds on pure states."""
    return np.array([math.sqrt(max(0.0, 2 * (1 - purity(marginals(psi_density, b)[0]))))
                     for b in enumerate_bipartitions(psi_density.dims)])
