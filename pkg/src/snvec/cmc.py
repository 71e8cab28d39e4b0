"""Covariance-matrix witnesses for the Schmidt-number vector.

For each bipartition ``alpha`` the value

    f_alpha = ||X_alpha||_1 - sqrt((1 - tr rho_alpha^2)(1 - tr rho_abar^2)) + 1

is at most the Schmidt number across ``alpha``; ``X_alpha`` is the
cross-covariance block between orthonormal operator bases of the two sides.
The trace norm does not depend on those bases, and equals the trace norm of the
realigned matrix ``rho - rho_alpha x rho_abar``, which is the fast route used here.
"""
from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from .lattice import (
    SLACK,
    Candidate,
    CriterionReport,
    enumerate_bipartitions,
    majorization_feasible,
    make_report,
)
from .qudit import (
    DensityMatrix,
    Normalization,
    OperatorBasis,
    ValidationError,
    bipartite_blocks,
    kron_all,
    operator_tensor,
    purity,
    realign,
    trace_norm,
)

log = logging.getLogger(__name__)

# a closed-form verdict closer than this to the boundary is confirmed by the LP
LP_CONFIRM_MARGIN = 1e-6


def _product_coefficients(bases: Sequence[OperatorBasis], members: Sequence[int]) -> np.ndarray:
    """``A[K, (i, j)] = A_K[j, i]`` for the product basis of ``members`` (row-major K)."""
    sub = [bases[m] for m in members]
    rows = []
    for combo in np.ndindex(*[b.elements.shape[0] for b in sub]):
        op = kron_all([b.elements[k] for b, k in zip(sub, combo)])
        rows.append(op.T.reshape(-1))
    return np.array(rows)


def cross_covariance(rho: DensityMatrix, alpha, bases: Sequence[OperatorBasis]) -> np.ndarray:
    """Covariances ``<A_K x B_L> - <A_K><B_L>`` between product bases of both sides.

    Rows follow alpha's particles, columns the complement's, each row-major over
    the per-particle basis indices.
    """
    if len(bases) != rho.N:
        raise ValueError(f"need one basis per particle, got {len(bases)} for {rho.N}")
    for b, d in zip(bases, rho.dims):
        if b.normalization is not Normalization.UNIT:
            raise ValidationError(f"particle {b.particle}: cross-covariances need UNIT bases")
        if b.d != d or b.elements.shape[0] != d * d:
            raise ValidationError(f"particle {b.particle}: basis does not span a {d}-level operator space")
    m, Da, Db, members, rest = bipartite_blocks(rho, alpha)
    t = m.reshape(Da, Db, Da, Db)
    ra, rb = np.einsum("ijkj->ik", t), np.einsum("ijil->jl", t)
    A = _product_coefficients(bases, members)
    B = _product_coefficients(bases, rest)
    corr = A @ realign(m, Da, Db) @ B.T
    X = corr - np.outer(A @ ra.reshape(-1), B @ rb.reshape(-1))
    if all(b.hermitian for b in bases):
        imag = np.max(np.abs(X.imag)) if X.size else 0.0
        if imag > 1e-10:
            raise ValidationError(f"covariances of Hermitian observables have imaginary part {imag:.3g}")
        return X.real
    return X


def f_value(rho: DensityMatrix, alpha) -> float:
    m, Da, Db, _, _ = bipartite_blocks(rho, alpha)
    t = m.reshape(Da, Db, Da, Db)
    ra, rb = np.einsum("ijkj->ik", t), np.einsum("ijil->jl", t)
    delta = m - np.kron(ra, rb)
    pa, pb = purity(ra), purity(rb)
    mixed = math.sqrt(max(0.0, 1 - pa) * max(0.0, 1 - pb))
    return trace_norm(realign(delta, Da, Db)) - mixed + 1.0


def f_values(rho: DensityMatrix) -> np.ndarray:
    """``f_alpha`` for every bipartition in canonical order."""
    return np.array([f_value(rho, b) for b in enumerate_bipartitions(rho.dims)])


def system_feasible(f: Sequence[float], v: Candidate, method: str = "auto") -> bool:
    """Whether ``f <= R`` with ``R`` majorized by ``v`` has a solution.

    ``method`` is ``"lp"`` (always solve the linear program), ``"closed"``
    (sorted partial sums only) or ``"auto"`` (partial sums, confirmed by the LP
    whenever the verdict lies within ``LP_CONFIRM_MARGIN`` of the boundary).
    """
    if method == "lp":
        return majorization_feasible(f, v)
    fs = np.cumsum(np.sort(np.asarray(f, dtype=float))[::-1])
    vs = np.cumsum(np.asarray(v, dtype=float))
    closed = bool(np.all(fs <= vs + SLACK))
    if method == "closed":
        return closed
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if np.min(np.abs(vs - fs)) < LP_CONFIRM_MARGIN:
        lp = majorization_feasible(f, v)
        if lp != closed:
            log.warning("partial-sum check and LP disagree for f=%s, v=%s; using LP", list(f), v)
        return lp
    return closed


def exclusion_by_system(rho: DensityMatrix, candidates: Sequence[Candidate], method: str = "auto",
                        f: np.ndarray | None = None) -> CriterionReport:
    f = f_values(rho) if f is None else np.asarray(f)
    excluded = [v for v in candidates if not system_feasible(f, v, method)]
    witness = {f"f_{k + 1}": float(x) for k, x in enumerate(f)}
    witness["sn1_lower"] = float(math.ceil(np.max(f) - SLACK))
    return make_report("cmc-system", candidates, excluded, witness_values=witness)


def product_basis_witness(rho: DensityMatrix, bases: Sequence[OperatorBasis]) -> float:
    """``Re sum_{mu < d^2} <g_mu^(1) x ... x g_mu^(N)>`` with d the smallest local dimension.

    Bases may be non-Hermitian; only orthonormality is used by the bound
    ``W <= min_alpha f_alpha``.
    """
    if len(bases) != rho.N:
        raise ValueError(f"need one basis per particle, got {len(bases)} for {rho.N}")
    d = min(rho.dims)
    mats = []
    for b, dn in zip(bases, rho.dims):
        if b.normalization is not Normalization.UNIT:
            raise ValidationError(f"particle {b.particle}: the witness needs UNIT bases")
        if b.d != dn:
            raise ValidationError(f"particle {b.particle}: basis dimension {b.d} != {dn}")
        if b.elements.shape[0] < d * d:
            raise ValidationError(f"particle {b.particle}: need at least {d * d} basis elements")
        mats.append(b.coefficient_matrix()[: d * d])
    return witness_from_coefficients(operator_tensor(rho), mats)


def witness_from_coefficients(T: np.ndarray, mats: Sequence[np.ndarray]) -> float:
    """``Re sum_mu sum_a T[a_1..a_N] prod_n G_n[mu, a_n]`` for coefficient matrices ``G_n``."""
    acc = np.tensordot(mats[0], T, axes=([1], [0]))  # (mu, a_2, ..., a_N)
    for G in mats[1:]:
        acc = np.einsum("ma,ma...->m...", G, acc)
    return float(np.sum(acc).real)


def exclusion_by_product_witness(rho: DensityMatrix, bases: Sequence[OperatorBasis], candidates: Sequence[Candidate],
                                 basis_label: str = "custom", W: float | None = None) -> CriterionReport:
    """Exclude every candidate whose smallest entry is below ``W``."""
    W = product_basis_witness(rho, bases) if W is None else W
    excluded = [v for v in candidates if v[-1] < W - SLACK]
    return make_report("product-witness", candidates, excluded, witness_values={"W": W},
                       notes={"bases": basis_label})

