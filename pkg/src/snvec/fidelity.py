"""Fidelity witnesses for the Schmidt-number vector.

A pure state whose Schmidt rank across ``alpha`` is ``s_alpha`` overlaps with a
target ``Psi`` by at most the sum of the ``s_alpha`` largest squared Schmidt
coefficients of ``Psi`` across the same cut. Maximizing the smallest of these
partial sums over all rank assignments compatible with a candidate ``v`` gives an
upper bound on the fidelity any state below ``v`` can reach.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .lattice import (
    SLACK,
    Bipartition,
    Candidate,
    CriterionReport,
    caps,
    elementwise_leq,
    enumerate_bipartitions,
    make_report,
    realizable,
)
from .qudit import DensityMatrix, PureState, ValidationError, bipartition_reshape


@dataclass(frozen=True, eq=False)
class SchmidtSpectrum:
    alpha: Bipartition
    lambdas: np.ndarray

    def partial_sum(self, r: int) -> float:
        return float(np.sum(self.lambdas[:r]))


def schmidt_spectra(target: PureState) -> list[SchmidtSpectrum]:
    out = []
    for b in enumerate_bipartitions(target.dims):
        s = np.linalg.svd(bipartition_reshape(target, b), compute_uv=False)
        lam = np.sort(s**2)[::-1]
        out.append(SchmidtSpectrum(b, lam / lam.sum()))
    return out


def schmidt_ranks(psi: PureState, tol: float = 1e-8) -> tuple[int, ...]:
    """Per-bipartition Schmidt ranks (singular values above ``tol``), canonical order."""
    return tuple(
        int(np.sum(np.linalg.svd(bipartition_reshape(psi, b), compute_uv=False) > tol))
        for b in enumerate_bipartitions(psi.dims)
    )


def fidelity(rho: DensityMatrix, target: PureState) -> float:
    if rho.dims != target.dims:
        raise ValidationError(f"dims mismatch: {rho.dims} vs {target.dims}")
    v = target.amplitudes
    return float(np.real(v.conj() @ rho.matrix @ v))


def rank_assignments(dims: Sequence[int], v: Candidate) -> list[tuple[int, ...]]:
    """Per-bipartition rank tuples ``s`` (canonical order) with ``s_alpha <= cap_alpha``,
    ``sorted(s)`` elementwise below ``v`` and passing the pure-state rank relations."""
    c = caps(dims)
    if len(v) != len(c):
        raise ValueError(f"candidate length {len(v)} does not match {len(c)} bipartitions")
    out = []
    for s in itertools.product(*[range(1, ck + 1) for ck in c]):
        if elementwise_leq(sorted(s, reverse=True), v) and realizable(s, len(dims)):
            out.append(s)
    return out


def fidelity_bound(target: PureState, v: Candidate, spectra: Sequence[SchmidtSpectrum] | None = None) -> float:
    """Largest fidelity with ``target`` reachable by a state whose sorted ranks lie below ``v``."""
    spectra = schmidt_spectra(target) if spectra is None else spectra
    best = 0.0
    for s in rank_assignments(target.dims, v):
        val = min(sp.partial_sum(r) for sp, r in zip(spectra, s))
        best = max(best, val)
    return best


@dataclass(frozen=True, eq=False)
class FidelityBoundTable:
    target: PureState
    candidates: tuple[Candidate, ...]
    bounds: dict = field(default_factory=dict)

    @classmethod
    def build(cls, target: PureState, candidates: Sequence[Candidate]) -> "FidelityBoundTable":
        spectra = schmidt_spectra(target)
        bounds = {tuple(v): fidelity_bound(target, v, spectra) for v in candidates}
        return cls(target, tuple(tuple(v) for v in candidates), bounds)

    def __getitem__(self, v: Candidate) -> float:
        return self.bounds[tuple(v)]

    @cached_property
    def minimal_element_bounds(self) -> dict[int, float]:
        """Per smallest entry ``v_last``: the largest bound among candidates ending in it."""
        out: dict[int, float] = {}
        for v, b in self.bounds.items():
            out[v[-1]] = max(out.get(v[-1], 0.0), b)
        return out


def exclusion_by_fidelity(rho: DensityMatrix, target: PureState, candidates: Sequence[Candidate],
                          table: FidelityBoundTable | None = None) -> CriterionReport:
    table = FidelityBoundTable.build(target, candidates) if table is None else table
    F = fidelity(rho, target)
    excluded = [v for v in candidates if F > table[v] + SLACK]
    witness = {"fidelity": F}
    witness.update({"Fhat_" + "".join(map(str, v)): table[v] for v in candidates})
    return make_report("fidelity", candidates, excluded, witness_values=witness)
