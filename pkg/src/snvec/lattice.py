"""Bipartitions, candidate Schmidt-number vectors and the bookkeeping that turns
per-criterion exclusions into a certified lower bound.

Particles are indexed from 0. The canonical representative of a bipartition is
the side containing particle 0.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .qudit import check_dims, total_dim

log = logging.getLogger(__name__)

Candidate = tuple[int, ...]

SLACK = 1e-9


class InconsistentReportError(RuntimeError):
    """Every candidate was excluded: a bug or an invalid input state."""


@dataclass(frozen=True)
class Bipartition:
    members: tuple[int, ...]
    index: int
    n: int

    @property
    def complement(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if i not in self.members)

    def cap(self, dims: Sequence[int]) -> int:
        Da = total_dim([dims[i] for i in self.members])
        Db = total_dim([dims[i] for i in self.complement])
        return min(Da, Db)

    def label(self) -> str:
        return "{" + ",".join(str(m + 1) for m in self.members) + "}"


@lru_cache(maxsize=None)
def _bipartitions(n: int) -> tuple[Bipartition, ...]:
    if n < 2:
        raise ValueError(f"need at least 2 particles, got {n}")
    out = []
    for size in range(1, n):
        for rest in itertools.combinations(range(1, n), size - 1):
            out.append((0,) + rest)
    return tuple(Bipartition(m, k, n) for k, m in enumerate(out))


def enumerate_bipartitions(dims: Sequence[int] | int) -> list[Bipartition]:
    n = dims if isinstance(dims, int) else len(dims)
    return list(_bipartitions(n))


def caps(dims: Sequence[int]) -> tuple[int, ...]:
    """Per-bipartition maximal Schmidt ranks in canonical order."""
    return tuple(b.cap(dims) for b in enumerate_bipartitions(dims))


def realizable(s: Sequence[int], n: int) -> bool:
    """Known necessary rank relations among pure-state Schmidt ranks.

    Only the tripartite relation (each single-particle rank is at most the
    product of the other two) is applied; for more particles every vector passes.
    """
    if n == 3:
        a, b, c = sorted(s, reverse=True)
        return a <= b * c
    return True


@lru_cache(maxsize=None)
def _candidates(dims: tuple[int, ...]) -> tuple[Candidate, ...]:
    dims = check_dims(dims)
    c = sorted(caps(dims), reverse=True)
    out = []
    for v in itertools.product(*[range(1, ck + 1) for ck in c]):
        if all(v[k] >= v[k + 1] for k in range(len(v) - 1)) and realizable(v, len(dims)):
            out.append(tuple(v))
    return tuple(sorted(out))


def enumerate_candidates(dims: Sequence[int]) -> list[Candidate]:
    """All non-increasing vectors below the sorted caps that pass the rank relations,
    in decreasing lexicographic order."""
    return list(_candidates(tuple(dims)))[::-1]


def elementwise_leq(a: Sequence[int], b: Sequence[int]) -> bool:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return all(x <= y for x, y in zip(a, b))


def weakly_submajorized(f: Sequence[float], v: Sequence[int], slack: float = SLACK) -> bool:
    """Sorted partial sums of ``f`` never exceed those of ``v``.

    Equivalent to the existence of ``R >= f`` with ``R`` majorized by ``v``.
    """
    fs = np.cumsum(np.sort(np.asarray(f, dtype=float))[::-1])
    vs = np.cumsum(np.asarray(v, dtype=float))
    return bool(np.all(fs <= vs + slack))


def majorization_feasible(f: Sequence[float], v: Sequence[int], slack: float = SLACK) -> bool:
    """LP: does some real ``R`` with ``R_a >= f_a`` satisfy ``R`` majorized by ``v``?

    One inequality per nonempty proper subset S of positions bounds the sum of
    ``R`` over S by the sum of the ``|S|`` largest entries of ``v``; the total is
    fixed to ``sum(v)``.
    """
    f = np.asarray(f, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("f must be finite")
    n = len(f)
    if len(v) != n:
        raise ValueError(f"length mismatch: {n} vs {len(v)}")
    partial = np.cumsum(np.sort(v)[::-1])
    rows, rhs = [], []
    for size in range(1, n):
        for subset in itertools.combinations(range(n), size):
            row = np.zeros(n)
            row[list(subset)] = 1.0
            rows.append(row)
            rhs.append(partial[size - 1] + slack)
    res = linprog(
        c=np.zeros(n),
        A_ub=np.array(rows) if rows else None,
        b_ub=np.array(rhs) if rhs else None,
        A_eq=np.ones((1, n)),
        b_eq=np.array([partial[-1]]),
        bounds=[(fa - slack, None) for fa in f],
        method="highs",
    )
    if res.status not in (0, 2):
        raise RuntimeError(f"LP solver failed: {res.message}")
    return res.status == 0


def componentwise_min(vectors: Iterable[Candidate]) -> Candidate:
    arr = np.array(list(vectors))
    return tuple(int(x) for x in arr.min(axis=0))


def detected_vector(certified: Candidate, candidates: Sequence[Candidate]) -> Candidate:
    """Largest candidate that is elementwise below the certified bound.

    The certified bound itself need not be a candidate (e.g. (3,2,1) for three
    qutrits); the detected vector is what tables report.
    """
    below = [c for c in candidates if elementwise_leq(c, certified)]
    maximal = [c for c in below if not any(c != o and elementwise_leq(c, o) for o in below)]
    if len(maximal) > 1:
        log.debug("several maximal candidates below %s: %s", certified, maximal)
    return max(maximal)


@dataclass
class CriterionReport:
    criterion: str
    candidates: tuple[Candidate, ...]
    excluded: frozenset[Candidate]
    witness_values: dict[str, float] = field(default_factory=dict)
    rank_semantics: str = "sn-vector"
    certified_override: Candidate | None = None
    notes: dict[str, str] = field(default_factory=dict)

    @property
    def feasible(self) -> list[Candidate]:
        return [c for c in self.candidates if c not in self.excluded]

    @property
    def certified(self) -> Candidate:
        if self.certified_override is not None:
            return self.certified_override
        feas = self.feasible
        if not feas:
            raise InconsistentReportError(f"{self.criterion}: every candidate excluded")
        return componentwise_min(feas)

    @property
    def sn_certified(self) -> Candidate:
        """Certified bound on the sorted SN vector from the exclusions alone."""
        feas = self.feasible
        if not feas:
            raise InconsistentReportError(f"{self.criterion}: every candidate excluded")
        return componentwise_min(feas)

    @property
    def detected(self) -> Candidate:
        return detected_vector(self.sn_certified, self.candidates)

    def to_json(self) -> dict:
        return {
            "criterion": self.criterion,
            "excluded": [list(v) for v in sorted(self.excluded)],
            "certified": list(self.certified),
            "witness_values": {k: float(x) for k, x in self.witness_values.items()},
            "rank_semantics": self.rank_semantics,
            **({"notes": dict(self.notes)} if self.notes else {}),
        }


def make_report(criterion: str, candidates: Sequence[Candidate], excluded: Iterable[Candidate],
                **kw) -> CriterionReport:
    return CriterionReport(criterion, tuple(candidates), frozenset(excluded), **kw)


def combine_reports(reports: Sequence[CriterionReport],
                    candidates: Sequence[Candidate] | None = None) -> CriterionReport:
    """Union of exclusions; the certified vector comes from the intersected feasible set."""
    if not reports:
        raise ValueError("no reports to combine")
    cands = tuple(candidates) if candidates is not None else reports[0].candidates
    for r in reports:
        if set(r.candidates) != set(cands):
            raise ValueError(f"report {r.criterion} was built over a different candidate list")
    if len(reports) == 1 and candidates is None:
        return reports[0]
    excluded = frozenset().union(*(r.excluded for r in reports))
    witness: dict[str, float] = {}
    for r in reports:
        witness.update(r.witness_values)
    out = CriterionReport("+".join(r.criterion for r in reports), cands, excluded, witness)
    out.certified  # raises on an empty feasible set
    return out
