"""Dense linear algebra on multi-qudit Hilbert spaces.

Computational-basis ordering is row-major over the particle list: the
multi-index ``(i_1, ..., i_N)`` maps to ``i_1 * d_2 * ... * d_N + ... + i_N``.
Every reshape in the package follows this one convention.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

STATE_ATOL = 1e-10
PURE_ATOL = 1e-12


class ValidationError(ValueError):
    """An input violates a state or basis invariant."""


class InvalidDimensionError(ValueError):
    pass


class InvalidPartitionError(ValueError):
    pass


class StateFileError(ValueError):
    """Malformed state file; the message names the offending field."""


def check_dims(dims: Iterable[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise InvalidDimensionError("dims must be non-empty")
    if any(d < 2 for d in dims):
        raise InvalidDimensionError(f"every local dimension must be >= 2, got {dims}")
    return dims


def total_dim(dims: Sequence[int]) -> int:
    return int(np.prod(dims))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix on ``prod(dims)`` levels."""

    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        dims = check_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        m = np.asarray(self.matrix, dtype=complex)
        D = total_dim(dims)
        if m.shape != (D, D):
            raise ValidationError(f"matrix shape {m.shape} does not match dims {dims}")
        herm = np.max(np.abs(m - m.conj().T))
        if herm > STATE_ATOL:
            raise ValidationError(f"not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_ATOL:
            raise ValidationError(f"trace is {tr:.12g}, expected 1")
        lmin = np.linalg.eigvalsh(m).min()
        if lmin < -STATE_ATOL:
            raise ValidationError(f"not positive semidefinite (min eigenvalue {lmin:.3g})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def N(self) -> int:
        return len(self.dims)

    @property
    def D(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, psi: "PureState") -> "DensityMatrix":
        v = psi.amplitudes
        return cls(psi.dims, np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityMatrix":
        D = total_dim(dims)
        return cls(tuple(dims), np.eye(D) / D)

    @classmethod
    def repaired(cls, dims: Sequence[int], matrix: np.ndarray) -> "DensityMatrix":
        """Symmetrize, clip negative eigenvalues and renormalize before validating."""
        m = np.asarray(matrix, dtype=complex)
        m = (m + m.conj().T) / 2
        w, v = np.linalg.eigh(m)
        w = np.clip(w, 0.0, None)
        if w.sum() <= 0:
            raise ValidationError("matrix has no positive part to repair")
        m = (v * (w / w.sum())) @ v.conj().T
        return cls(tuple(dims), (m + m.conj().T) / 2)


@dataclass(frozen=True, eq=False)
class PureState:
    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = check_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.size != total_dim(dims):
            raise ValidationError(f"vector length {v.size} does not match dims {dims}")
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > PURE_ATOL:
            raise ValidationError(f"state norm is {nrm:.15g}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def N(self) -> int:
        return len(self.dims)

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self)

    @classmethod
    def normalized(cls, dims: Sequence[int], vector: np.ndarray) -> "PureState":
        v = np.asarray(vector, dtype=complex).reshape(-1)
        return cls(tuple(dims), v / np.linalg.norm(v))

    @classmethod
    def product(cls, dims: Sequence[int], digits: Sequence[int]) -> "PureState":
        v = np.zeros(total_dim(dims), dtype=complex)
        v[np.ravel_multi_index(tuple(digits), tuple(dims))] = 1.0
        return cls(tuple(dims), v)


# -- operator bases ---------------------------------------------------------


class Normalization(enum.Enum):
    UNIT = "unit"  # tr(g_mu^dag g_nu) = delta
    SCALED = "scaled"  # tr(s_mu^dag s_nu) = d delta


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Orthonormal set of ``d**2`` operators on one particle.

    ``elements`` has shape ``(d**2, d, d)``. Gell-Mann bases are Hermitian; bases
    produced by the optimizer may not be (only orthonormality is required by the
    witnesses built on them).
    """

    particle: int
    elements: np.ndarray
    normalization: Normalization = Normalization.UNIT

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=complex)
        if el.ndim != 3 or el.shape[1] != el.shape[2]:
            raise ValidationError(f"basis elements must have shape (k, d, d), got {el.shape}")
        d = el.shape[1]
        if el.shape[0] > d * d:
            raise ValidationError(f"{el.shape[0]} elements exceed operator-space dimension {d * d}")
        scale = 1.0 if self.normalization is Normalization.UNIT else float(d)
        gram = gram_matrix(el)
        dev = np.max(np.abs(gram - scale * np.eye(el.shape[0])))
        if dev > 1e-10:
            raise ValidationError(f"basis not orthonormal under {self.normalization.value} (deviation {dev:.3g})")
        el.setflags(write=False)
        object.__setattr__(self, "elements", el)

    @property
    def d(self) -> int:
        return self.elements.shape[1]

    @property
    def hermitian(self) -> bool:
        el = self.elements
        return bool(np.max(np.abs(el - el.conj().transpose(0, 2, 1))) < 1e-12)

    def coefficient_matrix(self) -> np.ndarray:
        """Rows are the elements flattened row-major: ``G[mu, i*d + j] = g_mu[i, j]``."""
        return self.elements.reshape(self.elements.shape[0], -1)

    def coefficients(self, op: np.ndarray) -> np.ndarray:
        """Expansion coefficients ``tr(g_mu^dag op)`` (scaled for SCALED bases)."""
        c = np.einsum("mij,ij->m", self.elements.conj(), op)
        if self.normalization is Normalization.SCALED:
            c = c / self.d
        return c

    def reconstruct(self, coeffs: np.ndarray) -> np.ndarray:
        return np.einsum("m,mij->ij", coeffs, self.elements)


def gram_matrix(elements: np.ndarray) -> np.ndarray:
    flat = np.asarray(elements).reshape(len(elements), -1)
    return flat.conj() @ flat.T


def gellmann_matrices(d: int) -> np.ndarray:
    """Identity followed by the d**2 - 1 generalized Gell-Mann matrices, all with
    Hilbert-Schmidt norm 1: symmetric, then antisymmetric, then diagonal families."""
    if d < 2:
        raise InvalidDimensionError(f"local dimension must be >= 2, got {d}")
    out = [np.eye(d, dtype=complex) / math.sqrt(d)]
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = m[k, j] = 1 / math.sqrt(2)
        out.append(m)
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = -1j / math.sqrt(2)
        m[k, j] = 1j / math.sqrt(2)
        out.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        out.append(np.diag(diag / math.sqrt(l * (l + 1))).astype(complex))
    return np.array(out)


def gellmann_basis(d: int, normalization: Normalization = Normalization.UNIT, particle: int = 0) -> OperatorBasis:
    el = gellmann_matrices(d)
    if normalization is Normalization.SCALED:
        el = el * math.sqrt(d)
    return OperatorBasis(particle, el, normalization)


# -- partitions, traces and reshapes ---------------------------------------

PartitionLike = Union["Bipartition", Iterable[int]]  # noqa: F821


def _members(part, n: int) -> tuple[int, ...]:
    members = getattr(part, "members", part)
    members = tuple(sorted(set(int(m) for m in members)))
    if not members or len(members) >= n or members[0] < 0 or members[-1] >= n:
        raise InvalidPartitionError(f"{members} is not a nonempty proper subset of {n} particles")
    return members


def permute_operator(matrix: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of an operator so that particle ``order[k]`` sits at slot k."""
    n = len(dims)
    t = np.asarray(matrix).reshape(tuple(dims) * 2)
    t = t.transpose(list(order) + [n + o for o in order])
    D = total_dim(dims)
    return t.reshape(D, D)


def _split(matrix: np.ndarray, dims: Sequence[int], members: tuple[int, ...]):
    n = len(dims)
    rest = tuple(i for i in range(n) if i not in members)
    Da = total_dim([dims[i] for i in members])
    Db = total_dim([dims[i] for i in rest])
    return permute_operator(matrix, dims, members + rest), Da, Db, rest


def partial_trace(rho: DensityMatrix, keep: PartitionLike) -> DensityMatrix:
    """Marginal on the particles in ``keep`` (kept in their original order)."""
    members = _members(keep, rho.N)
    m, Da, Db, _ = _split(rho.matrix, rho.dims, members)
    red = np.einsum("ijkj->ik", m.reshape(Da, Db, Da, Db))
    red = (red + red.conj().T) / 2
    return DensityMatrix(tuple(rho.dims[i] for i in members), red)


def marginals(rho: DensityMatrix, alpha: PartitionLike) -> tuple[np.ndarray, np.ndarray]:
    """Unvalidated marginal matrices for both sides of a bipartition."""
    members = _members(alpha, rho.N)
    m, Da, Db, _ = _split(rho.matrix, rho.dims, members)
    t = m.reshape(Da, Db, Da, Db)
    return np.einsum("ijkj->ik", t), np.einsum("ijil->jl", t)


def purity(rho: DensityMatrix | np.ndarray) -> float:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    # tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(m) ** 2))


def trace_norm(m: np.ndarray) -> float:
    return float(np.linalg.svd(np.asarray(m), compute_uv=False).sum())


def bipartition_reshape(psi: PureState, alpha: PartitionLike) -> np.ndarray:
    """Coefficient matrix with rows indexed by alpha's joint basis, columns by the rest."""
    members = _members(alpha, psi.N)
    rest = tuple(i for i in range(psi.N) if i not in members)
    t = psi.amplitudes.reshape(psi.dims).transpose(members + rest)
    Da = total_dim([psi.dims[i] for i in members])
    return t.reshape(Da, -1)


def realign(matrix: np.ndarray, Da: int, Db: int) -> np.ndarray:
    """``R[(i,j),(k,l)] = M[(i,k),(j,l)]`` for an operator on a (Da x Db) split."""
    return np.asarray(matrix).reshape(Da, Db, Da, Db).transpose(0, 2, 1, 3).reshape(Da * Da, Db * Db)


def bipartite_blocks(rho: DensityMatrix, alpha: PartitionLike):
    """Permuted matrix and side dimensions for the split (alpha | rest)."""
    members = _members(alpha, rho.N)
    m, Da, Db, rest = _split(rho.matrix, rho.dims, members)
    return m, Da, Db, members, rest


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)


def operator_tensor(rho: DensityMatrix | np.ndarray, dims: Sequence[int] | None = None) -> np.ndarray:
    """Expectations of all matrix-unit products.

    Returns ``T`` with shape ``(d_1**2, ..., d_N**2)`` and
    ``T[(i_1 j_1), ..., (i_N j_N)] = tr(rho  E_{i_1 j_1} x ... x E_{i_N j_N})``.
    """
    if isinstance(rho, DensityMatrix):
        dims, m = rho.dims, rho.matrix
    else:
        m = np.asarray(rho)
    n = len(dims)
    t = m.reshape(tuple(dims) * 2)
    # tr(rho E_ij) = rho[j, i]: column index first, then row index
    order = [a for k in range(n) for a in (n + k, k)]
    return t.transpose(order).reshape([d * d for d in dims])


# -- JSON state files ------------------------------------------------------


def _encode(values: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(values).reshape(-1)]


def _decode(entries, expected: int, field: str) -> np.ndarray:
    if not isinstance(entries, list):
        raise StateFileError(f"field '{field}' must be a list of [re, im] pairs")
    if len(entries) != expected:
        raise StateFileError(f"field '{field}' has {len(entries)} entries, expected {expected}")
    out = np.empty(expected, dtype=complex)
    for k, pair in enumerate(entries):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise StateFileError(f"field '{field}' entry {k} is not a [re, im] pair")
        try:
            out[k] = complex(float(pair[0]), float(pair[1]))
        except (TypeError, ValueError):
            raise StateFileError(f"field '{field}' entry {k} is not numeric") from None
    return out


def state_to_json(state: DensityMatrix | PureState) -> dict:
    if isinstance(state, PureState):
        return {"dims": list(state.dims), "vector": _encode(state.amplitudes)}
    return {"dims": list(state.dims), "matrix": _encode(state.matrix)}


def state_from_json(obj: dict, repair: bool = False) -> DensityMatrix | PureState:
    if not isinstance(obj, dict):
        raise StateFileError("top level must be a JSON object")
    if "dims" not in obj:
        raise StateFileError("missing field 'dims'")
    dims_raw = obj["dims"]
    if not isinstance(dims_raw, list) or not all(isinstance(d, int) for d in dims_raw):
        raise StateFileError("field 'dims' must be a list of integers")
    try:
        dims = check_dims(dims_raw)
    except InvalidDimensionError as exc:
        raise StateFileError(f"field 'dims': {exc}") from None
    D = total_dim(dims)
    if "matrix" in obj:
        m = _decode(obj["matrix"], D * D, "matrix").reshape(D, D)
        return DensityMatrix.repaired(dims, m) if repair else DensityMatrix(dims, m)
    if "vector" in obj:
        v = _decode(obj["vector"], D, "vector")
        return PureState.normalized(dims, v) if repair else PureState(dims, v)
    raise StateFileError("state file needs a 'matrix' or a 'vector' field")


def load_state(path: str | Path, repair: bool = False) -> DensityMatrix | PureState:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StateFileError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFileError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return state_from_json(obj, repair=repair)


def save_state(state: DensityMatrix | PureState, path: str | Path) -> None:
    Path(path).write_text(json.dumps(state_to_json(state)))


def as_density(state: DensityMatrix | PureState) -> DensityMatrix:
    return state.density() if isinstance(state, PureState) else state
