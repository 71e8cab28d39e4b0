"""Named states and seeded random density matrices.

Every random draw takes its generator from ``sample_rng(seed, index)`` so that a
sample depends only on the pair (seed, index), never on evaluation order.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qudit import (
    DensityMatrix,
    OperatorBasis,
    PureState,
    ValidationError,
    check_dims,
    kron_all,
    total_dim,
)

PSI432_DIMS = (2, 3, 4)
PSI432_KETS = ((0, 0, 0), (1, 1, 1), (0, 1, 2), (1, 2, 3))


class NotAStateError(ValidationError):
    """A candidate operator failed a density-matrix or purity check."""


def sample_rng(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


# -- named states ------------------------------------------------------------


def ghz_state(d: int, N: int) -> PureState:
    if d < 2 or N < 2:
        raise ValueError(f"need d >= 2 and N >= 2, got d={d}, N={N}")
    dims = (d,) * N
    v = np.zeros(d**N, dtype=complex)
    step = sum(d**k for k in range(N))  # index of |i...i> is i * (1 + d + ... + d^(N-1))
    v[np.arange(d) * step] = 1 / math.sqrt(d)
    return PureState(dims, v)


def psi432_state(c: Sequence[complex]) -> PureState:
    """``c1|000> + c2|111> + c3|012> + c4|123>`` on local dimensions (2, 3, 4)."""
    c = np.asarray(c, dtype=complex)
    if c.shape != (4,):
        raise ValidationError(f"need 4 coefficients, got shape {c.shape}")
    nrm = np.linalg.norm(c)
    if abs(nrm - 1.0) > 1e-12:
        raise ValidationError(f"coefficient vector has norm {nrm:.15g}, expected 1")
    v = np.zeros(total_dim(PSI432_DIMS), dtype=complex)
    for ck, ket in zip(c, PSI432_KETS):
        v[np.ravel_multi_index(ket, PSI432_DIMS)] = ck
    return PureState(PSI432_DIMS, v / np.linalg.norm(v))


def random_unit_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform on the complex unit sphere in C^n."""
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return z / np.linalg.norm(z)


def one_uniform_state(bases: Sequence[OperatorBasis]) -> DensityMatrix:
    """``(1/d) sum_mu g_mu^(1) x ... x g_mu^(N)`` if that operator is a pure state.

    ``d`` is the smallest local dimension; the sum runs over the first ``d**2``
    elements of each basis. Raises ``NotAStateError`` naming the failed check.
    """
    dims = tuple(b.d for b in bases)
    d = min(dims)
    op = sum(kron_all([b.elements[mu] for b in bases]) for mu in range(d * d)) / d
    herm = np.max(np.abs(op - op.conj().T))
    if herm > 1e-10:
        raise NotAStateError(f"not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(op).real
    if abs(tr - 1) > 1e-10:
        raise NotAStateError(f"trace is {tr:.12g}, expected 1")
    w = np.linalg.eigvalsh((op + op.conj().T) / 2)
    if w.min() < -1e-10:
        raise NotAStateError(f"not positive semidefinite (min eigenvalue {w.min():.3g})")
    if np.sum(w > 1e-8) != 1:
        raise NotAStateError(f"not rank one (eigenvalues above 1e-8: {int(np.sum(w > 1e-8))})")
    return DensityMatrix(dims, (op + op.conj().T) / 2)


# -- random sampling -----------------------------------------------------------


def haar_unitary(D: int, rng: np.random.Generator) -> np.ndarray:
    """QR of a complex Ginibre matrix with R's diagonal made positive."""
    z = (rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def simplex_point(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform (Lebesgue) point on the probability simplex via normalized exponentials."""
    e = rng.standard_exponential(n)
    return e / e.sum()


def random_pure_state(dims: Sequence[int], rng: np.random.Generator) -> PureState:
    return PureState(tuple(dims), random_unit_vector(total_dim(dims), rng))


def random_product_state(dims: Sequence[int], rng: np.random.Generator) -> PureState:
    v = kron_all([random_unit_vector(d, rng) for d in dims])
    return PureState.normalized(dims, v)


def _conjugate(U: np.ndarray, lam: np.ndarray) -> np.ndarray:
    m = (U * lam) @ U.conj().T
    return (m + m.conj().T) / 2


class SamplerMode(enum.Enum):
    LEBESGUE = "lebesgue"
    FIXED_LAMBDA1 = "fixed-lambda1"


@dataclass(frozen=True)
class SamplerConfig:
    mode: SamplerMode
    seed: int
    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", check_dims(self.dims))
        object.__setattr__(self, "mode", SamplerMode(self.mode))


def haar_random_density(config: SamplerConfig, index: int = 0, rng: np.random.Generator | None = None) -> DensityMatrix:
    """``U diag(lam) U^dag`` with U Haar and lam uniform on the simplex."""
    if config.mode is not SamplerMode.LEBESGUE:
        raise ValueError(f"sampler mode must be {SamplerMode.LEBESGUE.value}, got {config.mode.value}")
    rng = rng if rng is not None else sample_rng(config.seed, index)
    D = total_dim(config.dims)
    U = haar_unitary(D, rng)
    lam = simplex_point(D, rng)
    return DensityMatrix(config.dims, _conjugate(U, lam))


@dataclass(frozen=True, eq=False)
class LambdaSample:
    rho: DensityMatrix
    lambda1: float
    spectrum: np.ndarray


def fixed_lambda1_sample(config: SamplerConfig, index: int = 0, lambda1: float | None = None) -> LambdaSample:
    """First eigenvalue uniform on [0, 1]; the rest uniform on the simplex scaled to ``1 - lambda1``."""
    if config.mode is not SamplerMode.FIXED_LAMBDA1:
        raise ValueError(f"sampler mode must be {SamplerMode.FIXED_LAMBDA1.value}, got {config.mode.value}")
    rng = sample_rng(config.seed, index)
    D = total_dim(config.dims)
    lam1 = rng.uniform(0.0, 1.0)
    if lambda1 is not None:
        if not 0.0 <= lambda1 <= 1.0:
            raise ValueError(f"lambda1 must lie in [0, 1], got {lambda1}")
        lam1 = float(lambda1)
    rest = simplex_point(D - 1, rng) * (1.0 - lam1)
    lam = np.concatenate([[lam1], rest])
    U = haar_unitary(D, rng)
    return LambdaSample(DensityMatrix(config.dims, _conjugate(U, lam)), lam1, lam)


def fixed_lambda1_density(config: SamplerConfig, index: int = 0, lambda1: float | None = None) -> DensityMatrix:
    return fixed_lambda1_sample(config, index, lambda1).rho


# -- mixtures ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NoiseMix:
    p: float
    signal: DensityMatrix
    noise: DensityMatrix

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"mixing weight must lie in [0, 1], got {self.p}")
        if self.signal.dims != self.noise.dims:
            raise ValueError(f"dims mismatch: {self.signal.dims} vs {self.noise.dims}")


def mix(noise_mix: NoiseMix) -> DensityMatrix:
    p = noise_mix.p
    m = p * noise_mix.signal.matrix + (1 - p) * noise_mix.noise.matrix
    return DensityMatrix(noise_mix.signal.dims, m)


def white_noise_mix(psi: PureState | DensityMatrix, p: float) -> DensityMatrix:
    signal = psi.density() if isinstance(psi, PureState) else psi
    return mix(NoiseMix(p, signal, DensityMatrix.maximally_mixed(signal.dims)))


@dataclass(frozen=True, eq=False)
class GhzNoiseSample:
    rho: DensityMatrix
    p: float


def ghz_random_noise_sample(seed: int, index: int, d: int = 3, N: int = 3, p: float | None = None) -> GhzNoiseSample:
    """``p GHZ + (1 - p) rho_random`` with p uniform on [0, 1] and Lebesgue noise."""
    rng = sample_rng(seed, index)
    pp = rng.uniform(0.0, 1.0)
    cfg = SamplerConfig(SamplerMode.LEBESGUE, seed, (d,) * N)
    noise = haar_random_density(cfg, rng=rng)
    if p is not None:
        pp = float(p)
    rho = mix(NoiseMix(pp, ghz_state(d, N).density(), noise))
    return GhzNoiseSample(rho, pp)


def psi432_coefficients(seed: int, index: int) -> np.ndarray:
    return random_unit_vector(4, sample_rng(seed, index))
