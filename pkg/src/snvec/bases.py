"""Local operator bases for the basis-dependent witnesses.

Two parameterizations are used:

* ``LocalFrame``: one unitary per particle, acting on a reference basis by
  conjugation. Refined with Nelder-Mead over Hermitian generators; used for the
  linear-entropy bound and as a starting point elsewhere.
* coefficient matrices ``G_n`` (``d**2 x d_n**2``, orthonormal rows): the first
  ``d**2`` elements of an arbitrary orthonormal operator basis. The product
  witness is linear in each ``G_n`` separately, so an alternating polar update
  (see-saw) increases it monotonically.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from .qudit import (
    DensityMatrix,
    Normalization,
    OperatorBasis,
    ValidationError,
    gellmann_matrices,
    kron_all,
    operator_tensor,
    permute_operator,
    realign,
)
from .states import NotAStateError, ghz_state, one_uniform_state

log = logging.getLogger(__name__)


# -- frames --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LocalFrame:
    unitaries: tuple[np.ndarray, ...]

    def __post_init__(self):
        us = tuple(np.asarray(u, dtype=complex) for u in self.unitaries)
        for n, u in enumerate(us):
            if u.ndim != 2 or u.shape[0] != u.shape[1]:
                raise ValidationError(f"particle {n}: frame entry must be square, got {u.shape}")
            dev = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
            if dev > 1e-10:
                raise ValidationError(f"particle {n}: frame entry not unitary (deviation {dev:.3g})")
        object.__setattr__(self, "unitaries", us)

    @classmethod
    def identity(cls, dims: Sequence[int]) -> "LocalFrame":
        return cls(tuple(np.eye(d, dtype=complex) for d in dims))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(u.shape[0] for u in self.unitaries)

    def full(self) -> np.ndarray:
        return kron_all(self.unitaries)

    def rotate_state(self, rho: DensityMatrix) -> np.ndarray:
        """Matrix of ``rho`` in the rotated product basis: ``U^dag rho U``."""
        U = self.full()
        return U.conj().T @ rho.matrix @ U

    def apply(self, bases: Sequence[OperatorBasis]) -> list[OperatorBasis]:
        return [OperatorBasis(b.particle, np.einsum("ab,mbc,dc->mad", u, b.elements, u.conj()), b.normalization)
                for u, b in zip(self.unitaries, bases)]

    def to_json(self) -> dict:
        return {"unitaries": [[[float(z.real), float(z.imag)] for z in u.reshape(-1)] for u in self.unitaries]}

    @classmethod
    def from_json(cls, obj: dict) -> "LocalFrame":
        us = []
        for entries in obj["unitaries"]:
            d = math.isqrt(len(entries))
            if d * d != len(entries):
                raise ValidationError(f"frame entry has {len(entries)} values, not a square count")
            us.append(np.array([complex(a, b) for a, b in entries]).reshape(d, d))
        return cls(tuple(us))


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column real positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    ph = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(ph) / ph)


# -- canonical GHZ bases -------------------------------------------------------


def matrix_unit_basis(dn: int, d: int | None = None, particle: int = 0) -> OperatorBasis:
    """All ``dn**2`` matrix units ``E_ij``; the ``d**2`` units with ``i, j < d`` come
    first, in row-major order of ``(i, j)``."""
    d = dn if d is None else d
    order = [(i, j) for i in range(d) for j in range(d)]
    order += [(i, j) for i in range(dn) for j in range(dn) if i >= d or j >= d]
    el = np.zeros((dn * dn, dn, dn), dtype=complex)
    for mu, (i, j) in enumerate(order):
        el[mu, i, j] = 1.0
    return OperatorBasis(particle, el, Normalization.UNIT)


def canonical_ghz_bases(d: int, N: int) -> list[OperatorBasis]:
    """Bases with ``(1/d) sum_mu g_mu^(x)N = |GHZ_d><GHZ_d|``.

    The matrix units ``E_ij`` satisfy this identity. They are orthonormal but not
    Hermitian; for ``N >= 3`` no Hermitian orthonormal basis can satisfy it.
    """
    bases = [matrix_unit_basis(d, particle=n) for n in range(N)]
    try:
        psi = one_uniform_state(bases)
    except NotAStateError as exc:  # pragma: no cover - construction guarantees success
        raise RuntimeError(f"GHZ basis construction failed: {exc}") from exc
    target = ghz_state(d, N).density().matrix
    if np.max(np.abs(psi.matrix - target)) > 1e-10:  # pragma: no cover
        raise RuntimeError("GHZ basis construction does not reproduce the GHZ projector")
    return bases


def reference_bases(dims: Sequence[int]) -> list[OperatorBasis]:
    d = min(dims)
    return [matrix_unit_basis(dn, d, particle=n) for n, dn in enumerate(dims)]


# -- SVD-based initial frame ---------------------------------------------------


def svd_initial_frame(rho: DensityMatrix, prior: LocalFrame | None = None, tol: float = 1e-9) -> LocalFrame:
    """Per particle, the eigenbasis of the observable carrying the largest
    cross-covariance with the rest of the system.

    The leading left singular vector of the (particle | rest) cross-covariance
    block, read in Gell-Mann coordinates, is a Hermitian operator; its
    eigenvectors (decreasing eigenvalue) form the particle's unitary. Zero or
    degenerate leading singular values keep the prior (default identity).
    """
    prior = LocalFrame.identity(rho.dims) if prior is None else prior
    out = []
    for n, dn in enumerate(rho.dims):
        rest = [m for m in range(rho.N) if m != n]
        m = permute_operator(rho.matrix, rho.dims, [n] + rest)
        Db = rho.matrix.shape[0] // dn
        t = m.reshape(dn, Db, dn, Db)
        ra, rb = np.einsum("ijkj->ik", t), np.einsum("ijil->jl", t)
        R = realign(m - np.kron(ra, rb), dn, Db)
        gm = gellmann_matrices(dn)
        A = np.array([g.T.reshape(-1) for g in gm])  # A[K, (i, j)] = g_K[j, i]
        # left singular structure of the covariance block only depends on A @ R
        u, s, _ = np.linalg.svd(A @ R, full_matrices=False)
        if s[0] < tol or (len(s) > 1 and s[0] - s[1] < tol * max(1.0, s[0])):
            out.append(prior.unitaries[n])
            continue
        x = u[:, 0]
        k = np.argmax(np.abs(x))
        x = (x * abs(x[k]) / x[k]).real
        H = np.einsum("k,kij->ij", x, gm)
        w, vecs = np.linalg.eigh((H + H.conj().T) / 2)
        out.append(_fix_phases(vecs[:, ::-1]))
    return LocalFrame(tuple(out))


# -- optimizer configuration -----------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    max_evals: int = 2000
    restarts: int = 4
    step_tol: float = 1e-6
    objective: str = "product-witness"
    seed: int = 0
    hermitian: bool = False

    def __post_init__(self):
        if self.max_evals < 0 or self.restarts < 0 or self.step_tol <= 0:
            raise ValueError("optimizer settings must be non-negative (step tolerance positive)")
        if self.objective not in ("product-witness", "linentropy"):
            raise ValueError(f"unknown objective {self.objective!r}")


# -- frame refinement -------------------------------------------------------------


def _generator(params: np.ndarray, d: int) -> np.ndarray:
    H = np.zeros((d, d), dtype=complex)
    H[np.diag_indices(d)] = params[:d]
    iu = np.triu_indices(d, 1)
    k = len(iu[0])
    H[iu] = params[d : d + k] + 1j * params[d + k : d + 2 * k]
    H = H + np.triu(H, 1).conj().T
    return H


def _expi(H: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(H)
    return (v * np.exp(1j * w)) @ v.conj().T


def _frame_from_params(init: LocalFrame, params: np.ndarray) -> LocalFrame:
    out, pos = [], 0
    for u in init.unitaries:
        d = u.shape[0]
        out.append(u @ _expi(_generator(params[pos : pos + d * d], d)))
        pos += d * d
    return LocalFrame(tuple(out))


@dataclass
class RefineResult:
    frame: LocalFrame
    value: float
    history: list[float] = field(default_factory=list)
    evals: int = 0


def frame_witness(rho: DensityMatrix, frame: LocalFrame) -> float:
    """Product witness in the matrix-unit reference bases rotated by ``frame``."""
    from .cmc import product_basis_witness

    return product_basis_witness(rho, frame.apply(reference_bases(rho.dims)))


def _entropy_plans(dims: Sequence[int], pair_sets=None, prefactor: float = 2.0):
    from .baselines import check_doubling, default_pair_sets, pair_plan

    sets = default_pair_sets(dims) if pair_sets is None else list(pair_sets)
    if prefactor == 2.0:
        for C in sets:
            check_doubling(C, tuple(dims))
    return [(pair_plan(C, tuple(dims)), k + 1, prefactor / math.sqrt(len(C.pairs))) for k, C in enumerate(sets)]


def entropy_score(matrix: np.ndarray, plans) -> float:
    """Sum over components of the unclamped entropy bounds."""
    from .baselines import pair_terms

    total = 0.0
    for plan, k, pref in plans:
        coh, per_cut = pair_terms(matrix, plan)
        total += pref * (coh - np.sort(per_cut)[:k].sum())
    return total


def entropy_score_grad(matrix: np.ndarray, dims: Sequence[int], plans, eps: float = 1e-12):
    """Score and its gradient with respect to a local rotation of each particle.

    Rotating by ``exp(i t H_n)`` on particle n changes the score at rate
    ``tr(grad_n H_n)``; ``grad_n`` is Hermitian.
    """
    from .baselines import pair_terms

    D = matrix.shape[0]
    Wt = np.zeros((D, D), dtype=complex)  # transpose of d score / d matrix[a, b]
    diag = np.clip(np.real(np.diagonal(matrix)), 0.0, None)
    total = 0.0
    for plan, k, pref in plans:
        coh, per_cut = pair_terms(matrix, plan)
        active = np.argsort(per_cut, kind="stable")[:k]
        total += pref * (coh - per_cut[active].sum())
        z = matrix[plan.rows, plan.cols]
        np.add.at(Wt, (plan.cols, plan.rows), pref * z.conj() / (np.abs(z) + eps))
        a, b = plan.swap_a[active].ravel(), plan.swap_b[active].ravel()
        g = np.sqrt(diag[a] * diag[b]) + eps
        np.add.at(Wt, (a, a), -pref * diag[b] / (2 * g))
        np.add.at(Wt, (b, b), -pref * diag[a] / (2 * g))
    Y = -1j * (matrix @ Wt - Wt @ matrix)
    t = Y.reshape(tuple(dims) * 2)
    N = len(dims)
    grads = []
    for n in range(N):
        others = [m for m in range(N) if m != n]
        red = np.trace(t.transpose([n] + others + [N + n] + [N + m for m in others]).reshape(
            dims[n], D // dims[n], dims[n], D // dims[n]), axis1=1, axis2=3)
        grads.append((red + red.conj().T) / 2)
    return total, grads


def ascend_entropy(rho: DensityMatrix, init: LocalFrame, pair_sets=None, max_iters: int = 200,
                   tol: float = 1e-7, prefactor: float = 2.0) -> RefineResult:
    """Riemannian gradient ascent of the summed unclamped entropy bounds over local
    unitaries, with a backtracking step. History is non-decreasing."""
    plans = _entropy_plans(rho.dims, pair_sets, prefactor)
    us = list(init.unitaries)

    def rotated(us_):
        U = kron_all(us_)
        return U.conj().T @ rho.matrix @ U

    m = rotated(us)
    val, grads = entropy_score_grad(m, rho.dims, plans)
    history, evals, step = [val], 1, 0.5
    for _ in range(max_iters):
        gn2 = sum(float(np.sum(np.abs(g) ** 2)) for g in grads)
        if gn2 < tol**2:
            break
        accepted = False
        for _ in range(30):
            trial = [u @ _expi(step * g) for u, g in zip(us, grads)]
            mt = rotated(trial)
            vt = entropy_score(mt, plans)
            evals += 1
            if vt > val + 1e-4 * step * gn2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        us, m = trial, mt
        val, grads = entropy_score_grad(m, rho.dims, plans)
        history.append(val)
        step = min(step * 2.0, 4.0)
        if history[-1] - history[-2] < tol:
            break
    return RefineResult(LocalFrame(tuple(us)), val, history, evals)


def linentropy_objective(rho: DensityMatrix, pair_sets=None, prefactor: float = 2.0) -> Callable[[LocalFrame], float]:
    plans = _entropy_plans(rho.dims, pair_sets, prefactor)
    return lambda frame: entropy_score(frame.rotate_state(rho), plans)


def refine_frame(rho: DensityMatrix, init: LocalFrame, config: OptimizerConfig,
                 objective: Callable[[LocalFrame], float] | None = None) -> RefineResult:
    """Nelder-Mead over Hermitian generators, with restarts from perturbed copies
    of the best frame so far. The returned history is the best value after each
    accepted improvement, hence non-decreasing."""
    if objective is None:
        if config.objective == "product-witness":
            objective = lambda fr: frame_witness(rho, fr)  # noqa: E731
        else:
            objective = linentropy_objective(rho)
    best_frame, best = init, objective(init)
    history = [best]
    if config.max_evals == 0:
        return RefineResult(init, best, history, 1)
    rng = np.random.default_rng(config.seed)
    n_par = sum(d * d for d in rho.dims)
    budget = config.max_evals
    evals = 1
    per_run = max(1, budget // (config.restarts + 1))
    for run in range(config.restarts + 1):
        if evals >= budget:
            break
        base = best_frame
        x0 = np.zeros(n_par) if run == 0 else rng.normal(scale=0.3, size=n_par)
        res = minimize(lambda p: -objective(_frame_from_params(base, p)), x0, method="Nelder-Mead",
                       options={"maxfev": min(per_run, budget - evals), "xatol": config.step_tol,
                                "fatol": 1e-10, "initial_simplex": None, "adaptive": True})
        evals += int(res.nfev)
        cand = _frame_from_params(base, res.x)
        val = objective(cand)
        if val > best:
            best, best_frame = val, cand
            history.append(best)
    return RefineResult(best_frame, best, history, evals)


# -- see-saw optimization of the product witness ------------------------------------


def frame_coefficients(frame: LocalFrame, d: int) -> list[np.ndarray]:
    """First ``d**2`` rows of the rotated matrix-unit coefficient matrices.

    ``(U E_ij U^dag)[a, b] = U[a, i] conj(U[b, j])``.
    """
    out = []
    for u in frame.unitaries:
        dn = u.shape[0]
        full = np.einsum("ai,bj->ijab", u, u.conj()).reshape(dn * dn, dn * dn)
        out.append(full[: d * d] if dn == d else _embedded_rows(full, dn, d))
    return out


def _embedded_rows(full: np.ndarray, dn: int, d: int) -> np.ndarray:
    rows = [i * dn + j for i in range(d) for j in range(d)]
    return full[rows]


def _environment(T: np.ndarray, mats: Sequence[np.ndarray], n: int) -> np.ndarray:
    """``K[mu, a_n] = sum over other indices of T * prod_{m != n} G_m[mu, a_m]``."""
    N = T.ndim
    letters = "abcdefghijkl"
    sub_T = letters[:N]
    ops, subs = [T], [sub_T]
    for m in range(N):
        if m != n:
            ops.append(mats[m])
            subs.append("z" + letters[m])
    return np.einsum(",".join(subs) + "->z" + letters[n], *ops)


def _random_coisometry(rows: int, cols: int, rng: np.random.Generator, real: bool) -> np.ndarray:
    z = rng.standard_normal((cols, rows))
    if not real:
        z = z + 1j * rng.standard_normal((cols, rows))
    q, _ = np.linalg.qr(z)
    return q.T


@dataclass
class SeesawResult:
    value: float
    coefficients: list[np.ndarray]
    history: list[float]
    evals: int

    def bases(self, dims: Sequence[int]) -> list[OperatorBasis]:
        return bases_from_coefficients(self.coefficients, dims)


def bases_from_coefficients(mats: Sequence[np.ndarray], dims: Sequence[int]) -> list[OperatorBasis]:
    """Complete orthonormal coefficient rows to full operator bases."""
    out = []
    for n, (G, dn) in enumerate(zip(mats, dims)):
        extra = null_space(G).T if G.shape[0] < dn * dn else np.zeros((0, dn * dn))
        full = np.vstack([G, extra.conj()]) if extra.size else G
        out.append(OperatorBasis(n, full.reshape(dn * dn, dn, dn), Normalization.UNIT))
    return out


def seesaw_witness(rho: DensityMatrix, starts: Sequence[Sequence[np.ndarray]], max_sweeps: int = 50,
                   tol: float = 1e-10, hermitian: bool = False) -> SeesawResult:
    """Alternating maximization of ``Re sum_mu <g_mu^(1) x ... x g_mu^(N)>``.

    Each step replaces one particle's coefficient matrix by the polar factor of
    its environment, the exact maximizer with the others fixed. With
    ``hermitian=True`` the rows stay real combinations of Gell-Mann matrices.
    """
    T = operator_tensor(rho)
    gm = [np.array([g.reshape(-1) for g in gellmann_matrices(dn)]) for dn in rho.dims]
    best: SeesawResult | None = None
    evals = 0
    for start in starts:
        mats = [np.array(G, dtype=complex) for G in start]
        if hermitian:
            # project the start onto real Gell-Mann coordinates
            mats = [_polar_rows((G @ Gm.conj().T).real) @ Gm for G, Gm in zip(mats, gm)]
        val = _value(T, mats)
        history = [val]
        for _ in range(max_sweeps):
            for n in range(rho.N):
                K = _environment(T, mats, n)
                if hermitian:
                    M = (gm[n] @ K.T).real  # coordinates b; W_n = sum O[mu, b] M[b, mu]
                    mats[n] = _polar_rows(M.T) @ gm[n]
                else:
                    mats[n] = _polar_rows(K.conj())
                evals += 1
            new = _value(T, mats)
            history.append(max(new, history[-1]))
            if new - val < tol:
                val = max(val, new)
                break
            val = new
        if best is None or val > best.value:
            best = SeesawResult(val, mats, history, 0)
    best.evals = evals
    return best


def _polar_rows(K: np.ndarray) -> np.ndarray:
    """Row-orthonormal ``G`` maximizing ``Re sum G * conj(K)`` (entrywise), i.e. ``Re tr(G K^dag)``."""
    u, _, vh = np.linalg.svd(K, full_matrices=False)
    return u @ vh


def _value(T: np.ndarray, mats: Sequence[np.ndarray]) -> float:
    from .cmc import witness_from_coefficients

    return witness_from_coefficients(T, mats)


def optimize_product_witness(rho: DensityMatrix, config: OptimizerConfig | None = None) -> SeesawResult:
    """Best see-saw value over the canonical start, the SVD-initialized frame and
    ``config.restarts`` random starts (seeded by ``config.seed``)."""
    config = OptimizerConfig() if config is None else config
    d = min(rho.dims)
    canonical = frame_coefficients(LocalFrame.identity(rho.dims), d)
    starts = [canonical]
    if config.max_evals == 0:
        return seesaw_witness(rho, starts, max_sweeps=0, hermitian=config.hermitian)
    starts.append(frame_coefficients(svd_initial_frame(rho), d))
    rng = np.random.default_rng(config.seed)
    for _ in range(config.restarts):
        starts.append([_random_coisometry(d * d, dn * dn, rng, config.hermitian) for dn in rho.dims])
    sweeps = max(1, config.max_evals // (rho.N * len(starts)))
    return seesaw_witness(rho, starts, max_sweeps=sweeps, tol=config.step_tol * 1e-4, hermitian=config.hermitian)
