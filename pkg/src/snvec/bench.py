"""Random-state experiments comparing the Schmidt-number-vector criteria.

Every sample is a pure function of ``(seed, index)``; per-sample work may run in
a process pool, and results are folded back in index order, so outputs are
identical for any worker count.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .bases import LocalFrame, OptimizerConfig, ascend_entropy, optimize_product_witness, svd_initial_frame
from .baselines import (
    default_pair_sets,
    exclusion_by_corrtensor,
    exclusion_by_linentropy,
    gm_concurrence_lower_bound,
)
from .cmc import exclusion_by_product_witness, exclusion_by_system, f_values, system_feasible
from .fidelity import FidelityBoundTable, fidelity
from .lattice import Candidate, CriterionReport, combine_reports, enumerate_candidates
from .qudit import DensityMatrix, check_dims
from .states import (
    PSI432_DIMS,
    SamplerConfig,
    SamplerMode,
    fixed_lambda1_sample,
    ghz_random_noise_sample,
    haar_unitary,
    psi432_coefficients,
    psi432_state,
    white_noise_mix,
)

CRITERIA = ("cmc-system", "product-witness", "fidelity", "corrtensor", "linentropy")
EXPERIMENTS = ("table1", "table2", "fig2", "certify", "gen")
COMBINED_ROW = "cmc-system+product-witness"
TABLE_ROWS = ("corrtensor", "linentropy", "product-witness", "cmc-system", COMBINED_ROW)
# candidate reported only as a raw count in the tables
NEVER_DETECTED = (3, 3, 1)
# candidates that must both be excluded to certify the (4,3,2) family member
FIG2_TARGET = ((4, 2, 2), (3, 3, 2))
BISECTION_TOL = 1e-4
CGM_THRESHOLD = 0.8

CSV_FIELDS = (
    ["idx", "seed", "p", "lambda1"]
    + [f"c_re[{k}]" for k in range(4)]
    + [f"c_im[{k}]" for k in range(4)]
    + ["f1", "f2", "f3", "W", "fidelity", "C2", "B1", "B2", "B3", "cgm",
       "cert_cmc", "cert_fid", "cert_combined", "winner"]
    + ["det_corrtensor", "det_linentropy", "det_product", "det_cmc", "det_combined",
       "pstar_cmc", "pstar_fid", "cgm_gt_0.8"]
)


class ConfigError(ValueError):
    """An experiment configuration is inconsistent."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    samples: int = 10000
    seed: int = 0
    dims: tuple[int, ...] = (3, 3, 3)
    criteria: tuple[str, ...] = CRITERIA
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(max_evals=300, restarts=3))
    out: str | None = None
    workers: int = 1
    force_p: float | None = None
    entropy_iters: int = 30
    entropy_restarts: int = 0
    fig2_target: tuple[tuple[int, ...], ...] = FIG2_TARGET

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.samples < 1:
            raise ConfigError(f"samples must be at least 1, got {self.samples}")
        try:
            object.__setattr__(self, "dims", check_dims(self.dims))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        crit = tuple(self.criteria)
        if not crit and self.experiment in ("table1", "table2", "fig2", "certify"):
            raise ConfigError("criteria must be nonempty")
        bad = [c for c in crit if c not in CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria {bad}; choose from {', '.join(CRITERIA)}")
        object.__setattr__(self, "criteria", crit)
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.force_p is not None and not 0.0 <= self.force_p <= 1.0:
            raise ConfigError(f"forced p must lie in [0, 1], got {self.force_p}")
        if self.entropy_iters < 0 or self.entropy_restarts < 0:
            raise ConfigError("entropy_iters and entropy_restarts must be non-negative")
        target = tuple(tuple(int(x) for x in v) for v in self.fig2_target)
        if not target:
            raise ConfigError("fig2 target must name at least one candidate")
        object.__setattr__(self, "fig2_target", target)


def vec_label(v: Sequence[int] | None) -> str:
    if v is None:
        return ""
    sep = "" if all(x < 10 for x in v) else "-"
    return sep.join(str(int(x)) for x in v)


def fmt(x) -> str:
    """Six significant digits; missing or non-finite values are empty."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if not math.isfinite(x) else f"{x:.6g}"


@dataclass
class SampleRecord:
    idx: int
    seed: int
    p: float | None = None
    lambda1: float | None = None
    c: np.ndarray | None = None
    f: np.ndarray | None = None
    W: float | None = None
    fidelity: float | None = None
    C2: float | None = None
    B: Sequence[float] | None = None
    cgm: float | None = None
    cert_cmc: Candidate | None = None
    cert_fid: Candidate | None = None
    cert_combined: Candidate | None = None
    winner: str | None = None
    detected: dict[str, Candidate] = field(default_factory=dict)
    pstar_cmc: float | None = None
    pstar_fid: float | None = None

    def row(self) -> list[str]:
        c = self.c if self.c is not None else [None] * 4
        f = list(self.f) if self.f is not None else []
        B = list(self.B) if self.B is not None else []
        f += [None] * (3 - len(f))
        B += [None] * (3 - len(B))
        vals = [self.idx, self.seed, self.p, self.lambda1]
        vals += [None if z is None else z.real for z in c] + [None if z is None else z.imag for z in c]
        vals += f[:3] + [self.W, self.fidelity, self.C2] + B[:3] + [self.cgm]
        vals += [vec_label(self.cert_cmc), vec_label(self.cert_fid), vec_label(self.cert_combined), self.winner]
        vals += [vec_label(self.detected.get(r)) for r in TABLE_ROWS]
        cgm_flag = None if self.cgm is None or self.c is None else bool(self.cgm > CGM_THRESHOLD)
        vals += [self.pstar_cmc, self.pstar_fid, cgm_flag]
        return [fmt(v) for v in vals]


# -- per-state criteria ---------------------------------------------------------


def _rotated(rho: DensityMatrix, frame: LocalFrame) -> DensityMatrix:
    m = frame.rotate_state(rho)
    return DensityMatrix(rho.dims, (m + m.conj().T) / 2)


def linentropy_report(rho: DensityMatrix, candidates: Sequence[Candidate], iters: int = 30,
                      restarts: int = 0, rng: np.random.Generator | None = None) -> CriterionReport:
    """Union of linear-entropy exclusions over local frames.

    The bound holds in every local basis, so each frame reached by gradient
    ascent (from the identity, the SVD-initialized frame and ``restarts``
    random frames) contributes sound exclusions.
    """
    plain = exclusion_by_linentropy(rho, candidates)
    if iters == 0:
        return plain
    starts = [LocalFrame.identity(rho.dims), svd_initial_frame(rho)]
    rng = np.random.default_rng(0) if rng is None else rng
    starts += [LocalFrame(tuple(haar_unitary(d, rng) for d in rho.dims)) for _ in range(restarts)]
    reports = [plain]
    for s in starts:
        res = ascend_entropy(rho, s, max_iters=iters, tol=1e-4)
        reports.append(exclusion_by_linentropy(_rotated(rho, res.frame), candidates))
    out = combine_reports(reports, candidates)
    out.criterion = "linentropy"
    out.witness_values = dict(plain.witness_values)
    return out


def product_witness_report(rho: DensityMatrix, candidates: Sequence[Candidate],
                           optimizer: OptimizerConfig) -> CriterionReport:
    res = optimize_product_witness(rho, optimizer)
    return exclusion_by_product_witness(rho, res.bases(rho.dims), candidates, basis_label="see-saw", W=res.value)


def table_reports(rho: DensityMatrix, candidates: Sequence[Candidate], config: ExperimentConfig,
                  index: int = 0) -> dict[str, CriterionReport]:
    """One report per table row whose constituent criteria are selected."""
    crit = set(config.criteria)
    out: dict[str, CriterionReport] = {}
    if "corrtensor" in crit:
        out["corrtensor"] = exclusion_by_corrtensor(rho, candidates)
    if "linentropy" in crit:
        rng = np.random.default_rng([config.optimizer.seed, index])
        out["linentropy"] = linentropy_report(rho, candidates, config.entropy_iters, config.entropy_restarts, rng)
    if "product-witness" in crit:
        out["product-witness"] = product_witness_report(rho, candidates, config.optimizer)
    if "cmc-system" in crit:
        out["cmc-system"] = exclusion_by_system(rho, candidates)
    if "cmc-system" in crit and "product-witness" in crit:
        comb = combine_reports([out["cmc-system"], out["product-witness"]], candidates)
        comb.criterion = COMBINED_ROW
        out[COMBINED_ROW] = comb
    return out


# -- tables ----------------------------------------------------------------------


def table_columns(dims: Sequence[int]) -> list[Candidate]:
    """Candidates in ascending order with the never-detected one moved last."""
    cands = sorted(enumerate_candidates(dims))
    if NEVER_DETECTED in cands:
        cands.remove(NEVER_DETECTED)
        cands.append(NEVER_DETECTED)
    return cands


@dataclass
class TableSummary:
    experiment: str
    samples: int
    columns: list[Candidate]
    counts: dict[str, dict[Candidate, int]]

    def percentages(self) -> dict[str, dict[Candidate, float]]:
        return {r: {c: 100.0 * n / self.samples for c, n in row.items()} for r, row in self.counts.items()}

    def percent(self, row: str, v: Candidate) -> float:
        return 100.0 * self.counts[row][tuple(v)] / self.samples

    def nontrivial(self, row: str) -> int:
        return sum(n for c, n in self.counts[row].items() if c != (1,) * len(c))

    def format_text(self) -> str:
        labels = [vec_label(c) + (" (raw)" if c == NEVER_DETECTED else "") for c in self.columns]
        width = max(len(r) for r in self.counts) if self.counts else 8
        lines = [f"# {self.experiment}: percentage of {self.samples} samples per detected vector",
                 " ".join([" " * width] + [f"{lab:>9}" for lab in labels])]
        for r, row in self.percentages().items():
            lines.append(" ".join([f"{r:<{width}}"] + [f"{fmt(row[c]):>9}" for c in self.columns]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"experiment": self.experiment, "samples": self.samples,
                "columns": [vec_label(c) for c in self.columns],
                "percent": {r: {vec_label(c): float(fmt(x)) for c, x in row.items()}
                            for r, row in self.percentages().items()}}


def _table_state(config: ExperimentConfig, index: int) -> tuple[DensityMatrix, dict]:
    if config.experiment == "table1":
        s = fixed_lambda1_sample(SamplerConfig(SamplerMode.FIXED_LAMBDA1, config.seed, config.dims), index)
        return s.rho, {"lambda1": s.lambda1}
    d = config.dims[0]
    s = ghz_random_noise_sample(config.seed, index, d=d, N=len(config.dims), p=config.force_p)
    return s.rho, {"p": s.p}


def table_sample(config: ExperimentConfig, index: int) -> SampleRecord:
    rho, meta = _table_state(config, index)
    cands = enumerate_candidates(config.dims)
    reports = table_reports(rho, cands, config, index)
    rec = SampleRecord(index, config.seed, **meta)
    rec.detected = {r: rep.detected for r, rep in reports.items()}
    if "cmc-system" in reports:
        w = reports["cmc-system"].witness_values
        rec.f = [w[f"f_{k + 1}"] for k in range(len(cands[0]))]
        rec.cert_cmc = reports["cmc-system"].certified
    if "product-witness" in reports:
        rec.W = reports["product-witness"].witness_values["W"]
    if "corrtensor" in reports:
        rec.C2 = reports["corrtensor"].witness_values["C2"]
    if "linentropy" in reports:
        w = reports["linentropy"].witness_values
        rec.B = [w[f"B_{k + 1}"] for k in range(len(cands[0]))]
        rec.cgm = gm_concurrence_lower_bound(rho, default_pair_sets(rho.dims)[-1])
    if COMBINED_ROW in reports:
        rec.cert_combined = reports[COMBINED_ROW].certified
    return rec


def _run_samples(fn: Callable[[int], SampleRecord], samples: int, workers: int) -> list[SampleRecord]:
    if workers == 1:
        return [fn(i) for i in range(samples)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(samples), chunksize=max(1, samples // (8 * workers))))


def _check_table_config(config: ExperimentConfig, name: str) -> None:
    if config.experiment != name:
        raise ConfigError(f"config is for {config.experiment!r}, not {name!r}")
    if len(set(config.dims)) != 1:
        raise ConfigError(f"{name} needs equal local dimensions, got {config.dims}")
    if name == "table1" and config.force_p is not None:
        raise ConfigError("a forced p only applies to table2")


def summarize(records: Sequence[SampleRecord], config: ExperimentConfig) -> TableSummary:
    cols = table_columns(config.dims)
    rows = [r for r in TABLE_ROWS if records and r in records[0].detected]
    counts = {r: {c: 0 for c in cols} for r in rows}
    for rec in records:
        for r in rows:
            counts[r][rec.detected[r]] += 1
    return TableSummary(config.experiment, len(records), cols, counts)


def run_table(config: ExperimentConfig) -> tuple[TableSummary, list[SampleRecord]]:
    _check_table_config(config, config.experiment)
    records = _run_samples(partial(table_sample, config), config.samples, config.workers)
    return summarize(records, config), records


def run_table1(config: ExperimentConfig) -> tuple[TableSummary, list[SampleRecord]]:
    _check_table_config(config, "table1")
    return run_table(config)


def run_table2(config: ExperimentConfig) -> tuple[TableSummary, list[SampleRecord]]:
    _check_table_config(config, "table2")
    return run_table(config)


# -- white-noise thresholds for the (2,3,4) family ------------------------------------


def critical_p(detects: Callable[[float], bool], tol: float = BISECTION_TOL) -> float:
    """Smallest white-noise weight ``p`` at which ``detects`` holds, by bisection.

    Returns ``nan`` when the pure state (p = 1) is not detected and 0 when even
    the maximally mixed end is. Assumes detection is monotone in ``p``.
    """
    if not detects(1.0):
        return math.nan
    if detects(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if detects(mid):
            hi = mid
        else:
            lo = mid
    return hi


def cmc_detects_target(rho: DensityMatrix, target: Sequence[Candidate] = FIG2_TARGET) -> bool:
    f = f_values(rho)
    return not any(system_feasible(f, v) for v in target)


def fidelity_detects_target(rho: DensityMatrix, psi, table: FidelityBoundTable,
                            target: Sequence[Candidate] = FIG2_TARGET) -> bool:
    F = fidelity(rho, psi)
    return all(F > table[v] + 1e-9 for v in target)


def winner(p_cmc: float, p_fid: float, tol: float = BISECTION_TOL) -> str:
    """Criterion certifying at larger noise ``1 - p``; ``tie`` within ``tol``."""
    if math.isnan(p_cmc) and math.isnan(p_fid):
        return "none"
    if math.isnan(p_fid):
        return "cmc"
    if math.isnan(p_cmc):
        return "fidelity"
    if abs(p_cmc - p_fid) <= tol:
        return "tie"
    return "cmc" if p_cmc < p_fid else "fidelity"


def fig2_sample(config: ExperimentConfig, index: int, c: np.ndarray | None = None) -> SampleRecord:
    c = psi432_coefficients(config.seed, index) if c is None else np.asarray(c, dtype=complex)
    psi = psi432_state(c)
    rho = psi.density()
    cands = enumerate_candidates(PSI432_DIMS)
    table = FidelityBoundTable.build(psi, cands)
    crit = set(config.criteria)
    rec = SampleRecord(index, config.seed, c=c)
    reports = []
    if "cmc-system" in crit:
        rep = exclusion_by_system(rho, cands)
        rec.f, rec.cert_cmc = f_values(rho), rep.certified
        rec.pstar_cmc = critical_p(lambda p: cmc_detects_target(white_noise_mix(psi, p), config.fig2_target))
        reports.append(rep)
    if "fidelity" in crit:
        from .fidelity import exclusion_by_fidelity

        rep = exclusion_by_fidelity(rho, psi, cands, table)
        rec.fidelity, rec.cert_fid = rep.witness_values["fidelity"], rep.certified
        rec.pstar_fid = critical_p(
            lambda p: fidelity_detects_target(white_noise_mix(psi, p), psi, table, config.fig2_target))
        reports.append(rep)
    if "product-witness" in crit:
        rec.W = product_witness_report(rho, cands, config.optimizer).witness_values["W"]
    if "linentropy" in crit:
        rep = exclusion_by_linentropy(rho, cands)
        rec.B = [rep.witness_values[f"B_{k + 1}"] for k in range(3)]
    rec.cgm = gm_concurrence_lower_bound(rho, default_pair_sets(PSI432_DIMS)[-1])
    if reports:
        rec.cert_combined = combine_reports(reports, cands).certified
    if rec.pstar_cmc is not None and rec.pstar_fid is not None:
        rec.winner = winner(rec.pstar_cmc, rec.pstar_fid)
    return rec


@dataclass
class Fig2Summary:
    samples: int
    wins: dict[str, int]

    @property
    def cmc_win_rate(self) -> float:
        return self.wins.get("cmc", 0) / self.samples

    def format_text(self) -> str:
        parts = ", ".join(f"{k}={v}" for k, v in sorted(self.wins.items()))
        return f"# fig2: {self.samples} samples; winners {parts}; cmc win rate {fmt(self.cmc_win_rate)}\n"

    def to_json(self) -> dict:
        return {"experiment": "fig2", "samples": self.samples, "wins": dict(sorted(self.wins.items())),
                "cmc_win_rate": float(fmt(self.cmc_win_rate))}


def run_fig2(config: ExperimentConfig) -> tuple[Fig2Summary, list[SampleRecord]]:
    if config.experiment != "fig2":
        raise ConfigError(f"config is for {config.experiment!r}, not 'fig2'")
    if config.dims != PSI432_DIMS:
        raise ConfigError(f"fig2 needs dims {PSI432_DIMS}, got {config.dims}")
    unknown = [v for v in config.fig2_target if v not in enumerate_candidates(PSI432_DIMS)]
    if unknown:
        raise ConfigError(f"fig2 target {unknown} is not a candidate for dims {PSI432_DIMS}")
    records = _run_samples(partial(fig2_sample, config), config.samples, config.workers)
    wins: dict[str, int] = {}
    for rec in records:
        if rec.winner is not None:
            wins[rec.winner] = wins.get(rec.winner, 0) + 1
    return Fig2Summary(len(records), wins), records


# -- output ----------------------------------------------------------------------------


def code_digest() -> str:
    """SHA-256 over the package sources, so cached results can be matched to code."""
    h = hashlib.sha256()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:16]


def metadata_lines(config: ExperimentConfig) -> list[str]:
    cfg = asdict(replace(config, out=None, workers=1))
    cfg.pop("out"), cfg.pop("workers")
    lines = [f"# config: {json.dumps(cfg, sort_keys=True)}", f"# code: {code_digest()}"]
    if config.experiment == "fig2":
        target = " ".join(vec_label(v) for v in config.fig2_target)
        lines.append(
            "# threshold protocol: pstar is the smallest white-noise weight p of the pure state at which the "
            f"criterion excludes every one of {target}, by bisection on [0,1] to {BISECTION_TOL:g} assuming "
            f"monotone detection; empty when the pure state itself is not certified; winner has the smaller "
            f"pstar, tie within {BISECTION_TOL:g}")
    return lines


def records_csv(records: Sequence[SampleRecord], config: ExperimentConfig) -> str:
    buf = io.StringIO()
    for line in metadata_lines(config):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()


def records_json(records: Sequence[SampleRecord]) -> list[dict]:
    return [dict(zip(CSV_FIELDS, rec.row())) for rec in records]


# -- single-state certification ----------------------------------------------------------


def default_target(state) -> "PureState | None":
    """Fidelity target: the state itself when pure, else GHZ for equal local dimensions."""
    from .qudit import PureState
    from .states import ghz_state

    if isinstance(state, PureState):
        return state
    if len(set(state.dims)) == 1:
        return ghz_state(state.dims[0], len(state.dims))
    return None


def certify(state, config: ExperimentConfig, target=None) -> dict:
    """Run the selected criteria on one state and combine their exclusions."""
    from .baselines import _equal_dim
    from .fidelity import exclusion_by_fidelity
    from .qudit import InvalidDimensionError, ValidationError, as_density

    rho = as_density(state)
    cands = enumerate_candidates(rho.dims)
    reports: list[CriterionReport] = []
    for crit in config.criteria:
        if crit == "cmc-system":
            reports.append(exclusion_by_system(rho, cands))
        elif crit == "product-witness":
            reports.append(product_witness_report(rho, cands, config.optimizer))
        elif crit == "fidelity":
            tgt = default_target(state) if target is None else target
            if tgt is None:
                raise ConfigError(f"no default fidelity target for dims {rho.dims}; pass one explicitly")
            if tgt.dims != rho.dims:
                raise ValidationError(f"target dims {tgt.dims} do not match state dims {rho.dims}")
            reports.append(exclusion_by_fidelity(rho, tgt, cands))
        elif crit == "corrtensor":
            try:
                _equal_dim(rho)
            except InvalidDimensionError as exc:
                raise ConfigError(f"corrtensor: {exc}") from None
            reports.append(exclusion_by_corrtensor(rho, cands))
        elif crit == "linentropy":
            try:
                default_pair_sets(rho.dims)
            except ValidationError as exc:
                raise ConfigError(f"linentropy: {exc}") from None
            rng = np.random.default_rng([config.optimizer.seed, 0])
            reports.append(linentropy_report(rho, cands, config.entropy_iters, config.entropy_restarts, rng))
    combined = combine_reports(reports, cands)
    return {
        "dims": list(rho.dims),
        "certified": list(combined.certified),
        "detected": list(combined.detected),
        "criteria": [_rounded(r.to_json()) for r in reports],
    }


def _rounded(obj):
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_rounded(v) for v in obj]
    return obj


def default_dims(experiment: str) -> tuple[int, ...]:
    return PSI432_DIMS if experiment == "fig2" else (3, 3, 3)


def run_experiment(config: ExperimentConfig):
    """Dispatch to the table or fig2 runner."""
    if config.experiment == "fig2":
        return run_fig2(config)
    return run_table(config)
