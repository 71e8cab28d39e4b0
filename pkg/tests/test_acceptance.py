"""Acceptance suite: one PASS/FAIL line per criterion.

Statistical criteria reuse ``results/<experiment>.csv`` when its config and
code-digest header lines match the current build; otherwise the experiment is
run here (about half an hour on one core).
"""
import csv
import io
import math
import os
from pathlib import Path

import numpy as np
import pytest

from acceptance_log import record
from oracles import grid_feasible, sorted_rank_vector
from snvec import bench
from snvec.bases import LocalFrame, canonical_ghz_bases
from snvec.baselines import (
    correlation_tensor_norm,
    corrtensor_bound,
    default_pair_sets,
    exclusion_by_corrtensor,
    exclusion_by_linentropy,
    ghz_pair_set,
    gm_concurrence_lower_bound,
    linear_entropy_bound,
    pure_linear_entropies,
)
from snvec.cmc import exclusion_by_product_witness, exclusion_by_system, f_values
from snvec.fidelity import exclusion_by_fidelity, fidelity_bound
from snvec.lattice import enumerate_candidates, majorization_feasible
from snvec.qudit import DensityMatrix, PureState
from snvec.states import (
    SamplerConfig,
    SamplerMode,
    ghz_state,
    haar_random_density,
    haar_unitary,
    psi432_state,
    random_product_state,
    random_pure_state,
    sample_rng,
    white_noise_mix,
)

RESULTS = Path(__file__).resolve().parents[1] / "results"

# published percentages, columns (111) (221) (222) (322) (332) (333)
PUBLISHED_COLUMNS = [(1, 1, 1), (2, 2, 1), (2, 2, 2), (3, 2, 2), (3, 3, 2), (3, 3, 3)]
PUBLISHED = {
    "table1": {
        "corrtensor": [89.6, 8.2, 0.9, 0.9, 0.4, 0.0],
        "linentropy": [18.1, 20.4, 61.5, 0.0, 0.0, 0.0],
        "product-witness": [48.1, 0.0, 48.3, 0.0, 0.0, 3.6],
        "cmc-system": [29.0, 55.1, 0.0, 0.0, 11.6, 4.3],
        bench.COMBINED_ROW: [29.0, 19.1, 21.5, 14.5, 10.5, 5.4],
    },
    "table2": {
        "corrtensor": [86.9, 8.9, 1.2, 1.1, 0.9, 1.0],
        "linentropy": [9.8, 15.2, 62.4, 1.1, 0.9, 10.6],
        "product-witness": [31.2, 0.0, 33.2, 0.0, 0.0, 35.6],
        "cmc-system": [24.9, 50.6, 0.0, 0.0, 12.2, 12.3],
        bench.COMBINED_ROW: [24.9, 6.3, 32.4, 0.8, 0.0, 35.6],
    },
}
OPTIMIZER_ROWS = ("product-witness", "linentropy", bench.COMBINED_ROW)
DET_COLUMN = {"corrtensor": "det_corrtensor", "linentropy": "det_linentropy", "product-witness": "det_product",
              "cmc-system": "det_cmc", bench.COMBINED_ROW: "det_combined"}
FIG2_RATE = 0.85
SAMPLES = 10000


def check(name, ok, detail):
    assert record(name, bool(ok), detail), detail


# -- 1. analytic anchors ------------------------------------------------------------


def test_anchor_f_values():
    rng = np.random.default_rng(0)
    dev_prod = max(np.max(np.abs(f_values(random_product_state(dims, rng).density()) - 1))
                   for dims in [(3, 3, 3), (2, 3, 4), (2, 2, 2)] for _ in range(5))
    dev_ghz = max(np.max(np.abs(f_values(ghz_state(d, 3).density()) - d)) for d in (2, 3, 4))
    check("1a f on product states and GHZ_d", dev_prod < 1e-8 and dev_ghz < 1e-8,
          f"max |f-1| = {dev_prod:.2e} (product), max |f-d| = {dev_ghz:.2e} (GHZ, d=2,3,4)")


def test_anchor_ghz_fidelity_bound():
    dev = max(abs(fidelity_bound(ghz_state(d, 3), v) - v[-1] / d)
              for d in (2, 3, 4) for v in enumerate_candidates((d, d, d)))
    two_thirds = fidelity_bound(ghz_state(3, 3), (3, 3, 2))
    check("1b fidelity bound for GHZ_d is v_N/d", dev < 1e-8 and abs(two_thirds - 2 / 3) < 1e-8,
          f"max deviation {dev:.2e}; bound at v_N=2, d=3 is {two_thirds:.10f}")


def _threshold(detects, lo=0.0, hi=1.0, tol=1e-9):
    while hi - lo > tol:
        mid = (lo + hi) / 2
        lo, hi = (lo, mid) if detects(mid) else (mid, hi)
    return hi


def test_anchor_ghz_threshold():
    ghz = ghz_state(3, 3)
    cands = enumerate_candidates((3, 3, 3))
    bases = canonical_ghz_bases(3, 3)

    def by_witness(p):
        return exclusion_by_product_witness(white_noise_mix(ghz, p), bases, cands).certified[-1] == 3

    def by_fidelity(p):
        return exclusion_by_fidelity(white_noise_mix(ghz, p), ghz, cands).certified[-1] == 3

    pw, pf = _threshold(by_witness), _threshold(by_fidelity)
    ok = abs(pw - 17 / 26) < 1e-6 and abs(pf - 17 / 26) < 1e-6
    check("1c GHZ_3 white-noise threshold 17/26", ok,
          f"product witness {pw:.8f}, fidelity {pf:.8f}, 17/26 = {17 / 26:.8f}")


def test_anchor_psi432_threshold():
    rec = bench.fig2_sample(bench.ExperimentConfig("fig2", samples=1, dims=(2, 3, 4)), 0, c=np.full(4, 0.5))
    check("1d psi432 flat fidelity threshold 17/23", abs(rec.pstar_fid - 17 / 23) < 1e-3,
          f"p* = {rec.pstar_fid:.6f}, 17/23 = {17 / 23:.6f}")


def test_anchor_corrtensor():
    ghz = ghz_state(3, 3).density()
    C2 = correlation_tensor_norm(ghz, 2)
    bound = corrtensor_bound((2, 2, 2), 3)
    ranks = exclusion_by_corrtensor(ghz, enumerate_candidates((3, 3, 3))).notes["single_particle_ranks"]
    ok = abs(C2 - 26) < 1e-8 and abs(bound - 24.5) < 1e-8 and ranks == "333"
    check("1e correlation tensor anchors", ok, f"C2(GHZ) = {C2:.10f}, bound(2,2,2) = {bound}, ranks {ranks}")


def test_anchor_linentropy():
    ghz = ghz_state(3, 3).density()
    B = [linear_entropy_bound(ghz, k, ghz_pair_set(3, 3)) for k in (1, 2, 3)]
    cert = exclusion_by_linentropy(ghz, enumerate_candidates((3, 3, 3))).certified
    ok = max(abs(b - 2 / math.sqrt(3)) for b in B) < 1e-8 and cert == (3, 3, 3)
    check("1f linear-entropy bound on GHZ_3", ok, f"B = {[round(float(b), 10) for b in B]}, certified {cert}")


# -- 2. oracle equivalences ---------------------------------------------------------------


def test_lp_against_grid():
    rng = np.random.default_rng(2024)
    h = 1 / 8
    cands = enumerate_candidates((3, 3, 3)) + enumerate_candidates((2, 3, 4))
    mismatches, feasible = 0, 0
    for _ in range(1000):
        v = cands[rng.integers(len(cands))]
        # f on the grid, concentrated near the candidate so that boundary cases occur
        f = np.clip(np.array(v)[rng.permutation(3)] + h * rng.integers(-6, 4, 3), 0, None)
        truth = grid_feasible(f, v, h)
        feasible += truth
        mismatches += majorization_feasible(f, v) != truth
    check("2a LP feasibility against grid search", mismatches == 0 and 0 < feasible < 1000,
          f"{mismatches} mismatches on 1000 instances ({feasible} feasible)")


def low_rank_states(dims, rng, n):
    """Random pure states of every rank profile: sums of 1-4 product states,
    generic states and, for (2,3,4), superpositions of the four psi432 kets."""
    out = []
    for i in range(n):
        kind = i % 6
        if kind == 5:
            out.append(random_pure_state(dims, rng))
        elif kind == 4 and dims == (2, 3, 4):
            c = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) * (rng.uniform(size=4) > 0.3)
            c = c if np.any(c) else np.array([1, 1, 0, 0], dtype=complex)
            out.append(psi432_state(c / np.linalg.norm(c)))
        else:
            terms = [random_product_state(dims, rng).amplitudes for _ in range(kind % 4 + 1)]
            out.append(PureState.normalized(dims, sum(terms)))
    return out


@pytest.mark.parametrize("dims", [(3, 3, 3), (2, 3, 4)])
def test_pure_state_soundness(dims):
    rng = sample_rng(77, 0)
    cands = enumerate_candidates(dims)
    target = ghz_state(3, 3) if dims == (3, 3, 3) else psi432_state(np.full(4, 0.5))
    cfg = bench.ExperimentConfig("certify", samples=1, dims=dims)
    violations = {}
    for i, psi in enumerate(low_rank_states(dims, rng, 500)):
        rho = psi.density()
        truth = sorted_rank_vector(psi)
        reports = [exclusion_by_system(rho, cands), exclusion_by_fidelity(rho, target, cands),
                   bench.product_witness_report(rho, cands, cfg.optimizer),
                   bench.linentropy_report(rho, cands, cfg.entropy_iters, 1, np.random.default_rng(i))]
        if dims == (3, 3, 3):
            reports.append(exclusion_by_corrtensor(rho, cands))
        for rep in reports:
            if truth in rep.excluded:
                violations[rep.criterion] = violations.get(rep.criterion, 0) + 1
    check(f"2b pure-state soundness {dims}", not violations,
          f"500 states, all criteria; exclusions of the true rank vector: {violations or 'none'}")


def test_f_basis_invariance():
    rng = np.random.default_rng(5)
    worst = 0.0
    for dims in [(3, 3, 3), (2, 3, 4)]:
        cfg = SamplerConfig(SamplerMode.LEBESGUE, 6, dims)
        for i in range(10):
            rho = haar_random_density(cfg, i)
            f0 = f_values(rho)
            for _ in range(50):
                frame = LocalFrame(tuple(haar_unitary(d, rng) for d in dims))
                m = frame.rotate_state(rho)
                worst = max(worst, np.max(np.abs(f_values(DensityMatrix(dims, (m + m.conj().T) / 2)) - f0)))
    check("2c f invariant under local rotations", worst < 1e-8,
          f"max deviation {worst:.2e} over 20 states x 50 rotations")


# -- 3. statistical reproduction ---------------------------------------------------------------


def experiment_config(name):
    return bench.ExperimentConfig(name, samples=SAMPLES, seed=0, dims=bench.default_dims(name),
                                  workers=os.cpu_count() or 1)


def experiment_rows(name):
    """Per-sample CSV rows, from ``results/`` when it matches this build, else freshly run."""
    cfg = experiment_config(name)
    header = bench.metadata_lines(cfg)
    path = RESULTS / f"{name}.csv"
    if path.exists():
        text = path.read_text(encoding="utf-8")
        if text.splitlines()[: len(header)] == header:
            return text, "cached"
    records = bench.run_experiment(cfg)[1]
    return bench.records_csv(records, cfg), "fresh"


def parse(text):
    return list(csv.DictReader(io.StringIO("\n".join(l for l in text.splitlines() if not l.startswith("#")))))


_TABLES = {}


def table(name):
    if name not in _TABLES:
        text, source = experiment_rows(name)
        rows = parse(text)
        cols = bench.table_columns((3, 3, 3))
        pct = {}
        for row_name, col in DET_COLUMN.items():
            counts = {bench.vec_label(c): 0 for c in cols}
            for r in rows:
                counts[r[col]] += 1
            pct[row_name] = {c: 100 * n / len(rows) for c, n in counts.items()}
        _TABLES[name] = (pct, len(rows), source)
    return _TABLES[name]


def deviations(name, rows):
    pct, _, _ = table(name)
    worst = (0.0, None)
    for r in rows:
        for c, ref in zip(PUBLISHED_COLUMNS, PUBLISHED[name][r]):
            dev = abs(pct[r][bench.vec_label(c)] - ref)
            if dev > worst[0]:
                worst = (dev, f"{r} {bench.vec_label(c)}: {pct[r][bench.vec_label(c)]:.1f} vs {ref}")
    return worst


def fmt_row(pct_row):
    return " ".join(f"{c}={x:.1f}" for c, x in pct_row.items())


@pytest.mark.slow
def test_table1_cmc_row():
    pct, n, source = table("table1")
    dev, where = deviations("table1", ["cmc-system"])
    check("3a table1 cmc-system row within 5pp", dev <= 5.0,
          f"{n} samples ({source}); {fmt_row(pct['cmc-system'])}; worst {dev:.1f}pp ({where})")


@pytest.mark.slow
@pytest.mark.parametrize("name", ["table1", "table2"])
def test_optimizer_rows(name):
    pct, n, source = table(name)
    dev, where = deviations(name, OPTIMIZER_ROWS)
    check(f"3b {name} optimizer-dependent rows within 10pp", dev <= 10.0,
          f"{n} samples ({source}); worst {dev:.1f}pp ({where})")


@pytest.mark.slow
@pytest.mark.parametrize("name", ["table1", "table2"])
def test_combined_dominance(name):
    rows = parse(experiment_rows(name)[0])
    nontrivial = {r: sum(row[DET_COLUMN[r]] != "111" for row in rows)
                  for r in ("cmc-system", "product-witness", bench.COMBINED_ROW)}
    ok = all(nontrivial[bench.COMBINED_ROW] >= nontrivial[r] for r in ("cmc-system", "product-witness"))
    check(f"3c {name} combined row dominates its constituents", ok, f"nontrivial detections {nontrivial}")


@pytest.mark.slow
def test_fig2_win_rate():
    text, source = experiment_rows("fig2")
    rows = parse(text)
    wins = {}
    for r in rows:
        wins[r["winner"]] = wins.get(r["winner"], 0) + 1
    rate = wins.get("cmc", 0) / len(rows)
    check("3d fig2 cmc-system wins on at least 85% of samples", rate >= FIG2_RATE,
          f"{len(rows)} samples ({source}); win rate {rate:.4f}; outcomes {dict(sorted(wins.items()))}")


@pytest.mark.slow
def test_never_detected_column():
    pct, n, source = table("table2")
    hits = {r: pct[r]["331"] for r in DET_COLUMN}
    check("3e table2 (331) never detected", all(x == 0 for x in hits.values()),
          f"{n} samples ({source}); percentages {hits}")


@pytest.mark.slow
def test_table2_witness_detects_ghz_vector():
    pct, n, source = table("table2")
    x = pct["product-witness"]["333"]
    check("3f table2 product-witness detects (333) on at least 25%", x >= 25.0, f"{n} samples ({source}); {x:.1f}%")


# -- 4. non-reproducible items ------------------------------------------------------------------


def test_non_reproducibility_substitutes():
    # the embedding layout and the published C_GM values are replaced by the
    # feature CSV and the soundness of the C_GM lower bound
    rec = bench.fig2_sample(bench.ExperimentConfig("fig2", samples=1, dims=(2, 3, 4)), 0)
    row = dict(zip(bench.CSV_FIELDS, rec.row()))
    features = ["f1", "f2", "f3", "W", "fidelity", "B1", "B2", "B3", "cgm", "cgm_gt_0.8", "winner"]
    missing = [k for k in features if row[k] == ""]
    rng = sample_rng(88, 0)
    C = default_pair_sets((2, 3, 4))[-1]
    worst = -np.inf
    for psi in low_rank_states((2, 3, 4), rng, 300):
        worst = max(worst, gm_concurrence_lower_bound(psi.density(), C) - pure_linear_entropies(psi.density()).min())
    check("4 feature CSV and C_GM lower-bound soundness", not missing and worst <= 1e-9,
          f"missing features {missing or 'none'}; max(C_GM bound - min linear entropy) = {worst:.2e}"
          " on 300 pure states")
