import csv
import io
import math

import numpy as np
import pytest

from snvec import bench
from snvec.bases import OptimizerConfig
from snvec.lattice import elementwise_leq
from snvec.qudit import DensityMatrix
from snvec.states import ghz_state

FAST = OptimizerConfig(max_evals=60, restarts=1)


def cfg(experiment, **kw):
    kw.setdefault("samples", 6)
    kw.setdefault("optimizer", FAST)
    kw.setdefault("entropy_iters", 5)
    kw.setdefault("dims", bench.default_dims(experiment))
    return bench.ExperimentConfig(experiment, **kw)


def parse(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(experiment="table3"), dict(experiment="table1", samples=0),
                                    dict(experiment="table1", workers=0), dict(experiment="table2", force_p=1.5),
                                    dict(experiment="table1", criteria=("magic",)),
                                    dict(experiment="table1", criteria=()),
                                    dict(experiment="table1", entropy_iters=-1),
                                    dict(experiment="fig2", fig2_target=())])
    def test_rejected(self, kw):
        with pytest.raises(bench.ConfigError):
            bench.ExperimentConfig(**kw)

    def test_runner_checks(self):
        with pytest.raises(bench.ConfigError):
            bench.run_table1(cfg("table1", dims=(2, 3, 4)))
        with pytest.raises(bench.ConfigError):
            bench.run_table1(cfg("table1", force_p=0.5))
        with pytest.raises(bench.ConfigError):
            bench.run_table2(cfg("table1"))
        with pytest.raises(bench.ConfigError):
            bench.run_fig2(cfg("fig2", dims=(3, 3, 3)))
        with pytest.raises(bench.ConfigError):
            bench.run_fig2(cfg("fig2", fig2_target=((5, 5, 5),)))


class TestFormatting:
    def test_fmt(self):
        assert bench.fmt(None) == "" and bench.fmt(math.nan) == ""
        assert bench.fmt(1 / 3) == "0.333333"
        assert bench.fmt(True) == "1" and bench.fmt(np.int64(7)) == "7"

    def test_labels(self):
        assert bench.vec_label((4, 3, 2)) == "432"
        assert bench.vec_label((10, 2)) == "10-2"
        assert bench.vec_label(None) == ""

    def test_columns(self):
        cols = bench.table_columns((3, 3, 3))
        assert cols[0] == (1, 1, 1) and cols[-1] == (3, 3, 1) and len(cols) == 7


@pytest.fixture(scope="module")
def table2():
    c = cfg("table2", samples=8)
    summary, records = bench.run_table(c)
    return c, summary, records


class TestTables:
    def test_rows_sum_to_100(self, table2):
        _, summary, _ = table2
        assert set(summary.counts) == set(bench.TABLE_ROWS)
        for row in summary.percentages().values():
            assert abs(sum(row.values()) - 100) < 0.1

    def test_combined_dominates(self, table2):
        _, _, records = table2
        for rec in records:
            comb = rec.detected[bench.COMBINED_ROW]
            assert elementwise_leq(rec.detected["cmc-system"], comb)
            assert elementwise_leq(rec.detected["product-witness"], comb)

    def test_csv_layout(self, table2):
        c, _, records = table2
        text = bench.records_csv(records, c)
        lines = text.splitlines()
        assert lines[0].startswith("# config: ") and lines[1] == f"# code: {bench.code_digest()}"
        rows = parse(text)
        assert list(rows[0]) == list(bench.CSV_FIELDS)
        assert [r["idx"] for r in rows] == [str(i) for i in range(8)]
        assert all(r["p"] and not r["lambda1"] and not r["c_re[0]"] for r in rows)

    def test_workers_identical(self, table2):
        c, _, records = table2
        _, again = bench.run_table(bench.ExperimentConfig(**{**c.__dict__, "workers": 2}))
        assert bench.records_csv(again, c) == bench.records_csv(records, c)

    def test_single_sample(self):
        summary, _ = bench.run_table(cfg("table1", samples=1))
        for row in summary.percentages().values():
            assert sorted(row.values())[-1] == 100.0 and sum(row.values()) == 100.0

    def test_forced_pure_ghz(self):
        summary, records = bench.run_table(cfg("table2", samples=2, force_p=1.0))
        for r in bench.TABLE_ROWS:
            assert summary.percent(r, (3, 3, 3)) == 100.0
        assert all(rec.p == 1.0 for rec in records)

    def test_table1_lambda(self):
        _, records = bench.run_table(cfg("table1", samples=3))
        assert all(0 <= rec.lambda1 <= 1 for rec in records)
        assert all(rec.detected[r] != bench.NEVER_DETECTED for rec in records for r in bench.TABLE_ROWS)

    def test_summary_text_json(self, table2):
        _, summary, _ = table2
        text = summary.format_text()
        assert "331 (raw)" in text and bench.COMBINED_ROW in text
        js = summary.to_json()
        assert js["columns"][-1] == "331" and js["samples"] == 8


class TestFig2:
    def test_flat_thresholds(self):
        rec = bench.fig2_sample(cfg("fig2"), 0, c=np.full(4, 0.5))
        assert abs(rec.pstar_fid - 17 / 23) < 1e-3
        assert rec.cert_cmc == (4, 3, 2) and rec.cert_fid == (4, 3, 2)
        assert rec.winner in ("cmc", "fidelity", "tie")

    def test_product_undetectable(self):
        rec = bench.fig2_sample(cfg("fig2"), 0, c=np.array([1, 0, 0, 0]))
        assert math.isnan(rec.pstar_cmc) and math.isnan(rec.pstar_fid)
        assert rec.winner == "none"
        row = dict(zip(bench.CSV_FIELDS, rec.row()))
        assert row["pstar_cmc"] == "" and row["winner"] == "none"

    def test_critical_p(self):
        assert bench.critical_p(lambda p: p > 0.3) == pytest.approx(0.3, abs=1e-4)
        assert math.isnan(bench.critical_p(lambda p: False))
        assert bench.critical_p(lambda p: True) == 0.0

    def test_winner(self):
        assert bench.winner(0.5, 0.6) == "cmc"
        assert bench.winner(0.6, 0.5) == "fidelity"
        assert bench.winner(0.5, 0.5 + 1e-5) == "tie"
        assert bench.winner(math.nan, 0.5) == "fidelity"
        assert bench.winner(0.5, math.nan) == "cmc"

    def test_run(self):
        c = cfg("fig2", samples=4)
        summary, records = bench.run_fig2(c)
        assert sum(summary.wins.values()) == 4
        assert 0 <= summary.cmc_win_rate <= 1
        assert any(line.startswith("# threshold protocol") for line in bench.metadata_lines(c))
        rows = parse(bench.records_csv(records, c))
        assert all(r["c_re[0]"] and not r["p"] for r in rows)

    def test_alternative_target(self):
        c = cfg("fig2", fig2_target=((2, 2, 1),))
        rec = bench.fig2_sample(c, 0, c=np.full(4, 0.5))
        base = bench.fig2_sample(cfg("fig2"), 0, c=np.full(4, 0.5))
        assert rec.pstar_cmc <= base.pstar_cmc and rec.pstar_fid <= base.pstar_fid


class TestCertify:
    def test_ghz(self, ghz3):
        out = bench.certify(ghz3, cfg("certify", dims=(3, 3, 3)))
        assert out["certified"] == [3, 3, 3]
        assert {c["criterion"] for c in out["criteria"]} >= {"cmc-system", "fidelity"}

    def test_maximally_mixed(self):
        out = bench.certify(DensityMatrix.maximally_mixed((3, 3, 3)), cfg("certify", dims=(3, 3, 3)))
        assert out["certified"] == [1, 1, 1]

    def test_psi432(self, psi_flat):
        c = cfg("certify", dims=(2, 3, 4), criteria=("cmc-system", "fidelity"))
        assert bench.certify(psi_flat, c)["certified"] == [4, 3, 2]

    def test_psi432_unsupported(self, psi_flat):
        c = cfg("certify", dims=(2, 3, 4), criteria=("corrtensor",))
        with pytest.raises(bench.ConfigError):
            bench.certify(psi_flat, c)

    def test_default_target(self, psi_flat):
        assert bench.default_target(psi_flat) is psi_flat
        rho = DensityMatrix.maximally_mixed((2, 3, 4))
        assert bench.default_target(rho) is None
        assert np.allclose(bench.default_target(DensityMatrix.maximally_mixed((3, 3, 3))).amplitudes,
                           ghz_state(3, 3).amplitudes)
