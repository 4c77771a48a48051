import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ncdev import devine as dv
from ncdev import serialization as ser
from ncdev.cli import main
from ncdev.condexp import Filtration, Martingale, SubalgebraSpec
from ncdev.ensembles import MODELS, EnsembleSpec, generate
from ncdev.ergo import ShiftSystem
from ncdev.errors import ConfigInvalid
from ncdev.reports import read_jsonl
from ncdev.specalg import TracialAlgebra
from ncdev.suite import SuiteConfig, _gated, run_suite, tail_curve

from conftest import op, rand_matrix

seeds = st.integers(0, 2**32 - 1)


# serialization ---------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 6))
def test_operator_round_trip(seed, d):
    x = op(rand_matrix(np.random.default_rng(seed), d) * 1e3 ** (seed % 5 - 2))
    y = ser.operator_from_text(ser.operator_to_text(x))
    assert np.array_equal(x.mat, y.mat) and y.alg.factors == x.alg.factors


@pytest.mark.parametrize("model", MODELS)
def test_martingale_round_trip_and_determinism(model):
    spec = EnsembleSpec(model, {"n": 3})
    a, b = generate(spec, 11), generate(spec, 11)
    ta = ser.martingale_to_text(a)
    assert ta == ser.martingale_to_text(b)
    back = ser.martingale_from_text(ta)
    assert ser.martingale_to_text(back) == ta


def test_filtration_and_local_round_trip():
    alg = TracialAlgebra.flat(4)
    f = Filtration(alg, (SubalgebraSpec.block_diagonal([[0, 1], [2, 3]]), SubalgebraSpec.full()))
    assert ser.filtration_to_doc(ser.filtration_from_doc(ser.filtration_to_doc(f))) == ser.filtration_to_doc(f)
    sys = ShiftSystem()
    x = sys.random_element(np.random.default_rng(0), -1, 2)
    y = ser.local_from_text(ser.local_to_text(x))
    assert y.support == x.support and np.array_equal(y.block, x.block)
    assert ser.shift_system_from_doc(ser.shift_system_to_doc(sys)) == sys


def test_bad_documents():
    with pytest.raises(ConfigInvalid):
        ser.operator_from_doc({"dim": 2, "factors": [3], "entries": []})
    with pytest.raises(ConfigInvalid):
        ser.operator_from_doc({"dim": 2, "entries": [[1, 0]]})
    with pytest.raises(ConfigInvalid):
        ser.subalgebra_from_doc({"kind": "nope"})


# configuration and suites --------------------------------------------------------

def _small(tmp_path, **kw):
    doc = dict(dims=[4], n_steps=[2], trials=1, output_dir=str(tmp_path), seed=5)
    doc.update(kw)
    return SuiteConfig.from_dict(doc)


@pytest.mark.parametrize("bad", [{"dims": []}, {"trials": 0}, {"tol": 0.0}, {"suites": ["x"]},
                                 {"alpha_grid": [1.0]}, {"p_grid": [0.5]}, {"nope": 1}])
def test_config_invalid(bad):
    with pytest.raises(ConfigInvalid):
        SuiteConfig.from_dict(bad)


def test_empty_suites(tmp_path):
    code, summary, reports = run_suite(_small(tmp_path, suites=[]))
    assert code == 0 and summary["total"] == 0 and summary["by_id"] == {} and reports == []


def test_default_config_lists_every_id(tmp_path):
    cfg = SuiteConfig(output_dir=str(tmp_path), trials=1)
    code, summary, _ = run_suite(cfg)
    assert code == 0
    expected = {"GT", "CE_PROPERTIES", "CUCULESCU", "DILATION", "AZUMA", "MAX_AZUMA", "IND_LDI", "CRAMER_LDI",
                "MOD_CRAMER_LDI", "LP_LDI", "LPSI_EQUIV", "ERGODIC_RATE"}
    assert set(summary["by_id"]) == expected
    for row in summary["by_id"].values():
        assert row["holds"] + row["skipped"] == row["total"] and row["violations"] == 0
    on_disk = json.loads((tmp_path / "summary.json").read_text())
    assert on_disk["total"] == summary["total"]
    assert len(read_jsonl(tmp_path / "reports.jsonl")) == summary["total"]
    for iid in expected:
        assert (tmp_path / f"{iid}.csv").exists()


def test_suite_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_suite(_small(a, suites=["specalg", "devine"]))
    run_suite(_small(b, suites=["specalg", "devine"]))
    for name in ("reports.jsonl", "summary.json", "AZUMA.csv", "GT.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_precondition_failure_is_skipped():
    m = generate(EnsembleSpec("BOUNDED_SELF_ADJOINT", {"d": 4, "n": 2}), 0)
    rep = _gated(lambda: dv.verify_modified_cramer_ldi(m, 1.0, 1.5), "MOD_CRAMER_LDI", {"alpha": 1.5}, 0)
    assert rep.skipped.startswith("AlphaOutOfRange") and not rep.holds


# tail curves -----------------------------------------------------------------

def test_tail_curve_zero_and_binomial():
    filt = Filtration.tensor(TracialAlgebra.tensor_power(2, 3))
    zero = Martingale.from_differences(filt, [filt.alg.zero()] * 3)
    assert all(row[1] == 0 for row in tail_curve(zero, [0.5, 1.0, 2.0]))
    n = 10
    m = generate(EnsembleSpec("DIAGONAL_CLASSICAL", {"n": n}), 0)
    grid = np.linspace(0.1, 12.0, 40)
    rows = tail_curve(m, grid)
    k = np.arange(n + 1)
    pmf = stats.binom.pmf(k, n, 0.5)
    for r, row in zip(grid, rows):
        assert abs(row[1] - pmf[np.abs(2 * k - n) > r].sum()) <= 1e-12
    assert rows[-1][1] == 0.0  # beyond ||x_n|| = 10


# CLI -------------------------------------------------------------------------

def test_cli_verify_and_exit_codes(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["verify", "--suite", "specalg,condexp", "--out", str(out), "--seed", "2"]) == 0
    assert (out / "summary.json").exists()
    assert main(["verify", "--suite", "bogus", "--out", str(out)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert main(["verify", "--config", str(bad)]) == 2
    assert main(["verify", "--config", str(tmp_path / "missing.json")]) == 3
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["verify", "--suite", "specalg", "--out", str(blocker / "sub")]) == 3
    assert main(["nonsense"]) == 2


def test_cli_gen_tail_gordin(tmp_path):
    assert main(["gen", "--model", "SITE_TENSOR", "--params", '{"n": 2}', "--out", str(tmp_path), "--seed", "4"]) == 0
    path = tmp_path / "site_tensor-4.json"
    m = ser.martingale_from_text(path.read_text())
    assert m.n == 2
    assert main(["gen", "--params", "[1]", "--out", str(tmp_path)]) == 2
    assert main(["tail", "--model", "DIAGONAL_CLASSICAL", "--params", '{"n": 6}', "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "tail-diagonal_classical-0.csv").read_text().splitlines()
    assert lines[0].split(",")[:2] == ["r", "lhs"] and len(lines) == 31
    assert main(["gordin", "--width", "2", "--out", str(tmp_path), "--seed", "1"]) == 0
    doc = json.loads((tmp_path / "gordin-1.json").read_text())
    assert doc["residual"] <= 1e-8 and doc["difference_violation"] <= 1e-9
