from __future__ import annotations

import csv
import json
import math
import shutil
import statistics

import pytest
from conftest import FIXTURES, ROOT

from bpsched.bench import (
    FORMULATIONS,
    BenchConfig,
    BenchRow,
    GapRow,
    cmd_bounds,
    cmd_gap,
    cmd_trace,
    cmd_verify,
    gap_distribution,
    improvement,
    summarize,
)
from bpsched.cli import main
from bpsched.parser import parse_file


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("bench")
    shutil.copy(FIXTURES / "j301_1.sm", d)
    shutil.copy(ROOT / "data" / "j30" / "j3010_1.sm", d)
    return d


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _stable(rows):
    return [{k: v for k, v in r.items() if k != "runtime"} for r in rows]


def test_improvement():
    assert improvement(110.0, 100.0) == pytest.approx(10.0)
    assert improvement(-90.0, -100.0) == pytest.approx(10.0)
    assert improvement(0.0, 0.0) == 0.0
    assert math.isnan(improvement(math.nan, 1.0))


def test_bounds_csv_deterministic(bench_dir, tmp_path):
    cfg = BenchConfig(str(bench_dir), "all", "heuristic")
    rows, summ = cmd_bounds(cfg, tmp_path / "a.csv")
    cmd_bounds(cfg, tmp_path / "b.csv")
    a, b = _read(tmp_path / "a.csv"), _read(tmp_path / "b.csv")
    assert _stable(a) == _stable(b)
    assert list(a[0]) == list(BenchRow.FIELDS)
    assert [r["formulation"] for r in a[:5]] == list(FORMULATIONS)
    assert (tmp_path / "a_summary.csv").exists()
    # chain of bounds on every instance
    for name in {r.instance for r in rows}:
        z = {r.formulation: r.bound for r in rows if r.instance == name}
        assert z["PDT-LP"] <= z["PDDT-LP"] + 1e-6
        assert z["PDT-LP-PrecCut"] == pytest.approx(z["PDDT-LP"], abs=1e-6)
        assert z["LMP"] >= z["PDDT-LP"] - 1e-6


def test_summary_recomputes_from_rows(bench_dir, tmp_path):
    rows, summ = cmd_bounds(BenchConfig(str(bench_dir), "all", "heuristic", formulations=("LMP", "PDDT-LP", "PDT-LP")))
    s = next(x for x in summ if x.formulation == "PDT-LP" and x.baseline == "PDDT-LP")
    vals = [r.improvement_pct_pddt for r in rows if r.formulation == "PDT-LP"]
    assert s.n == len(vals) == 2
    assert (s.min, s.max) == (min(vals), max(vals))
    assert s.avg == pytest.approx(statistics.fmean(vals))
    assert s.std == pytest.approx(statistics.stdev(vals))
    assert summarize(rows) == summ


def test_empty_directory_warns(tmp_path):
    with pytest.warns(RuntimeWarning):
        rows, _ = cmd_bounds(BenchConfig(str(tmp_path), "all"))
    assert rows == []


def test_trace_respects_iteration_limit(tmp_path):
    inst = parse_file(FIXTURES / "j301_1.sm", "heuristic")
    res = cmd_trace(inst, BenchConfig(iteration_limit=5), tmp_path / "t.csv")
    rows = _read(tmp_path / "t.csv")
    assert len(rows) == 5 and res.status == "IterationLimit"
    assert list(rows[0]) == ["iteration", "primal_bound", "dual_bound", "cols_added", "min_redcost", "degenerate_count"]
    primal = [float(r["primal_bound"]) for r in rows]
    assert all(b <= a + 1e-9 for a, b in zip(primal, primal[1:]))


def test_gap_distribution():
    rows = [GapRow(str(i), 0, 0, g, 0, 0, 0, "x") for i, g in enumerate([0.0, 3.0, 12.0, math.inf])]
    assert gap_distribution(rows) == {0: 25.0, 5: 50.0, 10: 50.0, 15: 75.0, 20: 75.0}
    assert all(math.isnan(v) for v in gap_distribution([]).values())


def test_gap_command(bench_dir, tmp_path):
    rows, dist = cmd_gap(BenchConfig(str(bench_dir), "all", "heuristic", budget_nodes=50), 5.0, tmp_path / "g.csv")
    assert [r.instance for r in rows] == sorted(r.instance for r in rows)
    for r in rows:
        assert r.lower <= r.upper + 1e-9 and r.gap_pct >= 0
    assert (tmp_path / "g_distribution.csv").read_text().startswith("threshold_pct,share_pct")
    assert list(dist) == [0, 5, 10, 15, 20]


def test_verify_quick_all_asserted_pass():
    checks = cmd_verify(quick=True)
    failed = [c.name for c in checks if c.asserted and not c.passed]
    assert not failed
    assert any(not c.asserted for c in checks)
    json.loads(checks[0].to_json())


def test_cli_smoke(capsys, tmp_path):
    assert main(["parse", str(FIXTURES / "j301_1.sm")]) == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[0])
    assert out["activities"] == 32 and out["valid"]
    assert main(["colgen", str(FIXTURES / "j301_1.sm"), "--horizon", "heuristic"]) == 0
    assert main(["verify", "--quick"]) == 0
    assert main(["counterexample", "--kind", "usage-branch", "--seed", "21", "--count", "1"]) == 0
    capsys.readouterr()
