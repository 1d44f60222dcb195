from __future__ import annotations

import re
import warnings
from contextlib import contextmanager

import pytest

from bpsched.errors import CountMismatch, ParseError
from bpsched.generate import generate, j30_config, write_mmlib, write_sm
from bpsched.model import validate_instance
from bpsched.parser import ParseWarning, SampleSpec, load_manifest, parse_file, parse_mm, parse_sm, read_raw


@contextmanager
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ParseWarning)
        yield


def test_j30_fixture(j30_path):
    inst = parse_file(j30_path)
    assert len(inst.activities) == 32
    assert inst.horizon == 158
    assert inst.single_mode and inst.n_resources == 4
    for key in ((1, 1), (1, 32)):
        mode = inst.activities[key].modes[0]
        assert mode.duration == 0 and not any(mode.demands)
    assert all(r.fixed for r in inst.resources)
    assert inst.objective.kind == "makespan" and inst.objective.sink == (1, 32)


def test_truncated_requests(j30_path):
    text = j30_path.read_text()
    lines = text.splitlines()
    i = next(k for k, ln in enumerate(lines) if "REQUESTS/DURATIONS" in ln)
    cut = "\n".join(lines[: i + 10] + lines[i + 20 :])
    with pytest.raises(CountMismatch):
        parse_sm(cut)


def test_bad_row_reports_line(j30_path):
    lines = j30_path.read_text().splitlines()
    i = next(k for k, ln in enumerate(lines) if "PRECEDENCE RELATIONS" in ln)
    lines[i + 2] = "   1"
    with pytest.raises(ParseError, match="line"):
        parse_sm("\n".join(lines))


def test_multimode_fixture(mm_path):
    with pytest.warns(ParseWarning, match="nonrenewable dropped"):
        inst = parse_file(mm_path)
    three = [a for a in inst.activities.values() if len(a.modes) == 3]
    assert three
    assert len({m.duration for m in three[0].modes}) >= 2
    assert validate_instance(inst).ok
    assert inst.n_resources == 2


def test_renewable_demands_survive_drop(mm_path):
    raw, data = read_raw(mm_path.read_text())
    with pytest.warns(ParseWarning):
        inst = parse_mm(mm_path.read_text())
    assert data["n_dropped"] == 2
    assert all(len(m.demands) == inst.n_resources for a in inst.activities.values() for m in a.modes)


def test_zero_duration_nondummy_mode_accepted(mm_path):
    text = mm_path.read_text()
    lines = text.splitlines()
    i = next(k for k, ln in enumerate(lines) if "REQUESTS/DURATIONS" in ln)
    row = i + 4  # job 2, first mode
    fields = lines[row].split()
    fields[2] = "0"
    lines[row] = "  ".join(fields)
    with pytest.warns(ParseWarning):
        inst = parse_mm("\n".join(lines))
    assert inst.activities[(1, 2)].modes[0].duration == 0
    assert validate_instance(inst).ok


def test_counts_match_header(j30_path, mm_path):
    for path in (j30_path, mm_path):
        raw, _ = read_raw(path.read_text())
        with _quiet():
            inst = parse_file(path)
        assert len(inst.activities) == raw.header["jobs"]


def test_parse_is_pure(j30_path):
    text = j30_path.read_text()
    assert parse_sm(text, "a") == parse_sm(text, "a")


def test_generated_roundtrip():
    raw = generate(j30_config(1), seed=3)
    inst = parse_sm(write_sm(raw, "g"), "g")
    assert len(inst.activities) == raw.n_jobs
    with _quiet():
        mm = parse_mm(write_mmlib(raw), "g")
    assert len(mm.activities) == len(inst.activities)


def test_manifest_first_k(tmp_path, j30_path):
    text = j30_path.read_text()
    for i in range(12):
        (tmp_path / f"x{i:02d}.sm").write_text(text)
    man = load_manifest(tmp_path, "first:5")
    assert [n for n, _ in man.instances] == [f"x{i:02d}" for i in range(5)]


def test_manifest_random_is_deterministic(tmp_path, j30_path):
    text = j30_path.read_text()
    for i in range(30):
        (tmp_path / f"x{i:02d}.sm").write_text(text)
    a = load_manifest(tmp_path, "random:7:7")
    b = load_manifest(tmp_path, SampleSpec("random", 7, 7))
    assert [n for n, _ in a.instances] == [n for n, _ in b.instances]
    assert a.sample.seed == 7
    names = [n for n, _ in a.instances]
    assert names == sorted(names)


def test_manifest_collects_bad_files(tmp_path, j30_path):
    text = j30_path.read_text()
    for i in range(9):
        (tmp_path / f"x{i}.sm").write_text(text)
    (tmp_path / "bad.sm").write_bytes(b"\xff\xfe garbage")
    man = load_manifest(tmp_path)
    assert len(man.instances) == 9 and len(man.errors) == 1
    assert man.errors[0][0] == "bad.sm"


def test_horizon_rules(j30_path):
    base = parse_file(j30_path)
    assert parse_file(j30_path, "sum-max").horizon == sum(a.modes[0].duration for a in base.activities.values())
    h = parse_file(j30_path, "heuristic").horizon
    assert h < base.horizon
    assert parse_file(j30_path, 77).horizon == 77
    with pytest.raises(ValueError):
        parse_file(j30_path, "bogus")


def test_bad_sample_spec():
    with pytest.raises(ValueError, match=re.escape("random:k:seed")):
        SampleSpec.parse("sometimes")
