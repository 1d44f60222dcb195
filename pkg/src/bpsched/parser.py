"""Readers for PSPLIB single-mode (.sm) and PSPLIB/MMLIB multi-mode (.mm) files."""
from __future__ import annotations

import random
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import CountMismatch, ParseError
from .model import Activity, Instance, Mode, ObjectiveSpec, Project, Resource, schedule_span, serial_schedule


class ParseWarning(UserWarning):
    pass


_STAR = re.compile(r"^\s*\*{5,}\s*$")
_SECTIONS = {
    "precedence": re.compile(r"PRECEDENCE\s+RELATIONS", re.I),
    "requests": re.compile(r"REQUESTS\s*/\s*DURATIONS", re.I),
    "availabilities": re.compile(r"RESOURCE\s*AVAILABILITIES", re.I),
    "project": re.compile(r"PROJECT\s+INFORMATION", re.I),
}


@dataclass
class RawInstanceFile:
    source: str
    dialect: str  # "sm" | "mm"
    header: dict[str, int]
    sections: dict[str, list[tuple[int, str]]]  # name -> [(line number, text)]


def _split(text: str, source: str = "<text>") -> RawInstanceFile:
    lines = text.splitlines()
    header: dict[str, int] = {}
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for no, line in enumerate(lines, 1):
        if _STAR.match(line):
            current = None
            continue
        hit = next((name for name, rx in _SECTIONS.items() if rx.search(line)), None)
        if hit is not None:
            current = hit
            sections[current] = []
            continue
        if current is not None:
            if line.strip():
                sections[current].append((no, line))
            continue
        m = re.match(r"\s*jobs\b.*?:\s*(\d+)", line, re.I)
        if m:
            header["jobs"] = int(m.group(1))
            continue
        m = re.match(r"\s*projects\s*:\s*(\d+)", line, re.I)
        if m:
            header["projects"] = int(m.group(1))
            continue
        m = re.match(r"\s*horizon\s*:\s*(\d+)", line, re.I)
        if m:
            header["horizon"] = int(m.group(1))
            continue
        m = re.match(r"\s*-?\s*(renewable|nonrenewable|doubly constrained)\s*:\s*(\d+)", line, re.I)
        if m:
            header[m.group(1).lower()] = int(m.group(2))
    for name in ("precedence", "requests", "availabilities"):
        if name not in sections:
            raise ParseError(f"missing {name} section", section=name)
    if "jobs" not in header:
        raise ParseError("missing jobs count in header", section="header")
    return RawInstanceFile(source, "", header, sections)


def _ints(line: str, no: int, section: str) -> list[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError:
        raise ParseError(f"non-integer token in {line.strip()!r}", line=no, section=section) from None


def _is_table_header(line: str) -> bool:
    s = line.strip()
    return s.startswith("-") or s.lower().startswith("jobnr") or s[0].isalpha()


def read_raw(text: str, source: str = "<text>") -> tuple[RawInstanceFile, dict]:
    raw = _split(text, source)
    n_jobs = raw.header["jobs"]
    n_ren = raw.header.get("renewable")
    n_non = raw.header.get("nonrenewable", 0)
    n_dbl = raw.header.get("doubly constrained", 0)

    # resource names from the availability table decide the layout when the header is silent
    avail_lines = raw.sections["availabilities"]
    names_line = next((ln for ln in avail_lines if re.search(r"[A-Za-z]", ln[1])), None)
    values_line = next((ln for ln in avail_lines if not re.search(r"[A-Za-z]", ln[1])), None)
    if values_line is None:
        raise CountMismatch("no availability values", section="availabilities")
    capacities = _ints(values_line[1], values_line[0], "availabilities")
    kinds: list[str] = []
    if names_line is not None:
        kinds = [tok[0].upper() for tok in re.findall(r"([RND])\s*\d+", names_line[1])]
    if n_ren is None:
        n_ren = kinds.count("R") if kinds else len(capacities)
        n_non = kinds.count("N")
        n_dbl = kinds.count("D")
    n_res = n_ren + n_non + n_dbl
    if len(capacities) != n_res:
        raise CountMismatch(
            f"{len(capacities)} availabilities for {n_res} declared resources", line=values_line[0], section="availabilities"
        )

    succ: dict[int, list[int]] = {}
    n_modes: dict[int, int] = {}
    for no, line in raw.sections["precedence"]:
        if _is_table_header(line):
            continue
        vals = _ints(line, no, "precedence")
        if len(vals) < 3:
            raise ParseError("precedence row needs job, #modes, #successors", line=no, section="precedence")
        job, nm, ns = vals[:3]
        if len(vals) - 3 != ns:
            raise CountMismatch(f"job {job}: {ns} successors declared, {len(vals) - 3} listed", line=no, section="precedence")
        succ[job] = vals[3:]
        n_modes[job] = nm
    if len(succ) != n_jobs:
        raise CountMismatch(f"{len(succ)} precedence rows for {n_jobs} jobs", section="precedence")

    modes: dict[int, list[tuple[int, list[int]]]] = {}
    job = None
    for no, line in raw.sections["requests"]:
        if _is_table_header(line):
            continue
        vals = _ints(line, no, "requests")
        if len(vals) == 3 + n_res:
            job = vals[0]
            modes.setdefault(job, []).append((vals[2], vals[3:]))
        elif len(vals) == 2 + n_res and job is not None:
            modes[job].append((vals[1], vals[2:]))
        else:
            raise ParseError(f"request row has {len(vals)} fields, expected {3 + n_res}", line=no, section="requests")
    if len(modes) != n_jobs:
        raise CountMismatch(f"{len(modes)} request blocks for {n_jobs} jobs", section="requests")
    for j, ms in modes.items():
        if j not in n_modes:
            raise ParseError(f"job {j} has requests but no precedence row", section="requests")
        if len(ms) != n_modes[j]:
            raise CountMismatch(f"job {j}: {n_modes[j]} modes declared, {len(ms)} listed", section="requests")
    raw.dialect = "mm" if max(n_modes.values()) > 1 or n_non or "mm" in source[-3:] else "sm"
    data = {
        "succ": succ,
        "modes": modes,
        "capacities": capacities,
        "n_ren": n_ren,
        "n_dropped": n_non + n_dbl,
    }
    return raw, data


def _build(raw: RawInstanceFile, data: dict, name: str) -> Instance:
    n_ren = data["n_ren"]
    if data["n_dropped"]:
        warnings.warn(f"{name}: {data['n_dropped']} nonrenewable dropped", ParseWarning, stacklevel=3)
    jobs = sorted(data["modes"])
    acts = tuple(
        Activity((1, j), tuple(Mode(d, tuple(r[:n_ren])) for d, r in data["modes"][j])) for j in jobs
    )
    edges = tuple(((1, j), (1, s)) for j in jobs for s in data["succ"][j])
    for (_, a), (_, b) in edges:
        if b not in data["modes"]:
            raise ParseError(f"successor {b} of job {a} is not a job", section="precedence")
    resources = tuple(Resource(f"R{k + 1}", c, c) for k, c in enumerate(data["capacities"][:n_ren]))
    sinks = [j for j in jobs if not data["succ"][j]]
    sink = (1, max(sinks)) if sinks else (1, jobs[-1])
    horizon = raw.header.get("horizon") or sum(max(d for d, _ in data["modes"][j]) for j in jobs)
    return Instance((Project(1, acts, edges),), resources, horizon, ObjectiveSpec("makespan", sink=sink), name)


def parse_sm(text: str, name: str = "") -> Instance:
    """Parse a PSPLIB single-mode file. Dummy source/sink jobs are kept."""
    raw, data = read_raw(text, name or "<sm>")
    if any(len(ms) > 1 for ms in data["modes"].values()):
        raise ParseError("multi-mode job in a single-mode file", section="requests")
    return _build(raw, data, name)


def parse_mm(text: str, name: str = "") -> Instance:
    """Parse a PSPLIB or MMLIB multi-mode file; nonrenewable resources are dropped."""
    raw, data = read_raw(text, name or "<mm>")
    return _build(raw, data, name)


# ---------------------------------------------------------------- horizons and files


def resolve_horizon(inst: Instance, horizon: str | int = "file") -> Instance:
    """Apply a horizon rule.

    ``"file"`` keeps the parsed value, ``"sum-max"`` uses the sum of the longest
    mode durations, ``"heuristic"`` the last occupied period of a serial
    schedule-generation pass, and an integer is used as given.
    """
    if horizon == "file":
        return inst
    if horizon == "sum-max":
        T = sum(max(m.duration for m in a.modes) for a in inst.activities.values())
    elif horizon == "heuristic":
        T = schedule_span(inst, serial_schedule(inst))
    elif isinstance(horizon, int) or (isinstance(horizon, str) and horizon.isdigit()):
        T = int(horizon)
    else:
        raise ValueError(f"unknown horizon rule {horizon!r}")
    return inst.with_horizon(max(int(T), 1))


def parse_file(path: str | Path, horizon: str | int = "file") -> Instance:
    path = Path(path)
    text = path.read_text()
    inst = parse_sm(text, path.stem) if path.suffix == ".sm" else parse_mm(text, path.stem)
    return resolve_horizon(inst, horizon)


@dataclass(frozen=True)
class SampleSpec:
    kind: str = "all"  # all | first | random
    k: int = 0
    seed: int = 0

    @classmethod
    def parse(cls, text: str | None) -> "SampleSpec":
        if not text or text == "all":
            return cls()
        parts = text.split(":")
        if parts[0] == "first" and len(parts) == 2:
            return cls("first", int(parts[1]))
        if parts[0] == "random" and len(parts) in (2, 3):
            return cls("random", int(parts[1]), int(parts[2]) if len(parts) == 3 else 0)
        raise ValueError(f"bad sample spec {text!r}; use all, first:k or random:k:seed")

    def select(self, names: list[str]) -> list[str]:
        names = sorted(names)
        if self.kind == "first":
            return names[: self.k]
        if self.kind == "random":
            return sorted(random.Random(self.seed).sample(names, min(self.k, len(names))))
        return names


@dataclass
class Manifest:
    instances: list[tuple[str, Instance]] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)
    sample: SampleSpec = SampleSpec()


def load_manifest(
    directory: str | Path,
    sample: SampleSpec | str | None = None,
    horizon: str | int = "file",
    suffixes: Iterable[str] = (".sm", ".mm"),
) -> Manifest:
    """Load a sampled, lexicographically ordered set of instance files.

    Unreadable or malformed files are recorded in ``errors`` and skipped.
    """
    spec = sample if isinstance(sample, SampleSpec) else SampleSpec.parse(sample)
    directory = Path(directory)
    files = {p.name: p for p in directory.iterdir() if p.suffix in tuple(suffixes)} if directory.is_dir() else {}
    out = Manifest(sample=spec)
    for name in spec.select(list(files)):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ParseWarning)
                out.instances.append((Path(name).stem, parse_file(files[name], horizon)))
        except (OSError, UnicodeDecodeError, ParseError) as exc:
            out.errors.append((name, f"{type(exc).__name__}: {exc}"))
    return out
