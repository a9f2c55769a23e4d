"""Coverage ingestion, diffing, and prompt feedback synthesis.

Canonical report format, one record per line::

    FN <file>:<line> <name> <count>
    BR <file>:<line> <branch_id> <count>

Counts from repeated records (multi-object programs emitting one report
each) are summed. A function or branch is covered when its count is
positive. ``convert_gcov_json`` adapts gcov's JSON intermediate format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .callgraph import CallGraph, CallPath, FunctionRef

BranchSite = tuple[str, int, str]


class CoverageFormatError(ValueError):
    """A coverage report line does not match the canonical format."""


@dataclass
class CoverageReport:
    function_hits: dict[str, int] = field(default_factory=dict)
    branch_hits: dict[BranchSite, int] = field(default_factory=dict)
    function_sites: dict[str, tuple[str, int]] = field(default_factory=dict)

    @property
    def covered_functions(self) -> set[str]:
        return {name for name, count in self.function_hits.items() if count > 0}

    @property
    def taken_branches(self) -> set[BranchSite]:
        return {site for site, count in self.branch_hits.items() if count > 0}

    def merge(self, other: "CoverageReport"):
        for name, count in other.function_hits.items():
            self.function_hits[name] = self.function_hits.get(name, 0) + count
        for site, count in other.branch_hits.items():
            self.branch_hits[site] = self.branch_hits.get(site, 0) + count
        self.function_sites.update(other.function_sites)


@dataclass(frozen=True)
class CoverageDiff:
    new_functions: set[str]
    new_branches: set[BranchSite]

    def __bool__(self) -> bool:
        return bool(self.new_functions or self.new_branches)


def _parse_location(token: str, lineno: int) -> tuple[str, int]:
    file_part, _, line_part = token.rpartition(":")
    if not file_part:
        raise CoverageFormatError(f"line {lineno}: expected <file>:<line>, got {token!r}")
    try:
        return file_part, int(line_part)
    except ValueError as exc:
        raise CoverageFormatError(f"line {lineno}: bad line number in {token!r}") from exc


def parse_report(text: str) -> CoverageReport:
    """Parse the canonical format; counts of duplicate records are summed."""
    report = CoverageReport()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "FN":
            if len(tokens) != 4:
                raise CoverageFormatError(f"line {lineno}: FN takes 3 fields, got {len(tokens) - 1}")
            file_name, def_line = _parse_location(tokens[1], lineno)
            name = tokens[2]
            try:
                count = int(tokens[3])
            except ValueError as exc:
                raise CoverageFormatError(f"line {lineno}: bad count {tokens[3]!r}") from exc
            if count < 0:
                raise CoverageFormatError(f"line {lineno}: negative count")
            report.function_hits[name] = report.function_hits.get(name, 0) + count
            report.function_sites.setdefault(name, (file_name, def_line))
        elif tokens[0] == "BR":
            if len(tokens) != 4:
                raise CoverageFormatError(f"line {lineno}: BR takes 3 fields, got {len(tokens) - 1}")
            file_name, br_line = _parse_location(tokens[1], lineno)
            site = (file_name, br_line, tokens[2])
            try:
                count = int(tokens[3])
            except ValueError as exc:
                raise CoverageFormatError(f"line {lineno}: bad count {tokens[3]!r}") from exc
            if count < 0:
                raise CoverageFormatError(f"line {lineno}: negative count")
            report.branch_hits[site] = report.branch_hits.get(site, 0) + count
        else:
            raise CoverageFormatError(f"line {lineno}: unknown record type {tokens[0]!r}")
    return report


def serialize_report(report: CoverageReport) -> str:
    """Canonical text for a report; parse(serialize(r)) == r."""
    lines = []
    for name in sorted(report.function_hits):
        file_name, def_line = report.function_sites.get(name, ("unknown", 0))
        lines.append(f"FN {file_name}:{def_line} {name} {report.function_hits[name]}")
    for (file_name, br_line, branch_id) in sorted(report.branch_hits):
        lines.append(f"BR {file_name}:{br_line} {branch_id} {report.branch_hits[(file_name, br_line, branch_id)]}")
    return "\n".join(lines) + ("\n" if lines else "")


def diff(current: CoverageReport, baseline: CoverageReport) -> CoverageDiff:
    """Coverage gained by `current` over `baseline`."""
    return CoverageDiff(
        new_functions=current.covered_functions - baseline.covered_functions,
        new_branches=current.taken_branches - baseline.taken_branches,
    )


def covered_path_feedback(report: CoverageReport, paths: list[CallPath]) -> str:
    """Per-path coverage annotations fed back after a failed attempt."""
    if not paths:
        raise ValueError("covered_path_feedback requires at least one path")
    covered = report.covered_functions
    blocks = []
    for i, path in enumerate(paths, start=1):
        lines = [f"Path candidate {i}:"]
        prefix = 0
        counting = True
        for ref in path:
            hit = ref.name in covered
            lines.append(f"{'✓' if hit else '✗'} {ref.location}")
            if counting and hit:
                prefix += 1
            else:
                counting = False
        lines.append(f"Deepest covered prefix: {prefix} of {len(path)} functions.")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def build_branch_table(g: CallGraph, report: CoverageReport) -> dict[str, list[BranchSite]]:
    """Attribute each branch site to the nearest preceding function in its file.

    Uses the graph's definition locations; sites above the first known
    function in a file are dropped.
    """
    by_file: dict[str, list[tuple[int, str]]] = {}
    for ref in g.nodes.values():
        by_file.setdefault(ref.file, []).append((ref.line, ref.name))
    for defs in by_file.values():
        defs.sort()
    table: dict[str, list[BranchSite]] = {name: [] for name in g.nodes}
    for site in sorted(report.branch_hits):
        file_name, br_line, _ = site
        defs = by_file.get(file_name)
        if not defs:
            continue
        owner = None
        for def_line, name in defs:
            if def_line <= br_line:
                owner = name
            else:
                break
        if owner is not None:
            table[owner].append(site)
    return table


def uncovered_branches(
    report: CoverageReport, target: FunctionRef, branch_table: dict[str, list[BranchSite]]
) -> list[BranchSite]:
    """Branch sites of the target with a taken count of zero, file-line order."""
    if target.name not in branch_table:
        raise ValueError(f"unknown target {target.name!r}: no branch table entry")
    return [
        site for site in sorted(branch_table[target.name]) if report.branch_hits.get(site, 0) == 0
    ]


def render_branch_site(site: BranchSite) -> str:
    file_name, line, branch_id = site
    return f"{file_name}:{line} branch {branch_id}"


def convert_gcov_json(text: str) -> str:
    """Adapt `gcov --json-format` output to the canonical report format.

    Reads the whole-file JSON gcov emits (one object with a "files" list;
    each file carries "functions" with start_line/execution_count and
    "lines" whose "branches" have taken counts). Branch ids are the index
    of the branch within its line.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CoverageFormatError(f"not valid gcov JSON: {exc}") from exc
    out = []
    for entry in document.get("files", []):
        file_name = entry.get("file", "unknown")
        for fn in entry.get("functions", []):
            out.append(
                f"FN {file_name}:{int(fn.get('start_line', 0) or 0)} "
                f"{fn['name']} {int(fn.get('execution_count', 0))}"
            )
        for line_entry in entry.get("lines", []):
            line_no = int(line_entry.get("line_number", 0))
            for branch_id, branch in enumerate(line_entry.get("branches", [])):
                out.append(f"BR {file_name}:{line_no} {branch_id} {int(branch.get('count', 0))}")
    return "\n".join(out) + ("\n" if out else "")
