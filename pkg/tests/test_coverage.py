"""Coverage parsing, merging, path feedback, and branch attribution."""

from __future__ import annotations

import json

import pytest

from pilot.callgraph import FunctionRef
from pilot.coverage import (
    CoverageFormatError,
    CoverageReport,
    build_branch_table,
    convert_gcov_json,
    covered_path_feedback,
    diff,
    parse_report,
    render_branch_site,
    serialize_report,
    uncovered_branches,
)

from conftest import make_graph

SAMPLE = """\
# comment line
FN prog.c:10 main 3
FN prog.c:20 helper 0
BR prog.c:12 0 2
BR prog.c:12 1 0

FN util.c:5 parse 1
"""


class TestParseReport:
    def test_basic_records(self):
        report = parse_report(SAMPLE)
        assert report.function_hits == {"main": 3, "helper": 0, "parse": 1}
        assert report.branch_hits == {("prog.c", 12, "0"): 2, ("prog.c", 12, "1"): 0}
        assert report.function_sites["main"] == ("prog.c", 10)

    def test_covered_sets(self):
        report = parse_report(SAMPLE)
        assert report.covered_functions == {"main", "parse"}
        assert report.taken_branches == {("prog.c", 12, "0")}

    def test_duplicate_counts_summed(self):
        report = parse_report("FN a.c:1 f 2\nFN a.c:1 f 3\nBR a.c:2 0 1\nBR a.c:2 0 4\n")
        assert report.function_hits["f"] == 5
        assert report.branch_hits[("a.c", 2, "0")] == 5

    def test_file_names_with_colons_and_paths(self):
        report = parse_report("FN sub/dir/x.c:7 f 1\nFN C:drive.c:3 g 1\n")
        assert report.function_sites["f"] == ("sub/dir/x.c", 7)
        assert report.function_sites["g"] == ("C:drive.c", 3)

    def test_negative_count_rejected(self):
        with pytest.raises(CoverageFormatError, match="negative"):
            parse_report("FN a.c:1 f -1\n")

    def test_unknown_record_rejected(self):
        with pytest.raises(CoverageFormatError, match="unknown record"):
            parse_report("XX a.c:1 f 1\n")

    def test_wrong_arity_rejected(self):
        with pytest.raises(CoverageFormatError, match="FN takes 3"):
            parse_report("FN a.c:1 f\n")
        with pytest.raises(CoverageFormatError, match="BR takes 3"):
            parse_report("BR a.c:1 0 1 extra\n")

    def test_bad_location_rejected(self):
        with pytest.raises(CoverageFormatError, match="expected <file>:<line>"):
            parse_report("FN noline f 1\n")
        with pytest.raises(CoverageFormatError, match="bad line number"):
            parse_report("FN a.c:xx f 1\n")

    def test_round_trip(self):
        report = parse_report(SAMPLE)
        again = parse_report(serialize_report(report))
        assert again.function_hits == report.function_hits
        assert again.branch_hits == report.branch_hits
        assert again.function_sites == report.function_sites

    def test_empty_report(self):
        report = parse_report("")
        assert report.function_hits == {}
        assert serialize_report(report) == ""


class TestMergeAndDiff:
    def test_merge_sums(self):
        a = parse_report("FN a.c:1 f 1\nBR a.c:2 0 1\n")
        b = parse_report("FN a.c:1 f 2\nFN a.c:5 g 1\nBR a.c:2 0 0\n")
        a.merge(b)
        assert a.function_hits == {"f": 3, "g": 1}
        assert a.branch_hits == {("a.c", 2, "0"): 1}

    def test_diff_reports_gains_only(self):
        baseline = parse_report("FN a.c:1 f 1\n")
        current = parse_report("FN a.c:1 f 5\nFN a.c:5 g 1\nBR a.c:2 0 1\n")
        d = diff(current, baseline)
        assert d.new_functions == {"g"}
        assert d.new_branches == {("a.c", 2, "0")}
        assert bool(d)

    def test_empty_diff_is_falsy(self):
        report = parse_report("FN a.c:1 f 1\n")
        assert not diff(report, report)


class TestCoveredPathFeedback:
    def path(self, *names):
        return tuple(FunctionRef(n, "p.c", 10 * (i + 1)) for i, n in enumerate(names))

    def test_marks_and_prefix(self):
        report = parse_report("FN p.c:10 main 1\nFN p.c:20 mid 1\n")
        text = covered_path_feedback(report, [self.path("main", "mid", "leaf")])
        lines = text.splitlines()
        assert lines[0] == "Path candidate 1:"
        assert lines[1] == "✓ main@p.c:10"
        assert lines[2] == "✓ mid@p.c:20"
        assert lines[3] == "✗ leaf@p.c:30"
        assert lines[4] == "Deepest covered prefix: 2 of 3 functions."

    def test_prefix_stops_at_first_gap(self):
        report = parse_report("FN p.c:10 main 1\nFN p.c:30 leaf 1\n")
        text = covered_path_feedback(report, [self.path("main", "mid", "leaf")])
        assert "Deepest covered prefix: 1 of 3 functions." in text
        assert "✓ leaf@p.c:30" in text

    def test_multiple_paths_blocks(self):
        report = CoverageReport()
        text = covered_path_feedback(report, [self.path("a"), self.path("b")])
        assert "Path candidate 1:" in text
        assert "Path candidate 2:" in text
        assert text.count("Deepest covered prefix") == 2

    def test_empty_paths_rejected(self):
        with pytest.raises(ValueError, match="at least one path"):
            covered_path_feedback(CoverageReport(), [])


class TestBranchAttribution:
    def test_sites_assigned_to_nearest_preceding_function(self):
        g = make_graph([("main", "f")])
        report = parse_report(
            "BR prog.c:12 0 1\nBR prog.c:21 0 0\nBR prog.c:25 1 0\nBR prog.c:5 0 1\n"
        )
        table = build_branch_table(g, report)
        assert table["main"] == [("prog.c", 12, "0")]
        assert table["f"] == [("prog.c", 21, "0"), ("prog.c", 25, "1")]

    def test_unknown_file_dropped(self):
        g = make_graph([("main", "f")])
        table = build_branch_table(g, parse_report("BR elsewhere.c:3 0 0\n"))
        assert all(not sites for sites in table.values())

    def test_uncovered_filtering_and_order(self):
        g = make_graph([("main", "f")])
        report = parse_report("BR prog.c:21 1 0\nBR prog.c:21 0 1\nBR prog.c:30 0 0\n")
        table = build_branch_table(g, report)
        sites = uncovered_branches(report, g.nodes["f"], table)
        assert sites == [("prog.c", 21, "1"), ("prog.c", 30, "0")]

    def test_unknown_target_rejected(self):
        g = make_graph([("main", "f")])
        with pytest.raises(ValueError, match="unknown target"):
            uncovered_branches(
                CoverageReport(), FunctionRef("ghost", "x.c", 1), build_branch_table(g, CoverageReport())
            )

    def test_render_branch_site(self):
        assert render_branch_site(("prog.c", 21, "1")) == "prog.c:21 branch 1"


class TestGcovConversion:
    def test_functions_and_branches(self):
        payload = {
            "files": [
                {
                    "file": "src/main.c",
                    "functions": [
                        {"name": "main", "start_line": 10, "execution_count": 4},
                        {"name": "helper", "start_line": 30, "execution_count": 0},
                    ],
                    "lines": [
                        {
                            "line_number": 12,
                            "branches": [{"count": 2}, {"count": 0}],
                        }
                    ],
                }
            ]
        }
        text = convert_gcov_json(json.dumps(payload))
        report = parse_report(text)
        assert report.function_hits == {"main": 4, "helper": 0}
        assert report.branch_hits == {
            ("src/main.c", 12, "0"): 2,
            ("src/main.c", 12, "1"): 0,
        }

    def test_bad_json_rejected(self):
        with pytest.raises(CoverageFormatError, match="gcov JSON"):
            convert_gcov_json("{nope")

    def test_empty_files_list(self):
        assert convert_gcov_json("{}") == ""
