"""Seed-line extraction, corpus materialization, and corpus writing."""

from __future__ import annotations

import hashlib
import json

import pytest

from pilot.sandbox import init_workspace
from pilot.seeds import (
    SeedArtifact,
    extract_seed_line,
    materialize_corpus,
    validate_seed_line,
    write_corpus,
)

from conftest import FFMPEG_SCRIPT, FFMPEG_SEED_LINE


class RecordingClient:
    """Seed-extraction chat stub that records every message list it saw."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def send(self, messages, params):
        self.calls.append([m.content for m in messages])
        return self.replies.pop(0), 5, 5


class TestValidateSeedLine:
    def test_valid_line(self):
        assert validate_seed_line(FFMPEG_SEED_LINE, "ffmpeg") is None

    def test_path_prefix_allowed(self):
        assert validate_seed_line("./ffmpeg -i @@", "ffmpeg") is None

    @pytest.mark.parametrize(
        "line",
        [
            "ffmpeg -i @@; rm -rf /",
            "ffmpeg -i @@ | tee log",
            "ffmpeg -i @@ > out",
            "ffmpeg -i `cat x` @@",
            "ffmpeg -i $(cat x) @@",
            "ffmpeg -i @@ && true",
            "ffmpeg -i @@\nffmpeg again",
        ],
    )
    def test_shell_operators_rejected(self, line):
        assert validate_seed_line(line, "ffmpeg") == "contains shell control operators"

    def test_unbalanced_quote(self):
        reason = validate_seed_line('ffmpeg -i "@@', "ffmpeg")
        assert reason.startswith("not shell-splittable")

    def test_empty_line(self):
        assert validate_seed_line("", "ffmpeg") == "empty line"
        assert validate_seed_line("   ", "ffmpeg") == "empty line"

    def test_wrong_program(self):
        assert validate_seed_line("convert @@ out.png", "ffmpeg") == "must start with ffmpeg"

    def test_placeholder_count(self):
        assert (
            validate_seed_line("ffmpeg -i input.mp4", "ffmpeg")
            == "must contain @@ exactly once"
        )
        assert (
            validate_seed_line("ffmpeg @@ @@", "ffmpeg") == "must contain @@ exactly once"
        )


class TestRuleBasedExtraction:
    def test_reference_script(self):
        assert extract_seed_line(FFMPEG_SCRIPT, "ffmpeg") == FFMPEG_SEED_LINE

    def test_result_passes_validator(self):
        line = extract_seed_line(FFMPEG_SCRIPT, "ffmpeg")
        assert validate_seed_line(line, "ffmpeg") is None

    def test_last_invocation_wins(self):
        script = "prog -a x.bin\nprog -b y.bin\n"
        assert extract_seed_line(script, "prog") == "prog -b @@"

    def test_wrapper_prefix_dropped(self):
        script = "nice -n 10 timeout 5 ./prog file.bin\n"
        assert extract_seed_line(script, "prog") == "prog @@"

    def test_positional_input_replaced(self):
        assert extract_seed_line("prog input.bin\n", "prog") == "prog @@"

    def test_no_input_argument_appends_placeholder(self):
        assert extract_seed_line("prog -v\n", "prog") == "prog -v @@"

    def test_redirects_trimmed(self):
        assert extract_seed_line("prog -x f.bin > out.log\n", "prog") == "prog -x @@"

    def test_continuation_lines_joined(self):
        script = "prog -long \\\n  file.bin\n"
        assert extract_seed_line(script, "prog") == "prog -long @@"

    def test_comments_ignored(self):
        script = "# prog commented.bin\nprog real.bin\n"
        assert extract_seed_line(script, "prog") == "prog @@"

    def test_not_invoked_raises(self):
        with pytest.raises(ValueError, match="target program not invoked: prog"):
            extract_seed_line("echo hello\n", "prog")


class TestLlmAssistedExtraction:
    def test_valid_reply_used_directly(self):
        client = RecordingClient(["ffmpeg -custom -i @@"])
        line = extract_seed_line(FFMPEG_SCRIPT, "ffmpeg", client)
        assert line == "ffmpeg -custom -i @@"
        assert len(client.calls) == 1
        assert "Script:" in client.calls[0][0]

    def test_backtick_wrapping_stripped(self):
        client = RecordingClient(["`ffmpeg -re -i @@`"])
        assert extract_seed_line(FFMPEG_SCRIPT, "ffmpeg", client) == "ffmpeg -re -i @@"

    def test_invalid_reply_gets_one_corrective(self):
        client = RecordingClient(["ffmpeg -i @@ | tee log", "ffmpeg -fixed -i @@"])
        line = extract_seed_line(FFMPEG_SCRIPT, "ffmpeg", client)
        assert line == "ffmpeg -fixed -i @@"
        assert len(client.calls) == 2
        corrective = client.calls[1][-1]
        assert "contains shell control operators" in corrective
        assert "@@ exactly once" in corrective

    def test_two_invalid_replies_fall_back_to_rules(self):
        client = RecordingClient(["no idea", "still; no idea"])
        line = extract_seed_line(FFMPEG_SCRIPT, "ffmpeg", client)
        assert line == FFMPEG_SEED_LINE
        assert len(client.calls) == 2

    def test_not_invoked_raises_before_llm(self):
        client = RecordingClient([])
        with pytest.raises(ValueError, match="not invoked"):
            extract_seed_line("echo hello\n", "ffmpeg", client)
        assert client.calls == []


def write_script(ws, name, body):
    path = ws.program_dir / name
    path.write_text("#!/bin/bash\n" + body)
    path.chmod(0o755)
    return f"{ws.program_dir.name}/{name}"


@pytest.fixture
def seed_ws(tmp_path, source_tree):
    return init_workspace(source_tree, tmp_path / "work", program="demo")


def sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class TestMaterializeCorpus:
    def test_collects_produced_files(self, seed_ws, tmp_path):
        rel = write_script(
            seed_ws,
            "run_test1.sh",
            "printf AAA > input1.bin\ncat > coverage.out <<'EOF'\nFN a.c:1 f 1\nEOF\n"
            "./demo -i input1.bin || true\n",
        )
        artifacts = materialize_corpus(seed_ws, [rel], tmp_path / "corpus")
        assert len(artifacts) == 1
        artifact = artifacts[0]
        assert artifact.seed_id == "seed001"
        assert artifact.seed_line == "demo -i @@"
        assert artifact.source_script == rel
        assert artifact.input_files == [("seed001/files/input1.bin", sha(b"AAA"))]
        copied = tmp_path / "corpus" / "seed001" / "files" / "input1.bin"
        assert copied.read_bytes() == b"AAA"

    def test_coverage_and_scripts_excluded(self, seed_ws, tmp_path):
        rel = write_script(
            seed_ws,
            "run_test1.sh",
            "printf X > coverage.out\nprintf Y > run_test9.sh\n./demo -i a || true\n",
        )
        with pytest.warns(UserWarning, match="produced no input files"):
            artifacts = materialize_corpus(seed_ws, [rel], tmp_path / "corpus")
        assert artifacts[0].input_files == []

    def test_duplicate_content_kept_once(self, seed_ws, tmp_path):
        rel1 = write_script(
            seed_ws, "run_test1.sh", "printf AAA > one.bin\n./demo -i one.bin || true\n"
        )
        rel2 = write_script(
            seed_ws,
            "run_test2.sh",
            "printf AAA > two.bin\nprintf BBB > other.bin\n./demo -i two.bin || true\n",
        )
        artifacts = materialize_corpus(seed_ws, [rel1, rel2], tmp_path / "corpus")
        assert artifacts[0].input_files == [("seed001/files/one.bin", sha(b"AAA"))]
        assert artifacts[1].input_files == [("seed002/files/other.bin", sha(b"BBB"))]

    def test_name_clash_gets_digest_prefix(self, seed_ws, tmp_path):
        rel = write_script(
            seed_ws,
            "run_test1.sh",
            "mkdir -p sub\nprintf ONE > sub/x.bin\nprintf TWO > x.bin\n"
            "./demo -i x.bin || true\n",
        )
        artifacts = materialize_corpus(seed_ws, [rel], tmp_path / "corpus")
        names = [path for path, _ in artifacts[0].input_files]
        assert "seed001/files/x.bin" in names
        prefixed = [n for n in names if n != "seed001/files/x.bin"]
        assert len(prefixed) == 1
        assert prefixed[0].startswith(f"seed001/files/{sha(b'TWO')[:8]}-")

    def test_script_without_invocation_skipped(self, seed_ws, tmp_path):
        bad = write_script(seed_ws, "run_test1.sh", "printf AAA > a.bin\n")
        good = write_script(seed_ws, "run_test2.sh", "./demo -i a || true\nprintf B > b.bin\n")
        with pytest.warns(UserWarning, match="target program not invoked.*script skipped"):
            artifacts = materialize_corpus(seed_ws, [bad, good], tmp_path / "corpus")
        assert [a.seed_id for a in artifacts] == ["seed002"]

    def test_failing_script_warns_but_keeps_output(self, seed_ws, tmp_path):
        rel = write_script(
            seed_ws, "run_test1.sh", "./demo -i c || true\nprintf CCC > c.bin\nexit 3\n"
        )
        with pytest.warns(UserWarning, match="script exited 3"):
            artifacts = materialize_corpus(seed_ws, [rel], tmp_path / "corpus")
        assert artifacts[0].input_files == [("seed001/files/c.bin", sha(b"CCC"))]

    def test_llm_client_forwarded(self, seed_ws, tmp_path):
        rel = write_script(seed_ws, "run_test1.sh", "./demo -i x || true\nprintf D > d.bin\n")
        client = RecordingClient(["demo -llm -i @@"])
        artifacts = materialize_corpus(seed_ws, [rel], tmp_path / "corpus", llm_client=client)
        assert artifacts[0].seed_line == "demo -llm -i @@"
        assert len(client.calls) == 1


class TestWriteCorpus:
    def artifacts(self):
        return [
            SeedArtifact("seed001", "demo -re -i @@", [("seed001/files/a.bin", "d1")], "s1.sh"),
            SeedArtifact("seed002", "demo -v -i @@", [], "s2.sh"),
        ]

    def test_single_line_layout(self, tmp_path):
        manifest = write_corpus(self.artifacts(), "single_line", tmp_path / "out")
        assert (tmp_path / "out" / "seed001" / "cmdline").read_text() == "demo -re -i @@\n"
        assert (tmp_path / "out" / "seed002" / "cmdline").read_text() == "demo -v -i @@\n"
        on_disk = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert on_disk == manifest
        assert manifest["seed001"]["files"] == [{"path": "seed001/files/a.bin", "digest": "d1"}]
        assert manifest["seed002"]["source_script"] == "s2.sh"

    def test_argv_dictionary_layout(self, tmp_path):
        write_corpus(self.artifacts(), "argv_dictionary", tmp_path / "out")
        text = (tmp_path / "out" / "dictionary.txt").read_text()
        assert text == "-i\n-re\n-v\n"
        assert (tmp_path / "out" / "manifest.json").is_file()

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown corpus format"):
            write_corpus(self.artifacts(), "tarball", tmp_path / "out")

    def test_empty_artifacts_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="at least one artifact"):
            write_corpus([], "single_line", tmp_path / "out")
