"""Turn accepted test scripts into fuzzer-ready seeds.

A seed is the essential command line (with the input file argument replaced
by the @@ placeholder) plus the input files the script produced. Extraction
is LLM-assisted with strict validation; an invalid line falls back to a
rule-based rewrite so the corpus never contains a malformed seed.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
import shlex
import warnings
from dataclasses import dataclass
from pathlib import Path

from .llm import ChatMessage, ClientParams
from .sandbox import Workspace, run_script

SHELL_CONTROL_CHARS = set(";|&<>`\n")

EXTRACTION_PROMPT = (
    "Extract from the shell script below the single command line that invokes "
    "{program}. Keep only the essential options, remove wrapper commands such "
    "as timeout, and replace the input file argument with @@ so the result "
    "reads like '{program} [options] -i @@'. Reply with that one line and "
    "nothing else.\n\nScript:\n{script}"
)

CORRECTIVE_PROMPT = (
    "That line was invalid: {reason}. Reply with exactly one line that starts "
    "with {program}, contains @@ exactly once, and uses no shell operators."
)


@dataclass(frozen=True)
class SeedArtifact:
    seed_id: str
    seed_line: str
    input_files: list[tuple[str, str]]
    source_script: str


def validate_seed_line(line: str, program_name: str) -> str | None:
    """None when valid, else the reason the line is rejected."""
    if any(ch in SHELL_CONTROL_CHARS for ch in line) or "$(" in line:
        return "contains shell control operators"
    try:
        tokens = shlex.split(line)
    except ValueError as exc:
        return f"not shell-splittable ({exc})"
    if not tokens:
        return "empty line"
    if Path(tokens[0]).name != program_name:
        return f"must start with {program_name}"
    if line.count("@@") != 1:
        return "must contain @@ exactly once"
    return None


def _join_continuations(script: str) -> list[str]:
    lines: list[str] = []
    pending = ""
    for raw in script.splitlines():
        if raw.rstrip().endswith("\\"):
            pending += raw.rstrip()[:-1] + " "
            continue
        lines.append(pending + raw)
        pending = ""
    if pending:
        lines.append(pending)
    return lines


def _invocation_tokens(script: str, program_name: str) -> list[str] | None:
    """Tokens of the last line invoking the program, from its token onward."""
    found: list[str] | None = None
    for line in _join_continuations(script):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            tokens = shlex.split(stripped, comments=True)
        except ValueError:
            continue
        for i, token in enumerate(tokens):
            if Path(token).name == program_name:
                found = tokens[i:]
                break
    return found


def _rule_based_seed_line(script: str, program_name: str) -> str:
    tokens = _invocation_tokens(script, program_name)
    if tokens is None:
        raise ValueError(f"target program not invoked: {program_name}")
    tokens[0] = program_name
    for i, token in enumerate(tokens):
        if token in (">", ">>", "<", "2>", "&>", "|", ";", "&&", "||"):
            tokens = tokens[:i]
            break
    if "-i" in tokens:
        i = tokens.index("-i")
        del tokens[i : i + 2]
        tokens += ["-i", "@@"]
    else:
        positional = [i for i, t in enumerate(tokens[1:], start=1) if not t.startswith("-")]
        if positional:
            tokens[positional[-1]] = "@@"
        else:
            tokens.append("@@")
    return shlex.join(tokens)


def _first_line(response: str) -> str:
    for line in response.splitlines():
        stripped = line.strip().strip("`")
        if stripped:
            return stripped
    return ""


def extract_seed_line(script: str, program_name: str, llm_client=None) -> str:
    """One validated seed line for the script's program invocation.

    Asks the LLM first (when a client is given), re-prompts once on an
    invalid reply, then falls back to the rule-based rewrite.
    """
    if _invocation_tokens(script, program_name) is None:
        raise ValueError(f"target program not invoked: {program_name}")
    if llm_client is not None:
        params = ClientParams()
        prompt = EXTRACTION_PROMPT.format(program=program_name, script=script)
        messages = [ChatMessage("user", prompt)]
        text, _, _ = llm_client.send(messages, params)
        line = _first_line(text)
        reason = validate_seed_line(line, program_name)
        if reason is None:
            return line
        messages.append(ChatMessage("assistant", text or "(empty)"))
        messages.append(
            ChatMessage("user", CORRECTIVE_PROMPT.format(reason=reason, program=program_name))
        )
        text, _, _ = llm_client.send(messages, params)
        line = _first_line(text)
        if validate_seed_line(line, program_name) is None:
            return line
    return _rule_based_seed_line(script, program_name)


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _snapshot(root: Path, skip: set[Path]) -> dict[Path, str]:
    state = {}
    for path in root.rglob("*"):
        if not path.is_file() or path in skip:
            continue
        state[path] = _digest(path)
    return state


def materialize_corpus(
    ws: Workspace, scripts: list, out_dir, llm_client=None
) -> list[SeedArtifact]:
    """Run each accepted script once and collect what it wrote as seed files.

    Files created or changed by a script become its input files, copied to
    out_dir/<seed_id>/files/. Byte-identical files across seeds are kept
    once (first seed wins).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: list[SeedArtifact] = []
    claimed_digests: set[str] = set()
    for index, script in enumerate(scripts, start=1):
        script_path = Path(script)
        if not script_path.is_absolute():
            script_path = ws.root / script_path
        seed_id = f"seed{index:03d}"
        script_text = script_path.read_text(errors="replace")
        try:
            seed_line = extract_seed_line(script_text, ws.program, llm_client)
        except ValueError as exc:
            warnings.warn(f"{seed_id}: {exc}; script skipped")
            continue
        before = _snapshot(ws.root, {ws.execute_script})
        result = run_script(ws, script_path)
        if result.exit_code != 0:
            warnings.warn(f"{seed_id}: script exited {result.exit_code}")
        after = _snapshot(ws.root, {ws.execute_script})
        produced = [
            (path, digest)
            for path, digest in sorted(after.items())
            if before.get(path) != digest
            and path.name != "coverage.out"
            and not fnmatch.fnmatch(path.name, "run_test*.sh")
        ]
        files: list[tuple[str, str]] = []
        seed_dir = out_dir / seed_id / "files"
        for path, digest in produced:
            if digest in claimed_digests:
                continue
            claimed_digests.add(digest)
            seed_dir.mkdir(parents=True, exist_ok=True)
            name = path.name
            if (seed_dir / name).exists():
                name = f"{digest[:8]}-{name}"
            (seed_dir / name).write_bytes(path.read_bytes())
            files.append((f"{seed_id}/files/{name}", digest))
        if not files:
            warnings.warn(f"{seed_id}: script produced no input files")
        artifacts.append(
            SeedArtifact(
                seed_id=seed_id,
                seed_line=seed_line,
                input_files=files,
                source_script=str(script),
            )
        )
    return artifacts


def write_corpus(artifacts: list[SeedArtifact], format: str, out_dir) -> dict:
    """Write the corpus layout for one downstream seed format.

    single_line: per-seed cmdline files. argv_dictionary: one deduplicated
    option-token list. Both write manifest.json and return the manifest.
    """
    if not artifacts:
        raise ValueError("write_corpus requires at least one artifact")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        artifact.seed_id: {
            "seed_line": artifact.seed_line,
            "files": [{"path": path, "digest": digest} for path, digest in artifact.input_files],
            "source_script": artifact.source_script,
        }
        for artifact in artifacts
    }
    if format == "single_line":
        for artifact in artifacts:
            seed_dir = out_dir / artifact.seed_id
            seed_dir.mkdir(parents=True, exist_ok=True)
            (seed_dir / "cmdline").write_text(artifact.seed_line + "\n")
    elif format == "argv_dictionary":
        tokens = sorted(
            {
                token
                for artifact in artifacts
                for token in shlex.split(artifact.seed_line)
                if token.startswith("-")
            }
        )
        (out_dir / "dictionary.txt").write_text("\n".join(tokens) + "\n")
    else:
        raise ValueError(f"unknown corpus format {format!r}")
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
