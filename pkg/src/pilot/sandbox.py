"""Workspace lifecycle and confined execution of model-authored actions.

Layout, mirroring the prompt's directory structure::

    <workdir>/workspace-<suffix>/     root; execute.sh lives here
        execute.sh
        <program>-work/               program_dir
            src/                      copied target source
            run_test.sh               the script the model writes

Every served path must resolve inside root; symlinks are resolved and
re-checked. This confines file access, not resource use: scripts run with
the caller's privileges, bounded only by timeout and stream caps.
"""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from .llm import ExecuteCommand, LlmAction, ModifyData, ReadData, truncate_with_guidance

STREAM_CAP_BYTES = 64 * 1024
TIMEOUT_EXIT_CODE = 124
DEFAULT_SCRIPT_TIMEOUT_S = 30.0
RUN_TEST_NAME = "run_test.sh"


class SandboxError(RuntimeError):
    """Workspace setup or teardown failed."""


@dataclass(frozen=True)
class Workspace:
    root: Path
    program_dir: Path
    program: str

    @property
    def execute_script(self) -> Path:
        return self.root / "execute.sh"

    @property
    def run_test_script(self) -> Path:
        return self.program_dir / RUN_TEST_NAME

    @property
    def source_dir(self) -> Path:
        return self.program_dir / "src"

    def preserve_script(self, seq: int) -> Path:
        """Keep a covering run_test.sh as run_test<seq>.sh before reuse."""
        kept = self.program_dir / f"run_test{seq}.sh"
        shutil.copy2(self.run_test_script, kept)
        return kept

    def directory_tree(self) -> str:
        """Indented listing of the workspace in the prompt's style."""
        lines = ["workspace/"]
        program_line = f"    {self.program_dir.name}/"
        lines.append(program_line)
        src = self.source_dir
        names = sorted(p.name for p in src.iterdir()) if src.is_dir() else []
        lines.append(f"        src/  # Source files ({', '.join(names)})" if names else "        src/")
        for script in sorted(self.program_dir.glob("run_test*.sh")):
            lines.append(f"        {script.name}")
        lines.append("    execute.sh")
        return "\n".join(lines)


@dataclass(frozen=True)
class ExecutionResult:
    exit_code: int
    stdout: str
    stderr: str
    duration: float
    timed_out: bool

    def summary(self) -> str:
        status = f"exit code {self.exit_code}"
        if self.timed_out:
            status += " (timed out)"
        return f"{status}\nstdout:\n{self.stdout}\nstderr:\n{self.stderr}"


def init_workspace(source_dir, workdir, program: str | None = None) -> Workspace:
    """Create a fresh uniquely-named workspace with the source copied in."""
    source_dir = Path(source_dir)
    if not source_dir.is_dir():
        raise SandboxError(f"source directory not readable: {source_dir}")
    if program is None:
        program = source_dir.name
    # Absolute from the start: scripts run with cwd=root, so a relative
    # workdir would otherwise break path lookups inside the workspace.
    root = (Path(workdir) / f"workspace-{uuid.uuid4().hex[:8]}").resolve()
    program_dir = root / f"{program}-work"
    try:
        program_dir.mkdir(parents=True)
        shutil.copytree(source_dir, program_dir / "src")
        execute = root / "execute.sh"
        execute.write_text("")
        execute.chmod(0o755)
    except OSError as exc:
        raise SandboxError(f"cannot initialize workspace under {workdir}: {exc}") from exc
    return Workspace(root=root, program_dir=program_dir, program=program)


def _resolve_inside(ws: Workspace, raw_path: str) -> Path | None:
    """Resolve a model-supplied path; None means refused (escapes the root)."""
    rel = raw_path[len("workspace/") :] if raw_path.startswith("workspace/") else raw_path
    try:
        root = ws.root.resolve()
        primary = (ws.program_dir / rel).resolve()
        fallback = (ws.root / rel).resolve()
    except OSError:
        return None
    candidate = primary if primary.exists() or not fallback.exists() else fallback
    if candidate != root and root not in candidate.parents:
        return None
    return candidate


def _read_one(ws: Workspace, raw_path: str, file_slice, token_budget: int) -> str:
    resolved = _resolve_inside(ws, raw_path)
    if resolved is None:
        return f"Refused: path outside workspace: {raw_path}"
    if not resolved.is_file():
        return f"Error: file not found: {raw_path}"
    try:
        content = resolved.read_text(errors="replace")
    except OSError as exc:
        return f"Error: cannot read {raw_path}: {exc}"
    if file_slice is not None:
        start, end = file_slice
        lines = content.splitlines()
        content = "\n".join(lines[start - 1 : end])
    return f"--- {raw_path} ---\n" + truncate_with_guidance(content, token_budget, raw_path)


def _modify(ws: Workspace, action: ModifyData) -> str:
    resolved = _resolve_inside(ws, action.file)
    if resolved is None:
        return f"Refused: path outside workspace: {action.file}"
    if action.line_range is None:
        try:
            resolved.parent.mkdir(parents=True, exist_ok=True)
            resolved.write_text(action.replacement)
        except OSError as exc:
            return f"Error: cannot write {action.file}: {exc}"
        count = len(action.replacement.splitlines())
        return f"Updated {action.file}: now {count} lines."
    if not resolved.is_file():
        return f"Error: file not found: {action.file}"
    start, end = action.line_range
    lines = resolved.read_text(errors="replace").splitlines()
    if start > len(lines) + 1:
        return f"Error: line range {start}-{end} beyond end of {action.file} ({len(lines)} lines)"
    new_lines = lines[: start - 1] + action.replacement.splitlines() + lines[end:]
    resolved.write_text("\n".join(new_lines) + ("\n" if new_lines else ""))
    return f"Updated {action.file}: now {len(new_lines)} lines."


def service_action(
    ws: Workspace,
    action: LlmAction,
    token_budget: int = 8_000,
    script_timeout_s: float = DEFAULT_SCRIPT_TIMEOUT_S,
) -> str:
    """Serve one parsed action, returning the conversation-visible reply.

    Path escapes and missing files come back as reply text, never as
    exceptions; the model gets to correct itself.
    """
    if isinstance(action, ReadData):
        parts = [
            _read_one(ws, raw, action.file_slice, token_budget) for raw in action.target_files
        ]
        return "\n\n".join(parts)
    if isinstance(action, ModifyData):
        return _modify(ws, action)
    if isinstance(action, ExecuteCommand):
        ws.execute_script.write_text(action.script)
        ws.execute_script.chmod(0o755)
        result = run_script(ws, ws.execute_script, script_timeout_s)
        text = result.summary()
        return text[: token_budget * 4]
    raise TypeError(f"not an LlmAction: {action!r}")


def run_script(ws: Workspace, script_path, timeout_s: float = DEFAULT_SCRIPT_TIMEOUT_S) -> ExecutionResult:
    """Run a shell script in the workspace root under a process-group timeout."""
    script_path = Path(script_path)
    if not script_path.is_absolute():
        script_path = ws.root / script_path
    env = dict(os.environ, PILOT_WORKSPACE=str(ws.root))
    started = time.monotonic()
    proc = subprocess.Popen(
        ["bash", str(script_path)],
        cwd=ws.root,
        env=env,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        start_new_session=True,
    )
    timed_out = False
    try:
        out, err = proc.communicate(timeout=timeout_s)
        exit_code = proc.returncode
    except subprocess.TimeoutExpired:
        timed_out = True
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        out, err = proc.communicate()
        exit_code = TIMEOUT_EXIT_CODE
    duration = time.monotonic() - started
    return ExecutionResult(
        exit_code=exit_code,
        stdout=out[:STREAM_CAP_BYTES].decode(errors="replace"),
        stderr=err[:STREAM_CAP_BYTES].decode(errors="replace"),
        duration=duration,
        timed_out=timed_out,
    )


@dataclass(frozen=True)
class ToolReport:
    name: str
    verified: bool
    attempts: int


def _tool_on_path(ws: Workspace, name: str) -> bool:
    search = os.pathsep.join([str(ws.root / "bin"), os.environ.get("PATH", "")])
    return shutil.which(name, path=search) is not None


def provision_tools(
    ws: Workspace,
    tool_specs: list[dict],
    max_retries: int = 3,
    install_timeout_s: float = 120.0,
) -> list[ToolReport]:
    """Install-and-verify loop for input-generation tools.

    Each spec is {"name": ..., "install_command": ...} (install may be
    empty). One attempt = run the install command, then check command
    resolution; a tool already on PATH verifies on the first attempt.
    """
    reports = []
    for spec in tool_specs:
        name = spec["name"]
        install = spec.get("install_command", "")
        verified = False
        attempts = 0
        for _ in range(max_retries):
            attempts += 1
            if install:
                try:
                    subprocess.run(
                        ["bash", "-c", install],
                        cwd=ws.root,
                        env=dict(os.environ, PILOT_WORKSPACE=str(ws.root)),
                        capture_output=True,
                        timeout=install_timeout_s,
                    )
                except subprocess.TimeoutExpired:
                    continue
            if _tool_on_path(ws, name):
                verified = True
                break
        reports.append(ToolReport(name=name, verified=verified, attempts=attempts))
    return reports
