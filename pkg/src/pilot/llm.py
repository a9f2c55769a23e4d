"""Prompt construction, the three-mode response protocol, and usage accounting.

The conversation layer is client-agnostic: anything with
``send(messages, params) -> (text, input_tokens, output_tokens)`` works.
MockClient replays a recorded transcript for offline runs; HttpClient talks
to an OpenAI-compatible chat endpoint.
"""

from __future__ import annotations

import json
import math
import os
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from .callgraph import FunctionRef

API_KEY_ENV = "PILOT_LLM_API_KEY"

PATH_FILE_NAME = "path_candidates.txt"

TRUNCATION_GUIDANCE = (
    "Exceeding token limit, content truncated. To view the complete content "
    "of [{file_path}], please use read_data mode and set file_slice "
    "(specified range) to read each section separately."
)

RESPONSE_FORMAT_SECTION = (
    "Response Format: Please respond using one of the following three modes:\n"
    "1. read_data: Request to read file contents\n"
    "2. modify_data: Update file contents\n"
    "3. execute_command: Run any command for testing"
)

RELATIONSHIP_HEADING = "Function Call Relationship from main() to the target function:"


class ActionParseError(ValueError):
    """The response does not contain a valid action envelope."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown chat role {self.role!r}")
        if not self.content:
            raise ValueError("chat message content must be non-empty")


@dataclass(frozen=True)
class ReadData:
    target_files: tuple[str, ...]
    file_slice: tuple[int, int] | None = None
    reason: str = ""


@dataclass(frozen=True)
class ModifyData:
    file: str
    replacement: str
    line_range: tuple[int, int] | None = None


@dataclass(frozen=True)
class ExecuteCommand:
    script: str


LlmAction = ReadData | ModifyData | ExecuteCommand


def serialize_action(action: LlmAction) -> str:
    """Inverse of parse_action, for fixtures and replay."""
    if isinstance(action, ReadData):
        payload = {"mode": "read_data", "target_files": list(action.target_files)}
        if action.file_slice is not None:
            payload["file_slice"] = list(action.file_slice)
        if action.reason:
            payload["reason"] = action.reason
    elif isinstance(action, ModifyData):
        payload = {"mode": "modify_data", "file": action.file, "replacement": action.replacement}
        if action.line_range is not None:
            payload["line_range"] = list(action.line_range)
    elif isinstance(action, ExecuteCommand):
        payload = {"mode": "execute_command", "script": action.script}
    else:
        raise TypeError(f"not an LlmAction: {action!r}")
    return json.dumps(payload)


def _parse_slice(raw, key: str) -> tuple[int, int]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ActionParseError(f"{key} must be a [start, end] pair")
    try:
        start, end = int(raw[0]), int(raw[1])
    except (TypeError, ValueError) as exc:
        raise ActionParseError(f"{key} must hold integers") from exc
    if start < 1 or end < start:
        raise ActionParseError(f"{key} must satisfy 1 <= start <= end, got {raw}")
    return start, end


def parse_action(response: str) -> LlmAction:
    """Extract the first JSON object from a response and map it to an action.

    Raises ActionParseError when no JSON object is present, the mode is
    unknown, or a required field is missing; the caller surfaces the message
    back to the model as a corrective turn.
    """
    decoder = json.JSONDecoder()
    obj = None
    idx = response.find("{")
    while idx != -1:
        try:
            candidate, _ = decoder.raw_decode(response, idx)
        except json.JSONDecodeError:
            idx = response.find("{", idx + 1)
            continue
        if isinstance(candidate, dict):
            obj = candidate
            break
        idx = response.find("{", idx + 1)
    if obj is None:
        raise ActionParseError("no JSON object found in response")

    mode = obj.get("mode")
    if mode == "read_data":
        files = obj.get("target_files")
        if not isinstance(files, list) or not files:
            raise ActionParseError("read_data requires a non-empty target_files list")
        file_slice = None
        if obj.get("file_slice") is not None:
            file_slice = _parse_slice(obj["file_slice"], "file_slice")
        return ReadData(tuple(str(f) for f in files), file_slice, str(obj.get("reason", "")))
    if mode == "modify_data":
        if "file" not in obj:
            raise ActionParseError("modify_data requires a file")
        if "replacement" not in obj:
            raise ActionParseError("modify_data requires a replacement")
        line_range = None
        if obj.get("line_range") is not None:
            line_range = _parse_slice(obj["line_range"], "line_range")
        return ModifyData(str(obj["file"]), str(obj["replacement"]), line_range)
    if mode == "execute_command":
        if "script" not in obj:
            raise ActionParseError("execute_command requires a script")
        return ExecuteCommand(str(obj["script"]))
    if mode is None:
        raise ActionParseError("response JSON lacks a mode field")
    raise ActionParseError(f"unknown mode {mode!r}")


def estimate_tokens(text: str, tokenizer=None) -> int:
    """Token estimate: ceil(chars / 4) unless an exact tokenizer is supplied."""
    if tokenizer is not None:
        return tokenizer(text)
    return math.ceil(len(text) / 4)


def truncate_with_guidance(content: str, budget: int, file_path: str, tokenizer=None) -> str:
    """Clip content to the token budget, appending the re-read guidance."""
    if budget <= 0:
        raise ValueError("token budget must be positive")
    if estimate_tokens(content, tokenizer) <= budget:
        return content
    prefix = content[: budget * 4]
    return prefix + "\n" + TRUNCATION_GUIDANCE.format(file_path=file_path)


@dataclass
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0
    chat_count: int = 0

    def record(self, input_tokens: int, output_tokens: int):
        self.input_tokens += input_tokens
        self.output_tokens += output_tokens
        self.chat_count += 1

    def merge(self, other: "TokenUsage"):
        self.input_tokens += other.input_tokens
        self.output_tokens += other.output_tokens
        self.chat_count += other.chat_count


@dataclass(frozen=True)
class PriceTable:
    usd_per_million_input: float
    usd_per_million_output: float

    def __post_init__(self):
        if self.usd_per_million_input < 0 or self.usd_per_million_output < 0:
            raise ValueError("prices must be nonnegative")


def cost(usage: TokenUsage, prices: PriceTable) -> float:
    """Campaign cost in USD."""
    return (
        usage.input_tokens / 1e6 * prices.usd_per_million_input
        + usage.output_tokens / 1e6 * prices.usd_per_million_output
    )


@dataclass(frozen=True)
class ClientParams:
    temperature: float = 0.0
    max_tokens: int = 4096
    model: str = ""


class TranscriptExhausted(RuntimeError):
    """The mock transcript has no response left for this send."""


class MockClient:
    """Replays a recorded transcript: response i depends only on i."""

    def __init__(self, responses: list[dict]):
        self._responses = list(responses)
        self._cursor = 0

    @classmethod
    def from_file(cls, path) -> "MockClient":
        document = json.loads(Path(path).read_text())
        if not isinstance(document, dict) or "responses" not in document:
            raise ValueError("transcript must be an object with a 'responses' list")
        return cls(document["responses"])

    def send(self, messages: list[ChatMessage], params: ClientParams) -> tuple[str, int, int]:
        if self._cursor >= len(self._responses):
            raise TranscriptExhausted(f"transcript exhausted after {self._cursor} responses")
        entry = self._responses[self._cursor]
        self._cursor += 1
        return (
            str(entry["text"]),
            int(entry.get("input_tokens", 0)),
            int(entry.get("output_tokens", 0)),
        )


class HttpClient:
    """Minimal OpenAI-compatible chat client; key from PILOT_LLM_API_KEY."""

    def __init__(self, endpoint: str, model: str, timeout_s: float = 120.0):
        self.endpoint = endpoint
        self.model = model
        self.timeout_s = timeout_s
        self.api_key = os.environ.get(API_KEY_ENV, "")
        if not self.api_key:
            raise RuntimeError(f"{API_KEY_ENV} is not set")

    def send(self, messages: list[ChatMessage], params: ClientParams) -> tuple[str, int, int]:
        body = json.dumps(
            {
                "model": params.model or self.model,
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
                "messages": [{"role": m.role, "content": m.content} for m in messages],
            }
        ).encode()
        request = urllib.request.Request(
            self.endpoint,
            data=body,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
        )
        with urllib.request.urlopen(request, timeout=self.timeout_s) as reply:
            payload = json.loads(reply.read().decode())
        text = payload["choices"][0]["message"]["content"]
        usage = payload.get("usage", {})
        return text, int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))


class Conversation:
    """One sequential chat: system message, full history, budget truncation.

    History is kept across targets; when the estimated context exceeds the
    budget, the oldest exchanges are dropped first, always preserving the
    system message and the latest 10 exchanges.
    """

    KEEP_EXCHANGES = 10

    def __init__(
        self,
        client,
        system_prompt: str,
        params: ClientParams = ClientParams(),
        context_budget: int = 160_000,
        usage: TokenUsage | None = None,
    ):
        self.client = client
        self.params = params
        self.context_budget = context_budget
        self.usage = usage if usage is not None else TokenUsage()
        self.calls: list[tuple[int, int]] = []
        self.messages: list[ChatMessage] = [ChatMessage("system", system_prompt)]

    def _estimated_total(self) -> int:
        return sum(estimate_tokens(m.content) for m in self.messages)

    def _truncate(self):
        while (
            self._estimated_total() > self.context_budget
            and len(self.messages) > 1 + 2 * self.KEEP_EXCHANGES + 1
        ):
            del self.messages[1:3]

    def send(self, user_text: str) -> str:
        self.messages.append(ChatMessage("user", user_text))
        self._truncate()
        text, input_tokens, output_tokens = self.client.send(self.messages, self.params)
        self.usage.record(input_tokens, output_tokens)
        self.calls.append((input_tokens, output_tokens))
        self.messages.append(ChatMessage("assistant", text))
        return text


@dataclass
class PromptContext:
    """Everything compose_prompt needs; phase decides which fields are used."""

    program: str
    target: FunctionRef
    definition: str = ""
    paths: list[str] = field(default_factory=list)
    tools: list[str] = field(default_factory=list)
    directory_tree: str = ""
    token_budget: int = 160_000
    workspace_root: Path | None = None
    prior_command: str = ""
    covered_feedback: str = ""
    uncovered_branches: list[str] = field(default_factory=list)


def _require(condition: bool, name: str):
    if not condition:
        raise ValueError(f"prompt context missing required field {name!r}")


def _relationship_section(ctx: PromptContext) -> str:
    blocks = [f"- Path candidate {i}\n{path}" for i, path in enumerate(ctx.paths, start=1)]
    section = RELATIONSHIP_HEADING + "\n" + "\n\n".join(blocks)
    if estimate_tokens(section) <= ctx.token_budget:
        return section
    if ctx.workspace_root is not None:
        path_file = Path(ctx.workspace_root) / PATH_FILE_NAME
        path_file.write_text("\n\n".join(blocks) + "\n")
    return (
        RELATIONSHIP_HEADING
        + "\n"
        + blocks[0]
        + "\n\n"
        + f"The complete set of {len(ctx.paths)} path candidates exceeds the token limit "
        + f"and has been exported to workspace/{PATH_FILE_NAME}. "
        + f"Use read_data mode on {PATH_FILE_NAME} to view the remaining candidates."
    )


def compose_prompt(phase: str, ctx: PromptContext) -> str:
    """Deterministic prompt text for one generation phase.

    initial: task, target definition, call-relationship paths, response
    format, directory structure. refinement: replaces the relationship
    section with execution feedback. branch: uncovered-branch context.
    """
    _require(bool(ctx.program), "program")
    if phase == "initial":
        _require(bool(ctx.definition), "definition")
        _require(bool(ctx.paths), "paths")
        _require(bool(ctx.tools), "tools")
        _require(bool(ctx.directory_tree), "directory_tree")
        task = (
            f"Task: Write {ctx.program} test commands that reach the target function "
            f"[{ctx.target.location}].\n"
            f"Please include commands to create valid input files using appropriate "
            f"standard tools: {', '.join(ctx.tools)}. Do not manually construct file "
            f"headers or use placeholder data. Invalid files cause early rejection "
            f"and low coverage."
        )
        sections = [
            task,
            f"Target Function Definition:\n{ctx.definition}",
            _relationship_section(ctx),
            RESPONSE_FORMAT_SECTION,
            f"Directory Structure:\n{ctx.directory_tree}",
        ]
    elif phase == "refinement":
        _require(bool(ctx.prior_command), "prior_command")
        task = (
            f"Task: The previous command did not reach the target function "
            f"[{ctx.target.location}]. Refine the command based on the coverage "
            f"feedback below and write an updated run_test.sh."
        )
        feedback = ctx.covered_feedback or "(no functions on the candidate paths were covered)"
        sections = [
            task,
            f"Previous command:\n{ctx.prior_command}",
            f"Covered Function Feedback:\n{feedback}",
            RESPONSE_FORMAT_SECTION,
        ]
        if ctx.directory_tree:
            sections.append(f"Directory Structure:\n{ctx.directory_tree}")
    elif phase == "branch":
        if not ctx.uncovered_branches:
            raise ValueError("nothing to refine: no uncovered branches")
        _require(bool(ctx.definition), "definition")
        _require(bool(ctx.directory_tree), "directory_tree")
        task = (
            f"Task: The target function [{ctx.target.location}] is covered. Refine "
            f"run_test.sh so execution also takes the branches that remain uncovered."
        )
        sections = [
            task,
            "Uncovered Branches:\n" + "\n".join(ctx.uncovered_branches),
            f"Target Function Definition:\n{ctx.definition}",
            RESPONSE_FORMAT_SECTION,
            f"Directory Structure:\n{ctx.directory_tree}",
        ]
    else:
        raise ValueError(f"unknown prompt phase {phase!r}")
    return "\n\n".join(sections)
