"""Shared fixtures: graphs, a scripted chat client, and workspace helpers."""

from __future__ import annotations

import json
import re

import pytest

from pilot.callgraph import CallGraph, FunctionRef

TARGET_RE = re.compile(r"\[([A-Za-z_]\w*)@[^\]]*\]")

# The prompt phases the scripted client tells apart, by Task line prefix.
INITIAL_PREFIX = "Task: Write "
REFINE_PREFIX = "Task: The previous command did not reach"
BRANCH_PREFIX = "Task: The target function"

FFMPEG_SCRIPT = """#!/bin/bash
# Commands for preparing input files
dd if=/dev/zero of=raw.yuv bs=1 count=12288
ffmpeg -f rawvideo -pix_fmt yuv420p -s 64x64 -r 1\\
  -i raw.yuv -c:v libx265 -preset ultrafast \\
  -x265-params keyint=1:aud=1 -frames:v 1 input.mp4

# The main test command
timeout 3s ./ffmpeg -re -i input.mp4 -c:v copy \\
  -f rtp rtp://127.0.0.1:5030
"""

FFMPEG_SEED_LINE = "ffmpeg -re -c:v copy -f rtp rtp://127.0.0.1:5030 -i @@"


def make_graph(edge_list, entry="main", extra_nodes=(), file_name="prog.c"):
    """Graph whose nodes live in one file at lines 10, 20, 30, ... by appearance."""
    order: list[str] = []
    for a, b in edge_list:
        for name in (a, b):
            if name not in order:
                order.append(name)
    for name in extra_nodes:
        if name not in order:
            order.append(name)
    nodes = {
        name: FunctionRef(name, file_name, 10 * (i + 1)) for i, name in enumerate(order)
    }
    edges = frozenset(edge_list)
    return CallGraph(nodes=nodes, edges=edges, entry=entry)


@pytest.fixture
def chain_graph():
    return make_graph([("main", "f"), ("f", "g")])


@pytest.fixture
def figure_graph():
    """The ffmpeg prompt-figure chain; first and last locations are pinned."""
    refs = [
        FunctionRef("main", "ffmpeg.c", 2932),
        FunctionRef("transcode", "ffmpeg.c", 4544),
        FunctionRef("transcode_init", "ffmpeg.c", 2770),
        FunctionRef("init_output_stream", "ffmpeg.c", 3462),
        FunctionRef("extradata2psets_hevc", "sdp.c", 226),
        FunctionRef("ff_isom_write_hvcc", "hevc.c", 1084),
    ]
    nodes = {r.name: r for r in refs}
    edges = frozenset((refs[i].name, refs[i + 1].name) for i in range(len(refs) - 1))
    return CallGraph(nodes=nodes, edges=edges, entry="main")


TWELVE_FN_EDGES = [
    ("main", "parse_args"),
    ("main", "init"),
    ("main", "dispatch"),
    ("parse_args", "usage"),
    ("init", "load_config"),
    ("init", "open_input"),
    ("dispatch", "cmd_list"),
    ("dispatch", "cmd_add"),
    ("dispatch", "cmd_del"),
    ("cmd_add", "validate"),
    ("cmd_add", "store"),
    ("cmd_del", "store"),
]


@pytest.fixture
def twelve_fn_graph():
    g = make_graph(TWELVE_FN_EDGES)
    assert len(g.nodes) == 12
    return g


@pytest.fixture
def source_tree(tmp_path):
    """Minimal C-looking tree for workspace copies; content is unimportant."""
    src = tmp_path / "demo-src"
    src.mkdir()
    (src / "prog.c").write_text(
        "int main(int argc, char **argv) {\n    return dispatch(argc);\n}\n"
    )
    return src


def coverage_script(lines):
    """run_test.sh body that drops the given report lines at the workspace root."""
    body = "\n".join(lines)
    heredoc = body + "\n" if body else ""
    return "#!/bin/bash\ncat > coverage.out <<'COVEOF'\n" + heredoc + "COVEOF\n"


class ScriptedClient:
    """Chat client that plays the model against the campaign driver.

    Per-target plans script each generation attempt, in order:

        a set of names  -> deliver run_test.sh covering those functions
        a list of lines -> deliver run_test.sh emitting exactly those report lines
        "malformed"     -> keep answering prose; the attempt fails at the cap

    branch_plan uses the same shapes per refinement cycle. Targets (or
    cycles) beyond their plan fall back to default_cover / an empty report.
    """

    def __init__(self, nodes, plan=None, branch_plan=None, default_cover=None):
        self.nodes = dict(nodes)
        self.plan = {k: list(v) for k, v in (plan or {}).items()}
        self.branch_plan = {k: list(v) for k, v in (branch_plan or {}).items()}
        self.default_cover = default_cover or (lambda target: {target})
        self.attempt_idx: dict[str, int] = {}
        self.branch_idx: dict[str, int] = {}
        self.malformed_left = 0
        self.prompts: list[str] = []
        self.sends = 0

    def _fn_lines(self, names):
        out = []
        for name in sorted(names):
            ref = self.nodes.get(name)
            if ref is not None:
                out.append(f"FN {ref.file}:{ref.line} {name} 1")
        return out

    def _deliver(self, behavior, target):
        if behavior == "malformed":
            self.malformed_left = 2
            return "I am not able to produce a script for that."
        if isinstance(behavior, (set, frozenset)):
            lines = self._fn_lines(behavior)
        else:
            lines = list(behavior)
        payload = {
            "mode": "modify_data",
            "file": "run_test.sh",
            "replacement": coverage_script(lines),
        }
        return json.dumps(payload)

    def send(self, messages, params):
        self.sends += 1
        text = messages[-1].content
        self.prompts.append(text)
        input_tokens = 100 + self.sends
        output_tokens = 10 + self.sends

        if text.startswith((INITIAL_PREFIX, REFINE_PREFIX)):
            match = TARGET_RE.search(text)
            target = match.group(1)
            idx = self.attempt_idx.get(target, 0)
            self.attempt_idx[target] = idx + 1
            behaviors = self.plan.get(target)
            if behaviors is not None and idx < len(behaviors):
                behavior = behaviors[idx]
            else:
                behavior = self.default_cover(target)
            return self._deliver(behavior, target), input_tokens, output_tokens

        if text.startswith(BRANCH_PREFIX):
            match = TARGET_RE.search(text)
            target = match.group(1)
            idx = self.branch_idx.get(target, 0)
            self.branch_idx[target] = idx + 1
            behaviors = self.branch_plan.get(target, [])
            behavior = behaviors[idx] if idx < len(behaviors) else []
            return self._deliver(behavior, target), input_tokens, output_tokens

        if self.malformed_left > 0:
            self.malformed_left -= 1
            return "Still no JSON from me.", input_tokens, output_tokens

        # Service reply we do not care about; produce an empty-coverage script.
        return self._deliver([], ""), input_tokens, output_tokens
