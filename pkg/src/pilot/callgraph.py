"""Static function-call graph: loading, path enumeration, and rendering.

The canonical graph document is a JSON object::

    {"entry": "main",
     "nodes": [{"name": "main", "file": "main.c", "line": 10}, ...],
     "edges": [{"caller": "main", "callee": "helper"}, ...]}

One document describes one program. Any executable that reads a source tree
and writes this document to stdout can act as the extractor.
"""

from __future__ import annotations

import heapq
import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path


class GraphDocumentError(ValueError):
    """The canonical graph document is malformed or violates an invariant."""


class ExtractorError(RuntimeError):
    """The external call-graph extractor failed."""


@dataclass(frozen=True, order=True)
class FunctionRef:
    """A function identified by name plus the location where it is defined."""

    name: str
    file: str
    line: int

    def __post_init__(self):
        if not self.name:
            raise GraphDocumentError("function name must be non-empty")
        if self.line < 1:
            raise GraphDocumentError(f"function {self.name}: line must be >= 1, got {self.line}")

    @property
    def location(self) -> str:
        return f"{self.name}@{self.file}:{self.line}"


@dataclass(frozen=True)
class CallGraph:
    """Directed caller->callee graph with a designated entry function.

    Immutable after construction; concurrent read-only use is safe.
    """

    nodes: dict[str, FunctionRef]
    edges: frozenset[tuple[str, str]]
    entry: str
    _succ: dict[str, tuple[str, ...]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for caller, callee in self.edges:
            for endpoint in (caller, callee):
                if endpoint not in self.nodes:
                    raise GraphDocumentError(f"dangling endpoint {endpoint}")
        if self.entry not in self.nodes:
            raise GraphDocumentError(f"unknown entry {self.entry!r}")
        succ: dict[str, list[str]] = {name: [] for name in self.nodes}
        for caller, callee in self.edges:
            succ[caller].append(callee)
        self._succ.update({name: tuple(sorted(out)) for name, out in succ.items()})

    def successors(self, name: str) -> tuple[str, ...]:
        return self._succ[name]

    def node_names(self) -> list[str]:
        return sorted(self.nodes)


@dataclass(frozen=True)
class CallGraphView:
    """Read-only restriction of a graph to its unvisited nodes.

    The entry is dropped (None) when the entry function itself is covered.
    """

    nodes: dict[str, FunctionRef]
    edges: frozenset[tuple[str, str]]
    entry: str | None

    def node_names(self) -> list[str]:
        return sorted(self.nodes)


CallPath = tuple[FunctionRef, ...]


def load_call_graph(document: str | dict) -> CallGraph:
    """Parse and validate a canonical graph document."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise GraphDocumentError(f"malformed graph document: {exc}") from exc
    if not isinstance(document, dict):
        raise GraphDocumentError("graph document must be a JSON object")
    for key in ("entry", "nodes", "edges"):
        if key not in document:
            raise GraphDocumentError(f"graph document missing {key!r}")

    nodes: dict[str, FunctionRef] = {}
    for raw in document["nodes"]:
        try:
            ref = FunctionRef(str(raw["name"]), str(raw["file"]), int(raw["line"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphDocumentError(f"malformed node entry {raw!r}: {exc}") from exc
        if ref.name in nodes:
            raise GraphDocumentError(f"duplicate function name {ref.name}")
        nodes[ref.name] = ref

    edges = set()
    for raw in document["edges"]:
        try:
            edges.add((str(raw["caller"]), str(raw["callee"])))
        except (KeyError, TypeError) as exc:
            raise GraphDocumentError(f"malformed edge entry {raw!r}: {exc}") from exc

    return CallGraph(nodes=nodes, edges=frozenset(edges), entry=str(document["entry"]))


def dump_call_graph(g: CallGraph) -> str:
    """Serialize a graph back to the canonical document text (sorted, stable)."""
    doc = {
        "entry": g.entry,
        "nodes": [
            {"name": r.name, "file": r.file, "line": r.line}
            for r in (g.nodes[n] for n in sorted(g.nodes))
        ],
        "edges": [{"caller": a, "callee": b} for a, b in sorted(g.edges)],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def extract_call_graph(source_dir: str | Path, extractor_command: str) -> str:
    """Run an external extractor over a source tree and return the document text.

    Pure adapter: the extractor owns all graph semantics; we only check that
    its stdout parses as a canonical document.
    """
    source_dir = Path(source_dir)
    if not source_dir.is_dir():
        raise ExtractorError(f"source directory not found: {source_dir}")
    proc = subprocess.run(
        extractor_command + " " + str(source_dir),
        shell=True,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        detail = proc.stderr.strip() or proc.stdout.strip() or "no output"
        raise ExtractorError(f"extractor exited {proc.returncode}: {detail}")
    try:
        load_call_graph(proc.stdout)
    except GraphDocumentError as exc:
        raise ExtractorError(f"extractor output unparsable: {exc}") from exc
    return proc.stdout


def mark_covered(g: CallGraph, covered: set[str]) -> CallGraphView:
    """View of ``g`` restricted to unvisited nodes; the graph itself is unchanged."""
    nodes = {name: ref for name, ref in g.nodes.items() if name not in covered}
    edges = frozenset((a, b) for a, b in g.edges if a in nodes and b in nodes)
    entry = g.entry if g.entry in nodes else None
    return CallGraphView(nodes=nodes, edges=edges, entry=entry)


def _lex_shortest_path(
    succ: dict[str, tuple[str, ...]],
    source: str,
    target: str,
    banned_nodes: set[str],
    banned_edges: set[tuple[str, str]],
) -> list[str] | None:
    """Shortest source->target path, lexicographically smallest among ties.

    Unit edge weights; best-first search keyed by (length, name sequence) so the
    first target pop is the unique minimum under that order.
    """
    if source in banned_nodes:
        return None
    done: set[str] = set()
    heap: list[tuple[int, tuple[str, ...]]] = [(0, (source,))]
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node == target:
            return list(path)
        if node in done:
            continue
        done.add(node)
        for nxt in succ[node]:
            if nxt in banned_nodes or nxt in done or (node, nxt) in banned_edges:
                continue
            heapq.heappush(heap, (dist + 1, path + (nxt,)))
    return None


def enumerate_paths(g: CallGraph, target: str, k_max: int) -> list[CallPath]:
    """Up to ``k_max`` loopless entry->target paths, Yen-style over unit weights.

    Deterministic: the result is ordered by (length, node-name sequence).
    Returns [] when the target is unreachable from the entry.
    """
    if target not in g.nodes:
        raise GraphDocumentError(f"unknown target {target!r}")
    if k_max < 1:
        raise ValueError(f"k_max must be positive, got {k_max}")

    first = _lex_shortest_path(g._succ, g.entry, target, set(), set())
    if first is None:
        return []

    accepted: list[list[str]] = [first]
    candidates: list[tuple[int, tuple[str, ...]]] = []
    seen: set[tuple[str, ...]] = {tuple(first)}

    while len(accepted) < k_max:
        prev = accepted[-1]
        for i in range(len(prev) - 1):
            spur = prev[i]
            root = prev[: i + 1]
            banned_edges = {
                (p[i], p[i + 1]) for p in accepted if len(p) > i + 1 and p[: i + 1] == root
            }
            banned_nodes = set(root[:-1])
            spur_path = _lex_shortest_path(g._succ, spur, target, banned_nodes, banned_edges)
            if spur_path is not None:
                total = tuple(root[:-1] + spur_path)
                if total not in seen:
                    seen.add(total)
                    heapq.heappush(candidates, (len(total), total))
        if not candidates:
            break
        _, nxt = heapq.heappop(candidates)
        accepted.append(list(nxt))

    accepted.sort(key=lambda p: (len(p), p))
    return [tuple(g.nodes[name] for name in p) for p in accepted]


def render_path(p: CallPath) -> str:
    """Render a path one function per line: ``name@file:line``, arrows after the first."""
    lines = [p[0].location]
    lines.extend(f"→ {ref.location}" for ref in p[1:])
    return "\n".join(lines)
