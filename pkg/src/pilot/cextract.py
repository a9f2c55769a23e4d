"""Naive C call-graph extractor: regex plus brace matching, no parsing.

Reads every .c/.h file under a source directory and writes the canonical
graph document to stdout. Good enough for fixtures and small programs;
swap in a compiler-based extractor for anything serious. Known blind
spots: function pointers, macros that hide calls or definitions, K&R
definitions.

When the same function name is defined in several files, the first
definition keeps the plain name and later ones are renamed to name@file,
so call edges (which only know the bare name) attach to the first.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

KEYWORDS = {
    "if", "for", "while", "switch", "return", "sizeof", "do", "else",
    "case", "goto", "defined",
}

IDENT_CALL_RE = re.compile(r"\b([A-Za-z_]\w*)\s*\(")


def blank_comments_and_strings(text: str) -> str:
    """Replace comment and literal bodies with spaces, keeping offsets."""
    out = list(text)
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "/" and i + 1 < n and text[i + 1] == "/":
            j = i
            while j < n and text[j] != "\n":
                out[j] = " "
                j += 1
            i = j
        elif ch == "/" and i + 1 < n and text[i + 1] == "*":
            j = i
            while j < n - 1 and not (text[j] == "*" and text[j + 1] == "/"):
                if text[j] != "\n":
                    out[j] = " "
                j += 1
            if j < n - 1:
                out[j] = out[j + 1] = " "
                j += 2
            i = j
        elif ch in "\"'":
            quote = ch
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    out[j] = " "
                    if j + 1 < n and text[j + 1] != "\n":
                        out[j + 1] = " "
                    j += 2
                    continue
                if text[j] == quote or text[j] == "\n":
                    break
                out[j] = " "
                j += 1
            i = j + 1
        else:
            i += 1
    return "".join(out)


def _match_paren(text: str, open_pos: int) -> int:
    """Index just past the ')' closing the '(' at open_pos, or -1."""
    depth = 0
    for i in range(open_pos, len(text)):
        if text[i] == "(":
            depth += 1
        elif text[i] == ")":
            depth -= 1
            if depth == 0:
                return i + 1
    return -1


def scan_file(text: str):
    """Yield ("def", name, line) and ("call", owner_name, callee) events."""
    blanked = blank_comments_and_strings(text)
    depth = 0
    pos = 0
    current: str | None = None
    matches = {m.start(): m for m in IDENT_CALL_RE.finditer(blanked)}
    n = len(blanked)
    while pos < n:
        ch = blanked[pos]
        if ch == "{":
            depth += 1
            pos += 1
            continue
        if ch == "}":
            depth -= 1
            if depth <= 0:
                current = None
                depth = max(depth, 0)
            pos += 1
            continue
        match = matches.get(pos)
        if match is None:
            pos += 1
            continue
        name = match.group(1)
        if name in KEYWORDS:
            pos = match.end()
            continue
        open_pos = blanked.index("(", match.start())
        close = _match_paren(blanked, open_pos)
        if close == -1:
            pos = match.end()
            continue
        after = close
        while after < n and blanked[after] in " \t\r\n":
            after += 1
        if depth == 0:
            if after < n and blanked[after] == "{":
                line = blanked.count("\n", 0, match.start()) + 1
                yield ("def", name, line)
                current = name
                depth = 1
                pos = after + 1
                continue
            pos = close
            continue
        if current is not None:
            yield ("call", current, name)
        pos = match.end()


def extract(source_dir: Path) -> dict:
    """Canonical graph document for the .c/.h files under source_dir."""
    files = sorted(
        p for pattern in ("*.c", "*.h") for p in source_dir.rglob(pattern)
    )
    nodes: dict[str, dict] = {}
    raw_edges: list[tuple[str, str]] = []
    for path in files:
        rel = str(path.relative_to(source_dir))
        text = path.read_text(errors="replace")
        for event in scan_file(text):
            if event[0] == "def":
                _, name, line = event
                if name in nodes:
                    name = f"{name}@{rel}"
                    if name in nodes:
                        continue
                nodes[name] = {"name": name, "file": rel, "line": line}
            else:
                _, owner, callee = event
                raw_edges.append((owner, callee))
    edges = sorted({(a, b) for a, b in raw_edges if a in nodes and b in nodes})
    entry = "main" if "main" in nodes else (sorted(nodes)[0] if nodes else "")
    return {
        "entry": entry,
        "nodes": [nodes[name] for name in sorted(nodes)],
        "edges": [{"caller": a, "callee": b} for a, b in edges],
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pilot-cextract",
        description="Extract a naive C call graph as a canonical graph document.",
    )
    parser.add_argument("source_dir", type=Path, help="directory of C source files")
    args = parser.parse_args(argv)
    if not args.source_dir.is_dir():
        print(f"error: not a directory: {args.source_dir}", file=sys.stderr)
        return 1
    document = extract(args.source_dir)
    if not document["nodes"]:
        print("error: no functions extracted", file=sys.stderr)
        return 1
    if document["entry"] != "main":
        print(f"warning: no main(); using entry {document['entry']}", file=sys.stderr)
    json.dump(document, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
