"""Command-line surface: graph extraction through seed corpus emission.

Subcommands map onto the pipeline stages:

    extract-graph     run the extractor over a source tree
    features          dump structural features as flat key = value text
    recommend         pick a target-selection strategy for a graph
    campaign          run the full generation loop (mock-first)
    seeds             convert accepted scripts into a seed corpus
    report-cost       price a campaign ledger
    convert-coverage  adapt gcov JSON to the canonical coverage format

Exit codes: 0 success, 1 invalid input or flags, 2 runtime failure.
Config file is flat key=value text; flags win over file values.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .callgraph import (
    CallGraph,
    ExtractorError,
    GraphDocumentError,
    extract_call_graph,
    load_call_graph,
)
from .centrality import Strategy, structural_features
from .coverage import CoverageFormatError, convert_gcov_json
from .llm import API_KEY_ENV, HttpClient, MockClient, PriceTable, TokenUsage, cost
from .orchestrator import CampaignConfig, run_campaign
from .sandbox import SandboxError, Workspace, init_workspace
from .seeds import materialize_corpus, write_corpus
from .strategy import builtin_rules, parse_rules, recommend

DEFAULT_EXTRACTOR = f"{sys.executable} -m pilot.cextract"

CONFIG_KEYS = {
    "n_trial": int,
    "n_target": int,
    "k_paths": int,
    "confidence_floor": float,
    "branch_refine_max": int,
    "script_timeout_s": float,
    "rng_seed": int,
    "strategy_override": str,
    "rules": str,
    "extractor": str,
    "price_in": float,
    "price_out": float,
    "endpoint": str,
    "model": str,
}


class CliError(ValueError):
    """Invalid flags, config, or input files (exit 1)."""


def load_config_file(path) -> dict:
    """Flat key=value config; unknown or malformed keys are named in errors."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def _setting(args, file_cfg: dict, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return default


def _write_out(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_graph(path) -> CallGraph:
    try:
        return load_call_graph(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read graph {path}: {exc}") from exc


def _load_rules(args, file_cfg):
    rules_path = _setting(args, file_cfg, "rules", None)
    if rules_path:
        return parse_rules(Path(rules_path).read_text())
    return builtin_rules()


def _format_number(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.12g}"


def cmd_extract_graph(args, file_cfg) -> int:
    extractor = _setting(args, file_cfg, "extractor", DEFAULT_EXTRACTOR)
    document = extract_call_graph(args.src, extractor)
    _write_out(document, args.out)
    return 0


def cmd_features(args, file_cfg) -> int:
    g = _read_graph(args.graph)
    features = structural_features(g)
    lines = [f"{key} = {_format_number(value)}" for key, value in features.as_dict().items()]
    _write_out("\n".join(lines) + "\n", args.out)
    return 0


def cmd_recommend(args, file_cfg) -> int:
    g = _read_graph(args.graph)
    features = structural_features(g)
    rules = _load_rules(args, file_cfg)
    floor = _setting(args, file_cfg, "confidence_floor", 0.30)
    rec = recommend(features, rules, floor)
    lines = [
        f"strategy = {rec.strategy.value}",
        f"confidence = {rec.confidence:.4f}",
        f"matched = {'; '.join(rec.matched) if rec.matched else '(none)'}",
    ]
    for strat in sorted(rec.per_strategy_confidence, key=lambda s: s.value):
        lines.append(f"confidence[{strat.value}] = {rec.per_strategy_confidence[strat]:.4f}")
    _write_out("\n".join(lines) + "\n", args.out)
    return 0


def _campaign_config(args, file_cfg) -> CampaignConfig:
    override = _setting(args, file_cfg, "strategy_override", None)
    try:
        strategy = Strategy[override] if override else None
    except KeyError:
        raise CliError(f"unknown strategy {override!r}") from None
    return CampaignConfig(
        n_trial=_setting(args, file_cfg, "n_trial", 2),
        n_target=_setting(args, file_cfg, "n_target", 10),
        k_paths=_setting(args, file_cfg, "k_paths", 100),
        confidence_floor=_setting(args, file_cfg, "confidence_floor", 0.30),
        branch_refine_max=_setting(args, file_cfg, "branch_refine_max", 2),
        script_timeout_s=_setting(args, file_cfg, "script_timeout_s", 30.0),
        strategy_override=strategy,
        rng_seed=_setting(args, file_cfg, "rng_seed", 0),
    )


def _campaign_client(args, file_cfg):
    if args.mock and args.live:
        raise CliError("pass either --mock TRANSCRIPT or --live, not both")
    if args.mock:
        return MockClient.from_file(args.mock)
    if args.live:
        if not os.environ.get(API_KEY_ENV):
            raise CliError(f"--live requires {API_KEY_ENV} in the environment")
        endpoint = _setting(args, file_cfg, "endpoint", None)
        model = _setting(args, file_cfg, "model", None)
        if not endpoint or not model:
            raise CliError("--live requires --endpoint and --model")
        return HttpClient(endpoint, model)
    raise CliError("campaign requires --mock TRANSCRIPT or --live")


def cmd_campaign(args, file_cfg) -> int:
    g = _read_graph(args.graph)
    config = _campaign_config(args, file_cfg)
    client = _campaign_client(args, file_cfg)
    rules = _load_rules(args, file_cfg)
    tool_specs = []
    for spec in args.tool or []:
        name, _, install = spec.partition("=")
        if not name:
            raise CliError(f"bad --tool spec {spec!r}")
        tool_specs.append({"name": name, "install_command": install})
    ws = init_workspace(args.src, args.workdir, program=args.program)
    result = run_campaign(g, config, rules, client, ws, tool_specs)
    ledger = result.ledger(ws.program, now=args.now)
    ledger["workspace"] = str(ws.root)
    _write_out(json.dumps(ledger, indent=2, sort_keys=True) + "\n", args.out)
    return 2 if result.aborted else 0


def _reopen_workspace(root: Path) -> Workspace:
    root = Path(root).resolve()
    program_dirs = sorted(p for p in root.iterdir() if p.is_dir() and p.name.endswith("-work"))
    if not program_dirs:
        raise CliError(f"{root} does not look like a workspace (no *-work directory)")
    program_dir = program_dirs[0]
    return Workspace(root=root, program_dir=program_dir, program=program_dir.name[: -len("-work")])


def cmd_seeds(args, file_cfg) -> int:
    ws = _reopen_workspace(args.workspace)
    scripts = args.script or sorted(
        str(p.relative_to(ws.root)) for p in ws.program_dir.glob("run_test[0-9]*.sh")
    )
    if not scripts:
        raise CliError("no run_test scripts found; pass --script explicitly")
    client = MockClient.from_file(args.mock) if args.mock else None
    artifacts = materialize_corpus(ws, scripts, args.out, client)
    if not artifacts:
        raise CliError("no artifacts produced from the given scripts")
    write_corpus(artifacts, args.format, args.out)
    summary = [f"{a.seed_id}: {a.seed_line} ({len(a.input_files)} files)" for a in artifacts]
    sys.stdout.write("\n".join(summary) + "\n")
    return 0


def cmd_report_cost(args, file_cfg) -> int:
    try:
        ledger = json.loads(Path(args.ledger).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read ledger {args.ledger}: {exc}") from exc
    usage_entry = ledger.get("usage", ledger)
    usage = TokenUsage(
        input_tokens=int(usage_entry.get("input_tokens", 0)),
        output_tokens=int(usage_entry.get("output_tokens", 0)),
        chat_count=int(usage_entry.get("chat_count", 0)),
    )
    prices = PriceTable(
        _setting(args, file_cfg, "price_in", 0.0),
        _setting(args, file_cfg, "price_out", 0.0),
    )
    total = cost(usage, prices)
    lines = [
        f"input_tokens = {usage.input_tokens}",
        f"output_tokens = {usage.output_tokens}",
        f"chat_count = {usage.chat_count}",
        f"cost_usd = {total:.6f}",
    ]
    _write_out("\n".join(lines) + "\n", args.out)
    return 0


def cmd_convert_coverage(args, file_cfg) -> int:
    text = Path(args.gcov_json).read_text()
    _write_out(convert_gcov_json(text), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pilot", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-graph", help="extract a call graph from source")
    p.add_argument("--src", required=True, help="source directory")
    p.add_argument("--extractor", help="extractor command (gets the source dir appended)")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_extract_graph)

    p = sub.add_parser("features", help="dump structural features")
    p.add_argument("--graph", required=True, help="canonical graph document")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("recommend", help="recommend a selection strategy")
    p.add_argument("--graph", required=True)
    p.add_argument("--rules", help="custom rules file")
    p.add_argument("--confidence-floor", dest="confidence_floor", type=float)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("campaign", help="run the generation campaign")
    p.add_argument("--graph", required=True)
    p.add_argument("--src", required=True, help="target program source directory")
    p.add_argument("--workdir", default=".", help="where to create the workspace")
    p.add_argument("--program", help="program name (default: source dir name)")
    p.add_argument("--mock", help="mock transcript JSON (offline replay)")
    p.add_argument("--live", action="store_true", help="allow a live LLM endpoint")
    p.add_argument("--endpoint", help="chat completions URL for --live")
    p.add_argument("--model", help="model name for --live")
    p.add_argument("--rules", help="custom rules file")
    p.add_argument("--n-trial", dest="n_trial", type=int)
    p.add_argument("--n-target", dest="n_target", type=int)
    p.add_argument("--k-paths", dest="k_paths", type=int)
    p.add_argument("--confidence-floor", dest="confidence_floor", type=float)
    p.add_argument("--branch-refine-max", dest="branch_refine_max", type=int)
    p.add_argument("--script-timeout-s", dest="script_timeout_s", type=float)
    p.add_argument("--strategy-override", dest="strategy_override")
    p.add_argument("--rng-seed", dest="rng_seed", type=int)
    p.add_argument("--tool", action="append", help="NAME=INSTALL_COMMAND, repeatable")
    p.add_argument("--now", help="timestamp string recorded in the ledger")
    p.add_argument("--out", help="ledger output file (default stdout)")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("seeds", help="build a seed corpus from accepted scripts")
    p.add_argument("--workspace", required=True, help="workspace root from a campaign")
    p.add_argument("--script", action="append", help="script path, repeatable (default run_test*.sh)")
    p.add_argument("--format", choices=("single_line", "argv_dictionary"), default="single_line")
    p.add_argument("--mock", help="mock transcript for LLM-assisted extraction")
    p.add_argument("--out", required=True, help="corpus output directory")
    p.set_defaults(func=cmd_seeds)

    p = sub.add_parser("report-cost", help="price a campaign ledger")
    p.add_argument("--ledger", required=True)
    p.add_argument("--price-in", dest="price_in", type=float)
    p.add_argument("--price-out", dest="price_out", type=float)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_report_cost)

    p = sub.add_parser("convert-coverage", help="convert gcov JSON to the canonical format")
    p.add_argument("--gcov-json", dest="gcov_json", required=True)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_convert_coverage)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    file_cfg = {}
    try:
        if args.config:
            file_cfg = load_config_file(args.config)
        return args.func(args, file_cfg)
    except (CliError, GraphDocumentError, CoverageFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ExtractorError, SandboxError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
