"""Campaign driver: centrality-ranked target loop with coverage feedback.

One campaign walks the unvisited-function set in centrality order. Each
target gets an initial generation attempt plus up to n_trial refinements;
covering it triggers branch-level refinement, failing all attempts exhausts
it. Covered functions leave the scoring view, scores are recomputed, and
the loop continues until the target budget or the candidate set runs out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import coverage as cov
from .callgraph import CallGraph, CallPath, FunctionRef, enumerate_paths, mark_covered, render_path
from .centrality import CentralityVector, Strategy, centrality_scores, structural_features
from .llm import (
    ActionParseError,
    ClientParams,
    Conversation,
    ModifyData,
    PromptContext,
    TokenUsage,
    compose_prompt,
    parse_action,
)
from .sandbox import (
    RUN_TEST_NAME,
    ExecutionResult,
    SandboxError,
    ToolReport,
    Workspace,
    provision_tools,
    run_script,
    service_action,
)
from .strategy import DecisionRule, recommend

COVERAGE_FILE_NAME = "coverage.out"

SYSTEM_PROMPT = (
    "You are generating command-line test cases for the target program in "
    "this workspace. Always answer with a single JSON object using one of "
    "the modes read_data, modify_data, or execute_command."
)

CORRECTIVE_TEMPLATE = (
    "Error: {detail}. Respond with a single JSON object whose \"mode\" is "
    "one of read_data, modify_data, or execute_command."
)


@dataclass
class CampaignConfig:
    n_trial: int = 2
    n_target: int = 10
    k_paths: int = 100
    confidence_floor: float = 0.30
    branch_refine_max: int = 2
    script_timeout_s: float = 30.0
    strategy_override: Strategy | None = None
    rng_seed: int = 0
    action_cap: int = 25
    malformed_cap: int = 3
    context_budget: int = 160_000
    path_token_budget: int = 20_000
    read_token_budget: int = 8_000
    input_tools: tuple[str, ...] = ("ffmpeg", "convert", "sox", "mencoder")


@dataclass
class AttemptRecord:
    phase: str
    failed: bool
    exit_code: int | None
    timed_out: bool
    covered: bool


@dataclass
class TargetState:
    function: FunctionRef
    trial: int = 0
    covered: bool = False
    attempts: list[AttemptRecord] = field(default_factory=list)


@dataclass
class ProcessedTarget:
    state: TargetState
    outcome: str
    scripts: list[str] = field(default_factory=list)
    branch_cycles: int = 0


@dataclass
class CampaignResult:
    strategy: Strategy
    processed: list[ProcessedTarget]
    cumulative: cov.CoverageReport
    scripts: list[str]
    usage: TokenUsage
    calls: list[tuple[int, int]]
    tool_reports: list[ToolReport] = field(default_factory=list)
    aborted: bool = False

    def ledger(self, program: str, now: str | None = None) -> dict:
        entry = {
            "program": program,
            "strategy": self.strategy.value,
            "aborted": self.aborted,
            "tools": [
                {"name": t.name, "verified": t.verified, "attempts": t.attempts}
                for t in self.tool_reports
            ],
            "targets": [
                {
                    "function": p.state.function.location,
                    "outcome": p.outcome,
                    "attempts": [
                        {
                            "phase": a.phase,
                            "failed": a.failed,
                            "exit_code": a.exit_code,
                            "timed_out": a.timed_out,
                            "covered": a.covered,
                        }
                        for a in p.state.attempts
                    ],
                    "branch_cycles": p.branch_cycles,
                    "scripts": p.scripts,
                }
                for p in self.processed
            ],
            "scripts": self.scripts,
            "covered_functions": sorted(self.cumulative.covered_functions),
            "usage": {
                "input_tokens": self.usage.input_tokens,
                "output_tokens": self.usage.output_tokens,
                "chat_count": self.usage.chat_count,
            },
            "calls": [
                {"input_tokens": i, "output_tokens": o} for i, o in self.calls
            ],
        }
        if now is not None:
            entry["generated_at"] = now
        return entry


def select_target(candidates: Iterable[FunctionRef], scores: CentralityVector) -> FunctionRef:
    """Highest-scoring candidate; name order breaks ties."""
    best: FunctionRef | None = None
    for ref in candidates:
        if best is None:
            best = ref
            continue
        a, b = scores.scores[ref.name], scores.scores[best.name]
        if a > b or (a == b and ref.name < best.name):
            best = ref
    if best is None:
        raise ValueError("select_target requires a nonempty candidate set")
    return best


class Campaign:
    """Mutable state of one run; use run_campaign for the plain entry point."""

    def __init__(
        self,
        g: CallGraph,
        config: CampaignConfig,
        rules: list[DecisionRule] | None,
        llm_client,
        ws: Workspace,
        tool_specs: list[dict] | None = None,
    ):
        self.g = g
        self.config = config
        self.ws = ws
        self.tool_specs = tool_specs or []
        self.cumulative = cov.CoverageReport()
        self.conversation = Conversation(
            llm_client,
            SYSTEM_PROMPT,
            ClientParams(),
            context_budget=config.context_budget,
        )
        self.script_seq = 0
        self.scripts: list[str] = []
        if config.strategy_override is not None:
            self.strategy = config.strategy_override
        else:
            features = structural_features(g)
            self.strategy = recommend(features, rules, config.confidence_floor).strategy

    # -- context helpers -------------------------------------------------

    def _definition_snippet(self, ref: FunctionRef, max_lines: int = 60) -> str:
        for base in (self.ws.source_dir, self.ws.program_dir, self.ws.root):
            candidate = base / ref.file
            if candidate.is_file():
                lines = candidate.read_text(errors="replace").splitlines()
                body = lines[ref.line - 1 : ref.line - 1 + max_lines]
                depth = 0
                for i, line in enumerate(body):
                    depth += line.count("{") - line.count("}")
                    if depth <= 0 and i > 0:
                        return "\n".join(body[: i + 1])
                if body:
                    return "\n".join(body)
        return f"{ref.name} (definition not available; see {ref.file}:{ref.line})"

    def _prompt_context(self, target: FunctionRef, paths: list[CallPath]) -> PromptContext:
        return PromptContext(
            program=self.ws.program,
            target=target,
            definition=self._definition_snippet(target),
            paths=[render_path(p) for p in paths],
            tools=list(self.config.input_tools),
            directory_tree=self.ws.directory_tree(),
            token_budget=self.config.path_token_budget,
            workspace_root=self.ws.root,
        )

    def _collect_coverage(self) -> cov.CoverageReport:
        """Pick up the coverage file the run left at the workspace root."""
        coverage_path = self.ws.root / COVERAGE_FILE_NAME
        if not coverage_path.is_file():
            return cov.CoverageReport()
        try:
            report = cov.parse_report(coverage_path.read_text())
        except cov.CoverageFormatError:
            return cov.CoverageReport()
        finally:
            coverage_path.unlink()
        return report

    # -- generation ------------------------------------------------------

    def _drive_actions(self, prompt: str) -> bool:
        """Send a prompt and service actions until run_test.sh is written.

        Returns True when the model delivered a test script, False when the
        attempt failed (malformed-response cap or action cap reached).
        """
        response = self.conversation.send(prompt)
        malformed = 0
        for _ in range(self.config.action_cap):
            try:
                action = parse_action(response)
            except ActionParseError as exc:
                malformed += 1
                if malformed >= self.config.malformed_cap:
                    return False
                response = self.conversation.send(CORRECTIVE_TEMPLATE.format(detail=exc))
                continue
            malformed = 0
            reply = service_action(
                self.ws,
                action,
                token_budget=self.config.read_token_budget,
                script_timeout_s=self.config.script_timeout_s,
            )
            if isinstance(action, ModifyData) and Path(action.file).name == RUN_TEST_NAME:
                return True
            response = self.conversation.send(reply)
        return False

    def _run_test(self) -> tuple[ExecutionResult, cov.CoverageReport]:
        result = run_script(self.ws, self.ws.run_test_script, self.config.script_timeout_s)
        report = self._collect_coverage()
        self.cumulative.merge(report)
        return result, report

    def _preserve_script(self) -> str:
        self.script_seq += 1
        kept = self.ws.preserve_script(self.script_seq)
        rel = str(kept.relative_to(self.ws.root))
        self.scripts.append(rel)
        return rel

    def attempt_target(self, state: TargetState, paths: list[CallPath]) -> TargetState:
        """One generate-execute-analyze cycle for an uncovered target."""
        ctx = self._prompt_context(state.function, paths)
        if state.trial == 0:
            phase = "initial"
        else:
            phase = "refinement"
            ctx.prior_command = (
                self.ws.run_test_script.read_text(errors="replace")
                if self.ws.run_test_script.is_file()
                else "(no script was produced)"
            )
            ctx.covered_feedback = cov.covered_path_feedback(self.cumulative, paths)
        prompt = compose_prompt(phase, ctx)
        if not self._drive_actions(prompt):
            state.attempts.append(AttemptRecord(phase, True, None, False, False))
            state.trial += 1
            return state
        result, report = self._run_test()
        covered = state.function.name in report.covered_functions
        state.attempts.append(
            AttemptRecord(phase, False, result.exit_code, result.timed_out, covered)
        )
        if covered:
            state.covered = True
        else:
            state.trial += 1
        return state

    def branch_refinement(self, target: FunctionRef, paths: list[CallPath]) -> tuple[list[str], int]:
        """Chase uncovered branches of a just-covered target.

        Runs at most branch_refine_max cycles, stopping as soon as a cycle
        takes a branch the frozen baseline had not. Returns preserved script
        names and the cycle count.
        """
        baseline_branches = set(self.cumulative.taken_branches)
        table = cov.build_branch_table(self.g, self.cumulative)
        extra: list[str] = []
        cycles = 0
        for _ in range(self.config.branch_refine_max):
            uncovered = cov.uncovered_branches(self.cumulative, target, table)
            if not uncovered:
                break
            cycles += 1
            ctx = self._prompt_context(target, paths)
            ctx.uncovered_branches = [cov.render_branch_site(s) for s in uncovered]
            prompt = compose_prompt("branch", ctx)
            if not self._drive_actions(prompt):
                continue
            _, report = self._run_test()
            extra.append(self._preserve_script())
            table = cov.build_branch_table(self.g, self.cumulative)
            if report.taken_branches - baseline_branches:
                break
        return extra, cycles

    # -- main loop -------------------------------------------------------

    def run(self) -> CampaignResult:
        g = self.g
        unvisited = set(g.nodes)
        covered_names: set[str] = set()
        processed: list[ProcessedTarget] = []
        tool_reports = provision_tools(self.ws, self.tool_specs) if self.tool_specs else []
        aborted = False
        try:
            while unvisited and len(processed) < self.config.n_target:
                view = mark_covered(g, covered_names)
                rng_seed = self.config.rng_seed if self.strategy is Strategy.RANDOM else None
                scores = centrality_scores(view, self.strategy, rng_seed=rng_seed)
                target = select_target((g.nodes[name] for name in sorted(unvisited)), scores)
                paths = enumerate_paths(g, target.name, self.config.k_paths)
                if not paths:
                    unvisited.discard(target.name)
                    processed.append(
                        ProcessedTarget(TargetState(function=target), "unreachable")
                    )
                    continue
                state = TargetState(function=target)
                while state.trial <= self.config.n_trial and not state.covered:
                    state = self.attempt_target(state, paths)
                target_scripts: list[str] = []
                branch_cycles = 0
                if state.covered:
                    target_scripts.append(self._preserve_script())
                    extra, branch_cycles = self.branch_refinement(target, paths)
                    target_scripts.extend(extra)
                    outcome = "reached"
                else:
                    outcome = "exhausted"
                covered_names |= {n for n in self.cumulative.covered_functions if n in g.nodes}
                unvisited -= covered_names
                unvisited.discard(target.name)
                processed.append(
                    ProcessedTarget(state, outcome, target_scripts, branch_cycles)
                )
        except SandboxError:
            aborted = True
        return CampaignResult(
            strategy=self.strategy,
            processed=processed,
            cumulative=self.cumulative,
            scripts=self.scripts,
            usage=self.conversation.usage,
            calls=list(self.conversation.calls),
            tool_reports=tool_reports,
            aborted=aborted,
        )


def run_campaign(
    g: CallGraph,
    config: CampaignConfig,
    rules: list[DecisionRule] | None,
    llm_client,
    ws: Workspace,
    tool_specs: list[dict] | None = None,
) -> CampaignResult:
    """Run one full campaign over the graph; see Campaign for the state."""
    return Campaign(g, config, rules, llm_client, ws, tool_specs).run()
