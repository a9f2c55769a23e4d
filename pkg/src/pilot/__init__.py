"""LLM-driven initial seed generation for command-line fuzzing.

The package turns a program's static call graph into fuzzer-ready seed
corpora: it ranks functions by centrality, asks an LLM to produce commands
and input files that reach the highest-ranked targets, refines the commands
with coverage feedback, and extracts single-line seeds from the accepted
test scripts.
"""

__version__ = "0.1.0"

from pilot.callgraph import (
    CallGraph,
    CallGraphView,
    CallPath,
    FunctionRef,
    dump_call_graph,
    enumerate_paths,
    extract_call_graph,
    load_call_graph,
    mark_covered,
)
from pilot.centrality import (
    CentralityConfig,
    Strategy,
    StructuralFeatures,
    centrality_scores,
    kernel_backend,
    structural_features,
)
from pilot.coverage import CoverageReport, parse_report, serialize_report
from pilot.llm import MockClient, PriceTable, TokenUsage, cost
from pilot.orchestrator import CampaignConfig, CampaignResult, run_campaign
from pilot.sandbox import Workspace, init_workspace
from pilot.seeds import SeedArtifact, materialize_corpus, write_corpus
from pilot.strategy import DecisionRule, builtin_rules, derive_rules, recommend

__all__ = [
    "CallGraph",
    "CallGraphView",
    "CallPath",
    "CampaignConfig",
    "CampaignResult",
    "CentralityConfig",
    "CoverageReport",
    "DecisionRule",
    "FunctionRef",
    "MockClient",
    "PriceTable",
    "SeedArtifact",
    "Strategy",
    "StructuralFeatures",
    "TokenUsage",
    "Workspace",
    "builtin_rules",
    "centrality_scores",
    "cost",
    "derive_rules",
    "dump_call_graph",
    "enumerate_paths",
    "extract_call_graph",
    "init_workspace",
    "kernel_backend",
    "load_call_graph",
    "mark_covered",
    "materialize_corpus",
    "parse_report",
    "recommend",
    "run_campaign",
    "serialize_report",
    "structural_features",
    "write_corpus",
    "__version__",
]
