"""Qualitative commentary for two-period financial delta tables.

Pipeline: :mod:`ledger` (deltas and contributions) -> :mod:`oracle` (trend
analysis) -> :mod:`prompts` + :mod:`gateway` + :mod:`orchestrator` (LLM
workflows) -> :mod:`claims` + :mod:`validator` (grounding and logic checks)
-> :mod:`evaluation` (pair metrics and chain error simulation).
"""

from .claims import Claim, Lexicon, build_lexicon, parse_summary, segment_sentences
from .faults import FAULT_CLASSES, FaultProfile
from .gateway import BackendConfig, Completion, complete, mock_complete
from .ledger import (DeltaRow, DeltaTable, ObservationSet, compute_contributions, compute_delta_table,
                     load_delta_table, load_example_table, load_observations, render_prompt_table)
from .oracle import OracleConfig, TrendAnalysis, analyze, baseline_summary, classify_impact
from .orchestrator import RunConfig, RunRecord, WorkflowSpec, append_runlog, builtin_workflow, postprocess, run_workflow
from .prompts import PromptTemplate, lint_template, load_template, render
from .validator import RuleConfig, ValidationReport, score_faithfulness, validate

__version__ = "0.1.0"
