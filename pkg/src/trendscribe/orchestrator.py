"""Sequential prompt chains over a delta table, with run records and run logs.

Three workflow shapes are built in:

* ``WF-A`` four agents: financial data analyst, business analyst, report
  writer, financial validator. Downstream agents see only the previous
  agent's text unless ``include_table_downstream`` is set.
* ``WF-B`` one single-shot summary prompt.
* ``WF-C`` analyst then report writer; the writer gets the table and the
  analyst's output.
"""

from __future__ import annotations

import csv
import hashlib
import json
import threading
import uuid
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal

from .claims import segment_sentences
from .gateway import BackendConfig, BackendError, complete
from .ledger import DeltaTable, render_prompt_table
from .oracle import OracleConfig, analyze
from .prompts import PromptTemplate, TemplateError, load_template
from .validator import RuleConfig, ValidationReport, validate

BINDING_SOURCES = ("table", "analysis", "none")

RUNLOG_KEYS = (
    "run_id", "workflow", "stage_index", "stage_name", "template_id", "template_version",
    "backend", "model", "request_digest", "response_text", "latency", "timestamp",
)


class StageFailure(Exception):
    def __init__(self, stage_index: int, cause: Exception, record: "RunRecord | None" = None):
        super().__init__(f"stage {stage_index} failed: {type(cause).__name__}: {cause}")
        self.stage_index = stage_index
        self.cause = cause
        self.record = record


class IoFailure(Exception):
    pass


@dataclass(frozen=True)
class StageSpec:
    name: str
    template_id: str
    bindings: dict[str, str]  # placeholder -> "table" | "analysis" | "none" | "stage:<name>"
    backend: str = "mock"
    is_validator: bool = False
    template_version: int | None = None


@dataclass(frozen=True)
class WorkflowSpec:
    id: str
    stages: tuple[StageSpec, ...]
    validation_mode: Literal["passive", "off"] = "passive"

    def __post_init__(self):
        names: list[str] = []
        for stage in self.stages:
            for placeholder, source in stage.bindings.items():
                if source.startswith("stage:"):
                    if source[6:] not in names:
                        raise ValueError(f"stage {stage.name!r} binds {placeholder!r} to a later or unknown stage")
                elif source not in BINDING_SOURCES:
                    raise ValueError(f"unknown binding source {source!r}")
            names.append(stage.name)
        if not any(not s.is_validator for s in self.stages):
            raise ValueError("a workflow needs at least one non-validator stage")

    def with_backend(self, backend: str, stage: str | None = None) -> "WorkflowSpec":
        stages = tuple(replace(s, backend=backend) if stage in (None, s.name) else s for s in self.stages)
        return replace(self, stages=stages)


def builtin_workflow(workflow_id: str, backend: str = "mock", include_table_downstream: bool = False) -> WorkflowSpec:
    context = "table" if include_table_downstream else "none"
    if workflow_id == "WF-A":
        stages = (
            StageSpec("analyst", "cycle1_step1", {"table_summary": "table"}, backend),
            StageSpec("business_analyst", "cycle1_step2",
                      {"previous_output": "stage:analyst", "table_context": context}, backend),
            StageSpec("report_writer", "cycle1_step3",
                      {"previous_output": "stage:business_analyst", "table_context": context}, backend),
            StageSpec("validator", "cycle1_step4",
                      {"draft_summary": "stage:report_writer", "table_summary": "table"}, backend, is_validator=True),
        )
    elif workflow_id == "WF-B":
        stages = (StageSpec("writer", "cycle2_singleshot", {"data_block": "table"}, backend),)
    elif workflow_id == "WF-C":
        stages = (
            StageSpec("analyst", "refined_analyst", {"data_block": "table"}, backend),
            StageSpec("report_writer", "refined_writer", {"data_block": "table", "analysis": "stage:analyst"}, backend),
        )
    else:
        raise ValueError(f"unknown workflow {workflow_id!r}")
    return WorkflowSpec(workflow_id, stages)


@dataclass(frozen=True)
class StageRecord:
    stage_index: int
    stage_name: str
    template_id: str
    template_version: int
    backend: str
    model: str
    request_digest: str
    response_text: str
    latency: float
    timestamp: str


@dataclass
class RunRecord:
    run_id: str
    workflow: str
    stage_records: list[StageRecord] = field(default_factory=list)
    final_summary: str = ""
    validation: ValidationReport | None = None


@dataclass
class RunConfig:
    backends: dict[str, BackendConfig] = field(default_factory=lambda: {"mock": BackendConfig()})
    template_dir: str | Path | None = None
    oracle: OracleConfig = field(default_factory=OracleConfig)
    rules: RuleConfig = field(default_factory=RuleConfig)
    table_style: Literal["aligned-text", "markdown"] = "aligned-text"
    # None: reproducible exactly when every stage uses a mock backend
    reproducible: bool | None = None
    regenerate_on_failure: int = 0

    def __post_init__(self):
        if not 0 <= self.regenerate_on_failure <= 2:
            raise ValueError("regenerate_on_failure must be 0, 1 or 2")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _run_id() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ-") + uuid.uuid4().hex[:8]


def _bind(stage: StageSpec, table_text: str, analysis_json: str, outputs: dict[str, str]) -> dict[str, str]:
    binding = {}
    for placeholder, source in stage.bindings.items():
        if source == "table":
            binding[placeholder] = table_text
        elif source == "analysis":
            binding[placeholder] = analysis_json
        elif source == "none":
            binding[placeholder] = ""
        else:
            binding[placeholder] = outputs[source[6:]]
    return binding


def run_workflow(spec: WorkflowSpec, table: DeltaTable, run_config: RunConfig | None = None) -> RunRecord:
    """Run every stage in order; a failing stage aborts the rest.

    On failure a :class:`StageFailure` carries the partial record, whose
    ``stage_records`` hold exactly the stages that completed.
    """
    cfg = run_config or RunConfig()
    analysis = analyze(table, cfg.oracle)
    table_text = render_prompt_table(table, cfg.table_style)
    analysis_json = analysis.to_json()

    backends = {}
    for stage in spec.stages:
        if stage.backend in cfg.backends:
            backends[stage.backend] = cfg.backends[stage.backend]
    reproducible = cfg.reproducible
    if reproducible is None:
        reproducible = bool(backends) and all(b.kind == "mock" for b in backends.values())

    record = RunRecord(run_id="" if reproducible else _run_id(), workflow=spec.id)
    outputs: dict[str, str] = {}
    last_writer: tuple[StageSpec, PromptTemplate, list[dict[str, str]]] | None = None

    def call(index: int, stage: StageSpec, template: PromptTemplate, messages: list[dict[str, str]]) -> str:
        backend = cfg.backends.get(stage.backend)
        if backend is None:
            raise StageFailure(index, KeyError(f"unknown backend {stage.backend!r}"), record)
        try:
            completion = complete(backend, messages)
        except BackendError as exc:
            raise StageFailure(index, exc, record) from exc
        record.stage_records.append(
            StageRecord(
                stage_index=index,
                stage_name=stage.name,
                template_id=template.id,
                template_version=template.version,
                backend=stage.backend,
                model=completion.model,
                request_digest=completion.request_digest,
                response_text=completion.content,
                latency=0.0 if reproducible else round(completion.latency, 6),
                timestamp=f"step-{index}" if reproducible else _now(),
            )
        )
        return completion.content

    for index, stage in enumerate(spec.stages):
        try:
            template = load_template(stage.template_id, stage.template_version, cfg.template_dir)
            messages = template.render_messages(_bind(stage, table_text, analysis_json, outputs))
        except TemplateError as exc:
            raise StageFailure(index, exc, record) from exc
        outputs[stage.name] = call(index, stage, template, messages)
        if not stage.is_validator:
            last_writer = (stage, template, messages)
            record.final_summary = outputs[stage.name].strip()

    if spec.validation_mode == "passive":
        record.validation = validate(record.final_summary, table, analysis, cfg.rules)
        attempt = 0
        while record.validation.verdict == "fail" and attempt < cfg.regenerate_on_failure and last_writer:
            attempt += 1
            stage, template, messages = last_writer
            feedback = "\n".join(f"- {v.rule_id} (sentence {v.sentence_index}): {v.detail}"
                                 for v in record.validation.violations) or "- no verifiable claims"
            retry_messages = messages + [
                {"role": "assistant", "content": record.final_summary},
                {"role": "user", "content": f"The summary failed validation:\n{feedback}\nRewrite it to fix these problems."},
            ]
            retry_stage = replace(stage, name=f"{stage.name}#retry{attempt}")
            record.final_summary = call(len(spec.stages) + attempt - 1, retry_stage, template, retry_messages).strip()
            record.validation = validate(record.final_summary, table, analysis, cfg.rules)

    if reproducible:
        h = hashlib.sha256(spec.id.encode())
        for sr in record.stage_records:
            h.update(sr.request_digest.encode())
            h.update(sr.response_text.encode("utf-8"))
        record.run_id = "run-" + h.hexdigest()[:16]
    return record


def postprocess(summary: str, summary_id: str = "summary") -> tuple[list[str], list[dict[str, object]]]:
    sentences = segment_sentences(summary)
    rows = [{"summary_id": summary_id, "sentence_index": i, "sentence": s} for i, s in enumerate(sentences, start=1)]
    return sentences, rows


def write_summary_csv(rows: list[dict[str, object]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["summary_id", "sentence_index", "sentence"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


_LOG_LOCK = threading.Lock()


def runlog_lines(record: RunRecord) -> list[str]:
    lines = []
    for sr in record.stage_records:
        doc = {"run_id": record.run_id, "workflow": record.workflow, **asdict(sr)}
        lines.append(json.dumps({k: doc[k] for k in RUNLOG_KEYS}, ensure_ascii=False))
    return lines


def append_runlog(record: RunRecord, path: str | Path) -> int:
    """Append one JSON line per stage record; returns the number of lines written."""
    lines = runlog_lines(record)
    try:
        with _LOG_LOCK, open(path, "a", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")
            fh.flush()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return len(lines)
