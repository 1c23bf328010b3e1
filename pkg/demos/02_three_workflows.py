"""Run the four-agent chain, the single-shot prompt and the two-stage refinement offline.

All three use the mock backend, so the runs are reproducible: the same run id,
the same stage texts, the same summary every time.

Run: python3 demos/02_three_workflows.py
"""

import tempfile
from pathlib import Path

from trendscribe import builtin_workflow, load_example_table, run_workflow
from trendscribe.orchestrator import append_runlog, postprocess

table = load_example_table()
log = Path(tempfile.mkdtemp()) / "runlog.jsonl"

for wf in ("WF-A", "WF-B", "WF-C"):
    record = run_workflow(builtin_workflow(wf), table)
    print(f"== {wf}  run {record.run_id}")
    for stage in record.stage_records:
        first_line = stage.response_text.splitlines()[0] if stage.response_text else ""
        print(f"   stage {stage.stage_index} {stage.stage_name:<17} {stage.template_id} v{stage.template_version}: "
              f"{first_line[:70]}")
    sentences, _ = postprocess(record.final_summary)
    for i, s in enumerate(sentences, 1):
        print(f"   {i}. {s}")
    print(f"   verdict: {record.validation.verdict}; {append_runlog(record, log)} run-log lines\n")

print("run log:", log)
