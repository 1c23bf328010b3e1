"""What the validator catches, one injected failure at a time.

Each fault class is switched on with probability 1 in the mock backend and the
resulting summary is checked against the same table.

Run: python3 demos/03_validator_and_faults.py
"""

from trendscribe import analyze, load_example_table, render_prompt_table, validate
from trendscribe.faults import FAULT_CLASSES, FaultProfile
from trendscribe.gateway import mock_complete
from trendscribe.prompts import load_template

table = load_example_table()
analysis = analyze(table)
messages = load_template("cycle2_singleshot").render_messages({"data_block": render_prompt_table(table)})

clean = mock_complete("oracle", None, FaultProfile(), messages).content
report = validate(clean, table, analysis)
print(f"clean: {clean}\n  -> {report.verdict}, faithfulness {report.faithfulness:.2f}, coverage {report.coverage_top_k:.2f}\n")

for fault in FAULT_CLASSES:
    text = mock_complete("oracle", None, FaultProfile.only(fault), messages).content
    report = validate(text, table, analysis)
    rules = ", ".join(f"{v.rule_id}@{v.sentence_index}" for v in report.violations) or "none"
    print(f"{fault}:\n  {text.replace(chr(10), ' | ')[:150]}")
    print(f"  -> {report.verdict}; violations {rules}; coverage {report.coverage_top_k:.2f}; "
          f"unparsed {report.unparsed}\n")

# A summary naming both a driver and a detractor contradicts itself under the refinement rules.
both = "CCVE in AMER - Americas as main growth driver. CCVE in APAC - Asia/Pacific as main detractor."
print("both headlines ->", sorted(validate(both, table, analysis).rule_ids()))
