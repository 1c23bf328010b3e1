import numpy as np
import pytest

from trendscribe.claims import Lexicon, build_lexicon, parse_summary
from trendscribe.evaluation import random_delta_table
from trendscribe.faults import FAULT_CLASSES, FaultProfile
from trendscribe.gateway import mock_complete
from trendscribe.ledger import DeltaRow, DeltaTable, compute_contributions, load_delta_table, render_prompt_table
from trendscribe.oracle import analyze, baseline_summary
from trendscribe.prompts import load_template
from trendscribe.validator import RuleConfig, score_faithfulness, validate

import seeds

# validator rule expected to fire for each fault class; None means a coverage or unparsed check
FAULT_RULES = {
    "drop_top_driver": None,
    "repeat_product_line": "U1",
    "contradict_direction": "F1",
    "inject_ungrounded_entity": "E1",
    "inject_numeral": "S2",
    "emit_code_block": None,
}


def small_table():
    rows = (DeltaRow("Service", "US", 10.0), DeltaRow("Service", "EMEA", 5.0), DeltaRow("Hardware", "US", -3.0))
    return compute_contributions(DeltaTable(rows))


def check(summary, table=None, rules=RuleConfig(), lexicon=None):
    table = table or small_table()
    return validate(summary, table, analyze(table), rules, lexicon)


def test_numeral_is_flagged():
    report = check("Service up 5% in all regions.")
    assert "S2" in report.rule_ids()
    assert report.verdict == "fail"


def test_digits_inside_entity_names_are_exempt():
    table = compute_contributions(DeltaTable((DeltaRow("Other 3rd party products", "US", -4.0),
                                              DeltaRow("Service", "US", 9.0))))
    report = check("Decrease from Other 3rd party products in US.", table)
    assert "S2" not in report.rule_ids()


def test_both_headlines_trigger_l2():
    report = check("Service in US as main growth driver. Hardware in US as main detractor.")
    assert "L2" in report.rule_ids()
    assert "L1" in report.rule_ids()  # the detractor headline is also wrong under an increase


def test_driver_under_decrease_triggers_l1():
    table = compute_contributions(DeltaTable((DeltaRow("A", "X", 1.0), DeltaRow("B", "X", -9.0))))
    report = check("A in X as main growth driver.", table)
    assert "L1" in report.rule_ids()


def test_wrong_headline_cell_triggers_f2():
    report = check("Service in EMEA as main growth driver.")
    assert "F2" in report.rule_ids()
    assert "F1" not in report.rule_ids()


def test_sentence_cap():
    report = check("Service up in all regions. Hardware down in US. A. B. C.")
    assert [v.sentence_index for v in report.violations if v.rule_id == "S1"] == [5]
    assert "S1" not in check("Service up in all regions.", rules=RuleConfig(max_sentences=1)).rule_ids()


def test_u1_counts_sentences_not_claims():
    report = check("Service up in US and EMEA. Service up in all regions.")
    assert [v.sentence_index for v in report.violations if v.rule_id == "U1"] == [2]


def test_e2_off_by_default_and_optional():
    summary = "Hardware down in Canada."
    assert "E2" not in check(summary).rule_ids()
    assert "E2" in check(summary, rules=RuleConfig(require_grounded_regions=True)).rule_ids()


def test_ungrounded_region_falls_back_to_line_net():
    (verdict,) = check("Hardware down in Canada.").claim_verdicts
    assert verdict.consistent and verdict.checked_against.startswith("line_net")


def test_empty_summary_gets_zero_faithfulness():
    report = check("")
    assert report.faithfulness == 0.0 and report.coverage_top_k == 0.0
    assert report.verdict == "fail"


def test_empty_claim_list_scores_zero():
    score = score_faithfulness([], analyze(small_table()))
    assert (score.faithfulness, score.coverage_top_k) == (0.0, 0.0)


def test_single_matching_driver_claim():
    table = small_table()
    claims = parse_summary("Service in US as main growth driver.", build_lexicon(table)).claims
    assert score_faithfulness(claims, analyze(table)).faithfulness == 1.0


def test_report_is_deterministic(table3_path):
    table = load_delta_table(table3_path)
    summary = "CCVE in AMER - Americas as main growth driver. CCHD up in all regions. 7 more."
    assert check(summary, table).to_json() == check(summary, table).to_json()


@pytest.mark.parametrize("seed", range(200))
def test_baseline_passes(seed):
    table = random_delta_table(np.random.default_rng([seed, 11]))
    analysis = analyze(table)
    report = validate(baseline_summary(analysis), table, analysis)
    assert report.violations == ()
    assert report.faithfulness == 1.0
    assert report.verdict == "pass"


BAD_SENTENCES = ["Quantum Widgets up in all regions.", "Revenue rose 12 percent.", "Service down in all regions."]


@pytest.mark.parametrize("extra", BAD_SENTENCES)
def test_monotonicity(extra):
    for seed in range(30):
        table = random_delta_table(np.random.default_rng([seed, 12]))
        analysis = analyze(table)
        base = baseline_summary(analysis)
        before = validate(base + " Quantum Widgets down.", table, analysis)
        after = validate(base + " Quantum Widgets down. " + extra, table, analysis)
        kept = {(v.rule_id, v.sentence_index, v.detail) for v in before.violations}
        assert kept <= {(v.rule_id, v.sentence_index, v.detail) for v in after.violations}


@pytest.mark.parametrize("factor", [0.001, 3.0, 1e6])
def test_positive_scale_invariance(factor):
    for seed in range(30):
        table = random_delta_table(np.random.default_rng([seed, 13]))
        scaled = table.scaled(factor)
        for summary in (baseline_summary(analyze(table)), seeds.GPT4O_MODEL, "Anything up in all regions. Foo."):
            a = validate(summary, table, analyze(table))
            b = validate(summary, scaled, analyze(scaled))
            assert a.verdict == b.verdict
            assert [(v.rule_id, v.sentence_index) for v in a.violations] == [
                (v.rule_id, v.sentence_index) for v in b.violations]


@pytest.mark.parametrize("fault", FAULT_CLASSES)
def test_fault_classes_are_detected(fault):
    template = load_template("cycle2_singleshot")
    for seed in range(100):
        table = random_delta_table(np.random.default_rng([seed, 14]))
        analysis = analyze(table)
        messages = template.render_messages({"data_block": render_prompt_table(table)})
        clean = validate(mock_complete("oracle", None, FaultProfile(), messages).content, table, analysis)
        faulty = validate(mock_complete("oracle", None, FaultProfile.only(fault), messages).content, table, analysis)
        assert clean.verdict == "pass"
        if FAULT_RULES[fault]:
            assert FAULT_RULES[fault] in faulty.rule_ids()
        elif fault == "drop_top_driver":
            assert faulty.coverage_top_k < clean.coverage_top_k
        else:
            assert faulty.parsed_claims == 0 and faulty.unparsed > clean.unparsed


def test_gpt4o_seed_table_matches_published_statements():
    table = seeds.gpt4o_table()
    analysis = analyze(table)
    assert analysis.main_driver == ("Beta Bags and Consumables", "EMEA")
    assert analysis.main_detractor == ("Sterilization", "EMEA")
    assert analysis.overall_direction == "increase"
    assert analysis.consistency("Sterilization").direction == "down"


def test_gpt4o_model_summary_scores():
    table = seeds.gpt4o_table()
    report = validate(seeds.GPT4O_MODEL, table, analyze(table))
    assert report.faithfulness == 1.0
    assert {"L1", "L2"} <= report.rule_ids()
    assert "F1" not in report.rule_ids() and "F2" not in report.rule_ids()
    detractor = [v for v in report.claim_verdicts if v.claim.salience == "main_detractor"]
    assert detractor and detractor[0].consistent


def test_gpt4o_expert_summary_scores():
    table = seeds.gpt4o_table()
    lexicon = Lexicon(frozenset(seeds.GPT4O_DELTAS), frozenset(seeds.GPT4O_REGIONS),
                      {"BetaBags": "Beta Bags and Consumables"})
    report = validate(seeds.GPT4O_EXPERT, table, analyze(table), lexicon=lexicon)
    sterilization = [v for v in report.claim_verdicts if v.claim.subject == "Sterilization"]
    assert [v.consistent for v in sterilization] == [True]
    assert report.faithfulness == 1.0
    assert report.rule_ids() == {"S1"}  # six sentences against a cap of four
