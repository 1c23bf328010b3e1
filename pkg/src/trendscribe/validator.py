"""Rule-based guardrail for generated commentary.

Rule ids:

* ``S1`` sentence budget, ``S2`` digits outside entity names
* ``E1`` ungrounded product line, ``E2`` ungrounded region
* ``U1`` product line mentioned in more than one sentence
* ``L1`` headline salience contradicts the overall direction
* ``L2`` growth driver and detractor headlines in the same summary
* ``F1`` claimed direction disagrees with the data, ``F2`` wrong headline cell
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from typing import Literal

from .claims import Claim, Lexicon, build_lexicon, parse_summary, segment_sentences
from .ledger import DeltaTable
from .oracle import TrendAnalysis

RULE_IDS = ("S1", "S2", "E1", "E2", "U1", "L1", "L2", "F1", "F2")


@dataclass(frozen=True)
class RuleConfig:
    max_sentences: int = 4
    forbid_numerals: bool = True
    require_grounded_product_lines: bool = True
    require_grounded_regions: bool = False
    unique_product_line: bool = True
    polarity_logic: bool = True
    faithfulness_min: float = 1.0
    top_k: int = 3

    def __post_init__(self):
        if self.max_sentences < 1:
            raise ValueError("max_sentences must be >= 1")
        if not 0.0 <= self.faithfulness_min <= 1.0:
            raise ValueError("faithfulness_min must be in [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass(frozen=True)
class Violation:
    rule_id: str
    sentence_index: int
    detail: str


@dataclass(frozen=True)
class ClaimVerdict:
    claim: Claim
    checked_against: str
    consistent: bool


@dataclass(frozen=True)
class FaithfulnessScore:
    faithfulness: float
    coverage_top_k: float
    verdicts: tuple[ClaimVerdict, ...]


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]
    faithfulness: float
    coverage_top_k: float
    parsed_claims: int
    unparsed: int
    verdict: Literal["pass", "fail"]
    claim_verdicts: tuple[ClaimVerdict, ...] = field(default=(), compare=False)

    def rule_ids(self) -> set[str]:
        return {v.rule_id for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "faithfulness": self.faithfulness,
            "coverage_top_k": self.coverage_top_k,
            "parsed_claims": self.parsed_claims,
            "unparsed": self.unparsed,
            "violations": [asdict(v) for v in self.violations],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)


def _sign_word(value: float) -> str | None:
    if value > 0:
        return "up"
    if value < 0:
        return "down"
    return None


def _check_direction(claim: Claim, analysis: TrendAnalysis) -> ClaimVerdict:
    pl = claim.subject
    if claim.scope == "all_regions":
        line = analysis.consistency(pl)
        ok = line is not None and line.direction == claim.direction
        return ClaimVerdict(claim, f"consistency({pl})={line.direction if line else 'mixed'}", ok)
    if claim.scope == "specific" and claim.region_grounded:
        row = analysis.row(pl, claim.region)
        if row is None:
            return ClaimVerdict(claim, f"row({pl}, {claim.region})=absent", False)
        sign = _sign_word(row.total_difference)
        return ClaimVerdict(claim, f"row({pl}, {claim.region})={sign or 'zero'}", sign == claim.direction)
    net = analysis.per_line_net.get(pl, 0.0)
    sign = _sign_word(net)
    basis = "line_net" if claim.scope == "unspecified" else "line_net(region unresolved)"
    return ClaimVerdict(claim, f"{basis}({pl})={sign or 'zero'}", sign == claim.direction)


def _check_headline(claim: Claim, analysis: TrendAnalysis) -> tuple[bool, str]:
    target = analysis.main_driver if claim.salience == "main_driver" else analysis.main_detractor
    label = "main_driver" if claim.salience == "main_driver" else "main_detractor"
    if target is None:
        return False, f"{label}=none"
    if claim.scope == "specific" and claim.region_grounded:
        ok = (claim.subject, claim.region) == target
    else:
        ok = claim.subject == target[0]
    return ok, f"{label}=({target[0]}, {target[1]})"


def score_faithfulness(claims: list[Claim] | tuple[Claim, ...], analysis: TrendAnalysis, top_k: int = 3) -> FaithfulnessScore:
    """Share of grounded claims consistent with the oracle, plus top-k coverage.

    A claim is consistent when its direction matches the data for its scope
    and, for headline claims, it names the oracle's headline cell. With no
    grounded claims the score is 0.
    """
    verdicts = []
    for claim in claims:
        if not claim.subject_grounded:
            continue
        v = _check_direction(claim, analysis)
        if claim.salience != "plain":
            ok, basis = _check_headline(claim, analysis)
            v = ClaimVerdict(claim, f"{v.checked_against}; {basis}", v.consistent and ok)
        verdicts.append(v)
    faithfulness = sum(v.consistent for v in verdicts) / len(verdicts) if verdicts else 0.0

    key_rows = [r for r in analysis.ranked_rows if r.total_difference != 0][:top_k]
    subjects = {c.subject for c in claims if c.subject_grounded}
    coverage = sum(r.product_line in subjects for r in key_rows) / len(key_rows) if key_rows else 0.0
    return FaithfulnessScore(faithfulness, coverage, tuple(verdicts))


def _mask_entities(sentence: str, lexicon: Lexicon) -> str:
    out = sentence
    for m in reversed(lexicon.mentions(sentence)):
        out = out[:m.start] + " " * (m.end - m.start) + out[m.end:]
    return out


def validate(
    summary: str,
    table: DeltaTable,
    analysis: TrendAnalysis,
    rules: RuleConfig = RuleConfig(),
    lexicon: Lexicon | None = None,
) -> ValidationReport:
    lexicon = lexicon or build_lexicon(table)
    parsed = parse_summary(summary, lexicon)
    sentences = parsed.sentences or tuple(segment_sentences(summary, lexicon))
    claims = parsed.claims
    violations: list[Violation] = []

    for i in range(rules.max_sentences, len(sentences)):
        violations.append(Violation("S1", i + 1, f"sentence {i + 1} exceeds the limit of {rules.max_sentences}"))

    if rules.forbid_numerals:
        for i, sentence in enumerate(sentences, start=1):
            digits = re.findall(r"\d+", _mask_entities(sentence, lexicon))
            if digits:
                violations.append(Violation("S2", i, f"numerals outside entity names: {', '.join(digits)}"))

    for c in claims:
        if rules.require_grounded_product_lines and not c.subject_grounded:
            violations.append(Violation("E1", c.sentence_index, f"unknown product line {c.subject!r}"))
        if rules.require_grounded_regions and c.scope == "specific" and not c.region_grounded:
            violations.append(Violation("E2", c.sentence_index, f"unknown region {c.region!r}"))

    if rules.unique_product_line:
        first_seen: dict[str, int] = {}
        flagged: set[tuple[str, int]] = set()
        for c in claims:
            if not c.subject_grounded:
                continue
            first = first_seen.setdefault(c.subject, c.sentence_index)
            if c.sentence_index != first and (c.subject, c.sentence_index) not in flagged:
                flagged.add((c.subject, c.sentence_index))
                violations.append(Violation("U1", c.sentence_index, f"{c.subject} already mentioned in sentence {first}"))

    if rules.polarity_logic:
        direction = analysis.overall_direction
        seen: dict[str, int] = {}
        for c in claims:
            if c.salience == "plain":
                continue
            allowed = "increase" if c.salience == "main_driver" else "decrease"
            if direction != allowed:
                violations.append(Violation("L1", c.sentence_index, f"{c.salience} claim while overall direction is {direction}"))
            other = "main_detractor" if c.salience == "main_driver" else "main_driver"
            if other in seen:
                violations.append(Violation("L2", c.sentence_index, f"{c.salience} alongside {other} in sentence {seen[other]}"))
            seen.setdefault(c.salience, c.sentence_index)

    score = score_faithfulness(claims, analysis, rules.top_k)
    for v in score.verdicts:
        c = v.claim
        direction_ok = _check_direction(c, analysis).consistent
        if not direction_ok:
            violations.append(Violation("F1", c.sentence_index, f"{c.subject} {c.direction} contradicts {v.checked_against}"))
        if c.salience != "plain" and not _check_headline(c, analysis)[0]:
            violations.append(Violation("F2", c.sentence_index, f"{c.subject} is not the oracle's {c.salience}"))

    violations.sort(key=lambda v: (v.sentence_index, RULE_IDS.index(v.rule_id), v.detail))
    verdict = "pass" if not violations and score.faithfulness >= rules.faithfulness_min else "fail"
    return ValidationReport(
        violations=tuple(violations),
        faithfulness=score.faithfulness,
        coverage_top_k=score.coverage_top_k,
        parsed_claims=len(claims),
        unparsed=len(parsed.unparsed),
        verdict=verdict,
        claim_verdicts=score.verdicts,
    )
