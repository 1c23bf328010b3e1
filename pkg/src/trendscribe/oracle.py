"""Deterministic trend analysis of a delta table.

This is the reasoning a business controller applies before writing
commentary: overall direction, the headline driver or detractor, product
lines moving the same way everywhere, and which cells matter. It is the
ground truth for validation and the content source of the mock backend.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Literal

from .ledger import DeltaTable

Direction = Literal["increase", "decrease", "flat"]
Impact = Literal["major", "minor"]


@dataclass(frozen=True)
class OracleConfig:
    major_threshold_pct: float = 10.0
    flat_epsilon: float = 0.0

    def __post_init__(self):
        if not self.major_threshold_pct >= 0:
            raise ValueError("major_threshold_pct must be >= 0")
        if not self.flat_epsilon >= 0:
            raise ValueError("flat_epsilon must be >= 0")


@dataclass(frozen=True)
class RankedRow:
    product_line: str
    region: str
    total_difference: float
    contribution_pct: float
    impact: Impact


@dataclass(frozen=True)
class ConsistentLine:
    product_line: str
    direction: Literal["up", "down"]


@dataclass(frozen=True)
class TrendAnalysis:
    overall_direction: Direction
    net_total: float
    ranked_rows: tuple[RankedRow, ...]
    main_driver: tuple[str, str] | None
    main_detractor: tuple[str, str] | None
    consistent_lines: tuple[ConsistentLine, ...]
    per_line_net: dict[str, float]

    def row(self, product_line: str, region: str) -> RankedRow | None:
        for r in self.ranked_rows:
            if r.product_line == product_line and r.region == region:
                return r
        return None

    def consistency(self, product_line: str) -> ConsistentLine | None:
        for c in self.consistent_lines:
            if c.product_line == product_line:
                return c
        return None

    def to_dict(self) -> dict:
        data = asdict(self)
        data["main_driver"] = _pair(self.main_driver)
        data["main_detractor"] = _pair(self.main_detractor)
        data["per_line_net"] = {k: self.per_line_net[k] for k in sorted(self.per_line_net)}
        return data

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)


def _pair(pair: tuple[str, str] | None) -> dict | None:
    return None if pair is None else {"product_line": pair[0], "region": pair[1]}


def classify_impact(contribution_pct: float, cfg: OracleConfig = OracleConfig()) -> Impact:
    """``major`` iff |contribution| >= threshold (boundary inclusive)."""
    return "major" if abs(contribution_pct) >= cfg.major_threshold_pct else "minor"


def analyze(table: DeltaTable, cfg: OracleConfig = OracleConfig()) -> TrendAnalysis:
    net = table.net_total
    if net > cfg.flat_epsilon:
        direction: Direction = "increase"
    elif net < -cfg.flat_epsilon:
        direction = "decrease"
    else:
        direction = "flat"

    ranked = tuple(
        RankedRow(r.product_line, r.region, r.total_difference, r.contribution_pct, classify_impact(r.contribution_pct, cfg))
        for r in sorted(table.rows, key=lambda r: (-abs(r.contribution_pct), r.product_line, r.region))
    )

    positives = [r for r in table.rows if r.contribution_pct > 0]
    negatives = [r for r in table.rows if r.contribution_pct < 0]
    driver = min(positives, key=lambda r: (-r.contribution_pct, r.key), default=None)
    detractor = min(negatives, key=lambda r: (r.contribution_pct, r.key), default=None)

    by_line: dict[str, list[float]] = {}
    for r in table.rows:
        by_line.setdefault(r.product_line, []).append(r.total_difference)
    per_line_net = {pl: math.fsum(deltas) for pl, deltas in by_line.items()}

    consistent = []
    for pl, deltas in by_line.items():
        if all(d > 0 for d in deltas):
            consistent.append(ConsistentLine(pl, "up"))
        elif all(d < 0 for d in deltas):
            consistent.append(ConsistentLine(pl, "down"))
    consistent.sort(key=lambda c: (-abs(per_line_net[c.product_line]), c.product_line))

    return TrendAnalysis(
        overall_direction=direction,
        net_total=net,
        ranked_rows=ranked,
        main_driver=driver.key if driver else None,
        main_detractor=detractor.key if detractor else None,
        consistent_lines=tuple(consistent),
        per_line_net=per_line_net,
    )


def baseline_sentences(analysis: TrendAnalysis, max_sentences: int = 4) -> list[str]:
    """Template sentences in priority order, one mention per product line.

    The headline sentence is emitted only when it agrees with the overall
    direction: a growth driver under an increase, a detractor under a
    decrease, neither when flat.
    """
    if max_sentences < 1:
        raise ValueError("max_sentences must be >= 1")
    out: list[str] = []
    mentioned: set[str] = set()

    def emit(pl: str, sentence: str) -> None:
        if len(out) < max_sentences and pl not in mentioned:
            out.append(sentence)
            mentioned.add(pl)

    if analysis.overall_direction == "increase" and analysis.main_driver:
        pl, region = analysis.main_driver
        emit(pl, f"{pl} in {region} as main growth driver.")
    elif analysis.overall_direction == "decrease" and analysis.main_detractor:
        pl, region = analysis.main_detractor
        emit(pl, f"{pl} in {region} as main detractor.")

    for line in analysis.consistent_lines:
        word = "up" if line.direction == "up" else "down"
        emit(line.product_line, f"{line.product_line} {word} in all regions.")

    for row in analysis.ranked_rows:
        if row.impact != "major" or row.total_difference == 0:
            continue
        word = "Increase" if row.total_difference > 0 else "Decrease"
        emit(row.product_line, f"{word} from {row.product_line} in {row.region}.")

    return out


def baseline_summary(analysis: TrendAnalysis, max_sentences: int = 4) -> str:
    return " ".join(baseline_sentences(analysis, max_sentences))
