"""Fault classes the mock backend can inject into otherwise clean output.

Each class mimics a failure seen when chaining small local models: dropped
headline drivers, fabricated entities, numerals despite instructions,
repeated product lines, flipped directions, and replying with a script
instead of prose. Text without an embedded table is still corrupted, just
without lexicon guidance.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields

import numpy as np

from .claims import Lexicon, parse_summary, segment_sentences
from .oracle import TrendAnalysis

FAULT_CLASSES = (
    "drop_top_driver",
    "repeat_product_line",
    "contradict_direction",
    "inject_ungrounded_entity",
    "inject_numeral",
    "emit_code_block",
)

FABRICATED_PRODUCT_LINES = (
    "CC Advanced Analytics Suite",
    "Quantum Imaging Kits",
    "Nebula Monitoring Platform",
    "Orion Service Bundles",
)

CODE_BLOCK = (
    "```python\n"
    "import pandas as pd\n"
    "df = pd.read_csv('order_intake.csv')\n"
    "summary = df.groupby(['product_line', 'region'])['total_difference'].sum()\n"
    "print(summary.sort_values())\n"
    "```"
)

_FLIPS = [
    (r"\bmain\s+growth\s+driver", "main detractor"),
    (r"\bmain\s+detractor", "main growth driver"),
    (r"^increase\b", "Decrease"),
    (r"^decrease\b", "Increase"),
    (r"\bincreasing\b", "decreasing"),
    (r"\bdecreasing\b", "increasing"),
    (r"\bup\b", "down"),
    (r"\bdown\b", "up"),
]


@dataclass(frozen=True)
class FaultProfile:
    drop_top_driver: float = 0.0
    repeat_product_line: float = 0.0
    contradict_direction: float = 0.0
    inject_ungrounded_entity: float = 0.0
    inject_numeral: float = 0.0
    emit_code_block: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in FAULT_CLASSES:
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} probability {p} outside [0, 1]")

    @classmethod
    def only(cls, fault: str, probability: float = 1.0, seed: int = 0) -> "FaultProfile":
        if fault not in FAULT_CLASSES:
            raise ValueError(f"unknown fault class {fault!r}")
        return cls(**{fault: probability}, seed=seed)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def is_clean(self) -> bool:
        return all(getattr(self, name) == 0 for name in FAULT_CLASSES)


def _join(sentences: list[str]) -> str:
    return " ".join(sentences)


def _mask(sentence: str, lexicon: Lexicon | None) -> tuple[str, list[tuple[int, int, str]]]:
    if lexicon is None:
        return sentence, []
    spans = [(m.start, m.end, m.surface) for m in lexicon.mentions(sentence)]
    masked = sentence
    for i, (a, b, _) in reversed(list(enumerate(spans))):
        masked = masked[:a] + f"\x00{i}\x00" + masked[b:]
    return masked, spans


def _unmask(text: str, spans: list[tuple[int, int, str]]) -> str:
    return re.sub(r"\x00(\d+)\x00", lambda m: spans[int(m.group(1))][2], text)


def flip_direction(sentence: str, lexicon: Lexicon | None = None) -> str | None:
    """First direction phrase swapped for its opposite, or None if there is none."""
    masked, spans = _mask(sentence, lexicon)
    for pattern, repl in _FLIPS:
        new, n = re.subn(pattern, repl, masked, count=1, flags=re.IGNORECASE)
        if n:
            return _unmask(new, spans)
    return None


def drop_top_driver(sentences, rng, analysis, lexicon):
    if analysis is not None and lexicon is not None and analysis.ranked_rows:
        top = analysis.ranked_rows[0].product_line
        kept = [s for s in sentences if top not in lexicon.mentioned_product_lines(s)]
        if len(kept) < len(sentences):
            return kept
    return sentences[1:]


def repeat_product_line(sentences, rng, analysis, lexicon):
    if not sentences:
        return sentences
    candidates = list(range(len(sentences)))
    if lexicon is not None:
        parsed = parse_summary(_join(sentences), lexicon)
        grounded = sorted({c.sentence_index - 1 for c in parsed.claims if c.subject_grounded})
        candidates = grounded or candidates
    pick = candidates[int(rng.integers(len(candidates)))]
    return sentences + [sentences[pick]]


def contradict_direction(sentences, rng, analysis, lexicon):
    flippable = [i for i, s in enumerate(sentences) if flip_direction(s, lexicon) is not None]
    if not flippable:
        return sentences
    pick = flippable[int(rng.integers(len(flippable)))]
    out = list(sentences)
    out[pick] = flip_direction(out[pick], lexicon)
    return out


def inject_ungrounded_entity(sentences, rng, analysis, lexicon):
    names = [n for n in FABRICATED_PRODUCT_LINES if lexicon is None or not lexicon.lookup(n)]
    name = names[int(rng.integers(len(names)))]
    word = "up" if rng.random() < 0.5 else "down"
    position = int(rng.integers(len(sentences) + 1))
    return sentences[:position] + [f"{name} {word} in all regions."] + sentences[position:]


def inject_numeral(sentences, rng, analysis, lexicon):
    pct = int(rng.integers(2, 40))
    return sentences + [f"Total order intake moved by roughly {pct} percent."]


def emit_code_block(sentences, rng, analysis, lexicon):
    return ["Here is a script that computes the summary:", CODE_BLOCK]


_OPS = {
    "drop_top_driver": drop_top_driver,
    "repeat_product_line": repeat_product_line,
    "contradict_direction": contradict_direction,
    "inject_ungrounded_entity": inject_ungrounded_entity,
    "inject_numeral": inject_numeral,
    "emit_code_block": emit_code_block,
}


def apply_faults(
    text: str,
    profile: FaultProfile,
    rng: np.random.Generator,
    analysis: TrendAnalysis | None = None,
    lexicon: Lexicon | None = None,
) -> tuple[str, list[str]]:
    """Apply each fault class independently with its probability.

    One uniform draw is consumed per class, in ``FAULT_CLASSES`` order, even
    for zero probabilities, so streams stay aligned across profiles.
    Returns the new text and the list of faults that fired.
    """
    sentences = segment_sentences(text, lexicon)
    fired = []
    for name in FAULT_CLASSES:
        u = rng.random()
        if u < getattr(profile, name):
            sentences = _OPS[name](sentences, rng, analysis, lexicon)
            fired.append(name)
    if "emit_code_block" in fired:
        return "\n".join(sentences), fired
    return _join(sentences), fired
