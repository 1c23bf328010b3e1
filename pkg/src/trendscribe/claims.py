"""Sentence segmentation and claim parsing against a data-derived lexicon.

Entity mentions are tagged first (longest match, case-insensitive, word
boundaries), then each sentence is matched against a small closed set of
commentary schemata such as ``<PL> in <R> as main growth driver`` or
``<PL> up in all regions``. Mentions that cannot be resolved against the
table become ungrounded surfaces; sentences outside the grammar are kept
as unparsed rather than guessed at.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

from .ledger import DeltaTable

Direction = Literal["up", "down"]
Scope = Literal["specific", "all_regions", "unspecified"]
Salience = Literal["main_driver", "main_detractor", "plain"]

DEFAULT_DIRECTION_WORDS: dict[str, Direction] = {
    "up": "up",
    "increase": "up",
    "increases": "up",
    "increased": "up",
    "increasing": "up",
    "growth": "up",
    "growing": "up",
    "rising": "up",
    "higher": "up",
    "down": "down",
    "decrease": "down",
    "decreases": "down",
    "decreased": "down",
    "decreasing": "down",
    "decline": "down",
    "declined": "down",
    "declining": "down",
    "drop": "down",
    "falling": "down",
    "lower": "down",
}

_TOKEN = "\x00"


class BadAliasTarget(ValueError):
    def __init__(self, surface: str, target: str):
        super().__init__(f"alias {surface!r} points to unknown label {target!r}")
        self.surface = surface
        self.target = target


@dataclass(frozen=True)
class Mention:
    start: int
    end: int
    surface: str
    kind: Literal["product_line", "region"]
    canonical: str


@dataclass(frozen=True)
class Lexicon:
    product_lines: frozenset[str]
    regions: frozenset[str]
    aliases: dict[str, str] = field(default_factory=dict)
    direction_words: dict[str, Direction] = field(default_factory=lambda: dict(DEFAULT_DIRECTION_WORDS))

    def __post_init__(self):
        # lowercased surface -> {kind: canonical}
        table: dict[str, dict[str, str]] = {}
        for pl in self.product_lines:
            table.setdefault(pl.lower(), {})["product_line"] = pl
        for region in self.regions:
            table.setdefault(region.lower(), {})["region"] = region
        for surface, target in self.aliases.items():
            kinds = table.setdefault(surface.lower(), {})
            if target in self.product_lines:
                kinds.setdefault("product_line", target)
            elif target in self.regions:
                kinds.setdefault("region", target)
            else:
                raise BadAliasTarget(surface, target)
        surfaces = sorted(table, key=lambda s: (-len(s), s))
        pattern = (
            re.compile(r"(?<!\w)(?:" + "|".join(re.escape(s) for s in surfaces) + r")(?!\w)", re.IGNORECASE)
            if surfaces
            else None
        )
        object.__setattr__(self, "_surfaces", table)
        object.__setattr__(self, "_pattern", pattern)

    def lookup(self, surface: str) -> dict[str, str]:
        return self._surfaces.get(surface.lower(), {})

    def mentions(self, text: str) -> list[Mention]:
        """Non-overlapping entity spans, leftmost then longest."""
        if self._pattern is None:
            return []
        out = []
        for m in self._pattern.finditer(text):
            kinds = self._surfaces[m.group(0).lower()]
            kind = "product_line" if "product_line" in kinds else "region"
            out.append(Mention(m.start(), m.end(), m.group(0), kind, kinds[kind]))
        return out

    def mentioned_product_lines(self, text: str) -> set[str]:
        return {m.canonical for m in self.mentions(text) if m.kind == "product_line"}


def build_lexicon(table: DeltaTable, alias_file: str | Path | None = None) -> Lexicon:
    aliases: dict[str, str] = {}
    if alias_file is not None:
        aliases = load_aliases(alias_file)
    return Lexicon(
        product_lines=frozenset(r.product_line for r in table.rows),
        regions=frozenset(r.region for r in table.rows),
        aliases=aliases,
    )


def load_aliases(path: str | Path) -> dict[str, str]:
    """Alias CSV with a ``surface,canonical`` header."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return {}
        missing = {"surface", "canonical"} - {h.strip() for h in reader.fieldnames}
        if missing:
            raise ValueError(f"alias file {path} lacks columns {sorted(missing)}")
        reader.fieldnames = [h.strip() for h in reader.fieldnames]
        return {row["surface"].strip(): row["canonical"].strip() for row in reader if (row.get("surface") or "").strip()}


def segment_sentences(text: str, lexicon: Lexicon | None = None) -> list[str]:
    """Split at ``.``, ``!`` or ``?`` followed by whitespace or end of text.

    Terminators inside lexicon mentions (e.g. ``U.S.``) never split.
    """
    protected: list[tuple[int, int]] = []
    if lexicon is not None:
        protected = [(m.start, m.end) for m in lexicon.mentions(text)]
    sentences = []
    start = 0
    for m in re.finditer(r"[.!?](?=\s|$)", text):
        pos = m.start()
        if any(a <= pos < b for a, b in protected):
            continue
        sentences.append(text[start:pos + 1])
        start = pos + 1
    sentences.append(text[start:])
    return [s.strip() for s in sentences if s.strip()]


@dataclass(frozen=True)
class Claim:
    subject: str
    subject_grounded: bool
    scope: Scope
    direction: Direction
    salience: Salience
    sentence_index: int
    region: str | None = None
    region_grounded: bool = False
    qualifier: str | None = None

    def __post_init__(self):
        if self.salience == "main_driver" and self.direction != "up":
            raise ValueError("main_driver claims must point up")
        if self.salience == "main_detractor" and self.direction != "down":
            raise ValueError("main_detractor claims must point down")

    @property
    def grounded(self) -> bool:
        return self.subject_grounded


@dataclass(frozen=True)
class Unparsed:
    sentence_index: int
    text: str


@dataclass(frozen=True)
class ParseResult:
    claims: tuple[Claim, ...]
    unparsed: tuple[Unparsed, ...]
    sentences: tuple[str, ...] = ()


@dataclass(frozen=True)
class _Slot:
    surface: str
    canonical: str | None


class _Tagged:
    """A sentence with entity spans replaced by indexed placeholder tokens."""

    def __init__(self, sentence: str, lexicon: Lexicon):
        self.mentions = lexicon.mentions(sentence)
        self.lexicon = lexicon
        parts = []
        last = 0
        for i, m in enumerate(self.mentions):
            parts.append(sentence[last:m.start])
            parts.append(f"{_TOKEN}{i}{_TOKEN}")
            last = m.end
        parts.append(sentence[last:])
        self.text = "".join(parts)

    def untag(self, text: str) -> str:
        return re.sub(f"{_TOKEN}(\\d+){_TOKEN}", lambda m: self.mentions[int(m.group(1))].surface, text)

    def resolve(self, text: str, kind: str, split: bool) -> list[_Slot]:
        """Resolve a slot to grounded labels of ``kind`` or ungrounded surfaces."""
        text = re.sub(r"^the\s+", "", text.strip(), flags=re.IGNORECASE)
        parts = [p for p in re.split(r"\s*(?:,\s*and\s+|,|\band\b|&)\s*", text) if p.strip()] if split else [text]
        token_re = re.compile(f"^{_TOKEN}(\\d+){_TOKEN}$")
        singles = []
        for part in parts:
            part = re.sub(r"^the\s+", "", part.strip(), flags=re.IGNORECASE)
            m = token_re.match(part)
            if m:
                mention = self.mentions[int(m.group(1))]
                canonical = self.lexicon.lookup(mention.surface).get(kind)
                singles.append(_Slot(mention.surface, canonical))
            else:
                singles.append(_Slot(self.untag(part), None))
        if kind == "product_line" and len(singles) > 1 and not any(token_re.match(p.strip()) for p in parts):
            return [_Slot(self.untag(text), None)]
        return singles


def _grammar(lexicon: Lexicon) -> list[tuple[str, re.Pattern]]:
    words = sorted(lexicon.direction_words, key=lambda w: (-len(w), w))
    d = "(?:" + "|".join(re.escape(w) for w in words) + ")"
    qual = r"(?:,\s*(?P<q>mainly|primarily|partly|especially)\s+(?:in\s+)?(?P<qreg>.+?))?"
    flags = re.IGNORECASE
    return [
        (
            "main",
            re.compile(
                r"^(?P<subj>.+?)\s+in\s+(?P<reg>.+?)\s+as\s+(?:the\s+|a\s+)?main\s+"
                r"(?P<kind>growth\s+drivers?|drivers?|detractors?)"
                r"(?:,\s*partly\s+offset\s+by\s+(?P<subj2>.+?)\s+in\s+(?P<reg2>.+?)"
                rf"|,\s*with\s+(?:(?:major|minor|significant|strong|slight)\s+)?(?P<wdir>{d})\s+(?:also\s+)?in\s+"
                r"(?P<wreg>.+?)|,\s*with\s+.*)?$",
                flags,
            ),
        ),
        (
            "noun",
            re.compile(
                rf"^(?:(?:major|minor|significant|strong|slight|further)\s+)?(?P<dir>{d})\s+(?:from|in)\s+"
                rf"(?P<pairs>.+?){qual}$",
                flags,
            ),
        ),
        (
            "in",
            re.compile(
                rf"^(?P<subj>.+?)\s+(?P<dir>{d})\s+in\s+(?P<reg>.+?)"
                rf"(?:,\s*but\s+(?P<dir2>{d})\s+in\s+(?P<reg2>.+?)|{qual})$",
                flags,
            ),
        ),
        ("bare", re.compile(rf"^(?P<subj>.+?)\s+(?P<dir>{d}){qual}$", flags)),
    ]


# "All product lines up." says nothing checkable about a named entity
_QUANTIFIED = re.compile(r"^(?:all|every|each|both|most|many|several|some)\b", re.IGNORECASE)
_ALL_REGIONS = re.compile(r"^(?:all|every)\s+regions?$", re.IGNORECASE)


class ClaimParser:
    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon
        self.grammar = _grammar(lexicon)

    def direction(self, word: str) -> Direction:
        return self.lexicon.direction_words[word.lower()]

    def parse_sentence(self, sentence: str, index: int) -> list[Claim]:
        tagged = _Tagged(sentence, self.lexicon)
        body = re.sub(r"[.!?]+$", "", tagged.text.strip()).strip()
        for name, pattern in self.grammar:
            m = pattern.match(body)
            if not m:
                continue
            claims = getattr(self, f"_claims_{name}")(m, tagged, index)
            if claims:
                return claims
        return []

    def _claims(self, tagged, index, subj, reg, direction, salience, qualifier=None) -> list[Claim]:
        subjects = tagged.resolve(subj, "product_line", split=True)
        if any(s.canonical is None and _QUANTIFIED.match(s.surface) for s in subjects):
            return []
        if reg is None:
            regions: list[_Slot | None] = [None]
            scope: Scope = "unspecified"
        elif _ALL_REGIONS.match(tagged.untag(reg).strip()):
            regions = [None]
            scope = "all_regions"
        else:
            regions = tagged.resolve(reg, "region", split=True)
            scope = "specific"
        out = []
        for s in subjects:
            for r in regions:
                out.append(
                    Claim(
                        subject=s.canonical or s.surface,
                        subject_grounded=s.canonical is not None,
                        scope=scope,
                        direction=direction,
                        salience=salience,
                        sentence_index=index,
                        region=None if r is None else (r.canonical or r.surface),
                        region_grounded=r is not None and r.canonical is not None,
                        qualifier=qualifier,
                    )
                )
        return out

    def _qualifier(self, m, tagged) -> str | None:
        if m.groupdict().get("q"):
            return f"{m.group('q').lower()} {tagged.untag(m.group('qreg')).strip()}"
        return None

    def _claims_main(self, m, tagged, index):
        kind = m.group("kind").lower()
        salience: Salience = "main_detractor" if kind.startswith("detractor") else "main_driver"
        direction: Direction = "down" if salience == "main_detractor" else "up"
        out = self._claims(tagged, index, m.group("subj"), m.group("reg"), direction, salience)
        if m.group("subj2"):
            opposite: Direction = "up" if direction == "down" else "down"
            out += self._claims(tagged, index, m.group("subj2"), m.group("reg2"), opposite, "plain")
        if m.group("wdir"):
            out += self._claims(tagged, index, m.group("subj"), m.group("wreg"), self.direction(m.group("wdir")), "plain")
        return out

    def _claims_noun(self, m, tagged, index):
        # "<S> in <R>" chunks joined by "and"; a chunk without "in" extends the previous region list
        chunks: list[str] = []
        for part in re.split(r"\s+and\s+", m.group("pairs")):
            if re.search(r"\s+in\s+", part) or not chunks:
                chunks.append(part)
            else:
                chunks[-1] += " and " + part
        direction = self.direction(m.group("dir"))
        out = []
        for chunk in chunks:
            pair = re.match(r"^(?P<subj>.+?)\s+in\s+(?P<reg>.+)$", chunk)
            if not pair:
                return []
            out += self._claims(tagged, index, pair.group("subj"), pair.group("reg"), direction, "plain",
                                self._qualifier(m, tagged))
        return out

    def _claims_in(self, m, tagged, index):
        out = self._claims(tagged, index, m.group("subj"), m.group("reg"), self.direction(m.group("dir")), "plain",
                           self._qualifier(m, tagged))
        if m.group("dir2"):
            out += self._claims(tagged, index, m.group("subj"), m.group("reg2"), self.direction(m.group("dir2")), "plain")
        return out

    def _claims_bare(self, m, tagged, index):
        direction = self.direction(m.group("dir"))
        if m.group("q") and m.group("q").lower() in ("mainly", "primarily", "especially"):
            # "increasing, mainly in R" is checked against R
            return self._claims(tagged, index, m.group("subj"), m.group("qreg"), direction, "plain",
                                self._qualifier(m, tagged))
        return self._claims(tagged, index, m.group("subj"), None, direction, "plain")


def parse_summary(text: str, lexicon: Lexicon) -> ParseResult:
    parser = ClaimParser(lexicon)
    sentences = segment_sentences(text, lexicon)
    claims: list[Claim] = []
    unparsed: list[Unparsed] = []
    for i, sentence in enumerate(sentences, start=1):
        found = parser.parse_sentence(sentence, i)
        if found:
            claims.extend(found)
        else:
            unparsed.append(Unparsed(i, sentence))
    return ParseResult(tuple(claims), tuple(unparsed), tuple(sentences))
