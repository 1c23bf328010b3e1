"""Two-period observations, per-cell deltas and contribution shares.

The delta table is the single data product every later stage consumes: one
row per (product line, region) with the period-over-period change and its
signed share of the total absolute movement.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Iterable, Literal

RAW_COLUMNS = ("business_area", "product_line", "region", "period", "value")
PREAGGREGATED_COLUMNS = ("product_line", "region", "total_difference")
OPTIONAL_CONTRIBUTION_COLUMN = "contribution_pct"

HEADER_LABELS = ("Product Line", "Region", "Total Difference", "Contribution (%)")

_DECIMAL_RE = re.compile(r"^-?\d+(\.\d*)?$")


class LedgerError(ValueError):
    """Base class for ingestion and table errors."""


class MissingColumn(LedgerError):
    def __init__(self, name: str):
        super().__init__(f"missing column {name!r}")
        self.name = name


class BadDecimal(LedgerError):
    def __init__(self, row: int, col: str, text: str = ""):
        super().__init__(f"row {row}, column {col!r}: not a decimal: {text!r}")
        self.row = row
        self.col = col


class BadLabel(LedgerError):
    def __init__(self, row: int, col: str):
        super().__init__(f"row {row}, column {col!r}: empty label")
        self.row = row
        self.col = col


class PeriodCountMismatch(LedgerError):
    def __init__(self, found: int):
        super().__init__(f"raw data must contain exactly two periods, found {found}")
        self.found = found


class DuplicateKey(LedgerError):
    def __init__(self, product_line: str, region: str):
        super().__init__(f"duplicate row for ({product_line!r}, {region!r})")
        self.product_line = product_line
        self.region = region


class UnknownPeriod(LedgerError):
    def __init__(self, label: str):
        super().__init__(f"unknown period {label!r}")
        self.label = label


class RaggedRow(LedgerError):
    def __init__(self, row: int, found: int, expected: int):
        super().__init__(f"row {row}: {found} fields, header has {expected}")
        self.row = row


class EmptyTable(LedgerError):
    def __init__(self):
        super().__init__("delta table has no rows")


@dataclass(frozen=True)
class Observation:
    business_area: str
    product_line: str
    region: str
    period: str
    value: float


@dataclass(frozen=True)
class ObservationSet:
    rows: tuple[Observation, ...]
    periods: frozenset[str]

    def __post_init__(self):
        for i, row in enumerate(self.rows, start=1):
            if row.period not in self.periods:
                raise UnknownPeriod(row.period)
            for col in ("business_area", "product_line", "region", "period"):
                if not getattr(row, col).strip():
                    raise BadLabel(i, col)
            if not math.isfinite(row.value):
                raise BadDecimal(i, "value", repr(row.value))


@dataclass(frozen=True)
class DeltaRow:
    product_line: str
    region: str
    total_difference: float
    contribution_pct: float = 0.0

    @property
    def key(self) -> tuple[str, str]:
        return (self.product_line, self.region)


@dataclass(frozen=True)
class DeltaTable:
    rows: tuple[DeltaRow, ...]
    period_a: str = "previous"
    period_b: str = "current"
    net_total: float = field(init=False)
    abs_total: float = field(init=False)

    def __post_init__(self):
        seen: set[tuple[str, str]] = set()
        for row in self.rows:
            if row.key in seen:
                raise DuplicateKey(*row.key)
            seen.add(row.key)
        object.__setattr__(self, "net_total", math.fsum(r.total_difference for r in self.rows))
        object.__setattr__(self, "abs_total", math.fsum(abs(r.total_difference) for r in self.rows))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def product_lines(self) -> list[str]:
        return sorted({r.product_line for r in self.rows})

    @property
    def regions(self) -> list[str]:
        return sorted({r.region for r in self.rows})

    def row(self, product_line: str, region: str) -> DeltaRow | None:
        for r in self.rows:
            if r.product_line == product_line and r.region == region:
                return r
        return None

    def scaled(self, factor: float) -> "DeltaTable":
        """Every delta multiplied by ``factor``, contributions recomputed."""
        rows = tuple(replace(r, total_difference=r.total_difference * factor) for r in self.rows)
        return compute_contributions(DeltaTable(rows, self.period_a, self.period_b))


def parse_decimal(text: str, row: int, col: str) -> float:
    text = text.strip()
    if not _DECIMAL_RE.match(text):
        raise BadDecimal(row, col, text)
    try:
        value = Decimal(text)
    except InvalidOperation:  # pragma: no cover - regex already guards this
        raise BadDecimal(row, col, text) from None
    return float(value)


def _read_rows(path: Path, required: Iterable[str]) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        reader.fieldnames = header
        for name in required:
            if name not in header:
                raise MissingColumn(name)
        rows = []
        for i, row in enumerate(reader, start=1):
            if None in row:
                raise RaggedRow(i, len(header) + len(row[None]), len(header))
            if any((v or "").strip() for v in row.values()):
                rows.append(row)
        return header, rows


def _label(row: dict[str, str], col: str, index: int) -> str:
    text = (row.get(col) or "").strip()
    if not text:
        raise BadLabel(index, col)
    return text


def load_observations(
    path: str | Path, schema_mode: Literal["raw", "preaggregated"] = "raw"
) -> ObservationSet | DeltaTable:
    """Parse a raw observation CSV or a preaggregated delta CSV.

    Raw files must carry exactly two period labels unless the data section is
    empty. Preaggregated files get their contribution column recomputed.
    """
    path = Path(path)
    if schema_mode == "raw":
        _, records = _read_rows(path, RAW_COLUMNS)
        rows = []
        for i, rec in enumerate(records, start=1):
            rows.append(
                Observation(
                    business_area=_label(rec, "business_area", i),
                    product_line=_label(rec, "product_line", i),
                    region=_label(rec, "region", i),
                    period=_label(rec, "period", i),
                    value=parse_decimal(rec.get("value") or "", i, "value"),
                )
            )
        periods = frozenset(r.period for r in rows)
        if rows and len(periods) != 2:
            raise PeriodCountMismatch(len(periods))
        return ObservationSet(tuple(rows), periods)

    if schema_mode == "preaggregated":
        _, records = _read_rows(path, PREAGGREGATED_COLUMNS)
        rows = []
        for i, rec in enumerate(records, start=1):
            rows.append(
                DeltaRow(
                    product_line=_label(rec, "product_line", i),
                    region=_label(rec, "region", i),
                    total_difference=parse_decimal(rec.get("total_difference") or "", i, "total_difference"),
                )
            )
        return compute_contributions(DeltaTable(tuple(rows)))

    raise ValueError(f"unknown schema mode {schema_mode!r}")


def load_delta_table(path: str | Path) -> DeltaTable:
    table = load_observations(path, "preaggregated")
    assert isinstance(table, DeltaTable)
    return table


def compute_delta_table(obs: ObservationSet, period_a: str, period_b: str) -> DeltaTable:
    """Per (product line, region): sum of period_b values minus sum of period_a values.

    A cell present in only one period counts the other side as zero.
    Contributions are left at zero; see :func:`compute_contributions`.
    """
    for label in (period_a, period_b):
        if label not in obs.periods:
            raise UnknownPeriod(label)
    sums: dict[tuple[str, str], list[float]] = {}
    for row in obs.rows:
        key = (row.product_line, row.region)
        bucket = sums.setdefault(key, [[], []])
        if row.period == period_a:
            bucket[0].append(row.value)
        if row.period == period_b:
            bucket[1].append(row.value)
    rows = tuple(
        DeltaRow(pl, region, math.fsum(b) - math.fsum(a)) for (pl, region), (a, b) in sums.items()
    )
    return DeltaTable(rows, period_a, period_b)


def compute_contributions(table: DeltaTable) -> DeltaTable:
    """Signed share of absolute movement, in percent: 100 * d_i / sum(|d|)."""
    total = table.abs_total
    if total > 0:
        rows = tuple(replace(r, contribution_pct=100.0 * r.total_difference / total) for r in table.rows)
    else:
        rows = tuple(replace(r, contribution_pct=0.0) for r in table.rows)
    return DeltaTable(rows, table.period_a, table.period_b)


def _fmt(value: float) -> str:
    text = f"{value:.2f}"
    return "0.00" if text == "-0.00" else text


def sorted_rows(table: DeltaTable) -> list[DeltaRow]:
    return sorted(table.rows, key=lambda r: r.key)


def render_prompt_table(table: DeltaTable, style: Literal["aligned-text", "markdown"] = "aligned-text") -> str:
    """Deterministic text rendering of the delta table for prompt injection.

    ``aligned-text`` separates columns by at least two spaces and yields exactly
    one header line plus one line per row. ``markdown`` adds the pipe-table
    delimiter line after the header.
    """
    if not table.rows:
        raise EmptyTable()
    body = [(r.product_line, r.region, _fmt(r.total_difference), _fmt(r.contribution_pct)) for r in sorted_rows(table)]
    if style == "markdown":
        lines = ["| " + " | ".join(HEADER_LABELS) + " |", "|" + "|".join(["---", "---", "---:", "---:"]) + "|"]
        lines += ["| " + " | ".join(cells) + " |" for cells in body]
        return "\n".join(lines)
    if style != "aligned-text":
        raise ValueError(f"unknown style {style!r}")
    grid = [HEADER_LABELS, *body]
    widths = [max(len(line[c]) for line in grid) for c in range(4)]
    out = []
    for line in grid:
        cells = [line[0].ljust(widths[0]), line[1].ljust(widths[1]), line[2].rjust(widths[2]), line[3].rjust(widths[3])]
        out.append("  ".join(cells).rstrip())
    return "\n".join(out)


_HEADER_RE = re.compile(
    r"Product Line\s*(?:\||\s{2,})\s*Region\s*(?:\||\s{2,})\s*Total Difference\s*(?:\||\s{2,})\s*Contribution \(%\)"
)
_NUM_RE = re.compile(r"^-?\d+(\.\d+)?$")


def parse_prompt_table(text: str) -> DeltaTable | None:
    """Recover a delta table embedded in prompt text, or None if there is none.

    Accepts both rendering styles. Rows are read from the line after the first
    header match until the first line that is not a table row.
    """
    lines = text.splitlines()
    for start, line in enumerate(lines):
        if _HEADER_RE.search(line):
            break
    else:
        return None
    rows: list[DeltaRow] = []
    for line in lines[start + 1:]:
        stripped = line.strip()
        if stripped.startswith("|"):
            cells = [c.strip() for c in stripped.strip("|").split("|")]
            if all(set(c) <= set("-: ") for c in cells):
                continue
        else:
            cells = re.split(r"\s{2,}", stripped)
        if len(cells) != 4 or not _NUM_RE.match(cells[2]) or not _NUM_RE.match(cells[3]):
            break
        rows.append(DeltaRow(cells[0], cells[1], float(cells[2])))
    if not rows:
        return None
    return compute_contributions(DeltaTable(tuple(rows)))


def write_delta_table(table: DeltaTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*PREAGGREGATED_COLUMNS, OPTIONAL_CONTRIBUTION_COLUMN])
        for r in table.rows:
            writer.writerow([r.product_line, r.region, repr(r.total_difference), repr(r.contribution_pct)])


def example_table_path() -> Path:
    """Bundled 18-row order-intake delta table (anonymised product-line codes)."""
    return Path(str(resources.files("trendscribe") / "data" / "order_intake_deltas.csv"))


def load_example_table() -> DeltaTable:
    return load_delta_table(example_table_path())
