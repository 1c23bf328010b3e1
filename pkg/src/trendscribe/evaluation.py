"""Generated-vs-reference comparison and chained-error simulation."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from .claims import Lexicon, build_lexicon, parse_summary
from .faults import FAULT_CLASSES, FaultProfile
from .gateway import mock_complete
from .ledger import DeltaRow, DeltaTable, compute_contributions, load_delta_table, render_prompt_table, write_delta_table
from .oracle import OracleConfig, analyze, baseline_summary
from .prompts import load_template
from .validator import RULE_IDS, RuleConfig, validate

PRODUCT_LINE_POOL = (
    "CCVE", "CCSE", "CCOT", "CCHH", "CCHD", "CCAA", "Service", "Ventilation", "Anesthesia",
    "Sterilization", "Bio Reactors", "Fluid Pathway", "Isolation", "Hardware",
    "Other 3rd party products", "Monitoring Disposables", "Beta Bags and Consumables", "CC Other",
)
REGION_POOL = ("EMEA - EMEA", "APAC - Asia/Pacific", "AMER - Americas", "US", "China", "Canada", "LATAM")


def random_delta_table(
    rng: np.random.Generator,
    max_lines: int = 6,
    max_regions: int = 3,
    allow_flat: bool = False,
) -> DeltaTable:
    """Random table with integer deltas on a product-line x region grid.

    Some cells get a zero delta, some lines share a sign across regions.
    Unless ``allow_flat``, the net total is nonzero.
    """
    while True:
        n_lines = int(rng.integers(1, max_lines + 1))
        n_regions = int(rng.integers(1, max_regions + 1))
        lines = rng.choice(PRODUCT_LINE_POOL, size=n_lines, replace=False)
        regions = rng.choice(REGION_POOL, size=n_regions, replace=False)
        rows = []
        for pl in lines:
            bias = rng.choice([-1.0, 0.0, 1.0])
            for region in regions:
                if rng.random() < 0.1:
                    delta = 0.0
                else:
                    magnitude = float(rng.integers(1, 10_000_000))
                    sign = bias if bias and rng.random() < 0.8 else rng.choice([-1.0, 1.0])
                    delta = sign * magnitude
                rows.append(DeltaRow(str(pl), str(region), float(delta)))
        table = compute_contributions(DeltaTable(tuple(rows)))
        if table.abs_total > 0 and (allow_flat or table.net_total != 0):
            return table


@dataclass(frozen=True)
class PairMetrics:
    entity_overlap: float
    direction_agreement: float
    coverage_top_k_gen: float
    coverage_top_k_ref: float
    violation_counts: dict[str, int]
    verdict: Literal["pass", "fail"]
    name: str = ""


def _jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def _first_directions(claims) -> dict[str, str]:
    out: dict[str, str] = {}
    for c in claims:
        if c.subject_grounded:
            out.setdefault(c.subject, c.direction)
    return out


def evaluate_pair(
    generated: str,
    reference: str,
    table: DeltaTable,
    oracle: OracleConfig = OracleConfig(),
    rules: RuleConfig = RuleConfig(),
    lexicon: Lexicon | None = None,
    name: str = "",
) -> PairMetrics:
    """Compare a generated summary with a reference written for the same table.

    Entity overlap is the Jaccard index of grounded product-line mentions.
    Direction agreement only looks at subjects claimed in both texts (1.0 when
    there are none). The verdict comes from validating ``generated``.
    """
    lexicon = lexicon or build_lexicon(table)
    analysis = analyze(table, oracle)
    gen_report = validate(generated, table, analysis, rules, lexicon)
    ref_report = validate(reference, table, analysis, rules, lexicon)

    gen_dirs = _first_directions(parse_summary(generated, lexicon).claims)
    ref_dirs = _first_directions(parse_summary(reference, lexicon).claims)
    shared = sorted(set(gen_dirs) & set(ref_dirs))
    agreement = sum(gen_dirs[s] == ref_dirs[s] for s in shared) / len(shared) if shared else 1.0

    counts = {rule: 0 for rule in RULE_IDS}
    for v in gen_report.violations:
        counts[v.rule_id] += 1
    return PairMetrics(
        entity_overlap=_jaccard(lexicon.mentioned_product_lines(generated), lexicon.mentioned_product_lines(reference)),
        direction_agreement=agreement,
        coverage_top_k_gen=gen_report.coverage_top_k,
        coverage_top_k_ref=ref_report.coverage_top_k,
        violation_counts=counts,
        verdict=gen_report.verdict,
        name=name,
    )


class MissingCounterpart(FileNotFoundError):
    def __init__(self, name: str, missing: str):
        super().__init__(f"pair {name!r} has no {missing}")
        self.name = name
        self.missing = missing


@dataclass
class BatchResult:
    rows: list[PairMetrics] = field(default_factory=list)

    def aggregate(self) -> dict[str, float] | None:
        if not self.rows:
            return None
        n = len(self.rows)
        agg = {
            "entity_overlap": sum(r.entity_overlap for r in self.rows) / n,
            "direction_agreement": sum(r.direction_agreement for r in self.rows) / n,
            "coverage_top_k_gen": sum(r.coverage_top_k_gen for r in self.rows) / n,
            "coverage_top_k_ref": sum(r.coverage_top_k_ref for r in self.rows) / n,
            "pass_rate": sum(r.verdict == "pass" for r in self.rows) / n,
        }
        for rule in RULE_IDS:
            agg[rule] = sum(r.violation_counts[rule] for r in self.rows) / n
        return agg

    def csv_rows(self) -> list[list[str]]:
        header = ["name", "entity_overlap", "direction_agreement", "coverage_top_k_gen", "coverage_top_k_ref",
                  *RULE_IDS, "verdict"]
        out = [header]
        for r in self.rows:
            out.append([r.name, *(f"{x:.6f}" for x in (r.entity_overlap, r.direction_agreement,
                                                         r.coverage_top_k_gen, r.coverage_top_k_ref)),
                        *(str(r.violation_counts[rule]) for rule in RULE_IDS), r.verdict])
        agg = self.aggregate()
        if agg is not None:
            out.append(["AGGREGATE", *(f"{agg[k]:.6f}" for k in header[1:5]),
                        *(f"{agg[rule]:.6f}" for rule in RULE_IDS), f"pass_rate={agg['pass_rate']:.6f}"])
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.csv_rows())

    def markdown(self) -> str:
        rows = self.csv_rows()
        lines = ["| " + " | ".join(rows[0]) + " |", "|" + "---|" * len(rows[0])]
        lines += ["| " + " | ".join(r) + " |" for r in rows[1:]]
        return "\n".join(lines) + "\n"


def batch_evaluate(
    pairs_dir: str | Path,
    table_dir: str | Path | None = None,
    oracle: OracleConfig = OracleConfig(),
    rules: RuleConfig = RuleConfig(),
    workers: int = 1,
) -> BatchResult:
    """Evaluate every ``<name>.gen.txt`` against ``<name>.ref.txt`` and ``<name>.table.csv``."""
    pairs_dir = Path(pairs_dir)
    table_dir = Path(table_dir) if table_dir else pairs_dir
    names = sorted(p.name[: -len(".gen.txt")] for p in pairs_dir.glob("*.gen.txt"))
    jobs = []
    for name in names:
        ref = pairs_dir / f"{name}.ref.txt"
        tab = table_dir / f"{name}.table.csv"
        if not ref.is_file():
            raise MissingCounterpart(name, ref.name)
        if not tab.is_file():
            raise MissingCounterpart(name, tab.name)
        jobs.append((name, pairs_dir / f"{name}.gen.txt", ref, tab))

    def run(job) -> PairMetrics:
        name, gen, ref, tab = job
        return evaluate_pair(gen.read_text(encoding="utf-8"), ref.read_text(encoding="utf-8"),
                             load_delta_table(tab), oracle, rules, name=name)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(job) for job in jobs]
    return BatchResult(rows)


def write_synthetic_pairs(out_dir: str | Path, n: int = 20, seed: int = 0, fault_rate: float = 0.3) -> list[str]:
    """Mock-generated summaries paired with oracle references, one table each.

    Each generated summary comes from the mock backend with every fault class
    at ``fault_rate``; the reference is the faultless baseline.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    template = load_template("cycle2_singleshot")
    names = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        table = random_delta_table(rng)
        name = f"pair_{i:03d}"
        messages = template.render_messages({"data_block": render_prompt_table(table)})
        profile = FaultProfile(**{f: fault_rate for f in FAULT_CLASSES}, seed=seed)
        generated = mock_complete("oracle", None, profile, messages).content
        (out / f"{name}.gen.txt").write_text(generated + "\n", encoding="utf-8")
        (out / f"{name}.ref.txt").write_text(baseline_summary(analyze(table)) + "\n", encoding="utf-8")
        write_delta_table(table, out / f"{name}.table.csv")
        names.append(name)
    return names


@dataclass(frozen=True)
class ExperimentResult:
    stages: int
    fault_rate: float
    trials: int
    corrupted_fraction: float
    ci95_halfwidth: float
    seed: int = 0
    fault_class: str = "inject_ungrounded_entity"

    def __post_init__(self):
        if not 0.0 <= self.corrupted_fraction <= 1.0:
            raise ValueError("corrupted_fraction outside [0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def stage_uniforms(seed: int, trial: int, stages: int) -> np.ndarray:
    """Per-stage corruption draws for one trial.

    Draw k depends only on (seed, trial, k), so a deeper chain or a higher
    fault rate reuses the same numbers; that coupling makes the corrupted
    fraction monotone in both.
    """
    return np.random.default_rng([seed, trial, 0]).random(stages)


def chain_fault_experiment(
    stages: int,
    fault_rate: float,
    trials: int,
    seed: int = 0,
    fault_class: str = "inject_ungrounded_entity",
    rules: RuleConfig = RuleConfig(),
) -> ExperimentResult:
    """Monte-Carlo estimate of how often a mock chain ends up visibly corrupted.

    Stage 1 summarises a random table; every later stage relays its input.
    Each stage corrupts its output with ``fault_rate`` using ``fault_class``,
    whose corruptions only accumulate. A trial counts as corrupted when the
    validator rejects the final text.
    """
    if stages < 1:
        raise ValueError("stages must be >= 1")
    if not 0.0 <= fault_rate <= 1.0:
        raise ValueError("fault_rate must be in [0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if fault_class not in FAULT_CLASSES:
        raise ValueError(f"unknown fault class {fault_class!r}")

    first = load_template("cycle1_step1")
    relay = load_template("cycle1_step3")
    clean = FaultProfile(seed=seed)
    corrupted = 0
    for trial in range(trials):
        table = random_delta_table(np.random.default_rng([seed, trial, 1]))
        draws = stage_uniforms(seed, trial, stages)
        text = ""
        for k in range(stages):
            if k == 0:
                messages = first.render_messages({"table_summary": render_prompt_table(table)})
            else:
                messages = relay.render_messages({"previous_output": text, "table_context": ""})
            profile = FaultProfile.only(fault_class, 1.0, seed) if draws[k] < fault_rate else clean
            text = mock_complete("oracle", None, profile, messages).content
        report = validate(text, table, analyze(table), rules)
        corrupted += report.verdict == "fail"
    p = corrupted / trials
    return ExperimentResult(stages, fault_rate, trials, p, 1.96 * math.sqrt(p * (1 - p) / trials), seed, fault_class)


def experiment_grid(stage_counts: Iterable[int], fault_rates: Iterable[float], trials: int, seed: int = 0) -> list[ExperimentResult]:
    return [chain_fault_experiment(s, r, trials, seed) for s in stage_counts for r in fault_rates]
