"""Social-presence questionnaire scoring and the per-condition comparison.

The instrument has 21 items on a 0..4 scale, grouped into empathy, negative
feelings, and behavioral engagement subscales. The bundled DEFAULT_MAPPING is
a NON-CANONICAL placeholder (items 1-7 / 8-13 / 14-21 in order, nothing
reversed): it keeps the pipeline runnable, but real studies must load the
actual instrument's mapping from CSV.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegeneratePairs, IncompleteDesign, ParseError
from .session import Condition, condition_from_str
from .stats import TestResult, fdr_adjust, friedman, wilcoxon_signed_rank

N_ITEMS = 21
ITEM_MAX = 4

SUBSCALES = ("empathy", "negative_feelings", "behavioral_engagement")

# adjusted-p threshold under which a comparison is flagged as a tendency
TENDENCY_P = 0.1

CONDITION_ORDER = (Condition.HR_ALL, Condition.HR_OTHERS, Condition.HR_NONE)


@dataclass(frozen=True)
class SubscaleMapping:
    """item number (1-based) -> (subscale, reversed)."""

    name: str
    subscale: dict[int, str]
    reversed_items: frozenset[int]

    def __post_init__(self):
        if set(self.subscale) != set(range(1, N_ITEMS + 1)):
            raise ConfigError(f"mapping must cover items 1..{N_ITEMS} exactly")
        bad = set(self.subscale.values()) - set(SUBSCALES)
        if bad:
            raise ConfigError(f"unknown subscales {sorted(bad)}")
        if not self.reversed_items <= set(self.subscale):
            raise ConfigError("reversed item outside 1..21")


DEFAULT_MAPPING = SubscaleMapping(
    name="placeholder (NON-CANONICAL)",
    subscale={**{i: "empathy" for i in range(1, 8)},
              **{i: "negative_feelings" for i in range(8, 14)},
              **{i: "behavioral_engagement" for i in range(14, 22)}},
    reversed_items=frozenset(),
)


@dataclass(frozen=True)
class SpgqResponse:
    group: int
    participant: str
    condition: Condition
    items: tuple[int, ...]

    def __post_init__(self):
        if len(self.items) != N_ITEMS:
            raise ConfigError(f"need {N_ITEMS} item scores, got {len(self.items)}")
        for i, v in enumerate(self.items, start=1):
            if not (isinstance(v, int) and 0 <= v <= ITEM_MAX):
                raise ConfigError(f"item {i} score {v!r} outside 0..{ITEM_MAX}")


def score_subscales(resp: SpgqResponse,
                    mapping: SubscaleMapping = DEFAULT_MAPPING) -> dict[str, float]:
    """Mean item score per subscale, after flipping reversed items (v -> 4-v)."""
    sums: dict[str, list[int]] = {s: [] for s in SUBSCALES}
    for i, v in enumerate(resp.items, start=1):
        if i in mapping.reversed_items:
            v = ITEM_MAX - v
        sums[mapping.subscale[i]].append(v)
    out = {}
    for s in SUBSCALES:
        if not sums[s]:
            raise ConfigError(f"mapping assigns no items to {s}")
        out[s] = float(np.mean(sums[s]))
    return out


@dataclass(frozen=True)
class SubscaleComparison:
    subscale: str
    means: dict[str, float]  # keyed by condition wire name
    sds: dict[str, float]
    friedman: TestResult
    pairwise: tuple[TestResult, ...]
    tendencies: tuple[str, ...]  # comparison labels with p_adj < TENDENCY_P


@dataclass(frozen=True)
class AnalysisReport:
    mapping_name: str
    n_participants: int
    subscales: tuple[SubscaleComparison, ...]

    def to_dict(self) -> dict:
        return {
            "mapping": self.mapping_name,
            "n_participants": self.n_participants,
            "tendency_threshold": TENDENCY_P,
            "subscales": [
                {
                    "subscale": c.subscale,
                    "means": c.means,
                    "sds": c.sds,
                    "friedman": {"statistic": c.friedman.statistic,
                                 "p": c.friedman.p_raw},
                    "pairwise": [
                        {
                            "comparison": t.comparison_label,
                            "W": t.statistic,
                            "p": t.p_raw,
                            "p_adjusted": t.p_adjusted,
                            "tendency": t.comparison_label in c.tendencies,
                        }
                        for t in c.pairwise
                    ],
                }
                for c in self.subscales
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [
            f"questionnaire analysis, n={self.n_participants}, "
            f"mapping: {self.mapping_name}",
        ]
        for c in self.subscales:
            lines.append("")
            lines.append(f"[{c.subscale}]")
            lines.append(
                f"  friedman chi2={c.friedman.statistic:.3f} "
                f"p={c.friedman.p_raw:.4f}"
            )
            for t in c.pairwise:
                a, b = t.comparison_label.split(" vs ")
                mark = "  +" if t.comparison_label in c.tendencies else ""
                lines.append(
                    f"  {t.comparison_label}: "
                    f"{c.means[a]:.2f} vs {c.means[b]:.2f} "
                    f"(SD: {c.sds[a]:.2f} vs {c.sds[b]:.2f}), "
                    f"W={t.statistic:.1f}, p={t.p_raw:.4f}, "
                    f"p_adj={t.p_adjusted:.4f}{mark}"
                )
        return "\n".join(lines) + "\n"


def condition_report(responses, mapping: SubscaleMapping = DEFAULT_MAPPING) -> AnalysisReport:
    """Compare subscale scores across the three conditions.

    Every participant must have exactly one response per condition. Friedman
    runs per subscale; the three pairwise signed-rank tests are adjusted as
    one family per subscale. Pairs with no nonzero differences score p = 1
    here (the standalone test would refuse them, but an all-tied pair inside
    an otherwise fine report is a finding, not an input error).
    """
    by_participant: dict[str, dict[Condition, SpgqResponse]] = {}
    for r in responses:
        seen = by_participant.setdefault(r.participant, {})
        if r.condition in seen:
            raise IncompleteDesign(
                f"{r.participant} answered {r.condition.value} twice"
            )
        seen[r.condition] = r
    if not by_participant:
        raise IncompleteDesign("no responses")
    participants = sorted(by_participant)
    for p in participants:
        missing = [c.value for c in CONDITION_ORDER if c not in by_participant[p]]
        if missing:
            raise IncompleteDesign(f"{p} is missing conditions: {', '.join(missing)}")
    if len(participants) < 2:
        raise IncompleteDesign("need at least 2 participants")

    scored = {
        p: {c: score_subscales(by_participant[p][c], mapping)
            for c in CONDITION_ORDER}
        for p in participants
    }
    comparisons = []
    for sub in SUBSCALES:
        matrix = np.array([
            [scored[p][c][sub] for c in CONDITION_ORDER] for p in participants
        ])
        means = {c.value: float(matrix[:, j].mean())
                 for j, c in enumerate(CONDITION_ORDER)}
        sds = {c.value: float(matrix[:, j].std(ddof=1))
               for j, c in enumerate(CONDITION_ORDER)}
        fried = friedman(matrix)
        pairs = [(0, 1), (0, 2), (1, 2)]
        tests = []
        for i, j in pairs:
            label = f"{CONDITION_ORDER[i].value} vs {CONDITION_ORDER[j].value}"
            try:
                tests.append(wilcoxon_signed_rank(matrix[:, i], matrix[:, j], label))
            except DegeneratePairs:
                tests.append(TestResult(0.0, 1.0, comparison_label=label))
        adj = fdr_adjust([t.p_raw for t in tests])
        tests = [TestResult(t.statistic, t.p_raw, float(q), t.comparison_label)
                 for t, q in zip(tests, adj)]
        tendencies = tuple(t.comparison_label for t in tests
                           if t.p_adjusted < TENDENCY_P)
        comparisons.append(SubscaleComparison(sub, means, sds, fried,
                                              tuple(tests), tendencies))
    return AnalysisReport(mapping.name, len(participants), tuple(comparisons))


def read_mapping_csv(path) -> SubscaleMapping:
    """Read item,subscale,reversed rows (reversed: 0/1)."""
    subscale: dict[int, str] = {}
    rev = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["item", "subscale", "reversed"]:
            raise ParseError("bad mapping header, want item,subscale,reversed",
                             line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                item = int(row[0])
                sub = row[1].strip()
                flag = int(row[2])
            except (ValueError, IndexError):
                raise ParseError(f"bad mapping row {row!r}", line=lineno, path=path) from None
            if item in subscale:
                raise ParseError(f"item {item} mapped twice", line=lineno, path=path)
            subscale[item] = sub
            if flag:
                rev.add(item)
    try:
        return SubscaleMapping(str(path), subscale, frozenset(rev))
    except ConfigError as e:
        raise ParseError(str(e), path=path) from None


def read_responses_csv(path) -> list[SpgqResponse]:
    """Read group,participant,condition,item_1..item_21 rows."""
    want = ["group", "participant", "condition"] + [
        f"item_{i}" for i in range(1, N_ITEMS + 1)
    ]
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != want:
            raise ParseError(
                "bad responses header, want " + ",".join(want), line=1, path=path
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(want):
                raise ParseError(f"row has {len(row)} fields, want {len(want)}",
                                 line=lineno, path=path)
            try:
                resp = SpgqResponse(
                    group=int(row[0]),
                    participant=row[1].strip(),
                    condition=condition_from_str(row[2]),
                    items=tuple(int(c) for c in row[3:]),
                )
            except (ValueError, ConfigError) as e:
                raise ParseError(f"bad response row: {e}", line=lineno, path=path) from None
            out.append(resp)
    if not out:
        raise ParseError("no responses", path=path)
    return out
