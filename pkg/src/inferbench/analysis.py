"""Evaluation analytics: win/tie/lose ratios, winning rates, Fleiss
kappa, paired t-tests, a lexical plausibility stub, and stratified
comparison reports.

Per-item A/B outcomes use the strict-majority rule: an item is a win
(or loss) only when more than half of its judgments pick one side;
"both", "neither" and split votes are ties. Reports carry the rule name
so downstream tables are unambiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .metrics import tokenize
from .porter import stem

CHOICES = ("option_1", "option_2", "both", "neither")

_STOPWORDS = {
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "had",
    "has", "have", "he", "her", "his", "i", "if", "in", "into", "is", "it", "its",
    "no", "not", "of", "on", "or", "she", "so", "such", "that", "the", "their",
    "them", "then", "there", "these", "they", "this", "to", "was", "we", "were",
    "will", "with", "you",
}


class DegenerateAgreementError(ValueError):
    """Chance agreement is exactly 1 while observed agreement is not."""


@dataclass(frozen=True)
class Judgment:
    item_id: str
    rater_id: str
    choice: str

    def __post_init__(self):
        if self.choice not in CHOICES:
            raise ValueError(f"unknown choice {self.choice!r}; expected one of {CHOICES}")


def _group_items(judgments: list[Judgment]) -> dict[str, list[Judgment]]:
    """Group by item and enforce complete, non-duplicated rater coverage."""
    if not judgments:
        raise ValueError("no judgments")
    items: dict[str, list[Judgment]] = {}
    seen: set[tuple[str, str]] = set()
    for j in judgments:
        key = (j.item_id, j.rater_id)
        if key in seen:
            raise ValueError(f"duplicate judgment for item {j.item_id!r} by {j.rater_id!r}")
        seen.add(key)
        items.setdefault(j.item_id, []).append(j)
    counts = {len(js) for js in items.values()}
    if len(counts) != 1:
        raise ValueError(f"incomplete rater coverage: item sizes {sorted(counts)}")
    return items


def _other(side: str) -> str:
    return "option_2" if side == "option_1" else "option_1"


def win_tie_lose(judgments: list[Judgment], side: str = "option_1") -> dict[str, float]:
    """Percentage of items won/tied/lost for ``side`` under strict majority."""
    if side not in ("option_1", "option_2"):
        raise ValueError("side must be option_1 or option_2")
    items = _group_items(judgments)
    win = tie = lose = 0
    for js in items.values():
        n = len(js)
        votes_side = sum(1 for j in js if j.choice == side)
        votes_other = sum(1 for j in js if j.choice == _other(side))
        if votes_side > n / 2:
            win += 1
        elif votes_other > n / 2:
            lose += 1
        else:
            tie += 1
    total = len(items)
    return {
        "win": 100.0 * win / total,
        "tie": 100.0 * tie / total,
        "lose": 100.0 * lose / total,
    }


def winning_rate(
    judgments: list[Judgment], side: str
) -> tuple[float, dict[str, float]]:
    """Mean per-judgment score (1 when the side or "both" is chosen)
    plus the per-item mean series used by the paired t-test."""
    if side not in ("option_1", "option_2"):
        raise ValueError("side must be option_1 or option_2")
    items = _group_items(judgments)
    per_item = {}
    total = 0.0
    count = 0
    for item_id, js in items.items():
        scores = [1.0 if j.choice in (side, "both") else 0.0 for j in js]
        per_item[item_id] = sum(scores) / len(scores)
        total += sum(scores)
        count += len(scores)
    return total / count, per_item


def fleiss_kappa_table(table: list[list[int]]) -> float:
    """Fleiss kappa from an items x categories count table, each row
    summing to the common rater count n."""
    if not table:
        raise ValueError("empty table")
    n = sum(table[0])
    if n < 2:
        raise ValueError("fleiss kappa needs at least 2 raters")
    if any(sum(row) != n for row in table):
        raise ValueError("rows must all sum to the rater count")
    big_n = len(table)
    q = len(table[0])
    p_bar = sum(
        (sum(c * c for c in row) - n) / (n * (n - 1)) for row in table
    ) / big_n
    col = [sum(row[j] for row in table) / (big_n * n) for j in range(q)]
    p_e = sum(p * p for p in col)
    if p_e >= 1.0:
        if p_bar >= 1.0:
            return 1.0
        raise DegenerateAgreementError(
            "all judgments fall in one category yet items disagree"
        )
    return (p_bar - p_e) / (1.0 - p_e)


def fleiss_kappa(judgments: list[Judgment]) -> float:
    """Fleiss kappa over the four canonical choice categories."""
    items = _group_items(judgments)
    table = []
    for js in items.values():
        row = [0] * len(CHOICES)
        for j in js:
            row[CHOICES.index(j.choice)] += 1
        table.append(row)
    return fleiss_kappa_table(table)


# --- Student t machinery -----------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: int) -> float:
    if df < 1:
        raise ValueError("df must be >= 1")
    if t == 0.0:
        return 0.5
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return 1.0 - tail if t > 0 else tail


def student_t_two_sided_p(t: float, df: int) -> float:
    if df < 1:
        raise ValueError("df must be >= 1")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p_value: float
    degenerate: bool = False


def paired_ttest(scores_a: list[float], scores_b: list[float]) -> TTestResult:
    """Two-sided paired t-test with sample standard deviation.

    All-zero differences give t = 0, p = 1; zero spread around a nonzero
    mean gives p = 0 with the degenerate flag set.
    """
    if len(scores_a) != len(scores_b):
        raise ValueError("paired series must have equal length")
    n = len(scores_a)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 items")
    diffs = [a - b for a, b in zip(scores_a, scores_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    sd = math.sqrt(var)
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, df=df, p_value=1.0)
        return TTestResult(
            t=math.copysign(math.inf, mean), df=df, p_value=0.0, degenerate=True
        )
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t=t, df=df, p_value=student_t_two_sided_p(t, df))


def plausibility_stub(hypothesis: str, dialogue_context: str) -> float:
    """Stemmed-unigram recall of hypothesis content words against the
    context: a declared placeholder behind the plausibility-scorer seam
    that entailment-model adapters would implement."""
    content = {
        stem(t)
        for t in tokenize(hypothesis)
        if t not in _STOPWORDS and any(ch.isalnum() for ch in t)
    }
    if not content:
        return 0.0
    context = {stem(t) for t in tokenize(dialogue_context)}
    return len(content & context) / len(content)


# --- stratified comparison ---------------------------------------------------

@dataclass
class ComparisonStats:
    n_items: int
    win: float | None = None
    tie: float | None = None
    lose: float | None = None
    kappa: float | None = None
    winning_rate_1: float | None = None
    winning_rate_2: float | None = None
    t_statistic: float | None = None
    df: int | None = None
    p_value: float | None = None
    significant_at_005: bool | None = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "n_items": self.n_items,
            "win": self.win,
            "tie": self.tie,
            "lose": self.lose,
            "kappa": self.kappa,
            "winning_rate": {
                "option_1": self.winning_rate_1,
                "option_2": self.winning_rate_2,
            },
            "t_statistic": self.t_statistic,
            "df": self.df,
            "p_value": self.p_value,
            "significant_at_005": self.significant_at_005,
            "degenerate": self.degenerate,
        }


@dataclass
class ComparisonReport:
    overall: ComparisonStats
    strata: dict[str, ComparisonStats] = field(default_factory=dict)
    aggregation_rule: str = "strict_majority"

    def to_dict(self) -> dict:
        return {
            "aggregation_rule": self.aggregation_rule,
            "overall": self.overall.to_dict(),
            "strata": {k: v.to_dict() for k, v in sorted(self.strata.items())},
        }


def _stats_for(judgments: list[Judgment], side: str) -> ComparisonStats:
    items = _group_items(judgments)
    n_items = len(items)
    ratios = win_tie_lose(judgments, side)
    rate_1, per_item_1 = winning_rate(judgments, "option_1")
    rate_2, per_item_2 = winning_rate(judgments, "option_2")
    stats = ComparisonStats(
        n_items=n_items,
        win=ratios["win"],
        tie=ratios["tie"],
        lose=ratios["lose"],
        winning_rate_1=rate_1,
        winning_rate_2=rate_2,
    )
    if n_items >= 2:
        try:
            stats.kappa = fleiss_kappa(judgments)
        except DegenerateAgreementError:
            stats.kappa = None
            stats.degenerate = True
        ordered = sorted(items)
        test = paired_ttest(
            [per_item_1[i] for i in ordered], [per_item_2[i] for i in ordered]
        )
        stats.t_statistic = None if math.isinf(test.t) else test.t
        stats.df = test.df
        stats.p_value = test.p_value
        stats.significant_at_005 = test.p_value < 0.05
        stats.degenerate = stats.degenerate or test.degenerate
    return stats


def stratified_compare(
    judgments: list[Judgment],
    labels: dict[str, str] | None = None,
    side: str = "option_1",
    expected_labels: list[str] | None = None,
) -> ComparisonReport:
    """Win/tie/lose, winning rates, kappa and the option_1-vs-option_2
    paired t-test, overall and per stratum.

    Every item must be labeled when ``labels`` is given. Strata with
    fewer than 2 items keep their ratios but report the inferential
    statistics as None; ``expected_labels`` may name strata that must
    appear in the report even when empty.
    """
    items = _group_items(judgments)
    report = ComparisonReport(overall=_stats_for(judgments, side))
    if labels is None and expected_labels is None:
        return report
    labels = labels or {}
    unlabeled = [i for i in items if i not in labels]
    if unlabeled:
        raise ValueError(f"items without a stratum label: {unlabeled[:5]}")
    by_label: dict[str, list[Judgment]] = {}
    for j in judgments:
        by_label.setdefault(labels[j.item_id], []).append(j)
    for label in expected_labels or []:
        by_label.setdefault(label, [])
    for label, js in sorted(by_label.items()):
        if not js:
            report.strata[label] = ComparisonStats(n_items=0)
        else:
            report.strata[label] = _stats_for(js, side)
    return report


def compare_metric_scores(
    scores_a: dict[str, float],
    scores_b: dict[str, float],
    labels: dict[str, str] | None = None,
) -> ComparisonReport:
    """Automatic-score comparison: per-item win/tie/lose by score order
    plus the paired t-test; no rater statistics."""
    if set(scores_a) != set(scores_b):
        raise ValueError("score maps must cover the same item ids")
    if not scores_a:
        raise ValueError("no items to compare")

    def stats_for(ids: list[str]) -> ComparisonStats:
        n = len(ids)
        win = sum(1 for i in ids if scores_a[i] > scores_b[i])
        lose = sum(1 for i in ids if scores_a[i] < scores_b[i])
        tie = n - win - lose
        stats = ComparisonStats(
            n_items=n,
            win=100.0 * win / n,
            tie=100.0 * tie / n,
            lose=100.0 * lose / n,
            winning_rate_1=sum(scores_a[i] for i in ids) / n,
            winning_rate_2=sum(scores_b[i] for i in ids) / n,
        )
        if n >= 2:
            test = paired_ttest([scores_a[i] for i in ids], [scores_b[i] for i in ids])
            stats.t_statistic = None if math.isinf(test.t) else test.t
            stats.df = test.df
            stats.p_value = test.p_value
            stats.significant_at_005 = test.p_value < 0.05
            stats.degenerate = test.degenerate
        return stats

    all_ids = sorted(scores_a)
    report = ComparisonReport(
        overall=stats_for(all_ids), aggregation_rule="score_order"
    )
    if labels is not None:
        unlabeled = [i for i in all_ids if i not in labels]
        if unlabeled:
            raise ValueError(f"items without a stratum label: {unlabeled[:5]}")
        by_label: dict[str, list[str]] = {}
        for i in all_ids:
            by_label.setdefault(labels[i], []).append(i)
        for label, ids in sorted(by_label.items()):
            report.strata[label] = stats_for(ids)
    return report
