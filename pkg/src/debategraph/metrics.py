"""Ranking metrics (AUPRC, AUROC, P@k, R@k) and the evaluation harness
scoring investigation outputs against ground-truth pair files.

AUROC uses the Mann-Whitney formulation (ties count half); AUPRC is
step-wise average precision. Candidate-id tiebreaks keep every metric
deterministic. Pairs absent from the truth file are closed-world
negatives, tallied in the report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO

from .errors import ContractError, LoadError, UndefinedMetricError


@dataclass(frozen=True)
class LabeledItem:
    candidate: str
    score: float
    label: bool


@dataclass
class LabeledRanking:
    items: list[LabeledItem]

    def __post_init__(self):
        if not self.items:
            raise ContractError("ranking must contain at least one item")
        ids = [i.candidate for i in self.items]
        if len(set(ids)) != len(ids):
            raise ContractError("candidate ids must be unique")

    def sorted_items(self) -> list[LabeledItem]:
        return sorted(self.items, key=lambda i: (-i.score, i.candidate))

    @property
    def positives(self) -> int:
        return sum(1 for i in self.items if i.label)

    @property
    def negatives(self) -> int:
        return len(self.items) - self.positives


def auroc(r: LabeledRanking) -> float:
    """P(score_pos > score_neg) + 0.5 * P(tie) over all pos/neg pairs."""
    pos = [i.score for i in r.items if i.label]
    neg = [i.score for i in r.items if not i.label]
    if not pos or not neg:
        raise UndefinedMetricError("AUROC needs at least one positive and one negative")
    wins = ties = 0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1
            elif p == n:
                ties += 1
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def auprc(r: LabeledRanking) -> float:
    """Average precision: mean of precision@rank over the positives, in
    rank order (score descending, candidate-id tiebreak)."""
    if r.positives == 0:
        raise UndefinedMetricError("AUPRC needs at least one positive")
    hits = 0
    total = 0.0
    for rank_pos, item in enumerate(r.sorted_items(), start=1):
        if item.label:
            hits += 1
            total += hits / rank_pos
    return total / r.positives


def precision_at_k(r: LabeledRanking, k: int) -> float:
    """Positives in the top k divided by k (k stays the denominator even
    when the list is shorter)."""
    if k < 1:
        raise ContractError("k must be >= 1")
    top = r.sorted_items()[:k]
    return sum(1 for i in top if i.label) / k


def recall_at_k(r: LabeledRanking, k: int) -> float:
    if k < 1:
        raise ContractError("k must be >= 1")
    if r.positives == 0:
        raise UndefinedMetricError("recall needs at least one positive")
    top = r.sorted_items()[:k]
    return sum(1 for i in top if i.label) / r.positives


# ---------------------------------------------------------------------------
# Harness
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    auprc_macro: float | None = None
    auroc_macro: float | None = None
    auprc_micro: float | None = None
    auroc_micro: float | None = None
    p_at_k: dict[int, float] = field(default_factory=dict)
    r_at_k: dict[int, float] = field(default_factory=dict)
    per_query: dict[str, dict] = field(default_factory=dict)
    excluded_queries: list[str] = field(default_factory=list)
    unlisted_pairs: int = 0  # closed-world negatives not present in the truth file

    def as_dict(self) -> dict:
        return {
            "auprc_macro": self.auprc_macro,
            "auroc_macro": self.auroc_macro,
            "auprc_micro": self.auprc_micro,
            "auroc_micro": self.auroc_micro,
            "p_at_k": {str(k): v for k, v in sorted(self.p_at_k.items())},
            "r_at_k": {str(k): v for k, v in sorted(self.r_at_k.items())},
            "per_query": self.per_query,
            "excluded_queries": list(self.excluded_queries),
            "unlisted_pairs": self.unlisted_pairs,
        }

    def as_table(self) -> str:
        header = ["metric", "value"]
        rows = [
            ("AUPRC (macro)", self.auprc_macro),
            ("AUROC (macro)", self.auroc_macro),
            ("AUPRC (micro)", self.auprc_micro),
            ("AUROC (micro)", self.auroc_micro),
        ]
        for k in sorted(self.p_at_k):
            rows.append((f"P@{k}", self.p_at_k[k]))
        for k in sorted(self.r_at_k):
            rows.append((f"R@{k}", self.r_at_k[k]))
        width = max(len(r[0]) for r in rows + [tuple(header)])
        lines = [f"{header[0]:<{width}}  {header[1]}", "-" * (width + 9)]
        for name, value in rows:
            shown = "n/a" if value is None else f"{value:.4f}"
            lines.append(f"{name:<{width}}  {shown}")
        if self.excluded_queries:
            lines.append(f"excluded queries: {', '.join(self.excluded_queries)}")
        return "\n".join(lines) + "\n"


def load_truth(source: IO) -> dict[str, dict[str, bool]]:
    """TSV of query_id, candidate_id, label in {0,1}."""
    truth: dict[str, dict[str, bool]] = {}
    raw = source.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.rstrip("\n").split("\t")
        if len(cols) != 3:
            raise LoadError(f"line {lineno}: expected 3 columns, got {len(cols)}")
        if cols[2] not in ("0", "1"):
            raise LoadError(f"line {lineno}: label must be 0 or 1, got {cols[2]!r}")
        truth.setdefault(cols[0], {})[cols[1]] = cols[2] == "1"
    return truth


def evaluate_runs(
    results: list[tuple[str, list[tuple[str, float]]]],
    truth: dict[str, dict[str, bool]],
    ks: tuple[int, ...] = (1, 5, 10),
) -> MetricsReport:
    """Score per-query rankings against truth and macro-average.

    ``results`` holds (query_id, [(candidate_id, score), ...]) records.
    Queries entirely absent from truth are excluded and reported.
    """
    report = MetricsReport()
    rankings: list[tuple[str, LabeledRanking]] = []
    for query_id, scored in results:
        if query_id not in truth:
            report.excluded_queries.append(query_id)
            continue
        labels = truth[query_id]
        items = []
        for cand, score in scored:
            if cand not in labels:
                report.unlisted_pairs += 1
            items.append(LabeledItem(candidate=cand, score=score, label=labels.get(cand, False)))
        rankings.append((query_id, LabeledRanking(items=items)))

    def collect(metric, per_query_key):
        values = []
        for query_id, ranking in rankings:
            try:
                v = metric(ranking)
            except UndefinedMetricError:
                report.per_query.setdefault(query_id, {})[per_query_key] = None
                continue
            report.per_query.setdefault(query_id, {})[per_query_key] = v
            values.append(v)
        return sum(values) / len(values) if values else None

    report.auprc_macro = collect(auprc, "auprc")
    report.auroc_macro = collect(auroc, "auroc")
    for k in ks:
        p_values, r_values = [], []
        for query_id, ranking in rankings:
            p = precision_at_k(ranking, k)
            report.per_query.setdefault(query_id, {})[f"p@{k}"] = p
            p_values.append(p)
            try:
                r = recall_at_k(ranking, k)
            except UndefinedMetricError:
                r = None
            report.per_query.setdefault(query_id, {})[f"r@{k}"] = r
            if r is not None:
                r_values.append(r)
        if p_values:
            report.p_at_k[k] = sum(p_values) / len(p_values)
        if r_values:
            report.r_at_k[k] = sum(r_values) / len(r_values)

    # micro: pool every item across queries into one ranking
    pooled = [
        LabeledItem(candidate=f"{qid}::{i.candidate}", score=i.score, label=i.label)
        for qid, ranking in rankings
        for i in ranking.items
    ]
    if pooled:
        pooled_ranking = LabeledRanking(items=pooled)
        try:
            report.auprc_micro = auprc(pooled_ranking)
        except UndefinedMetricError:
            report.auprc_micro = None
        try:
            report.auroc_micro = auroc(pooled_ranking)
        except UndefinedMetricError:
            report.auroc_micro = None
    return report
