"""Multi-faceted hypothesis scoring, ranking, and the convergence test.

The raw score is a linear blend of five structural components of the
evidence graph, squashed through the logistic so every hypothesis lands
in (0,1) and an evidence-free hypothesis sits exactly at 0.5. Component
scoping is hypothesis-local: only edges connected to the hypothesis (or
its candidate anchor) over support/entail links can move the score, so
evidence for one hypothesis never leaks into another's.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import ContractError
from .tegraph import (
    EvidenceGraph,
    NodeRole,
    Semantics,
    candidate_anchor,
    disjoint_support_paths,
    mechanistic_connectivity,
)
from .util import sigmoid

logger = logging.getLogger(__name__)

WEIGHT_NAMES = ("alpha_support", "beta_refute", "gamma_mech", "delta_disjoint", "lambda_conflict")
WEIGHT_OVERRIDE_MAX = 4.0  # per-round PI overrides are clamped to [0, 4]


@dataclass(frozen=True)
class ScoringWeights:
    alpha_support: float = 1.0
    beta_refute: float = 1.0
    gamma_mech: float = 0.5
    delta_disjoint: float = 0.5
    lambda_conflict: float = 0.25

    def __post_init__(self):
        for name in WEIGHT_NAMES:
            v = getattr(self, name)
            if not (v >= 0.0 and v == v and v != float("inf")):
                raise ContractError(f"weight {name} must be finite and non-negative, got {v}")

    def overridden(self, payload: dict | None) -> "ScoringWeights":
        """Apply a per-round override document, clamped to [0, 4]."""
        if not payload:
            return self
        values = {name: getattr(self, name) for name in WEIGHT_NAMES}
        for name in WEIGHT_NAMES:
            if name in payload:
                values[name] = min(max(float(payload[name]), 0.0), WEIGHT_OVERRIDE_MAX)
        return ScoringWeights(**values)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in WEIGHT_NAMES}


@dataclass(frozen=True)
class ScoreBreakdown:
    hypothesis_id: str
    sum_support: float
    sum_refute: float
    c_mech: float
    d_path: int
    conflict_count: int
    raw: float
    score: float

    def as_dict(self) -> dict:
        return {
            "hypothesis_id": self.hypothesis_id,
            "sum_support": self.sum_support,
            "sum_refute": self.sum_refute,
            "c_mech": self.c_mech,
            "d_path": self.d_path,
            "conflict_count": self.conflict_count,
            "raw": self.raw,
            "score": self.score,
        }


def _evidence_scope(graph: EvidenceGraph, h: str, anchor_id: str | None) -> set[str]:
    """Nodes belonging to the hypothesis's evidence component.

    Union of (a) nodes that reach h or its anchor over supports/entails
    edges and (b) nodes on chains leading out of the anchor. Query and
    hypothesis nodes may appear as endpoints but are never traversed
    through, which is what keeps components separate in the shared graph.
    """
    blocked = {n.id for n in graph.nodes.values() if n.role is not NodeRole.EVIDENCE}

    fwd: dict[str, list[str]] = {}
    rev: dict[str, list[str]] = {}
    for e in graph.edges.values():
        if e.semantics is Semantics.REFUTES:
            continue
        fwd.setdefault(e.source, []).append(e.target)
        rev.setdefault(e.target, []).append(e.source)

    def reach(starts: list[str], adj: dict[str, list[str]]) -> set[str]:
        seen = set(starts)
        stack = list(starts)
        while stack:
            node = stack.pop()
            if node in blocked and node not in starts:
                continue  # endpoint only, no pass-through
            for nxt in adj.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    starts = [h] + ([anchor_id] if anchor_id else [])
    scope = reach(starts, rev)
    if anchor_id:
        scope |= reach([anchor_id], fwd)
    return scope


def aggregate_score(graph: EvidenceGraph, h: str, weights: ScoringWeights | None = None) -> ScoreBreakdown:
    """Score one hypothesis from the current graph state.

    raw = a*sum_support - b*sum_refute + g*c_mech + d*d_path - l*conflicts,
    squashed by the logistic. Supports sums run over the hypothesis's
    evidence component; refutes count only when aimed directly at the
    hypothesis or its anchor (which also scopes the conflict penalty).
    """
    node = graph.nodes.get(h)
    if node is None or node.role is not NodeRole.HYPOTHESIS:
        raise ContractError(f"{h!r} is not a hypothesis node")
    weights = weights or ScoringWeights()

    anchor = candidate_anchor(graph, h)
    anchor_id = anchor.id if anchor else None
    scope = _evidence_scope(graph, h, anchor_id)
    refute_targets = {h} | ({anchor_id} if anchor_id else set())

    sum_support = 0.0
    sum_refute = 0.0
    refute_sources: set[str] = set()
    for e in graph.edges.values():
        if e.semantics is Semantics.SUPPORTS and e.source in scope and e.target in scope:
            sum_support += e.weight
        elif e.semantics is Semantics.REFUTES and e.target in refute_targets:
            sum_refute += e.weight
            refute_sources.add(e.source)

    conflict_scope = refute_targets | refute_sources
    conflict_count = sum(
        1
        for hs in graph.hotspots
        if conflict_scope & (set(hs.pro_nodes) | set(hs.con_nodes))
    )

    c_mech = mechanistic_connectivity(graph, h)
    d_path = disjoint_support_paths(graph, h)

    raw = (
        weights.alpha_support * sum_support
        - weights.beta_refute * sum_refute
        + weights.gamma_mech * c_mech
        + weights.delta_disjoint * d_path
        - weights.lambda_conflict * conflict_count
    )
    return ScoreBreakdown(
        hypothesis_id=h,
        sum_support=sum_support,
        sum_refute=sum_refute,
        c_mech=c_mech,
        d_path=d_path,
        conflict_count=conflict_count,
        raw=raw,
        score=sigmoid(raw),
    )


def rank(breakdowns: list[ScoreBreakdown]) -> list[str]:
    """Descending score; ties fall back to more disjoint paths, then less
    refutation, then ascending id."""
    ids = [b.hypothesis_id for b in breakdowns]
    if len(set(ids)) != len(ids):
        raise ContractError("duplicate hypothesis ids in breakdowns")
    ordered = sorted(
        breakdowns,
        key=lambda b: (-b.score, -b.d_path, b.sum_refute, b.hypothesis_id),
    )
    return [b.hypothesis_id for b in ordered]


def stop_decision(history: list[dict[str, float]], delta_stop: float, t: int) -> bool:
    """True when every hypothesis's score moved by at most delta_stop since
    the previous round; never fires at round zero."""
    if not history:
        raise ContractError("empty score history")
    if t >= len(history):
        raise ContractError(f"history has no round {t}")
    if t == 0:
        return False
    current, previous = history[t], history[t - 1]
    common = set(current) & set(previous)
    missing = set(current) ^ set(previous)
    if missing:
        logger.info("stop check ignoring hypotheses absent from one round: %s", sorted(missing))
    if not common:
        logger.info("stop check: no hypothesis present in both rounds; not stopping")
        return False
    max_delta = max(abs(current[k] - previous[k]) for k in common)
    return max_delta <= delta_stop
