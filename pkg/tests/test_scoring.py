from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from debategraph.errors import ContractError
from debategraph.scoring import ScoreBreakdown, ScoringWeights, aggregate_score, rank, stop_decision
from debategraph.tegraph import ConflictHotspot, GraphDelta, Semantics, apply_delta
from debategraph.util import sigmoid

from conftest import build_graph, edge, node, random_graph, seeded_graph


def logistic_oracle(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def anchored_graph():
    """H1 with anchor cand_1 present; no evidence edges yet."""
    g = seeded_graph(n_hypotheses=2)
    return apply_delta(g, GraphDelta(add_nodes=[node("cand_1", kind="other")]))


# ---------------------------------------------------------------------------
# aggregate_score
# ---------------------------------------------------------------------------

def test_no_evidence_scores_exactly_half():
    g = seeded_graph(n_hypotheses=2)
    b = aggregate_score(g, "H1", ScoringWeights())
    assert b.raw == 0.0
    assert b.score == 0.5
    assert b.sum_support == 0.0 and b.sum_refute == 0.0
    assert b.c_mech == 0.0 and b.d_path == 0 and b.conflict_count == 0


def test_single_supports_edge():
    g = apply_delta(
        seeded_graph(),
        GraphDelta(add_nodes=[node("ev1", kind="Claim")], add_edges=[edge("ev1", "H1", weight=0.8)]),
    )
    b = aggregate_score(g, "H1", ScoringWeights(alpha_support=1.0))
    assert b.raw == pytest.approx(0.8)
    assert b.score == pytest.approx(0.6899744811276125, abs=1e-9)
    assert b.score == pytest.approx(logistic_oracle(0.8))


def test_supports_then_refutes():
    g = apply_delta(
        seeded_graph(),
        GraphDelta(
            add_nodes=[node("ev1", kind="Claim"), node("ev2", kind="Risk")],
            add_edges=[edge("ev1", "H1", weight=0.8), edge("ev2", "H1", sem="refutes", weight=0.5)],
        ),
    )
    b = aggregate_score(g, "H1", ScoringWeights(alpha_support=1.0, beta_refute=1.0))
    assert b.raw == pytest.approx(0.3)
    assert b.score == pytest.approx(0.574442516811659, abs=1e-9)
    assert b.score == pytest.approx(logistic_oracle(0.3))


def test_evidence_does_not_leak_between_hypotheses():
    g = apply_delta(
        seeded_graph(n_hypotheses=2),
        GraphDelta(add_nodes=[node("ev1", kind="Claim")], add_edges=[edge("ev1", "H1", weight=0.9)]),
    )
    b1 = aggregate_score(g, "H1")
    b2 = aggregate_score(g, "H2")
    assert b1.sum_support == pytest.approx(0.9)
    assert b2.sum_support == 0.0
    assert b2.score == 0.5


def test_chain_contributes_support_mech_and_disjoint():
    g = build_graph(
        [
            node("q1", role="query"),
            node("H1", role="hypothesis", candidate="cand_1"),
            node("cand_1", kind="other"),
            node("t1", kind="Target"),
        ],
        [
            edge("q1", "H1", sem="entails", weight=0.6),
            edge("cand_1", "t1", weight=0.8),
            edge("t1", "q1", weight=0.7),
        ],
    )
    b = aggregate_score(g, "H1", ScoringWeights(alpha_support=1, beta_refute=1, gamma_mech=0.5, delta_disjoint=0.5))
    assert b.sum_support == pytest.approx(1.5)
    assert b.c_mech == 1.0
    assert b.d_path == 1
    assert b.raw == pytest.approx(1.5 + 0.5 + 0.5)


def test_entails_seed_edges_do_not_count_as_support():
    g = seeded_graph(n_hypotheses=3)
    for hid in ("H1", "H2", "H3"):
        assert aggregate_score(g, hid).sum_support == 0.0


def test_refutes_counts_only_when_aimed_at_hypothesis_or_anchor():
    g = apply_delta(
        anchored_graph(),
        GraphDelta(
            add_nodes=[node("k1", kind="Risk"), node("far", kind="Claim")],
            add_edges=[
                edge("k1", "cand_1", sem="refutes", weight=0.4),
                edge("k1", "far", sem="refutes", weight=0.9),  # not aimed at H1/anchor
            ],
        ),
    )
    b = aggregate_score(g, "H1")
    assert b.sum_refute == pytest.approx(0.4)


def test_conflict_count_scoped_by_refute_sources():
    g = apply_delta(
        anchored_graph(),
        GraphDelta(
            add_nodes=[node("k1", kind="Risk"), node("n1", kind="Claim")],
            add_edges=[edge("k1", "H1", sem="refutes", weight=0.7)],
            conflict_hotspots=[
                ConflictHotspot(topic="safety", pro_nodes=("n1",), con_nodes=("k1",)),
                ConflictHotspot(topic="unrelated", pro_nodes=("n1",), con_nodes=("n1",)),
            ],
        ),
    )
    b = aggregate_score(g, "H1", ScoringWeights(lambda_conflict=0.25))
    assert b.conflict_count == 1
    b2 = aggregate_score(g, "H2")
    assert b2.conflict_count == 0


def test_weights_scale_components():
    g = apply_delta(
        seeded_graph(),
        GraphDelta(add_nodes=[node("ev1", kind="Claim")], add_edges=[edge("ev1", "H1", weight=0.5)]),
    )
    b = aggregate_score(g, "H1", ScoringWeights(alpha_support=2.0))
    assert b.raw == pytest.approx(1.0)


def test_unknown_hypothesis_contract_error():
    g = seeded_graph()
    with pytest.raises(ContractError):
        aggregate_score(g, "nope")
    with pytest.raises(ContractError):
        aggregate_score(g, "q1")


def test_weights_validation_and_override_clamp():
    with pytest.raises(ContractError):
        ScoringWeights(alpha_support=-1.0)
    w = ScoringWeights().overridden({"alpha_support": 9.5, "beta_refute": 2.0})
    assert w.alpha_support == 4.0  # clamped to [0, 4]
    assert w.beta_refute == 2.0
    assert w.gamma_mech == 0.5  # untouched defaults
    assert ScoringWeights().overridden(None) == ScoringWeights()


# ---------------------------------------------------------------------------
# monotonicity (the acceptance criterion runs 500 draws; this is the unit view)
# ---------------------------------------------------------------------------

def _random_new_edge(rng, g, sem):
    ids = sorted(g.nodes)
    for _ in range(20):
        src = ids[int(rng.integers(0, len(ids)))]
        tgt = ids[int(rng.integers(0, len(ids)))]
        if src != tgt and (src, tgt, sem) not in g.edges:
            return edge(src, tgt, sem=sem, weight=float(rng.random()))
    return None


def test_supports_never_lowers_refutes_never_raises():
    rng = np.random.default_rng(7)
    weights = ScoringWeights()
    for _ in range(200):
        g = random_graph(rng, n_hypotheses=2, n_evidence=5)
        h = g.hypothesis_nodes()[int(rng.integers(0, 2))].id
        base = aggregate_score(g, h, weights).score
        sup = _random_new_edge(rng, g, "supports")
        if sup is not None:
            assert aggregate_score(g.add_edge_unchecked(sup), h, weights).score >= base - 1e-12
        ref = _random_new_edge(rng, g, "refutes")
        if ref is not None:
            assert aggregate_score(g.add_edge_unchecked(ref), h, weights).score <= base + 1e-12


def test_score_always_in_open_interval():
    rng = np.random.default_rng(3)
    for _ in range(100):
        g = random_graph(rng)
        for n in g.hypothesis_nodes():
            b = aggregate_score(g, n.id)
            assert 0.0 < b.score < 1.0
            assert math.isfinite(b.raw)


# ---------------------------------------------------------------------------
# rank
# ---------------------------------------------------------------------------

def bd(hid, score=0.5, d_path=0, sum_refute=0.0) -> ScoreBreakdown:
    return ScoreBreakdown(
        hypothesis_id=hid, sum_support=0.0, sum_refute=sum_refute, c_mech=0.0,
        d_path=d_path, conflict_count=0, raw=0.0, score=score,
    )


def test_rank_by_score():
    assert rank([bd("H1", 0.7), bd("H2", 0.3)]) == ["H1", "H2"]
    assert rank([bd("H1", 0.3), bd("H2", 0.7)]) == ["H2", "H1"]


def test_rank_tiebreaks():
    # equal scores: more disjoint paths wins
    assert rank([bd("H1", 0.5, d_path=1), bd("H2", 0.5, d_path=2)]) == ["H2", "H1"]
    # then lower refutation
    assert rank([bd("H1", 0.5, sum_refute=0.4), bd("H2", 0.5, sum_refute=0.1)]) == ["H2", "H1"]
    # then ascending id
    assert rank([bd("H2", 0.5), bd("H1", 0.5)]) == ["H1", "H2"]


def test_rank_duplicate_ids_rejected():
    with pytest.raises(ContractError):
        rank([bd("H1"), bd("H1")])


def test_rank_matches_comparator_sort_oracle():
    rng = np.random.default_rng(55)
    for _ in range(30):
        items = [
            bd(f"H{i}", score=float(rng.choice([0.2, 0.5, 0.8])),
               d_path=int(rng.integers(0, 3)), sum_refute=float(rng.choice([0.0, 0.3])))
            for i in range(6)
        ]
        oracle = sorted(items, key=lambda b: (-b.score, -b.d_path, b.sum_refute, b.hypothesis_id))
        assert rank(items) == [b.hypothesis_id for b in oracle]


def test_rank_invariant_under_increasing_raw_transform():
    rng = np.random.default_rng(8)
    for _ in range(20):
        raws = {f"H{i}": float(rng.standard_normal()) for i in range(5)}
        items = [
            ScoreBreakdown(h, 0, 0, 0, 0, 0, raw=r, score=sigmoid(r)) for h, r in raws.items()
        ]
        transformed = [
            ScoreBreakdown(h, 0, 0, 0, 0, 0, raw=3 * r + 1, score=sigmoid(3 * r + 1))
            for h, r in raws.items()
        ]
        assert rank(items) == rank(transformed)


# ---------------------------------------------------------------------------
# stop_decision
# ---------------------------------------------------------------------------

def test_stop_never_fires_at_round_zero():
    assert stop_decision([{"H1": 0.5}], delta_stop=99.0, t=0) is False


def test_stop_fires_when_all_deltas_small():
    history = [{"H1": 0.50, "H2": 0.60}, {"H1": 0.51, "H2": 0.62}]
    assert stop_decision(history, delta_stop=0.03, t=1) is True


def test_stop_blocked_by_one_large_delta():
    history = [{"H1": 0.50, "H2": 0.60}, {"H1": 0.51, "H2": 0.65}]
    # max(|0.01|, |0.05|) = 0.05 > 0.03
    assert stop_decision(history, delta_stop=0.03, t=1) is False


def test_stop_ignores_hypotheses_missing_from_either_round():
    history = [{"H1": 0.50}, {"H1": 0.50, "H2": 0.99}]
    assert stop_decision(history, delta_stop=0.03, t=1) is True


def test_stop_empty_history_contract_error():
    with pytest.raises(ContractError):
        stop_decision([], delta_stop=0.03, t=0)
    with pytest.raises(ContractError):
        stop_decision([{"H1": 0.5}], delta_stop=0.03, t=5)


@given(st.floats(0.001, 0.5), st.lists(st.floats(0, 1), min_size=1, max_size=5))
def test_stop_boundary_inclusive(delta_stop, scores):
    prev = {f"H{i}": s for i, s in enumerate(scores)}
    curr = {k: min(1.0, v + delta_stop) for k, v in prev.items()}
    # deltas equal the threshold exactly (up to fp), so stop fires
    assert stop_decision([prev, curr], delta_stop=delta_stop + 1e-12, t=1) is True
