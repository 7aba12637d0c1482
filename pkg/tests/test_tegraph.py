from __future__ import annotations

import numpy as np
import pytest

from debategraph.errors import ContractError, DeltaRejected, LoadError
from debategraph.tegraph import (
    ConflictHotspot,
    EvidenceGraph,
    EvidenceKind,
    GraphDelta,
    NodeRole,
    Semantics,
    apply_delta,
    delta_magnitude,
    disjoint_support_paths,
    mechanistic_connectivity,
    merge,
    restore,
    snapshot,
    structurally_equal,
    to_dot,
    validate_delta,
)

from conftest import build_graph, edge, node, random_graph, random_valid_delta, seeded_graph


def chain_graph() -> EvidenceGraph:
    """query q1, hypothesis H1 anchored at cand_1, one support chain
    cand_1 -> t1(Target) -> p1(Pathway) -> q1."""
    return build_graph(
        [
            node("q1", role="query"),
            node("H1", role="hypothesis", candidate="cand_1"),
            node("cand_1", kind="other"),
            node("t1", kind="Target"),
            node("p1", kind="Pathway"),
        ],
        [
            edge("q1", "H1", sem="entails", weight=0.6),
            edge("cand_1", "t1", weight=0.8),
            edge("t1", "p1", weight=0.7),
            edge("p1", "q1", weight=0.9),
        ],
    )


# ---------------------------------------------------------------------------
# apply_delta
# ---------------------------------------------------------------------------

def test_empty_delta_is_identity():
    g = seeded_graph()
    out = apply_delta(g, GraphDelta())
    assert structurally_equal(g, out)


def test_delta_adds_node_and_edge():
    g = seeded_graph()
    delta = GraphDelta(
        add_nodes=[node("n1", kind="Target")],
        add_edges=[edge("n1", "H1", weight=0.8)],
    )
    out = apply_delta(g, delta)
    assert len(out.nodes) == len(g.nodes) + 1
    assert len(out.edges) == len(g.edges) + 1
    # purity: the input graph is untouched
    assert "n1" not in g.nodes


def test_merge_pairs_repoint_and_dedup():
    g = build_graph(
        [
            node("q1", role="query"),
            node("H1", role="hypothesis", candidate="c"),
            node("n2", kind="Pathway"),
            node("n2_dup", kind="Pathway"),
            node("x", kind="Target"),
        ],
        [
            edge("n2", "x", weight=0.6),
            edge("n2_dup", "x", weight=0.9),
            edge("n2_dup", "H1", weight=0.4),
        ],
    )
    out = apply_delta(g, GraphDelta(merge_pairs=[{"keep": "n2", "remove": "n2_dup"}]))

    # brute-force re-pointing oracle over plain dicts
    oracle: dict[tuple, float] = {}
    for (s, t, sem), e in g.edges.items():
        s2 = "n2" if s == "n2_dup" else s
        t2 = "n2" if t == "n2_dup" else t
        key = (s2, t2, sem)
        oracle[key] = max(oracle.get(key, 0.0), e.weight)

    assert "n2_dup" not in out.nodes
    assert {k: e.weight for k, e in out.edges.items()} == oracle
    assert out.edges[("n2", "x", "supports")].weight == 0.9


def test_merge_pair_self_loop_dropped():
    g = build_graph(
        [node("q1", role="query"), node("a", kind="other"), node("b", kind="other")],
        [edge("a", "b", weight=0.5)],
    )
    out = apply_delta(g, GraphDelta(merge_pairs=[{"keep": "a", "remove": "b"}]))
    assert ("a", "a", "supports") not in out.edges
    assert len(out.edges) == 0


@pytest.mark.parametrize(
    "delta, fragment",
    [
        (GraphDelta(add_edges=[edge("ghost", "H1")]), "unknown source"),
        (GraphDelta(add_edges=[edge("H1", "ghost")]), "unknown target"),
        (GraphDelta(add_nodes=[node("H1", kind="other")]), "duplicate node id"),
        (GraphDelta(add_nodes=[node("q2", role="query")]), "already has a query"),
        (
            GraphDelta(
                add_nodes=[node("n1", kind="other")],
                add_edges=[edge("n1", "H1", weight=1.5)],
            ),
            "outside [0,1]",
        ),
        (GraphDelta(merge_pairs=[{"keep": "H2", "remove": "H1"}]), "cannot remove query/hypothesis"),
        (GraphDelta(merge_pairs=[{"keep": "H1", "remove": "q1"}]), "cannot remove query/hypothesis"),
    ],
)
def test_delta_rejections(delta, fragment):
    g = seeded_graph()
    with pytest.raises(DeltaRejected) as err:
        apply_delta(g, delta)
    assert any(fragment in v for v in err.value.violations)


def test_rejection_itemizes_every_violation():
    g = seeded_graph()
    delta = GraphDelta(
        add_nodes=[node("H1", kind="other")],
        add_edges=[edge("ghost", "H1", weight=2.0)],
    )
    violations = validate_delta(g, delta)
    assert len(violations) == 3  # dup id, unknown source, weight range


def test_reasserted_edge_keeps_max_weight():
    g = seeded_graph()
    g1 = apply_delta(g, GraphDelta(add_nodes=[node("n1", kind="other")], add_edges=[edge("n1", "H1", weight=0.4, rationale="first")]))
    g2 = apply_delta(g1, GraphDelta(add_edges=[edge("n1", "H1", weight=0.7, rationale="second")]))
    e = g2.edges[("n1", "H1", "supports")]
    assert e.weight == 0.7
    assert "first" in e.rationale and "second" in e.rationale
    g3 = apply_delta(g2, GraphDelta(add_edges=[edge("n1", "H1", weight=0.1)]))
    assert g3.edges[("n1", "H1", "supports")].weight == 0.7


def test_hotspots_appended_and_deduped():
    g = seeded_graph()
    hot = ConflictHotspot(topic="qt", pro_nodes=("H1",), con_nodes=("H2",))
    g1 = apply_delta(g, GraphDelta(conflict_hotspots=[hot]))
    g2 = apply_delta(g1, GraphDelta(conflict_hotspots=[hot]))
    assert len(g2.hotspots) == 1


# ---------------------------------------------------------------------------
# merge
# ---------------------------------------------------------------------------

def test_merge_both_empty():
    g = seeded_graph()
    assert structurally_equal(merge(g, GraphDelta(), GraphDelta()), g)


def test_merge_one_side_empty_equals_apply():
    g = seeded_graph()
    delta = GraphDelta(add_nodes=[node("n1", kind="Risk")], add_edges=[edge("n1", "H1", sem="refutes", weight=0.3)])
    assert structurally_equal(merge(g, GraphDelta(), delta), apply_delta(g, delta))
    assert structurally_equal(merge(g, delta, GraphDelta()), apply_delta(g, delta))


def test_merge_disjoint_union():
    g = seeded_graph()
    pro = GraphDelta(add_nodes=[node("p1", kind="Target")], add_edges=[edge("p1", "H1", weight=0.8)])
    ske = GraphDelta(add_nodes=[node("k1", kind="Risk")], add_edges=[edge("k1", "H1", sem="refutes", weight=0.6)])
    out = merge(g, pro, ske)
    assert set(out.nodes) == set(g.nodes) | {"p1", "k1"}
    assert set(out.edges) == set(g.edges) | {("p1", "H1", "supports"), ("k1", "H1", "refutes")}


def test_merge_identical_edge_keeps_max_weight():
    g = apply_delta(seeded_graph(), GraphDelta(add_nodes=[node("a", kind="other"), node("b", kind="other")]))
    pro = GraphDelta(add_edges=[edge("a", "b", weight=0.6, rationale="pro view")])
    ske = GraphDelta(add_edges=[edge("a", "b", weight=0.9, rationale="ske view")])
    out = merge(g, pro, ske)
    e = out.edges[("a", "b", "supports")]
    assert e.weight == 0.9
    assert "pro view" in e.rationale and "ske view" in e.rationale


def test_merge_colliding_divergent_nodes_renamed_by_role():
    g = seeded_graph()
    pro = GraphDelta(add_nodes=[node("n1", kind="Target")], add_edges=[edge("n1", "H1", weight=0.5)])
    ske = GraphDelta(add_nodes=[node("n1", kind="Risk")], add_edges=[edge("n1", "H1", sem="refutes", weight=0.5)])
    out = merge(g, pro, ske)
    assert "n1__Proponent" in out.nodes and "n1__Skeptic" in out.nodes
    assert out.nodes["n1__Proponent"].evidence_kind is EvidenceKind.TARGET
    assert ("n1__Proponent", "H1", "supports") in out.edges
    assert ("n1__Skeptic", "H1", "refutes") in out.edges


def test_merge_colliding_identical_nodes_deduplicated():
    # both agents cite the same anchor: one node, no rename
    g = seeded_graph()
    anchor_pro = node("cand_1", kind="other", label="Candidate one", created_by="Proponent")
    anchor_ske = node("cand_1", kind="other", label="Candidate one", created_by="Skeptic")
    pro = GraphDelta(add_nodes=[anchor_pro], add_edges=[edge("cand_1", "H1", weight=0.5)])
    ske = GraphDelta(add_nodes=[anchor_ske], add_edges=[edge("cand_1", "H1", sem="refutes", weight=0.4)])
    out = merge(g, pro, ske)
    assert "cand_1" in out.nodes
    assert "cand_1__Skeptic" not in out.nodes
    assert ("cand_1", "H1", "supports") in out.edges
    assert ("cand_1", "H1", "refutes") in out.edges


def test_merge_conflicting_merge_pairs_drops_skeptic_with_note():
    g = apply_delta(
        seeded_graph(),
        GraphDelta(add_nodes=[node("a", kind="other"), node("b", kind="other"), node("c", kind="other")]),
    )
    pro = GraphDelta(merge_pairs=[{"keep": "a", "remove": "b"}])
    ske = GraphDelta(merge_pairs=[{"keep": "c", "remove": "b"}])
    out = merge(g, pro, ske)
    assert "b" not in out.nodes
    assert "c" in out.nodes and "a" in out.nodes
    assert any("dropped Skeptic merge" in n for n in out.notes)


# ---------------------------------------------------------------------------
# delta_magnitude
# ---------------------------------------------------------------------------

def test_magnitude_identical_graphs():
    g = seeded_graph()
    assert delta_magnitude(g, g) == 0.0


def test_magnitude_one_added_edge():
    g = apply_delta(seeded_graph(), GraphDelta(add_nodes=[node("a", kind="other")]))
    g2 = apply_delta(g, GraphDelta(add_edges=[edge("a", "H1", weight=0.7)]))
    assert delta_magnitude(g, g2) == 1.0


def test_magnitude_mixed_sum():
    g = apply_delta(
        seeded_graph(),
        GraphDelta(add_nodes=[node("a", kind="other")], add_edges=[edge("a", "H1", weight=0.5)]),
    )
    delta = GraphDelta(
        add_nodes=[node("b", kind="other")],
        add_edges=[
            edge("b", "H1", weight=0.9),
            edge("b", "H2", weight=0.2),
            edge("a", "H1", weight=0.8),  # weight bump 0.5 -> 0.8
        ],
    )
    g2 = apply_delta(g, delta)
    assert delta_magnitude(g, g2) == pytest.approx(1 + 2 + 0.3)


# ---------------------------------------------------------------------------
# structural metrics
# ---------------------------------------------------------------------------

def oracle_chain_count(g: EvidenceGraph, source: str, target: str, max_len: int) -> int:
    """Independent exhaustive DFS enumeration of simple support paths that
    include a Target or Pathway node strictly between the endpoints."""
    paths = []

    def walk(current, path):
        if len(path) - 1 > max_len:
            return
        if current == target:
            paths.append(list(path))
            return
        for e in sorted(g.edges.values(), key=lambda e: e.key):
            if e.semantics is Semantics.REFUTES or e.source != current:
                continue
            if e.target in path:
                continue
            path.append(e.target)
            walk(e.target, path)
            path.pop()

    walk(source, [source])
    qualifying = 0
    for p in paths:
        if len(p) - 1 > max_len:
            continue
        inner = p[1:-1]
        if any(
            g.nodes[n].evidence_kind in (EvidenceKind.TARGET, EvidenceKind.PATHWAY) for n in inner
        ):
            qualifying += 1
    return qualifying


def test_mech_no_evidence():
    g = seeded_graph()
    # H1's candidate has no anchor node yet
    assert mechanistic_connectivity(g, "H1") == 0.0


def test_mech_single_chain():
    assert mechanistic_connectivity(chain_graph(), "H1") == 1.0


def test_mech_two_chains_sharing_node():
    g = chain_graph()
    g = apply_delta(
        g,
        GraphDelta(
            add_nodes=[node("t2", kind="Target")],
            add_edges=[edge("cand_1", "t2", weight=0.8), edge("t2", "p1", weight=0.6)],
        ),
    )
    assert mechanistic_connectivity(g, "H1") == 2.0
    assert oracle_chain_count(g, "cand_1", "q1", 6) == 2


def test_mech_requires_mechanistic_intermediate():
    g = build_graph(
        [
            node("q1", role="query"),
            node("H1", role="hypothesis", candidate="cand_1"),
            node("cand_1", kind="other"),
            node("x", kind="Claim"),
        ],
        [edge("cand_1", "x"), edge("x", "q1")],
    )
    assert mechanistic_connectivity(g, "H1") == 0.0


def test_mech_respects_length_cap():
    nodes = [node("q1", role="query"), node("H1", role="hypothesis", candidate="c0"), node("c0", kind="other")]
    edges_ = []
    prev = "c0"
    for i in range(7):  # 8 edges total, beyond the default cap of 6
        nid = f"m{i}"
        nodes.append(node(nid, kind="Target"))
        edges_.append(edge(prev, nid))
        prev = nid
    edges_.append(edge(prev, "q1"))
    g = build_graph(nodes, edges_)
    assert mechanistic_connectivity(g, "H1") == 0.0
    assert mechanistic_connectivity(g, "H1", length_cap=10) == 1.0


def test_mech_count_cap():
    nodes = [node("q1", role="query"), node("H1", role="hypothesis", candidate="c0"), node("c0", kind="other")]
    edges_ = []
    for i in range(8):
        nid = f"t{i}"
        nodes.append(node(nid, kind="Target"))
        edges_.append(edge("c0", nid))
        edges_.append(edge(nid, "q1"))
    g = build_graph(nodes, edges_)
    assert mechanistic_connectivity(g, "H1") == 5.0  # capped
    assert oracle_chain_count(g, "c0", "q1", 6) == 8


def test_mech_contract_error():
    g = seeded_graph()
    with pytest.raises(ContractError):
        mechanistic_connectivity(g, "q1")
    with pytest.raises(ContractError):
        mechanistic_connectivity(g, "nope")


def test_disjoint_no_path():
    assert disjoint_support_paths(seeded_graph(), "H1") == 0


def test_disjoint_single_chain():
    assert disjoint_support_paths(chain_graph(), "H1") == 1


def test_disjoint_two_chains_sharing_one_edge():
    g = chain_graph()
    g = apply_delta(
        g,
        GraphDelta(
            add_nodes=[node("t2", kind="Target")],
            add_edges=[edge("cand_1", "t2"), edge("t2", "p1")],
        ),
    )
    # both chains funnel through p1 -> q1: max-flow by hand = 1
    assert disjoint_support_paths(g, "H1") == 1


def test_disjoint_parallel_chains():
    g = chain_graph()
    g = apply_delta(
        g,
        GraphDelta(
            add_nodes=[node("t2", kind="Target")],
            add_edges=[edge("cand_1", "t2"), edge("t2", "q1")],
        ),
    )
    assert disjoint_support_paths(g, "H1") == 2


def test_metrics_ignore_refutes_edges():
    g = chain_graph()
    before_mech = mechanistic_connectivity(g, "H1")
    before_disjoint = disjoint_support_paths(g, "H1")
    g2 = apply_delta(
        g,
        GraphDelta(
            add_nodes=[node("r1", kind="Risk")],
            add_edges=[edge("cand_1", "r1", sem="refutes", weight=0.9), edge("r1", "q1", sem="refutes", weight=0.9)],
        ),
    )
    assert mechanistic_connectivity(g2, "H1") == before_mech
    assert disjoint_support_paths(g2, "H1") == before_disjoint


def test_metrics_monotone_under_support_additions():
    rng = np.random.default_rng(42)
    for _ in range(50):
        g = random_graph(rng)
        h = g.hypothesis_nodes()[0].id
        m0, d0 = mechanistic_connectivity(g, h), disjoint_support_paths(g, h)
        ids = sorted(g.nodes)
        src, tgt = ids[int(rng.integers(0, len(ids)))], ids[int(rng.integers(0, len(ids)))]
        if src == tgt or (src, tgt, "supports") in g.edges:
            continue
        g2 = g.add_edge_unchecked(edge(src, tgt, weight=float(rng.random())))
        assert mechanistic_connectivity(g2, h) >= m0
        assert disjoint_support_paths(g2, h) >= d0


# ---------------------------------------------------------------------------
# snapshot / restore
# ---------------------------------------------------------------------------

def test_snapshot_seeded_graph():
    g = seeded_graph(n_hypotheses=1)
    doc = snapshot(g)
    restored = restore(doc)
    assert restored.query_node().id == "q1"
    assert structurally_equal(g, restored)


def test_snapshot_roundtrip_random_graphs():
    rng = np.random.default_rng(0)
    for _ in range(50):
        g = random_graph(rng)
        assert structurally_equal(g, restore(snapshot(g)))


def test_snapshot_canonical_across_insertion_orders():
    a = build_graph(
        [node("q1", role="query"), node("H1", role="hypothesis", candidate="c"), node("x", kind="other")],
        [edge("x", "H1", weight=0.5), edge("q1", "H1", sem="entails", weight=0.6)],
    )
    b = build_graph(
        [node("x", kind="other"), node("H1", role="hypothesis", candidate="c"), node("q1", role="query")],
        [edge("q1", "H1", sem="entails", weight=0.6), edge("x", "H1", weight=0.5)],
    )
    assert snapshot(a) == snapshot(b)


def test_restore_malformed_reports_location():
    with pytest.raises(LoadError, match="offset"):
        restore(b"{not json")
    with pytest.raises(LoadError, match="edges\\[0\\]"):
        restore(b'{"nodes":[],"edges":[{"source":"a","target":"b","semantics":"supports","weight":0.5}],"round_index":0}')


def test_round_index_non_decreasing():
    g = seeded_graph()
    g2 = g.with_round(3)
    assert g2.round_index == 3
    with pytest.raises(ContractError):
        g2.with_round(1)


# ---------------------------------------------------------------------------
# randomized delta invariants
# ---------------------------------------------------------------------------

def test_random_valid_deltas_preserve_invariants():
    rng = np.random.default_rng(123)
    g = seeded_graph(n_hypotheses=3)
    protected = {n.id for n in g.nodes.values() if n.role is not NodeRole.EVIDENCE}
    for _ in range(300):
        delta = random_valid_delta(rng, g)
        if validate_delta(g, delta):
            continue  # generator occasionally collides; skip invalid draws
        before_nodes = len(g.nodes)
        removed = len([p for p in delta.merge_pairs])
        g = apply_delta(g, delta)
        assert all(0.0 <= e.weight <= 1.0 for e in g.edges.values())
        assert all(e.source in g.nodes and e.target in g.nodes for e in g.edges.values())
        assert protected <= set(g.nodes)
        assert len(g.nodes) >= before_nodes - removed


def test_dot_export_styles_and_counts():
    g = chain_graph()
    g = apply_delta(
        g,
        GraphDelta(add_nodes=[node("r1", kind="Risk")], add_edges=[edge("r1", "H1", sem="refutes", weight=0.9)]),
    )
    dot = to_dot(g)
    assert dot.count("->") == len(g.edges)
    assert dot.count("[shape=") == len(g.nodes)
    assert "style=dashed" in dot and "style=bold" in dot and "style=solid" in dot
