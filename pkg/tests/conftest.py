from __future__ import annotations

import io
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from debategraph.kg import KnowledgeGraph, load_triples
from debategraph.tegraph import (
    ConflictHotspot,
    EvidenceEdge,
    EvidenceGraph,
    EvidenceNode,
    EvidenceKind,
    GraphDelta,
    NodeRole,
    Semantics,
)

REPO_ROOT = Path(__file__).resolve().parents[1]
DEMO_DIR = REPO_ROOT / "assets" / "demo"


def kg_from_records(records: list[tuple]) -> KnowledgeGraph:
    """records: (head_id, head_type, relation, tail_id, tail_type) tuples."""
    lines = []
    for head_id, head_type, relation, tail_id, tail_type in records:
        lines.append(
            "\t".join((head_id, head_type, head_id, relation, tail_id, tail_type, tail_id))
        )
    return load_triples(io.StringIO("\n".join(lines)), fmt="tsv")


def planted_bipartite(seed: int = 7, n_drugs: int = 10, n_diseases: int = 10, dim: int = 8):
    """Toy KG with two latent groups; positives connect matching groups.

    Feature vectors carry the group signal plus noise so the projection
    trainer has something learnable. Returns (kg, embeddings_jsonl_text,
    positives, held_out) with 16 train and 4 held-out positive pairs.
    """
    rng = np.random.default_rng(seed)
    drugs = [f"drug_{i:02d}" for i in range(n_drugs)]
    diseases = [f"disease_{i:02d}" for i in range(n_diseases)]
    group = {e: i % 2 for i, e in enumerate(drugs)}
    group.update({e: i % 2 for i, e in enumerate(diseases)})

    pairs = []
    for i, d in enumerate(drugs):
        matching = [s for j, s in enumerate(diseases) if j % 2 == i % 2]
        chosen = rng.choice(len(matching), size=2, replace=False)
        pairs.extend((d, matching[int(c)]) for c in chosen)
    pairs = sorted(set(pairs))[:20]
    held_out = pairs[::5][:4]
    train_pairs = [p for p in pairs if p not in held_out]

    records = [(d, "drug", "indication", s, "disease") for d, s in train_pairs]
    kg = kg_from_records(records)
    # entities outside the training edges still exist in the graph
    from debategraph.kg import Entity, EntityType

    for e in drugs + diseases:
        if e not in kg.entities:
            etype = EntityType.DRUG if e in drugs else EntityType.DISEASE
            kg.entities[e] = Entity(id=e, name=e, entity_type=etype)

    lines = []
    for e in drugs + diseases:
        base = np.zeros(dim)
        half = dim // 2
        if group[e] == 0:
            base[:half] = 1.0
        else:
            base[half:] = 1.0
        vec = base + 0.15 * rng.standard_normal(dim)
        lines.append(json.dumps({"entity_id": e, "vector": [float(x) for x in vec]}))
    return kg, "\n".join(lines), train_pairs, held_out


# ---------------------------------------------------------------------------
# Evidence graph builders
# ---------------------------------------------------------------------------

def node(nid: str, role: str = "evidence", kind: str | None = "other", **kw) -> EvidenceNode:
    return EvidenceNode(
        id=nid,
        role=NodeRole(role),
        label=kw.get("label", nid),
        evidence_kind=EvidenceKind(kind) if role == "evidence" else None,
        created_by=kw.get("created_by", "test"),
        round=kw.get("round", 0),
        candidate=kw.get("candidate"),
    )


def edge(src: str, tgt: str, sem: str = "supports", weight: float = 0.5, **kw) -> EvidenceEdge:
    return EvidenceEdge(
        source=src,
        target=tgt,
        semantics=Semantics(sem),
        weight=weight,
        rationale=kw.get("rationale", ""),
        created_by=kw.get("created_by", "test"),
        round=kw.get("round", 0),
        label=kw.get("label", sem),
    )


def build_graph(nodes: list[EvidenceNode], edges: list[EvidenceEdge]) -> EvidenceGraph:
    g = EvidenceGraph()
    for n in nodes:
        g.nodes[n.id] = n
    for e in edges:
        g.edges[e.key] = e
    return g


def seeded_graph(n_hypotheses: int = 2) -> EvidenceGraph:
    """Query node plus hypotheses H1..Hn with entail seed edges."""
    nodes = [node("q1", role="query")]
    edges_ = []
    for i in range(1, n_hypotheses + 1):
        nodes.append(node(f"H{i}", role="hypothesis", candidate=f"cand_{i}"))
        edges_.append(edge("q1", f"H{i}", sem="entails", weight=0.5))
    return build_graph(nodes, edges_)


def random_graph(rng: np.random.Generator, n_hypotheses: int = 2, n_evidence: int = 6) -> EvidenceGraph:
    g = seeded_graph(n_hypotheses)
    ev_ids = []
    kinds = list(EvidenceKind)
    for i in range(n_evidence):
        eid = f"ev{i}"
        kind = kinds[int(rng.integers(0, len(kinds)))]
        g.nodes[eid] = EvidenceNode(
            id=eid, role=NodeRole.EVIDENCE, label=eid, evidence_kind=kind, created_by="test", round=0
        )
        ev_ids.append(eid)
    # sprinkle anchors for some hypotheses
    for i in range(1, n_hypotheses + 1):
        if rng.random() < 0.7:
            cand = f"cand_{i}"
            g.nodes[cand] = EvidenceNode(
                id=cand, role=NodeRole.EVIDENCE, label=cand,
                evidence_kind=EvidenceKind.OTHER, created_by="test", round=0,
            )
    all_ids = sorted(g.nodes)
    n_edges = int(rng.integers(0, 12))
    for _ in range(n_edges):
        src = all_ids[int(rng.integers(0, len(all_ids)))]
        tgt = all_ids[int(rng.integers(0, len(all_ids)))]
        if src == tgt:
            continue
        sem = [Semantics.SUPPORTS, Semantics.ENTAILS, Semantics.REFUTES][int(rng.integers(0, 3))]
        e = EvidenceEdge(
            source=src, target=tgt, semantics=sem, weight=float(rng.random()),
            created_by="test", round=0, label=sem.value,
        )
        g.edges[e.key] = e
    if rng.random() < 0.5:
        g.hotspots.append(
            ConflictHotspot(
                topic=f"topic{int(rng.integers(0, 3))}",
                pro_nodes=tuple(rng.choice(all_ids, size=min(2, len(all_ids)), replace=False)),
                con_nodes=tuple(rng.choice(all_ids, size=min(2, len(all_ids)), replace=False)),
            )
        )
    return g


def random_valid_delta(rng: np.random.Generator, graph: EvidenceGraph) -> GraphDelta:
    """A delta that passes validation against ``graph`` by construction."""
    delta = GraphDelta()
    existing = sorted(graph.nodes)
    n_new = int(rng.integers(0, 4))
    new_ids = []
    for i in range(n_new):
        nid = f"new{int(rng.integers(0, 10 ** 6))}_{i}"
        if nid in graph.nodes:
            continue
        delta.add_nodes.append(
            EvidenceNode(
                id=nid, role=NodeRole.EVIDENCE, label=nid,
                evidence_kind=EvidenceKind.OTHER, created_by="test", round=0,
            )
        )
        new_ids.append(nid)
    pool = existing + new_ids
    for _ in range(int(rng.integers(0, 5))):
        src = pool[int(rng.integers(0, len(pool)))]
        tgt = pool[int(rng.integers(0, len(pool)))]
        if src == tgt:
            continue
        sem = [Semantics.SUPPORTS, Semantics.ENTAILS, Semantics.REFUTES][int(rng.integers(0, 3))]
        delta.add_edges.append(
            EvidenceEdge(
                source=src, target=tgt, semantics=sem, weight=float(rng.random()),
                created_by="test", round=0, label=sem.value,
            )
        )
    removable = [
        n.id for n in graph.nodes.values()
        if n.role is NodeRole.EVIDENCE and rng.random() < 0.15
    ]
    for rem in removable[:1]:
        keep_pool = [p for p in pool if p != rem]
        if keep_pool:
            delta.merge_pairs.append({"keep": keep_pool[int(rng.integers(0, len(keep_pool)))], "remove": rem})
    if rng.random() < 0.2 and pool:
        delta.conflict_hotspots.append(
            ConflictHotspot(topic="hot", pro_nodes=(pool[0],), con_nodes=(pool[-1],))
        )
    return delta


@pytest.fixture
def demo_workspace(tmp_path: Path) -> Path:
    """Copy of the committed demo workspace, safe to mutate."""
    if not DEMO_DIR.exists():
        pytest.skip("demo assets not generated")
    target = tmp_path / "demo"
    shutil.copytree(DEMO_DIR, target)
    return target / "workspace.json"
