"""Task-specific evidence graph: the dynamic shared whiteboard.

A directed typed graph with node roles (query / hypothesis / evidence) and
edge semantics (entails / supports / refutes), weights in [0,1]. Updates
arrive as validated deltas and never mutate in place; every operation
returns a fresh graph value. Also hosts the structural metrics used for
hypothesis scoring (mechanistic-chain count, edge-disjoint path count) and
the canonical snapshot format.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import ContractError, DeltaRejected, LoadError
from .util import canonical_json

# enumeration bounds for the chain-count metric; config-exposed
DEFAULT_PATH_LENGTH_CAP = 6
DEFAULT_CHAIN_COUNT_CAP = 5


class NodeRole(str, Enum):
    QUERY = "query"
    HYPOTHESIS = "hypothesis"
    EVIDENCE = "evidence"


class EvidenceKind(str, Enum):
    TARGET = "Target"
    PATHWAY = "Pathway"
    PHENOTYPE = "Phenotype"
    MECHANISM = "Mechanism"
    RISK = "Risk"
    CLAIM = "Claim"
    OTHER = "other"


def parse_evidence_kind(raw: str | None) -> EvidenceKind:
    if not raw:
        return EvidenceKind.OTHER
    for kind in EvidenceKind:
        if kind.value.lower() == raw.strip().lower():
            return kind
    return EvidenceKind.OTHER


class Semantics(str, Enum):
    ENTAILS = "entails"
    SUPPORTS = "supports"
    REFUTES = "refutes"


# agent vocabularies use finer-grained relation labels; they collapse onto
# the three semantics, with the original label kept on the edge
REFUTING_LABELS = {"refutes", "contradicts"}
ENTAILING_LABELS = {"entails"}


def semantics_for_label(label: str) -> Semantics:
    low = label.strip().lower()
    if low in REFUTING_LABELS:
        return Semantics.REFUTES
    if low in ENTAILING_LABELS:
        return Semantics.ENTAILS
    return Semantics.SUPPORTS


@dataclass(frozen=True)
class EvidenceNode:
    id: str
    role: NodeRole
    label: str
    evidence_kind: EvidenceKind | None = None
    created_by: str = ""
    round: int = 0
    candidate: str | None = None  # hypothesis nodes: the candidate entity id


@dataclass(frozen=True)
class EvidenceEdge:
    source: str
    target: str
    semantics: Semantics
    weight: float
    rationale: str = ""
    created_by: str = ""
    round: int = 0
    label: str = ""  # original relation label from the creating agent

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.source, self.target, self.semantics.value)


@dataclass(frozen=True)
class ConflictHotspot:
    topic: str
    pro_nodes: tuple[str, ...] = ()
    con_nodes: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "topic": self.topic,
            "pro_nodes": list(self.pro_nodes),
            "con_nodes": list(self.con_nodes),
        }


@dataclass
class GraphDelta:
    add_nodes: list[EvidenceNode] = field(default_factory=list)
    add_edges: list[EvidenceEdge] = field(default_factory=list)
    merge_pairs: list[dict] = field(default_factory=list)  # {"keep": id, "remove": id}
    conflict_hotspots: list[ConflictHotspot] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.add_nodes or self.add_edges or self.merge_pairs or self.conflict_hotspots)


@dataclass
class EvidenceGraph:
    """Immutable-by-convention graph value; operations return new versions."""

    nodes: dict[str, EvidenceNode] = field(default_factory=dict)
    edges: dict[tuple[str, str, str], EvidenceEdge] = field(default_factory=dict)
    round_index: int = 0
    hotspots: list[ConflictHotspot] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    # -- basic accessors ----------------------------------------------------

    def query_node(self) -> EvidenceNode | None:
        for n in self.nodes.values():
            if n.role is NodeRole.QUERY:
                return n
        return None

    def hypothesis_nodes(self) -> list[EvidenceNode]:
        return sorted(
            (n for n in self.nodes.values() if n.role is NodeRole.HYPOTHESIS),
            key=lambda n: n.id,
        )

    def out_edges(self, node_id: str) -> list[EvidenceEdge]:
        return [e for e in self.edges.values() if e.source == node_id]

    def in_edges(self, node_id: str) -> list[EvidenceEdge]:
        return [e for e in self.edges.values() if e.target == node_id]

    def _copy(self) -> "EvidenceGraph":
        return EvidenceGraph(
            nodes=dict(self.nodes),
            edges=dict(self.edges),
            round_index=self.round_index,
            hotspots=list(self.hotspots),
            notes=list(self.notes),
        )

    def add_node_unchecked(self, node: EvidenceNode) -> "EvidenceGraph":
        g = self._copy()
        g.nodes[node.id] = node
        return g

    def add_edge_unchecked(self, edge: EvidenceEdge) -> "EvidenceGraph":
        g = self._copy()
        g.edges[edge.key] = edge
        return g

    def with_round(self, round_index: int) -> "EvidenceGraph":
        if round_index < self.round_index:
            raise ContractError("round_index must be non-decreasing")
        g = self._copy()
        g.round_index = round_index
        return g

    def with_note(self, note: str) -> "EvidenceGraph":
        g = self._copy()
        g.notes.append(note)
        return g


# ---------------------------------------------------------------------------
# Delta validation and application
# ---------------------------------------------------------------------------

def validate_delta(graph: EvidenceGraph, delta: GraphDelta) -> list[str]:
    """Itemize every violation; empty list means the delta is applicable."""
    violations: list[str] = []
    known = set(graph.nodes)
    has_query = graph.query_node() is not None

    for i, node in enumerate(delta.add_nodes):
        if node.id in known:
            violations.append(f"add_nodes[{i}]: duplicate node id {node.id!r}")
        else:
            known.add(node.id)
        if node.role is NodeRole.QUERY:
            if has_query:
                violations.append(f"add_nodes[{i}]: graph already has a query node")
            has_query = True
        if node.role is NodeRole.EVIDENCE and node.evidence_kind is None:
            violations.append(f"add_nodes[{i}]: evidence node {node.id!r} missing evidence_kind")

    for i, edge in enumerate(delta.add_edges):
        if edge.source not in known:
            violations.append(f"add_edges[{i}]: unknown source node {edge.source!r}")
        if edge.target not in known:
            violations.append(f"add_edges[{i}]: unknown target node {edge.target!r}")
        if not (0.0 <= edge.weight <= 1.0):
            violations.append(f"add_edges[{i}]: weight {edge.weight} outside [0,1]")

    protected = {
        n.id for n in graph.nodes.values() if n.role in (NodeRole.QUERY, NodeRole.HYPOTHESIS)
    }
    for i, pair in enumerate(delta.merge_pairs):
        keep, remove = pair.get("keep"), pair.get("remove")
        if keep not in known:
            violations.append(f"merge_pairs[{i}]: unknown keep node {keep!r}")
        if remove not in known:
            violations.append(f"merge_pairs[{i}]: unknown remove node {remove!r}")
        if keep == remove:
            violations.append(f"merge_pairs[{i}]: keep and remove are the same node")
        if remove in protected:
            violations.append(f"merge_pairs[{i}]: cannot remove query/hypothesis node {remove!r}")

    return violations


def _combine_rationales(a: str, b: str) -> str:
    if not a:
        return b
    if not b or b == a or b in a.split(" | "):
        return a
    return f"{a} | {b}"


def _upsert_edge(edges: dict, edge: EvidenceEdge) -> None:
    existing = edges.get(edge.key)
    if existing is None:
        edges[edge.key] = edge
        return
    # duplicate assertion: keep the strongest weight, pool the rationales
    weight = max(existing.weight, edge.weight)
    edges[edge.key] = replace(
        existing, weight=weight, rationale=_combine_rationales(existing.rationale, edge.rationale)
    )


def apply_delta(graph: EvidenceGraph, delta: GraphDelta) -> EvidenceGraph:
    """Apply a validated delta: nodes first, then edges, merges last.

    The input graph is never modified. A delta re-asserting an existing
    edge keeps the max weight. Merge pairs re-point every edge incident to
    the removed node onto the kept one (self-loops created this way are
    dropped) and collapse duplicates to the max-weight edge.
    """
    violations = validate_delta(graph, delta)
    if violations:
        raise DeltaRejected(violations)

    g = graph._copy()
    for node in delta.add_nodes:
        g.nodes[node.id] = node
    for edge in delta.add_edges:
        _upsert_edge(g.edges, edge)

    for pair in delta.merge_pairs:
        keep, remove = pair["keep"], pair["remove"]
        if remove not in g.nodes:
            continue  # removed by an earlier pair in this same delta
        repointed: dict[tuple[str, str, str], EvidenceEdge] = {}
        for edge in g.edges.values():
            src = keep if edge.source == remove else edge.source
            tgt = keep if edge.target == remove else edge.target
            if src == tgt and (edge.source == remove or edge.target == remove):
                continue  # artifact self-loop from collapsing the pair
            moved = replace(edge, source=src, target=tgt)
            _upsert_edge(repointed, moved)
        g.edges = repointed
        del g.nodes[remove]

    for hotspot in delta.conflict_hotspots:
        if hotspot not in g.hotspots:
            g.hotspots.append(hotspot)
    return g


def _node_content(node: EvidenceNode) -> tuple:
    return (node.role, node.label, node.evidence_kind, node.candidate)


def merge(graph: EvidenceGraph, delta_pro: GraphDelta, delta_ske: GraphDelta) -> EvidenceGraph:
    """Consistency-resolving merge of the two debate deltas.

    Node-id collisions across the deltas: identical content means both
    agents cited the same node, so it deduplicates; divergent content gets
    a role suffix on both sides. Identical edges keep the max weight with
    pooled rationales (the upsert rule). When both deltas try to merge the
    same node, the Skeptic's pair is dropped and noted: Proponent-first
    ordering is fixed.
    """
    for name, delta in (("Proponent", delta_pro), ("Skeptic", delta_ske)):
        violations = validate_delta(graph, delta)
        if violations:
            raise DeltaRejected([f"{name} delta: {v}" for v in violations])

    pro_nodes = {n.id: n for n in delta_pro.add_nodes}
    ske_nodes = {n.id: n for n in delta_ske.add_nodes}
    collisions = set(pro_nodes) & set(ske_nodes)
    agreed = {c for c in collisions if _node_content(pro_nodes[c]) == _node_content(ske_nodes[c])}
    divergent = collisions - agreed
    pro = _rename_delta(delta_pro, {c: f"{c}__Proponent" for c in divergent})
    ske = _rename_delta(delta_ske, {c: f"{c}__Skeptic" for c in divergent})
    if agreed:
        ske = GraphDelta(
            add_nodes=[n for n in ske.add_nodes if n.id not in agreed],
            add_edges=ske.add_edges,
            merge_pairs=ske.merge_pairs,
            conflict_hotspots=ske.conflict_hotspots,
        )

    notes: list[str] = []
    pro_touched = {p["keep"] for p in pro.merge_pairs} | {p["remove"] for p in pro.merge_pairs}
    kept_ske_pairs = []
    for pair in ske.merge_pairs:
        if pair["keep"] in pro_touched or pair["remove"] in pro_touched:
            notes.append(
                f"consistency: dropped Skeptic merge {pair['remove']!r}->{pair['keep']!r}"
                " (conflicts with a Proponent merge)"
            )
        else:
            kept_ske_pairs.append(pair)
    # Proponent merges may have renamed away nodes the Skeptic references
    remap = {p["remove"]: p["keep"] for p in pro.merge_pairs}
    ske = _rename_delta(
        GraphDelta(ske.add_nodes, ske.add_edges, kept_ske_pairs, ske.conflict_hotspots), remap
    )

    g = apply_delta(graph, pro)
    g = apply_delta(g, ske)
    for note in notes:
        g = g.with_note(note)
    return g


def _rename_delta(delta: GraphDelta, mapping: dict[str, str]) -> GraphDelta:
    if not mapping:
        return delta

    def m(x: str) -> str:
        return mapping.get(x, x)

    return GraphDelta(
        add_nodes=[replace(n, id=m(n.id)) for n in delta.add_nodes],
        add_edges=[replace(e, source=m(e.source), target=m(e.target)) for e in delta.add_edges],
        merge_pairs=[{"keep": m(p["keep"]), "remove": m(p["remove"])} for p in delta.merge_pairs],
        conflict_hotspots=[
            ConflictHotspot(
                topic=h.topic,
                pro_nodes=tuple(m(x) for x in h.pro_nodes),
                con_nodes=tuple(m(x) for x in h.con_nodes),
            )
            for h in delta.conflict_hotspots
        ],
    )


def delta_magnitude(before: EvidenceGraph, after: EvidenceGraph) -> float:
    """Added node count + added edge count + total weight drift on edges
    present in both states."""
    bq, aq = before.query_node(), after.query_node()
    if bq is not None and aq is not None and bq.id != aq.id:
        raise ContractError("before/after graphs answer different queries")
    added_nodes = sum(1 for nid in after.nodes if nid not in before.nodes)
    added_edges = sum(1 for k in after.edges if k not in before.edges)
    drift = sum(
        abs(after.edges[k].weight - before.edges[k].weight)
        for k in after.edges
        if k in before.edges
    )
    return float(added_nodes + added_edges + drift)


# ---------------------------------------------------------------------------
# Structural metrics over the support skeleton (supports/entails edges only)
# ---------------------------------------------------------------------------

def _support_adjacency(graph: EvidenceGraph) -> dict[str, list[str]]:
    adj: dict[str, list[str]] = {}
    for edge in graph.edges.values():
        if edge.semantics is Semantics.REFUTES:
            continue
        adj.setdefault(edge.source, []).append(edge.target)
    for targets in adj.values():
        targets.sort()
    return adj


def _require_hypothesis(graph: EvidenceGraph, h: str) -> EvidenceNode:
    node = graph.nodes.get(h)
    if node is None or node.role is not NodeRole.HYPOTHESIS:
        raise ContractError(f"{h!r} is not a hypothesis node")
    return node


def candidate_anchor(graph: EvidenceGraph, h: str) -> EvidenceNode | None:
    """The evidence node standing in for the hypothesis's candidate entity.

    By convention its node id is the candidate entity id; it appears once
    an agent first cites the candidate in a chain.
    """
    hnode = _require_hypothesis(graph, h)
    if hnode.candidate is None:
        return None
    anchor = graph.nodes.get(hnode.candidate)
    if anchor is not None and anchor.role is NodeRole.EVIDENCE:
        return anchor
    return None


def mechanistic_connectivity(
    graph: EvidenceGraph,
    h: str,
    length_cap: int = DEFAULT_PATH_LENGTH_CAP,
    count_cap: int = DEFAULT_CHAIN_COUNT_CAP,
) -> float:
    """Capped count of support chains anchor -> ... -> query that pass
    through at least one Target or Pathway evidence node."""
    _require_hypothesis(graph, h)
    anchor = candidate_anchor(graph, h)
    query = graph.query_node()
    if anchor is None or query is None:
        return 0.0
    adj = _support_adjacency(graph)
    mech_kinds = (EvidenceKind.TARGET, EvidenceKind.PATHWAY)

    count = 0

    def dfs(node: str, depth: int, has_mech: bool, visited: set[str]) -> None:
        nonlocal count
        if count >= count_cap:
            return
        if node == query.id:
            if has_mech:
                count += 1
            return
        if depth == length_cap:
            return
        for nxt in adj.get(node, ()):
            if nxt in visited:
                continue
            n = graph.nodes.get(nxt)
            mech = has_mech or (
                n is not None and n.role is NodeRole.EVIDENCE and n.evidence_kind in mech_kinds
            )
            visited.add(nxt)
            dfs(nxt, depth + 1, mech, visited)
            visited.discard(nxt)

    dfs(anchor.id, 0, False, {anchor.id})
    return float(min(count, count_cap))


def disjoint_support_paths(graph: EvidenceGraph, h: str) -> int:
    """Maximum number of edge-disjoint anchor -> query support paths,
    computed exactly by unit-capacity max-flow (graphs stay small)."""
    _require_hypothesis(graph, h)
    anchor = candidate_anchor(graph, h)
    query = graph.query_node()
    if anchor is None or query is None:
        return 0

    capacity: dict[str, dict[str, int]] = {}
    for edge in graph.edges.values():
        if edge.semantics is Semantics.REFUTES:
            continue
        capacity.setdefault(edge.source, {})
        capacity[edge.source][edge.target] = capacity[edge.source].get(edge.target, 0) + 1
        capacity.setdefault(edge.target, {}).setdefault(edge.source, 0)

    source, sink = anchor.id, query.id
    if source not in capacity or sink not in capacity:
        return 0

    flow = 0
    while True:
        # BFS for an augmenting path in the residual network
        parent: dict[str, str] = {source: source}
        queue = deque([source])
        while queue and sink not in parent:
            u = queue.popleft()
            for v in sorted(capacity.get(u, {})):
                if v not in parent and capacity[u][v] > 0:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            return flow
        v = sink
        while v != source:
            u = parent[v]
            capacity[u][v] -= 1
            capacity[v][u] += 1
            v = u
        flow += 1


# ---------------------------------------------------------------------------
# Canonical snapshot format
# ---------------------------------------------------------------------------

def snapshot_dict(graph: EvidenceGraph) -> dict:
    return {
        "nodes": [
            {
                "id": n.id,
                "role": n.role.value,
                "label": n.label,
                "evidence_kind": n.evidence_kind.value if n.evidence_kind else None,
                "created_by": n.created_by,
                "round": n.round,
                "candidate": n.candidate,
            }
            for n in sorted(graph.nodes.values(), key=lambda n: n.id)
        ],
        "edges": [
            {
                "source": e.source,
                "target": e.target,
                "semantics": e.semantics.value,
                "weight": e.weight,
                "rationale": e.rationale,
                "created_by": e.created_by,
                "round": e.round,
                "label": e.label,
            }
            for e in sorted(graph.edges.values(), key=lambda e: e.key)
        ],
        "round_index": graph.round_index,
        "hotspots": [h.as_dict() for h in graph.hotspots],
        "notes": list(graph.notes),
    }


def snapshot(graph: EvidenceGraph) -> bytes:
    """Canonical byte document; structurally equal graphs snapshot identically."""
    return canonical_json(snapshot_dict(graph)).encode("utf-8")


def restore(document: bytes | str) -> EvidenceGraph:
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise LoadError(f"snapshot is not valid JSON at offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise LoadError("snapshot root must be a JSON object")

    g = EvidenceGraph(round_index=int(doc.get("round_index", 0)))
    for i, n in enumerate(doc.get("nodes", [])):
        try:
            kind = n.get("evidence_kind")
            g.nodes[n["id"]] = EvidenceNode(
                id=n["id"],
                role=NodeRole(n["role"]),
                label=n.get("label", ""),
                evidence_kind=EvidenceKind(kind) if kind else None,
                created_by=n.get("created_by", ""),
                round=int(n.get("round", 0)),
                candidate=n.get("candidate"),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise LoadError(f"nodes[{i}]: {exc}") from exc
    for i, e in enumerate(doc.get("edges", [])):
        try:
            edge = EvidenceEdge(
                source=e["source"],
                target=e["target"],
                semantics=Semantics(e["semantics"]),
                weight=float(e["weight"]),
                rationale=e.get("rationale", ""),
                created_by=e.get("created_by", ""),
                round=int(e.get("round", 0)),
                label=e.get("label", ""),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise LoadError(f"edges[{i}]: {exc}") from exc
        if edge.source not in g.nodes or edge.target not in g.nodes:
            raise LoadError(f"edges[{i}]: dangling endpoint")
        g.edges[edge.key] = edge
    for i, h in enumerate(doc.get("hotspots", [])):
        try:
            g.hotspots.append(
                ConflictHotspot(
                    topic=h["topic"],
                    pro_nodes=tuple(h.get("pro_nodes", [])),
                    con_nodes=tuple(h.get("con_nodes", [])),
                )
            )
        except (KeyError, TypeError) as exc:
            raise LoadError(f"hotspots[{i}]: {exc}") from exc
    g.notes = [str(x) for x in doc.get("notes", [])]
    return g


def structurally_equal(a: EvidenceGraph, b: EvidenceGraph) -> bool:
    return snapshot(a) == snapshot(b)


def to_dot(graph: EvidenceGraph) -> str:
    """GraphViz rendering for audit reports: supports solid, refutes dashed,
    entails bold; node shape tracks the role."""
    shape = {NodeRole.QUERY: "diamond", NodeRole.HYPOTHESIS: "box", NodeRole.EVIDENCE: "ellipse"}
    style = {Semantics.SUPPORTS: "solid", Semantics.REFUTES: "dashed", Semantics.ENTAILS: "bold"}
    lines = ["digraph tegraph {"]
    for n in sorted(graph.nodes.values(), key=lambda n: n.id):
        label = n.label.replace('"', "'")
        lines.append(f'  "{n.id}" [shape={shape[n.role]}, label="{label}"];')
    for e in sorted(graph.edges.values(), key=lambda e: e.key):
        lines.append(
            f'  "{e.source}" -> "{e.target}" [style={style[e.semantics]}, label="{e.weight:.2f}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
