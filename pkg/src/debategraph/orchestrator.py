"""The investigation loop: seed hypotheses, run the adversarial debate until
the monitor interrupts, score, test convergence, revise, repeat.

Each outer round holds a micro-loop of Proponent/Skeptic delta exchanges.
The micro-loop ends when the merged change drops below epsilon, when most
recent micro-rounds stopped producing new nodes, or at the hard cap. The
outer loop ends on score convergence (never at round zero), at the round
limit, or when the call budget runs dry; budget exhaustion still yields a
scored, ranked, auditable result.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BackendError,
    BudgetExhausted,
    ConfigError,
    ContractError,
    DeltaRejected,
    ParseError,
    ValidationFailure,
)
from .evolution import HeuristicLibrary, retrieve_heuristics
from .explorer import EmbeddingTable, Hypothesis, ProjectionParams, rank_candidates, seed_tegraph
from .kg import KnowledgeGraph, RepurposingQuery
from .prompts import PromptVersion
from .runtime import AgentRuntime, Backend, CallBudget, Transcript
from .schemas import AgentRole
from .scoring import ScoreBreakdown, ScoringWeights, aggregate_score, rank, stop_decision
from .tegraph import (
    ConflictHotspot,
    EvidenceEdge,
    EvidenceGraph,
    EvidenceNode,
    GraphDelta,
    NodeRole,
    apply_delta,
    delta_magnitude,
    merge,
    parse_evidence_kind,
    semantics_for_label,
    snapshot,
    snapshot_dict,
    validate_delta,
)
from .util import canonical_json, sigmoid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Directive:
    hypothesis_id: str
    action_type: str
    assignee: str  # "Proponent" | "Skeptic"
    detail: str = ""
    debate_focus: tuple[str, ...] = ()

    def as_action(self) -> dict:
        return {
            "type": self.action_type,
            "assignee": self.assignee,
            "hypothesis_id": self.hypothesis_id,
            "detail": self.detail,
            "debate_focus": list(self.debate_focus),
        }


@dataclass
class InvestigationConfig:
    t_max: int = 4
    delta_stop: float = 0.03
    epsilon_inner: float = 0.5
    saturation_ratio: float = 0.65
    k_seeds: int = 5
    max_micro_rounds: int = 8
    call_budget: int = 50
    heuristic_j: int = 3
    seed: int = 0
    saturation_window: int = 4
    max_regenerations: int = 1
    require_disjoint_paths: int = 2

    def __post_init__(self):
        for name in ("t_max", "k_seeds", "max_micro_rounds", "call_budget", "saturation_window"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")
        if self.delta_stop <= 0 or self.epsilon_inner <= 0:
            raise ContractError("delta_stop and epsilon_inner must be positive")
        if not (0 < self.saturation_ratio <= 1):
            raise ContractError("saturation_ratio must lie in (0, 1]")
        if self.heuristic_j < 0 or self.max_regenerations < 0:
            raise ContractError("heuristic_j and max_regenerations must be >= 0")

    def as_dict(self) -> dict:
        return {
            "t_max": self.t_max,
            "delta_stop": self.delta_stop,
            "epsilon_inner": self.epsilon_inner,
            "saturation_ratio": self.saturation_ratio,
            "k_seeds": self.k_seeds,
            "max_micro_rounds": self.max_micro_rounds,
            "call_budget": self.call_budget,
            "heuristic_j": self.heuristic_j,
            "seed": self.seed,
            "saturation_window": self.saturation_window,
            "max_regenerations": self.max_regenerations,
            "require_disjoint_paths": self.require_disjoint_paths,
        }


@dataclass
class InvestigationResult:
    query: RepurposingQuery
    ranked: list[dict]  # {hypothesis_id, candidate, candidate_name, score, breakdown}
    final_graph: EvidenceGraph
    rounds_executed: int
    termination_reason: str  # score_converged | t_max_reached | budget_exhausted
    score_history: list[dict[str, float]]
    breakdowns: list[ScoreBreakdown]
    transcript: Transcript
    events: list[str] = field(default_factory=list)
    run_dir: Path | None = None


def parse_directives(pi_revise_payload: dict) -> tuple[list[Directive], dict | None]:
    """Flatten the PI's revise output into directives plus any seed request."""
    directives: list[Directive] = []
    for revision in pi_revise_payload.get("revisions", []):
        focus = tuple(revision.get("debate_focus", []))
        for action in revision.get("graph_actions", []):
            assignee = action.get("assignee")
            if assignee not in (AgentRole.PROPONENT.value, AgentRole.SKEPTIC.value):
                raise ValidationFailure(
                    paths=["revisions.graph_actions.assignee"],
                    messages=[f"assignee must be Proponent or Skeptic, got {assignee!r}"],
                )
            directives.append(
                Directive(
                    hypothesis_id=revision["hypothesis_id"],
                    action_type=action["type"],
                    assignee=assignee,
                    detail=action.get("detail", ""),
                    debate_focus=focus,
                )
            )
    return directives, pi_revise_payload.get("seed_request")


# ---------------------------------------------------------------------------
# Agent graph_updates -> GraphDelta translation
# ---------------------------------------------------------------------------

def updates_to_delta(
    graph: EvidenceGraph,
    focus: Hypothesis | None,
    payload: dict,
    created_by: str,
    round_index: int,
) -> GraphDelta:
    """Interpret a validated graph_updates payload against the graph.

    Relation labels collapse onto the three edge semantics (the original
    label rides along on the edge). Mentions of existing node ids are
    dropped rather than rejected, endpoint references by display label
    resolve to node ids when unambiguous, and the first citation of the
    focus hypothesis's candidate entity auto-creates its anchor node.
    """
    gu = payload.get("graph_updates", {})
    known = set(graph.nodes)
    label_to_id: dict[str, str | None] = {}
    for n in graph.nodes.values():
        label_to_id[n.label] = None if n.label in label_to_id else n.id

    add_nodes: list[EvidenceNode] = []
    new_ids: set[str] = set()
    for n in gu.get("add_nodes", []):
        nid = n["id"]
        if nid in known or nid in new_ids:
            continue
        add_nodes.append(
            EvidenceNode(
                id=nid,
                role=NodeRole.EVIDENCE,
                label=n.get("label", nid),
                evidence_kind=parse_evidence_kind(n.get("type")),
                created_by=created_by,
                round=round_index,
            )
        )
        new_ids.add(nid)

    def resolve(ref: str) -> str:
        if ref in known or ref in new_ids:
            return ref
        mapped = label_to_id.get(ref)
        if mapped is not None:
            return mapped
        if focus is not None and ref in (focus.candidate, focus_label):
            return focus.candidate
        return ref

    focus_label = ""
    if focus is not None:
        node = graph.nodes.get(focus.id)
        focus_label = node.label if node else focus.candidate

    add_edges: list[EvidenceEdge] = []
    seen_edges: set[tuple[str, str, str]] = set()
    for e in gu.get("add_edges", []):
        source, target = resolve(e["source"]), resolve(e["target"])
        semantics = semantics_for_label(e["relation"])
        key = (source, target, semantics.value)
        if key in seen_edges:
            continue
        seen_edges.add(key)
        add_edges.append(
            EvidenceEdge(
                source=source,
                target=target,
                semantics=semantics,
                weight=float(e["weight"]),
                rationale=e.get("rationale", ""),
                created_by=created_by,
                round=round_index,
                label=e["relation"],
            )
        )

    # candidate anchor: auto-created the first time an edge cites the entity
    if focus is not None and focus.candidate not in known and focus.candidate not in new_ids:
        referenced = {e.source for e in add_edges} | {e.target for e in add_edges}
        if focus.candidate in referenced:
            add_nodes.append(
                EvidenceNode(
                    id=focus.candidate,
                    role=NodeRole.EVIDENCE,
                    label=focus_label or focus.candidate,
                    evidence_kind=parse_evidence_kind(None),
                    created_by=created_by,
                    round=round_index,
                )
            )

    merge_pairs = [
        {"keep": resolve(p["keep"]), "remove": resolve(p["remove"])} for p in gu.get("merge", [])
    ]
    hotspots = [
        ConflictHotspot(
            topic=h["topic"],
            pro_nodes=tuple(resolve(x) for x in h.get("pro_nodes", [])),
            con_nodes=tuple(resolve(x) for x in h.get("con_nodes", [])),
        )
        for h in gu.get("conflict_hotspots", [])
    ]
    return GraphDelta(
        add_nodes=add_nodes, add_edges=add_edges, merge_pairs=merge_pairs, conflict_hotspots=hotspots
    )


# ---------------------------------------------------------------------------
# Debate micro-loop
# ---------------------------------------------------------------------------

def _builder_context(
    query: RepurposingQuery,
    focus: Hypothesis,
    focus_label: str,
    graph: EvidenceGraph,
    directives: list[Directive],
    role: AgentRole,
    config: InvestigationConfig,
) -> dict:
    ctx = {
        "query": {"entity": query.query_entity, "relation": query.target_relation},
        "hypothesis": {"id": focus.id, "candidate": {"name": focus_label, "id": focus.candidate}},
        "tegraph_snapshot": snapshot_dict(graph),
        "graph_actions": [d.as_action() for d in directives if d.assignee == role.value],
    }
    if role is AgentRole.PROPONENT:
        ctx["constraints"] = {"require_disjoint_paths": config.require_disjoint_paths}
    return ctx


def _agent_delta(
    runtime: AgentRuntime,
    role: AgentRole,
    query: RepurposingQuery,
    focus: Hypothesis,
    focus_label: str,
    graph: EvidenceGraph,
    directives: list[Directive],
    config: InvestigationConfig,
    round_index: int,
    events: list[str],
) -> GraphDelta:
    own = [d for d in directives if d.assignee == role.value]
    if own:
        mode = "execute_actions"
    else:
        mode = "build_chain" if role is AgentRole.PROPONENT else "build_counterchain"
    context = _builder_context(query, focus, focus_label, graph, directives, role, config)

    holder: dict[str, GraphDelta] = {}

    def check(payload: dict) -> None:
        delta = updates_to_delta(graph, focus, payload, role.value, round_index)
        violations = validate_delta(graph, delta)
        if violations:
            raise DeltaRejected(violations)
        holder["delta"] = delta

    try:
        runtime.step(role, mode, context, extra_check=check)
        return holder["delta"]
    except BudgetExhausted:
        raise
    except (ParseError, ValidationFailure, DeltaRejected) as exc:
        events.append(f"round {round_index}: {role.value}/{mode} invalid after retry, empty delta ({exc})")
        return GraphDelta()


def debate_round(
    graph: EvidenceGraph,
    hypotheses: list[Hypothesis],
    directives: list[Directive],
    query: RepurposingQuery,
    runtime: AgentRuntime,
    config: InvestigationConfig,
    round_index: int,
    events: list[str],
) -> tuple[EvidenceGraph, bool]:
    """Proponent/Skeptic micro-rounds until the monitor interrupts.

    Returns (graph, budget_exhausted). Budget exhaustion mid-micro keeps
    every delta merged so far: the whiteboard never loses recorded work.
    """
    window: deque[bool] = deque(maxlen=config.saturation_window)
    micro = 0
    pro_own = [d for d in directives if d.assignee == AgentRole.PROPONENT.value]
    ske_own = [d for d in directives if d.assignee == AgentRole.SKEPTIC.value]
    by_id = {h.id: h for h in hypotheses}

    while micro < config.max_micro_rounds:
        rotation = hypotheses[micro % len(hypotheses)]

        def focus_for(own: list[Directive]) -> Hypothesis:
            if own and own[0].hypothesis_id in by_id:
                return by_id[own[0].hypothesis_id]
            return rotation

        deltas = {AgentRole.PROPONENT: GraphDelta(), AgentRole.SKEPTIC: GraphDelta()}
        exhausted = False
        for role, own in ((AgentRole.PROPONENT, pro_own), (AgentRole.SKEPTIC, ske_own)):
            focus = focus_for(own)
            node = graph.nodes.get(focus.id)
            focus_label = node.label if node else focus.candidate
            try:
                deltas[role] = _agent_delta(
                    runtime, role, query, focus, focus_label, graph, directives, config, round_index, events
                )
            except BudgetExhausted:
                exhausted = True
                events.append(f"round {round_index} micro {micro}: budget exhausted at {role.value}")
                break

        try:
            new_graph = merge(graph, deltas[AgentRole.PROPONENT], deltas[AgentRole.SKEPTIC])
        except DeltaRejected as exc:
            # deltas were pre-validated; a cross-delta artifact lands here
            events.append(f"round {round_index} micro {micro}: merge rejected ({exc})")
            new_graph = graph

        magnitude = delta_magnitude(graph, new_graph)
        new_nodes = sum(1 for nid in new_graph.nodes if nid not in graph.nodes)
        window.append(new_nodes == 0)
        graph = new_graph
        micro += 1

        if exhausted:
            return graph, True
        if magnitude < config.epsilon_inner:
            events.append(f"round {round_index}: interrupt after micro {micro} (magnitude {magnitude:g})")
            break
        if window and (sum(window) / len(window)) >= config.saturation_ratio and len(window) == window.maxlen:
            events.append(f"round {round_index}: interrupt after micro {micro} (saturation)")
            break
    return graph, False


# ---------------------------------------------------------------------------
# Full investigation
# ---------------------------------------------------------------------------

def _pi_context(
    query: RepurposingQuery,
    hypotheses: list[Hypothesis],
    graph: EvidenceGraph,
    score_maps: list[dict[str, float]],
    config: InvestigationConfig,
    delta_stop: float,
    seed_history: list[list[str]],
    labels: dict[str, str],
) -> dict:
    last_scores = []
    if score_maps:
        last_scores = [{"hypothesis_id": k, "score": v} for k, v in sorted(score_maps[-1].items())]
    return {
        "query": {"entity": query.query_entity, "relation": query.target_relation},
        "hypotheses": [
            {"id": h.id, "candidate": {"name": labels.get(h.candidate, h.candidate), "id": h.candidate}}
            for h in hypotheses
        ],
        "tegraph_snapshot": snapshot_dict(graph),
        "history": {"round": len(score_maps), "last_scores": last_scores},
        "thresholds": {"stop_delta": delta_stop, "saturation_ratio": config.saturation_ratio},
        "seed_context": {
            "target_type": query.candidate_type.value,
            "seed_history": seed_history,
        },
    }


def _score_all(graph: EvidenceGraph, weights: ScoringWeights) -> list[ScoreBreakdown]:
    return [aggregate_score(graph, n.id, weights) for n in graph.hypothesis_nodes()]


def _write(run_dir: Path | None, rel: str, text: str) -> None:
    if run_dir is None:
        return
    path = run_dir / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def run_investigation(
    query: RepurposingQuery,
    kg: KnowledgeGraph,
    config: InvestigationConfig,
    backend: Backend,
    library: HeuristicLibrary | None = None,
    embeddings: EmbeddingTable | None = None,
    params: ProjectionParams | None = None,
    prompts: dict[AgentRole, PromptVersion] | None = None,
    run_dir: Path | None = None,
) -> InvestigationResult:
    """Execute one full investigation and write its audit trail.

    Order of operations: heuristic retrieval, PI init, Explorer seeding,
    then debate/score/stop-check/revise rounds. Budget exhaustion at any
    point degrades to a final deterministic scoring pass so the run always
    produces a ranked result.
    """
    if query.query_entity not in kg.entities:
        raise ContractError(f"query entity {query.query_entity!r} not in the knowledge graph")
    if embeddings is None or params is None:
        raise ContractError("explorer assets (embeddings, params) are required")

    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        transcript_path = run_dir / "transcript.jsonl"
        if transcript_path.exists():
            transcript_path.unlink()
    budget = CallBudget(max_calls=config.call_budget)
    transcript = Transcript(run_dir / "transcript.jsonl" if run_dir else None)
    events: list[str] = []

    ent = kg.entities[query.query_entity]
    heuristics = []
    if library is not None and config.heuristic_j > 0:
        context_text = f"{ent.name} {ent.entity_type.value} {query.target_relation} {ent.description}"
        heuristics = retrieve_heuristics(library, context_text, config.heuristic_j)
        if heuristics:
            events.append("retrieved heuristics: " + ", ".join(h.id for h in heuristics))

    runtime = AgentRuntime(
        backend=backend,
        budget=budget,
        transcript=transcript,
        prompts=prompts or {},
        pi_heuristics=heuristics,
    )

    labels = {e.id: e.name for e in kg.entities.values()}
    t_max_eff = config.t_max
    delta_stop_eff = config.delta_stop
    weights_base = ScoringWeights()
    seed_history: list[list[str]] = []
    exhausted = False

    # PI/init may tighten the plan within the configured bounds
    empty_graph = EvidenceGraph()
    try:
        env = runtime.step(
            AgentRole.PI,
            "init",
            _pi_context(query, [], empty_graph, [], config, delta_stop_eff, seed_history, labels),
        )
        plan = env.payload.get("plan", {})
        if isinstance(plan.get("rounds"), int):
            t_max_eff = max(1, min(config.t_max, plan["rounds"]))
        stopping = plan.get("stopping", {})
        if isinstance(stopping, dict) and isinstance(stopping.get("delta_threshold"), (int, float)):
            if stopping["delta_threshold"] > 0:
                delta_stop_eff = float(stopping["delta_threshold"])
        weights_base = weights_base.overridden(plan.get("scoring_weights"))
    except BudgetExhausted:
        exhausted = True
        events.append("budget exhausted during PI/init")
    except (ParseError, ValidationFailure) as exc:
        events.append(f"PI/init invalid after retry, using configured plan ({exc})")

    hypotheses = rank_candidates(query, kg, embeddings, params, k=config.k_seeds)
    seed_history.append([h.candidate for h in hypotheses])
    graph = seed_tegraph(query, hypotheses, kg)

    if run_dir is not None:
        _write(
            run_dir,
            "config.json",
            canonical_json(
                {
                    "query": {
                        "entity": query.query_entity,
                        "relation": query.target_relation,
                        "direction": query.direction.value,
                    },
                    "config": config.as_dict(),
                    "effective": {"t_max": t_max_eff, "delta_stop": delta_stop_eff},
                    "backend": backend.kind,
                    "heuristics": [h.id for h in heuristics],
                    "prompt_versions": {r.value: runtime.prompt_for(r).version for r in AgentRole},
                }
            ),
        )

    score_maps: list[dict[str, float]] = []
    breakdowns: list[ScoreBreakdown] = []
    termination = None
    rounds_executed = 0
    regens_used = 0
    directives: list[Directive] = []

    def score_and_record(t: int, weights: ScoringWeights, stop_fired: bool | None) -> None:
        nonlocal breakdowns
        breakdowns = _score_all(graph, weights)
        score_maps.append({b.hypothesis_id: b.score for b in breakdowns})
        _write(run_dir, f"rounds/{t}/snapshot.json", snapshot(graph).decode("utf-8"))
        _write(
            run_dir,
            f"rounds/{t}/scores.json",
            canonical_json(
                {
                    "round": t,
                    "weights": weights.as_dict(),
                    "breakdowns": [b.as_dict() for b in breakdowns],
                    "stop_fired": stop_fired,
                }
            ),
        )

    t = 0
    if exhausted:
        termination = "budget_exhausted"
        score_and_record(0, weights_base, None)
        rounds_executed = 0
    else:
        try:
            while t < t_max_eff:
                graph = graph.with_round(t)
                round_scored = False
                graph = debate_round(
                    graph, hypotheses, directives, query, runtime, config, t, events
                )

                weights_t = weights_base
                try:
                    env = runtime.step(
                        AgentRole.PI,
                        "score",
                        _pi_context(query, hypotheses, graph, score_maps, config, delta_stop_eff, seed_history, labels),
                    )
                    weights_t = weights_base.overridden(env.payload.get("weights"))
                except (ParseError, ValidationFailure) as exc:
                    events.append(f"round {t}: PI/score invalid after retry, default weights ({exc})")

                stop = None
                score_and_record(t, weights_t, None)
                round_scored = True
                rounds_executed = t + 1
                stop = stop_decision(score_maps, delta_stop_eff, t)
                if stop:
                    termination = "score_converged"
                    events.append(f"round {t}: scores converged (delta <= {delta_stop_eff})")
                    break
                if t + 1 >= t_max_eff:
                    termination = "t_max_reached"
                    break

                # strategic revision; skipped when this was the final round
                directives = []
                try:
                    env = runtime.step(
                        AgentRole.PI,
                        "revise",
                        _pi_context(query, hypotheses, graph, score_maps, config, delta_stop_eff, seed_history, labels),
                    )
                    directives, seed_request = parse_directives(env.payload)
                    if (
                        seed_request
                        and seed_request.get("should_regenerate")
                        and regens_used < config.max_regenerations
                    ):
                        regens_used += 1
                        seen = {h.candidate for h in hypotheses}
                        try:
                            extra = rank_candidates(
                                query, kg, embeddings, params,
                                k=config.k_seeds, exclude=seen, id_offset=len(hypotheses),
                            )
                        except (ContractError, ConfigError) as exc:
                            extra = []
                            events.append(f"round {t}: seed regeneration failed ({exc})")
                        if extra:
                            seed_delta = GraphDelta(
                                add_nodes=[
                                    EvidenceNode(
                                        id=h.id,
                                        role=NodeRole.HYPOTHESIS,
                                        label=labels.get(h.candidate, h.candidate),
                                        created_by="Explorer",
                                        round=t,
                                        candidate=h.candidate,
                                    )
                                    for h in extra
                                ],
                                add_edges=[
                                    EvidenceEdge(
                                        source=query.query_entity,
                                        target=h.id,
                                        semantics=semantics_for_label("entails"),
                                        weight=sigmoid(h.seed_score),
                                        rationale="seed score (regeneration)",
                                        created_by="Explorer",
                                        round=t,
                                    )
                                    for h in extra
                                ],
                            )
                            graph = apply_delta(graph, seed_delta)
                            hypotheses = hypotheses + extra
                            seed_history.append([h.candidate for h in extra])
                            events.append(
                                f"round {t}: regenerated seeds: {[h.candidate for h in extra]}"
                            )
                except (ParseError, ValidationFailure) as exc:
                    events.append(f"round {t}: PI/revise invalid after retry, no directives ({exc})")
                t += 1
        except BudgetExhausted:
            termination = "budget_exhausted"
            events.append(f"round {t}: budget exhausted; scoring current graph with defaults")
            if not round_scored:
                score_and_record(t, weights_base, None)
                rounds_executed = t + 1
        except BackendError:
            # preserve whatever artifacts exist, then fail the investigation
            _write(run_dir, "partial_snapshot.json", snapshot(graph).decode("utf-8"))
            _write(run_dir, "events.json", canonical_json(events))
            raise

    if termination is None:
        termination = "t_max_reached"

    order = rank(breakdowns)
    by_id = {b.hypothesis_id: b for b in breakdowns}
    node_by_id = {n.id: n for n in graph.hypothesis_nodes()}
    ranked = []
    for hid in order:
        b = by_id[hid]
        node = node_by_id.get(hid)
        cand = node.candidate if node else ""
        ranked.append(
            {
                "hypothesis_id": hid,
                "candidate": cand,
                "candidate_name": labels.get(cand, cand),
                "score": b.score,
                "breakdown": b.as_dict(),
            }
        )

    result = InvestigationResult(
        query=query,
        ranked=ranked,
        final_graph=graph,
        rounds_executed=rounds_executed,
        termination_reason=termination,
        score_history=score_maps,
        breakdowns=breakdowns,
        transcript=transcript,
        events=events,
        run_dir=run_dir,
    )
    if run_dir is not None:
        _write(run_dir, "result.json", canonical_json(_result_doc(result)))
        _write(run_dir, "report.md", render_report(result, labels))
    return result


def _result_doc(result: InvestigationResult) -> dict:
    return {
        "query": {
            "entity": result.query.query_entity,
            "relation": result.query.target_relation,
            "direction": result.query.direction.value,
        },
        "ranked": result.ranked,
        "rounds_executed": result.rounds_executed,
        "termination_reason": result.termination_reason,
        "score_history": result.score_history,
        "events": result.events,
    }


def render_report(result: InvestigationResult, labels: dict[str, str]) -> str:
    """Human-readable audit report assembled from deterministic templates."""
    q = result.query
    lines = [
        "# Investigation report",
        "",
        f"Query: `{q.query_entity}` ({labels.get(q.query_entity, q.query_entity)}), "
        f"relation `{q.target_relation}`, direction `{q.direction.value}`.",
        f"Rounds executed: {result.rounds_executed}. Termination: {result.termination_reason}.",
        "",
        "## Recommended pairs",
        "",
        "| rank | hypothesis | candidate | score |",
        "|------|------------|-----------|-------|",
    ]
    for i, row in enumerate(result.ranked, start=1):
        lines.append(
            f"| {i} | {row['hypothesis_id']} | {row['candidate_name']} ({row['candidate']}) "
            f"| {row['score']:.4f} |"
        )
    lines += ["", "## Evidence summary", ""]
    for row in result.ranked:
        b = row["breakdown"]
        lines.append(
            f"- {row['hypothesis_id']} ({row['candidate_name']}): support {b['sum_support']:.2f}, "
            f"refute {b['sum_refute']:.2f}, chains {b['c_mech']:.0f}, disjoint paths {b['d_path']}, "
            f"conflicts {b['conflict_count']}."
        )
    lines += ["", "## Reasoning rounds", ""]
    for t, scores in enumerate(result.score_history):
        ordered = ", ".join(f"{k}={v:.4f}" for k, v in sorted(scores.items()))
        lines.append(f"- round {t}: {ordered}")
    if result.events:
        lines += ["", "## Run log", ""]
        lines += [f"- {e}" for e in result.events]
    return "\n".join(lines) + "\n"
