"""Post-run learning: credit-assignment reports, prompt patching, heuristic
distillation, and top-J heuristic retrieval from the shared library.

Heuristics are short WHEN/THEN rules. The library is append-only (ids are
never reused; removal only through an explicit prune) and versioned so a
stale process can never clobber newer state on disk.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContractError, DataError, LoadError
from .prompts import LEARNED_SECTION_HEADER, MAX_LEARNED_DIRECTIVES, PromptVersion
from .runtime import AgentRuntime, invoke
from .schemas import AgentRole, extract_json_object
from .tegraph import EvidenceGraph
from .util import canonical_json

logger = logging.getLogger(__name__)

NEAR_DUPLICATE_JACCARD = 0.8
MAX_HEURISTIC_WORDS = 60
QUALITY_TOP_SCORE = 0.6  # a run must rank its best hypothesis at least this high


# ---------------------------------------------------------------------------
# Credit assignment report
# ---------------------------------------------------------------------------

@dataclass
class Motif:
    description: str
    hypothesis_id: str | None = None
    node_refs: list[str] = field(default_factory=list)
    edge_refs: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "description": self.description,
            "hypothesis_id": self.hypothesis_id,
            "node_refs": list(self.node_refs),
            "edge_refs": list(self.edge_refs),
        }


@dataclass
class CreditAssignmentReport:
    run_id: str
    pivotal_motifs: list[Motif] = field(default_factory=list)
    unproductive_paths: list[Motif] = field(default_factory=list)
    residual_gaps: list[str] = field(default_factory=list)
    prompt_patches: list[dict] = field(default_factory=list)  # {"role", "patch"}
    distillable: list[str] = field(default_factory=list)
    final_recommendations: list[dict] = field(default_factory=list)
    top_score: float = 0.0
    dropped_refs: list[str] = field(default_factory=list)
    failure: str | None = None

    def as_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "pivotal_motifs": [m.as_dict() for m in self.pivotal_motifs],
            "unproductive_paths": [m.as_dict() for m in self.unproductive_paths],
            "residual_gaps": list(self.residual_gaps),
            "prompt_patches": list(self.prompt_patches),
            "distillable": list(self.distillable),
            "final_recommendations": list(self.final_recommendations),
            "top_score": self.top_score,
            "dropped_refs": list(self.dropped_refs),
            "failure": self.failure,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CreditAssignmentReport":
        def motifs(key):
            return [
                Motif(
                    description=m.get("description", ""),
                    hypothesis_id=m.get("hypothesis_id"),
                    node_refs=list(m.get("node_refs", [])),
                    edge_refs=list(m.get("edge_refs", [])),
                )
                for m in doc.get(key, [])
            ]

        return cls(
            run_id=doc["run_id"],
            pivotal_motifs=motifs("pivotal_motifs"),
            unproductive_paths=motifs("unproductive_paths"),
            residual_gaps=list(doc.get("residual_gaps", [])),
            prompt_patches=list(doc.get("prompt_patches", [])),
            distillable=list(doc.get("distillable", [])),
            final_recommendations=list(doc.get("final_recommendations", [])),
            top_score=float(doc.get("top_score", 0.0)),
            dropped_refs=list(doc.get("dropped_refs", [])),
            failure=doc.get("failure"),
        )

    def qualifies_for_distillation(self, threshold: float = QUALITY_TOP_SCORE) -> bool:
        return self.failure is None and self.top_score >= threshold and (
            bool(self.distillable) or bool(self.pivotal_motifs)
        )


def _resolve_motifs(raw: list[dict], snapshot: EvidenceGraph, dropped: list[str]) -> list[Motif]:
    edge_keys = {f"{e.source}->{e.target}" for e in snapshot.edges.values()}
    out = []
    for m in raw:
        node_refs, edge_refs = [], []
        for ref in m.get("node_refs", []):
            if ref in snapshot.nodes:
                node_refs.append(ref)
            else:
                dropped.append(f"node:{ref}")
        for ref in m.get("edge_refs", []):
            if ref in edge_keys:
                edge_refs.append(ref)
            else:
                dropped.append(f"edge:{ref}")
        out.append(
            Motif(
                description=m.get("description", ""),
                hypothesis_id=m.get("hypothesis_id"),
                node_refs=node_refs,
                edge_refs=edge_refs,
            )
        )
    return out


def generate_credit_report(
    run_id: str,
    final_snapshot: EvidenceGraph,
    context: dict,
    runtime: AgentRuntime,
    top_score: float,
) -> CreditAssignmentReport:
    """Run the PI's final audit over a completed trajectory.

    Backend or validation trouble never propagates: the result is an empty
    report with the failure recorded, and evolution is simply skipped.
    """
    try:
        envelope = runtime.step(AgentRole.PI, "report_and_evolve", context)
    except Exception as exc:  # noqa: BLE001 - evolution must never be fatal
        logger.warning("credit report generation failed for %s: %s", run_id, exc)
        return CreditAssignmentReport(run_id=run_id, top_score=top_score, failure=str(exc))

    payload = envelope.payload
    dropped: list[str] = []
    report = CreditAssignmentReport(
        run_id=run_id,
        pivotal_motifs=_resolve_motifs(payload.get("pivotal_motifs", []), final_snapshot, dropped),
        unproductive_paths=_resolve_motifs(payload.get("unproductive_paths", []), final_snapshot, dropped),
        residual_gaps=[str(g) for g in payload.get("residual_gaps", [])],
        prompt_patches=[dict(p) for p in payload.get("prompt_patches", [])],
        distillable=[_heuristic_text(h) for h in payload.get("heuristics", [])],
        final_recommendations=list(payload.get("final_recommendations", [])),
        top_score=top_score,
        dropped_refs=dropped,
    )
    if dropped:
        logger.warning("credit report for %s dropped dangling refs: %s", run_id, dropped)
    return report


# ---------------------------------------------------------------------------
# Prompt patching
# ---------------------------------------------------------------------------

def _directive_lines(patch: str) -> list[str]:
    lines = []
    for line in patch.splitlines():
        text = line.strip().lstrip("-").strip()
        if text:
            lines.append(text)
    return lines


def apply_prompt_patch(current: PromptVersion, patch: str, patch_note: str | None = None) -> PromptVersion:
    """Append feedback under the learned-directives section.

    Directive lines already present are skipped, so re-applying a patch is
    idempotent at the line level; the section holds at most
    MAX_LEARNED_DIRECTIVES lines, dropping the oldest first.
    """
    if not patch or not patch.strip():
        raise ContractError("patch must be non-empty")

    body = current.body
    if LEARNED_SECTION_HEADER in body:
        head, _, tail = body.partition(LEARNED_SECTION_HEADER)
        existing = _directive_lines(tail)
    else:
        head, existing = body.rstrip() + "\n", []

    merged = list(existing)
    for line in _directive_lines(patch):
        if line not in merged:
            merged.append(line)
    merged = merged[-MAX_LEARNED_DIRECTIVES:]

    new_body = head.rstrip() + "\n\n" + LEARNED_SECTION_HEADER + "\n"
    new_body += "".join(f"- {line}\n" for line in merged)
    return PromptVersion(
        role=current.role,
        version=current.version + 1,
        body=new_body,
        parent_version=current.version,
        patch_note=patch_note,
    )


# ---------------------------------------------------------------------------
# Heuristics
# ---------------------------------------------------------------------------

@dataclass
class Heuristic:
    id: str
    condition: str
    action: str
    provenance: list[str] = field(default_factory=list)
    usage_count: int = 0
    embedding: list[float] | None = None

    def text(self) -> str:
        return f"{self.condition} {self.action}"

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "condition": self.condition,
            "action": self.action,
            "provenance": list(self.provenance),
            "usage_count": self.usage_count,
            "embedding": self.embedding,
        }


def _heuristic_text(item) -> str:
    if isinstance(item, dict):
        return f"{item.get('condition', '')}, {item.get('action', '')}".strip(", ")
    return str(item)


_WORD_RE = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> frozenset[str]:
    return frozenset(_WORD_RE.findall(text.lower()))


def token_jaccard(a: str, b: str) -> float:
    ta, tb = _tokens(a), _tokens(b)
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def split_when_then(text: str) -> tuple[str, str] | None:
    """Split a rule into its WHEN and THEN clauses; None if malformed."""
    match = re.search(r"\bTHEN\b", text, flags=re.IGNORECASE)
    if match is None:
        return None
    condition = text[: match.start()].strip().rstrip(",;").strip()
    action = text[match.start():].strip()
    if not re.match(r"^\s*WHEN\b", condition, flags=re.IGNORECASE):
        return None
    action_body = action[4:].strip(" ,;")
    if not condition or not action_body:
        return None
    return condition, action


@dataclass
class HeuristicLibrary:
    heuristics: dict[str, Heuristic] = field(default_factory=dict)
    version: int = 0
    next_id: int = 1
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def ordered(self) -> list[Heuristic]:
        return [self.heuristics[k] for k in sorted(self.heuristics)]

    def _fresh_id(self) -> str:
        hid = f"h{self.next_id:04d}"
        self.next_id += 1
        return hid

    def add(self, condition: str, action: str, provenance: list[str]) -> Heuristic:
        with self._lock:
            h = Heuristic(
                id=self._fresh_id(),
                condition=condition,
                action=action,
                provenance=sorted(set(provenance)),
            )
            self.heuristics[h.id] = h
            self.version += 1
            return h

    def prune(self, ids: list[str]) -> int:
        with self._lock:
            removed = 0
            for hid in ids:
                if hid in self.heuristics:
                    del self.heuristics[hid]
                    removed += 1
            if removed:
                self.version += 1
            return removed

    def near_duplicate(self, condition: str, action: str) -> Heuristic | None:
        text = f"{condition} {action}"
        for h in self.ordered():
            if token_jaccard(text, h.text()) >= NEAR_DUPLICATE_JACCARD:
                return h
        return None


def distill_heuristics(
    reports: list[CreditAssignmentReport],
    backend,
    budget,
    library: HeuristicLibrary,
    transcript=None,
) -> list[Heuristic]:
    """Meta-analyze qualifying reports into fresh WHEN/THEN library rules.

    The backend proposes candidate rules; anything failing the shape check
    (both clauses, at most 60 words) or near-duplicating an existing entry
    (token-Jaccard >= 0.8) is dropped.
    """
    usable = [r for r in reports if r.distillable or r.pivotal_motifs]
    if not usable:
        raise ContractError("need at least one report with distillable content")

    request = {
        "role": AgentRole.PI.value,
        "mode": "report_and_evolve",
        "system": (
            "You are the PI meta-analyzing credit-assignment reports from completed "
            "investigations. Abstract the recurring successful patterns into short "
            "conditional rules of the form 'WHEN <condition>, THEN <action>'. "
            'Respond with one JSON object: {"heuristics": ["WHEN ..., THEN ..."], '
            '"final_recommendations": []}.'
        ),
        "user": canonical_json(
            {
                "mode": "report_and_evolve",
                "task": "distill_heuristics",
                "reports": [r.as_dict() for r in usable],
            }
        ),
    }
    try:
        raw = invoke(backend, request, budget, transcript)
        payload = extract_json_object(raw)
    except Exception as exc:  # noqa: BLE001 - distillation must never be fatal
        logger.warning("heuristic distillation failed: %s", exc)
        return []

    provenance = [r.run_id for r in usable]
    accepted: list[Heuristic] = []
    for item in payload.get("heuristics", payload.get("rules", [])):
        text = _heuristic_text(item)
        clauses = split_when_then(text)
        if clauses is None:
            logger.info("dropping malformed heuristic: %r", text)
            continue
        condition, action = clauses
        if len(_WORD_RE.findall(text)) > MAX_HEURISTIC_WORDS:
            logger.info("dropping over-long heuristic: %r", text)
            continue
        if library.near_duplicate(condition, action) is not None:
            logger.info("dropping near-duplicate heuristic: %r", text)
            continue
        accepted.append(library.add(condition, action, provenance))
    return accepted


def retrieve_heuristics(
    library: HeuristicLibrary,
    query_context: str,
    j: int,
    embedder=None,
) -> list[Heuristic]:
    """Top-J most relevant heuristics for a new investigation.

    Cosine over embeddings when an embedder is configured and the entry
    carries one; token-Jaccard over normalized text otherwise. Returned
    entries get their usage_count bumped.
    """
    if j < 0:
        raise ContractError("j must be >= 0")
    if j == 0 or not library.heuristics:
        return []

    query_embedding = None
    if embedder is not None:
        query_embedding = embedder(query_context)

    def similarity(h: Heuristic) -> float:
        if query_embedding is not None and h.embedding:
            num = sum(a * b for a, b in zip(query_embedding, h.embedding))
            na = sum(a * a for a in query_embedding) ** 0.5
            nb = sum(b * b for b in h.embedding) ** 0.5
            return num / (na * nb) if na and nb else 0.0
        return token_jaccard(query_context, h.text())

    ranked = sorted(library.ordered(), key=lambda h: (-similarity(h), h.id))
    chosen = ranked[: min(j, len(ranked))]
    for h in chosen:
        h.usage_count += 1
    return chosen


# ---------------------------------------------------------------------------
# Library persistence
# ---------------------------------------------------------------------------

def persist_library(library: HeuristicLibrary, path: Path | str) -> None:
    path = Path(path)
    if path.exists():
        try:
            on_disk = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LoadError(f"library file {path} is corrupt: {exc.msg}") from exc
        if on_disk.get("version", 0) > library.version:
            raise DataError(
                f"refusing to overwrite library v{on_disk.get('version')} with older v{library.version}"
            )
    doc = {
        "version": library.version,
        "next_id": library.next_id,
        "heuristics": [h.as_dict() for h in library.ordered()],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")


def load_library(path: Path | str) -> HeuristicLibrary:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LoadError(f"library file {path} is corrupt at offset {exc.pos}: {exc.msg}") from exc
    lib = HeuristicLibrary(version=int(doc.get("version", 0)), next_id=int(doc.get("next_id", 1)))
    for i, h in enumerate(doc.get("heuristics", [])):
        try:
            heuristic = Heuristic(
                id=h["id"],
                condition=h["condition"],
                action=h["action"],
                provenance=list(h.get("provenance", [])),
                usage_count=int(h.get("usage_count", 0)),
                embedding=h.get("embedding"),
            )
        except KeyError as exc:
            raise LoadError(f"heuristics[{i}]: missing field {exc}") from exc
        lib.heuristics[heuristic.id] = heuristic
    return lib
