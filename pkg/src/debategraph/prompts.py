"""Versioned agent instruction documents and their on-disk store.

Each role has a chain of prompt versions: v0 is the built-in instruction
body, and every later version appends learned directives under a
delimited section. Versions are kept forever so the evolution chain can
be audited (prompts/<role>/v<N>.txt plus an index file).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ContractError, LoadError
from .schemas import AgentRole

LEARNED_SECTION_HEADER = "## LEARNED DIRECTIVES"
MAX_LEARNED_DIRECTIVES = 30


@dataclass(frozen=True)
class PromptVersion:
    role: AgentRole
    version: int
    body: str
    parent_version: int | None = None
    patch_note: str | None = None

    def __post_init__(self):
        if self.version < 0:
            raise ContractError("prompt version must be >= 0")
        if not self.body:
            raise ContractError("prompt body must be non-empty")


SHARED_CONSTRAINTS = """\
RESPONSE CONTRACT (all roles):
- Answer with exactly one UTF-8 JSON object. No markdown, no prose around it.
- Never invent sources. Flag uncertainty explicitly when evidence is thin.
- Do not give clinical advice.
- Only the Proponent and Skeptic edit the evidence graph; the PI only instructs.
- Use the field names from your role contract; tolerate absent optional fields.
"""

DEFAULT_PROMPT_BODIES: dict[AgentRole, str] = {
    AgentRole.PI: """\
You are the Principal Investigator of an evidence-seeking investigation.
You set strategy, weigh the evidence graph, and direct the other agents;
you never touch the graph yourself.

Modes:
- init: lay out the plan as {"plan": {"rounds": int, "stopping": {"delta_threshold": num},
  "scoring_weights": {...}}}.
- score: judge every listed hypothesis from the graph snapshot. Respond with
  {"scoring_summary": [{"hypothesis_id", "score"}], "ranking": [...],
   "delta_since_last_round": num, "stop_decision": {"should_stop": bool}}.
  You may include "weights" to re-balance the structural scorer for this round.
- revise: output {"revisions": [{"hypothesis_id", "graph_actions":
  [{"type", "assignee": "Proponent"|"Skeptic", "detail"}], "debate_focus": [...]}]}
  and optionally {"seed_request": {"should_regenerate": bool, "reason"}}.
  Regeneration can only be requested, never performed here.
- report_and_evolve: output {"final_recommendations": [...]} plus, when useful,
  "prompt_patches" [{"role", "patch"}], "pivotal_motifs", "unproductive_paths",
  "residual_gaps", and "heuristics" (WHEN ..., THEN ... rules).

Weigh mechanism fit, pharmacological feasibility, plausibility of the proposed
indication, safety signals, structural bonuses for disjoint evidence paths, and
conflict penalties. Score every hypothesis you are given.
""",
    AgentRole.EXPLORER: """\
You are the Explorer. You seed investigations by ranking candidate entities
against the query with the relation-aware embedding scorer. You do not argue;
you only propose candidates when asked to (re)seed.
""",
    AgentRole.PROPONENT: """\
You are the Proponent. Build the strongest mechanistic case for the focus
hypothesis by adding supportive nodes and edges to the shared evidence graph.

Modes:
- build_chain: extend supportive chains candidate -> target/pathway -> phenotype
  or disease, aiming for at least two edge-disjoint routes.
- execute_actions: carry out exactly the graph_actions assigned to you.

Respond with {"graph_updates": {"add_nodes": [{"id","type","label"}],
"add_edges": [{"source","target","relation","weight","rationale"}],
"merge": [{"keep","remove"}]}}. Weights live in [0,1]; give each edge a
one-line rationale; merge synonym nodes instead of duplicating them.
Leave refutation and safety arguments to the Skeptic.
""",
    AgentRole.SKEPTIC: """\
You are the Skeptic. Attack the focus hypothesis: surface contraindications,
safety risks, mechanistic contradictions, pharmacokinetic barriers, and gaps
between phenotype and outcome.

Modes:
- build_counterchain: add risk/refutation chains to the evidence graph.
- execute_actions: carry out exactly the graph_actions assigned to you.

Respond with {"graph_updates": {"add_nodes": [...], "add_edges": [...],
"conflict_hotspots": [{"topic","pro_nodes","con_nodes"}]}}. Point refuting
edges (relation "refutes" or "contradicts") at the hypothesis or its claims,
annotate conflict hotspots, and keep growth focused.
""",
}


def default_prompt(role: AgentRole) -> PromptVersion:
    return PromptVersion(role=role, version=0, body=DEFAULT_PROMPT_BODIES[role])


class PromptStore:
    """File-backed prompt version chains, one subdirectory per role."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def _index_path(self) -> Path:
        return self.root / "index.json"

    def _load_index(self) -> dict:
        path = self._index_path()
        if not path.exists():
            return {"roles": {}, "applied_patches": []}
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LoadError(f"prompt index {path} is corrupt: {exc.msg}") from exc

    def _save_index(self, index: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self._index_path().write_text(
            json.dumps(index, indent=1, sort_keys=True), encoding="utf-8"
        )

    def ensure_defaults(self) -> None:
        index = self._load_index()
        changed = False
        for role in AgentRole:
            if role.value not in index["roles"]:
                pv = default_prompt(role)
                self._write_body(pv)
                index["roles"][role.value] = {
                    "current": 0,
                    "history": [{"version": 0, "parent_version": None, "patch_note": None}],
                }
                changed = True
        if changed:
            self._save_index(index)

    def _body_path(self, role: AgentRole, version: int) -> Path:
        return self.root / role.value / f"v{version}.txt"

    def _write_body(self, pv: PromptVersion) -> None:
        path = self._body_path(pv.role, pv.version)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(pv.body, encoding="utf-8")

    def current(self, role: AgentRole) -> PromptVersion:
        index = self._load_index()
        entry = index["roles"].get(role.value)
        if entry is None:
            return default_prompt(role)
        version = entry["current"]
        hist = {h["version"]: h for h in entry["history"]}
        body_path = self._body_path(role, version)
        if not body_path.exists():
            raise LoadError(f"prompt body missing: {body_path}")
        h = hist[version]
        return PromptVersion(
            role=role,
            version=version,
            body=body_path.read_text(encoding="utf-8"),
            parent_version=h.get("parent_version"),
            patch_note=h.get("patch_note"),
        )

    def version(self, role: AgentRole, version: int) -> PromptVersion:
        index = self._load_index()
        entry = index["roles"].get(role.value)
        if entry is None:
            raise LoadError(f"no versions stored for role {role.value}")
        hist = {h["version"]: h for h in entry["history"]}
        if version not in hist:
            raise LoadError(f"no version {version} for role {role.value}")
        h = hist[version]
        return PromptVersion(
            role=role,
            version=version,
            body=self._body_path(role, version).read_text(encoding="utf-8"),
            parent_version=h.get("parent_version"),
            patch_note=h.get("patch_note"),
        )

    def save_new_version(self, pv: PromptVersion) -> None:
        index = self._load_index()
        entry = index["roles"].setdefault(pv.role.value, {"current": -1, "history": []})
        existing = {h["version"] for h in entry["history"]}
        if pv.version in existing:
            raise ContractError(f"version {pv.version} already stored for role {pv.role.value}")
        self._write_body(pv)
        entry["history"].append(
            {"version": pv.version, "parent_version": pv.parent_version, "patch_note": pv.patch_note}
        )
        entry["current"] = pv.version
        self._save_index(index)

    def history(self, role: AgentRole) -> list[dict]:
        index = self._load_index()
        entry = index["roles"].get(role.value)
        return list(entry["history"]) if entry else []

    # -- patch bookkeeping so re-running evolution stays idempotent ---------

    def patch_applied(self, key: str) -> bool:
        return key in self._load_index().get("applied_patches", [])

    def record_patch(self, key: str) -> None:
        index = self._load_index()
        applied = index.setdefault("applied_patches", [])
        if key not in applied:
            applied.append(key)
            self._save_index(index)
