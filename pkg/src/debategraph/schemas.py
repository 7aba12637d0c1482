"""Role/mode I/O contracts for the four agents, plus payload validation.

Every agent must answer with a single JSON object; the schemas here pin
the required fields per (role, mode) while tolerating unknown optional
fields. Validation failures carry dotted paths (a.b[0].c) so a caller can
feed precise self-correction hints back to the model.
"""

from __future__ import annotations

import json
from enum import Enum

import jsonschema

from .errors import ContractError, ParseError, ValidationFailure


class AgentRole(str, Enum):
    PI = "PI"
    EXPLORER = "Explorer"
    PROPONENT = "Proponent"
    SKEPTIC = "Skeptic"


MODES: dict[AgentRole, tuple[str, ...]] = {
    AgentRole.PI: ("init", "score", "revise", "report_and_evolve"),
    AgentRole.PROPONENT: ("build_chain", "execute_actions"),
    AgentRole.SKEPTIC: ("build_counterchain", "execute_actions"),
    AgentRole.EXPLORER: (),  # the Explorer is a scoring module, not a chat policy
}


def check_mode(role: AgentRole, mode: str) -> None:
    if mode not in MODES[role]:
        raise ContractError(f"mode {mode!r} not valid for role {role.value}")


_WEIGHT = {"type": "number", "minimum": 0, "maximum": 1}

_GRAPH_UPDATES = {
    "type": "object",
    "properties": {
        "add_nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "string"},
                    "type": {"type": "string"},
                    "label": {"type": "string"},
                },
                "required": ["id"],
            },
        },
        "add_edges": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "source": {"type": "string"},
                    "target": {"type": "string"},
                    "relation": {"type": "string"},
                    "weight": _WEIGHT,
                    "rationale": {"type": "string"},
                },
                "required": ["source", "target", "relation", "weight"],
            },
        },
        "merge": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"keep": {"type": "string"}, "remove": {"type": "string"}},
                "required": ["keep", "remove"],
            },
        },
        "conflict_hotspots": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "topic": {"type": "string"},
                    "pro_nodes": {"type": "array", "items": {"type": "string"}},
                    "con_nodes": {"type": "array", "items": {"type": "string"}},
                },
                "required": ["topic"],
            },
        },
    },
}

_BUILDER_OUTPUT = {
    "type": "object",
    "properties": {"graph_updates": _GRAPH_UPDATES},
    "required": ["graph_updates"],
}

_SCORING_WEIGHTS = {
    "type": "object",
    "properties": {
        name: {"type": "number", "minimum": 0}
        for name in ("alpha_support", "beta_refute", "gamma_mech", "delta_disjoint", "lambda_conflict")
    },
}

_MOTIF = {
    "type": "object",
    "properties": {
        "description": {"type": "string"},
        "hypothesis_id": {"type": "string"},
        "node_refs": {"type": "array", "items": {"type": "string"}},
        "edge_refs": {"type": "array", "items": {"type": "string"}},
    },
    "required": ["description"],
}

OUTPUT_SCHEMAS: dict[tuple[str, str], dict] = {
    ("PI", "init"): {
        "type": "object",
        "properties": {
            "plan": {
                "type": "object",
                "properties": {
                    "rounds": {"type": "integer", "minimum": 1},
                    "stopping": {
                        "type": "object",
                        "properties": {"delta_threshold": {"type": "number", "exclusiveMinimum": 0}},
                    },
                    "scoring_weights": _SCORING_WEIGHTS,
                },
            }
        },
        "required": ["plan"],
    },
    ("PI", "score"): {
        "type": "object",
        "properties": {
            "scoring_summary": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {"hypothesis_id": {"type": "string"}, "score": {"type": "number"}},
                    "required": ["hypothesis_id", "score"],
                },
            },
            "ranking": {"type": "array", "items": {"type": "string"}},
            "delta_since_last_round": {"type": "number"},
            "stop_decision": {
                "type": "object",
                "properties": {"should_stop": {"type": "boolean"}},
                "required": ["should_stop"],
            },
            "weights": _SCORING_WEIGHTS,
        },
        "required": ["scoring_summary", "ranking", "delta_since_last_round", "stop_decision"],
    },
    ("PI", "revise"): {
        "type": "object",
        "properties": {
            "revisions": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "hypothesis_id": {"type": "string"},
                        "graph_actions": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "properties": {
                                    "type": {"type": "string"},
                                    "assignee": {"enum": ["Proponent", "Skeptic"]},
                                    "detail": {"type": "string"},
                                },
                                "required": ["type", "assignee"],
                            },
                        },
                        "debate_focus": {"type": "array", "items": {"type": "string"}},
                    },
                    "required": ["hypothesis_id", "graph_actions"],
                },
            },
            "seed_request": {
                "type": "object",
                "properties": {
                    "should_regenerate": {"type": "boolean"},
                    "reason": {"type": "string"},
                },
                "required": ["should_regenerate"],
            },
        },
        "required": ["revisions"],
    },
    ("PI", "report_and_evolve"): {
        "type": "object",
        "properties": {
            "final_recommendations": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {"hypothesis_id": {"type": "string"}, "score": {"type": "number"}},
                    "required": ["hypothesis_id"],
                },
            },
            "prompt_patches": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "role": {"enum": ["PI", "Explorer", "Proponent", "Skeptic"]},
                        "patch": {"type": "string"},
                    },
                    "required": ["role", "patch"],
                },
            },
            "pivotal_motifs": {"type": "array", "items": _MOTIF},
            "unproductive_paths": {"type": "array", "items": _MOTIF},
            "residual_gaps": {"type": "array", "items": {"type": "string"}},
            "heuristics": {
                "type": "array",
                "items": {
                    "anyOf": [
                        {"type": "string"},
                        {
                            "type": "object",
                            "properties": {
                                "condition": {"type": "string"},
                                "action": {"type": "string"},
                            },
                            "required": ["condition", "action"],
                        },
                    ]
                },
            },
        },
        "required": ["final_recommendations"],
    },
    ("Proponent", "build_chain"): _BUILDER_OUTPUT,
    ("Proponent", "execute_actions"): _BUILDER_OUTPUT,
    ("Skeptic", "build_counterchain"): _BUILDER_OUTPUT,
    ("Skeptic", "execute_actions"): _BUILDER_OUTPUT,
}

# context fields each request must carry, per (role, mode)
INPUT_FIELDS: dict[tuple[str, str], tuple[str, ...]] = {
    ("PI", "init"): ("query", "hypotheses", "tegraph_snapshot", "history", "thresholds", "seed_context"),
    ("PI", "score"): ("query", "hypotheses", "tegraph_snapshot", "history", "thresholds", "seed_context"),
    ("PI", "revise"): ("query", "hypotheses", "tegraph_snapshot", "history", "thresholds", "seed_context"),
    ("PI", "report_and_evolve"): ("query", "hypotheses", "tegraph_snapshot", "history", "thresholds", "seed_context"),
    ("Proponent", "build_chain"): ("query", "hypothesis", "tegraph_snapshot", "graph_actions", "constraints"),
    ("Proponent", "execute_actions"): ("query", "hypothesis", "tegraph_snapshot", "graph_actions", "constraints"),
    ("Skeptic", "build_counterchain"): ("query", "hypothesis", "tegraph_snapshot", "graph_actions"),
    ("Skeptic", "execute_actions"): ("query", "hypothesis", "tegraph_snapshot", "graph_actions"),
}


def _format_path(error: jsonschema.ValidationError) -> str:
    parts = []
    for item in error.absolute_path:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(f".{item}" if parts else item)
    path = "".join(parts)
    if error.validator == "required":
        missing = error.message.split("'")[1]
        path = f"{path}.{missing}" if path else missing
    return path or "$"


def validate_payload(role: AgentRole, mode: str, payload: dict) -> dict:
    """Validate against the (role, mode) output schema.

    Returns the payload unchanged on success; raises ValidationFailure
    listing every violating path otherwise.
    """
    check_mode(role, mode)
    schema = OUTPUT_SCHEMAS[(role.value, mode)]
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(payload), key=lambda e: list(e.absolute_path))
    if errors:
        raise ValidationFailure(
            paths=[_format_path(e) for e in errors],
            messages=[e.message for e in errors],
        )
    return payload


def extract_json_object(raw: str) -> dict:
    """Pull the first top-level JSON object out of decorated model output.

    Code fencing is stripped; anything before the first '{' is ignored and
    anything after the balanced object is discarded.
    """
    text = raw.strip()
    if text.startswith("```"):
        first_newline = text.find("\n")
        if first_newline != -1:
            text = text[first_newline + 1 :]
        if text.rstrip().endswith("```"):
            text = text.rstrip()[:-3]
    start = text.find("{")
    if start == -1:
        raise ParseError("no JSON object found in response")
    try:
        obj, _ = json.JSONDecoder().raw_decode(text[start:])
    except json.JSONDecodeError as exc:
        raise ParseError(f"unbalanced or invalid JSON object: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ParseError("top-level JSON value is not an object")
    return obj


def parse_validate(role: AgentRole, mode: str, raw: str) -> dict:
    """Extract and schema-check an agent response in one step."""
    return validate_payload(role, mode, extract_json_object(raw))
