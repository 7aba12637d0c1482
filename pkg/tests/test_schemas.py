from __future__ import annotations

import copy
import json

import pytest

from debategraph.errors import ContractError, ParseError, ValidationFailure
from debategraph.schemas import (
    AgentRole,
    check_mode,
    extract_json_object,
    parse_validate,
    validate_payload,
)

import payload_examples as px


def test_all_reference_payloads_validate():
    for role, mode, payload in px.ALL_EXAMPLES:
        validated = validate_payload(AgentRole(role), mode, payload)
        assert validated is payload


def test_pi_score_reference_fields():
    payload = parse_validate(AgentRole.PI, "score", json.dumps(px.PI_SCORE))
    assert payload["ranking"] == ["H1", "H2"]
    assert payload["stop_decision"]["should_stop"] is False


def test_unknown_optional_fields_tolerated():
    payload = copy.deepcopy(px.PI_SCORE)
    payload["extra_commentary"] = {"anything": True}
    validate_payload(AgentRole.PI, "score", payload)


def test_invalid_mode_for_role():
    with pytest.raises(ContractError):
        check_mode(AgentRole.SKEPTIC, "build_chain")
    with pytest.raises(ContractError):
        check_mode(AgentRole.PI, "debate")


# ---------------------------------------------------------------------------
# JSON extraction
# ---------------------------------------------------------------------------

def test_extract_plain_object():
    assert extract_json_object('{"a": 1}') == {"a": 1}


def test_extract_fenced_object():
    raw = '```json\n{"a": 1, "b": {"c": 2}}\n```'
    assert extract_json_object(raw) == {"a": 1, "b": {"c": 2}}


def test_extract_with_leading_prose_and_trailing_junk():
    raw = 'Sure, here is the JSON:\n{"a": [1, 2, {"x": "}"}]} and some trailing words'
    assert extract_json_object(raw) == {"a": [1, 2, {"x": "}"}]}


def test_extract_no_object():
    with pytest.raises(ParseError):
        extract_json_object("hello")


def test_extract_unbalanced():
    with pytest.raises(ParseError):
        extract_json_object('{"a": ')


def test_parse_validate_raw_text_fails():
    with pytest.raises(ParseError):
        parse_validate(AgentRole.PI, "score", "hello")


# ---------------------------------------------------------------------------
# 20 mutation cases, each rejected with a path-accurate error
# ---------------------------------------------------------------------------

def drop(payload: dict, *path):
    out = copy.deepcopy(payload)
    cur = out
    for key in path[:-1]:
        cur = cur[key]
    del cur[path[-1]]
    return out


def put(payload: dict, value, *path):
    out = copy.deepcopy(payload)
    cur = out
    for key in path[:-1]:
        cur = cur[key]
    cur[path[-1]] = value
    return out


MUTATIONS = [
    # PI / score
    ("PI", "score", drop(px.PI_SCORE, "scoring_summary"), "scoring_summary"),
    ("PI", "score", drop(px.PI_SCORE, "ranking"), "ranking"),
    ("PI", "score", drop(px.PI_SCORE, "delta_since_last_round"), "delta_since_last_round"),
    ("PI", "score", drop(px.PI_SCORE, "stop_decision"), "stop_decision"),
    ("PI", "score", put(px.PI_SCORE, "high", "scoring_summary", 0, "score"), "scoring_summary[0].score"),
    ("PI", "score", put(px.PI_SCORE, "H1", "ranking"), "ranking"),
    ("PI", "score", put(px.PI_SCORE, "no", "stop_decision", "should_stop"), "stop_decision.should_stop"),
    ("PI", "score", drop(px.PI_SCORE, "scoring_summary", 0, "hypothesis_id"), "scoring_summary[0].hypothesis_id"),
    # PI / init
    ("PI", "init", drop(px.PI_INIT, "plan"), "plan"),
    ("PI", "init", put(px.PI_INIT, 0, "plan", "rounds"), "plan.rounds"),
    # PI / revise
    ("PI", "revise", put(px.PI_REVISE, "Manager", "revisions", 0, "graph_actions", 0, "assignee"),
     "revisions[0].graph_actions[0].assignee"),
    ("PI", "revise", drop(px.PI_REVISE, "revisions", 0, "hypothesis_id"), "revisions[0].hypothesis_id"),
    ("PI", "revise", put(px.PI_REVISE, {"oops": 1}, "revisions"), "revisions"),
    # Proponent
    ("Proponent", "build_chain", drop(px.PROPONENT, "graph_updates"), "graph_updates"),
    ("Proponent", "build_chain", put(px.PROPONENT, 1.3, "graph_updates", "add_edges", 0, "weight"),
     "graph_updates.add_edges[0].weight"),
    ("Proponent", "execute_actions", put(px.PROPONENT, -0.1, "graph_updates", "add_edges", 0, "weight"),
     "graph_updates.add_edges[0].weight"),
    ("Proponent", "build_chain", drop(px.PROPONENT, "graph_updates", "add_edges", 0, "source"),
     "graph_updates.add_edges[0].source"),
    ("Proponent", "build_chain", drop(px.PROPONENT, "graph_updates", "add_nodes", 0, "id"),
     "graph_updates.add_nodes[0].id"),
    # Skeptic
    ("Skeptic", "build_counterchain", drop(px.SKEPTIC, "graph_updates", "conflict_hotspots", 0, "topic"),
     "graph_updates.conflict_hotspots[0].topic"),
    ("Skeptic", "build_counterchain", put(px.SKEPTIC, "0.9", "graph_updates", "add_edges", 0, "weight"),
     "graph_updates.add_edges[0].weight"),
]


def test_exactly_twenty_mutation_cases():
    assert len(MUTATIONS) == 20


@pytest.mark.parametrize("role,mode,payload,expected_path", MUTATIONS)
def test_mutations_rejected_with_accurate_path(role, mode, payload, expected_path):
    with pytest.raises(ValidationFailure) as err:
        validate_payload(AgentRole(role), mode, payload)
    assert any(expected_path == p for p in err.value.paths), (
        f"expected path {expected_path!r} in {err.value.paths}"
    )


def test_validation_lists_multiple_paths():
    bad = drop(px.PI_SCORE, "ranking")
    bad = put(bad, "high", "scoring_summary", 0, "score")
    with pytest.raises(ValidationFailure) as err:
        validate_payload(AgentRole.PI, "score", bad)
    assert len(err.value.paths) == 2


def test_schema_closure_revalidates_after_roundtrip():
    # any payload that validates re-serializes to a document that validates
    for role, mode, payload in px.ALL_EXAMPLES:
        text = json.dumps(validate_payload(AgentRole(role), mode, payload))
        parse_validate(AgentRole(role), mode, text)
