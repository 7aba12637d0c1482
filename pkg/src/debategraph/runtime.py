"""Agent invocation plumbing: prompt rendering, policy backends, call
budgeting, and the audit transcript.

A backend is anything with ``complete(request) -> str``. The live backend
talks to a chat-completions HTTP endpoint and is metered against the call
budget; the scripted backend replays a recorded scenario for deterministic
runs and is free unless explicitly metered (to exercise budget behavior).
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import BackendError, BudgetExhausted, ContractError, DataError, ScenarioError
from .prompts import SHARED_CONSTRAINTS, PromptVersion, default_prompt
from .schemas import INPUT_FIELDS, AgentRole, check_mode, parse_validate
from .util import canonical_json

logger = logging.getLogger(__name__)


@dataclass
class AgentEnvelope:
    role: AgentRole
    mode: str
    payload: dict


@dataclass
class CallBudget:
    max_calls: int
    used: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def charge(self) -> None:
        with self._lock:
            if self.used >= self.max_calls:
                raise BudgetExhausted(f"call budget exhausted ({self.used}/{self.max_calls})")
            self.used += 1

    @property
    def remaining(self) -> int:
        return self.max_calls - self.used


def render_prompt(
    role: AgentRole,
    mode: str,
    context: dict,
    prompt: PromptVersion | None = None,
    heuristics: list | None = None,
) -> dict:
    """Build the request document: system = instruction body + shared
    constraints + numbered heuristics; user = the canonical input object."""
    check_mode(role, mode)
    required = INPUT_FIELDS[(role.value, mode)]
    missing = [f for f in required if f not in context]
    if missing:
        raise ContractError(f"missing required context field(s) for {role.value}/{mode}: {missing}")

    if prompt is None:
        prompt = default_prompt(role)
    system = prompt.body.rstrip() + "\n\n" + SHARED_CONSTRAINTS
    if heuristics:
        lines = ["", "PRIOR HEURISTICS (apply when the condition holds):"]
        for i, h in enumerate(heuristics, start=1):
            cond = getattr(h, "condition", None)
            act = getattr(h, "action", None)
            text = f"{cond} {act}" if cond else str(h)
            lines.append(f"{i}. {text}")
        system += "\n".join(lines) + "\n"

    user_obj = {"mode": mode}
    for name in required:
        user_obj[name] = context[name]
    return {
        "role": role.value,
        "mode": mode,
        "prompt_version": prompt.version,
        "system": system,
        "user": canonical_json(user_obj),
    }


class Backend(Protocol):
    kind: str
    metered: bool

    def complete(self, request: dict) -> str: ...


@dataclass
class ScenarioStep:
    role: str  # agent role or "*"
    mode: str  # mode or "*"
    response: str


class Scenario:
    """Ordered scripted responses keyed by (role, mode) sequence."""

    def __init__(self, steps: list[ScenarioStep]):
        self.steps = steps
        self.cursor = 0

    @classmethod
    def from_jsonl(cls, path: Path | str) -> "Scenario":
        steps = []
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            response = rec.get("response")
            if isinstance(response, (dict, list)):
                response = canonical_json(response)
            steps.append(
                ScenarioStep(role=rec.get("role", "*"), mode=rec.get("mode", "*"), response=str(response))
            )
        return cls(steps)

    def reset(self) -> None:
        self.cursor = 0


def scripted_step(scenario: Scenario, role: str, mode: str, request: dict | None = None) -> str:
    """Return the next scripted response, enforcing (role, mode) order."""
    if scenario.cursor >= len(scenario.steps):
        raise ScenarioError(f"scenario exhausted at step {scenario.cursor} (wanted {role}/{mode})")
    step = scenario.steps[scenario.cursor]
    if step.role not in ("*", role) or step.mode not in ("*", mode):
        raise ScenarioError(
            f"scenario step {scenario.cursor} expects {step.role}/{step.mode}, got {role}/{mode}"
        )
    scenario.cursor += 1
    return step.response


@dataclass
class ScriptedBackend:
    scenario: Scenario
    metered: bool = False
    kind: str = "scripted"

    def complete(self, request: dict) -> str:
        return scripted_step(self.scenario, request["role"], request["mode"], request)


@dataclass
class LiveBackend:
    """Chat-completions-style HTTP endpoint; credential read from the
    environment at call time."""

    base_url: str
    model: str
    credential_env: str = "DEBATEGRAPH_API_KEY"
    timeout: float = 60.0
    metered: bool = True
    kind: str = "live"

    def complete(self, request: dict) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.credential_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request["system"]},
                {"role": "user", "content": request["user"]},
            ],
        }
        url = self.base_url.rstrip("/") + "/chat/completions"
        resp = requests.post(url, json=body, headers=headers, timeout=self.timeout)
        resp.raise_for_status()
        data = resp.json()
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion response: {exc}") from exc


class Transcript:
    """Append-only audit log; one canonical JSON line per backend exchange."""

    def __init__(self, path: Path | None = None):
        self.path = Path(path) if path else None
        self.entries: list[dict] = []
        self._lock = threading.Lock()

    def append(self, entry: dict) -> None:
        with self._lock:
            entry = dict(entry, seq=len(self.entries))
            self.entries.append(entry)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fp:
                    fp.write(canonical_json(entry) + "\n")

    def metered_count(self) -> int:
        return sum(1 for e in self.entries if e.get("metered"))


def invoke(backend: Backend, request: dict, budget: CallBudget, transcript: Transcript | None = None) -> str:
    """Run one backend call, charging the budget for metered backends and
    logging the raw exchange. Transport errors get a single retry."""
    if backend.metered:
        budget.charge()
    try:
        raw = backend.complete(request)
    except (ScenarioError, BackendError):
        raise
    except Exception as first:
        logger.warning("backend call failed (%s); retrying once", first)
        try:
            raw = backend.complete(request)
        except Exception as second:
            raise BackendError(f"backend failed after retry: {second}") from second
    if transcript is not None:
        transcript.append(
            {
                "role": request["role"],
                "mode": request["mode"],
                "backend": backend.kind,
                "metered": backend.metered,
                "request": {"system": request["system"], "user": request["user"]},
                "response": raw,
            }
        )
    return raw


@dataclass
class AgentRuntime:
    """One investigation's view of the policy layer: prompts, backend,
    budget, transcript, and the PI's retrieved heuristics."""

    backend: Backend
    budget: CallBudget
    transcript: Transcript = field(default_factory=Transcript)
    prompts: dict[AgentRole, PromptVersion] = field(default_factory=dict)
    pi_heuristics: list = field(default_factory=list)

    def prompt_for(self, role: AgentRole) -> PromptVersion:
        return self.prompts.get(role) or default_prompt(role)

    def step(self, role: AgentRole, mode: str, context: dict, extra_check=None) -> AgentEnvelope:
        """Render, invoke, and validate; one self-correction retry on a
        malformed payload (the retry is charged like any other call).

        ``extra_check(payload)`` lets callers reject schema-valid payloads
        (e.g. graph deltas referencing unknown nodes) within the same
        single-retry contract.
        """
        heuristics = self.pi_heuristics if role is AgentRole.PI else None
        request = render_prompt(role, mode, context, self.prompt_for(role), heuristics)

        def attempt(req: dict) -> dict:
            raw = invoke(self.backend, req, self.budget, self.transcript)
            payload = parse_validate(role, mode, raw)
            if extra_check is not None:
                extra_check(payload)
            return payload

        try:
            payload = attempt(request)
        except DataError as first:  # schema or graph-level rejection
            hinted = dict(request)
            hinted["user"] = (
                request["user"] + "\n\nVALIDATION ERROR (return a corrected JSON object): " + str(first)
            )
            payload = attempt(hinted)  # second failure is final
        return AgentEnvelope(role=role, mode=mode, payload=payload)
