"""Workspace configuration: one JSON file naming every asset a command
needs, with paths resolved relative to the file itself so a workspace
directory can be copied around freely."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, LoadError
from .orchestrator import InvestigationConfig
from .runtime import LiveBackend, Scenario, ScriptedBackend

DEFAULT_QUALITY_THRESHOLD = 0.6


@dataclass
class WorkspaceConfig:
    root: Path
    kg: Path
    kg_format: str = "tsv"
    embeddings: Path | None = None
    params: Path | None = None
    prompts_dir: Path | None = None
    library: Path | None = None
    runs_dir: Path | None = None
    backend: dict = field(default_factory=dict)
    defaults: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: Path | str) -> "WorkspaceConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"workspace file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LoadError(f"workspace file {path} is not valid JSON: {exc.msg}") from exc
        root = path.parent

        def resolve(key: str) -> Path | None:
            value = doc.get(key)
            return (root / value) if value else None

        kg = resolve("kg")
        if kg is None:
            raise ConfigError("workspace must name a 'kg' file")
        ws = cls(
            root=root,
            kg=kg,
            kg_format=doc.get("kg_format", "tsv"),
            embeddings=resolve("embeddings"),
            params=resolve("params"),
            prompts_dir=resolve("prompts_dir") or root / "prompts",
            library=resolve("library"),
            runs_dir=resolve("runs_dir") or root / "runs",
            backend=doc.get("backend", {}),
            defaults=doc.get("defaults", {}),
        )
        kind = ws.backend.get("kind")
        if kind not in ("live", "scripted"):
            raise ConfigError(f"backend kind must be 'live' or 'scripted', got {kind!r}")
        return ws

    def require(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"workspace does not configure {name!r}")
            if isinstance(value, Path) and not value.exists():
                raise ConfigError(f"workspace path for {name!r} does not exist: {value}")

    def investigation_config(self, **overrides) -> InvestigationConfig:
        values = {k: v for k, v in self.defaults.items() if k != "quality_threshold"}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return InvestigationConfig(**values)

    @property
    def quality_threshold(self) -> float:
        return float(self.defaults.get("quality_threshold", DEFAULT_QUALITY_THRESHOLD))

    def build_backend(self):
        kind = self.backend.get("kind")
        if kind == "scripted":
            scenario_path = self.backend.get("scenario")
            if not scenario_path:
                raise ConfigError("scripted backend needs a 'scenario' path")
            scenario = Scenario.from_jsonl(self.root / scenario_path)
            return ScriptedBackend(scenario=scenario, metered=bool(self.backend.get("metered", False)))
        if kind == "live":
            endpoint = self.backend.get("endpoint")
            model = self.backend.get("model")
            if not endpoint or not model:
                raise ConfigError("live backend needs 'endpoint' and 'model'")
            return LiveBackend(
                base_url=endpoint,
                model=model,
                credential_env=self.backend.get("credential_env", "DEBATEGRAPH_API_KEY"),
            )
        raise ConfigError(f"unsupported backend kind: {kind!r}")
