"""Exception taxonomy shared across the package."""

from __future__ import annotations


class DebateGraphError(Exception):
    """Base class for all package errors."""


class DataError(DebateGraphError):
    """Bad input data or unusable workspace state (CLI exit code 2)."""


class LoadError(DataError):
    """A file or stream could not be ingested; message carries the location."""


class NotFoundError(DataError):
    """A referenced entity, node, or run does not exist."""


class ContractError(DataError):
    """A caller violated an operation precondition."""


class ConfigError(DataError):
    """Missing or inconsistent configuration (projections, paths, backends)."""


class DeltaRejected(DataError):
    """A graph delta failed validation; ``violations`` itemizes every problem."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("delta rejected: " + "; ".join(self.violations))


class ValidationFailure(DataError):
    """An agent payload failed schema validation; ``paths`` locate each error."""

    def __init__(self, paths: list[str], messages: list[str] | None = None):
        self.paths = list(paths)
        self.messages = list(messages) if messages else []
        detail = "; ".join(
            f"{p}: {m}" for p, m in zip(self.paths, self.messages)
        ) or "; ".join(self.paths)
        super().__init__(f"payload validation failed: {detail}")


class ParseError(DataError):
    """No parseable JSON object in an agent response."""


class BackendError(DebateGraphError):
    """Transport-level backend failure after retry (CLI exit code 3)."""


class BudgetExhausted(DebateGraphError):
    """The call budget has no headroom; callers must wind down gracefully."""


class ScenarioError(DebateGraphError):
    """A scripted scenario ran out of steps or the next step does not match."""


class TrainingDiverged(DebateGraphError):
    """Loss became non-finite during projection training."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training loss diverged (non-finite) at epoch {epoch}")


class UndefinedMetricError(DebateGraphError):
    """The requested metric is undefined for this input (e.g. single-class)."""
