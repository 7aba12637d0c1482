"""Small shared helpers: stable squashing and canonical JSON."""

from __future__ import annotations

import json
import math
from typing import Any


def sigmoid(x: float) -> float:
    """Numerically stable logistic function."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def canonical_json(obj: Any) -> str:
    """Deterministic JSON: sorted keys, no insignificant whitespace.

    Used for snapshots, run artifacts, and audit-log payloads so that
    equal values always serialize to identical bytes.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
