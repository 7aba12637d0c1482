"""Knowledge-graph store: load, index, and query entity/relation triplets.

The store is immutable after load. Neighborhood queries run off head/tail
indices, and the sparse-zero test checks that both endpoints of a candidate
link have at most a handful of known neighbors.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable

from .errors import LoadError, NotFoundError

logger = logging.getLogger(__name__)

TSV_COLUMNS = (
    "head_id",
    "head_type",
    "head_name",
    "relation",
    "tail_id",
    "tail_type",
    "tail_name",
    "head_desc",
    "tail_desc",
)


class EntityType(str, Enum):
    DRUG = "drug"
    DISEASE = "disease"
    GENE = "gene"
    PATHWAY = "pathway"
    PHENOTYPE = "phenotype"
    OTHER = "other"


def parse_entity_type(raw: str) -> tuple[EntityType, bool]:
    """Map a raw type string to the closed enum; unknowns become OTHER.

    Returns (type, was_unknown).
    """
    try:
        return EntityType(raw.strip().lower()), False
    except ValueError:
        return EntityType.OTHER, True


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    entity_type: EntityType
    description: str = ""


@dataclass(frozen=True)
class Triplet:
    head: str
    relation: str
    tail: str


class Direction(str, Enum):
    DRUG_SEEKS_DISEASE = "drug_seeks_disease"
    DISEASE_SEEKS_DRUG = "disease_seeks_drug"


@dataclass(frozen=True)
class RepurposingQuery:
    query_entity: str
    target_relation: str
    direction: Direction

    @property
    def candidate_type(self) -> EntityType:
        if self.direction is Direction.DRUG_SEEKS_DISEASE:
            return EntityType.DISEASE
        return EntityType.DRUG


@dataclass
class LoadReport:
    entities: int = 0
    triplets: int = 0
    duplicates_dropped: int = 0
    warnings: int = 0

    def as_dict(self) -> dict:
        return {
            "entities": self.entities,
            "triplets": self.triplets,
            "duplicates_dropped": self.duplicates_dropped,
            "warnings": self.warnings,
        }


@dataclass
class KnowledgeGraph:
    """Entity- and triplet-indexed store; treat as read-only after load."""

    entities: dict[str, Entity] = field(default_factory=dict)
    triplets: set[Triplet] = field(default_factory=set)
    by_head: dict[str, list[Triplet]] = field(default_factory=dict)
    by_tail: dict[str, list[Triplet]] = field(default_factory=dict)
    relations: set[str] = field(default_factory=set)
    load_report: LoadReport = field(default_factory=LoadReport)

    def _require(self, entity_id: str) -> Entity:
        ent = self.entities.get(entity_id)
        if ent is None:
            raise NotFoundError(f"unknown entity: {entity_id!r}")
        return ent

    def neighborhood(self, entity_id: str) -> set[str]:
        """All out- and in-neighbors of ``entity_id`` across every relation."""
        self._require(entity_id)
        out = {t.tail for t in self.by_head.get(entity_id, ())}
        inc = {t.head for t in self.by_tail.get(entity_id, ())}
        both = out | inc
        # keep the entity itself only if a self-loop triplet exists
        if entity_id in both and not any(
            t.head == entity_id and t.tail == entity_id for t in self.by_head.get(entity_id, ())
        ):
            both.discard(entity_id)
        return both

    def is_sparse_zero(self, q: str, c: str, eps1: int = 1, eps2: int = 1) -> bool:
        """True when both neighborhoods have size at most eps1 / eps2."""
        return len(self.neighborhood(q)) <= eps1 and len(self.neighborhood(c)) <= eps2

    def candidates(self, wanted_type: EntityType) -> list[str]:
        """Ids of all entities of ``wanted_type``, sorted for determinism."""
        return sorted(e.id for e in self.entities.values() if e.entity_type is wanted_type)

    def degree(self, entity_id: str) -> int:
        return len(self.neighborhood(entity_id))


def _add_record(
    graph: KnowledgeGraph,
    report: LoadReport,
    head_id: str,
    head_type: str,
    head_name: str,
    relation: str,
    tail_id: str,
    tail_type: str,
    tail_name: str,
    head_desc: str = "",
    tail_desc: str = "",
) -> None:
    for eid, etype_raw, name, desc in (
        (head_id, head_type, head_name, head_desc),
        (tail_id, tail_type, tail_name, tail_desc),
    ):
        if eid not in graph.entities:  # first occurrence wins
            etype, unknown = parse_entity_type(etype_raw)
            if unknown:
                report.warnings += 1
                logger.warning("unknown entity_type %r for %s; mapped to other", etype_raw, eid)
            graph.entities[eid] = Entity(id=eid, name=name, entity_type=etype, description=desc)
    trip = Triplet(head=head_id, relation=relation, tail=tail_id)
    if trip in graph.triplets:
        report.duplicates_dropped += 1
        return
    graph.triplets.add(trip)
    graph.by_head.setdefault(head_id, []).append(trip)
    graph.by_tail.setdefault(tail_id, []).append(trip)
    graph.relations.add(relation)


def _tsv_records(lines: Iterable[str]) -> Iterable[tuple[int, list[str]]]:
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n").rstrip("\r")
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) < 7 or len(cols) > 9:
            raise LoadError(f"line {lineno}: expected 7-9 tab-separated columns, got {len(cols)}")
        yield lineno, cols


def load_triples(source: IO, fmt: str = "tsv") -> KnowledgeGraph:
    """Build a KnowledgeGraph from a TSV or JSON-lines stream.

    Column order for TSV is fixed (see TSV_COLUMNS); descriptions are
    optional trailing columns. Malformed records abort the load with the
    offending line number. Duplicate triplets are dropped but counted.
    """
    graph = KnowledgeGraph()
    report = graph.load_report

    raw = source.read()
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LoadError(f"stream is not valid UTF-8: {exc}") from exc

    if fmt == "tsv":
        for lineno, cols in _tsv_records(raw.splitlines()):
            cols = cols + [""] * (9 - len(cols))
            _add_record(graph, report, *cols)
    elif fmt == "json_lines":
        required = ("head_id", "head_type", "head_name", "relation", "tail_id", "tail_type", "tail_name")
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoadError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
            missing = [k for k in required if k not in rec]
            if missing:
                raise LoadError(f"line {lineno}: missing fields {missing}")
            _add_record(
                graph,
                report,
                rec["head_id"],
                rec["head_type"],
                rec["head_name"],
                rec["relation"],
                rec["tail_id"],
                rec["tail_type"],
                rec["tail_name"],
                rec.get("head_desc", ""),
                rec.get("tail_desc", ""),
            )
    else:
        raise LoadError(f"unsupported format: {fmt!r}")

    report.entities = len(graph.entities)
    report.triplets = len(graph.triplets)
    return graph


def dump_triples(graph: KnowledgeGraph) -> str:
    """Serialize back to canonical TSV (sorted), for round-trip checks."""
    rows = []
    for t in sorted(graph.triplets, key=lambda t: (t.head, t.relation, t.tail)):
        h = graph.entities[t.head]
        c = graph.entities[t.tail]
        rows.append(
            "\t".join(
                (
                    h.id,
                    h.entity_type.value,
                    h.name,
                    t.relation,
                    c.id,
                    c.entity_type.value,
                    c.name,
                    h.description,
                    c.description,
                )
            )
        )
    return "\n".join(rows) + ("\n" if rows else "")
