"""Hypothesis seeding: entity features, relation-aware complex embeddings,
bilinear plausibility scoring, projection training, and candidate ranking.

Entity feature vectors come from an external encoder and stay frozen; this
module learns only the type-specific affine projections into complex space
and the per-relation complex embeddings, then ranks candidates for a query
by the four-term complex bilinear score.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .errors import ConfigError, ContractError, LoadError, NotFoundError, TrainingDiverged
from .kg import EntityType, KnowledgeGraph, RepurposingQuery
from .tegraph import EvidenceEdge, EvidenceGraph, EvidenceNode, NodeRole, Semantics
from .util import sigmoid

logger = logging.getLogger(__name__)


@dataclass
class EmbeddingTable:
    dim_in: int | None = None
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self.vectors

    def get(self, entity_id: str) -> np.ndarray:
        vec = self.vectors.get(entity_id)
        if vec is None:
            raise NotFoundError(f"no embedding for entity {entity_id!r}")
        return vec


@dataclass(frozen=True)
class ComplexEmbedding:
    real_part: np.ndarray
    imag_part: np.ndarray

    @property
    def d(self) -> int:
        return self.real_part.shape[0]


@dataclass
class TrainConfig:
    d: int = 8
    epochs: int = 200
    learning_rate: float = 0.05
    negatives_per_positive: int = 2
    seed: int = 0

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "negatives_per_positive": self.negatives_per_positive,
            "seed": self.seed,
        }


@dataclass
class ProjectionParams:
    """Per-type affine maps into complex space plus per-relation embeddings."""

    dim_in: int
    d: int
    type_weights: dict[str, np.ndarray]  # (2d, dim_in)
    type_biases: dict[str, np.ndarray]  # (2d,)
    relations: dict[str, ComplexEmbedding]
    train_config: dict = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)

    def projection_for(self, entity_type: EntityType | str) -> tuple[np.ndarray, np.ndarray]:
        key = entity_type.value if isinstance(entity_type, EntityType) else entity_type
        if key not in self.type_weights:
            key = EntityType.OTHER.value
        if key not in self.type_weights:
            raise ConfigError(f"no projection for entity type {entity_type!r} and no 'other' fallback")
        return self.type_weights[key], self.type_biases[key]


def load_embeddings(source: IO) -> EmbeddingTable:
    """Read JSON-lines of {entity_id, vector}; all vectors must share length."""
    table = EmbeddingTable()
    raw = source.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LoadError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
        if "entity_id" not in rec or "vector" not in rec:
            raise LoadError(f"line {lineno}: record requires entity_id and vector")
        eid = rec["entity_id"]
        vec = np.asarray(rec["vector"], dtype=np.float64)
        if vec.ndim != 1:
            raise LoadError(f"vector for {eid!r} is not one-dimensional")
        if not np.all(np.isfinite(vec)):
            raise LoadError(f"vector for {eid!r} contains non-finite values")
        if table.dim_in is None:
            table.dim_in = int(vec.shape[0])
        elif vec.shape[0] != table.dim_in:
            raise LoadError(
                f"vector for {eid!r} has length {vec.shape[0]}, expected {table.dim_in}"
            )
        if eid in table.vectors:
            raise LoadError(f"duplicate embedding record for {eid!r}")
        table.vectors[eid] = vec
    return table


def project(x: np.ndarray, entity_type: EntityType | str, params: ProjectionParams) -> ComplexEmbedding:
    """Affine-map a feature vector; first d outputs real, last d imaginary."""
    if x.shape[0] != params.dim_in:
        raise ContractError(f"feature length {x.shape[0]} != dim_in {params.dim_in}")
    weight, bias = params.projection_for(entity_type)
    out = weight @ x + bias
    return ComplexEmbedding(real_part=out[: params.d], imag_part=out[params.d :])


def score_triplet(hq: ComplexEmbedding, rel: ComplexEmbedding, hc: ComplexEmbedding) -> float:
    """Four-term complex bilinear interaction.

    <a,b,c> denotes the trilinear sum over coordinates; the score is
    <hq_r, r_r, hc_r> + <hq_i, r_r, hc_i> + <hq_r, r_i, hc_i> - <hq_i, r_i, hc_r>.
    """
    if not (hq.d == rel.d == hc.d):
        raise ContractError(f"dimension mismatch: {hq.d}, {rel.d}, {hc.d}")
    return float(
        np.sum(hq.real_part * rel.real_part * hc.real_part)
        + np.sum(hq.imag_part * rel.real_part * hc.imag_part)
        + np.sum(hq.real_part * rel.imag_part * hc.imag_part)
        - np.sum(hq.imag_part * rel.imag_part * hc.real_part)
    )


@dataclass(frozen=True)
class Hypothesis:
    id: str
    candidate: str
    query: RepurposingQuery
    seed_score: float


def _init_params(
    graph: KnowledgeGraph,
    embeddings: EmbeddingTable,
    config: TrainConfig,
    rng: np.random.Generator,
) -> ProjectionParams:
    if embeddings.dim_in is None:
        raise ConfigError("embedding table is empty; cannot size projections")
    dim_in, d = embeddings.dim_in, config.d
    scale = 1.0 / np.sqrt(dim_in)
    seen_types = {
        graph.entities[eid].entity_type.value
        for eid in embeddings.vectors
        if eid in graph.entities
    }
    # drug/disease projections always exist; everything else shares 'other'
    type_keys = sorted(
        {EntityType.DRUG.value, EntityType.DISEASE.value, EntityType.OTHER.value}
        | {t if t in (EntityType.DRUG.value, EntityType.DISEASE.value) else EntityType.OTHER.value for t in seen_types}
    )
    weights, biases = {}, {}
    for key in type_keys:
        weights[key] = rng.uniform(-scale, scale, size=(2 * d, dim_in))
        biases[key] = rng.uniform(-scale, scale, size=2 * d)
    relations = {}
    for rel in sorted(graph.relations):
        relations[rel] = ComplexEmbedding(
            real_part=rng.uniform(-scale, scale, size=d),
            imag_part=rng.uniform(-scale, scale, size=d),
        )
    return ProjectionParams(
        dim_in=dim_in,
        d=d,
        type_weights=weights,
        type_biases=biases,
        relations=relations,
        train_config=config.as_dict(),
    )


def _proj_key(entity_type: EntityType) -> str:
    if entity_type in (EntityType.DRUG, EntityType.DISEASE):
        return entity_type.value
    return EntityType.OTHER.value


def train_projections(
    graph: KnowledgeGraph,
    embeddings: EmbeddingTable,
    config: TrainConfig,
) -> ProjectionParams:
    """Fit projections and relation embeddings with logistic loss.

    Positives are the graph triplets whose endpoints both carry features;
    negatives corrupt head or tail uniformly. Full-batch gradient descent,
    fully determined by the seed.
    """
    if config.d <= 0 or config.learning_rate <= 0 or config.negatives_per_positive <= 0:
        raise ContractError("d, learning_rate, and negatives_per_positive must be positive")
    if config.epochs < 0:
        raise ContractError("epochs must be non-negative")

    positives = [
        t for t in sorted(graph.triplets, key=lambda t: (t.head, t.relation, t.tail))
        if t.head in embeddings and t.tail in embeddings
    ]
    if not positives:
        raise ContractError("no trainable triplet: need endpoints with embeddings")

    rng = np.random.default_rng(config.seed)
    params = _init_params(graph, embeddings, config, rng)
    pool = sorted(eid for eid in embeddings.vectors if eid in graph.entities)
    if not pool:
        raise ContractError("no embedded entities present in the graph")

    lr = config.learning_rate
    d = config.d

    # negatives drawn once (uniform head-or-tail corruption); a fixed corpus
    # keeps full-batch descent smooth and the run seed-reproducible
    batch: list[tuple[str, str, str, float]] = [(t.head, t.relation, t.tail, 1.0) for t in positives]
    for t in positives:
        for _ in range(config.negatives_per_positive):
            corrupt_head = bool(rng.integers(0, 2))
            repl = pool[int(rng.integers(0, len(pool)))]
            if corrupt_head:
                batch.append((repl, t.relation, t.tail, 0.0))
            else:
                batch.append((t.head, t.relation, repl, 0.0))

    for epoch in range(config.epochs):
        grad_w = {k: np.zeros_like(v) for k, v in params.type_weights.items()}
        grad_b = {k: np.zeros_like(v) for k, v in params.type_biases.items()}
        grad_r = {k: (np.zeros(d), np.zeros(d)) for k in params.relations}
        total_loss = 0.0

        for head, rel, tail, label in batch:
            hk = _proj_key(graph.entities[head].entity_type)
            tk = _proj_key(graph.entities[tail].entity_type)
            xh, xt = embeddings.get(head), embeddings.get(tail)
            eh = project(xh, hk, params)
            et = project(xt, tk, params)
            r = params.relations[rel]

            f = score_triplet(eh, r, et)
            p = sigmoid(f)
            # logistic loss: softplus(-f) for positives, softplus(f) for negatives
            total_loss += float(np.logaddexp(0.0, -f if label == 1.0 else f))
            g = p - label

            dh_r = r.real_part * et.real_part + r.imag_part * et.imag_part
            dh_i = r.real_part * et.imag_part - r.imag_part * et.real_part
            dt_r = eh.real_part * r.real_part - eh.imag_part * r.imag_part
            dt_i = eh.imag_part * r.real_part + eh.real_part * r.imag_part
            dr_r = eh.real_part * et.real_part + eh.imag_part * et.imag_part
            dr_i = eh.real_part * et.imag_part - eh.imag_part * et.real_part

            gh = g * np.concatenate([dh_r, dh_i])
            gt = g * np.concatenate([dt_r, dt_i])
            grad_w[hk] += np.outer(gh, xh)
            grad_b[hk] += gh
            grad_w[tk] += np.outer(gt, xt)
            grad_b[tk] += gt
            rr, ri = grad_r[rel]
            rr += g * dr_r
            ri += g * dr_i

        mean_loss = total_loss / len(batch)
        if not np.isfinite(mean_loss):
            raise TrainingDiverged(epoch)
        params.loss_history.append(mean_loss)

        n = float(len(batch))
        for k in params.type_weights:
            params.type_weights[k] -= lr * grad_w[k] / n
            params.type_biases[k] -= lr * grad_b[k] / n
        for k, (rr, ri) in grad_r.items():
            old = params.relations[k]
            params.relations[k] = ComplexEmbedding(
                real_part=old.real_part - lr * rr / n,
                imag_part=old.imag_part - lr * ri / n,
            )

    return params


def embed_entity(
    entity_id: str,
    graph: KnowledgeGraph,
    embeddings: EmbeddingTable,
    params: ProjectionParams,
) -> ComplexEmbedding:
    ent = graph.entities.get(entity_id)
    if ent is None:
        raise NotFoundError(f"unknown entity: {entity_id!r}")
    return project(embeddings.get(entity_id), _proj_key(ent.entity_type), params)


def rank_candidates(
    query: RepurposingQuery,
    graph: KnowledgeGraph,
    embeddings: EmbeddingTable,
    params: ProjectionParams,
    k: int,
    exclude: set[str] | None = None,
    id_offset: int = 0,
) -> list[Hypothesis]:
    """Score every candidate of the opposite type and keep the top k.

    Candidates without embeddings are skipped (and counted in the log);
    ties break by ascending entity id for reproducible output.
    """
    if k <= 0:
        raise ContractError("k must be positive")
    if query.query_entity not in embeddings:
        raise NotFoundError(f"query entity {query.query_entity!r} has no embedding")
    rel = params.relations.get(query.target_relation)
    if rel is None:
        raise ConfigError(f"no relation embedding for {query.target_relation!r}")

    hq = embed_entity(query.query_entity, graph, embeddings, params)
    pool = [
        c for c in graph.candidates(query.candidate_type)
        if c != query.query_entity and (exclude is None or c not in exclude)
    ]
    if not pool:
        raise ContractError(f"no candidates of type {query.candidate_type.value!r}")

    skipped = 0
    scored: list[tuple[float, str]] = []
    for cand in pool:
        if cand not in embeddings:
            skipped += 1
            continue
        hc = embed_entity(cand, graph, embeddings, params)
        scored.append((score_triplet(hq, rel, hc), cand))
    if skipped:
        logger.info("rank_candidates: skipped %d candidates without embeddings", skipped)

    scored.sort(key=lambda sc: (-sc[0], sc[1]))
    top = scored[: min(k, len(scored))]
    return [
        Hypothesis(id=f"H{id_offset + i + 1}", candidate=cand, query=query, seed_score=score)
        for i, (score, cand) in enumerate(top)
    ]


def seed_tegraph(query: RepurposingQuery, hypotheses: list[Hypothesis], graph: KnowledgeGraph | None = None) -> EvidenceGraph:
    """Build the round-zero evidence graph: query node plus one hypothesis
    node per candidate, linked by entails edges weighted by the squashed
    seed score."""
    if not hypotheses:
        raise ContractError("hypotheses must be non-empty")
    ids = [h.id for h in hypotheses]
    if len(set(ids)) != len(ids):
        raise ContractError("duplicate hypothesis ids")

    label = query.query_entity
    if graph is not None and query.query_entity in graph.entities:
        label = graph.entities[query.query_entity].name

    eg = EvidenceGraph()
    eg = eg.add_node_unchecked(
        EvidenceNode(
            id=query.query_entity,
            role=NodeRole.QUERY,
            label=label,
            created_by="Explorer",
            round=0,
        )
    )
    for h in hypotheses:
        cand_label = h.candidate
        if graph is not None and h.candidate in graph.entities:
            cand_label = graph.entities[h.candidate].name
        eg = eg.add_node_unchecked(
            EvidenceNode(
                id=h.id,
                role=NodeRole.HYPOTHESIS,
                label=cand_label,
                created_by="Explorer",
                round=0,
                candidate=h.candidate,
            )
        )
        eg = eg.add_edge_unchecked(
            EvidenceEdge(
                source=query.query_entity,
                target=h.id,
                semantics=Semantics.ENTAILS,
                weight=sigmoid(h.seed_score),
                rationale="seed score",
                created_by="Explorer",
                round=0,
            )
        )
    return eg


# ---------------------------------------------------------------------------
# Params persistence: one JSON object with per-type matrices, per-relation
# complex vectors, dims, and the training config echoed for provenance.
# ---------------------------------------------------------------------------

def save_params(params: ProjectionParams, fp: IO) -> None:
    doc = {
        "dim_in": params.dim_in,
        "d": params.d,
        "types": {
            k: {"matrix": params.type_weights[k].tolist(), "bias": params.type_biases[k].tolist()}
            for k in sorted(params.type_weights)
        },
        "relations": {
            k: {"real": v.real_part.tolist(), "imag": v.imag_part.tolist()}
            for k, v in sorted(params.relations.items())
        },
        "training_config": params.train_config,
        "loss_history": params.loss_history,
    }
    json.dump(doc, fp, sort_keys=True, indent=1)


def load_params(fp: IO) -> ProjectionParams:
    try:
        doc = json.load(fp)
    except json.JSONDecodeError as exc:
        raise LoadError(f"params file is not valid JSON: {exc.msg}") from exc
    try:
        return ProjectionParams(
            dim_in=int(doc["dim_in"]),
            d=int(doc["d"]),
            type_weights={k: np.asarray(v["matrix"], dtype=np.float64) for k, v in doc["types"].items()},
            type_biases={k: np.asarray(v["bias"], dtype=np.float64) for k, v in doc["types"].items()},
            relations={
                k: ComplexEmbedding(
                    real_part=np.asarray(v["real"], dtype=np.float64),
                    imag_part=np.asarray(v["imag"], dtype=np.float64),
                )
                for k, v in doc["relations"].items()
            },
            train_config=doc.get("training_config", {}),
            loss_history=list(doc.get("loss_history", [])),
        )
    except (KeyError, TypeError) as exc:
        raise LoadError(f"params file missing field: {exc}") from exc
