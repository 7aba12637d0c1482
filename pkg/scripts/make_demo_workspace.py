"""Generate the committed demo workspace under assets/demo/.

Builds a 30-entity synthetic knowledge graph, clustered feature vectors,
trained projection params, a scripted debate scenario aligned with the
deterministic seeding, a ground-truth pair file, and workspace configs.
Everything is seed-fixed; re-running reproduces identical files.
"""

from __future__ import annotations

import io
import json
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from debategraph.explorer import TrainConfig, load_embeddings, rank_candidates, save_params, train_projections
from debategraph.kg import Direction, RepurposingQuery, load_triples
from debategraph.util import canonical_json

OUT = REPO / "assets" / "demo"

QUERY_DISEASE = "dz_rare_target"

DISEASES = {
    "dz_cardio_1": ("Familial arrhythmia syndrome", "cardio"),
    "dz_cardio_2": ("Hereditary cardiomyopathy", "cardio"),
    "dz_neuro_1": ("Progressive ataxia", "neuro"),
    "dz_neuro_2": ("Channelopathy epilepsy", "neuro"),
    "dz_immune_1": ("Periodic fever syndrome", "immune"),
    "dz_immune_2": ("Complement disorder", "immune"),
    "dz_meta_1": ("Lysosomal storage disorder", "meta"),
    QUERY_DISEASE: ("Rare ventricular arrhythmia disorder", "cardio"),
}

DRUGS = {
    "drug_alpha": ("Alphaxine", "cardio"),
    "drug_bravo": ("Bravolol", "cardio"),
    "drug_charlie": ("Charlipine", "neuro"),
    "drug_delta": ("Deltazepam", "neuro"),
    "drug_echo": ("Echolimab", "immune"),
    "drug_foxtrot": ("Foxtrocin", "immune"),
    "drug_golf": ("Golfastat", "meta"),
    "drug_hotel": ("Hotelzyme", "meta"),
}

GENES = {
    "gene_scn": ("SCN-like channel gene", "cardio"),
    "gene_ryr": ("Calcium release channel gene", "cardio"),
    "gene_gaba": ("GABA receptor gene", "neuro"),
    "gene_kcn": ("Potassium channel gene", "neuro"),
    "gene_c5": ("Complement factor gene", "immune"),
    "gene_gba": ("Hydrolase gene", "meta"),
}

PATHWAYS = {
    "path_ion": ("Cardiac ion flux pathway", "cardio"),
    "path_syn": ("Synaptic signalling pathway", "neuro"),
    "path_compl": ("Complement cascade", "immune"),
    "path_lyso": ("Lysosomal catabolism pathway", "meta"),
}

PHENOTYPES = {
    "pheno_arrhythmia": ("Ventricular ectopy", "cardio"),
    "pheno_tremor": ("Intention tremor", "neuro"),
    "pheno_fever": ("Recurrent fever", "immune"),
    "pheno_fatigue": ("Exercise intolerance", "meta"),
}

ALL = {}
for table, etype in ((DISEASES, "disease"), (DRUGS, "drug"), (GENES, "gene"), (PATHWAYS, "pathway"), (PHENOTYPES, "phenotype")):
    for eid, (name, cluster) in table.items():
        ALL[eid] = (name, etype, cluster)

TRIPLES = [
    # indication training edges (the query disease stays unlinked to drugs)
    ("drug_alpha", "indication", "dz_cardio_1"),
    ("drug_bravo", "indication", "dz_cardio_2"),
    ("drug_charlie", "indication", "dz_neuro_1"),
    ("drug_delta", "indication", "dz_neuro_2"),
    ("drug_echo", "indication", "dz_immune_1"),
    ("drug_foxtrot", "indication", "dz_immune_2"),
    ("drug_golf", "indication", "dz_meta_1"),
    # mechanism scaffolding
    ("drug_alpha", "targets", "gene_scn"),
    ("drug_bravo", "targets", "gene_ryr"),
    ("drug_charlie", "targets", "gene_gaba"),
    ("drug_delta", "targets", "gene_kcn"),
    ("drug_echo", "targets", "gene_c5"),
    ("drug_foxtrot", "targets", "gene_c5"),
    ("drug_golf", "targets", "gene_gba"),
    ("drug_hotel", "targets", "gene_gba"),
    ("gene_scn", "participates_in", "path_ion"),
    ("gene_ryr", "participates_in", "path_ion"),
    ("gene_gaba", "participates_in", "path_syn"),
    ("gene_kcn", "participates_in", "path_syn"),
    ("gene_c5", "participates_in", "path_compl"),
    ("gene_gba", "participates_in", "path_lyso"),
    ("path_ion", "implicated_in", "dz_cardio_1"),
    ("path_syn", "implicated_in", "dz_neuro_1"),
    ("path_compl", "implicated_in", "dz_immune_1"),
    ("path_lyso", "implicated_in", "dz_meta_1"),
    ("dz_cardio_1", "presents", "pheno_arrhythmia"),
    ("dz_neuro_1", "presents", "pheno_tremor"),
    ("dz_immune_1", "presents", "pheno_fever"),
    ("dz_meta_1", "presents", "pheno_fatigue"),
    # the query disease has exactly one known edge: near-sparse-zero
    (QUERY_DISEASE, "presents", "pheno_arrhythmia"),
]

CLUSTER_AXIS = {"cardio": 0, "neuro": 2, "immune": 4, "meta": 6}
DIM = 8


def kg_tsv() -> str:
    rows = []
    for head, rel, tail in TRIPLES:
        hname, htype, _ = ALL[head]
        tname, ttype, _ = ALL[tail]
        rows.append("\t".join((head, htype, hname, rel, tail, ttype, tname)))
    return "\n".join(rows) + "\n"


def embeddings_jsonl() -> str:
    rng = np.random.default_rng(2024)
    lines = []
    for eid in sorted(ALL):
        _, _, cluster = ALL[eid]
        vec = np.zeros(DIM)
        axis = CLUSTER_AXIS[cluster]
        vec[axis] = 1.0
        vec[axis + 1] = 0.5
        vec = vec + 0.1 * rng.standard_normal(DIM)
        lines.append(json.dumps({"entity_id": eid, "vector": [round(float(x), 6) for x in vec]}))
    return "\n".join(lines) + "\n"


def scenario_lines(top1: str, top1_name: str) -> list[dict]:
    empty = {"graph_updates": {}}
    return [
        {"role": "PI", "mode": "init",
         "response": {"plan": {"rounds": 3, "stopping": {"delta_threshold": 0.03}}}},
        # round 0, micro 1: both sides build
        {"role": "Proponent", "mode": "build_chain", "response": {
            "graph_updates": {
                "add_nodes": [
                    {"id": "n1", "type": "Target", "label": "Channel target protein"},
                    {"id": "n2", "type": "Pathway", "label": "Ion flux pathway"},
                ],
                "add_edges": [
                    {"source": top1, "target": "n1", "relation": "acts_on", "weight": 0.8,
                     "rationale": f"{top1_name} modulates the channel"},
                    {"source": "n1", "target": "n2", "relation": "involved_in", "weight": 0.7,
                     "rationale": "target drives the flux pathway"},
                    {"source": "n2", "target": QUERY_DISEASE, "relation": "supports", "weight": 0.75,
                     "rationale": "pathway implicated in the disorder"},
                ],
            },
            "subconclusions": [{"id": "C1", "text": "mechanistic chain closed", "confidence": "medium"}],
        }},
        {"role": "Skeptic", "mode": "build_counterchain", "response": {
            "graph_updates": {
                "add_nodes": [{"id": "k1", "type": "Risk", "label": "Proarrhythmia liability"}],
                "add_edges": [
                    {"source": top1, "target": "k1", "relation": "involved_in", "weight": 0.6,
                     "rationale": "class effect"},
                    {"source": "k1", "target": "H1", "relation": "refutes", "weight": 0.55,
                     "rationale": "risk weakens the hypothesis"},
                ],
                "conflict_hotspots": [
                    {"topic": "proarrhythmia_risk", "pro_nodes": ["n1"], "con_nodes": ["k1"]}
                ],
            },
            "counterclaims": [{"id": "K1", "text": "safety margin unclear", "confidence": "medium"}],
        }},
        # round 0, micro 2: nothing new; the monitor interrupts
        {"role": "Proponent", "mode": "build_chain", "response": empty},
        {"role": "Skeptic", "mode": "build_counterchain", "response": empty},
        {"role": "PI", "mode": "score", "response": {
            "scoring_summary": [{"hypothesis_id": "H1", "score": 0.9}, {"hypothesis_id": "H2", "score": 0.5}],
            "ranking": ["H1", "H2"],
            "delta_since_last_round": 1.0,
            "stop_decision": {"should_stop": False},
        }},
        {"role": "PI", "mode": "revise", "response": {
            "revisions": [{
                "hypothesis_id": "H1",
                "graph_actions": [{"type": "add_mechanism_link", "assignee": "Proponent",
                                   "detail": "find a second disjoint route"}],
                "debate_focus": ["mechanistic closure"],
            }],
            "seed_request": {"should_regenerate": False, "reason": "seeds sufficient"},
        }},
        # round 1: directives in force, but the debate is spent
        {"role": "Proponent", "mode": "execute_actions", "response": empty},
        {"role": "Skeptic", "mode": "build_counterchain", "response": empty},
        {"role": "PI", "mode": "score", "response": {
            "scoring_summary": [{"hypothesis_id": "H1", "score": 0.9}, {"hypothesis_id": "H2", "score": 0.5}],
            "ranking": ["H1", "H2"],
            "delta_since_last_round": 0.0,
            "stop_decision": {"should_stop": True},
        }},
    ]


def evolve_scenario_lines() -> list[dict]:
    patch = ("Always prioritize establishing two disjoint mechanistic paths "
             "before exploring secondary outcomes.")
    rule = ("WHEN the disease involves cardiac rhythm, THEN search for ion-channel "
            "modulators and stress-test proarrhythmia risk early.")
    report = {
        "final_recommendations": [{"hypothesis_id": "H1", "score": 0.9}],
        "prompt_patches": [{"role": "Proponent", "patch": patch}],
        "pivotal_motifs": [
            {"description": "target-pathway chain closed the loop", "hypothesis_id": "H1",
             "node_refs": ["n1", "n2"]}
        ],
        "residual_gaps": ["no pharmacokinetic evidence collected"],
        "heuristics": [rule],
    }
    distill = {"final_recommendations": [], "heuristics": [rule]}
    return [
        {"role": "PI", "mode": "report_and_evolve", "response": report},  # run 1 report
        {"role": "PI", "mode": "report_and_evolve", "response": report},  # run 2 report
        {"role": "PI", "mode": "report_and_evolve", "response": distill},  # distillation
        {"role": "PI", "mode": "report_and_evolve", "response": distill},  # rerun distillation
    ]


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "kg.tsv").write_text(kg_tsv(), encoding="utf-8")
    (OUT / "embeddings.jsonl").write_text(embeddings_jsonl(), encoding="utf-8")

    graph = load_triples(io.StringIO(kg_tsv()), fmt="tsv")
    table = load_embeddings(io.StringIO(embeddings_jsonl()))
    params = train_projections(graph, table, TrainConfig(d=8, epochs=150, learning_rate=0.05,
                                                         negatives_per_positive=2, seed=0))
    with (OUT / "params.json").open("w", encoding="utf-8") as fp:
        save_params(params, fp)

    query = RepurposingQuery(QUERY_DISEASE, "indication", Direction.DISEASE_SEEKS_DRUG)
    top = rank_candidates(query, graph, table, params, k=2)
    top1, top2 = top[0].candidate, top[1].candidate
    print(f"seeded hypotheses: H1={top1}, H2={top2}")

    with (OUT / "scenario.jsonl").open("w", encoding="utf-8") as fp:
        for line in scenario_lines(top1, ALL[top1][0]):
            fp.write(canonical_json(line) + "\n")
    with (OUT / "evolve_scenario.jsonl").open("w", encoding="utf-8") as fp:
        for line in evolve_scenario_lines():
            fp.write(canonical_json(line) + "\n")

    truth_rows = [f"{QUERY_DISEASE}\t{top1}\t1"]
    truth_rows += [f"{QUERY_DISEASE}\t{d}\t0" for d in sorted(DRUGS) if d != top1]
    (OUT / "truth.tsv").write_text("\n".join(truth_rows) + "\n", encoding="utf-8")

    defaults = {
        "t_max": 3,
        "delta_stop": 0.03,
        "epsilon_inner": 0.5,
        "saturation_ratio": 0.65,
        "k_seeds": 2,
        "max_micro_rounds": 8,
        "call_budget": 20,
        "heuristic_j": 2,
        "seed": 0,
        "quality_threshold": 0.6,
    }
    base = {
        "kg": "kg.tsv",
        "kg_format": "tsv",
        "embeddings": "embeddings.jsonl",
        "params": "params.json",
        "prompts_dir": "prompts",
        "library": "library.json",
        "runs_dir": "runs",
        "defaults": defaults,
    }
    workspace = dict(base, backend={"kind": "scripted", "scenario": "scenario.jsonl", "metered": True})
    (OUT / "workspace.json").write_text(json.dumps(workspace, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    workspace_evolve = dict(base, backend={"kind": "scripted", "scenario": "evolve_scenario.jsonl", "metered": True})
    (OUT / "workspace_evolve.json").write_text(
        json.dumps(workspace_evolve, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"demo workspace written to {OUT}")


if __name__ == "__main__":
    main()
