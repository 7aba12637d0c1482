"""Operator-facing command surface.

Subcommands: ingest, train-explorer, run, evolve, eval, export. Every
command is deterministic under a scripted backend and a fixed seed.
Exit codes: 0 success, 2 usage/data error, 3 backend failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import re
import sys
from pathlib import Path

from . import evolution, explorer, kg, metrics, tegraph
from .errors import BackendError, DataError, DebateGraphError, ScenarioError
from .kg import Direction, RepurposingQuery
from .orchestrator import run_investigation
from .prompts import PromptStore
from .runtime import AgentRuntime, CallBudget, Transcript
from .schemas import AgentRole
from .util import canonical_json
from .workspace import WorkspaceConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_BACKEND = 3


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_")


def _load_workspace(args) -> WorkspaceConfig:
    return WorkspaceConfig.from_file(args.workspace)


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    path = Path(args.input)
    if not path.exists():
        print(f"error: input file not found: {path}", file=sys.stderr)
        return EXIT_DATA
    fmt = args.format or ("json_lines" if path.suffix in (".jsonl", ".ndjson") else "tsv")
    with path.open("rb") as fp:
        graph = kg.load_triples(fp, fmt=fmt)
    report = graph.load_report.as_dict()
    print(json.dumps(report, indent=1, sort_keys=True))
    if args.report:
        Path(args.report).write_text(canonical_json(report), encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train-explorer
# ---------------------------------------------------------------------------

def cmd_train_explorer(args) -> int:
    ws = _load_workspace(args)
    ws.require("kg", "embeddings")
    with ws.kg.open("rb") as fp:
        graph = kg.load_triples(fp, fmt=ws.kg_format)
    with ws.embeddings.open("rb") as fp:
        table = explorer.load_embeddings(fp)
    config = explorer.TrainConfig(
        d=args.d,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        negatives_per_positive=args.negatives,
        seed=args.seed,
    )
    params = explorer.train_projections(graph, table, config)
    out = Path(args.out) if args.out else ws.params
    if out is None:
        print("error: no output path (pass --out or set 'params' in the workspace)", file=sys.stderr)
        return EXIT_DATA
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fp:
        explorer.save_params(params, fp)
    final_loss = params.loss_history[-1] if params.loss_history else None
    print(f"trained projections -> {out} (epochs={config.epochs}, final_loss={final_loss})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _run_one(ws: WorkspaceConfig, args, entity: str, relation: str, direction: str) -> int:
    with ws.kg.open("rb") as fp:
        graph = kg.load_triples(fp, fmt=ws.kg_format)
    if entity not in graph.entities:
        print(f"error: unknown entity {entity!r}", file=sys.stderr)
        return EXIT_DATA
    ws.require("embeddings", "params")
    with ws.embeddings.open("rb") as fp:
        table = explorer.load_embeddings(fp)
    with ws.params.open("r", encoding="utf-8") as fp:
        params = explorer.load_params(fp)

    store = PromptStore(ws.prompts_dir)
    store.ensure_defaults()
    prompts = {role: store.current(role) for role in AgentRole}

    library = None
    if ws.library and ws.library.exists():
        library = evolution.load_library(ws.library)

    config = ws.investigation_config(
        seed=args.seed, call_budget=args.budget, t_max=args.t_max,
        k_seeds=args.k, heuristic_j=args.j,
    )
    query = RepurposingQuery(
        query_entity=entity, target_relation=relation, direction=Direction(direction)
    )
    run_id = args.run_id or f"{_slug(entity)}_{_slug(relation)}_{direction}_s{config.seed}"
    run_dir = ws.runs_dir / run_id

    backend = ws.build_backend()
    result = run_investigation(
        query,
        graph,
        config,
        backend,
        library=library,
        embeddings=table,
        params=params,
        prompts=prompts,
        run_dir=run_dir,
    )
    if library is not None and ws.library:
        evolution.persist_library(library, ws.library)  # usage counts

    print(f"run {run_id}: {result.termination_reason} after {result.rounds_executed} round(s)")
    print(f"{'rank':<5}{'hypothesis':<12}{'candidate':<28}{'score':<8}")
    for i, row in enumerate(result.ranked, start=1):
        cand = f"{row['candidate_name']} ({row['candidate']})"
        print(f"{i:<5}{row['hypothesis_id']:<12}{cand:<28}{row['score']:.4f}")
    print(f"artifacts: {run_dir}")
    return EXIT_OK


def cmd_run(args) -> int:
    ws = _load_workspace(args)
    ws.require("kg")
    if args.queries_file:
        rc = EXIT_OK
        for line in Path(args.queries_file).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                print(f"error: queries file line needs entity, relation, direction: {line!r}", file=sys.stderr)
                return EXIT_DATA
            rc = _run_one(ws, args, cols[0], cols[1], cols[2]) or rc
        return rc
    if not args.entity or not args.relation:
        print("error: --entity and --relation are required (or use --queries-file)", file=sys.stderr)
        return EXIT_DATA
    return _run_one(ws, args, args.entity, args.relation, args.direction)


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------

def _load_run(ws: WorkspaceConfig, run_id: str) -> tuple[dict, tegraph.EvidenceGraph, Path]:
    run_dir = ws.runs_dir / run_id
    result_path = run_dir / "result.json"
    if not result_path.exists():
        raise DataError(f"run {run_id!r} has no result.json under {ws.runs_dir}")
    result = json.loads(result_path.read_text(encoding="utf-8"))
    rounds = sorted(
        (p for p in (run_dir / "rounds").glob("*/snapshot.json")),
        key=lambda p: int(p.parent.name),
    )
    if not rounds:
        raise DataError(f"run {run_id!r} has no round snapshots")
    final = tegraph.restore(rounds[-1].read_text(encoding="utf-8"))
    return result, final, run_dir


def cmd_evolve(args) -> int:
    ws = _load_workspace(args)
    store = PromptStore(ws.prompts_dir)
    store.ensure_defaults()
    backend = ws.build_backend()
    budget = CallBudget(max_calls=ws.investigation_config().call_budget)

    reports: list[evolution.CreditAssignmentReport] = []
    for run_id in args.run_ids:
        result, final_graph, run_dir = _load_run(ws, run_id)
        report_path = run_dir / "credit_report.json"
        if report_path.exists():
            reports.append(
                evolution.CreditAssignmentReport.from_dict(
                    json.loads(report_path.read_text(encoding="utf-8"))
                )
            )
            continue
        top_score = result["ranked"][0]["score"] if result["ranked"] else 0.0
        context = {
            "query": {"entity": result["query"]["entity"], "relation": result["query"]["relation"]},
            "hypotheses": [
                {"id": r["hypothesis_id"], "candidate": {"name": r["candidate_name"], "id": r["candidate"]}}
                for r in result["ranked"]
            ],
            "tegraph_snapshot": tegraph.snapshot_dict(final_graph),
            "history": {"round": result["rounds_executed"], "last_scores": result["score_history"][-1:] or [{}]},
            "thresholds": {"stop_delta": ws.investigation_config().delta_stop,
                           "saturation_ratio": ws.investigation_config().saturation_ratio},
            "seed_context": {"target_type": "", "seed_history": []},
        }
        runtime = AgentRuntime(
            backend=backend,
            budget=budget,
            transcript=Transcript(run_dir / "evolve_transcript.jsonl"),
            prompts={role: store.current(role) for role in AgentRole},
        )
        report = evolution.generate_credit_report(run_id, final_graph, context, runtime, top_score)
        report_path.write_text(canonical_json(report.as_dict()), encoding="utf-8")
        reports.append(report)

    # prompt patches, idempotent per (run, role, patch text)
    patched = 0
    for report in sorted(reports, key=lambda r: r.run_id):
        for patch in report.prompt_patches:
            role = AgentRole(patch["role"])
            digest = hashlib.sha1(patch["patch"].encode("utf-8")).hexdigest()[:10]
            key = f"{report.run_id}:{role.value}:{digest}"
            if store.patch_applied(key):
                continue
            new_version = evolution.apply_prompt_patch(
                store.current(role), patch["patch"], patch_note=f"run:{report.run_id}"
            )
            store.save_new_version(new_version)
            store.record_patch(key)
            patched += 1

    library = evolution.load_library(ws.library) if ws.library and ws.library.exists() else evolution.HeuristicLibrary()
    qualifying = [r for r in reports if r.qualifies_for_distillation(ws.quality_threshold)]
    added: list[evolution.Heuristic] = []
    if qualifying:
        added = evolution.distill_heuristics(qualifying, backend, budget, library)
        if ws.library:
            evolution.persist_library(library, ws.library)
    else:
        skipped = [r.run_id for r in reports if not r.qualifies_for_distillation(ws.quality_threshold)]
        print(
            f"no reports met the distillation quality threshold "
            f"(top score >= {ws.quality_threshold}); skipped: {', '.join(skipped) or 'none'}"
        )

    print(f"prompt patches applied: {patched}")
    print(f"library: +{len(added)} heuristic(s), now {len(library.heuristics)} at v{library.version}")
    for h in added:
        print(f"  {h.id}: {h.condition} {h.action}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    ws = _load_workspace(args)
    truth_path = Path(args.truth)
    if not truth_path.exists():
        print(f"error: truth file not found: {truth_path}", file=sys.stderr)
        return EXIT_DATA
    with truth_path.open("rb") as fp:
        truth = metrics.load_truth(fp)

    results = []
    for run_id in args.run_ids:
        result, _, _ = _load_run(ws, run_id)
        scored = [(r["candidate"], r["score"]) for r in result["ranked"]]
        results.append((result["query"]["entity"], scored))

    report = metrics.evaluate_runs(results, truth, ks=tuple(args.k_list))
    out_dir = ws.runs_dir / "eval"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.json").write_text(canonical_json(report.as_dict()), encoding="utf-8")
    table = report.as_table()
    (out_dir / "metrics.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    for q in report.excluded_queries:
        print(f"excluded (not in truth): {q}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def cmd_export(args) -> int:
    ws = _load_workspace(args)
    try:
        _, final_graph, _ = _load_run(ws, args.run_id)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if args.fmt == "json":
        output = tegraph.snapshot(final_graph).decode("utf-8")
    else:
        output = tegraph.to_dot(final_graph)
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(output, end="" if output.endswith("\n") else "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debategraph",
        description="Evidence-seeking hypothesis ranking over a knowledge graph",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="Load a triplet file and print the load report")
    p.add_argument("input", help="TSV or JSON-lines triplet file")
    p.add_argument("--format", choices=["tsv", "json_lines"], default=None)
    p.add_argument("--report", help="also write the report JSON here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-explorer", help="Train projections for the seeding scorer")
    p.add_argument("--workspace", required=True)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--negatives", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="params output path (default: workspace 'params')")
    p.set_defaults(func=cmd_train_explorer)

    p = sub.add_parser("run", help="Run one investigation end to end")
    p.add_argument("--workspace", required=True)
    p.add_argument("--entity", help="query entity id")
    p.add_argument("--relation", help="target relation label")
    p.add_argument(
        "--direction",
        choices=[d.value for d in Direction],
        default=Direction.DISEASE_SEEKS_DRUG.value,
    )
    p.add_argument("--queries-file", help="TSV of entity, relation, direction (one per line)")
    p.add_argument("--run-id", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--t-max", type=int, default=None)
    p.add_argument("--k", type=int, default=None, help="initial hypothesis count")
    p.add_argument("--j", type=int, default=None, help="heuristics retrieved from the library")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evolve", help="Generate credit reports, patch prompts, distill heuristics")
    p.add_argument("--workspace", required=True)
    p.add_argument("run_ids", nargs="+")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("eval", help="Score runs against a ground-truth pair file")
    p.add_argument("--workspace", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--k-list", type=int, nargs="+", default=[1, 5, 10])
    p.add_argument("run_ids", nargs="+")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="Export a run's final evidence graph")
    p.add_argument("--workspace", required=True)
    p.add_argument("run_id")
    p.add_argument("--fmt", choices=["json", "dot"], default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BackendError, ScenarioError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DebateGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
