"""Command-line entry points, one per pipeline stage.

Exit codes: 0 success, 1 domain error (the module's error name is printed
verbatim), 2 usage error. --json switches every subcommand to a single
machine-readable JSON object on stdout. A JSON config file can supply
defaults for iterate/embed flags; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .embed import EmbeddingConfig, embed_corpus, write_vectors, import_external_vectors
from .errors import RarefindError
from .ingest import clean, corpus_stats, parse_csv
from .lexicon import default_lexicon, load_lexicon, match_with_proximity
from .store import Project
from .triage import (
    IterationConfig,
    compare_keyword_baseline,
    run_iteration,
    should_stop,
)

PROJECT_ENV = "RAREFIND_PROJECT"


def _project_path(args) -> Path:
    path = args.project or os.environ.get(PROJECT_ENV)
    if not path:
        raise SystemExit(
            f"error: --project is required (or set {PROJECT_ENV})")
    return Path(path)


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        json.dump(payload, sys.stdout, sort_keys=True, indent=1)
        sys.stdout.write("\n")
    else:
        print(text)


def _load_config_defaults(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    with open(args.config, encoding="utf-8") as f:
        return json.load(f)


def _parse_window(raw: str) -> float:
    if raw in ("inf", "infinite", "none"):
        return math.inf
    return int(raw)


def _embedding_config(args, defaults: dict) -> EmbeddingConfig:
    def pick(flag, key, fallback):
        value = getattr(args, flag, None)
        if value is not None:
            return value
        return defaults.get(key, fallback)

    ngrams = pick("ngrams", "ngram_range", "1,2")
    if isinstance(ngrams, str):
        nmin, nmax = (int(x) for x in ngrams.split(","))
    else:
        nmin, nmax = ngrams
    return EmbeddingConfig(
        provider=pick("provider", "provider", "hashed_ngrams"),
        dims=int(pick("dims", "dims", 4096)),
        seed=int(pick("embed_seed", "embed_seed", 42)),
        ngram_range=(nmin, nmax),
        window_mode=pick("window_mode", "window_mode", "full_doc"),
        window_sentences=int(pick("window_sentences", "window_sentences", 5)),
    )


# --- subcommands ---------------------------------------------------------------

def cmd_ingest(args) -> int:
    root = _project_path(args)
    errors = []
    complaints = list(parse_csv(args.csv, args.schema_mode,
                                on_row_error=lambda n, r: errors.append((n, r))))
    retained, report = clean(complaints, args.resubmission_threshold)
    lex = load_lexicon(args.lexicon) if args.lexicon else default_lexicon()
    with Project.open(root) as project:
        project.set_corpus(retained, report)
        project.set_lexicon(lex)
    payload = {"report": report.to_json_dict(),
               "skipped_rows": [{"line": n, "reason": r} for n, r in errors]}
    text = (f"ingested {report.input_count} rows -> retained "
            f"{report.retained_count} (missing narrative "
            f"{report.excluded_missing_narrative}, duplicates "
            f"{report.excluded_duplicates}, resubmission flags "
            f"{report.flagged_resubmissions}); mean length "
            f"{report.length_mean:.1f} tokens (sd {report.length_sd:.1f})")
    if errors:
        text += f"; skipped {len(errors)} malformed row(s)"
    _emit(args, payload, text)
    return 0


def cmd_match(args) -> int:
    window = _parse_window(args.window)
    with Project.open(_project_path(args)) as project:
        if project.lexicon is None:
            raise RarefindError("project has no lexicon; run ingest first")
        docs = project.tokenized(args.preset)
        matched = []
        for cid in sorted(docs):
            result = match_with_proximity(docs[cid], project.lexicon, window)
            if result.matched:
                matched.append(cid)
        if args.out:
            Path(args.out).write_text("\n".join(matched) + "\n")
        if args.seed_ref:
            refset = project.seed_reference(matched)
            seeded_version = refset.version
        else:
            seeded_version = None
    payload = {"window": None if window == math.inf else window,
               "matched": len(matched), "of": len(docs),
               "ids": matched if args.json else None,
               "seeded_ref_version": seeded_version}
    text = f"{len(matched)} of {len(docs)} narratives match at window {args.window}"
    if seeded_version is not None:
        text += f"; seeded reference set v{seeded_version}"
    _emit(args, payload, text)
    return 0


def cmd_embed(args) -> int:
    defaults = _load_config_defaults(args)
    cfg = _embedding_config(args, defaults)
    with Project.open(_project_path(args)) as project:
        docs = project.tokenized(args.preset)
        ids = sorted(docs)
        if args.import_file:
            vectors = import_external_vectors(args.import_file, set(ids))
            text = f"imported {len(vectors)} vectors from {args.import_file}"
        else:
            vectors = embed_corpus([docs[c] for c in ids], cfg, project.lexicon)
            text = (f"embedded {len(vectors)} documents "
                    f"({cfg.provider}, dims {cfg.dims}, seed {cfg.seed})")
        if args.out:
            write_vectors(args.out, vectors)
            text += f"; wrote {args.out}"
    _emit(args, {"count": len(vectors), "config": cfg.to_dict()}, text)
    return 0


def cmd_cluster(args) -> int:
    from . import cluster as cluster_mod

    defaults = _load_config_defaults(args)
    cfg = _embedding_config(args, defaults)
    with Project.open(_project_path(args)) as project:
        docs = project.tokenized(args.preset)
        ids = sorted(docs)
        vectors = embed_corpus([docs[c] for c in ids], cfg, project.lexicon)
        model = cluster_mod.fit(vectors, k=args.k, seed=args.seed)
        if args.save:
            model.save(args.save)
        sizes = {j: len(m) for j, m in model.cluster_members().items()}
    payload = {"k": args.k, "seed": args.seed,
               "objective": model.objective,
               "iterations_run": model.iterations_run,
               "sizes": {str(j): n for j, n in sizes.items()}}
    text = (f"fit k={args.k} over {len(ids)} docs: objective "
            f"{model.objective:.3f} in {model.iterations_run} iterations; "
            f"sizes {sizes}")
    _emit(args, payload, text)
    return 0


def _iteration_config(args, project) -> IterationConfig:
    defaults = _load_config_defaults(args)
    reviewers = (args.reviewers.split(",") if args.reviewers
                 else defaults.get("reviewers"))
    if not reviewers:
        raise RarefindError("iterate needs --reviewers a,b (or config)")
    strategy_raw = args.strategy or defaults.get("strategy", "coverage:0.8")
    kind, _, value = strategy_raw.partition(":")
    if kind == "coverage":
        selection = ("coverage", float(value or 0.8))
    elif kind in ("top", "top_m"):
        selection = ("top_m", int(value or 3))
    else:
        raise RarefindError(f"unknown strategy: {strategy_raw}")

    def pick(value, key, fallback):
        return value if value is not None else defaults.get(key, fallback)

    return IterationConfig(
        reviewers=reviewers,
        embedding=_embedding_config(args, defaults),
        k=int(pick(args.k, "k", 12)),
        seed=int(pick(args.seed, "seed", 0)),
        n_per_round=int(pick(args.n_per_round, "n_per_round", 300)),
        selection=selection,
        pool=pick(args.pool, "pool", "ip_matched"),
        candidate_sample_size=int(pick(args.sample_size,
                                       "candidate_sample_size", 50_000)),
        yield_floor=float(pick(args.yield_floor, "yield_floor", 0.05)),
        max_iterations=int(pick(args.max_iterations, "max_iterations", 6)),
        preset=pick(args.preset, "preset", "light"),
    )


def cmd_iterate(args) -> int:
    with Project.open(_project_path(args)) as project:
        if args.seal:
            refset = project.snapshot_refset()
            rec = project.iteration_record(project.last_iteration())
            payload = {"sealed_iteration": rec.iteration,
                       "confirmed": rec.confirmed,
                       "estimated_yield": {str(c): y for c, y
                                           in rec.estimated_yield.items()},
                       "ref_version": refset.version,
                       "ref_size": len(refset.members)}
            text = (f"sealed iteration {rec.iteration}: confirmed "
                    f"{len(rec.confirmed)}; reference set v{refset.version} "
                    f"({len(refset.members)} members)")
            _emit(args, payload, text)
            return 0
        cfg = _iteration_config(args, project)
        stop, reason = should_stop(project, cfg)
        if stop and not args.force:
            raise RarefindError(f"stop condition: {reason} (--force to override)")
        rec = run_iteration(project, cfg, force=args.force)
        payload = rec.to_json_dict()
        text = (f"iteration {rec.iteration}: ref v{rec.ref_version_in}, "
                f"selected clusters {rec.selected_clusters}, sampled "
                f"{len(rec.sampled)} for review by {cfg.reviewers}")
    _emit(args, payload, text)
    return 0


def cmd_explain(args) -> int:
    from .explain import class_tfidf, explain_cluster

    with Project.open(_project_path(args)) as project:
        rec = project.iteration_record(args.iteration)
        if rec is None:
            raise RarefindError(f"no such iteration: {args.iteration}")
        model = project.load_model(args.iteration)
        preset = rec.config.get("preset", "light")
        docs = project.tokenized(preset)
        members = model.cluster_members()
        concat = {j: [t for cid in ids if cid in docs
                      for t in docs[cid].tokens]
                  for j, ids in members.items()}
        profiles = class_tfidf(concat, n_terms=args.top_terms)

        target = args.cluster
        if target is None:
            target = rec.selected_clusters[0]
        cluster_docs = [docs[cid] for cid in model.assignments if cid in docs]
        forest, report = explain_cluster(
            cluster_docs, model.assignments, target,
            vocab_cap=args.vocab_cap, n_trees=args.trees,
            max_depth=args.depth, seed=args.seed,
            n_instances=args.instances, mode=args.shap_mode,
            n_permutations=args.shap_permutations)

        doc = {
            "iteration": args.iteration,
            "profiles": {str(p.cluster): [[t, s] for t, s in p.terms]
                         for p in profiles},
            "attribution": {
                "target_cluster": target,
                "summary_topk": [[f, a, s] for f, a, s in report.summary_topk],
                "n_instances": len(report.per_instance),
                "mode": args.shap_mode,
            },
        }
        out = project.root / "iterations" / f"iter{args.iteration:04d}.explain.json"
        with open(out, "w", encoding="utf-8") as f:
            json.dump(doc, f, sort_keys=True, indent=1)
            f.write("\n")
    top = ", ".join(f"{f}({'+' if s >= 0.5 else '-'})"
                    for f, _, s in report.summary_topk[:8])
    text = (f"cluster {target}: top attribution words {top}; profiles for "
            f"{len(profiles)} clusters written to {out.name}")
    _emit(args, doc, text)
    return 0


def cmd_agreement(args) -> int:
    from .agreement import Degenerate, LabelMatrix, fleiss_kappa

    with Project.open(_project_path(args)) as project:
        rec = project.iteration_record(args.iteration)
        if rec is None:
            raise RarefindError(f"no such iteration: {args.iteration}")
        by_item = project.resolved_labels(args.iteration)
        verdicts = {}
        for cid in rec.sampled:
            vs = [by_item.get(cid, {}).get(r) for r in rec.assignments[cid]]
            if all(v is not None for v in vs):
                verdicts[cid] = vs
        if not verdicts:
            raise RarefindError("no fully labeled items in this round")
        try:
            kappa = fleiss_kappa(LabelMatrix.from_verdicts(verdicts))
        except Degenerate:
            kappa = None
    payload = {"reports": [{"category": "relevance", "kappa": kappa,
                            "n_items": len(verdicts)}]}
    text = (f"round {args.iteration} relevance kappa: "
            f"{'undefined' if kappa is None else f'{kappa:.4f}'} "
            f"over {len(verdicts)} items")
    _emit(args, payload, text)
    return 0


def cmd_report(args) -> int:
    from .api import create_app
    from fastapi.testclient import TestClient

    with Project.open(_project_path(args)) as project:
        client = TestClient(create_app(project))
        dashboard = client.get("/api/v1/dashboard").json()
        if args.iteration is not None:
            summaries = [s for s in dashboard["iterations"]
                         if s["iteration"] == args.iteration]
            if not summaries:
                raise RarefindError(f"no such iteration: {args.iteration}")
            payload = {
                "iteration": summaries[0],
                "yield": dashboard["yield_by_iteration"].get(str(args.iteration)),
                "kappa": dashboard["kappa_by_round"].get(str(args.iteration)),
                "ref_size_by_version": dashboard["ref_size_by_version"],
            }
        else:
            payload = dashboard
        if args.baseline:
            docs = project.tokenized("light")
            comparison = compare_keyword_baseline(project.refset(),
                                                  project.lexicon, docs)
            payload["keyword_baseline"] = comparison.to_json_dict()
    lines = [f"ref sizes by version: {payload.get('ref_size_by_version')}"]
    if args.iteration is not None:
        lines.append(f"iteration {args.iteration}: yield {payload['yield']}, "
                     f"kappa {payload['kappa']}")
    if args.baseline:
        lines.append(f"keyword baseline: {payload['keyword_baseline']}")
    _emit(args, payload, "\n".join(lines))
    return 0


def cmd_serve(args) -> int:
    import uvicorn
    from .api import create_app

    project = Project.open(_project_path(args))
    static = Path(args.ui) if args.ui else None
    app = create_app(project, static_dir=static)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    finally:
        project.close()
    return 0


def cmd_export(args) -> int:
    with Project.open(_project_path(args)) as project:
        text = project.export_text()
    if args.out:
        Path(args.out).write_text(text)
        if not args.json:
            print(f"exported to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_stats(args) -> int:
    with Project.open(_project_path(args)) as project:
        docs = project.tokenized("raw")
        dates = {cid: c.date_received for cid, c in project.complaints.items()}
        stats = corpus_stats(list(docs.values()), dates)
    payload = {"mean": stats.mean, "sd": stats.sd,
               "per_year": {str(y): n for y, n in stats.per_year.items()}}
    _emit(args, payload,
          f"token length mean {stats.mean:.1f} (sd {stats.sd:.1f}); "
          f"per year {stats.per_year}")
    return 0


def cmd_unlock(args) -> int:
    Project.force_unlock(_project_path(args))
    print("lock removed")
    return 0


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rarefind",
        description="Human-in-the-loop discovery of rare complaint narratives")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=None,
                        help="cap worker threads for the numeric kernels")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=False):
        p.add_argument("--project", help=f"project directory "
                                         f"(default: ${PROJECT_ENV})")
        p.add_argument("--json", action="store_true",
                       help="machine-readable output")
        if config:
            p.add_argument("--config", help="JSON config file with defaults")

    p = sub.add_parser("ingest", help="parse + clean a complaint CSV into a project")
    common(p)
    p.add_argument("--csv", required=True)
    p.add_argument("--schema-mode", choices=("strict", "lenient"),
                   default="lenient")
    p.add_argument("--resubmission-threshold", type=float, default=0.98)
    p.add_argument("--lexicon", help="lexicon JSON (default: shipped lists)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("match", help="keyword matching with proximity")
    common(p)
    p.add_argument("--window", default="10", help="token gap bound or 'inf'")
    p.add_argument("--preset", default="light",
                   choices=("raw", "light", "aggressive"))
    p.add_argument("--out", help="write matched complaint ids to a file")
    p.add_argument("--seed-ref", action="store_true",
                   help="seed the reference set with the matches")
    p.set_defaults(func=cmd_match)

    def embedding_flags(p):
        p.add_argument("--provider",
                       choices=("hashed_ngrams", "tfidf_projection"))
        p.add_argument("--dims", type=int)
        p.add_argument("--embed-seed", type=int, dest="embed_seed")
        p.add_argument("--ngrams", help="n-gram range, e.g. 1,2")
        p.add_argument("--window-mode", choices=("full_doc", "ip_window"),
                       dest="window_mode")
        p.add_argument("--window-sentences", type=int, dest="window_sentences")
        p.add_argument("--preset", default=None,
                       choices=("raw", "light", "aggressive"))

    p = sub.add_parser("embed", help="embed the corpus or import vectors")
    common(p, config=True)
    embedding_flags(p)
    p.add_argument("--out", help="write vectors (id,dims,values per line)")
    p.add_argument("--import", dest="import_file",
                   help="import externally computed vectors")
    p.set_defaults(func=cmd_embed, preset="light")

    p = sub.add_parser("cluster", help="fit spherical k-means over the corpus")
    common(p, config=True)
    embedding_flags(p)
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save", help="write the model JSON here")
    p.set_defaults(func=cmd_cluster, preset="light")

    p = sub.add_parser("iterate", help="run one loop iteration (or --seal)")
    common(p, config=True)
    embedding_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-per-round", type=int, dest="n_per_round")
    p.add_argument("--reviewers", help="comma-separated reviewer ids")
    p.add_argument("--strategy", help="coverage:0.8 or top:3")
    p.add_argument("--pool", choices=("ip_matched", "random"))
    p.add_argument("--sample-size", type=int, dest="sample_size")
    p.add_argument("--yield-floor", type=float, dest="yield_floor")
    p.add_argument("--max-iterations", type=int, dest="max_iterations")
    p.add_argument("--force", action="store_true",
                   help="start despite pending labels / stop conditions")
    p.add_argument("--seal", action="store_true",
                   help="snapshot the completed open round instead")
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("explain", help="c-TF-IDF profiles + SHAP word summary")
    common(p)
    p.add_argument("--iteration", type=int, required=True)
    p.add_argument("--cluster", type=int, help="target cluster "
                                               "(default: top selected)")
    p.add_argument("--top-terms", type=int, default=20, dest="top_terms")
    p.add_argument("--vocab-cap", type=int, default=500, dest="vocab_cap")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--instances", type=int, default=25)
    p.add_argument("--shap-mode", choices=("exact", "sampled"),
                   default="sampled", dest="shap_mode")
    p.add_argument("--shap-permutations", type=int, default=500,
                   dest="shap_permutations")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("agreement", help="inter-rater kappa for a round")
    common(p)
    p.add_argument("--iteration", type=int, required=True)
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("report", help="project dashboard figures")
    common(p)
    p.add_argument("--iteration", type=int)
    p.add_argument("--baseline", action="store_true",
                   help="include the keyword-baseline comparison")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the review HTTP service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", help="static directory with the built review UI")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export", help="canonical project dump (timestamps stripped)")
    common(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("stats", help="corpus token-length and per-year stats")
    common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("unlock", help="remove a stale project lock")
    common(p)
    p.set_defaults(func=cmd_unlock)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads or os.environ.get("RAREFIND_THREADS")
    if threads:
        try:
            import numba
            numba.set_num_threads(max(1, int(threads)))
        except (ImportError, ValueError):
            pass
    try:
        return args.func(args)
    except RarefindError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
