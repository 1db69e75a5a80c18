"""HTTP service for the review UI: queues, labels, adjudication, dashboards.

Every response is a pure projection of store state; every successful POST
is durable (fsync'd into the label log) before the response goes out.
JSON over /api/v1; CORS is open because the tool is local-first.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .agreement import LabelMatrix, disagreements, fleiss_kappa
from .errors import Degenerate, RarefindError
from .lexicon import find_phrase_occurrences
from .store import GROUP_REVIEWER, FRAMEWORK_CATEGORIES, Label, Project

API_PREFIX = "/api/v1"


class LabelIn(BaseModel):
    complaint_id: str
    reviewer_id: str
    verdict: Literal["relevant", "not_relevant", "unsure"]
    note: Optional[str] = None
    framework_tags: Optional[list[str]] = None


class AdjudicationIn(BaseModel):
    complaint_id: str
    verdict: Literal["relevant", "not_relevant", "unsure"]
    note: Optional[str] = None


class SelectionIn(BaseModel):
    clusters: list[int]


def _char_spans(doc, token_spans):
    """Token index ranges -> character ranges in the original narrative."""
    out = []
    for start, stop in token_spans:
        out.append([doc.token_spans[start][0], doc.token_spans[stop - 1][1]])
    return out


def create_app(project: Project, static_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="rarefind review service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    def round_or_404(iteration: int):
        rec = project.iteration_record(iteration)
        if rec is None:
            raise HTTPException(404, f"unknown round: {iteration}")
        return rec

    def open_round_or_409():
        iteration = project.open_iteration()
        if iteration is None:
            raise HTTPException(409, "no open round")
        return project.iteration_record(iteration)

    def explain_doc(iteration: int) -> Optional[dict]:
        path = project.root / "iterations" / f"iter{iteration:04d}.explain.json"
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as f:
            return json.load(f)

    def item_view(rec, cid: str) -> dict:
        complaint = project.complaints[cid]
        doc = project.tokenized(rec.config.get("preset", "light"))[cid]
        lex = project.lexicon
        tokens = lex.normalize(doc.tokens)
        ip_spans = find_phrase_occurrences(tokens, lex.ip_phrases)
        abuse_spans = find_phrase_occurrences(tokens, lex.abuse_phrases)
        verdicts = project.resolved_labels(rec.iteration).get(cid, {})
        adjudication = project.adjudicated(rec.iteration).get(cid)
        cluster = rec.cluster_of[cid]
        top_terms = []
        doc_x = explain_doc(rec.iteration)
        if doc_x and str(cluster) in doc_x.get("profiles", {}):
            top_terms = doc_x["profiles"][str(cluster)]
        return {
            "complaint_id": cid,
            "narrative": complaint.narrative,
            "highlights": {
                "ip": _char_spans(doc, ip_spans),
                "abuse": _char_spans(doc, abuse_spans),
            },
            "cluster": cluster,
            "cluster_top_terms": top_terms,
            "iteration": rec.iteration,
            "assigned_reviewers": rec.assignments[cid],
            "verdicts": verdicts,
            "adjudication": adjudication,
        }

    @app.get(API_PREFIX + "/project")
    def project_info():
        return {
            "root": str(project.root),
            "corpus_size": len(project.complaints),
            "ref_version": project.refset_version(),
            "ref_size": len(project.refset().members),
            "open_iteration": project.open_iteration(),
            "iterations": project.last_iteration(),
            "framework_categories": list(FRAMEWORK_CATEGORIES),
        }

    @app.get(API_PREFIX + "/rounds/{iteration}")
    def round_record(iteration: int):
        rec = round_or_404(iteration)
        return rec.to_json_dict()

    @app.get(API_PREFIX + "/rounds/{iteration}/queue")
    def queue(iteration: int, reviewer: str = Query(...)):
        rec = round_or_404(iteration)
        assigned = [cid for cid in rec.sampled
                    if reviewer in rec.assignments[cid]]
        if not assigned:
            raise HTTPException(403, f"reviewer {reviewer} not assigned "
                                     f"in round {iteration}")
        labeled = project.resolved_labels(iteration)
        pending = [cid for cid in sorted(assigned)
                   if reviewer not in labeled.get(cid, {})]
        return [item_view(rec, cid) for cid in pending]

    @app.post(API_PREFIX + "/labels", status_code=201)
    def post_label(body: LabelIn):
        rec = open_round_or_409()
        if body.complaint_id not in rec.assignments:
            raise HTTPException(409, f"{body.complaint_id} is not part of "
                                     f"the open round {rec.iteration}")
        if body.reviewer_id not in rec.assignments[body.complaint_id]:
            raise HTTPException(403, f"reviewer {body.reviewer_id} not "
                                     f"assigned to {body.complaint_id}")
        if body.framework_tags:
            bad = set(body.framework_tags) - set(FRAMEWORK_CATEGORIES)
            if bad:
                raise HTTPException(422, f"unknown framework tags: {sorted(bad)}")
        label = Label(body.complaint_id, body.reviewer_id, body.verdict,
                      rec.iteration, note=body.note,
                      framework_tags=body.framework_tags)
        try:
            project.append_labels([label])
        except RarefindError as e:
            raise HTTPException(409, str(e)) from None
        return label.to_record()

    @app.get(API_PREFIX + "/rounds/{iteration}/disagreements")
    def round_disagreements(iteration: int):
        rec = round_or_404(iteration)
        by_item = project.resolved_labels(iteration)
        adjudicated = project.adjudicated(iteration)
        complete = {}
        for cid in rec.sampled:
            if cid in adjudicated:
                continue
            verdicts = [by_item.get(cid, {}).get(r)
                        for r in rec.assignments[cid]]
            if all(v is not None for v in verdicts):
                complete[cid] = verdicts
        disputed = disagreements(complete)
        return [{"complaint_id": cid,
                 "verdicts": {r: by_item[cid][r] for r in rec.assignments[cid]}}
                for cid in disputed]

    @app.post(API_PREFIX + "/adjudications", status_code=201)
    def post_adjudication(body: AdjudicationIn):
        rec = open_round_or_409()
        if body.complaint_id not in rec.assignments:
            raise HTTPException(409, f"{body.complaint_id} is not part of "
                                     f"the open round {rec.iteration}")
        by_item = project.resolved_labels(rec.iteration)
        verdicts = [by_item.get(body.complaint_id, {}).get(r)
                    for r in rec.assignments[body.complaint_id]]
        disputed = (all(v is not None for v in verdicts)
                    and len(set(verdicts)) > 1)
        if not disputed:
            raise HTTPException(409, f"{body.complaint_id} is not disputed")
        label = Label(body.complaint_id, GROUP_REVIEWER, body.verdict,
                      rec.iteration, note=body.note, adjudication=True)
        project.append_labels([label])
        return label.to_record()

    @app.get(API_PREFIX + "/rounds/{iteration}/explain")
    def round_explain(iteration: int):
        round_or_404(iteration)
        doc = explain_doc(iteration)
        if doc is None:
            raise HTTPException(404, f"no explain artifacts for round "
                                     f"{iteration}; run the explain command")
        return doc

    def _round_kappa(rec) -> Optional[float]:
        by_item = project.resolved_labels(rec.iteration)
        verdicts = {}
        for cid in rec.sampled:
            vs = [by_item.get(cid, {}).get(r) for r in rec.assignments[cid]]
            if all(v is not None for v in vs):
                verdicts[cid] = vs
        if not verdicts:
            return None
        try:
            return fleiss_kappa(LabelMatrix.from_verdicts(verdicts))
        except (Degenerate, ValueError):
            return None

    @app.get(API_PREFIX + "/dashboard")
    def dashboard():
        records = project.iteration_records()
        ref_sizes = {}
        for version in range(project.refset_version() + 1):
            try:
                ref_sizes[str(version)] = len(project.refset(version).members)
            except FileNotFoundError:
                continue
        yields = {}
        kappas = {}
        summaries = []
        for rec in records:
            if rec.status == "sealed" and rec.sampled:
                yields[str(rec.iteration)] = len(rec.confirmed) / len(rec.sampled)
            kappas[str(rec.iteration)] = _round_kappa(rec)
            summaries.append({
                "iteration": rec.iteration,
                "status": rec.status,
                "ref_version_in": rec.ref_version_in,
                "ref_version_out": rec.ref_version_out,
                "selected_clusters": rec.selected_clusters,
                "ref_distribution": {str(c): f for c, f
                                     in sorted(rec.ref_distribution.items())},
                "n_sampled": len(rec.sampled),
                "n_confirmed": len(rec.confirmed),
                "estimated_yield": {str(c): f for c, f
                                    in sorted(rec.estimated_yield.items())},
            })
        return {
            "iterations": summaries,
            "ref_size_by_version": ref_sizes,
            "yield_by_iteration": yields,
            "kappa_by_round": kappas,
        }

    @app.post(API_PREFIX + "/rounds/next-selection", status_code=201)
    def next_selection(body: SelectionIn):
        project.manifest.setdefault("configs", {})["selection_override"] = (
            sorted(set(body.clusters)))
        project._save_manifest()
        return {"selection_override": project.manifest["configs"]["selection_override"]}

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")

    return app
