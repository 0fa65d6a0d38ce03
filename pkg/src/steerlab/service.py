"""Local HTTP service: serves trialspec documents to the browser runner,
drives each session's protocol state machine, ingests trajlog uploads, and
computes measures and fit reports on demand.

Persistence is flat files under the data directory: one folder per session
holding the plan, raw uploaded logs, and the growing measures CSV.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import metrics
from .curvegen import read_trialset_documents, trialspec_from_document
from .fitting import fit_model, fit_report_document
from .geometry import Tunnel, nl_integral
from .models import FORM_IDS, ModelForm, TrialFeatures
from .session import BREAK_MS, PlanError, SessionState, advance, make_plan, tutorial_step

API = "/api/v1"


class SessionRequest(BaseModel):
    participant_id: str
    seed: int = 0
    reversed: bool = False


class LogUpload(BaseModel):
    trajlog: str


@dataclass
class _TrialAssets:
    doc: dict
    doc_flipped: dict
    tunnel: Tunnel
    tunnel_flipped: Tunnel
    nl: float


@dataclass
class _Session:
    state: SessionState
    directory: Path
    lock: threading.Lock = field(default_factory=threading.Lock)
    upload_seq: int = 0
    measure_rows: List[tuple] = field(default_factory=list)  # (trial_id, pid, TrialMeasures)


def _flipped_document(doc: dict) -> dict:
    out = dict(doc)
    out["flipped"] = not doc["flipped"]
    out["polyline"] = [[x, -y] for x, y in doc["polyline"]]
    return out


def _load_assets(trial_docs: List[dict], tunnel_samples: int) -> Dict[str, _TrialAssets]:
    assets = {}
    for doc in trial_docs:
        spec = trialspec_from_document(doc)
        curve = spec.realize(tunnel_samples)
        tunnel = Tunnel(curve, spec.width)
        assets[doc["trial_id"]] = _TrialAssets(
            doc=doc,
            doc_flipped=_flipped_document(doc),
            tunnel=tunnel,
            tunnel_flipped=tunnel.flipped(),
            nl=nl_integral(curve),
        )
    return assets


def create_app(
    trials,
    data_dir,
    *,
    break_ms: float = BREAK_MS,
    clock_ms: Optional[Callable[[], float]] = None,
    tunnel_samples: int = 8192,
) -> FastAPI:
    """Build the service around a trial set (path or loaded documents)."""
    trial_docs = trials if isinstance(trials, list) else read_trialset_documents(trials)
    assets = _load_assets(trial_docs, tunnel_samples)
    data_root = Path(data_dir)
    (data_root / "sessions").mkdir(parents=True, exist_ok=True)
    now_ms = clock_ms or (lambda: time.monotonic() * 1000.0)

    app = FastAPI(title="steerlab service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: Dict[str, _Session] = {}
    app.state.sessions = sessions
    app.state.break_ms = break_ms

    def get_session(session_id: str) -> _Session:
        if session_id not in sessions:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return sessions[session_id]

    def maybe_finish_break(state: SessionState) -> Optional[float]:
        """Returns remaining break ms, advancing the machine when elapsed."""
        if state.phase != "break":
            return None
        if state.break_started_ms is None:
            state.break_started_ms = now_ms()
        elapsed = now_ms() - state.break_started_ms
        if elapsed >= break_ms:
            advance(state, "break_elapsed", elapsed_ms=elapsed, break_ms=break_ms)
            return None
        return break_ms - elapsed

    def next_payload(session: _Session) -> dict:
        state = session.state
        remaining = maybe_finish_break(state)
        payload: dict = {"phase": state.phase}
        if state.phase == "break":
            payload["break_remaining_ms"] = remaining
            return payload
        if state.phase in ("done", "failed_tutorial"):
            return payload
        planned = state.current_trial()
        asset = assets[planned.trial_id]
        payload["trial"] = asset.doc_flipped if planned.flipped else asset.doc
        payload["flipped"] = planned.flipped
        payload["repetition"] = state.repetition_index()
        if state.phase == "tutorial":
            payload["tutorial_trials_completed"] = state.tutorial_trials_done
        else:
            payload["block"] = state.block_index
            payload["trial_in_block"] = state.trial_in_block
        return payload

    @app.get(API + "/trials")
    def list_trials():
        return [assets[tid].doc for tid in sorted(assets)]

    @app.get(API + "/trials/{trial_id}")
    def get_trial(trial_id: str):
        if trial_id not in assets:
            raise HTTPException(status_code=404, detail=f"unknown trial {trial_id!r}")
        return assets[trial_id].doc

    @app.post(API + "/sessions", status_code=201)
    def create_session(req: SessionRequest):
        try:
            plan = make_plan(req.participant_id, sorted(assets), req.seed, req.reversed)
        except PlanError as exc:
            raise HTTPException(status_code=422, detail={"reason": str(exc)})
        session_id = uuid.uuid4().hex[:12]
        directory = data_root / "sessions" / session_id
        (directory / "logs").mkdir(parents=True)
        (directory / "plan.json").write_text(
            json.dumps(plan.to_document(), indent=2), encoding="utf-8"
        )
        sessions[session_id] = _Session(state=SessionState(plan=plan), directory=directory)
        return {"session_id": session_id, "plan": plan.to_document()}

    @app.get(API + "/sessions/{session_id}/next")
    def next_trial(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return next_payload(session)

    @app.post(API + "/sessions/{session_id}/logs")
    def upload_log(session_id: str, upload: LogUpload):
        session = get_session(session_id)
        with session.lock:
            state = session.state
            remaining = maybe_finish_break(state)
            if state.phase == "break":
                raise HTTPException(
                    status_code=409,
                    detail={"reason": "break_not_elapsed", "remaining_ms": remaining},
                )
            if state.phase in ("done", "failed_tutorial"):
                raise HTTPException(
                    status_code=409, detail={"reason": f"session is {state.phase}"}
                )
            try:
                traj = metrics.parse_trajlog(upload.trajlog)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail={"reason": str(exc)})
            planned = state.current_trial()
            if traj.trial_id != planned.trial_id or traj.flipped != planned.flipped:
                raise HTTPException(
                    status_code=422,
                    detail={
                        "reason": "log does not match the scheduled trial",
                        "expected": {"trial_id": planned.trial_id, "flipped": planned.flipped},
                        "got": {"trial_id": traj.trial_id, "flipped": traj.flipped},
                    },
                )
            if traj.participant_id != state.plan.participant_id:
                raise HTTPException(
                    status_code=422,
                    detail={
                        "reason": "participant does not match the session",
                        "expected": state.plan.participant_id,
                        "got": traj.participant_id,
                    },
                )
            asset = assets[traj.trial_id]
            tunnel = asset.tunnel_flipped if planned.flipped else asset.tunnel
            try:
                resampled = metrics.resample(traj)
                measures = metrics.trial_measures(resampled, tunnel)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail={"reason": str(exc)})

            phase_before = state.phase
            session.upload_seq += 1
            log_name = f"{session.upload_seq:04d}_{phase_before}_{traj.trial_id}.trajlog"
            (session.directory / "logs" / log_name).write_text(
                upload.trajlog, encoding="utf-8"
            )

            decision = None
            if phase_before == "tutorial":
                _, decision = tutorial_step(state, measures.v_avg, measures.exits)
            else:
                session.measure_rows.append(
                    (traj.trial_id, traj.participant_id, measures)
                )
                metrics.write_measures_csv(
                    session.measure_rows, session.directory / "measures.csv"
                )
                advance(state, "trial_completed")
                if state.phase == "break":
                    state.break_started_ms = now_ms()

            return {
                "measures": {
                    "mt_ms": measures.mt,
                    "opm": measures.opm,
                    "v_avg": measures.v_avg,
                    "exits": measures.exits,
                    "w_e": measures.w_e,
                    "path_px": measures.path_distance,
                },
                "phase": state.phase,
                "tutorial_decision": decision,
                "persisted_log": log_name,
            }

    @app.get(API + "/sessions/{session_id}/report")
    def report(session_id: str):
        session = get_session(session_id)
        with session.lock:
            rows = list(session.measure_rows)
        by_type: Dict[str, List[float]] = {}
        table = []
        for trial_id, pid, m in rows:
            table.append(
                {
                    "trial_id": trial_id,
                    "participant_id": pid,
                    "mt_ms": m.mt,
                    "opm": m.opm,
                    "v_avg": m.v_avg,
                    "exits": m.exits,
                    "w_e": m.w_e,
                    "path_px": m.path_distance,
                }
            )
            by_type.setdefault(trial_id, []).append(m.mt)

        summary = {
            tid: {
                "mt_ms": [float(np.mean(v)), float(np.std(v, ddof=1)) if len(v) > 1 else 0.0],
                "n": len(v),
            }
            for tid, v in sorted(by_type.items())
        }
        fits = None
        if len(by_type) == len(assets):
            features = [
                TrialFeatures(
                    L=assets[tid].doc["length_px"],
                    K=assets[tid].doc["total_curvature"],
                    nl=assets[tid].nl,
                    mt_mean=float(np.mean(by_type[tid])),
                    trial_id=tid,
                )
                for tid in sorted(by_type)
            ]
            results = []
            for form_id in FORM_IDS:
                try:
                    results.append(fit_model(ModelForm(form_id), features))
                except Exception:
                    continue
            if len(results) >= 2:
                fits = fit_report_document(results)
        return {"measures": table, "summary": summary, "fits": fits}

    return app
