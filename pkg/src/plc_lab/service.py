"""HTTP service backing the browser MUSHRA client.

Endpoints:
  GET  /api/session?assessor=ID  session JSON (tokens only, no identities)
  GET  /api/audio/{token}        WAV stream for any playable token
  POST /api/ratings              JSON array of rating objects
  GET  /api/results              ranking JSON; requires the organizer key
                                 from $PLC_LAB_RESULTS_KEY

Sessions are derived deterministically from (master seed, assessor id), so a
reloading assessor gets the same trial order and tokens, and results can be
recomputed from the rating log alone.
"""

from __future__ import annotations

import hmac
import os
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field

from .errors import PlcError
from .mushra import (
    MushraSession,
    Rating,
    RatingStore,
    StimulusSet,
    build_session,
    compute_ranking,
    resolve_ratings,
)
from .seeding import seed_from_label

RESULTS_KEY_ENV = "PLC_LAB_RESULTS_KEY"


class RatingIn(BaseModel):
    assessor_id: str = Field(min_length=1)
    trial_id: str = Field(min_length=1)
    condition_id: str = Field(min_length=1)
    score: int = Field(ge=0, le=100)


class SessionService:
    """Owns the stimulus set, the deterministic session registry, and the store."""

    def __init__(
        self,
        stimuli: StimulusSet,
        trial_clips: list[str],
        systems: list[str],
        master_seed: int,
        store: RatingStore,
    ):
        self.stimuli = stimuli
        self.trial_clips = trial_clips
        self.systems = systems
        self.master_seed = master_seed
        self.store = store
        self._sessions: dict[str, MushraSession] = {}
        self._audio: dict[str, Path] = {}
        self._lock = threading.Lock()

    def session_for(self, assessor_id: str) -> MushraSession:
        with self._lock:
            session = self._sessions.get(assessor_id)
            if session is None:
                seed = seed_from_label(self.master_seed, assessor_id)
                session = build_session(self.stimuli, self.trial_clips, self.systems, assessor_id, seed)
                self._sessions[assessor_id] = session
                for token, (clip, cond) in session.audio_tokens().items():
                    self._audio[token] = self.stimuli.path(clip, cond)
            return session

    def audio_path(self, token: str) -> Path | None:
        with self._lock:
            return self._audio.get(token)

    def submit(self, ratings: list[RatingIn]) -> int:
        by_assessor: dict[str, list[Rating]] = {}
        for r in ratings:
            by_assessor.setdefault(r.assessor_id, []).append(
                Rating(r.assessor_id, r.trial_id, r.condition_id, r.score)
            )
        for assessor_id, batch in by_assessor.items():
            session = self.session_for(assessor_id)
            self.store.record_batch(batch, session)
        return len(ratings)

    def results(self):
        ratings = self.store.all_ratings()
        sessions = {r.assessor_id: self.session_for(r.assessor_id) for r in ratings}
        records = resolve_ratings(ratings, sessions)
        return compute_ranking(records, self.systems)


def _results_key_ok(request: Request) -> bool:
    expected = os.environ.get(RESULTS_KEY_ENV, "")
    if not expected:
        return False
    supplied = request.headers.get("x-results-key") or request.query_params.get("key") or ""
    return hmac.compare_digest(supplied, expected)


def create_app(service: SessionService, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="plc-lab MUSHRA service")

    @app.exception_handler(PlcError)
    async def domain_error(_request, exc: PlcError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/api/session")
    def get_session(assessor: str = Query(min_length=1)):
        return service.session_for(assessor).client_view()

    @app.get("/api/audio/{token}")
    def get_audio(token: str):
        path = service.audio_path(token)
        if path is None or not path.exists():
            raise HTTPException(status_code=404, detail="unknown audio token")
        return FileResponse(path, media_type="audio/wav")

    @app.post("/api/ratings")
    def post_ratings(ratings: list[RatingIn]):
        if not ratings:
            raise HTTPException(status_code=422, detail="empty rating batch")
        return {"accepted": service.submit(ratings)}

    @app.get("/api/results")
    def get_results(request: Request):
        if not _results_key_ok(request):
            raise HTTPException(status_code=403, detail="missing or wrong results key")
        result = service.results()
        return {
            "systems": list(result.systems),
            "wins": result.wins,
            "overall_means": result.overall_means,
            "per_trial_means": result.per_trial_means,
            "ci95": result.ci95,
            "ranking": list(result.ranking),
        }

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
