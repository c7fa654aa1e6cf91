"""Stateful streaming inference over HTTP: one session per live match.

Each pushed delivery advances the LSTM state one step and returns the
updated win probability.  The per-ball encoding and the single-step network
path are shared with offline training, so replaying a recorded innings with
no wides or no-balls reproduces the offline per-ball probabilities bit for
bit.

Streaming merge direction: offline encoding merges an illegal delivery into
the PREVIOUS legal ball, but a live stream cannot retroactively edit a step
it has already consumed, so here wides and no-balls are buffered and merged
into the NEXT legal ball.  Innings containing illegal deliveries therefore
match offline encoding structurally (same step count, runs conserved) but
not bit-exactly.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import nn
from .encode import AugmentationInputs, LegalBall, SEQUENCE_LENGTH, ball_features
from .ingest import ILLEGAL_KINDS
from .model import Checkpoint, load_checkpoint
from .prematch import feature_row, load_bundle, predict_proba

DEFAULT_IDLE_TIMEOUT_S = 6 * 3600.0


class ServeError(Exception):
    code = "ServeError"
    status = 400


class UnknownCheckpoint(ServeError):
    code = "UnknownCheckpoint"
    status = 404


class UnsupportedVariant(ServeError):
    code = "UnsupportedVariant"
    status = 409


class MissingAugmentation(ServeError):
    code = "MissingAugmentation"
    status = 422


class UnknownSession(ServeError):
    code = "UnknownSession"
    status = 404


class SessionFull(ServeError):
    code = "SessionFull"
    status = 409


class SessionClosed(ServeError):
    code = "SessionClosed"
    status = 410


class NothingToUndo(ServeError):
    code = "NothingToUndo"
    status = 409


class EncodingError(ServeError):
    code = "EncodingError"
    status = 400


@dataclass
class BallEvent:
    """One live delivery: the corpus delivery schema minus the innings
    number (a session models a single innings)."""

    over: int
    ball_in_over: int
    batting_team: str
    batsman: str
    non_striker: str
    bowler: str
    runs_off_bat: int
    extras: int = 0
    extras_kind: str = "none"
    wicket: int = 0


@dataclass
class SessionContext:
    batting_team: str
    bowling_team: str
    venue: str = ""
    season: str = ""
    gender: str = "male"
    toss_winner: str = ""
    toss_decision: str = "bat"
    target_score: int | None = None
    fi_wickets: int | None = None
    prematch_prob: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ProbabilityPoint:
    t: int
    p_win: float
    cum_runs: int
    cum_wickets: int

    def to_dict(self) -> dict:
        return {"t": self.t, "p_win": self.p_win, "cum_runs": self.cum_runs,
                "cum_wickets": self.cum_wickets}


@dataclass
class _Buffer:
    runs_off_bat: int = 0
    extras: int = 0
    wicket: int = 0

    def absorb(self, e: BallEvent) -> None:
        self.runs_off_bat += e.runs_off_bat
        self.extras += e.extras
        self.wicket |= e.wicket

    def empty(self) -> bool:
        return self.runs_off_bat == 0 and self.extras == 0 and self.wicket == 0

    def copy(self) -> "_Buffer":
        return _Buffer(self.runs_off_bat, self.extras, self.wicket)


@dataclass
class _Snapshot:
    kind: str  # "legal" | "buffered"
    t: int
    h: np.ndarray
    c: np.ndarray
    cum_runs: int
    cum_wickets: int
    history_len: int
    buffer: _Buffer


class Session:
    """Streaming state for one innings against one per-ball checkpoint."""

    def __init__(self, session_id: str, checkpoint_id: str, ckpt: Checkpoint,
                 context: SessionContext, clock=time.time):
        self.session_id = session_id
        self.checkpoint_id = checkpoint_id
        self.ckpt = ckpt
        self.context = context
        self.t = 0
        hd = ckpt.params.lstm.hidden_dim
        self.h = np.zeros(hd, dtype=np.float64)
        self.c = np.zeros(hd, dtype=np.float64)
        self.cum_runs = 0
        self.cum_wickets = 0
        self.history: list[ProbabilityPoint] = []
        self.buffer = _Buffer()
        self.undo_stack: list[_Snapshot] = []
        self.lock = threading.Lock()
        self.closed = False
        self._clock = clock
        self.last_access = clock()

    def _augmentation(self):
        cfg = self.ckpt.config
        return AugmentationInputs(
            prematch_prob=self.context.prematch_prob,
            target_score=self.context.target_score,
            fi_wickets=self.context.fi_wickets,
            enable_prematch=cfg.aug_prematch,
            enable_target=cfg.aug_target,
            enable_wickets=cfg.aug_wickets,
        )

    def _snapshot(self, kind: str) -> _Snapshot:
        return _Snapshot(
            kind=kind,
            t=self.t,
            h=self.h.copy(),
            c=self.c.copy(),
            cum_runs=self.cum_runs,
            cum_wickets=self.cum_wickets,
            history_len=len(self.history),
            buffer=self.buffer.copy(),
        )

    def push_ball(self, e: BallEvent) -> tuple[ProbabilityPoint | None, bool]:
        """Advance one step on a legal delivery; buffer wides/no-balls.

        Buffered deliveries return the previous point unchanged (None before
        the first legal ball) with the buffered flag set.
        """
        if self.t >= SEQUENCE_LENGTH:
            raise SessionFull(f"innings already has {SEQUENCE_LENGTH} legal balls")
        if e.extras_kind in ILLEGAL_KINDS:
            self.undo_stack.append(self._snapshot("buffered"))
            self.buffer.absorb(e)
            last = self.history[-1] if self.history else None
            return last, True

        snap = self._snapshot("legal")
        ball = LegalBall(
            over=e.over,
            ball_in_over=e.ball_in_over,
            runs_off_bat=e.runs_off_bat + self.buffer.runs_off_bat,
            extras=e.extras + self.buffer.extras,
            wicket=e.wicket | self.buffer.wicket,
            batting_team=e.batting_team,
            batsman=e.batsman,
            non_striker=e.non_striker,
            bowler=e.bowler,
        )
        try:
            row = ball_features(
                ball, self.t + 1, self.ckpt.layout, self.ckpt.vocabularies, self._augmentation()
            )
        except (ValueError, KeyError) as exc:
            raise EncodingError(str(exc)) from exc
        params = self.ckpt.params
        u, _ = nn.dense_forward(row, params.embed)
        h, c, _ = nn.lstm_step(u, self.h, self.c, params.lstm)
        logits, _ = nn.dense_forward(h, params.readout)
        p_win = float(nn.softmax2(logits)[1])

        self.undo_stack.append(snap)
        self.buffer = _Buffer()
        self.h, self.c = h, c
        self.t += 1
        self.cum_runs += ball.runs_off_bat + ball.extras
        self.cum_wickets += ball.wicket
        point = ProbabilityPoint(
            t=self.t, p_win=p_win, cum_runs=self.cum_runs, cum_wickets=self.cum_wickets
        )
        self.history.append(point)
        return point, False

    def undo_ball(self) -> dict:
        """Revert the most recent push (legal or buffered) from its stored
        snapshot; exact by construction."""
        if not self.undo_stack:
            raise NothingToUndo("no pushed delivery to undo")
        snap = self.undo_stack.pop()
        self.t = snap.t
        self.h = snap.h
        self.c = snap.c
        self.cum_runs = snap.cum_runs
        self.cum_wickets = snap.cum_wickets
        del self.history[snap.history_len :]
        self.buffer = snap.buffer
        return {
            "t": self.t,
            "p_win": self.history[-1].p_win if self.history else None,
        }

    def state_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "checkpoint_id": self.checkpoint_id,
            "context": self.context.to_dict(),
            "t": self.t,
            "history": [p.to_dict() for p in self.history],
        }


class CheckpointRegistry:
    """Immutable view of a directory of checkpoint and pre-match bundles.

    ``<id>.json`` files that validate as checkpoints are served; files that
    validate as boosted-model bundles back the pre-match augmentation.
    """

    def __init__(self, directory):
        self.checkpoints: dict[str, Checkpoint] = {}
        self.prematch: dict[str, tuple] = {}
        for f in sorted(Path(directory).glob("*.json")):
            try:
                self.checkpoints[f.stem] = load_checkpoint(f)
                continue
            except Exception:
                pass
            try:
                self.prematch[f.stem] = load_bundle(f)
            except Exception:
                continue

    def get(self, checkpoint_id: str) -> Checkpoint:
        if checkpoint_id not in self.checkpoints:
            raise UnknownCheckpoint(f"no checkpoint named {checkpoint_id!r}")
        return self.checkpoints[checkpoint_id]

    def listing(self) -> list[dict]:
        return [
            {
                "id": cid,
                "variant": c.config.variant.kind,
                "aug_prematch": c.config.aug_prematch,
                "aug_target": c.config.aug_target,
                "aug_wickets": c.config.aug_wickets,
                "layout_version": c.layout.layout_version,
            }
            for cid, c in sorted(self.checkpoints.items())
        ]


class SessionStore:
    def __init__(self, registry: CheckpointRegistry,
                 idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S, clock=time.time):
        self.registry = registry
        self.idle_timeout_s = idle_timeout_s
        self.clock = clock
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()

    def create(self, checkpoint_id: str, context: SessionContext) -> Session:
        ckpt = self.registry.get(checkpoint_id)
        if not ckpt.config.variant.per_ball:
            raise UnsupportedVariant(
                "streaming needs a per_ball checkpoint, got "
                f"{ckpt.config.variant.kind!r}"
            )
        cfg = ckpt.config
        if cfg.aug_target and context.target_score is None:
            raise MissingAugmentation("checkpoint expects target_score in the context")
        if cfg.aug_wickets and context.fi_wickets is None:
            raise MissingAugmentation("checkpoint expects fi_wickets in the context")
        if cfg.aug_prematch and context.prematch_prob is None:
            if cfg.prematch_model_id and cfg.prematch_model_id in self.registry.prematch:
                model, tv, vv = self.registry.prematch[cfg.prematch_model_id]
                row = feature_row(
                    context.bowling_team, context.batting_team, context.venue,
                    context.toss_winner, context.toss_decision, context.season,
                    context.gender, tv, vv,
                )
                context.prematch_prob = predict_proba(model, row)
            else:
                raise MissingAugmentation(
                    "checkpoint expects a pre-match probability and no pre-match "
                    "model is available to compute one"
                )
        session = Session(uuid.uuid4().hex, checkpoint_id, ckpt, context, clock=self.clock)
        with self.lock:
            self.sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self.lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session named {session_id!r}")
        now = self.clock()
        if session.closed or now - session.last_access > self.idle_timeout_s:
            session.closed = True
            raise SessionClosed(f"session {session_id} expired or was closed")
        session.last_access = now
        return session

    def delete(self, session_id: str) -> None:
        with self.lock:
            if session_id not in self.sessions:
                raise UnknownSession(f"no session named {session_id!r}")
            del self.sessions[session_id]


# --------------------------------------------------------------------------
# HTTP wiring
# --------------------------------------------------------------------------

try:  # request schemas at module scope so FastAPI can resolve annotations
    from pydantic import BaseModel as _BaseModel

    class ContextBody(_BaseModel):
        batting_team: str
        bowling_team: str
        venue: str = ""
        season: str = ""
        gender: str = "male"
        toss_winner: str = ""
        toss_decision: str = "bat"
        target_score: int | None = None
        fi_wickets: int | None = None
        prematch_prob: float | None = None

    class CreateSessionBody(_BaseModel):
        checkpoint_id: str
        context: ContextBody

    class BallBody(_BaseModel):
        over: int
        ball_in_over: int
        batting_team: str
        batsman: str
        non_striker: str
        bowler: str
        runs_off_bat: int
        extras: int = 0
        extras_kind: str = "none"
        wicket: int = 0

except ImportError:  # pydantic only needed for the HTTP layer
    ContextBody = CreateSessionBody = BallBody = None


def create_app(registry: CheckpointRegistry,
               idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S, clock=time.time):
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    store = SessionStore(registry, idle_timeout_s=idle_timeout_s, clock=clock)
    app = FastAPI(title="crickwin live inference")
    app.state.store = store

    @app.exception_handler(ServeError)
    async def _serve_error(request: Request, exc: ServeError):
        return JSONResponse(
            status_code=exc.status, content={"error_code": exc.code, "message": str(exc)}
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/v1/checkpoints")
    def checkpoints():
        return store.registry.listing()

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = store.create(body.checkpoint_id, SessionContext(**body.context.model_dump()))
        return {"session_id": session.session_id}

    @app.post("/v1/sessions/{session_id}/balls")
    def push_ball(session_id: str, body: BallBody):
        session = store.get(session_id)
        with session.lock:
            point, buffered = session.push_ball(BallEvent(**body.model_dump()))
        return {"point": point.to_dict() if point else None, "buffered": buffered}

    @app.post("/v1/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.undo_ball()

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            state = session.state_dict()
        return {"context": state["context"], "t": state["t"], "history": state["history"]}

    @app.delete("/v1/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        store.delete(session_id)

    return app


def run_server(checkpoint_dir, host: str = "127.0.0.1", port: int = 8000,
               idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S):
    import uvicorn

    app = create_app(CheckpointRegistry(checkpoint_dir), idle_timeout_s=idle_timeout_s)
    uvicorn.run(app, host=host, port=port, log_level="warning")
