"""HTTP session service.

Thin request/response layer over SessionEngine: versioned JSON bodies,
stable error codes, and per-session request serialization. Sessions expire
after a TTL; the in-memory store backs tests and the sqlite store survives
restarts (the retained search tree does not, which only affects move choice
after a restart mid-dialogue).

See docs/protocol.md for the byte-exact message schemas.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import time
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from aps.concerns import UserProfile
from aps.dialogue import canonical_json
from aps.graph import ArgumentGraph, load_graph
from aps.sessions import EngineConfig, SessionEngine, SessionError
from aps.usermodel import UserModel


class SessionStore:
    """Session persistence: serialized state with TTL expiry.

    Live SessionEngine objects (with their search trees) stay in process;
    the store keeps the durable part so a restarted service can resume a
    dialogue from its transcript.
    """

    def __init__(self, ttl_seconds: float = 86400.0):
        self.ttl_seconds = ttl_seconds

    def put(self, session_id: str, state: dict) -> None:
        raise NotImplementedError

    def get(self, session_id: str) -> dict | None:
        raise NotImplementedError

    def purge(self, now: float | None = None) -> None:
        raise NotImplementedError


class InMemorySessionStore(SessionStore):
    def __init__(self, ttl_seconds: float = 86400.0):
        super().__init__(ttl_seconds)
        self._data: dict[str, tuple[float, dict]] = {}

    def put(self, session_id: str, state: dict) -> None:
        self._data[session_id] = (time.time() + self.ttl_seconds, state)

    def get(self, session_id: str) -> dict | None:
        entry = self._data.get(session_id)
        if entry is None:
            return None
        expires, state = entry
        if expires < time.time():
            del self._data[session_id]
            return None
        return state

    def purge(self, now: float | None = None) -> None:
        now = now if now is not None else time.time()
        for key in [k for k, (expires, _) in self._data.items() if expires < now]:
            del self._data[key]


class SqliteSessionStore(SessionStore):
    def __init__(self, path: str | Path, ttl_seconds: float = 86400.0):
        super().__init__(ttl_seconds)
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._lock = threading.Lock()
        with self._lock:
            self._conn.execute(
                "CREATE TABLE IF NOT EXISTS sessions"
                " (id TEXT PRIMARY KEY, expires REAL, state TEXT)"
            )
            self._conn.commit()

    def put(self, session_id: str, state: dict) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO sessions (id, expires, state) VALUES (?, ?, ?)",
                (session_id, time.time() + self.ttl_seconds, json.dumps(state)),
            )
            self._conn.commit()

    def get(self, session_id: str) -> dict | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT expires, state FROM sessions WHERE id = ?", (session_id,)
            ).fetchone()
        if row is None:
            return None
        expires, state = row
        if expires < time.time():
            return None
        return json.loads(state)

    def purge(self, now: float | None = None) -> None:
        now = now if now is not None else time.time()
        with self._lock:
            self._conn.execute("DELETE FROM sessions WHERE expires < ?", (now,))
            self._conn.commit()


# --- request/response bodies ---------------------------------------------------

class CreateSessionRequest(BaseModel):
    v: int = 1
    stance: float
    topic: str | None = None
    graph: str | None = None
    strategy: Literal["advanced", "baseline"] = "advanced"
    profile: dict = Field(default_factory=dict)
    seed: int | None = None
    debug: bool = False


class SelectionBody(BaseModel):
    argument: str
    counterarguments: list[str] | None = None
    null: Literal["acc", "rej"] | None = None


class SubmitMoveRequest(BaseModel):
    v: int = 1
    selections: list[SelectionBody]


class RecordBeliefRequest(BaseModel):
    v: int = 1
    phase: Literal["before", "after"]
    value: float


class ServiceConfig:
    """Service wiring: graphs, stance-to-graph topics, models, defaults."""

    def __init__(
        self,
        graphs: dict[str, ArgumentGraph],
        topics: dict[str, tuple[str, str]] | None = None,
        default_topic: str | None = None,
        user_model: UserModel | None = None,
        engine: EngineConfig | None = None,
        store: SessionStore | None = None,
    ):
        self.graphs = graphs
        self.topics = topics or {}
        self.default_topic = default_topic or (next(iter(self.topics)) if self.topics else None)
        self.user_model = user_model or UserModel()
        self.engine = engine or EngineConfig()
        self.store = store or InMemorySessionStore(self.engine.ttl_seconds)

    @classmethod
    def from_file(cls, path: str | Path, *, env: dict | None = None) -> "ServiceConfig":
        """Load a config file, honoring APS_* environment overrides."""
        import os

        env = dict(os.environ if env is None else env)
        base = Path(path).parent
        data = json.loads(Path(path).read_text())

        def resolve(value: str) -> Path:
            p = Path(value)
            return p if p.is_absolute() else base / p

        graph_dir = env.get("APS_GRAPH_DIR")
        graphs = {}
        for graph_id, graph_path in data.get("graphs", {}).items():
            p = Path(graph_dir) / Path(graph_path).name if graph_dir else resolve(graph_path)
            graphs[graph_id] = load_graph(p)
        topics = {
            t["id"]: (t["when_positive"], t["when_negative"])
            for t in data.get("topics", [])
        }
        models = data.get("models", {})
        mixtures = {}
        rankings: list = []
        trees = None
        if "mixtures" in models or env.get("APS_MIXTURES"):
            from aps.beliefs import load_mixture_bundle

            mixtures = load_mixture_bundle(env.get("APS_MIXTURES") or resolve(models["mixtures"]))
        if "rankings" in models or env.get("APS_RANKINGS"):
            from aps.concerns import load_rankings

            rankings = load_rankings(env.get("APS_RANKINGS") or resolve(models["rankings"]))
        if "trees" in models or env.get("APS_TREES"):
            from aps.concerns import PreferenceTreeBundle

            trees = PreferenceTreeBundle.load(env.get("APS_TREES") or resolve(models["trees"]))
        defaults = data.get("defaults", {})
        engine = EngineConfig(
            simulations=int(env.get("APS_SIMULATIONS", defaults.get("simulations", 1000))),
            max_move_size=int(defaults.get("max_move_size", 6)),
            ttl_seconds=float(defaults.get("session_ttl_seconds", 86400.0)),
        )
        store: SessionStore | None = None
        if defaults.get("session_db"):
            store = SqliteSessionStore(resolve(defaults["session_db"]), engine.ttl_seconds)
        return cls(
            graphs=graphs,
            topics=topics,
            default_topic=data.get("default_topic"),
            user_model=UserModel(mixtures=mixtures, rankings=rankings, trees=trees),
            engine=engine,
            store=store,
        )


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="persuasion dialogue service")
    engines: dict[str, SessionEngine] = {}
    locks: dict[str, threading.Lock] = {}
    registry_lock = threading.Lock()

    def error(status: int, code: str, message: str, condition: int | None = None):
        body = {"v": 1, "error": {"code": code, "message": message}}
        if condition is not None:
            body["error"]["condition"] = condition
        return JSONResponse(status_code=status, content=body)

    @app.exception_handler(SessionError)
    async def session_error_handler(request: Request, exc: SessionError):
        status = 404 if exc.code == "unknown_session" else 422
        return error(status, exc.code, str(exc), exc.condition)

    def lock_for(session_id: str) -> threading.Lock:
        with registry_lock:
            return locks.setdefault(session_id, threading.Lock())

    def engine_for(session_id: str) -> SessionEngine:
        stored = config.store.get(session_id)
        if stored is None:
            engines.pop(session_id, None)
            raise SessionError("unknown_session", f"no session {session_id!r}")
        engine = engines.get(session_id)
        if engine is None:
            engine = revive(session_id, stored)
            engines[session_id] = engine
        return engine

    def revive(session_id: str, stored: dict) -> SessionEngine:
        """Resume a stored session after a restart.

        The dialogue state comes back exactly; the search tree and random
        streams restart, so later move choice can differ from an
        uninterrupted run (see README).
        """
        from aps.dialogue import dialogue_from_transcript

        graph_id = stored["graph"]
        graph = config.graphs.get(graph_id)
        if graph is None:
            raise SessionError("unknown_graph", f"graph {graph_id!r} no longer registered")
        engine = SessionEngine(
            graph,
            graph_id,
            config.user_model,
            strategy=stored["strategy"],
            stance=stored["stance"],
            seed=stored["seed"],
            config=config.engine,
            session_id=session_id,
        )
        engine.dialogue = dialogue_from_transcript(stored["transcript"], graph)
        engine.belief_before = stored["belief_before"]
        engine.belief_after = stored["belief_after"]
        return engine

    def persist(engine: SessionEngine) -> None:
        config.store.put(
            engine.session_id,
            {
                "graph": engine.graph_id,
                "strategy": engine.strategy,
                "seed": engine.seed,
                "stance": engine.stance,
                "belief_before": engine.belief_before,
                "belief_after": engine.belief_after,
                "transcript": engine.transcript(),
            },
        )

    def pick_graph(body: CreateSessionRequest) -> str:
        if body.graph is not None:
            if body.graph not in config.graphs:
                raise SessionError("unknown_graph", f"no graph {body.graph!r}")
            return body.graph
        topic = body.topic or config.default_topic
        if topic is None or topic not in config.topics:
            raise SessionError("unknown_graph", f"no topic {topic!r}")
        when_positive, when_negative = config.topics[topic]
        return when_positive if body.stance > 0 else when_negative

    @app.get("/api/graphs")
    def list_graphs():
        return {
            "v": 1,
            "graphs": [
                {
                    "id": graph_id,
                    "goal": graph.goal,
                    "goal_text": graph.argument(graph.goal).text,
                    "nodes": len(graph),
                }
                for graph_id, graph in sorted(config.graphs.items())
            ],
            "topics": [
                {"id": topic, "when_positive": pos, "when_negative": neg}
                for topic, (pos, neg) in sorted(config.topics.items())
            ],
        }

    @app.post("/api/sessions")
    def create_session(body: CreateSessionRequest):
        graph_id = pick_graph(body)
        try:
            profile = UserProfile.from_record(body.profile) if body.profile else None
        except (ValueError, TypeError) as exc:
            raise SessionError("invalid_profile", str(exc)) from None
        engine = SessionEngine(
            config.graphs[graph_id],
            graph_id,
            config.user_model,
            strategy=body.strategy,
            stance=body.stance,
            profile=profile,
            seed=body.seed if body.seed is not None else 0,
            debug=body.debug,
            config=config.engine,
        )
        engines[engine.session_id] = engine
        persist(engine)
        return {
            "v": 1,
            "session": engine.session_id,
            "graph": graph_id,
            "goal": engine.goal_text(),
            "system_move": {"step": 1, "arguments": [engine.graph.goal]},
            "listings": engine.listings(),
            "terminated": engine.terminated,
            "status": engine.dialogue.status.value if engine.dialogue.status else "in_progress",
        }

    @app.post("/api/sessions/{session_id}/moves")
    def submit_move(session_id: str, body: SubmitMoveRequest):
        with lock_for(session_id):
            engine = engine_for(session_id)
            result = engine.submit([s.model_dump(exclude_none=True) for s in body.selections])
            persist(engine)
        result = {"v": 1, **result}
        if not engine.debug or result["trace"] is None:
            result.pop("trace")
        return result

    @app.post("/api/sessions/{session_id}/belief")
    def record_belief(session_id: str, body: RecordBeliefRequest):
        with lock_for(session_id):
            engine = engine_for(session_id)
            engine.record_belief(body.phase, body.value)
            persist(engine)
        return {"v": 1, "recorded": True, "phase": body.phase}

    @app.get("/api/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        engine = engine_for(session_id)
        record = engine.transcript()
        return {
            "v": 1,
            "session": session_id,
            "transcript": record,
            "canonical": canonical_json(record),
            "belief_before": engine.belief_before,
            "belief_after": engine.belief_after,
        }

    return app
