"""HTTP session service for live human-in-the-loop labeling.

The human plays the oracle: each posted label advances the posterior and
produces the next query.  Sessions checkpoint to disk on every mutation so
a restart resumes them; the service never loads true labels.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import data, engine
from . import policies as pol
from .errors import ConfigError, ModelPickError


class ServiceError(Exception):
    """Structured HTTP error: {code, message, expected_query_id?}."""

    def __init__(self, status: int, code: str, message: str, **extra):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.extra = extra

    def body(self) -> dict:
        return {"code": self.code, "message": self.message, **self.extra}


@dataclass
class Collection:
    name: str
    matrix: data.PredictionMatrix
    display: dict[str, str] = field(default_factory=dict)


@dataclass
class ServiceConfig:
    collections: dict[str, Collection]
    checkpoint_dir: str | None = None


def load_service_config(cfg: dict, base_dir: str = ".", out_override: str | None = None) -> ServiceConfig:
    raw = cfg.get("collections")
    if not isinstance(raw, dict) or not raw:
        raise ConfigError("serve config needs a non-empty 'collections' object")
    collections: dict[str, Collection] = {}
    for name, entry in raw.items():
        if not isinstance(entry, dict) or "predictions" not in entry:
            raise ConfigError(f"collection {name!r} needs a 'predictions' path")
        path = entry["predictions"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise ConfigError(f"missing predictions file: {path}")
        display: dict[str, str] = {}
        if entry.get("display"):
            dpath = entry["display"]
            if not os.path.isabs(dpath):
                dpath = os.path.join(base_dir, dpath)
            if not os.path.exists(dpath):
                raise ConfigError(f"missing display sidecar file: {dpath}")
            with open(dpath, encoding="utf-8") as fh:
                display = {str(k): str(v) for k, v in json.load(fh).items()}
        collections[name] = Collection(
            name=name, matrix=data.load_predictions(path), display=display
        )
    ckpt = out_override or cfg.get("checkpoint_dir")
    if ckpt is not None:
        if not os.path.isabs(ckpt):
            ckpt = os.path.join(base_dir, ckpt)
        os.makedirs(ckpt, exist_ok=True)
    return ServiceConfig(collections=collections, checkpoint_dir=ckpt)


@dataclass
class Session:
    session_id: str
    collection: str
    spec: pol.PolicySpec
    spec_dict: dict
    budget: int
    seed: int
    state: pol.SelectionState
    status: str = "active"
    current_query: int | None = None
    query_seq: int = 0
    steps: list[dict] = field(default_factory=list)
    selection: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


_POLICY_KEYS = ("name", "epsilon", "class_mode", "margin_direction", "display_epsilon")


def _spec_from_payload(payload) -> tuple[pol.PolicySpec, dict]:
    if not isinstance(payload, dict) or "name" not in payload:
        raise ServiceError(400, "invalid_policy", "policy must be an object with a 'name'")
    unknown = set(payload) - set(_POLICY_KEYS)
    if unknown:
        raise ServiceError(400, "invalid_policy", f"unknown policy keys {sorted(unknown)}")
    try:
        spec = pol.PolicySpec(**payload)
    except ConfigError as exc:
        raise ServiceError(400, "invalid_policy", str(exc)) from exc
    spec_dict = {
        "name": spec.name,
        "class_mode": spec.class_mode,
        "margin_direction": spec.margin_direction,
        "display_epsilon": spec.display_epsilon,
    }
    if spec.epsilon is not None:
        spec_dict["epsilon"] = spec.epsilon
    return spec, spec_dict


class LabelingService:
    """Session store; per-session mutation is serialized by a lock."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()
        if config.checkpoint_dir:
            os.makedirs(config.checkpoint_dir, exist_ok=True)
            self._restore_all(config.checkpoint_dir)

    # ------------------------------------------------------------- helpers

    def _collection(self, name: str) -> Collection:
        coll = self.config.collections.get(name)
        if coll is None:
            raise ServiceError(404, "unknown_collection", f"no collection named {name!r}")
        return coll

    def _session(self, session_id: str) -> Session:
        sess = self.sessions.get(session_id)
        if sess is None:
            raise ServiceError(404, "unknown_session", f"no session {session_id!r}")
        return sess

    def _query_payload(self, sess: Session) -> dict | None:
        if sess.current_query is None:
            return None
        coll = self._collection(sess.collection)
        idx = int(sess.current_query)
        ex_id = coll.matrix.example_ids[idx]
        payload = {
            "query_id": sess.query_seq,
            "example_index": idx,
            "example_id": ex_id,
            "num_classes": coll.matrix.num_classes,
        }
        if ex_id in coll.display:
            payload["display"] = coll.display[ex_id]
        return payload

    def _leaderboard(self, sess: Session) -> list[dict]:
        state = sess.state
        m = state.pool.m
        t = state.step
        counts = state.correct_counts
        probs = engine.posterior_probs(state.log_probs)
        if t > 0:
            # order-free tie masses, the same chain final_selection uses
            tie = engine.posterior_probs(
                engine.posterior_from_counts(counts, t, state.spec.update_epsilon)
            )
        else:
            tie = np.full(m, 1.0 / m)
        order = sorted(range(m), key=lambda j: (-int(counts[j]), -float(tie[j]), j))
        return [
            {
                "model_index": j,
                "model_name": state.pool.model_names[j],
                "labeled_accuracy": None if t == 0 else float(counts[j] / t),
                "posterior_mass": float(probs[j]),
                "correct_count": int(counts[j]),
            }
            for j in order
        ]

    def _envelope(self, sess: Session, **extra) -> dict:
        return {
            "session_id": sess.session_id,
            "step": sess.state.step,
            "budget": sess.budget,
            "status": sess.status,
            **extra,
        }

    def _view(self, sess: Session) -> dict:
        return self._envelope(
            sess, query=self._query_payload(sess), leaderboard=self._leaderboard(sess)
        )

    def _transcript(self, sess: Session) -> dict:
        coll = self._collection(sess.collection)
        return {
            "session_id": sess.session_id,
            "collection": sess.collection,
            "policy": sess.spec_dict,
            "budget": sess.budget,
            "seed": sess.seed,
            "num_classes": coll.matrix.num_classes,
            "model_names": list(coll.matrix.model_names),
            "steps": list(sess.steps),
            "final_selection": sess.selection,
        }

    # --------------------------------------------------------- persistence

    def _checkpoint(self, sess: Session) -> None:
        if not self.config.checkpoint_dir:
            return
        payload = {
            "session_id": sess.session_id,
            "collection": sess.collection,
            "policy": sess.spec_dict,
            "budget": sess.budget,
            "seed": sess.seed,
            "status": sess.status,
            "query_seq": sess.query_seq,
            "current_query": sess.current_query,
            "steps": sess.steps,
            "selection": sess.selection,
            "rng_state": sess.state.rng.bit_generator.state,
        }
        path = os.path.join(self.config.checkpoint_dir, f"{sess.session_id}.json")
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        os.replace(tmp, path)

    def _restore_all(self, ckpt_dir: str) -> None:
        for fname in sorted(os.listdir(ckpt_dir)):
            if not fname.endswith(".json"):
                continue
            with open(os.path.join(ckpt_dir, fname), encoding="utf-8") as fh:
                payload = json.load(fh)
            self._restore_one(payload)

    def _restore_one(self, payload: dict) -> None:
        name = payload["collection"]
        if name not in self.config.collections:
            raise ConfigError(
                f"checkpointed session {payload['session_id']} references "
                f"unknown collection {name!r}"
            )
        coll = self.config.collections[name]
        spec = pol.PolicySpec(**payload["policy"])
        state = pol.init_state(coll.matrix, spec, int(payload["seed"]))
        for step in payload["steps"]:
            pol.record_label(state, int(step["example_index"]), int(step["label"]))
        # resume the exact query randomness where the service left off
        state.rng.bit_generator.state = payload["rng_state"]
        sess = Session(
            session_id=payload["session_id"],
            collection=name,
            spec=spec,
            spec_dict=payload["policy"],
            budget=int(payload["budget"]),
            seed=int(payload["seed"]),
            state=state,
            status=payload["status"],
            current_query=payload["current_query"],
            query_seq=int(payload["query_seq"]),
            steps=list(payload["steps"]),
            selection=payload.get("selection"),
        )
        self.sessions[sess.session_id] = sess

    # ------------------------------------------------------------ handlers

    def create(self, payload: dict) -> dict:
        coll = self._collection(payload.get("collection"))
        budget = payload.get("budget")
        if not isinstance(budget, int) or isinstance(budget, bool) or budget < 1:
            raise ServiceError(400, "invalid_budget", "budget must be a positive integer")
        spec, spec_dict = _spec_from_payload(payload.get("policy"))
        seed = payload.get("seed")
        if seed is None:
            seed = secrets.randbits(63)
        elif not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ServiceError(400, "invalid_seed", "seed must be a non-negative integer")
        state = pol.init_state(coll.matrix, spec, int(seed))
        sess = Session(
            session_id=secrets.token_hex(8),
            collection=coll.name,
            spec=spec,
            spec_dict=spec_dict,
            budget=budget,
            seed=int(seed),
            state=state,
        )
        sess.current_query = pol.next_query(state)
        with self._registry_lock:
            self.sessions[sess.session_id] = sess
        with sess.lock:
            self._checkpoint(sess)
            return self._view(sess)

    def get_query(self, session_id: str) -> dict:
        sess = self._session(session_id)
        with sess.lock:
            return self._envelope(sess, query=self._query_payload(sess))

    def post_label(self, session_id: str, payload: dict) -> dict:
        sess = self._session(session_id)
        with sess.lock:
            if sess.status == "finalized":
                raise ServiceError(409, "session_finalized", "session is finalized and immutable")
            if sess.status == "exhausted" or sess.current_query is None:
                raise ServiceError(409, "budget_exhausted", "no query is open on this session")
            query_id = payload.get("query_id")
            if query_id != sess.query_seq:
                raise ServiceError(
                    409,
                    "stale_query",
                    "query_id does not match the open query; refresh and retry",
                    expected_query_id=sess.query_seq,
                )
            label = payload.get("label")
            k = sess.state.pool.num_classes
            if not isinstance(label, int) or isinstance(label, bool) or not 0 <= label < k:
                raise ServiceError(
                    400, "invalid_label", f"label must be an integer in [0, {k})"
                )
            idx = int(sess.current_query)
            pol.record_label(sess.state, idx, label)
            sess.steps.append(
                {
                    "query_id": sess.query_seq,
                    "example_index": idx,
                    "example_id": sess.state.pool.example_ids[idx],
                    "label": label,
                }
            )
            if sess.state.step >= sess.budget or sess.state.num_unlabeled == 0:
                sess.status = "exhausted"
                sess.current_query = None
            else:
                sess.current_query = pol.next_query(sess.state)
                sess.query_seq += 1
            self._checkpoint(sess)
            return self._view(sess)

    def get_leaderboard(self, session_id: str) -> dict:
        sess = self._session(session_id)
        with sess.lock:
            return self._envelope(sess, leaderboard=self._leaderboard(sess))

    def finalize(self, session_id: str) -> dict:
        sess = self._session(session_id)
        with sess.lock:
            if sess.status != "finalized":
                if sess.state.step == 0:
                    raise ServiceError(
                        400, "no_evidence", "cannot finalize before any label is posted"
                    )
                fs = pol.final_selection(sess.state)
                sess.selection = {
                    "model_index": fs.model_index,
                    "model_name": fs.model_name,
                    "labeled_accuracy": fs.labeled_accuracy,
                    "posterior_mass": fs.posterior_mass,
                    "correct_counts": [int(v) for v in fs.correct_counts],
                    "posterior": [float(v) for v in fs.posterior],
                }
                sess.status = "finalized"
                sess.current_query = None
                self._checkpoint(sess)
            return self._envelope(
                sess,
                selection=sess.selection,
                leaderboard=self._leaderboard(sess),
                transcript=self._transcript(sess),
            )


def create_app(config: ServiceConfig) -> FastAPI:
    svc = LabelingService(config)
    app = FastAPI(title="modelpick labeling service")
    app.state.service = svc

    @app.exception_handler(ServiceError)
    async def _service_error(_request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.exception_handler(ModelPickError)
    async def _domain_error(_request: Request, exc: ModelPickError):
        return JSONResponse(status_code=400, content={"code": "invalid_request", "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"code": "invalid_request", "message": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "collections": sorted(svc.config.collections)}

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict) -> dict:
        return svc.create(payload)

    @app.get("/sessions/{session_id}/query")
    def get_query(session_id: str) -> dict:
        return svc.get_query(session_id)

    @app.post("/sessions/{session_id}/label")
    def post_label(session_id: str, payload: dict) -> dict:
        return svc.post_label(session_id, payload)

    @app.get("/sessions/{session_id}/leaderboard")
    def get_leaderboard(session_id: str) -> dict:
        return svc.get_leaderboard(session_id)

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str) -> dict:
        return svc.finalize(session_id)

    return app
