"""HTTP matching service over frozen snapshots.

``POST /match`` takes ``{"query": str, "type": "country"|"grid"|"rnsr",
"conditions": [{"criterion": str, "value": str}]}`` and answers with the same
JSON object ``affmatch match`` prints. ``GET /health`` is 503 until every
snapshot has loaded.
"""

from __future__ import annotations

import json
import logging
import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import Response

from . import snapshot
from .config import dumps, result_payload
from .matcher import Condition, ConfigError, MatchConfig, match_affiliation, validate_config
from .registry import REGISTRY_KINDS

log = logging.getLogger(__name__)


def _json(obj, status: int = 200) -> Response:
    return Response(dumps(obj), status_code=status, media_type="application/json")


class Matchers:
    """Snapshots and configs, swapped in as one object once fully loaded."""

    def __init__(self, index_sets, configs):
        self.index_sets = index_sets
        self.configs = configs

    @classmethod
    def load(cls, build_dir, config_paths, registries=REGISTRY_KINDS):
        index_sets, configs = {}, {}
        for kind in registries:
            configs[kind] = MatchConfig.load(config_paths[kind])
            index_sets[kind] = snapshot.load(build_dir, kind)
            validate_config(configs[kind], index_sets[kind])
        return cls(index_sets, configs)


def create_app(build_dir=None, config_paths=None, *, matchers: Matchers | None = None,
               background: bool = True, registries=REGISTRY_KINDS) -> FastAPI:
    state = {"matchers": matchers, "error": None}

    def _load():
        try:
            state["matchers"] = Matchers.load(build_dir, config_paths, registries)
            log.info("snapshots loaded from %s", build_dir)
        except Exception as e:  # surfaced through /health
            log.exception("snapshot load failed")
            state["error"] = str(e)

    @asynccontextmanager
    async def lifespan(app):
        if state["matchers"] is None:
            if background:
                threading.Thread(target=_load, daemon=True).start()
            else:
                _load()
        yield

    app = FastAPI(title="affmatch", lifespan=lifespan)
    app.state.load = _load

    @app.get("/health")
    def health():
        if state["matchers"] is None:
            body = {"status": "loading"}
            if state["error"]:
                body = {"status": "error", "detail": state["error"]}
            return _json(body, 503)
        return _json({"status": "ok", "registries": sorted(state["matchers"].index_sets)})

    @app.post("/match")
    async def match(request: Request):
        m = state["matchers"]
        if m is None:
            return _json({"error": "indexes not loaded yet"}, 503)
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _json({"error": "body must be JSON"}, 400)
        if not isinstance(body, dict):
            return _json({"error": "body must be a JSON object"}, 400)
        query, kind = body.get("query"), body.get("type")
        if not isinstance(query, str) or not query:
            return _json({"error": "missing 'query'"}, 400)
        if kind not in REGISTRY_KINDS:
            return _json({"error": f"'type' must be one of {list(REGISTRY_KINDS)}"}, 400)
        if kind not in m.index_sets:
            return _json({"error": f"registry {kind!r} not loaded"}, 400)
        try:
            conditions = [
                Condition(c["criterion"], c["value"]) for c in body.get("conditions") or []
            ]
        except (TypeError, KeyError, ConfigError) as e:
            return _json({"error": f"bad conditions: {e}"}, 400)
        results = match_affiliation(query, conditions, m.configs[kind], m.index_sets[kind])
        return _json(result_payload(query, kind, results))

    return app
