"""Application configuration and the shared result serializer."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path

from .registry import REGISTRY_KINDS

ENV_VAR = "AFFMATCH_CONFIG"

DATA_DIR = files("affmatch") / "data"


def default_registry_path(registry: str) -> Path:
    return Path(str(DATA_DIR / f"{registry}.jsonl"))


def default_match_config_path(registry: str) -> Path:
    return Path(str(DATA_DIR / "configs" / f"{registry}.json"))


def default_geo_path() -> Path:
    return Path(str(DATA_DIR / "geo.json"))


@dataclass
class AppConfig:
    registries: dict[str, Path] = field(
        default_factory=lambda: {k: default_registry_path(k) for k in REGISTRY_KINDS}
    )
    geo: Path | None = field(default_factory=default_geo_path)
    match_configs: dict[str, Path] = field(
        default_factory=lambda: {k: default_match_config_path(k) for k in REGISTRY_KINDS}
    )
    build_dir: Path = Path("build")
    host: str = "127.0.0.1"
    port: int = 8000
    log_level: str = "WARNING"

    @classmethod
    def load(cls, path=None) -> AppConfig:
        """Read a JSON app config from ``path`` or ``$AFFMATCH_CONFIG``; defaults otherwise.

        Relative paths in the file resolve against the file's directory.
        """
        path = path or os.environ.get(ENV_VAR)
        cfg = cls()
        if not path:
            return cfg
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent

        def p(v):
            return (base / v).resolve() if v is not None else None

        for k, v in (data.get("registries") or {}).items():
            cfg.registries[k] = p(v)
        for k, v in (data.get("match_configs") or {}).items():
            cfg.match_configs[k] = p(v)
        if "geo" in data:
            cfg.geo = p(data["geo"])
        if "build_dir" in data:
            cfg.build_dir = p(data["build_dir"])
        cfg.host = data.get("host", cfg.host)
        cfg.port = int(data.get("port", cfg.port))
        cfg.log_level = data.get("log_level", cfg.log_level)
        paths = [*cfg.registries.values(), *cfg.match_configs.values(), cfg.geo]
        missing = [str(v) for v in paths if v and not Path(v).exists()]
        if missing:
            raise FileNotFoundError(f"{path}: referenced paths do not exist: {missing}")
        return cfg


def result_payload(text: str, registry: str, results) -> dict:
    return {"input": text, "registry": registry, "results": [r.to_json() for r in results]}


def dumps(obj) -> str:
    """Stable JSON used by every output surface (CLI lines, HTTP bodies, reports)."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)
