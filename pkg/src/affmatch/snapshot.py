"""Versioned on-disk form of an :class:`IndexSet` (gzip-compressed JSON).

Stored queries are written already analyzed; loading re-stores them in the
original order and freezes, which reproduces the in-memory arrays exactly.
"""

from __future__ import annotations

import gzip
import json
import os
import tempfile
from pathlib import Path

from .analysis import get_analyzer
from .percolator import CriterionIndex, QueryDoc, QueryKind, StoredQuery
from .registry import IndexSet, RegistryEntry

FORMAT = "affmatch-snapshot"
VERSION = 1


class SnapshotError(RuntimeError):
    pass


def snapshot_path(build_dir, registry: str) -> Path:
    return Path(build_dir) / f"{registry}.snapshot.json.gz"


def dump(index_set: IndexSet) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "registry": index_set.registry,
        "entries": [
            {"id": e.id, "registry": e.registry, "fields": e.fields}
            for e in index_set.entries.values()
        ],
        "indexes": {
            name: {
                "analyzer": idx.analyzer.name,
                "docs": [
                    {
                        "kind": d.query.kind.value,
                        "terms": list(d.query.terms),
                        "msm": d.query.min_should_match,
                        "ids": sorted(d.ids),
                        "source": d.source,
                    }
                    for d in idx.docs
                ],
            }
            for name, idx in index_set.indexes.items()
        },
    }


def restore(data: dict) -> IndexSet:
    if data.get("format") != FORMAT:
        raise SnapshotError("not an affmatch snapshot")
    if data.get("version") != VERSION:
        raise SnapshotError(f"unsupported snapshot version {data.get('version')!r}")
    indexes = {}
    for name, spec in data["indexes"].items():
        analyzer = get_analyzer(spec["analyzer"])
        idx = CriterionIndex(name, analyzer)
        for d in spec["docs"]:
            q = StoredQuery(QueryKind(d["kind"]), tuple(d["terms"]), d["msm"], analyzer)
            idx.store(QueryDoc(q, set(d["ids"]), name, d.get("source", "")))
        indexes[name] = idx
    entries = {
        e["id"]: RegistryEntry(e["id"], e["registry"], {k: list(v) for k, v in e["fields"].items()})
        for e in data["entries"]
    }
    return IndexSet(data["registry"], indexes, entries).freeze()


def save(index_set: IndexSet, build_dir) -> Path:
    path = snapshot_path(build_dir, index_set.registry)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(dump(index_set), ensure_ascii=False, sort_keys=True).encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def load(build_dir, registry: str) -> IndexSet:
    path = snapshot_path(build_dir, registry)
    if not path.exists():
        raise SnapshotError(f"no snapshot for {registry!r} at {path}; run `affmatch index` first")
    try:
        with gzip.open(path, "rt", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise SnapshotError(f"unreadable snapshot {path}: {e}") from e
    return restore(data)
