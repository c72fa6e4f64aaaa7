"""Strategy-driven matching of affiliation strings against an :class:`IndexSet`."""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .analysis import fold, normalize_key
from .registry import CATALOG, REGISTRY_KINDS, IndexSet, RegistryEntry

Span = tuple[int, int]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    criteria: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "criteria", tuple(self.criteria))
        if not self.criteria:
            raise ConfigError("a strategy needs at least one criterion")
        if len(set(self.criteria)) != len(self.criteria):
            raise ConfigError(f"duplicate criterion in strategy {list(self.criteria)}")
        unknown = [c for c in self.criteria if c not in CATALOG]
        if unknown:
            raise ConfigError(f"unknown criteria {unknown}")

    def __str__(self):
        return "+".join(self.criteria)


@dataclass(frozen=True)
class StrategyGroup:
    strategies: tuple[Strategy, ...]

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if not self.strategies:
            raise ConfigError("empty strategy group")


@dataclass(frozen=True)
class MatchConfig:
    registry: str
    groups: tuple[StrategyGroup, ...]

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.registry not in REGISTRY_KINDS:
            raise ConfigError(f"unknown registry {self.registry!r}")
        if not self.groups:
            raise ConfigError("match config has no strategy groups")

    @classmethod
    def from_lists(cls, registry: str, groups) -> MatchConfig:
        """Build from the nested-list form ``[[["crit", ...], ...], ...]``."""
        if not isinstance(groups, list):
            raise ConfigError("'groups' must be a list of groups")
        parsed = []
        for g in groups:
            if not isinstance(g, list) or not all(isinstance(s, list) for s in g):
                raise ConfigError(f"malformed strategy group {g!r}")
            parsed.append(StrategyGroup(tuple(Strategy(tuple(s)) for s in g)))
        return cls(registry, tuple(parsed))

    @classmethod
    def load(cls, path) -> MatchConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read match config {path}: {e}") from e
        if not isinstance(data, dict) or "groups" not in data or "registry" not in data:
            raise ConfigError(f"{path}: expected an object with 'registry' and 'groups'")
        return cls.from_lists(data["registry"], data["groups"])

    def to_lists(self):
        return [[list(s.criteria) for s in g.strategies] for g in self.groups]


@dataclass(frozen=True)
class Condition:
    criterion: str
    value: str

    def __post_init__(self):
        if self.criterion not in CATALOG:
            raise ConfigError(f"condition on unknown criterion {self.criterion!r}")


@dataclass
class MatchResult:
    registry_id: str
    evidence: dict[str, set[Span]] = field(default_factory=dict)
    matched_by: set[Strategy] = field(default_factory=set)

    def merge(self, other: MatchResult) -> None:
        for crit, spans in other.evidence.items():
            self.evidence.setdefault(crit, set()).update(spans)
        self.matched_by |= other.matched_by

    def to_json(self) -> dict:
        return {
            "id": self.registry_id,
            "evidence": {c: [list(s) for s in sorted(sp)] for c, sp in sorted(self.evidence.items())},
            "strategies": sorted(list(s.criteria) for s in self.matched_by),
        }


class _Percolations:
    """Per-call cache so a criterion shared by several strategies is percolated once."""

    def __init__(self, index_set: IndexSet, text: str):
        self.index_set = index_set
        self.text = text
        self._cache: dict[str, dict[str, set[Span]]] = {}

    def __call__(self, criterion: str) -> dict[str, set[Span]]:
        if criterion not in self._cache:
            idx = self.index_set.indexes[criterion]
            by_id: dict[str, set[Span]] = defaultdict(set)
            for hit in idx.percolate(self.text):
                for rid in hit.query_doc.ids:
                    by_id[rid].update(hit.matched_spans)
            self._cache[criterion] = by_id
        return self._cache[criterion]


def _check_strategy(strategy: Strategy, index_set: IndexSet) -> None:
    missing = [c for c in strategy.criteria if c not in index_set.indexes]
    if missing:
        raise ConfigError(
            f"strategy {strategy} uses criteria not indexed for {index_set.registry!r}: {missing}"
        )


def validate_config(config: MatchConfig, index_set: IndexSet) -> None:
    if config.registry != index_set.registry:
        raise ConfigError(f"config targets {config.registry!r}, indexes are {index_set.registry!r}")
    for group in config.groups:
        for s in group.strategies:
            _check_strategy(s, index_set)


def run_strategy(
    strategy: Strategy,
    text: str,
    index_set: IndexSet,
    conditions: Iterable[Condition] = (),
    _perc: _Percolations | None = None,
) -> list[MatchResult]:
    """Entries matched on every criterion of ``strategy`` at once."""
    _check_strategy(strategy, index_set)
    perc = _perc or _Percolations(index_set, text)
    ids: set[str] | None = None
    per_crit = {}
    for crit in strategy.criteria:
        matches = perc(crit)
        per_crit[crit] = matches
        ids = set(matches) if ids is None else ids & matches.keys()
        if not ids:
            return []
    results = [
        MatchResult(rid, {c: set(per_crit[c][rid]) for c in strategy.criteria}, {strategy})
        for rid in sorted(ids)
    ]
    return apply_conditions(results, conditions, index_set.entries)


def apply_conditions(
    results: list[MatchResult], conditions: Iterable[Condition], entries: dict[str, RegistryEntry]
) -> list[MatchResult]:
    conditions = list(conditions)
    for c in conditions:
        if c.criterion not in CATALOG:
            raise ConfigError(f"condition on unknown criterion {c.criterion!r}")
    if not conditions:
        return results
    wanted = [(c.criterion, normalize_key(c.value)) for c in conditions]

    def ok(r: MatchResult) -> bool:
        entry = entries.get(r.registry_id)
        if entry is None:
            return False
        return all(
            any(normalize_key(v) == value for v in entry.fields.get(crit, ())) for crit, value in wanted
        )

    return [r for r in results if ok(r)]


_NON_TOKEN = re.compile(r"[\W_]+")


def _segments(text: str, spans: set[Span]) -> list[str]:
    """Merge spans separated only by non-word characters; return folded, space-normalized pieces."""
    merged: list[list[int]] = []
    for s, e in sorted(spans):
        if merged and (s <= merged[-1][1] or not _NON_TOKEN.sub("", text[merged[-1][1] : s])):
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [" ".join(_NON_TOKEN.sub(" ", fold(text[s:e])).split()) for s, e in merged]


def _covered(inner: list[str], outer: list[str]) -> bool:
    return all(any(f" {b} " in f" {a} " for a in outer) for b in inner)


def _dominates(a: dict[str, list[str]], b: dict[str, list[str]]) -> bool:
    strict = False
    for crit, b_segs in b.items():
        a_segs = a.get(crit)
        if a_segs is None or not _covered(b_segs, a_segs):
            return False
        if not _covered(a_segs, b_segs):
            strict = True
    return strict


def filter_submatches(results: list[MatchResult], text: str) -> list[MatchResult]:
    """Drop results whose evidence is contained in another result's evidence.

    A result is dropped when some other result covers each of its criteria
    (every merged highlighted substring sits inside one of the other's) and
    covers at least one of them strictly. Dominance is a strict partial
    order, so every dropped result has an undominated dominator that stays.
    """
    if len(results) < 2:
        return list(results)
    segs = [{c: _segments(text, sp) for c, sp in r.evidence.items()} for r in results]
    keep = []
    for i, r in enumerate(results):
        if not any(j != i and _dominates(segs[j], segs[i]) for j in range(len(results))):
            keep.append(r)
    return keep


def match_affiliation(
    text: str,
    conditions: Iterable[Condition],
    config: MatchConfig,
    index_set: IndexSet,
) -> list[MatchResult]:
    """Try strategy groups in order; return the first non-empty filtered union."""
    validate_config(config, index_set)
    conditions = list(conditions)
    perc = _Percolations(index_set, text)
    for group in config.groups:
        merged: dict[str, MatchResult] = {}
        for strategy in group.strategies:
            for r in run_strategy(strategy, text, index_set, conditions, perc):
                if r.registry_id in merged:
                    merged[r.registry_id].merge(r)
                else:
                    merged[r.registry_id] = r
        results = filter_submatches([merged[k] for k in sorted(merged)], text)
        if results:
            return results
    return []
