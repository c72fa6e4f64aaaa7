"""Gold-standard loading and micro-averaged precision/recall."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable

log = logging.getLogger(__name__)

GOLD_KINDS = ("rnsr", "siren", "grid", "country")


class GoldFormatError(ValueError):
    pass


def normalize_id(kind: str, value: str) -> str:
    value = str(value).strip()
    # ISO alpha-2 codes show up in both cases across sources
    return value.upper() if kind == "country" else value


@dataclass(frozen=True)
class GoldRecord:
    affiliation: str
    expected: dict[str, frozenset[str]]

    def __post_init__(self):
        if not self.affiliation or not self.affiliation.strip():
            raise GoldFormatError("empty affiliation")


def load_gold(path) -> list[GoldRecord]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise GoldFormatError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(data, list):
        raise GoldFormatError(f"{path}: expected a JSON array of records")
    records = []
    for i, obj in enumerate(data):
        try:
            records.append(_parse_record(obj))
        except (GoldFormatError, TypeError) as e:
            raise GoldFormatError(f"{path}: record {i}: {e}") from e
    return records


def _parse_record(obj) -> GoldRecord:
    if not isinstance(obj, dict):
        raise GoldFormatError("record is not an object")
    aff = obj.get("affiliation")
    if not isinstance(aff, str):
        raise GoldFormatError("missing 'affiliation' string")
    expected = {}
    for kind in GOLD_KINDS:
        values = obj.get(kind) or []
        if isinstance(values, str):
            values = [values]
        if not isinstance(values, list):
            raise GoldFormatError(f"{kind!r} must be a list")
        expected[kind] = frozenset(normalize_id(kind, v) for v in values if str(v).strip())
    return GoldRecord(aff, expected)


@dataclass
class RecordDiff:
    index: int
    affiliation: str
    expected: list[str]
    predicted: list[str]

    @property
    def missing(self):
        return sorted(set(self.expected) - set(self.predicted))

    @property
    def extra(self):
        return sorted(set(self.predicted) - set(self.expected))

    def to_json(self):
        return {
            "index": self.index,
            "affiliation": self.affiliation,
            "expected": self.expected,
            "predicted": self.predicted,
            "missing": self.missing,
            "extra": self.extra,
        }


@dataclass
class MetricsReport:
    registry: str
    tp: int = 0
    fp: int = 0
    fn: int = 0
    n_records: int = 0
    errors: list[RecordDiff] = field(default_factory=list)
    skipped: bool = False

    @property
    def precision(self) -> Fraction:
        denom = self.tp + self.fp
        return Fraction(self.tp, denom) if denom else Fraction(1)

    @property
    def recall(self) -> Fraction:
        denom = self.tp + self.fn
        return Fraction(self.tp, denom) if denom else Fraction(1)

    def to_json(self) -> dict:
        return {
            "registry": self.registry,
            "n_records": self.n_records,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": float(self.precision),
            "recall": float(self.recall),
            "skipped": self.skipped,
            "errors": [e.to_json() for e in self.errors],
        }


def evaluate(
    matcher: Callable[[str], Iterable[str]],
    gold: Iterable[GoldRecord],
    registry: str,
) -> MetricsReport:
    """Score ``matcher`` (affiliation -> predicted ids) against ``gold`` for one registry."""
    report = MetricsReport(registry)
    for i, rec in enumerate(gold):
        expected = rec.expected.get(registry, frozenset())
        predicted = {normalize_id(registry, p) for p in matcher(rec.affiliation)}
        report.n_records += 1
        report.tp += len(expected & predicted)
        report.fp += len(predicted - expected)
        report.fn += len(expected - predicted)
        if predicted != expected:
            report.errors.append(RecordDiff(i, rec.affiliation, sorted(expected), sorted(predicted)))
    return report


def skipped_report(registry: str, gold: list[GoldRecord]) -> MetricsReport:
    n = sum(1 for r in gold if r.expected.get(registry))
    log.warning("no %s matcher available; ignoring %d records with %s expectations", registry, n, registry)
    return MetricsReport(registry, n_records=len(gold), skipped=True)


def format_table(reports: Iterable[MetricsReport]) -> str:
    rows = [("matcher", "precision", "recall")]
    for r in reports:
        if r.skipped:
            rows.append((r.registry, "-", "-"))
        else:
            rows.append((r.registry, f"{float(r.precision):.3f}", f"{float(r.recall):.3f}"))
    w = [max(len(row[i]) for row in rows) for i in range(3)]
    return "\n".join("  ".join(cell.ljust(w[i]) for i, cell in enumerate(row)).rstrip() for row in rows)
