"""Registries, the criterion catalog and index construction.

Registry files are JSON lines::

    {"id": "grid.425729.f", "registry": "grid", "fields": {"grid_city": ["Paris"], ...}}

Indirect criteria (``rnsr_zone_emploi``, ``rnsr_urban_unit``) hold a zone id
on the entry. At build time a zone id is expanded into one phrase query per
city belonging to that zone, so an input naming any city of the zone matches
every entry located in it.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import ACRONYM, STANDARD, AnalyzerSpec, normalize_key
from .percolator import DEFAULT_MSM, CriterionIndex, QueryKind

log = logging.getLogger(__name__)

REGISTRY_KINDS = ("country", "grid", "rnsr")

PHRASE = QueryKind.PHRASE
BAG = QueryKind.BAG


class RegistryError(ValueError):
    pass


@dataclass(frozen=True)
class CriterionSpec:
    name: str
    kind: QueryKind
    analyzer: AnalyzerSpec = STANDARD
    msm: int = DEFAULT_MSM
    source: str = ""
    derived_from: str | None = None  # entry field holding the cities of an indirect criterion
    mapping: str | None = None  # GeoMapping table used to expand it


def _c(name, kind, analyzer=STANDARD, source="", **kw):
    return CriterionSpec(name, kind, analyzer, source=source, **kw)


CATALOG: dict[str, CriterionSpec] = {
    c.name: c
    for c in [
        _c("country_alpha3", PHRASE, ACRONYM, "pycountry alpha_3"),
        _c("country_name", PHRASE, STANDARD, "pycountry name, official_name, common_name"),
        _c("country_subdivision_code", PHRASE, ACRONYM, "pycountry subdivision code"),
        _c("country_subdivision_name", PHRASE, STANDARD, "pycountry subdivision name"),
        _c("grid_acronym", PHRASE, ACRONYM, "GRID acronyms"),
        _c("grid_city", PHRASE, STANDARD, "GRID addresses.city"),
        _c("grid_country", PHRASE, STANDARD, "GRID addresses.country"),
        _c("grid_country_code", PHRASE, ACRONYM, "GRID addresses.country_code"),
        _c("grid_name", BAG, STANDARD, "GRID name, aliases, labels"),
        _c("rnsr_acronym", PHRASE, ACRONYM, "RNSR sigle"),
        _c("rnsr_city", PHRASE, STANDARD, "RNSR address city"),
        _c("rnsr_code_number", PHRASE, ACRONYM, "RNSR code numbers (UMR 5001, ...)"),
        _c("rnsr_country_code", PHRASE, ACRONYM, "RNSR address country code"),
        _c("rnsr_name", BAG, STANDARD, "RNSR names"),
        _c("rnsr_supervisor_acronym", PHRASE, ACRONYM, "RNSR supervisor acronyms"),
        _c("rnsr_supervisor_name", BAG, STANDARD, "RNSR supervisor names"),
        _c(
            "rnsr_urban_unit",
            PHRASE,
            STANDARD,
            "INSEE urban unit of RNSR city",
            derived_from="rnsr_city",
            mapping="urban_units",
        ),
        _c("rnsr_year", PHRASE, STANDARD, "RNSR creation year"),
        _c(
            "rnsr_zone_emploi",
            PHRASE,
            STANDARD,
            "INSEE employment zone of RNSR city",
            derived_from="rnsr_city",
            mapping="employment_zones",
        ),
    ]
}

# Criteria indexed for each registry. The country matcher also leans on GRID
# names/acronyms/cities, attached to the country entries they are located in.
REGISTRY_CRITERIA: dict[str, tuple[str, ...]] = {
    "country": (
        "country_alpha3",
        "country_name",
        "country_subdivision_code",
        "country_subdivision_name",
        "grid_acronym",
        "grid_city",
        "grid_name",
    ),
    "grid": (
        "grid_acronym",
        "grid_city",
        "grid_country",
        "grid_country_code",
        "grid_name",
    ),
    "rnsr": tuple(sorted(c for c in CATALOG if c.startswith("rnsr_"))),
}


@dataclass
class RegistryEntry:
    id: str
    registry: str
    fields: dict[str, list[str]] = field(default_factory=dict)


@dataclass
class GeoMapping:
    employment_zones: dict[str, str] = field(default_factory=dict)
    urban_units: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.employment_zones = {normalize_key(k): v for k, v in self.employment_zones.items()}
        self.urban_units = {normalize_key(k): v for k, v in self.urban_units.items()}
        self._names: dict[str, dict[str, list[str]]] = {
            "employment_zones": defaultdict(list),
            "urban_units": defaultdict(list),
        }

    @classmethod
    def load(cls, path) -> GeoMapping:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        geo = cls(data.get("employment_zones", {}), data.get("urban_units", {}))
        # keep original spellings for the queries built from zones
        for table in ("employment_zones", "urban_units"):
            for city, zone in data.get(table, {}).items():
                geo._names[table][zone].append(city)
        return geo

    def table(self, name: str) -> dict[str, str]:
        return getattr(self, name)

    def cities(self, table: str, zone: str) -> list[str]:
        """City names belonging to ``zone``, in their original spelling."""
        names = self._names[table].get(zone)
        if names:
            return names
        return [k for k, v in self.table(table).items() if v == zone]


def load_registry(path, registry: str) -> list[RegistryEntry]:
    if registry not in REGISTRY_KINDS:
        raise RegistryError(f"unknown registry kind {registry!r}; expected one of {REGISTRY_KINDS}")
    path = Path(path)
    entries = []
    seen = set()
    with path.open(encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entry = _parse_entry(obj)
            except (json.JSONDecodeError, TypeError, KeyError, ValueError) as e:
                raise RegistryError(f"{path}:{lineno}: malformed registry line: {e}") from e
            if entry.registry != registry:
                raise RegistryError(
                    f"{path}:{lineno}: entry {entry.id!r} belongs to {entry.registry!r}, not {registry!r}"
                )
            if entry.id in seen:
                raise RegistryError(f"{path}:{lineno}: duplicate id {entry.id!r}")
            seen.add(entry.id)
            entries.append(entry)
    log.info("loaded %d %s entries from %s", len(entries), registry, path)
    return entries


def _parse_entry(obj) -> RegistryEntry:
    if not isinstance(obj, dict):
        raise TypeError("line is not a JSON object")
    rid = str(obj["id"]).strip()
    if not rid:
        raise ValueError("empty id")
    fields = {}
    for name, values in (obj.get("fields") or {}).items():
        if isinstance(values, str):
            values = [values]
        if not isinstance(values, list):
            raise TypeError(f"field {name!r} must be a list of strings")
        cleaned = [str(v).strip() for v in values if v is not None and str(v).strip()]
        if cleaned:
            fields[name] = cleaned
    return RegistryEntry(rid, obj["registry"], fields)


def derive_indirect(entries, mapping: GeoMapping, catalog=CATALOG) -> list[RegistryEntry]:
    """Attach zone ids of indirect criteria to entries whose city is mapped."""
    indirect = [c for c in catalog.values() if c.derived_from]
    unmapped = 0
    out = []
    for entry in entries:
        fields = {k: list(v) for k, v in entry.fields.items()}
        for spec in indirect:
            table = mapping.table(spec.mapping)
            for city in entry.fields.get(spec.derived_from, ()):
                zone = table.get(normalize_key(city))
                if zone is None:
                    unmapped += 1
                    continue
                values = fields.setdefault(spec.name, [])
                if zone not in values:
                    values.append(zone)
        out.append(RegistryEntry(entry.id, entry.registry, fields))
    if unmapped:
        log.info("derive_indirect: %d city lookups had no zone", unmapped)
    return out


@dataclass
class IndexSet:
    """The frozen criterion indexes of one registry, plus its entries."""

    registry: str
    indexes: dict[str, CriterionIndex]
    entries: dict[str, RegistryEntry]

    def sizes(self) -> dict[str, int]:
        return {name: len(idx) for name, idx in self.indexes.items()}

    def freeze(self) -> IndexSet:
        for idx in self.indexes.values():
            idx.freeze()
        return self


def build_indexes(
    entries,
    catalog=CATALOG,
    criteria=None,
    geo: GeoMapping | None = None,
) -> dict[str, CriterionIndex]:
    """One index per criterion; each distinct analyzed value becomes one query doc."""
    if criteria is None:
        criteria = list(catalog)
    indexes = {}
    for name in criteria:
        spec = catalog[name]
        idx = CriterionIndex(name, spec.analyzer)
        indexes[name] = idx
        missing_zones = 0
        for entry in entries:
            for value in entry.fields.get(name, ()):
                texts = [value]
                if spec.derived_from:
                    texts = geo.cities(spec.mapping, value) if geo is not None else []
                    if not texts:
                        missing_zones += 1
                for text in texts:
                    try:
                        idx.add(text, {entry.id}, spec.kind, spec.msm)
                    except ValueError as e:
                        raise RegistryError(f"entry {entry.id!r}: {e}") from e
        if missing_zones:
            log.warning("%s: %d zone ids could not be expanded to cities", name, missing_zones)
    return indexes


def build_index_set(registry: str, entries, geo: GeoMapping | None = None) -> IndexSet:
    if registry not in REGISTRY_KINDS:
        raise RegistryError(f"unknown registry kind {registry!r}")
    if geo is not None:
        entries = derive_indirect(entries, geo)
    indexes = build_indexes(entries, criteria=REGISTRY_CRITERIA[registry], geo=geo)
    return IndexSet(registry, indexes, {e.id: e for e in entries}).freeze()
