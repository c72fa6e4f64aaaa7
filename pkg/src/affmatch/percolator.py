"""Reverse search: stored queries, input documents, hits with highlight spans.

A :class:`CriterionIndex` holds the stored queries of one criterion. Queries
are added with :meth:`CriterionIndex.store` (or :meth:`CriterionIndex.add` for
raw text), then the index is frozen into flat arrays and percolated.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .analysis import STANDARD, AnalyzerSpec, Token, analyze

log = logging.getLogger(__name__)

DEFAULT_MSM = -20


class QueryKind(str, Enum):
    PHRASE = "phrase"
    BAG = "bag"


def required_terms(n: int, msm: int) -> int:
    """Number of distinct terms a bag query of ``n`` terms needs.

    Zero or negative ``msm`` is the percentage allowed to be missing (rounded
    down, so 0 means every term); positive ``msm`` is the percentage that must
    be present (rounded down). At least one term is always required.

    >>> required_terms(7, -20), required_terms(4, -20), required_terms(10, 50)
    (6, 4, 5)
    """
    if not -100 <= msm <= 100:
        raise ValueError(f"minimum_should_match out of range: {msm}")
    if msm <= 0:
        req = n - (-msm * n) // 100
    else:
        req = (msm * n) // 100
    return min(n, max(1, req))


@dataclass(frozen=True)
class StoredQuery:
    kind: QueryKind
    terms: tuple[str, ...]
    min_should_match: int = DEFAULT_MSM
    analyzer: AnalyzerSpec = STANDARD

    def __post_init__(self):
        if not self.terms:
            raise ValueError("stored query has no terms")
        if self.kind is QueryKind.PHRASE and self.min_should_match != DEFAULT_MSM:
            # phrase ignores msm; normalize so equal phrases compare equal
            object.__setattr__(self, "min_should_match", DEFAULT_MSM)

    @property
    def unique_terms(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.terms)))

    @property
    def required(self) -> int:
        if self.kind is QueryKind.PHRASE:
            return len(self.terms)
        return required_terms(len(self.unique_terms), self.min_should_match)


@dataclass(eq=False)
class QueryDoc:
    query: StoredQuery
    ids: set[str]
    criterion: str
    source: str = ""

    def __repr__(self):
        return f"QueryDoc({self.criterion}, {self.query.kind.value}, {' '.join(self.query.terms)!r}, {sorted(self.ids)})"


@dataclass(frozen=True)
class PercolationHit:
    query_doc: QueryDoc
    matched_spans: frozenset[tuple[int, int]]

    def key(self):
        q = self.query_doc.query
        return (q.kind.value, q.terms, tuple(sorted(self.matched_spans)))


class FrozenIndexError(RuntimeError):
    pass


@dataclass
class CriterionIndex:
    criterion: str
    analyzer: AnalyzerSpec = STANDARD
    docs: list[QueryDoc] = field(default_factory=list)
    percolations: int = 0

    def __post_init__(self):
        self._by_key: dict[tuple, QueryDoc] = {
            (d.query.kind, d.query.terms): d for d in self.docs
        }
        self._arrays = None
        self._vocab: dict[str, int] = {}

    def __len__(self):
        return len(self.docs)

    @property
    def frozen(self) -> bool:
        return self._arrays is not None

    def store(self, doc: QueryDoc) -> QueryDoc:
        """Add ``doc``; a doc with the same kind and terms absorbs its ids."""
        if self.frozen:
            raise FrozenIndexError(f"index {self.criterion!r} is frozen")
        if doc.criterion != self.criterion:
            raise ValueError(f"doc for {doc.criterion!r} stored in {self.criterion!r}")
        if not doc.ids:
            raise ValueError(f"{self.criterion}: query {doc.source!r} carries no ids")
        key = (doc.query.kind, doc.query.terms)
        existing = self._by_key.get(key)
        if existing is not None:
            if existing.query.min_should_match != doc.query.min_should_match:
                raise ValueError(
                    f"{self.criterion}: conflicting minimum_should_match for {' '.join(key[1])!r}"
                )
            existing.ids |= doc.ids
            return existing
        doc = QueryDoc(doc.query, set(doc.ids), doc.criterion, doc.source)
        self._by_key[key] = doc
        self.docs.append(doc)
        return doc

    def add(self, text: str, ids, kind: QueryKind = QueryKind.PHRASE, msm: int = DEFAULT_MSM):
        """Analyze ``text`` with this index's analyzer and store it."""
        toks = tuple(t.text for t in analyze(text, self.analyzer))
        if not toks:
            raise ValueError(f"{self.criterion}: value {text!r} yields no terms")
        query = StoredQuery(QueryKind(kind), toks, msm, self.analyzer)
        return self.store(QueryDoc(query, set(ids), self.criterion, text))

    def freeze(self) -> CriterionIndex:
        if self.frozen:
            return self
        vocab: dict[str, int] = {}
        for d in self.docs:
            for t in d.query.terms:
                vocab.setdefault(t, len(vocab))
        n_terms = len(vocab)
        q_ptr = [0]
        q_terms: list[int] = []
        q_required = []
        bag_post = defaultdict(list)
        first_post = defaultdict(list)
        for qi, d in enumerate(self.docs):
            q = d.query
            if q.kind is QueryKind.BAG:
                ids = [vocab[t] for t in q.unique_terms]
                for t in ids:
                    bag_post[t].append(qi)
            else:
                ids = [vocab[t] for t in q.terms]
                first_post[ids[0]].append(qi)
            q_terms.extend(ids)
            q_ptr.append(len(q_terms))
            q_required.append(q.required)

        def csr(post):
            ptr = np.zeros(n_terms + 1, np.int64)
            for t, qs in post.items():
                ptr[t + 1] = len(qs)
            np.cumsum(ptr, out=ptr)
            flat = np.empty(ptr[-1], np.int64)
            for t, qs in post.items():
                flat[ptr[t] : ptr[t + 1]] = qs
            return ptr, flat

        bag_ptr, bag_q = csr(bag_post)
        first_ptr, first_q = csr(first_post)
        self._vocab = vocab
        self._arrays = (
            np.asarray(q_ptr, np.int64),
            np.asarray(q_terms, np.int64),
            np.asarray(q_required, np.int64),
            bag_ptr,
            bag_q,
            first_ptr,
            first_q,
        )
        log.debug("froze %s: %d docs, %d terms", self.criterion, len(self.docs), n_terms)
        return self

    def percolate(self, text: str, backend: str | None = None) -> list[PercolationHit]:
        """Every stored query satisfied by ``text``, with matched input spans."""
        self.freeze()
        self.percolations += 1
        tokens = analyze(text, self.analyzer)
        if not tokens or not self.docs:
            return []
        input_terms = np.fromiter(
            (self._vocab.get(t.text, -1) for t in tokens), np.int64, len(tokens)
        )
        unique_terms = np.unique(input_terms[input_terms >= 0])
        kernel = _kernels.BACKENDS[backend or _kernels.default_backend()]
        bag_hits, phrase_q, phrase_start = kernel(input_terms, unique_terms, *self._arrays)

        hits = []
        if bag_hits.size:
            positions = defaultdict(list)
            for tok in tokens:
                positions[tok.text].append(tok)
            for qi in bag_hits.tolist():
                doc = self.docs[qi]
                spans = frozenset(
                    (tok.start_offset, tok.end_offset)
                    for term in doc.query.unique_terms
                    for tok in positions.get(term, ())
                )
                hits.append(PercolationHit(doc, spans))
        if phrase_q.size:
            spans_by_q: dict[int, set] = defaultdict(set)
            for qi, start in zip(phrase_q.tolist(), phrase_start.tolist()):
                length = len(self.docs[qi].query.terms)
                spans_by_q[qi].update(
                    (tok.start_offset, tok.end_offset) for tok in tokens[start : start + length]
                )
            for qi, spans in spans_by_q.items():
                hits.append(PercolationHit(self.docs[qi], frozenset(spans)))
        return hits


def brute_force_percolate(index: CriterionIndex, text: str) -> list[PercolationHit]:
    """Linear scan over every stored query; the reference for :meth:`CriterionIndex.percolate`."""
    tokens = analyze(text, index.analyzer)
    texts = [t.text for t in tokens]
    hits = []
    for doc in index.docs:
        spans = _match_one(doc.query, tokens, texts)
        if spans:
            hits.append(PercolationHit(doc, frozenset(spans)))
    return hits


def _match_one(query: StoredQuery, tokens: tuple[Token, ...], texts: list[str]):
    if query.kind is QueryKind.PHRASE:
        n = len(query.terms)
        spans = set()
        for i in range(len(texts) - n + 1):
            if tuple(texts[i : i + n]) == query.terms:
                spans.update((t.start_offset, t.end_offset) for t in tokens[i : i + n])
        return spans
    wanted = set(query.terms)
    present = wanted & set(texts)
    if len(present) < query.required:
        return set()
    return {(t.start_offset, t.end_offset) for t in tokens if t.text in present}
