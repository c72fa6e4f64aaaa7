"""Text analysis shared by indexing and percolation.

Two analyzer modes exist. ``standard`` splits on every character that is not
a letter, digit or combining mark, lowercases and strips diacritics.
``acronym`` does the same and additionally joins dotted single-character runs
(``C.N.R.S.`` becomes ``cnrs``) so that stored acronyms compare equal to their
punctuated spellings.

Offsets always point into the original, unfolded string.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from functools import lru_cache

STANDARD_MODE = "standard"
ACRONYM_MODE = "acronym"
MODES = (STANDARD_MODE, ACRONYM_MODE)


@dataclass(frozen=True, slots=True)
class Token:
    text: str
    position: int
    start_offset: int
    end_offset: int


@dataclass(frozen=True, slots=True)
class AnalyzerSpec:
    name: str
    mode: str = STANDARD_MODE

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown analyzer mode {self.mode!r}")


STANDARD = AnalyzerSpec("standard", STANDARD_MODE)
ACRONYM = AnalyzerSpec("acronym_analyzer", ACRONYM_MODE)

ANALYZERS: dict[str, AnalyzerSpec] = {a.name: a for a in (STANDARD, ACRONYM)}


def get_analyzer(name: str) -> AnalyzerSpec:
    try:
        return ANALYZERS[name]
    except KeyError:
        raise ValueError(f"unknown analyzer {name!r}") from None


def _is_token_char(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "LNM"


def fold(text: str, mode: str = STANDARD_MODE) -> str:
    """Lowercase and strip combining marks (NFD, then drop Mn).

    In acronym mode periods are removed as well, which is what makes a joined
    dotted acronym's source slice fold to its token text.
    """
    if mode == ACRONYM_MODE:
        text = text.replace(".", "")
    decomposed = unicodedata.normalize("NFD", text.lower())
    return "".join(c for c in decomposed if unicodedata.category(c) != "Mn")


def _scan(text: str) -> list[tuple[str, int, int]]:
    spans = []
    start = None
    for i, ch in enumerate(text):
        if _is_token_char(ch):
            if start is None:
                start = i
        elif start is not None:
            spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, len(text)))
    out = []
    for s, e in spans:
        folded = fold(text[s:e])
        if folded:
            out.append((folded, s, e))
    return out


def _join_dotted(text: str, raw: list[tuple[str, int, int]]) -> list[tuple[str, int, int]]:
    # Runs of >= 2 one-character tokens separated by exactly one "." collapse.
    out = []
    i = 0
    while i < len(raw):
        j = i
        while (
            j + 1 < len(raw)
            and len(raw[j][0]) == 1
            and len(raw[j + 1][0]) == 1
            and raw[j][2] + 1 == raw[j + 1][1]
            and text[raw[j][2]] == "."
            and raw[j][2] - raw[j][1] == 1
            and raw[j + 1][2] - raw[j + 1][1] == 1
        ):
            j += 1
        if j > i:
            out.append(("".join(t for t, _, _ in raw[i : j + 1]), raw[i][1], raw[j][2]))
        else:
            out.append(raw[i])
        i = j + 1
    return out


@lru_cache(maxsize=8192)
def _analyze(text: str, mode: str) -> tuple[Token, ...]:
    raw = _scan(text)
    if mode == ACRONYM_MODE:
        raw = _join_dotted(text, raw)
    return tuple(Token(t, pos, s, e) for pos, (t, s, e) in enumerate(raw))


def analyze(text: str, spec: AnalyzerSpec = STANDARD) -> tuple[Token, ...]:
    """Tokenize ``text`` according to ``spec``.

    >>> [t.text for t in analyze("Saint Martin d'Hères")]
    ['saint', 'martin', 'd', 'heres']
    """
    return _analyze(text, spec.mode)


def terms(text: str, spec: AnalyzerSpec = STANDARD) -> tuple[str, ...]:
    return tuple(t.text for t in analyze(text, spec))


def normalize_key(text: str) -> str:
    """Space-joined standard terms; used to compare city names and condition values."""
    return " ".join(terms(text, STANDARD))
