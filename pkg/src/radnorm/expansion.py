"""Mention expansion: abbreviation replacement and lexicon synonym append,
applied before candidate retrieval."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

from .lexicon import Lexicon, normalize_surface


class AbbreviationError(ValueError):
    pass


@dataclass
class AbbreviationDict:
    # case-folded abbreviation -> expansion text
    entries: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, token: str) -> str | None:
        return self.entries.get(token.casefold())


@dataclass(frozen=True)
class ExpandedMention:
    original: str
    expanded: str
    applied: frozenset[str] = frozenset()  # subset of {"abbreviation", "synonym"}


def load_abbreviations(source: TextIO | str | Path) -> AbbreviationDict:
    """Load a 2-column TSV (``abbreviation``, ``expansion``)."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as handle:
            return load_abbreviations(handle)
    entries: dict[str, str] = {}
    for lineno, row in enumerate(csv.reader(source, delimiter="\t"), start=1):
        if not row or not row[0].strip():
            continue
        if lineno == 1 and row[0].strip().casefold() == "abbreviation":
            continue
        if len(row) < 2 or not row[1].strip():
            raise AbbreviationError(f"line {lineno}: missing expansion")
        key = row[0].strip().casefold()
        expansion = " ".join(row[1].split())
        if key == expansion.casefold():
            raise AbbreviationError(f"line {lineno}: {row[0]!r} maps to itself")
        entries[key] = expansion
    return AbbreviationDict(entries=entries)


def expand_abbreviations(mention: str, abbrev: AbbreviationDict) -> str:
    """Replace each whitespace token matching a dictionary key by its
    expansion. Single pass: expansions are not re-expanded."""
    out = []
    for token in mention.split():
        expansion = abbrev.get(token)
        out.append(expansion if expansion is not None else token)
    return " ".join(out)


def expand_with_synonym(mention: str, lexicon: Lexicon) -> str:
    """Append the preferred name of the first concept whose synonym matches
    the whole mention. A mention that already is a preferred name stays
    unchanged; the original text is always a prefix of the result."""
    matches = lexicon.find_by_surface(mention)
    if not matches:
        return mention
    concept = lexicon.lookup(matches[0])
    assert concept is not None
    if normalize_surface(mention) == normalize_surface(concept.preferred_name):
        return mention
    return f"{mention} {concept.preferred_name}"


def expand_mention(mention: str, lexicon: Lexicon, abbrev: AbbreviationDict,
                   use_abbreviations: bool = True, use_synonyms: bool = True) -> ExpandedMention:
    """Abbreviation expansion first, then whole-mention synonym expansion."""
    normalized = " ".join(mention.split())
    applied = set()
    expanded = normalized
    if use_abbreviations:
        replaced = expand_abbreviations(expanded, abbrev)
        if replaced != expanded:
            applied.add("abbreviation")
            expanded = replaced
    if use_synonyms:
        appended = expand_with_synonym(expanded, lexicon)
        if appended != expanded:
            applied.add("synonym")
            expanded = appended
    return ExpandedMention(original=normalized, expanded=expanded,
                           applied=frozenset(applied))
