"""RadLex-style lexicon: parsing, validation, and surface lookup.

The canonical on-disk format is a 5-column TSV (``rid``, ``preferred_name``,
``synonyms``, ``parents``, ``definition``) with pipe-separated multi-value
cells. ``import_radlex_release`` adapts the official release columns onto it.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

RID_PATTERN = re.compile(r"^RID[0-9]+$")

#: Sentinel concept id for unlinkable ("RID-less") mentions. Never stored in a Lexicon.
UNLINKABLE = "XXXXX"

TSV_HEADER = ["rid", "preferred_name", "synonyms", "parents", "definition"]


class LexiconError(ValueError):
    """Raised for malformed or inconsistent lexicon input."""


def is_valid_concept_id(value: str) -> bool:
    return value == UNLINKABLE or RID_PATTERN.match(value) is not None


def rid_number(concept_id: str) -> int:
    """Numeric part of an RID; the sentinel sorts after every real RID."""
    if concept_id == UNLINKABLE:
        return 2**63
    if not RID_PATTERN.match(concept_id):
        raise LexiconError(f"not a concept id: {concept_id!r}")
    return int(concept_id[3:])


def normalize_surface(text: str) -> str:
    """Case-fold and collapse whitespace runs for surface matching."""
    return " ".join(text.split()).casefold()


@dataclass(frozen=True)
class Concept:
    id: str
    preferred_name: str
    synonyms: tuple[str, ...] = ()
    parents: tuple[str, ...] = ()
    definition: Optional[str] = None


@dataclass
class Lexicon:
    concepts: dict[str, Concept] = field(default_factory=dict)
    # case-folded synonym text -> concept ids, ascending RID number
    synonym_index: dict[str, list[str]] = field(default_factory=dict)
    # case-folded preferred name -> concept ids, ascending RID number
    name_index: dict[str, list[str]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.concepts)

    def lookup(self, concept_id: str) -> Optional[Concept]:
        """Stored concept for an id; the unlinkable sentinel is never stored."""
        return self.concepts.get(concept_id)

    def find_by_surface(self, surface: str) -> list[str]:
        """Concept ids whose preferred name or synonym exactly matches ``surface``.

        Matching is case-folded and whitespace-normalized. Preferred-name
        matches come before synonym matches; within each group ids are in
        ascending RID order; duplicates are removed.
        """
        key = normalize_surface(surface)
        if not key:
            return []
        result = list(self.name_index.get(key, ()))
        seen = set(result)
        for cid in self.synonym_index.get(key, ()):
            if cid not in seen:
                seen.add(cid)
                result.append(cid)
        return result

    def class_of(self, concept_id: str) -> Optional[str]:
        """Preferred name of the concept's first Is-A parent, if any."""
        concept = self.concepts.get(concept_id)
        if concept is None or not concept.parents:
            return None
        parent = self.concepts.get(concept.parents[0])
        return parent.preferred_name if parent else None


def _make_concept(rid: str, name: str, synonyms: Iterable[str], parents: Iterable[str],
                  definition: Optional[str]) -> Concept:
    name = name.strip()
    if not name:
        raise LexiconError(f"{rid}: empty preferred name")
    name_folded = name.casefold()
    seen: set[str] = set()
    kept: list[str] = []
    for syn in synonyms:
        syn = syn.strip()
        if not syn:
            continue
        folded = syn.casefold()
        if folded == name_folded or folded in seen:
            continue
        seen.add(folded)
        kept.append(syn)
    parent_list = []
    for parent in parents:
        parent = parent.strip()
        if not parent:
            continue
        if parent == rid:
            raise LexiconError(f"{rid}: self-referential parent")
        parent_list.append(parent)
    return Concept(id=rid, preferred_name=name, synonyms=tuple(kept),
                   parents=tuple(parent_list), definition=definition or None)


def build_lexicon(concepts: Iterable[Concept]) -> Lexicon:
    """Index a concept collection, enforcing referential integrity."""
    lexicon = Lexicon()
    for concept in concepts:
        if concept.id in lexicon.concepts:
            raise LexiconError(f"duplicate RID: {concept.id}")
        lexicon.concepts[concept.id] = concept
    for concept in lexicon.concepts.values():
        for parent in concept.parents:
            if parent not in lexicon.concepts:
                raise LexiconError(
                    f"{concept.id}: dangling parent reference {parent}")
    for concept in sorted(lexicon.concepts.values(), key=lambda c: rid_number(c.id)):
        lexicon.name_index.setdefault(normalize_surface(concept.preferred_name), []).append(concept.id)
        for syn in concept.synonyms:
            entry = lexicon.synonym_index.setdefault(normalize_surface(syn), [])
            if concept.id not in entry:
                entry.append(concept.id)
    return lexicon


def parse_lexicon(source: TextIO | str) -> Lexicon:
    """Parse the canonical 5-column TSV. Row order does not affect the result."""
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source, delimiter="\t")
    concepts: list[Concept] = []
    for lineno, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if lineno == 1 and row[0].strip().casefold() == "rid":
            continue
        row = list(row) + [""] * (5 - len(row))
        rid = row[0].strip()
        if rid == UNLINKABLE:
            raise LexiconError(f"line {lineno}: sentinel {UNLINKABLE} cannot be a stored concept")
        if not RID_PATTERN.match(rid):
            raise LexiconError(f"line {lineno}: malformed RID {rid!r}")
        concepts.append(_make_concept(
            rid, row[1], row[2].split("|") if row[2] else [],
            row[3].split("|") if row[3] else [], row[4].strip()))
    return build_lexicon(concepts)


def serialize_lexicon(lexicon: Lexicon) -> str:
    """Canonical TSV: header plus rows in ascending RID order."""
    out = io.StringIO()
    writer = csv.writer(out, delimiter="\t", lineterminator="\n")
    writer.writerow(TSV_HEADER)
    for concept in sorted(lexicon.concepts.values(), key=lambda c: rid_number(c.id)):
        writer.writerow([
            concept.id,
            concept.preferred_name,
            "|".join(concept.synonyms),
            "|".join(concept.parents),
            concept.definition or "",
        ])
    return out.getvalue()


def import_radlex_release(source: TextIO) -> Lexicon:
    """Adapt the official RadLex release CSV columns onto the canonical model.

    Expects columns ``Class ID``, ``Preferred Label``, ``Synonyms``, ``Parents``
    and optionally ``Definitions``; ids may be full IRIs ending in the RID.
    """
    reader = csv.DictReader(source)
    concepts: list[Concept] = []
    known: set[str] = set()
    rows: list[dict] = []
    for row in reader:
        rid = (row.get("Class ID") or "").rsplit("/", 1)[-1].strip()
        if not RID_PATTERN.match(rid):
            continue
        known.add(rid)
        rows.append(row)
    for row in rows:
        rid = (row.get("Class ID") or "").rsplit("/", 1)[-1].strip()
        parents = []
        for parent in (row.get("Parents") or "").split("|"):
            parent = parent.rsplit("/", 1)[-1].strip()
            # releases reference OWL upper-level classes we do not model
            if RID_PATTERN.match(parent) and parent in known and parent != rid:
                parents.append(parent)
        concepts.append(_make_concept(
            rid, row.get("Preferred Label") or "",
            (row.get("Synonyms") or "").split("|"),
            parents, (row.get("Definitions") or "").strip()))
    return build_lexicon(concepts)
