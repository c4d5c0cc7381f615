"""Annotated report corpus: BRAT standoff parsing, validation, statistics,
inter-annotator agreement, and BIO tag sequences."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO

from .lexicon import UNLINKABLE, Lexicon, is_valid_concept_id

ENTITY_CLASSES = (
    "ClinicalFinding",
    "ImagingObservation",
    "AnatomicalEntity",
    "MedicalDevice",
    "RadLexDescriptor",
    "Procedure",
    "ProcedureStep",
    "Process",
    "ImagingModality",
    "Property",
)

MODALITY_GROUPS = ("chest_xray", "brain_mri", "babygram", "other")


class CorpusError(ValueError):
    """Raised for malformed annotation input."""


@dataclass(frozen=True)
class Mention:
    id: str
    span_start: int
    span_end: int
    surface: str
    entity_class: str
    gold_concept: str = UNLINKABLE


@dataclass
class Report:
    report_id: str
    text: str
    modality_group: str = "other"
    sentences: list[tuple[int, int]] = field(default_factory=list)
    mentions: list[Mention] = field(default_factory=list)


@dataclass
class CorpusStats:
    per_class_counts: dict[str, int]
    total_mentions: int
    unlinkable_mentions: int
    distinct_concepts: int


_T_LINE = re.compile(r"^T(\d+)$")
_N_LINE = re.compile(r"^N(\d+)$")
_S_LINE = re.compile(r"^S(\d+)$")
_N_REF = re.compile(r"^Reference (T\d+) RadLex:(\S+)$")


def parse_brat_report(txt: TextIO | str, ann: TextIO | str,
                      report_id: str = "", modality_group: str = "other") -> Report:
    """Parse a BRAT ``.txt``/``.ann`` pair into a Report.

    T lines become mentions; the gold concept comes from the mention's N
    (normalization) line, defaulting to the unlinkable sentinel when no N
    line references it. Optional S lines carry sentence offsets.
    """
    text = txt if isinstance(txt, str) else txt.read()
    ann_text = ann if isinstance(ann, str) else ann.read()

    mentions: dict[str, Mention] = {}
    golds: dict[str, str] = {}
    sentences: list[tuple[int, int]] = []

    for raw in ann_text.splitlines():
        if not raw.strip():
            continue
        fields = raw.split("\t")
        tag = fields[0]
        if _T_LINE.match(tag):
            if tag in mentions:
                raise CorpusError(f"duplicate mention id {tag}")
            if len(fields) < 3:
                raise CorpusError(f"{tag}: malformed T line")
            try:
                entity_class, start_s, end_s = fields[1].split(" ")
                start, end = int(start_s), int(end_s)
            except ValueError as exc:
                raise CorpusError(f"{tag}: malformed T line") from exc
            if entity_class not in ENTITY_CLASSES:
                raise CorpusError(f"{tag}: unknown entity class {entity_class!r}")
            if not (0 <= start < end <= len(text)):
                raise CorpusError(f"{tag}: span {start}..{end} out of bounds")
            surface = fields[2]
            if text[start:end] != surface:
                raise CorpusError(
                    f"{tag}: surface mismatch: ann has {surface!r}, "
                    f"txt slice is {text[start:end]!r}")
            mentions[tag] = Mention(id=tag, span_start=start, span_end=end,
                                    surface=surface, entity_class=entity_class)
        elif _N_LINE.match(tag):
            if len(fields) < 2:
                raise CorpusError(f"{tag}: malformed N line")
            ref = _N_REF.match(fields[1])
            if not ref:
                raise CorpusError(f"{tag}: malformed N reference {fields[1]!r}")
            target, concept = ref.group(1), ref.group(2)
            if not is_valid_concept_id(concept):
                raise CorpusError(f"{tag}: malformed concept id {concept!r}")
            if target in golds:
                raise CorpusError(f"{target}: more than one normalization line")
            golds[target] = concept
        elif _S_LINE.match(tag):
            try:
                start_s, end_s = fields[1].split(" ")
                sentences.append((int(start_s), int(end_s)))
            except (IndexError, ValueError) as exc:
                raise CorpusError(f"{tag}: malformed S line") from exc

    for target in golds:
        if target not in mentions:
            raise CorpusError(f"normalization references unknown mention {target}")

    resolved = [
        Mention(id=m.id, span_start=m.span_start, span_end=m.span_end,
                surface=m.surface, entity_class=m.entity_class,
                gold_concept=golds.get(m.id, UNLINKABLE))
        for m in mentions.values()
    ]
    resolved.sort(key=lambda m: (m.span_start, m.span_end, m.id))

    if not sentences:
        sentences = split_sentences(text)
    sentences.sort()
    last = 0
    for start, end in sentences:
        if start < last or end > len(text) or start >= end:
            raise CorpusError(f"bad sentence offsets ({start}, {end})")
        last = end

    return Report(report_id=report_id, text=text, modality_group=modality_group,
                  sentences=sentences, mentions=resolved)


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Fallback rule-based splitter: break after ``. `` followed by an
    uppercase letter, and at newlines."""
    boundaries = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            boundaries.append(i + 1)
        elif ch == "." and i + 2 < len(text) and text[i + 1] == " " and text[i + 2].isupper():
            boundaries.append(i + 2)
    boundaries.append(len(text))
    spans = []
    for start, end in zip(boundaries, boundaries[1:]):
        chunk = text[start:end]
        stripped = chunk.strip()
        if not stripped:
            continue
        lead = len(chunk) - len(chunk.lstrip())
        spans.append((start + lead, start + lead + len(stripped.rstrip())))
    return [(s, s + len(text[s:e].rstrip())) for s, e in spans]


def load_corpus(metadata_path: str | Path) -> list[Report]:
    """Load reports from a metadata sidecar TSV with columns
    ``report_id``, ``modality_group``, ``txt_path``, ``ann_path``
    (paths relative to the sidecar)."""
    metadata_path = Path(metadata_path)
    base = metadata_path.parent
    reports = []
    with open(metadata_path, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle, delimiter="\t"):
            group = row["modality_group"]
            if group not in MODALITY_GROUPS:
                raise CorpusError(f"{row['report_id']}: unknown modality group {group!r}")
            txt = (base / row["txt_path"]).read_text(encoding="utf-8")
            ann = (base / row["ann_path"]).read_text(encoding="utf-8")
            reports.append(parse_brat_report(txt, ann, report_id=row["report_id"],
                                             modality_group=group))
    reports.sort(key=lambda r: r.report_id)
    return reports


@dataclass(frozen=True)
class Violation:
    report_id: str
    mention_id: str
    kind: str  # unknown_concept | overlap
    message: str


def validate_annotations(report: Report, lexicon: Lexicon) -> list[Violation]:
    """Annotation-rule check: every gold concept must exist in the lexicon
    (or be the unlinkable sentinel) and mention spans must not overlap."""
    violations = []
    for mention in report.mentions:
        if mention.gold_concept != UNLINKABLE and lexicon.lookup(mention.gold_concept) is None:
            violations.append(Violation(
                report.report_id, mention.id, "unknown_concept",
                f"{mention.id}: gold concept {mention.gold_concept} not in lexicon"))
    ordered = sorted(report.mentions, key=lambda m: (m.span_start, m.span_end))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.span_start < prev.span_end:
            violations.append(Violation(
                report.report_id, cur.id, "overlap",
                f"{prev.id} and {cur.id} overlap at [{cur.span_start}, {prev.span_end})"))
    return violations


def corpus_stats(reports: Iterable[Report]) -> CorpusStats:
    per_class = {cls: 0 for cls in ENTITY_CLASSES}
    total = 0
    unlinkable = 0
    distinct: set[str] = set()
    for report in reports:
        for mention in report.mentions:
            per_class[mention.entity_class] += 1
            total += 1
            if mention.gold_concept == UNLINKABLE:
                unlinkable += 1
            else:
                distinct.add(mention.gold_concept)
    return CorpusStats(per_class_counts=per_class, total_mentions=total,
                       unlinkable_mentions=unlinkable, distinct_concepts=len(distinct))


def _span_set(reports: Sequence[Report]) -> set[tuple[str, int, int]]:
    return {(r.report_id, m.span_start, m.span_end) for r in reports for m in r.mentions}


def span_agreement_f1(annotator_a: Sequence[Report], annotator_b: Sequence[Report]) -> float:
    """Exact-span agreement F1, micro-pooled over all reports."""
    ids_a = {r.report_id for r in annotator_a}
    ids_b = {r.report_id for r in annotator_b}
    if ids_a != ids_b:
        raise CorpusError(f"report id mismatch: {sorted(ids_a ^ ids_b)}")
    spans_a = _span_set(annotator_a)
    spans_b = _span_set(annotator_b)
    if not spans_a and not spans_b:
        return 1.0
    if not spans_a or not spans_b:
        return 0.0
    matches = len(spans_a & spans_b)
    precision = matches / len(spans_b)
    recall = matches / len(spans_a)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def normalization_agreement(annotator_a: Sequence[Mention], annotator_b: Sequence[Mention]) -> float:
    """Fraction of span-aligned mentions assigned the same gold concept.

    The unlinkable sentinel agrees with itself."""
    if len(annotator_a) != len(annotator_b):
        raise CorpusError(
            f"aligned mention counts differ: {len(annotator_a)} vs {len(annotator_b)}")
    if not annotator_a:
        return 1.0
    agree = sum(1 for a, b in zip(annotator_a, annotator_b)
                if a.gold_concept == b.gold_concept)
    return agree / len(annotator_a)


_PUNCT = ".,;:!?()[]{}\"'`"


def tokenize_with_offsets(text: str, base: int = 0) -> list[tuple[str, int, int]]:
    """Deterministic tokenizer: split on whitespace, then peel leading and
    trailing punctuation into separate tokens. Offsets are absolute."""
    tokens = []
    for match in re.finditer(r"\S+", text):
        chunk, start = match.group(), match.start()
        lead = 0
        while lead < len(chunk) and chunk[lead] in _PUNCT:
            tokens.append((chunk[lead], base + start + lead, base + start + lead + 1))
            lead += 1
        trail = len(chunk)
        trailing = []
        while trail > lead and chunk[trail - 1] in _PUNCT:
            trail -= 1
            trailing.append((chunk[trail], base + start + trail, base + start + trail + 1))
        if trail > lead:
            tokens.append((chunk[lead:trail], base + start + lead, base + start + trail))
        tokens.extend(reversed(trailing))
    return tokens


def to_bio(report: Report) -> list[list[tuple[str, str]]]:
    """Per-sentence (token, tag) pairs with tags in {B, I, O}.

    The first token overlapping a mention gets B, subsequent overlapping
    tokens I, everything else O. Mentions must not overlap."""
    ordered = sorted(report.mentions, key=lambda m: (m.span_start, m.span_end))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.span_start < prev.span_end:
            raise CorpusError(f"overlapping mentions {prev.id}/{cur.id}; validate first")
    sentences = []
    for sent_start, sent_end in report.sentences:
        tokens = tokenize_with_offsets(report.text[sent_start:sent_end], base=sent_start)
        tags = []
        active: Optional[Mention] = None
        for _, tok_start, tok_end in tokens:
            covering = next((m for m in ordered
                             if tok_start < m.span_end and tok_end > m.span_start), None)
            if covering is None:
                tags.append("O")
                active = None
            elif covering is active:
                tags.append("I")
            else:
                tags.append("B")
                active = covering
        sentences.append([(tok, tag) for (tok, _, _), tag in zip(tokens, tags)])
    return sentences


def stats_table(stats: CorpusStats) -> str:
    """Human-readable markdown table of corpus statistics."""
    lines = ["| Item | Frequency |", "|---|---|"]
    for cls in ENTITY_CLASSES:
        lines.append(f"| {cls} | {stats.per_class_counts[cls]} |")
    lines.append(f"| Total entity mentions | {stats.total_mentions} |")
    lines.append(f"| Unlinkable mentions | {stats.unlinkable_mentions} |")
    lines.append(f"| Distinct concepts | {stats.distinct_concepts} |")
    return "\n".join(lines)
