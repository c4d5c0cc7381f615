"""BIO tagging contract: dictionary-matching baseline tagger and
exact-match span evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import tokenize_with_offsets
from .lexicon import Lexicon
from .retrieval import tokenize as index_tokenize


class SpanEvalError(ValueError):
    pass


@dataclass(frozen=True)
class TaggedSentence:
    tokens: tuple[tuple[str, int, int], ...]  # (text, start, end)
    tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise SpanEvalError("token/tag length mismatch")
        for tag in self.tags:
            if tag not in ("B", "I", "O"):
                raise SpanEvalError(f"unknown tag {tag!r}")


def repair_bio(tags: Sequence[str]) -> list[str]:
    """Promote I-after-O (or sentence-initial I) to B so external taggers'
    noise cannot crash decoding."""
    repaired = []
    prev = "O"
    for tag in tags:
        if tag == "I" and prev == "O":
            tag = "B"
        repaired.append(tag)
        prev = tag
    return repaired


def decode_spans(sentence: TaggedSentence) -> list[tuple[int, int]]:
    """Token-index (start, end) extents of B I... runs; tags are repaired
    before decoding."""
    spans = []
    start = None
    tags = repair_bio(sentence.tags)
    for i, tag in enumerate(tags):
        if tag == "B":
            if start is not None:
                spans.append((start, i))
            start = i
        elif tag == "O":
            if start is not None:
                spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, len(tags)))
    return spans


def encode_spans(n_tokens: int, spans: Iterable[tuple[int, int]]) -> list[str]:
    tags = ["O"] * n_tokens
    for start, end in spans:
        tags[start] = "B"
        for i in range(start + 1, end):
            tags[i] = "I"
    return tags


def build_gazetteer(lexicon: Lexicon, training_surfaces: Iterable[str]) -> set[tuple[str, ...]]:
    """Case-folded token tuples of training-mention surfaces plus lexicon
    preferred names and synonyms."""
    phrases: set[tuple[str, ...]] = set()
    for surface in training_surfaces:
        tokens = tuple(index_tokenize(surface))
        if tokens:
            phrases.add(tokens)
    for concept in lexicon.concepts.values():
        for name in (concept.preferred_name, *concept.synonyms):
            tokens = tuple(index_tokenize(name))
            if tokens:
                phrases.add(tokens)
    return phrases


def dictionary_tag(sentence: str, gazetteer: set[tuple[str, ...]],
                   base_offset: int = 0) -> TaggedSentence:
    """Greedy longest-match left-to-right over case-folded token n-grams."""
    tokens = tuple(tokenize_with_offsets(sentence, base=base_offset))
    folded = [tok.casefold() for tok, _, _ in tokens]
    max_len = max((len(p) for p in gazetteer), default=0)
    tags = ["O"] * len(tokens)
    i = 0
    while i < len(tokens):
        matched = 0
        for length in range(min(max_len, len(tokens) - i), 0, -1):
            if tuple(folded[i:i + length]) in gazetteer:
                matched = length
                break
        if matched:
            tags[i] = "B"
            for j in range(i + 1, i + matched):
                tags[j] = "I"
            i += matched
        else:
            i += 1
    return TaggedSentence(tokens=tokens, tags=tuple(tags))


def evaluate_spans(predicted: Sequence[TaggedSentence],
                   gold: Sequence[TaggedSentence]) -> tuple[float, float, float]:
    """Exact-match span precision, recall, F1, micro-pooled over sentences.

    Empty-prediction convention: precision is 0 when gold is non-empty and
    1 when both sides have no spans."""
    if len(predicted) != len(gold):
        raise SpanEvalError(f"sentence counts differ: {len(predicted)} vs {len(gold)}")
    n_pred = n_gold = n_match = 0
    for pred_sent, gold_sent in zip(predicted, gold):
        if [t[0] for t in pred_sent.tokens] != [t[0] for t in gold_sent.tokens]:
            raise SpanEvalError("tokenization mismatch between predicted and gold")
        pred_spans = set(decode_spans(pred_sent))
        gold_spans = set(decode_spans(gold_sent))
        n_pred += len(pred_spans)
        n_gold += len(gold_spans)
        n_match += len(pred_spans & gold_spans)
    if n_pred == 0 and n_gold == 0:
        return 1.0, 1.0, 1.0
    precision = n_match / n_pred if n_pred else 0.0
    recall = n_match / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def write_conll(sentences: Sequence[TaggedSentence]) -> str:
    """Tagging exchange format: token, start, end, tag; blank line between
    sentences."""
    blocks = []
    for sent in sentences:
        lines = [f"{tok}\t{start}\t{end}\t{tag}"
                 for (tok, start, end), tag in zip(sent.tokens, sent.tags)]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def read_conll(text: str) -> list[TaggedSentence]:
    sentences = []
    for block in text.strip().split("\n\n"):
        if not block.strip():
            continue
        tokens = []
        tags = []
        for line in block.splitlines():
            tok, start, end, tag = line.split("\t")
            tokens.append((tok, int(start), int(end)))
            tags.append(tag)
        sentences.append(TaggedSentence(tokens=tuple(tokens), tags=tuple(tags)))
    return sentences
