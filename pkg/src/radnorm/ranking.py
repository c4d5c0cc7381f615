"""Scorer input construction (pairwise re-rank and comma-joined span
formulations), ranking dispatch, and concept resolution."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from .expansion import ExpandedMention
from .lexicon import UNLINKABLE, Lexicon, rid_number
from .retrieval import CandidateList

#: Resolution outcome for a predicted name matching nothing; never equals a gold.
NO_MATCH = "__NO_MATCH__"

#: Marker for an original-mode span covering more than one concept.
MULTI_CONCEPT = "__MULTI_CONCEPT__"

RANKER_NAMES = ("bm25_top1", "lexical", "rerank",
                "span_original", "span_first", "span_last")


class RankingError(ValueError):
    pass


@dataclass(frozen=True)
class RerankInstance:
    mention: ExpandedMention
    candidate: str
    sequence: str
    label: Optional[int] = None


@dataclass(frozen=True)
class SpanInstance:
    mention: ExpandedMention
    sequence: str
    segment_two_start: int
    concept_offsets: dict[str, tuple[int, int]]
    gold_span: Optional[tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "concept_offsets", dict(self.concept_offsets))


@dataclass(frozen=True)
class Prediction:
    mention_ref: tuple[str, str]  # (report_id, mention_id)
    predicted: str
    score: float
    ranker: str


def _candidate_name(concept_id: str, lexicon: Lexicon) -> str:
    if concept_id == UNLINKABLE:
        return UNLINKABLE
    concept = lexicon.lookup(concept_id)
    if concept is None:
        raise RankingError(f"candidate {concept_id} not in lexicon")
    return concept.preferred_name


def build_rerank_instances(mention: ExpandedMention, candidates: CandidateList,
                           lexicon: Lexicon, gold: Optional[str] = None,
                           synonym_order_seed: int = 0) -> list[RerankInstance]:
    """One pairwise instance per candidate.

    Sequence layout: mention, candidate name, the candidate's synonyms in a
    seeded-random order, then the candidate's Is-A class name; segments that
    do not exist are omitted together with their separator. The unlinkable
    sentinel renders as a bare ``XXXXX`` segment."""
    if not candidates.candidates:
        raise RankingError("no candidates; handle empty lists upstream")
    instances = []
    for concept_id, _ in candidates.candidates:
        segments = [mention.expanded, _candidate_name(concept_id, lexicon)]
        if concept_id != UNLINKABLE:
            concept = lexicon.lookup(concept_id)
            assert concept is not None
            synonyms = list(concept.synonyms)
            # reproducible per (mention, candidate) pair
            rng = random.Random(f"{synonym_order_seed}:{mention.expanded}:{concept_id}")
            rng.shuffle(synonyms)
            segments.extend(synonyms)
            is_class = lexicon.class_of(concept_id)
            if is_class is not None:
                segments.append(is_class)
        sequence = "[CLS] " + " [SEP] ".join(segments) + " [SEP]"
        label = None if gold is None else int(concept_id == gold)
        instances.append(RerankInstance(mention=mention, candidate=concept_id,
                                        sequence=sequence, label=label))
    return instances


def build_span_instance(mention: ExpandedMention, candidates: CandidateList,
                        lexicon: Lexicon, order: str = "rank",
                        gold: Optional[str] = None,
                        shuffle_seed: int = 0) -> SpanInstance:
    """Comma-joined candidate sequence with per-concept character offsets.

    ``order`` is ``rank`` (BM25 order) or ``seeded_shuffle``."""
    if not candidates.candidates:
        raise RankingError("no candidates; handle empty lists upstream")
    if order not in ("rank", "seeded_shuffle"):
        raise RankingError(f"unknown candidate order {order!r}")
    concept_ids = candidates.concepts()
    if order == "seeded_shuffle":
        rng = random.Random(f"{shuffle_seed}:{mention.expanded}")
        concept_ids = list(concept_ids)
        rng.shuffle(concept_ids)
    prefix = f"[CLS] {mention.expanded} [SEP] "
    offsets: dict[str, tuple[int, int]] = {}
    parts = []
    cursor = len(prefix)
    for i, concept_id in enumerate(concept_ids):
        if i:
            cursor += 2  # ", "
        name = _candidate_name(concept_id, lexicon)
        offsets[concept_id] = (cursor, cursor + len(name))
        cursor += len(name)
        parts.append(name)
    sequence = prefix + ", ".join(parts) + " [SEP]"
    gold_span = offsets.get(gold) if gold is not None else None
    return SpanInstance(mention=mention, sequence=sequence,
                        segment_two_start=len(prefix),
                        concept_offsets=offsets, gold_span=gold_span)


class RerankScorer(Protocol):
    def score_rerank(self, instances: Sequence[RerankInstance],
                     candidates: CandidateList) -> list[float]: ...


class SpanScorer(Protocol):
    def score_span(self, instance: SpanInstance) -> tuple[int, int, float]: ...


def rerank(instances: Sequence[RerankInstance], scorer: RerankScorer,
           candidates: CandidateList, mention_ref: tuple[str, str],
           ranker: str = "rerank") -> Prediction:
    """Argmax over per-candidate scores; ties break by ascending RID with
    the unlinkable sentinel last."""
    if not instances:
        return empty_prediction(mention_ref, ranker)
    scores = scorer.score_rerank(instances, candidates)
    if len(scores) != len(instances):
        raise RankingError(
            f"scorer returned {len(scores)} scores for {len(instances)} instances "
            f"(mention {mention_ref})")
    best = min(zip(instances, scores),
               key=lambda pair: (-pair[1], rid_number(pair[0].candidate)))
    return Prediction(mention_ref=mention_ref, predicted=best[0].candidate,
                      score=best[1], ranker=ranker)


def empty_prediction(mention_ref: tuple[str, str], ranker: str) -> Prediction:
    """Empty candidate lists bypass ranking and predict unlinkable."""
    return Prediction(mention_ref=mention_ref, predicted=UNLINKABLE,
                      score=0.0, ranker=ranker)


def extract_concept_from_span(instance: SpanInstance,
                              predicted_span: tuple[int, int],
                              mode: str = "original") -> Optional[str]:
    """Concept name text selected by a predicted span.

    ``original`` keeps the raw slice and flags multi-concept slices (scored
    incorrect downstream); ``first``/``last`` keep the text left of the
    first comma / right of the last comma. Spans outside segment two yield
    no result."""
    if mode not in ("original", "first", "last"):
        raise RankingError(f"unknown span mode {mode!r}")
    start, end = predicted_span
    segment_end = len(instance.sequence) - len(" [SEP]")
    if start < instance.segment_two_start or end > segment_end or start >= end:
        return None
    slice_ = instance.sequence[start:end]
    if mode == "original":
        return MULTI_CONCEPT if "," in slice_ else slice_.strip()
    if mode == "first":
        return slice_.split(",", 1)[0].strip()
    return slice_.rsplit(",", 1)[-1].strip()


def resolve_concept(name: Optional[str], candidates: CandidateList,
                    lexicon: Lexicon) -> str:
    """Map a predicted name back to a concept id by exact, trimmed,
    case-sensitive match: candidate names first, then the full lexicon."""
    if name is None or name == MULTI_CONCEPT:
        return NO_MATCH
    name = name.strip()
    if name == UNLINKABLE:
        return UNLINKABLE
    for concept_id in candidates.concepts():
        if concept_id != UNLINKABLE:
            concept = lexicon.lookup(concept_id)
            if concept is not None and concept.preferred_name == name:
                return concept_id
    for concept_id in lexicon.find_by_surface(name):
        concept = lexicon.lookup(concept_id)
        if concept is not None and concept.preferred_name == name:
            return concept_id
    return NO_MATCH


def predict_with_span_scorer(instance: SpanInstance, scorer: SpanScorer,
                             candidates: CandidateList, lexicon: Lexicon,
                             mention_ref: tuple[str, str],
                             mode: str = "original") -> Prediction:
    start, end, span_score = scorer.score_span(instance)
    name = extract_concept_from_span(instance, (start, end), mode=mode)
    predicted = resolve_concept(name, candidates, lexicon)
    return Prediction(mention_ref=mention_ref, predicted=predicted,
                      score=span_score, ranker=f"span_{mode}")


def _jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


class Bm25Top1Scorer:
    """Scores each candidate with its BM25 retrieval score, so the argmax
    reproduces the candidate list head."""

    name = "bm25_top1"

    def score_rerank(self, instances, candidates):
        score_by_concept = dict(candidates.candidates)
        return [score_by_concept[inst.candidate] for inst in instances]


class LexicalScorer:
    """Deterministic no-ML baseline: token-set Jaccard between the expanded
    mention and the candidate's name plus synonyms, BM25 as tiebreak."""

    name = "lexical"

    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon

    def score_rerank(self, instances, candidates):
        from .retrieval import tokenize
        score_by_concept = dict(candidates.candidates)
        max_bm25 = max(score_by_concept.values(), default=0.0)
        scores = []
        for inst in instances:
            mention_tokens = set(tokenize(inst.mention.expanded))
            concept = self.lexicon.lookup(inst.candidate)
            if concept is None:  # unlinkable sentinel
                candidate_tokens: set[str] = set()
            else:
                candidate_tokens = set(tokenize(concept.preferred_name))
                for syn in concept.synonyms:
                    candidate_tokens |= set(tokenize(syn))
            jaccard = _jaccard(mention_tokens, candidate_tokens)
            # fold the BM25 tiebreak in below Jaccard resolution (1/|union| >= 1e-3
            # for realistic token sets; BM25 term stays < 1e-6)
            tiebreak = 0.0
            if max_bm25 > 0:
                tiebreak = 1e-6 * score_by_concept[inst.candidate] / max_bm25
            scores.append(jaccard + tiebreak)
        return scores

    def score_span(self, instance: SpanInstance) -> tuple[int, int, float]:
        from .retrieval import tokenize
        mention_tokens = set(tokenize(instance.mention.expanded))
        best: tuple[float, int, tuple[int, int]] | None = None
        for concept_id, (start, end) in instance.concept_offsets.items():
            name = instance.sequence[start:end]
            jaccard = _jaccard(mention_tokens, set(tokenize(name)))
            key = (-jaccard, rid_number(concept_id))
            if best is None or key < (best[0], best[1]):
                best = (key[0], key[1], (start, end))
        assert best is not None
        return best[2][0], best[2][1], -best[0]


class GoldIndicatorScorer:
    """Test oracle: probability 1 for the gold concept, 0 elsewhere."""

    name = "gold_indicator"

    def __init__(self, gold: str):
        self.gold = gold

    def score_rerank(self, instances, candidates):
        return [1.0 if inst.candidate == self.gold else 0.0 for inst in instances]

    def score_span(self, instance: SpanInstance) -> tuple[int, int, float]:
        span = instance.concept_offsets.get(self.gold)
        if span is None:
            # no gold among candidates: fall back to the first candidate
            span = min(instance.concept_offsets.values())
        return span[0], span[1], 1.0
