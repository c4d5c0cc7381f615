"""Report-level cross-validation folds and headline metrics: recall@n,
adjusted accuracy, and tagging P/R/F1."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus import Mention, Report, to_bio
from .expansion import AbbreviationDict, expand_mention
from .lexicon import UNLINKABLE, Lexicon
from .ranking import (GoldIndicatorScorer, LexicalScorer, Prediction,
                      build_rerank_instances, build_span_instance,
                      empty_prediction, predict_with_span_scorer, rerank)
from .retrieval import (Bm25Params, CandidateList, build_index, recall_at_n,
                        retrieve_candidates)
from .span_detection import (TaggedSentence, build_gazetteer, dictionary_tag,
                             evaluate_spans)


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class FoldPlan:
    fold_id: int
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]


def make_folds(report_ids: Sequence[str], k: int, seed: int) -> list[FoldPlan]:
    """Shuffle by seed and partition into k folds.

    Each fold's test block covers each report exactly once across folds;
    the cyclically-next block is validation, the rest train. Larger
    remainder blocks go to the earliest folds."""
    if k <= 1:
        raise EvaluationError(f"k must be > 1, got {k}")
    ids = list(report_ids)
    if len(ids) < k:
        raise EvaluationError(f"need at least {k} reports, got {len(ids)}")
    rng = random.Random(seed)
    rng.shuffle(ids)
    base, remainder = divmod(len(ids), k)
    blocks = []
    cursor = 0
    for i in range(k):
        size = base + (1 if i < remainder else 0)
        blocks.append(ids[cursor:cursor + size])
        cursor += size
    folds = []
    for i in range(k):
        test = blocks[i]
        validation = blocks[(i + 1) % k]
        train = [rid for j, block in enumerate(blocks)
                 if j not in (i, (i + 1) % k) for rid in block]
        folds.append(FoldPlan(fold_id=i, train=tuple(sorted(train)),
                              validation=tuple(sorted(validation)),
                              test=tuple(sorted(test))))
    return folds


def adjusted_accuracy(predictions: Sequence[Prediction], golds: Sequence[str],
                      candidate_lists: Sequence[CandidateList]) -> float:
    """Top-1 accuracy where a mention with an empty candidate list counts
    correct only when its gold is the unlinkable sentinel."""
    if not len(predictions) == len(golds) == len(candidate_lists):
        raise EvaluationError("predictions, golds, and candidate lists must align")
    if not golds:
        return 0.0
    correct = 0
    for prediction, gold, candidates in zip(predictions, golds, candidate_lists):
        if len(candidates) == 0:
            correct += gold == UNLINKABLE
        else:
            correct += prediction.predicted == gold
    return correct / len(golds)


@dataclass
class RankerConfig:
    ranker: str = "bm25_top1"  # bm25_top1 | lexical | rerank | span | oracle
    span_order: str = "rank"  # rank | seeded_shuffle
    scorer: object = None  # RerankScorer / SpanScorer for rerank / span
    synonym_seed: int = 0


@dataclass
class EvalReport:
    per_fold: list[dict]
    averaged: dict[str, float]
    config: dict
    predictions: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"config": self.config, "per_fold": self.per_fold,
                "averaged": self.averaged, "predictions": self.predictions}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _average(per_fold: list[dict]) -> dict[str, float]:
    keys = [k for k in per_fold[0] if isinstance(per_fold[0][k], (int, float))
            and k != "fold_id"]
    return {k: sum(f[k] for f in per_fold) / len(per_fold) for k in keys}


def _fold_test_mentions(reports: dict[str, Report], fold: FoldPlan) -> list[tuple[str, Mention]]:
    out = []
    for report_id in fold.test:
        for mention in reports[report_id].mentions:
            out.append((report_id, mention))
    return out


def markdown_table(report: EvalReport, title: str = "") -> str:
    """Human output: averaged metrics to 2 decimal places."""
    lines = []
    if title:
        lines.append(f"**{title}**\n")
    lines += ["| Metric | Average |", "|---|---|"]
    for key in sorted(report.averaged):
        value = report.averaged[key]
        lines.append(f"| {key} | {100 * value:.2f} |")
    return "\n".join(lines)


def predictions_tsv(report: EvalReport) -> str:
    lines = ["report_id\tmention_id\tgold\tpredicted\tranker\tscore"]
    for p in report.predictions:
        lines.append(f"{p['report_id']}\t{p['mention_id']}\t{p['gold']}\t"
                     f"{p['predicted']}\t{p['ranker']}\t{p['score']!r}")
    return "\n".join(lines) + "\n"


def evaluate_normalization(reports: Sequence[Report], lexicon: Lexicon,
                           abbrev: AbbreviationDict, ranker_config: RankerConfig,
                           folds: Sequence[FoldPlan],
                           params: Bm25Params = Bm25Params(),
                           use_abbreviations: bool = True,
                           use_synonyms: bool = True) -> EvalReport:
    """Per fold: index built from that fold's training mentions only,
    candidates retrieved for gold test mentions, ranker applied, recall@n
    and adjusted accuracy computed, then averaged over folds."""
    by_id = {r.report_id: r for r in reports}
    per_fold = []
    prediction_rows = []
    for fold in folds:
        try:
            train_mentions = [m for rid in fold.train for m in by_id[rid].mentions]
            index = build_index(lexicon, train_mentions, params)
            test_mentions = _fold_test_mentions(by_id, fold)
            golds = [m.gold_concept for _, m in test_mentions]
            candidate_lists = []
            predictions: dict[str, list[Prediction]] = {}
            for report_id, mention in test_mentions:
                expanded = expand_mention(mention.surface, lexicon, abbrev,
                                          use_abbreviations=use_abbreviations,
                                          use_synonyms=use_synonyms)
                candidates = retrieve_candidates(index, expanded, params)
                candidate_lists.append(candidates)
                ref = (report_id, mention.id)
                for name, prediction in _rank_one(
                        expanded, candidates, lexicon, ranker_config, ref,
                        gold=mention.gold_concept).items():
                    predictions.setdefault(name, []).append(prediction)
            metrics = {"fold_id": fold.fold_id,
                       "recall_at_n": recall_at_n(candidate_lists, golds)}
            for name, preds in sorted(predictions.items()):
                key = "accuracy" if len(predictions) == 1 else f"accuracy_{name}"
                metrics[key] = adjusted_accuracy(preds, golds, candidate_lists)
                for prediction, gold in zip(preds, golds):
                    prediction_rows.append({
                        "fold_id": fold.fold_id,
                        "report_id": prediction.mention_ref[0],
                        "mention_id": prediction.mention_ref[1],
                        "gold": gold, "predicted": prediction.predicted,
                        "ranker": prediction.ranker, "score": prediction.score,
                    })
            per_fold.append(metrics)
        except Exception as exc:
            raise EvaluationError(f"fold {fold.fold_id}: {exc}") from exc
    config = {"ranker": ranker_config.ranker, "span_order": ranker_config.span_order,
              "synonym_seed": ranker_config.synonym_seed,
              "bm25": {"k1": params.k1, "b": params.b,
                       "n_candidates": params.n_candidates,
                       "stemming": params.stemming},
              "use_abbreviations": use_abbreviations,
              "use_synonyms": use_synonyms,
              "folds": len(folds)}
    return EvalReport(per_fold=per_fold, averaged=_average(per_fold),
                      config=config, predictions=prediction_rows)


def _rerank_tag(config: RankerConfig) -> str:
    """Prediction tag for pointwise rankers. The built-in BM25 echo scorer
    reproduces the bm25_top1 ranking, so its predictions carry that tag."""
    if config.ranker in ("bm25_top1", "lexical"):
        return config.ranker
    if getattr(config.scorer, "name", None) == "bm25_top1":
        return "bm25_top1"
    return "rerank"


def _rank_one(expanded, candidates: CandidateList, lexicon: Lexicon,
              config: RankerConfig, ref: tuple[str, str],
              gold: Optional[str]) -> dict[str, Prediction]:
    """Apply the configured ranker to one mention. Span rankers return all
    three post-processing modes."""
    ranker = config.ranker
    if len(candidates) == 0:
        if ranker == "span":
            return {f"span_{mode}": empty_prediction(ref, f"span_{mode}")
                    for mode in ("original", "first", "last")}
        return {ranker: empty_prediction(ref, _rerank_tag(config))}
    if ranker == "bm25_top1":
        concept, score = candidates.candidates[0]
        return {ranker: Prediction(mention_ref=ref, predicted=concept,
                                   score=score, ranker="bm25_top1")}
    if ranker in ("lexical", "rerank", "oracle"):
        instances = build_rerank_instances(expanded, candidates, lexicon,
                                           synonym_order_seed=config.synonym_seed)
        if ranker == "lexical":
            scorer = LexicalScorer(lexicon)
        elif ranker == "oracle":
            scorer = GoldIndicatorScorer(gold if gold is not None else UNLINKABLE)
        else:
            scorer = config.scorer
            if scorer is None:
                raise EvaluationError("ranker 'rerank' requires a scorer")
        return {ranker: rerank(instances, scorer, candidates, ref,
                               ranker=_rerank_tag(config))}
    if ranker == "span":
        instance = build_span_instance(expanded, candidates, lexicon,
                                       order=config.span_order,
                                       shuffle_seed=config.synonym_seed)
        scorer = config.scorer
        if scorer is None:
            raise EvaluationError("ranker 'span' requires a scorer")
        return {f"span_{mode}": predict_with_span_scorer(
                    instance, scorer, candidates, lexicon, ref, mode=mode)
                for mode in ("original", "first", "last")}
    raise EvaluationError(f"unknown ranker {ranker!r}")


def evaluate_tagging(reports: Sequence[Report], folds: Sequence[FoldPlan],
                     lexicon: Lexicon, tagger: object = None) -> EvalReport:
    """Per fold: gazetteer from training mentions, tagger applied to test
    sentences, exact-match span P/R/F1, averaged over folds.

    ``tagger`` defaults to the dictionary baseline; otherwise it must expose
    ``tag(tokens) -> list[str]`` (the wire protocol's tag mode)."""
    by_id = {r.report_id: r for r in reports}
    per_fold = []
    for fold in folds:
        gazetteer = build_gazetteer(
            lexicon, [m.surface for rid in fold.train for m in by_id[rid].mentions])
        predicted = []
        gold = []
        for report_id in fold.test:
            report = by_id[report_id]
            bio = to_bio(report)
            for (sent_start, sent_end), sent_pairs in zip(report.sentences, bio):
                tokens = tuple((tok, 0, 0) for tok, _ in sent_pairs)
                gold.append(TaggedSentence(
                    tokens=tokens, tags=tuple(tag for _, tag in sent_pairs)))
                if tagger is None:
                    tagged = dictionary_tag(report.text[sent_start:sent_end],
                                            gazetteer, base_offset=sent_start)
                    predicted.append(TaggedSentence(
                        tokens=tokens, tags=tagged.tags))
                else:
                    tags = tagger.tag([tok for tok, _ in sent_pairs])
                    predicted.append(TaggedSentence(tokens=tokens, tags=tuple(tags)))
        precision, recall, f1 = evaluate_spans(predicted, gold)
        per_fold.append({"fold_id": fold.fold_id, "precision": precision,
                         "recall": recall, "f1": f1})
    config = {"tagger": "dictionary" if tagger is None else getattr(tagger, "name", "external"),
              "folds": len(folds)}
    return EvalReport(per_fold=per_fold, averaged=_average(per_fold), config=config)
