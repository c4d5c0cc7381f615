"""Okapi BM25 inverted index over concept names and training-mention
surfaces; candidate retrieval with concept-level deduplication."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Mention
from .expansion import ExpandedMention
from .lexicon import UNLINKABLE, Lexicon, rid_number

INDEX_FORMAT_VERSION = 1

_TOKEN = re.compile(r"[0-9a-z]+")


class RetrievalError(ValueError):
    pass


def _light_stem(token: str) -> str:
    # s-stemmer: plural suffixes only; full stemming is out of scope
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith("es") and len(token) > 3 and token[-3] in "sxz":
        return token[:-2]
    if token.endswith("s") and not token.endswith("ss") and len(token) > 3:
        return token[:-1]
    return token


def tokenize(text: str, stemming: bool = False) -> list[str]:
    """Case-fold and split on non-alphanumeric runs."""
    tokens = _TOKEN.findall(text.casefold())
    if stemming:
        tokens = [_light_stem(t) for t in tokens]
    return tokens


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75
    n_candidates: int = 10
    stemming: bool = False

    def __post_init__(self):
        if self.k1 < 0:
            raise RetrievalError(f"k1 must be >= 0, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise RetrievalError(f"b must be in [0, 1], got {self.b}")
        if self.n_candidates < 1:
            raise RetrievalError(f"n_candidates must be positive, got {self.n_candidates}")


@dataclass(frozen=True)
class IndexDocument:
    doc_id: int
    text: str
    concept: str
    source: str  # "lexicon" | "training_mention"


@dataclass
class Index:
    params: Bm25Params
    documents: list[IndexDocument]
    doc_terms: list[Counter]
    doc_lengths: list[int]
    avg_length: float
    # term -> list of (doc_id, tf)
    postings: dict[str, list[tuple[int, int]]] = field(default_factory=dict)

    @property
    def n_docs(self) -> int:
        return len(self.documents)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def build_index(lexicon: Lexicon, training_mentions: Sequence[Mention] = (),
                params: Bm25Params = Bm25Params()) -> Index:
    """One document per lexicon preferred name, plus one per training
    mention surface carrying that mention's gold concept."""
    documents: list[IndexDocument] = []
    for concept in sorted(lexicon.concepts.values(), key=lambda c: rid_number(c.id)):
        documents.append(IndexDocument(doc_id=len(documents),
                                       text=concept.preferred_name,
                                       concept=concept.id, source="lexicon"))
    for mention in training_mentions:
        documents.append(IndexDocument(doc_id=len(documents),
                                       text=mention.surface,
                                       concept=mention.gold_concept,
                                       source="training_mention"))
    if not documents:
        raise RetrievalError("cannot build an index over an empty collection")
    return _index_documents(documents, params)


def _index_documents(documents: list[IndexDocument], params: Bm25Params) -> Index:
    doc_terms = [Counter(tokenize(d.text, params.stemming)) for d in documents]
    doc_lengths = [sum(tf.values()) for tf in doc_terms]
    avg_length = sum(doc_lengths) / len(doc_lengths)
    postings: dict[str, list[tuple[int, int]]] = {}
    for doc_id, terms in enumerate(doc_terms):
        for term, tf in sorted(terms.items()):
            postings.setdefault(term, []).append((doc_id, tf))
    return Index(params=params, documents=documents, doc_terms=doc_terms,
                 doc_lengths=doc_lengths, avg_length=avg_length, postings=postings)


def score(index: Index, query: str, doc_id: int) -> float:
    """Okapi BM25 score of one document for a query."""
    if not 0 <= doc_id < index.n_docs:
        raise RetrievalError(f"unknown doc_id {doc_id}")
    params = index.params
    tf_map = index.doc_terms[doc_id]
    length_norm = params.k1 * (1 - params.b + params.b * index.doc_lengths[doc_id] / index.avg_length)
    total = 0.0
    for term in tokenize(query, params.stemming):
        tf = tf_map.get(term, 0)
        if tf == 0:
            continue
        total += index.idf(term) * tf * (params.k1 + 1) / (tf + length_norm)
    return total


@dataclass(frozen=True)
class CandidateList:
    mention: ExpandedMention
    candidates: tuple[tuple[str, float], ...]  # (concept id, score), descending

    def concepts(self) -> list[str]:
        return [cid for cid, _ in self.candidates]

    def __len__(self) -> int:
        return len(self.candidates)


def _tie_key(concept: str) -> int:
    return rid_number(concept)  # UNLINKABLE sorts last


def retrieve_candidates(index: Index, mention: ExpandedMention,
                        params: Bm25Params | None = None) -> CandidateList:
    """Top-n candidate concepts for an expanded mention.

    Documents with positive term overlap are scored; multiple documents
    mapping to one concept keep the maximum score. Ties break by ascending
    RID number with the unlinkable sentinel last."""
    if params is None:
        params = index.params
    query_terms = set(tokenize(mention.expanded, index.params.stemming))
    touched: set[int] = set()
    for term in query_terms:
        for doc_id, _ in index.postings.get(term, ()):
            touched.add(doc_id)
    best: dict[str, float] = {}
    for doc_id in touched:
        doc_score = score(index, mention.expanded, doc_id)
        if doc_score <= 0.0:
            continue
        concept = index.documents[doc_id].concept
        if concept not in best or doc_score > best[concept]:
            best[concept] = doc_score
    ranked = sorted(best.items(), key=lambda item: (-item[1], _tie_key(item[0])))
    return CandidateList(mention=mention,
                         candidates=tuple(ranked[:params.n_candidates]))


def recall_at_n(candidate_lists: Sequence[CandidateList], golds: Sequence[str]) -> float:
    """Fraction of mentions whose gold concept is in the candidate list.

    An unlinkable gold counts as contained when the sentinel is among the
    candidates or the list is empty (mirrors the adjusted-accuracy rule)."""
    if len(candidate_lists) != len(golds):
        raise RetrievalError(
            f"length mismatch: {len(candidate_lists)} lists vs {len(golds)} golds")
    if not golds:
        return 0.0
    hits = 0
    for candidates, gold in zip(candidate_lists, golds):
        concepts = candidates.concepts()
        if gold == UNLINKABLE:
            if not concepts or UNLINKABLE in concepts:
                hits += 1
        elif gold in concepts:
            hits += 1
    return hits / len(golds)


def save_index(index: Index, path: str | Path) -> None:
    """Persist to a versioned TSV-postings file: header, doc table, postings."""
    params = index.params
    with open(path, "w", encoding="utf-8") as out:
        out.write(f"#radnorm-index\tv{INDEX_FORMAT_VERSION}\n")
        out.write(f"#params\tk1={params.k1}\tb={params.b}\t"
                  f"n_candidates={params.n_candidates}\tstemming={int(params.stemming)}\n")
        out.write(f"#collection\tN={index.n_docs}\tavglen={index.avg_length!r}\n")
        for doc in index.documents:
            out.write(f"D\t{doc.doc_id}\t{doc.concept}\t{doc.source}\t{doc.text}\n")
        for term in sorted(index.postings):
            runs = " ".join(f"{doc_id}:{tf}" for doc_id, tf in index.postings[term])
            out.write(f"P\t{term}\t{runs}\n")


def load_index(path: str | Path) -> Index:
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n").split("\t")
        if header[:1] != ["#radnorm-index"] or header[1:2] != [f"v{INDEX_FORMAT_VERSION}"]:
            raise RetrievalError(f"unsupported index file header: {header}")
        param_fields = dict(f.split("=", 1) for f in handle.readline().rstrip("\n").split("\t")[1:])
        params = Bm25Params(k1=float(param_fields["k1"]), b=float(param_fields["b"]),
                            n_candidates=int(param_fields["n_candidates"]),
                            stemming=bool(int(param_fields["stemming"])))
        handle.readline()  # collection line; recomputed below
        documents = []
        for line in handle:
            fields = line.rstrip("\n").split("\t")
            if fields[0] == "D":
                documents.append(IndexDocument(doc_id=int(fields[1]), concept=fields[2],
                                               source=fields[3], text=fields[4]))
            # P lines are redundant with the doc table; postings are rebuilt
    return _index_documents(documents, params)
