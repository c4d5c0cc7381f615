import math
import random
from collections import Counter

import pytest

from radnorm.corpus import Mention
from radnorm.expansion import ExpandedMention
from radnorm.lexicon import UNLINKABLE, Concept, build_lexicon, rid_number
from radnorm.retrieval import (Bm25Params, RetrievalError, build_index,
                               load_index, recall_at_n, retrieve_candidates,
                               save_index, score, tokenize)


def brute_force_scores(doc_texts, query, k1, b):
    """Independent BM25 oracle recomputing df/tf from the raw documents."""
    docs = [tokenize(t) for t in doc_texts]
    n = len(docs)
    lengths = [len(d) for d in docs]
    avg = sum(lengths) / n
    scores = []
    for doc, length in zip(docs, lengths):
        tf = Counter(doc)
        total = 0.0
        for term in tokenize(query):
            f = tf.get(term, 0)
            if f == 0:
                continue
            df = sum(1 for other in docs if term in other)
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            total += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * length / avg))
        scores.append(total)
    return scores


def expanded(text):
    return ExpandedMention(original=text, expanded=text)


def mention(surface, gold, mid="T1"):
    return Mention(id=mid, span_start=0, span_end=len(surface), surface=surface,
                   entity_class="ClinicalFinding", gold_concept=gold)


@pytest.fixture
def three_concept_lexicon():
    return build_lexicon([
        Concept(id="RID1301", preferred_name="lung"),
        Concept(id="RID1534", preferred_name="costophrenic sulcus"),
        Concept(id="RID5055", preferred_name="disorder of brain"),
    ])


def test_build_index_counts(three_concept_lexicon):
    index = build_index(three_concept_lexicon)
    assert index.n_docs == 3
    expected_avg = (1 + 2 + 3) / 3
    assert index.avg_length == pytest.approx(expected_avg)


def test_training_mention_document(three_concept_lexicon):
    index = build_index(three_concept_lexicon, [mention("chest tube", "RID1301")])
    assert index.n_docs == 4
    doc = index.documents[3]
    assert doc.source == "training_mention" and doc.concept == "RID1301"


def test_duplicate_training_mentions_are_distinct_docs(three_concept_lexicon):
    index = build_index(three_concept_lexicon,
                        [mention("chest tube", "RID1301", "T1"),
                         mention("chest tube", "RID1301", "T2")])
    assert index.n_docs == 5
    assert len(index.postings["chest"]) == 2


def test_empty_collection_rejected():
    with pytest.raises(RetrievalError):
        build_index(build_lexicon([]))


def test_score_no_overlap(three_concept_lexicon):
    index = build_index(three_concept_lexicon)
    assert score(index, "xylophone", 0) == 0.0


def test_score_unknown_doc(three_concept_lexicon):
    index = build_index(three_concept_lexicon)
    with pytest.raises(RetrievalError):
        score(index, "lung", 99)


def test_score_closed_form_single_doc():
    lexicon = build_lexicon([Concept(id="RID1", preferred_name="pleural effusion")])
    params = Bm25Params()
    index = build_index(lexicon, params=params)
    # one document, query == document: len == avglen so the norm is just k1
    idf = math.log(1 + (1 - 1 + 0.5) / (1 + 0.5))
    expected = 2 * idf * (params.k1 + 1) * 1 / (1 + params.k1)
    assert score(index, "pleural effusion", 0) == pytest.approx(expected, abs=1e-12)


def test_score_matches_brute_force(three_concept_lexicon):
    params = Bm25Params()
    index = build_index(three_concept_lexicon, [mention("disorder of lung", "RID1301")])
    texts = [d.text for d in index.documents]
    for query in ["lung", "disorder of brain", "costophrenic lung disorder"]:
        oracle = brute_force_scores(texts, query, params.k1, params.b)
        for doc_id, expected in enumerate(oracle):
            assert score(index, query, doc_id) == pytest.approx(expected, abs=1e-9)


def test_retrieve_dedupes_concepts_with_max_score():
    lexicon = build_lexicon([
        Concept(id="RID1301", preferred_name="lung"),
        Concept(id="RID1534", preferred_name="costophrenic sulcus"),
    ])
    index = build_index(lexicon, [mention("costophrenic angle", "RID1534")])
    result = retrieve_candidates(index, expanded("costophrenic angle"))
    assert result.concepts() == ["RID1534"]
    # the dedup keeps the best-scoring of the two RID1534 documents
    doc_scores = [score(index, "costophrenic angle", d.doc_id)
                  for d in index.documents if d.concept == "RID1534"]
    assert result.candidates[0][1] == pytest.approx(max(doc_scores))


def test_retrieve_empty_when_no_overlap(three_concept_lexicon):
    index = build_index(three_concept_lexicon)
    result = retrieve_candidates(index, expanded("zzz qqq"))
    assert len(result) == 0


def test_topn_prefix_property(three_concept_lexicon):
    index = build_index(three_concept_lexicon, [mention("disorder of lung", "RID1301")])
    q = expanded("disorder of lung brain costophrenic")
    top2 = retrieve_candidates(index, q, Bm25Params(n_candidates=2))
    top10 = retrieve_candidates(index, q, Bm25Params(n_candidates=10))
    assert top10.candidates[:2] == top2.candidates


def test_self_retrieval(three_concept_lexicon):
    index = build_index(three_concept_lexicon)
    result = retrieve_candidates(index, expanded("costophrenic sulcus"))
    assert result.concepts()[0] == "RID1534"


def test_unlinkable_candidate_sorts_last_on_tie():
    lexicon = build_lexicon([Concept(id="RID5", preferred_name="gas pattern")])
    index = build_index(lexicon, [mention("gas pattern", UNLINKABLE)])
    result = retrieve_candidates(index, expanded("gas pattern"))
    assert UNLINKABLE in result.concepts()
    # same tokens, but the sentinel document is shorter is not: both "gas pattern"
    # -> identical scores, tie broken with the sentinel last
    assert result.concepts() == ["RID5", UNLINKABLE]


def _random_collection(rng):
    vocab = [f"t{i}" for i in range(rng.randint(3, 20))]
    n_docs = rng.randint(2, 50)
    concepts = []
    texts = []
    for i in range(n_docs):
        length = rng.randint(1, 8)
        texts.append(" ".join(rng.choice(vocab) for _ in range(length)))
        concepts.append(f"RID{rng.randint(1, 30)}" if rng.random() > 0.1 else UNLINKABLE)
    return texts, concepts


def _oracle_candidates(texts, concepts, query, params):
    scores = brute_force_scores(texts, query, params.k1, params.b)
    best = {}
    for concept, s in zip(concepts, scores):
        if s > 0 and (concept not in best or s > best[concept]):
            best[concept] = s
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], rid_number(kv[0])))
    return ranked[:params.n_candidates]


def _index_from_texts(texts, concepts, params):
    lexicon = build_lexicon([Concept(id="RID90001", preferred_name="zzzz-placeholder")])
    mentions = [mention(t, c, f"T{i}") for i, (t, c) in enumerate(zip(texts, concepts))]
    return build_index(lexicon, mentions, params)


def test_randomized_oracle_equivalence():
    rng = random.Random(42)
    for trial in range(50):
        texts, concepts = _random_collection(rng)
        params = Bm25Params(k1=rng.uniform(0.5, 2.0), b=rng.uniform(0.0, 1.0),
                            n_candidates=rng.choice([3, 5, 10]))
        index = _index_from_texts(texts, concepts, params)
        all_texts = [d.text for d in index.documents]
        all_concepts = [d.concept for d in index.documents]
        query = " ".join(rng.choice([f"t{i}" for i in range(20)])
                         for _ in range(rng.randint(1, 5)))
        got = retrieve_candidates(index, expanded(query), params)
        want = _oracle_candidates(all_texts, all_concepts, query, params)
        assert [c for c, _ in got.candidates] == [c for c, _ in want]
        for (_, a), (_, b) in zip(got.candidates, want):
            assert a == pytest.approx(b, abs=1e-9)


def test_recall_at_n_basic():
    lists = [make_candidates([("RID1", 2.0), ("RID2", 1.0)]),
             make_candidates([("RID9", 1.0)])]
    assert recall_at_n(lists, ["RID1", "RID9"]) == 1.0
    assert recall_at_n(lists, ["RID3", "RID4"]) == 0.0


def make_candidates(pairs):
    from radnorm.retrieval import CandidateList
    return CandidateList(mention=expanded("m"), candidates=tuple(pairs))


def test_recall_unlinkable_rule():
    lists = [make_candidates([("RID1", 1.0)]),
             make_candidates([("RID1", 1.0)]),
             make_candidates([("RID2", 1.0)]),
             make_candidates([])]
    golds = ["RID1", "RID1", "RID2", UNLINKABLE]
    assert recall_at_n(lists, golds) == 1.0


def test_recall_length_mismatch():
    with pytest.raises(RetrievalError):
        recall_at_n([make_candidates([])], ["RID1", "RID2"])


def test_stemming_config():
    lexicon = build_lexicon([Concept(id="RID1", preferred_name="lung")])
    stemmed = build_index(lexicon, params=Bm25Params(stemming=True))
    plain = build_index(lexicon, params=Bm25Params(stemming=False))
    assert retrieve_candidates(stemmed, expanded("lungs")).concepts() == ["RID1"]
    assert retrieve_candidates(plain, expanded("lungs")).concepts() == []


def test_persistence_round_trip(tmp_path, three_concept_lexicon):
    params = Bm25Params(k1=1.4, b=0.6, n_candidates=7)
    index = build_index(three_concept_lexicon, [mention("chest tube", "RID1301")], params)
    path = tmp_path / "index.tsv"
    save_index(index, path)
    loaded = load_index(path)
    assert loaded.params == params
    assert [d.text for d in loaded.documents] == [d.text for d in index.documents]
    q = expanded("disorder of lung")
    assert retrieve_candidates(loaded, q).candidates == retrieve_candidates(index, q).candidates
