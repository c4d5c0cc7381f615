import pytest

from radnorm.lexicon import Concept, build_lexicon
from radnorm.span_detection import (SpanEvalError, TaggedSentence,
                                    build_gazetteer, decode_spans,
                                    dictionary_tag, encode_spans,
                                    evaluate_spans, read_conll, repair_bio,
                                    write_conll)


def tagged(tokens, tags):
    return TaggedSentence(tokens=tuple((t, 0, 0) for t in tokens), tags=tuple(tags))


def test_repair_bio():
    assert repair_bio(["O", "I", "I", "O"]) == ["O", "B", "I", "O"]
    assert repair_bio(["I"]) == ["B"]
    assert repair_bio(["B", "I", "O", "B"]) == ["B", "I", "O", "B"]


def test_decode_encode_round_trip():
    tags = ["O", "B", "I", "O", "B", "B", "I", "I"]
    sent = tagged(["a"] * 8, tags)
    spans = decode_spans(sent)
    assert spans == [(1, 3), (4, 5), (5, 8)]
    assert encode_spans(8, spans) == tags


def test_dictionary_tag_simple():
    gaz = {("pleural", "effusion")}
    sent = dictionary_tag("pleural effusion noted", gaz)
    assert sent.tags == ("B", "I", "O")


def test_dictionary_tag_no_match():
    sent = dictionary_tag("nothing to see", {("pleural", "effusion")})
    assert set(sent.tags) == {"O"}


def test_dictionary_tag_greedy_longest_leftmost():
    gaz = {("right", "lung"), ("lung", "apex")}
    sent = dictionary_tag("right lung apex", gaz)
    assert sent.tags == ("B", "I", "O")


def test_dictionary_tag_case_folded():
    sent = dictionary_tag("Pleural Effusion .", {("pleural", "effusion")})
    assert sent.tags == ("B", "I", "O")


def test_build_gazetteer():
    lexicon = build_lexicon([
        Concept(id="RID1", preferred_name="pleural effusion", synonyms=("effusion",)),
    ])
    gaz = build_gazetteer(lexicon, ["chest tube"])
    assert ("pleural", "effusion") in gaz
    assert ("effusion",) in gaz
    assert ("chest", "tube") in gaz


def test_evaluate_identical():
    sents = [tagged(["a", "b", "c"], ["B", "I", "O"])]
    assert evaluate_spans(sents, sents) == (1.0, 1.0, 1.0)


def test_evaluate_empty_prediction_convention():
    pred = [tagged(["a", "b"], ["O", "O"])]
    gold = [tagged(["a", "b"], ["B", "I"])]
    assert evaluate_spans(pred, gold) == (0.0, 0.0, 0.0)
    assert evaluate_spans(gold, gold) == (1.0, 1.0, 1.0)
    both_empty = [tagged(["a"], ["O"])]
    assert evaluate_spans(both_empty, both_empty) == (1.0, 1.0, 1.0)


def test_evaluate_hand_arithmetic():
    # 3 predicted spans, 4 gold, 2 exact matches
    pred = [tagged(["a"] * 10, ["B", "O", "B", "I", "O", "B", "O", "O", "O", "O"])]
    gold = [tagged(["a"] * 10, ["B", "O", "B", "I", "O", "O", "B", "O", "B", "O"])]
    precision, recall, f1 = evaluate_spans(pred, gold)
    assert precision == pytest.approx(2 / 3, abs=1e-9)
    assert recall == pytest.approx(2 / 4, abs=1e-9)
    assert f1 == pytest.approx(2 * (2 / 3) * 0.5 / (2 / 3 + 0.5), abs=1e-9)


def test_evaluate_sentence_order_invariance():
    pred = [tagged(["a", "b"], ["B", "O"]), tagged(["c", "d"], ["O", "B"])]
    gold = [tagged(["a", "b"], ["B", "I"]), tagged(["c", "d"], ["O", "B"])]
    assert (evaluate_spans(pred, gold)
            == evaluate_spans(list(reversed(pred)), list(reversed(gold))))


def test_evaluate_tokenization_mismatch():
    with pytest.raises(SpanEvalError):
        evaluate_spans([tagged(["a"], ["O"])], [tagged(["b"], ["O"])])


def test_evaluate_length_mismatch():
    with pytest.raises(SpanEvalError):
        evaluate_spans([], [tagged(["a"], ["O"])])


def test_conll_round_trip():
    sents = [
        TaggedSentence(tokens=(("pleural", 0, 7), ("effusion", 8, 16)),
                       tags=("B", "I")),
        TaggedSentence(tokens=(("stable", 17, 23),), tags=("B",)),
    ]
    assert read_conll(write_conll(sents)) == sents
