import json
import math

import numpy as np
import pytest
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.metrics import precision_recall_fscore_support

from storyscope import textproc
from storyscope.corpus import Corpus, LabeledDoc
from storyscope.detector import (
    DetectorError,
    LinearModel,
    PromptSpec,
    build_prompt,
    decision_values,
    evaluate,
    fit_tfidf,
    import_external_predictions,
    load_model,
    macro_prf,
    majority_baseline,
    parse_response,
    predict,
    save_model,
    train_linear,
)

from conftest import make_doc

RNG = np.random.default_rng(20240818)


def word_tokens(text):
    return [t.lower for t in textproc.tokenize(text) if t.is_word]


TEXTS = [
    "The dog chased the cat around the yard.",
    "I cooked dinner and we ate together.",
    "You should always check the yard first.",
    "The cat slept. The dog slept. Everyone slept.",
    "We chased deadlines, not dogs.",
    "Dinner was cold but the company was warm.",
]


# ---------------------------------------------------------------------------
# TF-IDF against an independent implementation
# ---------------------------------------------------------------------------


def sklearn_tfidf(texts, min_df):
    vec = TfidfVectorizer(
        tokenizer=word_tokens,
        preprocessor=lambda x: x,
        token_pattern=None,
        lowercase=False,
        min_df=min_df,
        norm="l2",
        smooth_idf=True,
        sublinear_tf=False,
    )
    return vec, vec.fit_transform(texts).toarray()


@pytest.mark.parametrize("min_df", [1, 2])
def test_tfidf_matches_reference_library(min_df):
    docs = [make_doc(f"d{i}", text=t) for i, t in enumerate(TEXTS)]
    model = fit_tfidf(docs, min_df=min_df)
    vec, expected = sklearn_tfidf(TEXTS, min_df)

    assert model.vocabulary == vec.vocabulary_
    got = model.transform(docs)
    np.testing.assert_allclose(got, expected, atol=1e-8)
    np.testing.assert_allclose(model.idf, vec.idf_, atol=1e-8)


def test_tfidf_randomized_against_reference():
    vocab_pool = ["alpha", "beta", "gamma", "delta", "echo", "fox", "golf"]
    for trial in range(25):
        rng = np.random.default_rng([77, trial])
        texts = [
            " ".join(rng.choice(vocab_pool, size=rng.integers(3, 12)))
            for _ in range(rng.integers(3, 9))
        ]
        docs = [make_doc(f"d{i}", text=t) for i, t in enumerate(texts)]
        model = fit_tfidf(docs, min_df=1)
        _, expected = sklearn_tfidf(texts, 1)
        np.testing.assert_allclose(model.transform(docs), expected, atol=1e-8)


def test_tfidf_unknown_only_rows_are_zero():
    docs = [make_doc("a", text="alpha beta"), make_doc("b", text="beta gamma")]
    model = fit_tfidf(docs)
    row = model.transform_texts(["zzz qqq"])
    assert np.all(row == 0.0)


def test_tfidf_input_validation():
    with pytest.raises(DetectorError):
        fit_tfidf([])
    with pytest.raises(DetectorError):
        fit_tfidf([make_doc("a", text="alpha")], min_df=0)
    with pytest.raises(DetectorError, match="min_df"):
        fit_tfidf([make_doc("a", text="alpha beta")], min_df=5)


# ---------------------------------------------------------------------------
# Linear classifier
# ---------------------------------------------------------------------------


def separable_training_set(n=40):
    labeled = []
    for i in range(n):
        if i % 2:
            text = f"yesterday I tripped and fell badly near stone {i} and cried"
            labeled.append(LabeledDoc(make_doc(f"s{i}", text=text), True))
        else:
            text = f"generally you should consider option {i} carefully before deciding"
            labeled.append(LabeledDoc(make_doc(f"n{i}", text=text), False))
    return labeled


def test_linear_separates_training_data():
    labeled = separable_training_set()
    tfidf = fit_tfidf([ld.doc for ld in labeled])
    model = train_linear(tfidf, labeled, epochs=20, seed=3)
    preds = predict(model, tfidf, [ld.doc for ld in labeled])
    assert preds == [ld.story for ld in labeled]
    assert model.loss_history[-1] < model.loss_history[0]


def test_linear_training_is_deterministic():
    labeled = separable_training_set(20)
    tfidf = fit_tfidf([ld.doc for ld in labeled])
    a = train_linear(tfidf, labeled, epochs=5, seed=11)
    b = train_linear(tfidf, labeled, epochs=5, seed=11)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert a.bias == b.bias
    assert a.loss_history == b.loss_history


def test_linear_seed_changes_trajectory():
    labeled = separable_training_set(20)
    tfidf = fit_tfidf([ld.doc for ld in labeled])
    a = train_linear(tfidf, labeled, epochs=1, seed=0)
    b = train_linear(tfidf, labeled, epochs=1, seed=1)
    assert not np.array_equal(a.weights, b.weights)


def test_linear_input_validation():
    labeled = separable_training_set(10)
    tfidf = fit_tfidf([ld.doc for ld in labeled])
    with pytest.raises(DetectorError):
        train_linear(tfidf, labeled, lam=0.0)
    with pytest.raises(DetectorError):
        train_linear(tfidf, labeled, epochs=0)
    one_class = [ld for ld in labeled if ld.story]
    with pytest.raises(DetectorError, match="both classes"):
        train_linear(tfidf, one_class)


def test_predict_zero_decision_goes_to_non_story():
    docs = [make_doc("a", text="alpha beta")]
    tfidf = fit_tfidf(docs)
    model = LinearModel(
        weights=np.zeros(len(tfidf.vocabulary)), bias=0.0, lam=1e-3, epochs=1, seed=0
    )
    assert predict(model, tfidf, docs) == [False]
    assert decision_values(model, tfidf, docs).tolist() == [0.0]


# ---------------------------------------------------------------------------
# Majority baseline and macro metrics
# ---------------------------------------------------------------------------


def test_majority_baseline_closed_form():
    # 58% story prevalence: the constant story predictor scores macro
    # P = q/2, R = 1/2, F1 = q/(1+q) on an evaluation set with the same mix.
    q = 0.58
    train = [True] * 58 + [False] * 42
    model = majority_baseline(train)
    assert model.predicted_class is True
    assert model.train_prevalence == pytest.approx(q)

    gold = [True] * 58 + [False] * 42
    preds = model.predict(gold)
    p, r, f, absent = macro_prf(preds, gold)
    assert p == pytest.approx(q / 2, abs=1e-12)
    assert r == pytest.approx(0.5, abs=1e-12)
    assert f == pytest.approx(q / (1 + q), abs=1e-12)
    assert not absent


def test_majority_tie_breaks_to_non_story():
    model = majority_baseline([True, False])
    assert model.predicted_class is False
    with pytest.raises(DetectorError):
        majority_baseline([])


def test_macro_prf_matches_reference_library():
    for trial in range(25):
        rng = np.random.default_rng([123, trial])
        n = int(rng.integers(2, 60))
        gold = rng.random(n) < rng.uniform(0.1, 0.9)
        preds = rng.random(n) < rng.uniform(0.1, 0.9)
        p, r, f, _ = macro_prf(preds.tolist(), gold.tolist())
        ep, er, ef, _ = precision_recall_fscore_support(
            gold, preds, labels=[True, False], average="macro", zero_division=0
        )
        assert p == pytest.approx(ep, abs=1e-8)
        assert r == pytest.approx(er, abs=1e-8)
        assert f == pytest.approx(ef, abs=1e-8)


def test_macro_prf_flags_absent_class():
    _, _, _, absent = macro_prf([True, True], [True, True])
    assert absent
    with pytest.raises(DetectorError):
        macro_prf([True], [True, False])
    with pytest.raises(DetectorError):
        macro_prf([], [])


def test_evaluate_deterministic_and_centered():
    rng = np.random.default_rng(5)
    gold = (rng.random(120) < 0.5).tolist()
    preds = [g if rng.random() < 0.8 else not g for g in gold]
    a = evaluate(preds, gold, n_resamples=200, seed=9)
    b = evaluate(preds, gold, n_resamples=200, seed=9)
    assert a == b
    point = macro_prf(preds, gold)[2]
    assert a.f1[0] == pytest.approx(point, abs=5 * a.f1[1] / math.sqrt(200) + 0.02)
    with pytest.raises(DetectorError):
        evaluate(preds, gold, n_resamples=0)


# ---------------------------------------------------------------------------
# Prompts
# ---------------------------------------------------------------------------


def test_prompt_modes_validate_shots():
    PromptSpec(mode="zero_shot")
    PromptSpec(mode="chain_of_thought")
    shots = (("a", True), ("b", True), ("c", False), ("d", False))
    PromptSpec(mode="few_shot", shots=shots)
    with pytest.raises(DetectorError, match="2 positive"):
        PromptSpec(mode="few_shot", shots=shots[:3])
    with pytest.raises(DetectorError, match="no shots"):
        PromptSpec(mode="zero_shot", shots=shots)
    with pytest.raises(DetectorError, match="mode"):
        PromptSpec(mode="freeform")


def test_build_prompt_layout_and_determinism():
    shots = (("Once I fell.", True), ("I slipped once.", True),
             ("Buy low.", False), ("Sell high.", False))
    spec = PromptSpec(mode="few_shot", shots=shots)
    prompt = build_prompt(spec, "The target text.")
    assert prompt == build_prompt(spec, "The target text.")
    assert prompt.count("Text: ") == 5
    assert prompt.count("Answer: story") == 2
    assert prompt.count("Answer: not story") == 2
    assert prompt.rstrip().endswith("'story' or 'not story'.")
    assert prompt.index("Once I fell.") < prompt.index("The target text.")

    cot = build_prompt(PromptSpec(mode="chain_of_thought"), "x")
    assert "step by step" in cot


@pytest.mark.parametrize(
    "response,expected",
    [
        ("story", True),
        ("STORY", True),
        ("not story", False),
        ("Not story, though it mentions a story.", False),
        ("It is a story. Definitely not story material otherwise.", True),
        ("no verdict here", None),
        ("", None),
    ],
)
def test_parse_response(response, expected):
    assert parse_response(response) is expected


# ---------------------------------------------------------------------------
# External predictions
# ---------------------------------------------------------------------------


def test_import_external_predictions(tmp_path):
    path = tmp_path / "external.jsonl"
    lines = [
        {"_meta": {"config_hash": "ff", "seed": 1}},
        {"doc_id": "a", "response": "story"},
        {"doc_id": "b", "response": "not story"},
        {"doc_id": "c", "response": "hard to say"},
    ]
    path.write_text("\n".join(json.dumps(x) for x in lines) + "\n")
    docs = [make_doc(i) for i in "abc"]
    preds, unparseable = import_external_predictions(path, docs)
    assert preds == [True, False, False]
    assert unparseable == 1


def test_import_external_missing_doc_errors(tmp_path):
    path = tmp_path / "external.jsonl"
    path.write_text(json.dumps({"doc_id": "a", "response": "story"}) + "\n")
    with pytest.raises(DetectorError, match="'b'"):
        import_external_predictions(path, [make_doc("a"), make_doc("b")])


def test_import_external_malformed_lines(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{nope\n")
    with pytest.raises(DetectorError, match="malformed JSON"):
        import_external_predictions(bad, [])
    short = tmp_path / "short.jsonl"
    short.write_text(json.dumps({"doc_id": "a"}) + "\n")
    with pytest.raises(DetectorError, match="response"):
        import_external_predictions(short, [])


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def test_model_round_trip(tmp_path):
    labeled = separable_training_set(14)
    tfidf = fit_tfidf([ld.doc for ld in labeled])
    model = train_linear(tfidf, labeled, epochs=3, seed=2)
    path = tmp_path / "model.json"
    save_model(path, tfidf, model)
    tfidf2, model2 = load_model(path)
    docs = [ld.doc for ld in labeled]
    np.testing.assert_array_equal(
        decision_values(model, tfidf, docs), decision_values(model2, tfidf2, docs)
    )
    assert tfidf2.vocabulary == tfidf.vocabulary
    assert model2.loss_history == model.loss_history


def test_load_model_rejects_foreign_files(tmp_path):
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(DetectorError, match="not a recognized"):
        load_model(other)
    stale = tmp_path / "stale.json"
    stale.write_text(json.dumps({"format": "storyscope-linear", "version": 99}))
    with pytest.raises(DetectorError, match="version"):
        load_model(stale)
