import json

import pytest

from storyscope import corpus as cm
from storyscope.corpus import (
    CategoryMap,
    Corpus,
    CorpusError,
    SpanAnnotation,
    load_annotations,
    load_corpus,
    merge_overlapping,
    union_story_labels,
)

from conftest import make_doc, span, write_jsonl


# ---------------------------------------------------------------------------
# Documents and corpus loading
# ---------------------------------------------------------------------------


def test_load_corpus_round_trip(tmp_path, tiny_corpus):
    path = tmp_path / "c.jsonl"
    tiny_corpus.write_jsonl(path)
    loaded = load_corpus(path)
    assert [d.id for d in loaded] == [d.id for d in tiny_corpus]
    assert loaded["a"].text == tiny_corpus["a"].text
    assert loaded["b"].kind == "comment"


def test_load_corpus_skips_meta_line(tmp_path, tiny_corpus):
    path = tmp_path / "c.jsonl"
    recs = [{"_meta": {"config_hash": "x", "seed": 0}}]
    recs += [d.to_json_dict() for d in tiny_corpus]
    write_jsonl(path, recs)
    assert len(load_corpus(path)) == len(tiny_corpus)


@pytest.mark.parametrize(
    "bad",
    [
        {"community": "c", "kind": "post", "text": "t"},  # no id
        {"id": "x", "kind": "post", "text": "t"},  # no community
        {"id": "x", "community": "c", "text": "t"},  # no kind
        {"id": "x", "community": "c", "kind": "post"},  # no text
        {"id": "x", "community": "c", "kind": "tweet", "text": "t"},  # bad kind
        {"id": "x", "community": "c", "kind": "post", "text": "   "},  # blank text
        {"id": "", "community": "c", "kind": "post", "text": "t"},  # empty id
    ],
)
def test_load_corpus_rejects_malformed(tmp_path, bad):
    path = tmp_path / "c.jsonl"
    write_jsonl(path, [bad])
    with pytest.raises(CorpusError) as exc:
        load_corpus(path)
    assert ":1" in str(exc.value)  # line number in the message


def test_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    doc = make_doc("same").to_json_dict()
    write_jsonl(path, [doc, doc])
    with pytest.raises(CorpusError, match="same"):
        load_corpus(path)


def test_extra_fields_preserved(tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(
        path,
        [{"id": "x", "community": "c", "kind": "post", "text": "t", "score": 12}],
    )
    doc = load_corpus(path)["x"]
    assert dict(doc.extra)["score"] == 12
    assert doc.to_json_dict()["score"] == 12


def test_unknown_doc_lookup_raises(tiny_corpus):
    with pytest.raises(CorpusError, match="nope"):
        tiny_corpus["nope"]


# ---------------------------------------------------------------------------
# Annotations
# ---------------------------------------------------------------------------


def test_merge_overlapping_strict_overlap_only():
    # Touching spans ([0,3) and [3,6)) stay separate; overlapping merge.
    assert merge_overlapping([(0, 3), (3, 6)]) == [(0, 3), (3, 6)]
    assert merge_overlapping([(0, 4), (3, 6), (10, 12)]) == [(0, 6), (10, 12)]
    assert merge_overlapping([]) == []


def test_load_annotations_validates_and_merges(tmp_path, tiny_corpus):
    path = tmp_path / "ann.jsonl"
    write_jsonl(
        path,
        [
            {"doc_id": "a", "annotator": "p", "label": "story", "start": 0, "end": 10},
            {"doc_id": "a", "annotator": "p", "label": "story", "start": 5, "end": 16},
            {"doc_id": "a", "annotator": "q", "label": "story", "start": 0, "end": 4},
        ],
    )
    spans = load_annotations(path, tiny_corpus)
    p_spans = [s for s in spans if s.annotator == "p"]
    assert [(s.start, s.end) for s in p_spans] == [(0, 16)]  # merged
    assert len(spans) == 2


@pytest.mark.parametrize(
    "rec,msg",
    [
        ({"doc_id": "zz", "annotator": "p", "label": "story", "start": 0, "end": 2}, "zz"),
        ({"doc_id": "a", "annotator": "p", "label": "vibe", "start": 0, "end": 2}, "vibe"),
        ({"doc_id": "a", "annotator": "p", "label": "story", "start": 5, "end": 5}, "out of range"),
        ({"doc_id": "a", "annotator": "p", "label": "story", "start": -1, "end": 3}, "out of range"),
        (
            {"doc_id": "a", "annotator": "p", "label": "story", "start": 0, "end": 10_000},
            "out of range",
        ),
    ],
)
def test_load_annotations_rejects_bad_spans(tmp_path, tiny_corpus, rec, msg):
    path = tmp_path / "ann.jsonl"
    write_jsonl(path, [rec])
    with pytest.raises(CorpusError, match=msg):
        load_annotations(path, tiny_corpus)


def test_load_annotations_custom_labels(tmp_path, tiny_corpus):
    path = tmp_path / "ents.jsonl"
    write_jsonl(
        path,
        [{"doc_id": "a", "annotator": "ner", "label": "PERSON", "start": 0, "end": 1}],
    )
    with pytest.raises(CorpusError):
        load_annotations(path, tiny_corpus)  # default labels reject PERSON
    spans = load_annotations(path, tiny_corpus, allowed_labels=None)
    assert spans[0].label == "PERSON"


def test_union_story_labels():
    docs = Corpus([make_doc("a"), make_doc("b"), make_doc("c")])
    anns = [
        span("a", "p", "story", 0, 5),
        span("b", "q", "story", 0, 5),
        span("c", "p", "event", 0, 5),
        span("b", "stranger", "story", 0, 5),
    ]
    labeled = union_story_labels(docs, anns, {"p", "q"})
    got = {ld.doc.id: ld.story for ld in labeled}
    assert got == {"a": True, "b": True, "c": False}
    # spans from unlisted annotators are dropped entirely
    assert all(s.annotator in {"p", "q"} for ld in labeled for s in ld.spans)
    with pytest.raises(CorpusError):
        union_story_labels(docs, anns, set())


def test_annotation_round_trip(tmp_path, tiny_corpus):
    path = tmp_path / "ann.jsonl"
    original = [span("a", "p", "story", 0, 6), span("b", "p", "event", 1, 4)]
    cm.write_annotations(path, original)
    assert load_annotations(path, tiny_corpus) == original


# ---------------------------------------------------------------------------
# Categories and exclusions
# ---------------------------------------------------------------------------


def test_category_map_from_csv(tmp_path):
    path = tmp_path / "cats.csv"
    path.write_text(
        "community,category\n# note\ncamp,stories\ntips,advice\n", encoding="utf-8"
    )
    cat_map = CategoryMap.from_csv(path, excluded_categories=("advice",))
    assert cat_map.category_of("camp") == "stories"
    assert cat_map.category_of("missing") is None
    assert cat_map.excluded_categories == frozenset({"advice"})


def test_category_map_rejects_unknown_exclusion():
    with pytest.raises(CorpusError, match="ghost"):
        CategoryMap(entries={"camp": "stories"}, excluded_categories=frozenset({"ghost"}))


def test_apply_categories_drops_unmapped(tiny_corpus):
    cat_map = CategoryMap(entries={"camp": "stories"})
    mapped, unmapped = cm.apply_categories(tiny_corpus, cat_map)
    assert unmapped == ["tips"]
    assert {d.community for d in mapped} == {"camp"}
    assert all(d.category == "stories" for d in mapped)


def test_exclusion_filtering(tmp_path, tiny_corpus):
    path = tmp_path / "excl.txt"
    path.write_text("# header\na\n\nd\n", encoding="utf-8")
    ids = cm.load_exclusion_ids(path)
    assert ids == frozenset({"a", "d"})
    kept = cm.filter_excluded(tiny_corpus, ids)
    assert [d.id for d in kept] == ["b", "c"]


# ---------------------------------------------------------------------------
# Sampling and splits
# ---------------------------------------------------------------------------


def big_corpus(n_per=30):
    docs = []
    for comm, cat in (("camp", "stories"), ("tips", "advice"), ("pets", "life")):
        for i in range(n_per):
            docs.append(
                make_doc(
                    f"{comm}-{i}",
                    comm,
                    text="word " * (5 + i % 20) + "end.",
                    category=cat,
                )
            )
    return Corpus(docs), CategoryMap(
        entries={"camp": "stories", "tips": "advice", "pets": "life"}
    )


def test_sample_annotation_set_caps_and_bounds():
    corpus, cat_map = big_corpus()
    sampled = cm.sample_annotation_set(
        corpus, cat_map, per_community=5, min_tokens=8, max_tokens=18, seed=1
    )
    per_comm = {}
    for d in sampled:
        per_comm[d.community] = per_comm.get(d.community, 0) + 1
        n_tokens = len(__import__("storyscope.textproc", fromlist=["x"]).tokenize(d.text))
        assert 8 <= n_tokens <= 18
    assert all(v <= 5 for v in per_comm.values())


def test_sample_annotation_set_respects_exclusions_and_downsample():
    corpus, _ = big_corpus()
    cat_map = CategoryMap(
        entries={"camp": "stories", "tips": "advice", "pets": "life"},
        excluded_categories=frozenset({"advice"}),
    )
    sampled = cm.sample_annotation_set(
        corpus, cat_map, per_community=5, min_tokens=1, max_tokens=100, seed=1
    )
    assert "tips" not in {d.community for d in sampled}
    down = cm.sample_annotation_set(
        corpus,
        cat_map,
        per_community=5,
        min_tokens=1,
        max_tokens=100,
        downsample={"stories": 0},
        seed=1,
    )
    assert "camp" not in {d.community for d in down}


def test_sample_annotation_set_deterministic():
    corpus, cat_map = big_corpus()
    a = cm.sample_annotation_set(corpus, cat_map, 5, 1, 100, seed=3)
    b = cm.sample_annotation_set(corpus, cat_map, 5, 1, 100, seed=3)
    c = cm.sample_annotation_set(corpus, cat_map, 5, 1, 100, seed=4)
    assert [d.id for d in a] == [d.id for d in b]
    assert [d.id for d in a] != [d.id for d in c]


def test_sample_prediction_set_exact_or_dropped():
    corpus, _ = big_corpus()
    small = Corpus(list(corpus)[:65])  # camp 30, tips 30, pets 5
    sampled = cm.sample_prediction_set(small, per_community=10, seed=0)
    counts = {}
    for d in sampled:
        counts[d.community] = counts.get(d.community, 0) + 1
    assert counts == {"camp": 10, "tips": 10}  # pets dropped


def test_split_sizes_and_disjointness():
    corpus, _ = big_corpus()
    labeled = [cm.LabeledDoc(doc=d, story=False) for d in corpus]
    train, val, test = cm.split(labeled, (60, 15, 15), seed=2)
    assert (len(train), len(val), len(test)) == (60, 15, 15)
    ids = [ld.doc.id for part in (train, val, test) for ld in part]
    assert len(set(ids)) == len(ids)
    again = cm.split(labeled, (60, 15, 15), seed=2)
    assert [ld.doc.id for ld in again[0]] == [ld.doc.id for ld in train]
    with pytest.raises(CorpusError):
        cm.split(labeled, (80, 15, 15), seed=2)


def test_split_permutes(tiny_corpus):
    labeled = [cm.LabeledDoc(doc=d, story=False) for d in tiny_corpus]
    train, _, _ = cm.split(labeled, (4, 0, 0), seed=5)
    assert sorted(ld.doc.id for ld in train) == ["a", "b", "c", "d"]
