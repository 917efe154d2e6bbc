"""Synthetic corpus generator with planted effects.

Produces a labeled corpus whose "story" documents are past-tense,
first-person, event-dense narratives and whose "non-story" documents are
second-person, present-tense advice.  Used by the test suite and by the
``synth`` CLI subcommand to exercise the full pipeline end to end without
any external data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import textproc
from .corpus import CategoryMap, Corpus, Document, SpanAnnotation

ANNOTATOR_A = "ann_a"
ANNOTATOR_B = "ann_b"

# (community, category, share of docs, story fraction)
_COMMUNITIES = (
    ("campfire_tales", "stories", 0.12, 0.95),
    ("night_shift_stories", "stories", 0.11, 0.80),
    ("daily_journal", "life", 0.13, 0.55),
    ("pet_pals", "life", 0.125, 0.45),
    ("cooking_corner", "hobbies", 0.13, 0.35),
    ("board_game_guild", "hobbies", 0.125, 0.30),
    ("finance_tips", "advice", 0.125, 0.15),
    ("gadget_help", "advice", 0.135, 0.05),
)

_PAST_IRREGULAR = (
    "broke", "found", "lost", "took", "saw", "went", "got", "fell",
    "bought", "brought", "caught", "drove", "ate", "heard", "left",
    "made", "met", "ran", "said", "told", "threw", "woke", "wrote",
)
_PAST_REGULAR = (
    "tripped", "dropped", "grabbed", "spilled", "smashed", "fixed",
    "carried", "cleaned", "watched", "walked", "painted", "packed",
    "climbed", "knocked", "laughed", "shouted", "wandered", "hurried",
)
_BASE_VERBS = (
    "check", "clean", "fix", "replace", "unplug", "update", "measure",
    "stir", "pour", "scrub", "wipe", "plan", "save", "test", "press",
    "follow", "compare", "restart", "search", "sort", "label", "store",
)
_CONCRETE_NOUNS = (
    "mug", "ladder", "bike", "stove", "puppy", "hammer", "backpack",
    "kettle", "lantern", "wagon", "rope", "bucket", "jacket", "shovel",
    "candle", "basket",
)
_ABSTRACT_NOUNS = (
    "warranty", "budget", "account", "schedule", "option", "policy",
    "estimate", "routine", "strategy", "checklist", "setting", "plan",
)
_NAMES = ("Sam", "Alex", "Jordan", "Maya", "Ben", "Priya", "Leo", "Nina")
_TIMES = (
    "yesterday", "last night", "this morning", "on Friday",
    "after dinner", "before sunrise", "last weekend", "around noon",
)
_PLACES = (
    "in the kitchen", "near the garage", "at the market", "by the lake",
    "on the porch", "behind the shed", "at the office", "on the trail",
)
_ADVICE_OPENERS = (
    "You should", "You can", "You must", "First you", "Next you",
    "Before anything else you", "Whenever possible you",
)
_ADVICE_TAILS = (
    "before it wears out", "to avoid extra fees", "every single week",
    "until the numbers match", "whenever the light blinks",
    "so the costs stay low", "while the unit cools down",
)


def _pick(rng: np.random.Generator, options) -> str:
    return options[int(rng.integers(len(options)))]


@dataclass(frozen=True)
class _Sentence:
    text: str
    event_span: tuple[int, int] | None  # offsets within the sentence
    entity_span: tuple[int, int] | None


def _story_sentence(rng: np.random.Generator) -> _Sentence:
    kind = int(rng.integers(3))
    verb = _pick(rng, _PAST_IRREGULAR if rng.integers(2) else _PAST_REGULAR)
    noun = _pick(rng, _CONCRETE_NOUNS)
    if kind == 0:
        subject = "I"
        tail = f"the {noun} {_pick(rng, _TIMES)}"
        entity = None
    elif kind == 1:
        name = _pick(rng, _NAMES)
        subject = name
        tail = f"my {noun} {_pick(rng, _PLACES)}"
        entity = (0, len(name))
    else:
        subject = "I"
        tail = f"a {noun} and it surprised me"
        entity = None
    text = f"{subject} {verb} {tail}."
    v_start = len(subject) + 1
    return _Sentence(text=text, event_span=(v_start, v_start + len(verb)), entity_span=entity)


def _advice_sentence(rng: np.random.Generator) -> _Sentence:
    kind = int(rng.integers(3))
    verb = _pick(rng, _BASE_VERBS)
    noun = _pick(rng, _ABSTRACT_NOUNS)
    if kind == 0:
        text = f"{_pick(rng, _ADVICE_OPENERS)} {verb} the {noun} {_pick(rng, _ADVICE_TAILS)}."
    elif kind == 1:
        text = f"If you {verb} your {noun}, you save time {_pick(rng, _ADVICE_TAILS)}."
    else:
        text = f"Do you {verb} the {noun} often enough?"
    return _Sentence(text=text, event_span=None, entity_span=None)


@dataclass(frozen=True)
class SynthDoc:
    doc: Document
    story: bool
    event_spans: tuple[tuple[int, int], ...]
    entity_spans: tuple[tuple[int, int], ...]
    sentence_ends: tuple[int, ...]


def _build_doc(
    rng: np.random.Generator, doc_id: str, community: str, category: str, story: bool
) -> SynthDoc:
    n_sentences = int(rng.integers(3, 7))
    sentences = [
        (_story_sentence if story else _advice_sentence)(rng) for _ in range(n_sentences)
    ]
    parts: list[str] = []
    events: list[tuple[int, int]] = []
    entities: list[tuple[int, int]] = []
    ends: list[int] = []
    offset = 0
    for i, s in enumerate(sentences):
        parts.append(s.text)
        if s.event_span is not None:
            events.append((offset + s.event_span[0], offset + s.event_span[1]))
        if s.entity_span is not None:
            entities.append((offset + s.entity_span[0], offset + s.entity_span[1]))
        offset += len(s.text)
        ends.append(offset)
        if i < n_sentences - 1:
            offset += 1  # joining space
    text = " ".join(parts)

    if story:
        verb = _pick(rng, _PAST_IRREGULAR)
        summary = f"How I {verb} the {_pick(rng, _CONCRETE_NOUNS)}."
        kind = "post" if rng.random() < 0.7 else "comment"
    else:
        summary = f"Advice on the {_pick(rng, _ABSTRACT_NOUNS)}."
        kind = "post" if rng.random() < 0.5 else "comment"
    doc = Document(
        id=doc_id,
        community=community,
        category=category,
        kind=kind,
        text=text,
        summary=summary,
    )
    return SynthDoc(
        doc=doc,
        story=story,
        event_spans=tuple(events),
        entity_spans=tuple(entities),
        sentence_ends=tuple(ends),
    )


@dataclass
class SynthData:
    corpus: Corpus
    gold: dict[str, bool]
    annotations: list[SpanAnnotation]
    realis_spans: list[SpanAnnotation]
    entity_spans: list[SpanAnnotation]
    lexicon: textproc.ConcretenessLexicon
    category_map: CategoryMap


def make_lexicon() -> textproc.ConcretenessLexicon:
    ratings: dict[str, float] = {}
    for i, w in enumerate(_CONCRETE_NOUNS):
        ratings[w] = 4.4 + 0.5 * ((i % 5) / 5.0)
    for i, w in enumerate(_ABSTRACT_NOUNS):
        ratings[w] = 1.6 + 0.6 * ((i % 5) / 5.0)
    for i, w in enumerate(_NAMES):
        ratings[w.lower()] = 4.0 + 0.3 * (i % 3)
    return textproc.ConcretenessLexicon(ratings)


def generate(n_docs: int = 2000, seed: int = 0) -> SynthData:
    """Deterministic planted-effect corpus.

    Story documents carry two annotators' story spans (differing
    boundaries), expert event spans on most past-tense verbs, a realis-style
    tagger file that drops a different 10%, and PERSON entity spans on
    names.
    """
    if n_docs < len(_COMMUNITIES) * 2:
        raise ValueError(f"n_docs must be at least {len(_COMMUNITIES) * 2}")
    rng = np.random.default_rng(seed)

    counts = [int(round(share * n_docs)) for _, _, share, _ in _COMMUNITIES]
    counts[-1] += n_docs - sum(counts)

    corpus = Corpus()
    gold: dict[str, bool] = {}
    annotations: list[SpanAnnotation] = []
    realis: list[SpanAnnotation] = []
    entities: list[SpanAnnotation] = []
    serial = 0
    for (community, category, _share, story_frac), count in zip(_COMMUNITIES, counts):
        n_story = int(round(story_frac * count))
        for j in range(count):
            story = j < n_story
            doc_id = f"{community}-{serial:05d}"
            serial += 1
            sd = _build_doc(rng, doc_id, community, category, story)
            corpus.add(sd.doc)
            gold[doc_id] = story
            text_len = len(sd.doc.text)
            if story:
                # ann_a highlights a prefix of the document, ann_b all of it.
                cut = sd.sentence_ends[int(rng.integers(len(sd.sentence_ends)))]
                annotations.append(SpanAnnotation(doc_id, ANNOTATOR_A, "story", 0, cut))
                annotations.append(SpanAnnotation(doc_id, ANNOTATOR_B, "story", 0, text_len))
                for k, (s, e) in enumerate(sd.event_spans):
                    annotations.append(SpanAnnotation(doc_id, ANNOTATOR_A, "event", s, e))
                    if rng.random() > 0.1:
                        annotations.append(SpanAnnotation(doc_id, ANNOTATOR_B, "event", s, e))
                    if rng.random() > 0.1:
                        realis.append(SpanAnnotation(doc_id, "realis", "event", s, e))
            for s, e in sd.entity_spans:
                entities.append(SpanAnnotation(doc_id, "ner", "PERSON", s, e))

    cat_entries = {name: cat for name, cat, _, _ in _COMMUNITIES}
    return SynthData(
        corpus=corpus,
        gold=gold,
        annotations=annotations,
        realis_spans=realis,
        entity_spans=entities,
        lexicon=make_lexicon(),
        category_map=CategoryMap(entries=cat_entries),
    )


def write_dataset(data: SynthData, out_dir: str | Path) -> dict[str, Path]:
    """Write every artifact the CLI pipeline consumes, plus gold labels."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "corpus.jsonl",
        "annotations": out / "annotations.jsonl",
        "realis": out / "realis.jsonl",
        "entities": out / "entities.jsonl",
        "lexicon": out / "lexicon.tsv",
        "categories": out / "categories.csv",
        "gold": out / "gold.jsonl",
    }
    data.corpus.write_jsonl(paths["corpus"])
    for key, spans in (
        ("annotations", data.annotations),
        ("realis", data.realis_spans),
        ("entities", data.entity_spans),
    ):
        with open(paths[key], "w", encoding="utf-8") as fh:
            for sp in spans:
                fh.write(json.dumps(sp.to_json_dict(), ensure_ascii=False) + "\n")
    with open(paths["lexicon"], "w", encoding="utf-8") as fh:
        for word in sorted(data.lexicon.ratings):
            fh.write(f"{word}\t{data.lexicon.ratings[word]!r}\n")
    with open(paths["categories"], "w", encoding="utf-8") as fh:
        fh.write("community,category\n")
        for community in sorted(data.category_map.entries):
            fh.write(f"{community},{data.category_map.entries[community]}\n")
    with open(paths["gold"], "w", encoding="utf-8") as fh:
        for doc_id in sorted(data.gold):
            fh.write(json.dumps({"doc_id": doc_id, "story": data.gold[doc_id]}) + "\n")
    return paths
