"""Per-document measure extraction: event rates, tense and pronoun usage,
entity mentions, concreteness, and sequentiality under a pluggable
language-model contract with a built-in interpolated trigram fallback.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

from . import textproc
from .corpus import Corpus, Document, SpanAnnotation, merge_overlapping


class FeaturesError(ValueError):
    pass


#: Measure columns in reporting order.
MEASURES = (
    "event_rate_expert",
    "event_rate_realis",
    "past_rate",
    "non_past_rate",
    "first_sg",
    "first_pl",
    "second",
    "third_sg",
    "entity_mention_rate",
    "concreteness",
    "sequentiality",
    "is_comment",
    "n_tokens",
    "mean_sentence_len",
)

CSV_COLUMNS = ("doc_id",) + MEASURES + ("flags",)

REALIS_ANNOTATOR = "realis"
PERSON_LABEL = "PERSON"


@dataclass(frozen=True)
class FeatureVector:
    doc_id: str
    event_rate_expert: float
    event_rate_realis: float
    past_rate: float
    non_past_rate: float
    first_sg: float
    first_pl: float
    second: float
    third_sg: float
    entity_mention_rate: float
    concreteness: float
    sequentiality: float
    is_comment: int
    n_tokens: int
    mean_sentence_len: float
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return {m: float(getattr(self, m)) for m in MEASURES}

    def to_csv_row(self) -> list[str]:
        row = [self.doc_id]
        for m in MEASURES:
            v = getattr(self, m)
            row.append(repr(float(v)) if isinstance(v, float) else str(v))
        row.append(";".join(self.flags))
        return row


# ---------------------------------------------------------------------------
# Individual measures
# ---------------------------------------------------------------------------


def _word_token_count(tokens: Sequence[textproc.Token]) -> int:
    return sum(1 for t in tokens if t.is_word)


def event_rate(doc: Document, spans: Sequence[SpanAnnotation] | None, source: str) -> float:
    """Event spans per word token.

    source="expert_union" pools event spans from all human annotators and
    merges overlaps so a doubly-marked event counts once; source=
    "realis_file" counts spans by the external tagger (annotator "realis").
    ``spans=None`` means the corresponding input was never supplied, which
    is an error rather than a zero.
    """
    if source not in ("expert_union", "realis_file"):
        raise FeaturesError(f"unknown event source {source!r}")
    if spans is None:
        raise FeaturesError(f"no {source} event input available for document {doc.id!r}")
    if source == "expert_union":
        ranges = [
            (sp.start, sp.end)
            for sp in spans
            if sp.doc_id == doc.id and sp.label == "event" and sp.annotator != REALIS_ANNOTATOR
        ]
    else:
        ranges = [
            (sp.start, sp.end)
            for sp in spans
            if sp.doc_id == doc.id and sp.label == "event" and sp.annotator == REALIS_ANNOTATOR
        ]
    n_events = len(merge_overlapping(ranges))
    words = _word_token_count(textproc.tokenize(doc.text))
    return n_events / words if words else 0.0


def entity_mention_rate(
    doc: Document, person_spans: Sequence[SpanAnnotation] | None = None
) -> float:
    """(third-person-singular pronouns + PERSON entity spans) per word token.

    Without an entity span file the PERSON count is zero; the caller is
    responsible for flagging the vector as pronoun-only in that case.
    """
    tokens = textproc.tokenize(doc.text)
    words = _word_token_count(tokens)
    if words == 0:
        return 0.0
    third = sum(1 for t in tokens if t.is_word and t.lower in textproc.THIRD_SG)
    persons = 0
    if person_spans is not None:
        persons = sum(
            1 for sp in person_spans if sp.doc_id == doc.id and sp.label == PERSON_LABEL
        )
    return (third + persons) / words


# ---------------------------------------------------------------------------
# Language-model contract and the trigram fallback
# ---------------------------------------------------------------------------


class LmContract(Protocol):
    """A scorer returning the natural-log probability of a token sequence
    given a prefix of preceding tokens.  Must be deterministic and safe for
    concurrent read-only use."""

    def logprob(self, sentence: Sequence[str], prefix: Sequence[str]) -> float: ...


_BOS = "\x00bos"
_UNK = "\x00unk"


class TrigramLm:
    """Interpolated trigram model with additive smoothing and an UNK class.

    P(w | u, v) = λ1·P1(w) + λ2·P2(w|v) + λ3·P3(w|u,v), each component
    smoothed by α over the training vocabulary plus UNK, so every
    conditional distribution sums to one.
    """

    def __init__(self, alpha: float, lambdas: tuple[float, float, float]):
        if not (alpha > 0 and math.isfinite(alpha)):
            raise FeaturesError(f"smoothing alpha must be finite and > 0, got {alpha}")
        if len(lambdas) != 3 or any(l < 0 for l in lambdas):
            raise FeaturesError("need three non-negative interpolation weights")
        if abs(sum(lambdas) - 1.0) > 1e-9:
            raise FeaturesError(f"interpolation weights must sum to 1, got {sum(lambdas)}")
        self.alpha = float(alpha)
        self.lambdas = (float(lambdas[0]), float(lambdas[1]), float(lambdas[2]))
        self.vocab: set[str] = set()
        self._uni: Counter = Counter()
        self._bi: Counter = Counter()
        self._tri: Counter = Counter()
        self._ctx1: Counter = Counter()
        self._ctx2: Counter = Counter()
        self._n_tokens = 0

    # -- training ----------------------------------------------------------

    def _observe(self, tokens: Sequence[str]) -> None:
        seq = [_BOS, _BOS] + [t.lower() for t in tokens]
        for i in range(2, len(seq)):
            u, v, w = seq[i - 2], seq[i - 1], seq[i]
            self.vocab.add(w)
            self._uni[w] += 1
            self._bi[(v, w)] += 1
            self._tri[(u, v, w)] += 1
            self._ctx1[v] += 1
            self._ctx2[(u, v)] += 1
            self._n_tokens += 1

    # -- scoring -----------------------------------------------------------

    def _norm(self, token: str) -> str:
        t = token.lower()
        return t if t in self.vocab or t == _BOS else _UNK

    def conditional(self, w: str, u: str, v: str) -> float:
        """P(w | u, v) for already-normalized symbols."""
        a = self.alpha
        classes = len(self.vocab) + 1  # + UNK
        l1, l2, l3 = self.lambdas
        p1 = (self._uni[w] + a) / (self._n_tokens + a * classes)
        p2 = (self._bi[(v, w)] + a) / (self._ctx1[v] + a * classes)
        p3 = (self._tri[(u, v, w)] + a) / (self._ctx2[(u, v)] + a * classes)
        return l1 * p1 + l2 * p2 + l3 * p3

    def logprob(self, sentence: Sequence[str], prefix: Sequence[str] = ()) -> float:
        if self._n_tokens == 0:
            raise FeaturesError("model has no training counts")
        seq = [_BOS, _BOS] + [self._norm(t) for t in prefix] + [self._norm(t) for t in sentence]
        start = 2 + len(prefix)
        total = 0.0
        for i in range(start, len(seq)):
            total += math.log(self.conditional(seq[i], seq[i - 2], seq[i - 1]))
        return total


def train_trigram_lm(
    docs: Iterable[Document],
    alpha: float = 0.1,
    lambdas: tuple[float, float, float] = (0.2, 0.3, 0.5),
    seed: int = 0,
) -> TrigramLm:
    """Count-based training, one token stream per document.

    Whole documents (not isolated sentences) are observed so that
    cross-sentence contexts carry real counts — conditioning on preceding
    sentences has to be able to move the score.  The model is a pure
    function of the texts and hyperparameters; ``seed`` is accepted for
    interface symmetry with other trainers but nothing here samples.
    """
    del seed
    lm = TrigramLm(alpha=alpha, lambdas=lambdas)
    n_tokens = 0
    for doc in docs:
        tokens = [t.text for t in textproc.tokenize(doc.text)]
        if tokens:
            lm._observe(tokens)
            n_tokens += len(tokens)
    if n_tokens == 0:
        raise FeaturesError("cannot train a language model on empty text")
    return lm


# ---------------------------------------------------------------------------
# Sequentiality
# ---------------------------------------------------------------------------


def _sentence_token_texts(text: str) -> list[list[str]]:
    tokens = textproc.tokenize(text)
    by_sentence: dict[int, list[str]] = {}
    for t in tokens:
        by_sentence.setdefault(t.sentence_index, []).append(t.text)
    return [by_sentence[i] for i in sorted(by_sentence)]


def sequentiality(doc: Document, lm: LmContract) -> float:
    """Mean per-sentence, per-token gain (nats) from conditioning on the
    full preceding context over conditioning on the topic alone.

    The topic is the document's stored summary; a missing summary is an
    error rather than a silent substitute.
    """
    if doc.summary is None:
        raise FeaturesError(f"document {doc.id!r} has no summary to serve as its topic")
    sentences = _sentence_token_texts(doc.text)
    if not sentences:
        raise FeaturesError(f"document {doc.id!r} has no sentences")
    topic = [t.text for t in textproc.tokenize(doc.summary)]
    total = 0.0
    history: list[str] = []
    for sent in sentences:
        with_context = lm.logprob(sent, topic + history)
        topic_only = lm.logprob(sent, topic)
        total += (with_context - topic_only) / len(sent)
        history.extend(sent)
    return total / len(sentences)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def extract_features(
    doc: Document,
    spans: Sequence[SpanAnnotation] | None = None,
    lexicon: textproc.ConcretenessLexicon | None = None,
    lm: LmContract | None = None,
    realis_spans: Sequence[SpanAnnotation] | None = None,
    entity_spans: Sequence[SpanAnnotation] | None = None,
    pos_override: dict[int, str] | None = None,
) -> FeatureVector:
    """Assemble the full measure vector for one document.

    Optional inputs that are absent produce NaN (or a defined fallback) plus
    an entry in ``flags`` — never a silent zero.
    """
    tokens = textproc.tokenize(doc.text)
    if not tokens:
        raise FeaturesError(f"document {doc.id!r} has no tokens")
    words = _word_token_count(tokens)
    flags: list[str] = []

    verb_tags = textproc.tag_verbs(tokens, pos_override=pos_override)
    past = sum(1 for vt in verb_tags if vt.group == "past")
    non_past = len(verb_tags) - past
    past_rate = past / words if words else 0.0
    non_past_rate = non_past / words if words else 0.0

    pronouns = textproc.pronoun_rates(tokens)

    if spans is None:
        rate_expert = math.nan
        flags.append("expert_events=missing")
    else:
        rate_expert = event_rate(doc, spans, "expert_union")

    if realis_spans is None:
        rate_realis = math.nan
        flags.append("realis_events=missing")
    else:
        rate_realis = event_rate(doc, realis_spans, "realis_file")

    if entity_spans is None:
        flags.append("entity_source=pronouns_only")
    ent_rate = entity_mention_rate(doc, entity_spans)

    if lexicon is None:
        conc = math.nan
        flags.append("concreteness=no_lexicon")
    else:
        conc = textproc.concreteness(tokens, lexicon)

    if lm is None:
        seq = math.nan
        flags.append("sequentiality=no_lm")
    else:
        seq = sequentiality(doc, lm)

    n_sentences = len({t.sentence_index for t in tokens})
    return FeatureVector(
        doc_id=doc.id,
        event_rate_expert=rate_expert,
        event_rate_realis=rate_realis,
        past_rate=past_rate,
        non_past_rate=non_past_rate,
        first_sg=pronouns["first_sg"],
        first_pl=pronouns["first_pl"],
        second=pronouns["second"],
        third_sg=pronouns["third_sg"],
        entity_mention_rate=ent_rate,
        concreteness=conc,
        sequentiality=seq,
        is_comment=1 if doc.kind == "comment" else 0,
        n_tokens=len(tokens),
        mean_sentence_len=len(tokens) / n_sentences,
        flags=tuple(flags),
    )


def extract_corpus_features(
    corpus: Corpus,
    spans: Sequence[SpanAnnotation] | None = None,
    lexicon: textproc.ConcretenessLexicon | None = None,
    lm: LmContract | None = None,
    realis_spans: Sequence[SpanAnnotation] | None = None,
    entity_spans: Sequence[SpanAnnotation] | None = None,
) -> list[FeatureVector]:
    return [
        extract_features(
            doc,
            spans=spans,
            lexicon=lexicon,
            lm=lm,
            realis_spans=realis_spans,
            entity_spans=entity_spans,
        )
        for doc in corpus
    ]
