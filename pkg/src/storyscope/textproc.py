"""Deterministic tokenization, sentence splitting, and lexical measures.

Everything in this module is pure and rule-based so that feature extraction
is reproducible without any external tagger.  The segmentation behavior is
pinned by golden files in the test suite.
"""

from __future__ import annotations

import math
import re
from bisect import bisect_right
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence


class TextProcError(ValueError):
    pass


# A word token is a run of word characters, possibly joined by internal
# apostrophes ("don't" stays one token).  Any other non-space character is
# its own punctuation token.
_TOKEN_RE = re.compile(r"\w+(?:['’]\w+)*|[^\w\s]")

_CLOSERS = "\"')]}”’"

FIRST_SG = frozenset({"i", "me", "my", "mine", "myself"})
FIRST_PL = frozenset({"we", "us", "our", "ours", "ourselves"})
SECOND = frozenset({"you", "your", "yours", "yourself", "yourselves"})
THIRD_SG = frozenset({"he", "she", "him", "her", "his", "hers", "himself", "herself"})

PAST_TAGS = frozenset({"VBD", "VBN"})
NON_PAST_TAGS = frozenset({"VB", "VBP", "VBZ", "VBG"})
VERB_TAGS = PAST_TAGS | NON_PAST_TAGS

MODALS = frozenset(
    {"can", "could", "may", "might", "must", "shall", "should", "will", "would"}
)
# Irregular present forms the -s stripping rules cannot reach.
PRESENT_IRREGULARS = frozenset({"am", "is", "are", "has", "does"})


def _data_lines(name: str) -> list[str]:
    text = resources.files("storyscope.data").joinpath(name).read_text("utf-8")
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def _load_verb_tables() -> tuple[frozenset[str], frozenset[str]]:
    """Returns (past_forms, base_stems) merged from the bundled tables."""
    pasts: set[str] = set()
    stems: set[str] = set()
    for line in _data_lines("irregular_verbs.tsv"):
        base, past, participle = line.split("\t")
        stems.add(base)
        for form in past.split("/") + participle.split("/"):
            pasts.add(form)
    stems.update(_data_lines("verb_stems.txt"))
    # Forms that double as a base ("put", "read") are resolved as base.
    return frozenset(pasts - stems), frozenset(stems)


PAST_FORMS, VERB_STEMS = _load_verb_tables()
ABBREVIATIONS = frozenset(_data_lines("abbreviations.txt"))


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int
    sentence_index: int
    is_word: bool

    @property
    def lower(self) -> str:
        """Lowercase view; the stored text is never modified."""
        return self.text.lower()


@dataclass(frozen=True)
class VerbTag:
    token_index: int
    group: str  # "past" | "non_past"


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Split text into sentence character ranges.

    A sentence ends at a run of ``. ! ?`` (plus any closing quotes/brackets)
    that is followed by whitespace and an uppercase letter.  A single period
    preceded by a word on the bundled abbreviation list does not end a
    sentence.  The returned ranges are trimmed to non-whitespace and jointly
    cover every non-whitespace character.
    """
    n = len(text)
    boundaries: list[int] = []
    i = 0
    while i < n:
        if text[i] in ".!?":
            j = i
            while j < n and text[j] in ".!?":
                j += 1
            k = j
            while k < n and text[k] in _CLOSERS:
                k += 1
            m = k
            while m < n and text[m].isspace():
                m += 1
            if m > k and m < n and text[m].isupper():
                is_single_dot = (j - i == 1) and text[i] == "."
                if not (is_single_dot and _preceding_abbreviation(text, i)):
                    boundaries.append(k)
            i = j
        else:
            i += 1

    ranges: list[tuple[int, int]] = []
    prev = 0
    for cut in boundaries + [n]:
        seg = text[prev:cut]
        stripped = seg.strip()
        if stripped:
            start = prev + len(seg) - len(seg.lstrip())
            end = prev + len(seg.rstrip())
            ranges.append((start, end))
        prev = cut
    return ranges


def _preceding_abbreviation(text: str, dot_index: int) -> bool:
    k = dot_index - 1
    chars: list[str] = []
    while k >= 0 and (text[k].isalpha() or text[k] == "."):
        chars.append(text[k])
        k -= 1
    word = "".join(reversed(chars)).strip(".")
    return bool(word) and word.lower() in ABBREVIATIONS


def tokenize(text: str) -> list[Token]:
    """Segment text into word and punctuation tokens with sentence indices.

    Offsets always map back to the exact substring of the input; lowercase
    forms are available through ``Token.lower`` as a non-destructive view.
    """
    sentences = split_sentences(text)
    sent_starts = [s for s, _ in sentences]
    tokens: list[Token] = []
    for m in _TOKEN_RE.finditer(text):
        start, end = m.start(), m.end()
        si = bisect_right(sent_starts, start) - 1 if sentences else 0
        si = max(si, 0)
        tokens.append(
            Token(
                text=m.group(),
                start=start,
                end=end,
                sentence_index=si,
                is_word=bool(m.group()[0].isalnum() or m.group()[0] == "_"),
            )
        )
    return tokens


def word_tokens(tokens: Sequence[Token]) -> list[Token]:
    return [t for t in tokens if t.is_word]


def _stem_candidates_ing(w: str) -> list[str]:
    stem = w[:-3]
    cands = [stem]
    if len(stem) >= 2 and stem[-1] == stem[-2]:
        cands.append(stem[:-1])  # running -> run
    cands.append(stem + "e")  # making -> make
    return cands


def _stem_candidates_s(w: str) -> list[str]:
    cands = [w[:-1]]
    if w.endswith("ies") and len(w) > 3:
        cands.append(w[:-3] + "y")  # carries -> carry
    if w.endswith("es"):
        cands.append(w[:-2])  # watches -> watch
    return cands


def tag_verbs(
    tokens: Sequence[Token],
    pos_override: Mapping[int, str] | None = None,
) -> list[VerbTag]:
    """Assign verb tokens to the past / non-past groups.

    With ``pos_override`` (token index -> Penn Treebank tag) the grouping is
    exact: VBD and VBN are past, the four remaining verb subtypes are
    non-past, everything else is skipped.  Without an override a bundled
    heuristic is used: irregular past/participle forms and -ed words are
    past; modals, known base forms, and -ing/-s inflections of known stems
    are non-past.  Exact base-form matches win over the past table for
    no-change verbs like "put".
    """
    if pos_override is not None:
        out = []
        for idx, tag in sorted(pos_override.items()):
            if idx < 0 or idx >= len(tokens):
                raise TextProcError(f"POS override references unknown token index {idx}")
            if tag in PAST_TAGS:
                out.append(VerbTag(idx, "past"))
            elif tag in NON_PAST_TAGS:
                out.append(VerbTag(idx, "non_past"))
        return out

    out = []
    for idx, tok in enumerate(tokens):
        if not tok.is_word:
            continue
        group = _heuristic_group(tok.lower)
        if group is not None:
            out.append(VerbTag(idx, group))
    return out


def _heuristic_group(w: str) -> str | None:
    if w in MODALS or w in PRESENT_IRREGULARS:
        return "non_past"
    if w in PAST_FORMS:
        return "past"
    if w in VERB_STEMS:
        return "non_past"
    if w.endswith("ed") and len(w) >= 4:
        return "past"
    if w.endswith("ing") and len(w) > 4:
        if any(c in VERB_STEMS for c in _stem_candidates_ing(w)):
            return "non_past"
    if w.endswith("s") and len(w) > 2:
        if any(c in VERB_STEMS for c in _stem_candidates_s(w)):
            return "non_past"
    return None


def pronoun_rates(tokens: Sequence[Token]) -> dict[str, float]:
    """Per-group pronoun counts divided by the word-token count."""
    words = word_tokens(tokens)
    n = len(words)
    if n == 0:
        return {"first_sg": 0.0, "first_pl": 0.0, "second": 0.0, "third_sg": 0.0}
    counts = {"first_sg": 0, "first_pl": 0, "second": 0, "third_sg": 0}
    for t in words:
        w = t.lower
        if w in FIRST_SG:
            counts["first_sg"] += 1
        elif w in FIRST_PL:
            counts["first_pl"] += 1
        elif w in SECOND:
            counts["second"] += 1
        elif w in THIRD_SG:
            counts["third_sg"] += 1
    return {k: v / n for k, v in counts.items()}


class ConcretenessLexicon:
    """Case-insensitive word -> rating map (scale as supplied, e.g. 1-5)."""

    def __init__(self, ratings: Mapping[str, float]):
        self._ratings: dict[str, float] = {}
        for word, rating in ratings.items():
            if not math.isfinite(rating):
                raise TextProcError(f"non-finite concreteness rating for {word!r}")
            self._ratings[word.lower()] = float(rating)

    def __len__(self) -> int:
        return len(self._ratings)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._ratings

    def get(self, word: str) -> float | None:
        return self._ratings.get(word.lower())

    @property
    def max_rating(self) -> float:
        return max(self._ratings.values()) if self._ratings else 0.0

    @property
    def ratings(self) -> dict[str, float]:
        return dict(self._ratings)

    @classmethod
    def from_tsv(cls, path) -> "ConcretenessLexicon":
        ratings: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise TextProcError(f"{path}:{lineno}: expected word<TAB>rating")
                try:
                    ratings[parts[0]] = float(parts[1])
                except ValueError as exc:
                    raise TextProcError(f"{path}:{lineno}: bad rating {parts[1]!r}") from exc
        return cls(ratings)


def concreteness(tokens: Sequence[Token], lexicon: ConcretenessLexicon) -> float:
    """Sum of ratings over lexicon hits, divided by all word tokens."""
    words = word_tokens(tokens)
    if not words:
        return 0.0
    total = 0.0
    for t in words:
        r = lexicon.get(t.lower)
        if r is not None:
            total += r
    return total / len(words)


def question_mark_rate(text: str) -> float:
    if not text:
        return 0.0
    return text.count("?") / len(text)


def load_pos_override(path) -> dict[int, str]:
    """Read a per-document CoNLL-style TSV of ``token_index<TAB>penn_tag``."""
    out: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise TextProcError(f"{path}:{lineno}: expected index<TAB>tag")
            try:
                out[int(parts[0])] = parts[1]
            except ValueError as exc:
                raise TextProcError(f"{path}:{lineno}: bad token index {parts[0]!r}") from exc
    return out
