"""Document corpus: data model, JSONL ingestion, filtering, sampling, splits.

Documents and annotations are immutable after load; every operation here is
a pure function of its inputs (plus an explicit seed), so repeated runs give
identical results.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import textproc

LABELS = ("story", "event")
KINDS = ("post", "comment")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    id: str
    community: str
    category: str
    kind: str  # "post" | "comment"
    text: str
    summary: str | None = None
    created_at: int | None = None
    extra: tuple[tuple[str, object], ...] = ()

    def to_json_dict(self) -> dict:
        d: dict = {
            "id": self.id,
            "community": self.community,
            "category": self.category,
            "kind": self.kind,
            "text": self.text,
        }
        if self.summary is not None:
            d["summary"] = self.summary
        if self.created_at is not None:
            d["created_at"] = self.created_at
        d.update(dict(self.extra))
        return d


_KNOWN_FIELDS = {"id", "community", "category", "kind", "text", "summary", "created_at"}


def _doc_from_json(obj: dict, where: str) -> Document:
    for req in ("id", "community", "kind", "text"):
        if req not in obj:
            raise CorpusError(f"{where}: missing required field {req!r}")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise CorpusError(f"{where}: id must be a non-empty string")
    if obj["kind"] not in KINDS:
        raise CorpusError(f"{where}: kind must be one of {KINDS}, got {obj['kind']!r}")
    if not isinstance(obj["text"], str) or not obj["text"].strip():
        raise CorpusError(f"{where}: text must be a non-empty string")
    extra = tuple((k, v) for k, v in obj.items() if k not in _KNOWN_FIELDS)
    return Document(
        id=obj["id"],
        community=str(obj["community"]),
        category=str(obj.get("category", "")),
        kind=obj["kind"],
        text=obj["text"],
        summary=obj.get("summary"),
        created_at=obj.get("created_at"),
        extra=extra,
    )


class Corpus:
    """An ordered, id-indexed collection of documents."""

    def __init__(self, docs: Iterable[Document] = ()):
        self._docs: list[Document] = []
        self._by_id: dict[str, Document] = {}
        for doc in docs:
            self.add(doc)

    def add(self, doc: Document) -> None:
        if doc.id in self._by_id:
            raise CorpusError(f"duplicate document id {doc.id!r}")
        self._docs.append(doc)
        self._by_id[doc.id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def __getitem__(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise CorpusError(f"unknown document id {doc_id!r}") from None

    @property
    def docs(self) -> list[Document]:
        return list(self._docs)

    def communities(self) -> list[str]:
        return sorted({d.community for d in self._docs})

    def by_community(self) -> dict[str, list[Document]]:
        out: dict[str, list[Document]] = {}
        for d in self._docs:
            out.setdefault(d.community, []).append(d)
        return out

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for doc in self._docs:
                fh.write(json.dumps(doc.to_json_dict(), ensure_ascii=False) + "\n")


def load_corpus(path, format: str = "jsonl") -> Corpus:
    """Load a document corpus; rejects malformed lines and duplicate ids."""
    if format != "jsonl":
        raise CorpusError(f"unsupported corpus format {format!r}")
    corpus = Corpus()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            if obj.get("_meta") is not None and "id" not in obj:
                continue  # header line written by our own tools
            doc = _doc_from_json(obj, f"{path}:{lineno}")
            if doc.id in corpus:
                raise CorpusError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            corpus.add(doc)
    return corpus


@dataclass(frozen=True, order=True)
class SpanAnnotation:
    doc_id: str
    annotator: str
    label: str  # "story" | "event"
    start: int  # inclusive char offset
    end: int  # exclusive char offset

    def to_json_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "annotator": self.annotator,
            "label": self.label,
            "start": self.start,
            "end": self.end,
        }


def _validate_span(
    span: SpanAnnotation,
    corpus: Corpus,
    where: str,
    allowed_labels: tuple[str, ...] | None = LABELS,
) -> None:
    if span.doc_id not in corpus:
        raise CorpusError(f"{where}: unknown doc_id {span.doc_id!r}")
    if allowed_labels is not None and span.label not in allowed_labels:
        raise CorpusError(
            f"{where}: label must be one of {allowed_labels}, got {span.label!r}"
        )
    text_len = len(corpus[span.doc_id].text)
    if not (0 <= span.start < span.end <= text_len):
        raise CorpusError(
            f"{where}: span ({span.start}, {span.end}) out of range for "
            f"document {span.doc_id!r} of length {text_len}"
        )


def merge_overlapping(spans: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Merge strictly overlapping (start, end) ranges; touching spans stay apart."""
    ordered = sorted(spans)
    merged: list[tuple[int, int]] = []
    for s, e in ordered:
        if merged and s < merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], e))
        else:
            merged.append((s, e))
    return merged


def merge_spans(spans: Iterable[SpanAnnotation]) -> list[SpanAnnotation]:
    """Merge overlapping spans within each (doc, annotator, label) group."""
    groups: dict[tuple[str, str, str], list[tuple[int, int]]] = {}
    for sp in spans:
        groups.setdefault((sp.doc_id, sp.annotator, sp.label), []).append((sp.start, sp.end))
    out: list[SpanAnnotation] = []
    for (doc_id, annotator, label), ranges in groups.items():
        for s, e in merge_overlapping(ranges):
            out.append(SpanAnnotation(doc_id, annotator, label, s, e))
    out.sort()
    return out


def load_annotations(
    path,
    corpus: Corpus,
    allowed_labels: tuple[str, ...] | None = LABELS,
) -> list[SpanAnnotation]:
    """Load span annotations, validating offsets against the corpus.

    Overlapping spans with the same (annotator, label) on one document are
    merged into a single span.  ``allowed_labels=None`` lifts the label
    restriction (used for external span files such as entity tags).
    """
    spans: list[SpanAnnotation] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: malformed JSON ({exc.msg})") from exc
            if obj.get("_meta") is not None and "doc_id" not in obj:
                continue
            for req in ("doc_id", "annotator", "label", "start", "end"):
                if req not in obj:
                    raise CorpusError(f"{where}: missing required field {req!r}")
            try:
                span = SpanAnnotation(
                    doc_id=str(obj["doc_id"]),
                    annotator=str(obj["annotator"]),
                    label=obj["label"],
                    start=int(obj["start"]),
                    end=int(obj["end"]),
                )
            except (TypeError, ValueError) as exc:
                raise CorpusError(f"{where}: bad span fields ({exc})") from exc
            _validate_span(span, corpus, where, allowed_labels)
            spans.append(span)
    return merge_spans(spans)


def write_annotations(path, spans: Iterable[SpanAnnotation]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sp in spans:
            fh.write(json.dumps(sp.to_json_dict(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class LabeledDoc:
    doc: Document
    story: bool
    spans: tuple[SpanAnnotation, ...] = ()


def union_story_labels(
    corpus: Corpus,
    annotations: Sequence[SpanAnnotation],
    annotators: set[str] | frozenset[str],
) -> list[LabeledDoc]:
    """Label a document as a story iff any listed annotator put a story span on it."""
    if not annotators:
        raise CorpusError("annotators must be non-empty")
    spans_by_doc: dict[str, list[SpanAnnotation]] = {}
    story_docs: set[str] = set()
    for sp in annotations:
        if sp.annotator not in annotators:
            continue
        spans_by_doc.setdefault(sp.doc_id, []).append(sp)
        if sp.label == "story":
            story_docs.add(sp.doc_id)
    return [
        LabeledDoc(doc=doc, story=doc.id in story_docs, spans=tuple(spans_by_doc.get(doc.id, ())))
        for doc in corpus
    ]


@dataclass(frozen=True)
class CategoryMap:
    entries: Mapping[str, str]
    excluded_categories: frozenset[str] = frozenset()

    def __post_init__(self):
        missing = set(self.excluded_categories) - set(self.entries.values())
        if missing:
            raise CorpusError(
                "excluded categories not present in the category map: "
                + ", ".join(sorted(missing))
            )

    def category_of(self, community: str) -> str | None:
        return self.entries.get(community)

    @classmethod
    def from_csv(cls, path, excluded_categories: Iterable[str] = ()) -> "CategoryMap":
        entries: dict[str, str] = {}
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            for row in reader:
                if not row or row[0].startswith("#"):
                    continue
                if row[:2] == ["community", "category"]:
                    continue  # header
                if len(row) < 2:
                    raise CorpusError(f"{path}: expected community,category rows")
                entries[row[0]] = row[1]
        return cls(entries=entries, excluded_categories=frozenset(excluded_categories))


def apply_categories(corpus: Corpus, cat_map: CategoryMap) -> tuple[Corpus, list[str]]:
    """Fill in document categories from the map; returns unmapped communities."""
    unmapped = sorted(
        {d.community for d in corpus if cat_map.category_of(d.community) is None}
    )
    out = Corpus()
    for d in corpus:
        cat = cat_map.category_of(d.community)
        if cat is None:
            continue
        out.add(
            Document(
                id=d.id,
                community=d.community,
                category=cat,
                kind=d.kind,
                text=d.text,
                summary=d.summary,
                created_at=d.created_at,
                extra=d.extra,
            )
        )
    return out, unmapped


def load_exclusion_ids(path) -> frozenset[str]:
    """One document id per line; comments and blanks ignored."""
    ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                ids.add(line)
    return frozenset(ids)


def filter_excluded(corpus: Corpus, exclusion_ids: frozenset[str]) -> Corpus:
    return Corpus(d for d in corpus if d.id not in exclusion_ids)


def sample_annotation_set(
    corpus: Corpus,
    cat_map: CategoryMap,
    per_community: int,
    min_tokens: int,
    max_tokens: int,
    downsample: Mapping[str, int] | None = None,
    seed: int = 0,
) -> Corpus:
    """Sample an annotation pool: per-community caps with token-length bounds.

    Excluded categories are dropped, each remaining community contributes at
    most ``per_community`` documents whose token count lies within the given
    bounds, and ``downsample`` caps the number of communities drawn from a
    category.  Deterministic given the seed.
    """
    if per_community < 1:
        raise CorpusError("per_community must be >= 1")
    if min_tokens >= max_tokens:
        raise CorpusError("min_tokens must be < max_tokens")
    downsample = dict(downsample or {})
    rng = np.random.default_rng(seed)

    mapped, _unmapped = apply_categories(corpus, cat_map)
    by_community = mapped.by_community()
    by_category: dict[str, list[str]] = {}
    for community in sorted(by_community):
        cat = cat_map.category_of(community)
        if cat in cat_map.excluded_categories:
            continue
        by_category.setdefault(cat, []).append(community)

    chosen_docs: list[Document] = []
    for cat in sorted(by_category):
        communities = by_category[cat]
        cap = downsample.get(cat)
        if cap is not None and cap < len(communities):
            idx = rng.choice(len(communities), size=cap, replace=False)
            communities = [communities[i] for i in sorted(idx)]
        for community in communities:
            eligible = [
                d
                for d in by_community[community]
                if min_tokens <= len(textproc.tokenize(d.text)) <= max_tokens
            ]
            if len(eligible) > per_community:
                idx = rng.choice(len(eligible), size=per_community, replace=False)
                eligible = [eligible[i] for i in sorted(idx)]
            chosen_docs.extend(eligible)
    return Corpus(chosen_docs)


def sample_prediction_set(corpus: Corpus, per_community: int, seed: int = 0) -> Corpus:
    """Balanced prediction sample: exactly ``per_community`` texts from every
    community that has at least that many; smaller communities are dropped."""
    if per_community < 1:
        raise CorpusError("per_community must be >= 1")
    rng = np.random.default_rng(seed)
    by_community = corpus.by_community()
    chosen: list[Document] = []
    for community in sorted(by_community):
        docs = by_community[community]
        if len(docs) < per_community:
            continue
        if len(docs) == per_community:
            chosen.extend(docs)
        else:
            idx = rng.choice(len(docs), size=per_community, replace=False)
            chosen.extend(docs[i] for i in sorted(idx))
    return Corpus(chosen)


def split(
    labeled: Sequence[LabeledDoc],
    sizes: tuple[int, int, int],
    seed: int = 0,
) -> tuple[list[LabeledDoc], list[LabeledDoc], list[LabeledDoc]]:
    """Disjoint train/validation/test partition with exact sizes."""
    n_train, n_val, n_test = sizes
    total = n_train + n_val + n_test
    if total > len(labeled):
        raise CorpusError(
            f"split sizes sum to {total} but only {len(labeled)} documents are available"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(labeled))
    picked = [labeled[i] for i in order]
    train = picked[:n_train]
    val = picked[n_train : n_train + n_val]
    test = picked[n_train + n_val : total]
    return train, val, test
