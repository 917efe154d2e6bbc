import json
from pathlib import Path

import pytest

from storyscope.corpus import Corpus, Document, SpanAnnotation

GOLDEN = Path(__file__).parent / "golden"


def make_doc(
    id: str = "d1",
    community: str = "c1",
    kind: str = "post",
    text: str = "I went home. The dog barked.",
    summary: str | None = "Going home.",
    category: str = "cat1",
) -> Document:
    return Document(
        id=id, community=community, category=category, kind=kind, text=text, summary=summary
    )


def span(doc_id: str, annotator: str, label: str, start: int, end: int) -> SpanAnnotation:
    return SpanAnnotation(doc_id=doc_id, annotator=annotator, label=label, start=start, end=end)


@pytest.fixture
def tiny_corpus() -> Corpus:
    return Corpus(
        [
            make_doc("a", "camp", text="I walked the dog. It rained hard."),
            make_doc("b", "camp", kind="comment", text="You should try the other trail."),
            make_doc("c", "tips", text="We cooked rice. Everyone ate fast."),
            make_doc("d", "tips", kind="comment", text="Do you boil it first? I never do."),
        ]
    )


def write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
