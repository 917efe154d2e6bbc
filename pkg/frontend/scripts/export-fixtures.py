#!/usr/bin/env python3
"""Regenerate the UI test fixtures from the real annotation service.

Builds a small synthetic corpus, stands up the service app, and captures
actual /api/docs/{id} payloads for the first five documents. Run from the
frontend directory after any change to the service payload shapes:

    python3 scripts/export-fixtures.py
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from storyscope import synth
from storyscope.annotation_service import AnnotationStore, create_app
from storyscope.corpus import Corpus

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "docs.json"


def main() -> None:
    data = synth.generate(n_docs=24, seed=20)
    corpus = Corpus()
    for doc in data.corpus:
        corpus.add(doc)
    store = AnnotationStore(
        corpus,
        annotators=[synth.ANNOTATOR_A, synth.ANNOTATOR_B],
        adjudicators=["judge"],
    )
    client = TestClient(create_app(store))
    docs = []
    for doc in list(corpus)[:5]:
        resp = client.get(f"/api/docs/{doc.id}")
        resp.raise_for_status()
        docs.append(resp.json())
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"docs": docs}, indent=2, ensure_ascii=False) + "\n")
    print(f"wrote {len(docs)} doc payloads to {OUT}")


if __name__ == "__main__":
    main()
