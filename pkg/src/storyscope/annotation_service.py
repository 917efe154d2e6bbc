"""HTTP annotation service: task assignment in corpus order, span
submission with optimistic revision checks, live two-annotator agreement,
adjudication as an overlay identity, and export in the corpus schemas.

State lives in an append-only JSONL log; replaying the log reconstructs
the store exactly, so a crash between requests loses nothing that was
acknowledged.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import stats, textproc
from .corpus import LABELS, Corpus, SpanAnnotation, merge_overlapping


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass(frozen=True)
class StoredSubmission:
    doc_id: str
    annotator: str
    revision: int
    spans: tuple[tuple[str, int, int], ...]  # (label, start, end), merged
    story_present: bool
    role: str  # "annotator" | "adjudicator"


class AnnotationStore:
    """Submissions for a fixed corpus and a fixed set of annotator identities.

    Every accepted submission is retained (append-only); the latest revision
    per (doc, annotator) is the effective one.  All mutations happen under a
    lock and are flushed to the log before being acknowledged.
    """

    def __init__(
        self,
        corpus: Corpus,
        annotators: Sequence[str],
        log_path: str | Path | None = None,
        adjudicators: Sequence[str] = (),
        exclusion_ids: frozenset[str] = frozenset(),
    ):
        if len(annotators) != 2:
            raise ValueError(f"the service expects exactly 2 annotators, got {len(annotators)}")
        overlap = set(annotators) & set(adjudicators)
        if overlap:
            raise ValueError(f"identities cannot be both annotator and adjudicator: {overlap}")
        self.corpus = corpus
        self.annotators = tuple(annotators)
        self.adjudicators = tuple(adjudicators)
        self.exclusion_ids = exclusion_ids
        self._queue = [d.id for d in corpus]
        self._lock = threading.Lock()
        self._submissions: list[StoredSubmission] = []
        self._latest: dict[tuple[str, str], StoredSubmission] = {}
        self._log_path = Path(log_path) if log_path is not None else None
        self._log_fh = None
        if self._log_path is not None and self._log_path.exists():
            self._replay(self._log_path)
        if self._log_path is not None:
            self._log_fh = open(self._log_path, "a", encoding="utf-8")

    # -- identities ----------------------------------------------------------

    def _role_of(self, name: str) -> str:
        if name in self.annotators:
            return "annotator"
        if name in self.adjudicators:
            return "adjudicator"
        raise ServiceError(404, "unknown_annotator", f"unknown annotator {name!r}")

    # -- persistence ---------------------------------------------------------

    def _replay(self, path: Path) -> None:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                sub = StoredSubmission(
                    doc_id=obj["doc_id"],
                    annotator=obj["annotator"],
                    revision=int(obj["revision"]),
                    spans=tuple((s["label"], s["start"], s["end"]) for s in obj["spans"]),
                    story_present=bool(obj["story_present"]),
                    role=obj["role"],
                )
                self._submissions.append(sub)
                self._latest[(sub.doc_id, sub.annotator)] = sub

    def _append_log(self, sub: StoredSubmission) -> None:
        if self._log_fh is None:
            return
        record = {
            "doc_id": sub.doc_id,
            "annotator": sub.annotator,
            "revision": sub.revision,
            "spans": [{"label": l, "start": s, "end": e} for l, s, e in sub.spans],
            "story_present": sub.story_present,
            "role": sub.role,
        }
        self._log_fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        self._log_fh.flush()

    def compact(self) -> None:
        """Rewrite the log keeping only each (doc, annotator)'s latest revision."""
        if self._log_path is None:
            return
        with self._lock:
            if self._log_fh is not None:
                self._log_fh.close()
            with open(self._log_path, "w", encoding="utf-8") as fh:
                self._log_fh = fh
                for key in sorted(self._latest):
                    self._append_log(self._latest[key])
            self._log_fh = open(self._log_path, "a", encoding="utf-8")

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    # -- operations ----------------------------------------------------------

    def next_task(self, annotator: str) -> str | None:
        self._role_of(annotator)
        with self._lock:
            for doc_id in self._queue:
                if (doc_id, annotator) not in self._latest:
                    return doc_id
        return None

    def completed(self, annotator: str) -> set[str]:
        self._role_of(annotator)
        with self._lock:
            return {doc_id for doc_id, who in self._latest if who == annotator}

    def current_revision(self, doc_id: str, annotator: str) -> int:
        with self._lock:
            sub = self._latest.get((doc_id, annotator))
            return sub.revision if sub else 0

    def submit(
        self,
        doc_id: str,
        annotator: str,
        revision: int,
        spans: Sequence[tuple[str, int, int]],
        story_present: bool | None = None,
    ) -> StoredSubmission:
        role = self._role_of(annotator)
        if doc_id not in self.corpus:
            raise ServiceError(404, "unknown_document", f"unknown document id {doc_id!r}")
        text_len = len(self.corpus[doc_id].text)
        for label, start, end in spans:
            if label not in LABELS:
                raise ServiceError(
                    400, "invalid_span", f"label must be one of {LABELS}, got {label!r}"
                )
            if not (0 <= start < end <= text_len):
                raise ServiceError(
                    400,
                    "invalid_span",
                    f"span ({start}, {end}) out of range for document {doc_id!r} "
                    f"of length {text_len}",
                )
        by_label: dict[str, list[tuple[int, int]]] = {}
        for label, start, end in spans:
            by_label.setdefault(label, []).append((start, end))
        merged: list[tuple[str, int, int]] = []
        for label in sorted(by_label):
            for s, e in merge_overlapping(by_label[label]):
                merged.append((label, s, e))
        derived_story = any(label == "story" for label, _, _ in merged)
        if story_present is not None and story_present != derived_story:
            raise ServiceError(
                400,
                "inconsistent_story_flag",
                f"story_present={story_present} but the spans "
                f"{'do' if derived_story else 'do not'} contain a story span",
            )
        with self._lock:
            current = self._latest.get((doc_id, annotator))
            expected = (current.revision if current else 0) + 1
            if revision != expected:
                raise ServiceError(
                    409,
                    "stale_revision",
                    f"expected revision {expected} for ({doc_id}, {annotator}), got {revision}",
                )
            sub = StoredSubmission(
                doc_id=doc_id,
                annotator=annotator,
                revision=revision,
                spans=tuple(merged),
                story_present=derived_story,
                role=role,
            )
            self._submissions.append(sub)
            self._latest[(doc_id, annotator)] = sub
            self._append_log(sub)
        return sub

    def get_submission(self, doc_id: str, annotator: str, revision: int) -> StoredSubmission:
        with self._lock:
            for sub in self._submissions:
                if (sub.doc_id, sub.annotator, sub.revision) == (doc_id, annotator, revision):
                    return sub
        raise ServiceError(
            404, "unknown_revision", f"no stored revision {revision} for ({doc_id}, {annotator})"
        )

    # -- agreement and export --------------------------------------------------

    def _effective_annotations(self, include_adjudicators: bool) -> list[SpanAnnotation]:
        out: list[SpanAnnotation] = []
        with self._lock:
            latest = dict(self._latest)
        for (doc_id, annotator), sub in sorted(latest.items()):
            if sub.role == "adjudicator" and not include_adjudicators:
                continue
            if doc_id in self.exclusion_ids:
                continue
            for label, start, end in sub.spans:
                out.append(SpanAnnotation(doc_id, annotator, label, start, end))
        out.sort()
        return out

    def agreement(self, label: str, unit: str) -> stats.KappaResult:
        if label not in LABELS:
            raise ServiceError(400, "invalid_label", f"label must be one of {LABELS}")
        if unit not in ("document", "token"):
            raise ServiceError(400, "invalid_unit", "unit must be 'document' or 'token'")
        a, b = self.annotators
        shared = (self.completed(a) & self.completed(b)) - self.exclusion_ids
        if not shared:
            raise ServiceError(
                409, "no_overlap", "no documents completed by both annotators yet"
            )
        docs = [self.corpus[i] for i in sorted(shared)]
        anns = [sp for sp in self._effective_annotations(False) if sp.doc_id in shared]
        return stats.span_kappa(anns, unit=unit, label=label, docs=docs, annotators=(a, b))

    def export_payload(self) -> dict:
        docs = [
            d.to_json_dict() for d in self.corpus if d.id not in self.exclusion_ids
        ]
        annotations = [
            sp.to_json_dict() for sp in self._effective_annotations(True)
        ]
        with self._lock:
            latest = dict(self._latest)
        completions = [
            {"doc_id": doc_id, "annotator": annotator, "role": sub.role}
            for (doc_id, annotator), sub in sorted(latest.items())
            if doc_id not in self.exclusion_ids
        ]
        return {"documents": docs, "annotations": annotations, "completions": completions}

    def export_to_dir(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = self.export_payload()
        paths = {
            "documents": out / "documents.jsonl",
            "annotations": out / "annotations.jsonl",
            "completions": out / "completions.jsonl",
        }
        for key, path in paths.items():
            with open(path, "w", encoding="utf-8") as fh:
                for record in payload[key]:
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        return paths


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


class SpanBody(BaseModel):
    label: str
    start: int
    end: int


class SubmissionBody(BaseModel):
    doc_id: str
    annotator: str
    revision: int = Field(ge=1)
    spans: list[SpanBody] = Field(default_factory=list)
    story_present: bool | None = None


def create_app(store: AnnotationStore) -> FastAPI:
    app = FastAPI(title="annotation service", docs_url=None, redoc_url=None)
    app.state.store = store

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(StarletteHTTPException)
    async def http_error_handler(request: Request, exc: StarletteHTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"code": "http_error", "message": str(exc.detail)},
        )

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"code": "validation_error", "message": str(exc.errors())},
        )

    @app.get("/api/tasks/next")
    def tasks_next(annotator: str):
        doc_id = store.next_task(annotator)
        if doc_id is None:
            return {
                "doc": None,
                "remaining": 0,
                "completed": len(store.completed(annotator)),
            }
        completed = store.completed(annotator)
        return {
            "doc": _doc_payload(store, doc_id),
            "remaining": len(store.corpus) - len(completed),
            "completed": len(completed),
        }

    @app.get("/api/docs/{doc_id}")
    def get_doc(doc_id: str):
        if doc_id not in store.corpus:
            raise ServiceError(404, "unknown_document", f"unknown document id {doc_id!r}")
        return _doc_payload(store, doc_id)

    @app.post("/api/annotations")
    def post_annotations(body: SubmissionBody):
        sub = store.submit(
            doc_id=body.doc_id,
            annotator=body.annotator,
            revision=body.revision,
            spans=[(s.label, s.start, s.end) for s in body.spans],
            story_present=body.story_present,
        )
        return {
            "doc_id": sub.doc_id,
            "annotator": sub.annotator,
            "accepted_revision": sub.revision,
            "story_present": sub.story_present,
            "spans": [
                {"label": l, "start": s, "end": e} for l, s, e in sub.spans
            ],
        }

    @app.get("/api/agreement")
    def get_agreement(label: str = "story", unit: str = "document"):
        result = store.agreement(label=label, unit=unit)
        a, b = store.annotators
        shared = store.completed(a) & store.completed(b)
        return {
            "label": label,
            "unit": result.unit,
            "kappa": result.kappa,
            "observed_agreement": result.observed_agreement,
            "expected_agreement": result.expected_agreement,
            "n_docs": len(shared - store.exclusion_ids),
        }

    @app.get("/api/export")
    def get_export():
        return store.export_payload()

    return app


def _doc_payload(store: AnnotationStore, doc_id: str) -> dict:
    doc = store.corpus[doc_id]
    tokens = textproc.tokenize(doc.text)
    sentences = textproc.split_sentences(doc.text)
    payload = doc.to_json_dict()
    payload["tokens"] = [[t.start, t.end] for t in tokens]
    payload["sentences"] = [[s, e] for s, e in sentences]
    revisions = {
        who: store.current_revision(doc_id, who)
        for who in store.annotators + store.adjudicators
    }
    payload["revisions"] = revisions
    return payload


def serve(store: AnnotationStore, host: str = "127.0.0.1", port: int = 8765) -> None:
    import uvicorn

    uvicorn.run(create_app(store), host=host, port=port, log_level="warning")
