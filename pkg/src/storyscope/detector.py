"""Story classification: TF-IDF features, a hinge-loss linear classifier
trained by deterministic stochastic subgradient descent, a majority-class
baseline, bootstrapped evaluation, prompt builders for remote models, and
an importer for externally produced predictions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import textproc
from .corpus import Corpus, CorpusError, Document, LabeledDoc

MODEL_FORMAT = "storyscope-linear"
MODEL_VERSION = 1


class DetectorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# TF-IDF
# ---------------------------------------------------------------------------


def _terms(text: str, lowercase: bool) -> list[str]:
    toks = [t for t in textproc.tokenize(text) if t.is_word]
    return [t.lower if lowercase else t.text for t in toks]


@dataclass
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    min_df: int
    lowercase: bool

    def transform_texts(self, texts: Sequence[str]) -> np.ndarray:
        """Rows are L2-normalized tf-idf vectors; all-unknown rows stay zero."""
        X = np.zeros((len(texts), len(self.vocabulary)))
        for i, text in enumerate(texts):
            for term in _terms(text, self.lowercase):
                j = self.vocabulary.get(term)
                if j is not None:
                    X[i, j] += 1.0
        X *= self.idf
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return X / norms

    def transform(self, docs: Iterable[Document]) -> np.ndarray:
        return self.transform_texts([d.text for d in docs])


def fit_tfidf(docs: Sequence[Document], min_df: int = 1, lowercase: bool = True) -> TfidfModel:
    """idf(t) = ln((1+N)/(1+df(t))) + 1 over the training documents."""
    if not docs:
        raise DetectorError("cannot fit tf-idf on an empty training set")
    if min_df < 1:
        raise DetectorError("min_df must be >= 1")
    df: dict[str, int] = {}
    for doc in docs:
        for term in set(_terms(doc.text, lowercase)):
            df[term] = df.get(term, 0) + 1
    vocab_terms = sorted(t for t, c in df.items() if c >= min_df)
    if not vocab_terms:
        raise DetectorError(f"vocabulary is empty after applying min_df={min_df}")
    vocabulary = {t: i for i, t in enumerate(vocab_terms)}
    n = len(docs)
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in vocab_terms])
    return TfidfModel(vocabulary=vocabulary, idf=idf, min_df=min_df, lowercase=lowercase)


# ---------------------------------------------------------------------------
# Linear classifier (hinge loss, SGD with 1/(λt) steps)
# ---------------------------------------------------------------------------


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    lam: float
    epochs: int
    seed: int
    loss_history: tuple[float, ...] = ()


def _objective(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, lam: float) -> float:
    margins = y * (X @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(np.mean(hinge) + 0.5 * lam * float(w @ w))


def train_linear(
    tfidf: TfidfModel,
    labeled: Sequence[LabeledDoc],
    lam: float = 1e-3,
    epochs: int = 20,
    seed: int = 0,
) -> LinearModel:
    """L2-regularized hinge loss minimized by stochastic subgradient descent.

    Step size at global step t is 1/(λ·t); example order is reshuffled each
    epoch from a seed derived as (seed, epoch), so training is fully
    deterministic.  The unregularized bias follows the hinge subgradient.
    """
    if lam <= 0:
        raise DetectorError("regularization strength must be positive")
    if epochs < 1:
        raise DetectorError("epochs must be >= 1")
    labels = [ld.story for ld in labeled]
    if len(set(labels)) < 2:
        raise DetectorError("training set must contain both classes")
    X = tfidf.transform(ld.doc for ld in labeled)
    y = np.where(np.array(labels), 1.0, -1.0)
    n, dim = X.shape
    if dim != len(tfidf.vocabulary):
        raise DetectorError("feature dimension mismatch")

    w = np.zeros(dim)
    b = 0.0
    t = 0
    losses: list[float] = []
    for epoch in range(epochs):
        rng = np.random.default_rng([seed, epoch])
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            w *= 1.0 - eta * lam
            if y[i] * (X[i] @ w + b) < 1.0:
                w += eta * y[i] * X[i]
                b += eta * y[i]
        losses.append(_objective(X, y, w, b, lam))
    return LinearModel(
        weights=w, bias=b, lam=lam, epochs=epochs, seed=seed, loss_history=tuple(losses)
    )


def decision_values(model: LinearModel, tfidf: TfidfModel, docs: Sequence[Document]) -> np.ndarray:
    X = tfidf.transform(docs)
    return X @ model.weights + model.bias


def predict(model: LinearModel, tfidf: TfidfModel, docs: Sequence[Document]) -> list[bool]:
    """Story iff the decision value is strictly positive; a tie at exactly
    zero goes to non-story."""
    return [v > 0.0 for v in decision_values(model, tfidf, docs)]


# ---------------------------------------------------------------------------
# Majority baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MajorityModel:
    predicted_class: bool
    train_prevalence: float

    def predict(self, docs: Sequence) -> list[bool]:
        return [self.predicted_class] * len(docs)


def majority_baseline(train_labels: Sequence[bool]) -> MajorityModel:
    """Constant predictor of the more frequent training class (tie → non-story)."""
    if not len(train_labels):
        raise DetectorError("cannot fit a majority baseline on empty labels")
    n_story = sum(1 for x in train_labels if x)
    n = len(train_labels)
    return MajorityModel(predicted_class=n_story * 2 > n, train_prevalence=n_story / n)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    precision: tuple[float, float]  # (mean, sd) over resamples
    recall: tuple[float, float]
    f1: tuple[float, float]
    n_resamples: int
    seed: int
    absent_class_resamples: int = 0

    def row(self) -> dict[str, float]:
        return {
            "precision_mean": self.precision[0],
            "precision_sd": self.precision[1],
            "recall_mean": self.recall[0],
            "recall_sd": self.recall[1],
            "f1_mean": self.f1[0],
            "f1_sd": self.f1[1],
        }


def macro_prf(predictions: Sequence[bool], gold: Sequence[bool]) -> tuple[float, float, float, bool]:
    """Macro precision/recall/F1 over the two classes.

    A class absent from the gold labels contributes 0 to recall and F1 (its
    precision is 0 unless nothing was predicted for it either); the boolean
    in the return flags that degenerate case.
    """
    if len(predictions) != len(gold):
        raise DetectorError("predictions and gold differ in length")
    if not gold:
        raise DetectorError("empty evaluation set")
    ps, rs, fs = [], [], []
    absent = False
    for cls in (True, False):
        tp = sum(1 for p, g in zip(predictions, gold) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(predictions, gold) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(predictions, gold) if p != cls and g == cls)
        if tp + fn == 0:
            absent = True
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        ps.append(p)
        rs.append(r)
        fs.append(f)
    return (
        sum(ps) / 2.0,
        sum(rs) / 2.0,
        sum(fs) / 2.0,
        absent,
    )


def evaluate(
    predictions: Sequence[bool],
    gold: Sequence[bool],
    n_resamples: int = 1000,
    seed: int = 0,
) -> EvalReport:
    """Bootstrapped macro metrics: resample (prediction, gold) pairs with
    replacement, compute macro P/R/F1 per resample, report mean ± sd."""
    if len(predictions) != len(gold):
        raise DetectorError("predictions and gold differ in length")
    n = len(gold)
    if n == 0:
        raise DetectorError("empty evaluation set")
    if n_resamples < 1:
        raise DetectorError("n_resamples must be >= 1")
    pred_arr = np.array(predictions, dtype=bool)
    gold_arr = np.array(gold, dtype=bool)
    ps = np.empty(n_resamples)
    rs = np.empty(n_resamples)
    fs = np.empty(n_resamples)
    absent_count = 0
    for i in range(n_resamples):
        rng = np.random.default_rng([seed, i])
        idx = rng.integers(0, n, size=n)
        p, r, f, absent = macro_prf(pred_arr[idx].tolist(), gold_arr[idx].tolist())
        ps[i], rs[i], fs[i] = p, r, f
        if absent:
            absent_count += 1

    def mean_sd(a: np.ndarray) -> tuple[float, float]:
        sd = float(np.std(a, ddof=1)) if n_resamples > 1 else 0.0
        return float(np.mean(a)), sd

    return EvalReport(
        precision=mean_sd(ps),
        recall=mean_sd(rs),
        f1=mean_sd(fs),
        n_resamples=n_resamples,
        seed=seed,
        absent_class_resamples=absent_count,
    )


# ---------------------------------------------------------------------------
# Prompt building for remote models
# ---------------------------------------------------------------------------

DEFAULT_STORY_INSTRUCTION = (
    "You will read a text from an online community. Decide whether the text "
    "tells a story. For this task, a story is a teller's account of specific "
    "events that happened to particular people (including the teller) at a "
    "particular time, related in a connected sequence. General advice, "
    "opinions, hypotheticals, questions, and routine descriptions of how "
    "things usually work are not stories."
)

PROMPT_MODES = ("zero_shot", "few_shot", "chain_of_thought")


@dataclass(frozen=True)
class PromptSpec:
    mode: str
    instruction: str = DEFAULT_STORY_INSTRUCTION
    shots: tuple[tuple[str, bool], ...] = ()

    def __post_init__(self):
        if self.mode not in PROMPT_MODES:
            raise DetectorError(f"mode must be one of {PROMPT_MODES}, got {self.mode!r}")
        if self.mode == "few_shot":
            pos = sum(1 for _, label in self.shots if label)
            neg = len(self.shots) - pos
            if pos != 2 or neg != 2:
                raise DetectorError(
                    f"few_shot requires exactly 2 positive and 2 negative shots, "
                    f"got {pos} positive / {neg} negative"
                )
        elif self.shots:
            raise DetectorError(f"{self.mode} prompts take no shots")


def build_prompt(spec: PromptSpec, text: str) -> str:
    """Deterministic prompt assembly; identical inputs give identical bytes."""
    parts = [spec.instruction, ""]
    for shot_text, label in spec.shots:
        parts.append("Text: " + shot_text)
        parts.append("Answer: " + ("story" if label else "not story"))
        parts.append("")
    parts.append("Text: " + text)
    if spec.mode == "chain_of_thought":
        parts.append(
            "Think through the evidence step by step, then give a final line "
            "containing only 'story' or 'not story'."
        )
    else:
        parts.append("Answer with a single line containing only 'story' or 'not story'.")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# External predictions
# ---------------------------------------------------------------------------


def parse_response(response: str) -> bool | None:
    """Earliest occurrence of 'not story' vs 'story' wins; None if neither
    phrase appears."""
    low = response.lower()
    i_neg = low.find("not story")
    i_pos = low.find("story")
    if i_pos < 0:
        return None
    if 0 <= i_neg <= i_pos:
        return False
    return True


def import_external_predictions(path, docs: Sequence[Document]) -> tuple[list[bool], int]:
    """Read JSONL {doc_id, response} records and align them with ``docs``.

    Returns the boolean story vector plus a tally of unparseable responses,
    which fall back to non-story by fixed rule.
    """
    responses: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DetectorError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if obj.get("_meta") is not None and "doc_id" not in obj:
                continue
            if "doc_id" not in obj or "response" not in obj:
                raise DetectorError(f"{path}:{lineno}: need doc_id and response fields")
            responses[str(obj["doc_id"])] = str(obj["response"])
    predictions: list[bool] = []
    unparseable = 0
    for doc in docs:
        if doc.id not in responses:
            raise DetectorError(f"external predictions missing document id {doc.id!r}")
        parsed = parse_response(responses[doc.id])
        if parsed is None:
            unparseable += 1
            parsed = False
        predictions.append(parsed)
    return predictions, unparseable


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_model(path, tfidf: TfidfModel, model: LinearModel) -> None:
    terms = sorted(tfidf.vocabulary, key=tfidf.vocabulary.get)
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "vocabulary": terms,
        "idf": tfidf.idf.tolist(),
        "min_df": tfidf.min_df,
        "lowercase": tfidf.lowercase,
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "lambda": model.lam,
        "epochs": model.epochs,
        "seed": model.seed,
        "loss_history": list(model.loss_history),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> tuple[TfidfModel, LinearModel]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise DetectorError(f"{path}: not a recognized model file")
    if payload.get("version") != MODEL_VERSION:
        raise DetectorError(f"{path}: unsupported model version {payload.get('version')}")
    vocabulary = {t: i for i, t in enumerate(payload["vocabulary"])}
    tfidf = TfidfModel(
        vocabulary=vocabulary,
        idf=np.array(payload["idf"], dtype=float),
        min_df=int(payload["min_df"]),
        lowercase=bool(payload["lowercase"]),
    )
    model = LinearModel(
        weights=np.array(payload["weights"], dtype=float),
        bias=float(payload["bias"]),
        lam=float(payload["lambda"]),
        epochs=int(payload["epochs"]),
        seed=int(payload["seed"]),
        loss_history=tuple(float(x) for x in payload.get("loss_history", ())),
    )
    if model.weights.shape[0] != len(tfidf.vocabulary):
        raise DetectorError(f"{path}: weight vector does not match vocabulary size")
    return tfidf, model
