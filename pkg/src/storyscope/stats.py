"""Agreement, hypothesis testing, and resampling machinery.

Everything here is implemented from first principles on top of numpy and
``math`` — in particular the Student-t tail probability goes through our own
regularized incomplete beta (continued fraction), so results do not depend
on scipy being installed.  The test suite cross-checks these routines
against independent reference implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, Document, SpanAnnotation
from . import textproc

__all__ = [
    "StatsError",
    "KappaResult",
    "TestResult",
    "BootstrapResult",
    "reg_inc_beta",
    "student_t_cdf",
    "student_t_two_sided_p",
    "cohen_kappa",
    "span_kappa",
    "welch_t",
    "cohens_d",
    "holm_adjust",
    "compare_features",
    "bootstrap",
    "pearson_r",
    "significance_stars",
]


class StatsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Regularized incomplete beta and the Student-t distribution
# ---------------------------------------------------------------------------

_BETACF_EPS = 1e-15
_BETACF_TINY = 1e-300
_BETACF_MAXIT = 400


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, evaluated by the modified
    Lentz method.  Converges quickly for x < (a+1)/(a+b+2)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_TINY:
        d = _BETACF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise StatsError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise StatsError("reg_inc_beta requires a > 0 and b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Use the continued fraction on whichever side converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, dof: float) -> float:
    """P(|T| >= |t|) for T ~ Student-t with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise StatsError("degrees of freedom must be positive")
    if math.isnan(t):
        raise StatsError("t statistic is NaN")
    if math.isinf(t):
        return 0.0
    x = dof / (dof + t * t)
    return reg_inc_beta(dof / 2.0, 0.5, x)


def student_t_cdf(t: float, dof: float) -> float:
    """P(T <= t) via the two-sided tail."""
    p = student_t_two_sided_p(t, dof)
    return 1.0 - p / 2.0 if t >= 0 else p / 2.0


# ---------------------------------------------------------------------------
# Inter-annotator agreement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    observed_agreement: float
    expected_agreement: float
    unit: str | None = None  # "document" | "token" | None for plain label vectors


def cohen_kappa(labels_a: Sequence, labels_b: Sequence, unit: str | None = None) -> KappaResult:
    """Two-rater Cohen's kappa over parallel label vectors."""
    if len(labels_a) != len(labels_b):
        raise StatsError(
            f"label vectors differ in length: {len(labels_a)} vs {len(labels_b)}"
        )
    n = len(labels_a)
    if n == 0:
        raise StatsError("cannot compute kappa on empty label vectors")
    p_o = sum(1 for x, y in zip(labels_a, labels_b) if x == y) / n
    cats = set(labels_a) | set(labels_b)
    p_e = 0.0
    for c in cats:
        pa = sum(1 for x in labels_a if x == c) / n
        pb = sum(1 for y in labels_b if y == c) / n
        p_e += pa * pb
    if p_e >= 1.0:
        # Both raters constant on the same category; total agreement.
        kappa = 1.0
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)
    return KappaResult(kappa=kappa, observed_agreement=p_o, expected_agreement=p_e, unit=unit)


def span_kappa(
    annotations: Sequence[SpanAnnotation],
    unit: str,
    label: str,
    docs: Iterable[Document],
    annotators: tuple[str, str] | None = None,
) -> KappaResult:
    """Agreement between two annotators' spans of one label.

    ``docs`` is the universe of documents both annotators were responsible
    for; documents neither touched count as agreed negatives.  With
    unit="document" each document becomes one binary item (has / lacks a
    span of the label); with unit="token" every token of every document
    becomes one item, positive when it overlaps one of the annotator's
    spans.
    """
    if unit not in ("document", "token"):
        raise StatsError(f"unit must be 'document' or 'token', got {unit!r}")
    doc_list = sorted(docs, key=lambda d: d.id)
    if not doc_list:
        raise StatsError("span_kappa needs a non-empty document universe")
    if annotators is None:
        names = sorted({a.annotator for a in annotations})
        if len(names) != 2:
            raise StatsError(
                f"span_kappa requires exactly 2 annotators, found {len(names)}: {names}"
            )
        annotators = (names[0], names[1])
    a_name, b_name = annotators
    spans: dict[str, dict[str, list[tuple[int, int]]]] = {a_name: {}, b_name: {}}
    for ann in annotations:
        if ann.label != label or ann.annotator not in spans:
            continue
        spans[ann.annotator].setdefault(ann.doc_id, []).append((ann.start, ann.end))

    labels_a: list[int] = []
    labels_b: list[int] = []
    if unit == "document":
        for doc in doc_list:
            labels_a.append(1 if spans[a_name].get(doc.id) else 0)
            labels_b.append(1 if spans[b_name].get(doc.id) else 0)
    else:
        for doc in doc_list:
            tokens = textproc.tokenize(doc.text)
            for who, out in ((a_name, labels_a), (b_name, labels_b)):
                ranges = spans[who].get(doc.id, [])
                for tok in tokens:
                    inside = any(tok.start < e and s < tok.end for s, e in ranges)
                    out.append(1 if inside else 0)
    return cohen_kappa(labels_a, labels_b, unit=unit)


# ---------------------------------------------------------------------------
# Two-sample tests
# ---------------------------------------------------------------------------


def _check_group(name: str, values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise StatsError(f"group {name} needs at least 2 values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise StatsError(f"group {name} contains non-finite values")
    return arr


def welch_t(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, float]:
    """Welch's unequal-variance t-test: returns (t, dof, two-sided p)."""
    xa = _check_group("a", a)
    xb = _check_group("b", b)
    na, nb = xa.size, xb.size
    ma, mb = float(np.mean(xa)), float(np.mean(xb))
    va, vb = float(np.var(xa, ddof=1)), float(np.var(xb, ddof=1))
    sa, sb = va / na, vb / nb
    se2 = sa + sb
    if se2 == 0.0:
        # Both groups constant: no sampling variance at all.
        dof = float(na + nb - 2)
        if ma == mb:
            return 0.0, dof, 1.0
        return math.copysign(math.inf, ma - mb), dof, 0.0
    t = (ma - mb) / math.sqrt(se2)
    dof = se2 * se2 / (sa * sa / (na - 1) + sb * sb / (nb - 1))
    p = student_t_two_sided_p(t, dof)
    return t, dof, p


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """Cohen's d with the (n−1)-weighted pooled standard deviation."""
    xa = _check_group("a", a)
    xb = _check_group("b", b)
    na, nb = xa.size, xb.size
    va, vb = float(np.var(xa, ddof=1)), float(np.var(xb, ddof=1))
    pooled = math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))
    if pooled == 0.0:
        raise StatsError("cohens_d undefined: pooled standard deviation is zero")
    return (float(np.mean(xa)) - float(np.mean(xb))) / pooled


def holm_adjust(p_values: Sequence[float]) -> list[float]:
    """Step-down Holm adjustment, returned in the input order."""
    m = len(p_values)
    for p in p_values:
        if not (0.0 <= p <= 1.0):
            raise StatsError(f"p-value out of range: {p}")
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p_values[idx])
        adjusted[idx] = min(1.0, running)
    return adjusted


def significance_stars(p_adjusted: float) -> str:
    if p_adjusted < 0.001:
        return "***"
    if p_adjusted < 0.01:
        return "**"
    if p_adjusted < 0.05:
        return "*"
    return ""


@dataclass(frozen=True)
class TestResult:
    measure: str
    t: float
    dof: float
    p_raw: float
    p_adjusted: float
    d: float
    direction: str  # "story" | "non_story" | "none"
    significant: bool

    @property
    def stars(self) -> str:
        return significance_stars(self.p_adjusted)


def compare_features(
    vectors: Sequence,
    labels: Sequence[bool],
    alpha: float = 0.05,
) -> tuple[list[TestResult], dict[str, str]]:
    """Per-measure story vs non-story tests with family-wise Holm correction.

    ``vectors`` may be mappings of measure name to value or objects with an
    ``as_dict()`` method.  Non-finite measure values are dropped per measure;
    measures left with fewer than 2 values in either group, or constant in
    both groups, are excluded and reported in the second return value.
    """
    if len(vectors) != len(labels):
        raise StatsError("vectors and labels differ in length")
    rows = [v.as_dict() if hasattr(v, "as_dict") else dict(v) for v in vectors]
    n_story = sum(1 for y in labels if y)
    n_non = len(labels) - n_story
    if n_story < 2 or n_non < 2:
        raise StatsError(
            f"need at least 2 documents per group, got {n_story} story / {n_non} non-story"
        )
    measures = sorted({k for row in rows for k in row})
    excluded: dict[str, str] = {}
    kept: list[tuple[str, np.ndarray, np.ndarray]] = []
    for measure in measures:
        story_vals = [row[measure] for row, y in zip(rows, labels) if y and measure in row]
        non_vals = [row[measure] for row, y in zip(rows, labels) if not y and measure in row]
        story = np.asarray([v for v in story_vals if math.isfinite(v)], dtype=float)
        non = np.asarray([v for v in non_vals if math.isfinite(v)], dtype=float)
        if story.size < 2 or non.size < 2:
            excluded[measure] = (
                f"fewer than 2 finite values in a group "
                f"(story={story.size}, non_story={non.size})"
            )
            continue
        if np.var(story) == 0.0 and np.var(non) == 0.0:
            excluded[measure] = "constant in both groups"
            continue
        kept.append((measure, story, non))

    raw: list[tuple[str, float, float, float, float]] = []
    for measure, story, non in kept:
        t, dof, p = welch_t(story, non)
        d = cohens_d(story, non)
        raw.append((measure, t, dof, p, d))
    adjusted = holm_adjust([r[3] for r in raw])
    results: list[TestResult] = []
    for (measure, t, dof, p, d), p_adj in zip(raw, adjusted):
        significant = p_adj < alpha
        if not significant:
            direction = "none"
        else:
            direction = "story" if d > 0 else "non_story"
        results.append(
            TestResult(
                measure=measure,
                t=t,
                dof=dof,
                p_raw=p,
                p_adjusted=p_adj,
                d=d,
                direction=direction,
                significant=significant,
            )
        )
    return results, excluded


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    sd: float
    values: tuple[float, ...]


_NAMED_STATISTICS: dict[str, Callable[..., float]] = {
    "mean": lambda x: float(np.mean(x)),
    "median": lambda x: float(np.median(x)),
    "sum": lambda x: float(np.sum(x)),
}


def resample_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for one resample; derived so resamples are order-independent."""
    return np.random.default_rng([seed, index])


def bootstrap(
    data,
    statistic: str | Callable[..., float],
    n_resamples: int,
    seed: int = 0,
) -> BootstrapResult:
    """Bootstrap a statistic by resampling rows with replacement.

    ``data`` is one sequence, or a tuple of equal-length sequences resampled
    jointly (paired bootstrap).  ``statistic`` is a callable over the
    resampled array(s) or one of the named statistics
    (``mean``/``median``/``sum``).  Deterministic: resample ``i`` uses a
    generator seeded with (seed, i).
    """
    if n_resamples < 1:
        raise StatsError("n_resamples must be >= 1")
    if isinstance(statistic, str):
        try:
            stat_fn = _NAMED_STATISTICS[statistic]
        except KeyError:
            raise StatsError(
                f"unknown statistic {statistic!r}; known: {sorted(_NAMED_STATISTICS)}"
            ) from None
    else:
        stat_fn = statistic

    if isinstance(data, tuple):
        arrays = [np.asarray(part) for part in data]
        if not arrays or any(a.shape[0] != arrays[0].shape[0] for a in arrays):
            raise StatsError("paired bootstrap needs equal-length sequences")
        n = arrays[0].shape[0]
    else:
        arrays = [np.asarray(data)]
        n = arrays[0].shape[0]
    if n == 0:
        raise StatsError("cannot bootstrap empty data")

    values: list[float] = []
    for i in range(n_resamples):
        rng = resample_rng(seed, i)
        idx = rng.integers(0, n, size=n)
        parts = [a[idx] for a in arrays]
        values.append(float(stat_fn(*parts)))
    arr = np.asarray(values)
    sd = float(np.std(arr, ddof=1)) if n_resamples > 1 else 0.0
    return BootstrapResult(mean=float(np.mean(arr)), sd=sd, values=tuple(values))


# ---------------------------------------------------------------------------
# Correlation
# ---------------------------------------------------------------------------


def pearson_r(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Pearson correlation with a two-sided p-value from the t transform."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise StatsError("pearson_r needs two equal-length vectors")
    n = xa.size
    if n < 3:
        raise StatsError("pearson_r needs at least 3 points")
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(ya))):
        raise StatsError("pearson_r requires finite values")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = math.sqrt(float(np.dot(dx, dx)))
    sy = math.sqrt(float(np.dot(dy, dy)))
    if sx == 0.0 or sy == 0.0:
        raise StatsError("pearson_r undefined for a constant vector")
    r = float(np.dot(dx, dy)) / (sx * sy)
    r = max(-1.0, min(1.0, r))
    # Exactly collinear data can land a few ulps inside ±1 through dot-product
    # rounding; snap those so perfect correlation reports p = 0.
    if 1.0 - abs(r) < 4e-16:
        return math.copysign(1.0, r), 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = student_t_two_sided_p(t, n - 2)
    return r, p
