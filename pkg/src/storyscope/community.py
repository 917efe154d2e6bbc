"""Cross-community analyses: story rates with bootstrap spread, vocabulary
specificity and distinctiveness, post-versus-comment storytelling dynamics,
and the question-asking correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import stats, textproc
from .corpus import Document


class CommunityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Story rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateProfile:
    group: str
    grouping: str  # "community" | "category"
    n_texts: int
    story_rate: float
    bootstrap: stats.BootstrapResult
    member_rates: tuple[float, ...]  # per-community rates inside a category


def _require_predictions(docs: Sequence[Document], predictions: Mapping[str, bool]) -> None:
    missing = [d.id for d in docs if d.id not in predictions]
    if missing:
        raise CommunityError(
            f"{len(missing)} documents lack predictions (first: {missing[0]!r})"
        )


def story_rates(
    docs: Sequence[Document],
    predictions: Mapping[str, bool],
    grouping: str = "community",
    n_boot: int = 20,
    seed: int = 0,
) -> list[RateProfile]:
    """Fraction of texts predicted story per group, with a bootstrap over the
    group's texts.  Category profiles also retain the per-community rates of
    their members, which is what the box plots draw."""
    if grouping not in ("community", "category"):
        raise CommunityError(f"grouping must be 'community' or 'category', got {grouping!r}")
    _require_predictions(docs, predictions)

    groups: dict[str, list[Document]] = {}
    for d in docs:
        key = d.community if grouping == "community" else d.category
        groups.setdefault(key, []).append(d)
    if not groups:
        raise CommunityError("no documents to group")

    profiles = []
    for name in sorted(groups):
        members = groups[name]
        flags = [1.0 if predictions[d.id] else 0.0 for d in members]
        boot = stats.bootstrap(flags, "mean", n_resamples=n_boot, seed=seed)
        if grouping == "category":
            by_comm: dict[str, list[float]] = {}
            for d in members:
                by_comm.setdefault(d.community, []).append(
                    1.0 if predictions[d.id] else 0.0
                )
            member_rates = tuple(
                sum(vals) / len(vals) for _, vals in sorted(by_comm.items())
            )
        else:
            member_rates = (sum(flags) / len(flags),)
        profiles.append(
            RateProfile(
                group=name,
                grouping=grouping,
                n_texts=len(members),
                story_rate=sum(flags) / len(flags),
                bootstrap=boot,
                member_rates=member_rates,
            )
        )
    return profiles


# ---------------------------------------------------------------------------
# Specificity and distinctiveness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpecificityTable:
    community: str
    scores: Mapping[str, float]  # S_c(w) over the community vocabulary
    p_community: Mapping[str, float]
    p_background: Mapping[str, float]


def _word_distribution(texts: Sequence[str]) -> dict[str, float]:
    counts: dict[str, int] = {}
    total = 0
    for text in texts:
        for tok in textproc.tokenize(text):
            if tok.is_word:
                counts[tok.lower] = counts.get(tok.lower, 0) + 1
                total += 1
    if total == 0:
        return {}
    return {w: c / total for w, c in counts.items()}


def specificity(
    community_texts: Sequence[str],
    background_texts: Sequence[str],
    community: str = "",
) -> SpecificityTable:
    """Per-word log-ratio of the community's unigram usage to the pooled
    background usage.  The background must contain the community's own texts
    so every community word has positive background probability."""
    p_c = _word_distribution(community_texts)
    if not p_c:
        raise CommunityError(f"community {community!r} has no word tokens")
    p_bg = _word_distribution(background_texts)
    missing = [w for w in p_c if w not in p_bg]
    if missing:
        raise CommunityError(
            f"background distribution lacks {len(missing)} community words "
            f"(e.g. {missing[0]!r}); the background must include the community's texts"
        )
    scores = {w: math.log(p_c[w] / p_bg[w]) for w in sorted(p_c)}
    return SpecificityTable(
        community=community, scores=scores, p_community=p_c, p_background=p_bg
    )


def distinctiveness(table: SpecificityTable, weighting: str = "frequency") -> float:
    """Average specificity across the community vocabulary.

    Frequency weighting gives Σ_w P_c(w)·S_c(w), the KL divergence from the
    background, hence ≥ 0; uniform weighting is the plain mean of scores.
    """
    if not table.scores:
        raise CommunityError("empty specificity table")
    if weighting == "frequency":
        return sum(table.p_community[w] * s for w, s in table.scores.items())
    if weighting == "uniform":
        return sum(table.scores.values()) / len(table.scores)
    raise CommunityError(f"weighting must be 'frequency' or 'uniform', got {weighting!r}")


# ---------------------------------------------------------------------------
# Posts vs comments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatioRow:
    community: str
    n_posts: int
    n_comments: int
    p_story_given_post: float  # NaN when the community has no posts
    p_story_given_comment: float  # NaN when no comments
    ratio: float  # NaN when excluded
    included: bool
    flag: str = ""


def post_comment_ratio(
    docs: Sequence[Document],
    predictions: Mapping[str, bool],
) -> tuple[list[RatioRow], float, int]:
    """Per-community P(story|post), P(story|comment), and their ratio.

    Communities without both kinds, or with a zero comment-side rate, are
    flagged and left out of the mean ratio, which is the macro average over
    the included communities.
    """
    _require_predictions(docs, predictions)
    by_comm: dict[str, list[Document]] = {}
    for d in docs:
        by_comm.setdefault(d.community, []).append(d)

    rows: list[RatioRow] = []
    included_ratios: list[float] = []
    for name in sorted(by_comm):
        members = by_comm[name]
        posts = [d for d in members if d.kind == "post"]
        comments = [d for d in members if d.kind == "comment"]
        p_post = (
            sum(1 for d in posts if predictions[d.id]) / len(posts) if posts else math.nan
        )
        p_comment = (
            sum(1 for d in comments if predictions[d.id]) / len(comments)
            if comments
            else math.nan
        )
        flag = ""
        ratio = math.nan
        if not posts or not comments:
            flag = "missing_posts" if not posts else "missing_comments"
        elif p_comment == 0.0:
            flag = "zero_comment_story_rate"
        else:
            ratio = p_post / p_comment
        included = flag == ""
        if included:
            included_ratios.append(ratio)
        rows.append(
            RatioRow(
                community=name,
                n_posts=len(posts),
                n_comments=len(comments),
                p_story_given_post=p_post,
                p_story_given_comment=p_comment,
                ratio=ratio,
                included=included,
                flag=flag,
            )
        )
    mean_ratio = (
        sum(included_ratios) / len(included_ratios) if included_ratios else math.nan
    )
    return rows, mean_ratio, len(included_ratios)


# ---------------------------------------------------------------------------
# Profiles and the quadrant map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CommunityProfile:
    community: str
    category: str
    n_texts: int
    story_rate: float
    story_rate_bootstrap: stats.BootstrapResult
    distinctiveness: float  # NaN when the community has no predicted stories
    p_story_given_post: float
    p_story_given_comment: float
    ratio: float
    flag: str = ""


def build_profiles(
    docs: Sequence[Document],
    predictions: Mapping[str, bool],
    n_boot: int = 20,
    seed: int = 0,
    weighting: str = "frequency",
) -> list[CommunityProfile]:
    """Assemble the full per-community profile table.

    Distinctiveness is computed over predicted-story texts only, against a
    background pooled from every community's predicted-story texts.
    """
    _require_predictions(docs, predictions)
    rates = {p.group: p for p in story_rates(docs, predictions, "community", n_boot, seed)}
    ratio_rows, _, _ = post_comment_ratio(docs, predictions)
    ratios = {r.community: r for r in ratio_rows}

    story_texts_all = [d.text for d in docs if predictions[d.id]]
    story_by_comm: dict[str, list[str]] = {}
    for d in docs:
        if predictions[d.id]:
            story_by_comm.setdefault(d.community, []).append(d.text)

    categories = {d.community: d.category for d in docs}
    profiles: list[CommunityProfile] = []
    for name in sorted(rates):
        flag = ""
        if name in story_by_comm:
            table = specificity(story_by_comm[name], story_texts_all, community=name)
            dist = distinctiveness(table, weighting=weighting)
        else:
            dist = math.nan
            flag = "no_predicted_stories"
        rr = ratios[name]
        rp = rates[name]
        profiles.append(
            CommunityProfile(
                community=name,
                category=categories[name],
                n_texts=rp.n_texts,
                story_rate=rp.story_rate,
                story_rate_bootstrap=rp.bootstrap,
                distinctiveness=dist,
                p_story_given_post=rr.p_story_given_post,
                p_story_given_comment=rr.p_story_given_comment,
                ratio=rr.ratio,
                flag=flag or rr.flag,
            )
        )
    return profiles


@dataclass(frozen=True)
class QuadrantMap:
    #: (community, distinctiveness, story_rate) — x then y.
    points: tuple[tuple[str, float, float], ...]
    #: corner name → communities, strongest first.
    corners: Mapping[str, tuple[str, ...]]


CORNERS = (
    "high_rate_high_distinct",
    "high_rate_low_distinct",
    "low_rate_high_distinct",
    "low_rate_low_distinct",
)


def quadrant_map(profiles: Sequence[CommunityProfile], top_k: int = 3) -> QuadrantMap:
    """Scatter of story rate against vocabulary distinctiveness, with the
    corner communities extracted by rank-sum along both axes (name ascending
    breaks ties)."""
    usable = [p for p in profiles if math.isfinite(p.distinctiveness)]
    if len(usable) < 4:
        raise CommunityError(f"need at least 4 communities with both axes, got {len(usable)}")
    by_rate = sorted(usable, key=lambda p: (p.story_rate, p.community))
    by_dist = sorted(usable, key=lambda p: (p.distinctiveness, p.community))
    rate_rank = {p.community: i for i, p in enumerate(by_rate)}
    dist_rank = {p.community: i for i, p in enumerate(by_dist)}
    n = len(usable)

    def top(score_fn) -> tuple[str, ...]:
        ranked = sorted(usable, key=lambda p: (-score_fn(p), p.community))
        return tuple(p.community for p in ranked[:top_k])

    corners = {
        "high_rate_high_distinct": top(
            lambda p: rate_rank[p.community] + dist_rank[p.community]
        ),
        "high_rate_low_distinct": top(
            lambda p: rate_rank[p.community] + (n - 1 - dist_rank[p.community])
        ),
        "low_rate_high_distinct": top(
            lambda p: (n - 1 - rate_rank[p.community]) + dist_rank[p.community]
        ),
        "low_rate_low_distinct": top(
            lambda p: (n - 1 - rate_rank[p.community]) + (n - 1 - dist_rank[p.community])
        ),
    }
    points = tuple(
        (p.community, p.distinctiveness, p.story_rate)
        for p in sorted(usable, key=lambda p: p.community)
    )
    return QuadrantMap(points=points, corners=corners)


# ---------------------------------------------------------------------------
# Question-asking correlation
# ---------------------------------------------------------------------------


def community_question_rates(docs: Sequence[Document]) -> dict[str, float]:
    """Pooled question-mark rate per community: '?' count over character count."""
    marks: dict[str, int] = {}
    chars: dict[str, int] = {}
    for d in docs:
        marks[d.community] = marks.get(d.community, 0) + d.text.count("?")
        chars[d.community] = chars.get(d.community, 0) + len(d.text)
    return {c: (marks[c] / chars[c] if chars[c] else 0.0) for c in sorted(marks)}


def question_story_correlation(
    ratio_rows: Sequence[RatioRow],
    question_rates: Mapping[str, float],
) -> tuple[float, float]:
    """Pearson correlation between per-community question-mark rates and the
    storytelling rate in posts."""
    xs: list[float] = []
    ys: list[float] = []
    for row in sorted(ratio_rows, key=lambda r: r.community):
        if row.community not in question_rates:
            continue
        if not math.isfinite(row.p_story_given_post):
            continue
        xs.append(question_rates[row.community])
        ys.append(row.p_story_given_post)
    if len(xs) < 3:
        raise CommunityError(f"need at least 3 communities with posts, got {len(xs)}")
    return stats.pearson_r(xs, ys)
