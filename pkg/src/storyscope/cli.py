"""The ``storyscope`` command: reproducible subcommands over the library.

Every artifact is stamped with a 12-hex config hash (over the semantic
configuration: inputs, hyperparameters, seeds — not output locations) plus
the seed, and every command is deterministic: rerunning with the same
config and seed reproduces each output byte for byte, SVGs included.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import community, detector, features as features_mod, stats, synth, textproc
from . import corpus as corpus_mod
from .annotation_service import AnnotationStore
from .community import CommunityError
from .corpus import CategoryMap, Corpus, CorpusError, LabeledDoc
from .detector import DetectorError
from .features import FeaturesError
from .stats import StatsError
from .textproc import TextProcError


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_PATH_KEYS = (
    "corpus",
    "annotations",
    "realis",
    "entities",
    "lexicon",
    "categories",
    "exclusions",
    "predictions",
    "model",
    "external",
    "completions",
    "shots",
)

_DEFAULTS: dict[str, object] = {
    **{k: None for k in _PATH_KEYS},
    "seed": 0,
    "min_df": 2,
    "lam": 1e-3,
    "epochs": 20,
    "n_resamples": 1000,
    "n_boot": 20,
    "alpha": 0.1,
    "lm_lambda1": 0.2,
    "lm_lambda2": 0.3,
    "lm_lambda3": 0.5,
    "min_tokens": 5,
    "max_tokens": 5000,
    "per_community": 50,
    "downsample": "",
    "train_frac": 0.7,
    "val_frac": 0.15,
    "top_k": 3,
    "weighting": "frequency",
    "kappa_unit_story": "document",
    "kappa_unit_event": "token",
    "lowercase": True,
    "sequentiality": True,
    "annotators": "",
    "adjudicators": "",
    "excluded_categories": "",
    "n_docs": 2000,
    "label": None,
    "unit": None,
    "prompt_mode": "zero_shot",
    "host": "127.0.0.1",
    "port": 8765,
    "log": None,
}

#: Keys that do not affect computed results and stay out of the config hash.
_UNHASHED = {"out", "log", "host", "port"}


def _read_config_file(path: Path) -> dict[str, object]:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    if not cp.has_section("storyscope"):
        raise ConfigError(f"{path}: config file needs a [storyscope] section")
    out: dict[str, object] = {}
    for key, raw in cp.items("storyscope"):
        if key not in _DEFAULTS:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        default = _DEFAULTS[key]
        try:
            if isinstance(default, bool):
                out[key] = cp.getboolean("storyscope", key)
            elif isinstance(default, int):
                out[key] = int(raw)
            elif isinstance(default, float):
                out[key] = float(raw)
            else:
                out[key] = raw
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {raw!r}") from exc
    return out


@dataclass
class RunConfig:
    command: str
    values: dict[str, object]
    out: Path | None

    @classmethod
    def build(cls, args: argparse.Namespace) -> "RunConfig":
        values = dict(_DEFAULTS)
        config_path = getattr(args, "config", None)
        if config_path:
            path = Path(config_path)
            if not path.is_file():
                raise ConfigError(f"config file {path} does not exist")
            values.update(_read_config_file(path))
        for key in _DEFAULTS:
            flag = getattr(args, key, None)
            if flag is not None:
                values[key] = flag
        out = getattr(args, "out", None)
        return cls(command=args.command, values=values, out=Path(out) if out else None)

    def get(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    def path(self, key: str, required: bool = False) -> Path | None:
        raw = self.values.get(key)
        if raw is None or raw == "":
            if required:
                raise ConfigError(f"the {self.command} command needs --{key.replace('_', '-')}")
            return None
        p = Path(str(raw))
        if not p.exists():
            raise ConfigError(f"--{key.replace('_', '-')}: {p} does not exist")
        return p

    def out_dir(self) -> Path:
        if self.out is None:
            raise ConfigError(f"the {self.command} command needs --out")
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out

    @property
    def semantic(self) -> dict[str, object]:
        return {
            k: v
            for k, v in sorted(self.values.items())
            if k not in _UNHASHED and v is not None and v != ""
        }

    @property
    def config_hash(self) -> str:
        payload = json.dumps({"command": self.command, **self.semantic}, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]

    @property
    def meta(self) -> dict[str, object]:
        return {"config_hash": self.config_hash, "seed": self.seed}


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, cfg: RunConfig, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash={cfg.config_hash} seed={cfg.seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_jsonl(path: Path, cfg: RunConfig, records: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"_meta": cfg.meta}) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def _write_manifest(cfg: RunConfig, outputs: Sequence[str]) -> None:
    payload = {
        "command": cfg.command,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "config": {k: str(v) if isinstance(v, Path) else v for k, v in cfg.semantic.items()},
        "outputs": sorted(outputs),
    }
    path = cfg.out_dir() / "run_manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def _save_svg(fig, path: Path, cfg: RunConfig) -> None:
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = cfg.config_hash
    fig.savefig(path, format="svg", metadata={"Date": None})
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(f"<!-- config_hash={cfg.config_hash} seed={cfg.seed} -->\n")


# ---------------------------------------------------------------------------
# Shared loading steps
# ---------------------------------------------------------------------------


def _load_corpus(cfg: RunConfig) -> Corpus:
    return corpus_mod.load_corpus(cfg.path("corpus", required=True))


def _load_lexicon(cfg: RunConfig) -> textproc.ConcretenessLexicon | None:
    path = cfg.path("lexicon")
    return textproc.ConcretenessLexicon.from_tsv(path) if path else None


def _annotator_names(cfg: RunConfig, annotations) -> list[str]:
    raw = str(cfg.get("annotators") or "")
    if raw:
        return [a.strip() for a in raw.split(",") if a.strip()]
    adjudicators = {a.strip() for a in str(cfg.get("adjudicators") or "").split(",") if a.strip()}
    skip = {features_mod.REALIS_ANNOTATOR, "ner"} | adjudicators
    return sorted({a.annotator for a in annotations} - skip)


def _load_labeled(cfg: RunConfig, corpus: Corpus) -> tuple[list[LabeledDoc], list]:
    annotations = corpus_mod.load_annotations(cfg.path("annotations", required=True), corpus)
    names = _annotator_names(cfg, annotations)
    if not names:
        raise ConfigError("no annotators found in the annotation file")
    labeled = corpus_mod.union_story_labels(corpus, annotations, set(names))
    return labeled, annotations


def _build_feature_vectors(
    cfg: RunConfig, corpus: Corpus
) -> tuple[list[features_mod.FeatureVector], list]:
    annotations = None
    ann_path = cfg.path("annotations")
    if ann_path:
        annotations = corpus_mod.load_annotations(ann_path, corpus)
    realis = None
    realis_path = cfg.path("realis")
    if realis_path:
        realis = corpus_mod.load_annotations(realis_path, corpus, allowed_labels=None)
    entities = None
    entities_path = cfg.path("entities")
    if entities_path:
        entities = corpus_mod.load_annotations(entities_path, corpus, allowed_labels=None)
    lexicon = _load_lexicon(cfg)
    lm = None
    if bool(cfg.get("sequentiality")):
        lm = features_mod.train_trigram_lm(
            corpus,
            alpha=float(cfg.get("alpha")),
            lambdas=(
                float(cfg.get("lm_lambda1")),
                float(cfg.get("lm_lambda2")),
                float(cfg.get("lm_lambda3")),
            ),
            seed=cfg.seed,
        )
    vectors = features_mod.extract_corpus_features(
        corpus,
        spans=annotations,
        lexicon=lexicon,
        lm=lm,
        realis_spans=realis,
        entity_spans=entities,
    )
    return vectors, annotations if annotations is not None else []


def _split_sizes(cfg: RunConfig, n: int) -> tuple[int, int, int]:
    train_frac = float(cfg.get("train_frac"))
    val_frac = float(cfg.get("val_frac"))
    if train_frac <= 0 or val_frac < 0 or train_frac + val_frac >= 1:
        raise ConfigError("need 0 < train_frac, 0 <= val_frac, train_frac + val_frac < 1")
    n_train = int(train_frac * n)
    n_val = int(val_frac * n)
    return n_train, n_val, n - n_train - n_val


def _load_predictions(cfg: RunConfig, corpus: Corpus) -> dict[str, bool]:
    path = cfg.path("predictions", required=True)
    preds: dict[str, bool] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("_meta") is not None and "doc_id" not in obj:
                continue
            if "doc_id" not in obj or "story" not in obj:
                raise ConfigError(f"{path}:{lineno}: need doc_id and story fields")
            preds[str(obj["doc_id"])] = bool(obj["story"])
    missing = [d.id for d in corpus if d.id not in preds]
    if missing:
        raise ConfigError(
            f"{path}: missing predictions for {len(missing)} documents (first: {missing[0]!r})"
        )
    return preds


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(cfg: RunConfig, args) -> int:
    out = cfg.out_dir()
    data = synth.generate(n_docs=int(cfg.get("n_docs")), seed=cfg.seed)
    paths = synth.write_dataset(data, out)
    # Stamp the JSONL artifacts with the run metadata (readers skip _meta).
    for key in ("corpus", "annotations", "realis", "entities", "gold"):
        path = paths[key]
        body = path.read_text(encoding="utf-8")
        path.write_text(json.dumps({"_meta": cfg.meta}) + "\n" + body, encoding="utf-8")
    for key, comment in (("lexicon", "#"), ("categories", "#")):
        path = paths[key]
        body = path.read_text(encoding="utf-8")
        path.write_text(
            f"{comment} config_hash={cfg.config_hash} seed={cfg.seed}\n" + body,
            encoding="utf-8",
        )
    _write_manifest(cfg, [p.name for p in paths.values()])
    n_story = sum(1 for v in data.gold.values() if v)
    print(
        f"wrote {len(data.corpus)} documents ({n_story} story / "
        f"{len(data.corpus) - n_story} non-story) to {out}"
    )
    return 0


def cmd_ingest(cfg: RunConfig, args) -> int:
    out = cfg.out_dir()
    corpus = _load_corpus(cfg)
    unmapped: list[str] = []
    cat_path = cfg.path("categories")
    if cat_path:
        excluded = tuple(
            c.strip() for c in str(cfg.get("excluded_categories")).split(",") if c.strip()
        )
        cat_map = CategoryMap.from_csv(cat_path, excluded_categories=excluded)
        corpus, unmapped = corpus_mod.apply_categories(corpus, cat_map)
        if excluded:
            keep = {
                d.id
                for d in corpus
                if cat_map.category_of(d.community) not in cat_map.excluded_categories
            }
            corpus = Corpus(d for d in corpus if d.id in keep)
    excl_path = cfg.path("exclusions")
    if excl_path:
        corpus = corpus_mod.filter_excluded(corpus, corpus_mod.load_exclusion_ids(excl_path))
    _write_jsonl(out / "corpus.jsonl", cfg, (d.to_json_dict() for d in corpus))
    _write_manifest(cfg, ["corpus.jsonl"])
    for community_name in unmapped:
        print(f"warning: community {community_name!r} has no category; dropped", file=sys.stderr)
    print(f"ingested {len(corpus)} documents across {len(corpus.communities())} communities")
    return 0


def cmd_sample(cfg: RunConfig, args) -> int:
    out = cfg.out_dir()
    corpus = _load_corpus(cfg)
    if args.mode == "annotation":
        cat_path = cfg.path("categories", required=True)
        excluded = tuple(
            c.strip() for c in str(cfg.get("excluded_categories")).split(",") if c.strip()
        )
        cat_map = CategoryMap.from_csv(cat_path, excluded_categories=excluded)
        downsample: dict[str, int] = {}
        raw = str(cfg.get("downsample") or "")
        for part in raw.split(","):
            if part.strip():
                cat, _, cap = part.partition(":")
                try:
                    downsample[cat.strip()] = int(cap)
                except ValueError as exc:
                    raise ConfigError(f"bad downsample entry {part!r}") from exc
        sampled = corpus_mod.sample_annotation_set(
            corpus,
            cat_map,
            per_community=int(cfg.get("per_community")),
            min_tokens=int(cfg.get("min_tokens")),
            max_tokens=int(cfg.get("max_tokens")),
            downsample=downsample,
            seed=cfg.seed,
        )
    else:
        sampled = corpus_mod.sample_prediction_set(
            corpus, per_community=int(cfg.get("per_community")), seed=cfg.seed
        )
    _write_jsonl(out / "sample.jsonl", cfg, (d.to_json_dict() for d in sampled))
    _write_manifest(cfg, ["sample.jsonl"])
    print(f"sampled {len(sampled)} documents from {len(sampled.communities())} communities")
    return 0


def cmd_features(cfg: RunConfig, args) -> int:
    out = cfg.out_dir()
    corpus = _load_corpus(cfg)
    vectors, _ = _build_feature_vectors(cfg, corpus)
    _write_csv(
        out / "features.csv",
        cfg,
        features_mod.CSV_COLUMNS,
        (v.to_csv_row() for v in vectors),
    )
    _write_manifest(cfg, ["features.csv"])
    print(f"extracted {len(vectors)} feature vectors ({len(features_mod.MEASURES)} measures)")
    return 0


def cmd_compare(cfg: RunConfig, args) -> int:
    out = cfg.out_dir()
    corpus = _load_corpus(cfg)
    labeled, _ = _load_labeled(cfg, corpus)
    vectors, _ = _build_feature_vectors(cfg, corpus)
    labels = [ld.story for ld in labeled]
    results, excluded = stats.compare_features(vectors, labels)
    results = sorted(results, key=lambda r: (-abs(r.d), r.measure))
    _write_csv(
        out / "comparisons.csv",
        cfg,
        ("measure", "d", "direction", "p_adjusted", "p_raw", "t", "dof", "stars"),
        (
            (r.measure, r.d, r.direction, r.p_adjusted, r.p_raw, r.t, r.dof, r.stars)
            for r in results
        ),
    )
    _write_csv(
        out / "excluded_measures.csv",
        cfg,
        ("measure", "reason"),
        sorted(excluded.items()),
    )
    _write_manifest(cfg, ["comparisons.csv", "excluded_measures.csv"])
    n_sig = sum(1 for r in results if r.significant)
    print(f"compared {len(results)} measures ({n_sig} significant, {len(excluded)} excluded)")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    out = cfg.out_dir()
    corpus = _load_corpus(cfg)
    labeled, _ = _load_labeled(cfg, corpus)
    train, val, test = corpus_mod.split(labeled, _split_sizes(cfg, len(labeled)), seed=cfg.seed)
    tfidf = detector.fit_tfidf(
        [ld.doc for ld in train],
        min_df=int(cfg.get("min_df")),
        lowercase=bool(cfg.get("lowercase")),
    )
    model = detector.train_linear(
        tfidf,
        train,
        lam=float(cfg.get("lam")),
        epochs=int(cfg.get("epochs")),
        seed=cfg.seed,
    )
    detector.save_model(out / "model.json", tfidf, model)
    splits = {
        "_meta": cfg.meta,
        "train": [ld.doc.id for ld in train],
        "val": [ld.doc.id for ld in val],
        "test": [ld.doc.id for ld in test],
    }
    (out / "splits.json").write_text(
        json.dumps(splits, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(cfg, ["model.json", "splits.json"])
    if val:
        val_pred = detector.predict(model, tfidf, [ld.doc for ld in val])
        p, r, f, _ = detector.macro_prf(val_pred, [ld.story for ld in val])
        print(
            f"trained on {len(train)} docs (vocab {len(tfidf.vocabulary)}); "
            f"validation macro P/R/F1 = {p:.3f}/{r:.3f}/{f:.3f}"
        )
    else:
        print(f"trained on {len(train)} docs (vocab {len(tfidf.vocabulary)})")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    out = cfg.out_dir()
    corpus = _load_corpus(cfg)
    labeled, _ = _load_labeled(cfg, corpus)
    train, val, test = corpus_mod.split(labeled, _split_sizes(cfg, len(labeled)), seed=cfg.seed)
    if not test:
        raise ConfigError("test split is empty; adjust train_frac/val_frac")
    tfidf, model = detector.load_model(cfg.path("model", required=True))
    gold = [ld.story for ld in test]
    test_docs = [ld.doc for ld in test]

    methods: list[tuple[str, list[bool]]] = []
    majority = detector.majority_baseline([ld.story for ld in train])
    methods.append(("majority", majority.predict(test_docs)))
    methods.append(("tfidf_linear", detector.predict(model, tfidf, test_docs)))
    external_path = cfg.path("external")
    unparseable = 0
    if external_path:
        ext, unparseable = detector.import_external_predictions(external_path, test_docs)
        methods.append(("external", ext))

    rows = []
    for name, preds in methods:
        report = detector.evaluate(
            preds, gold, n_resamples=int(cfg.get("n_resamples")), seed=cfg.seed
        )
        r = report.row()
        rows.append(
            (
                name,
                r["precision_mean"],
                r["precision_sd"],
                r["recall_mean"],
                r["recall_sd"],
                r["f1_mean"],
                r["f1_sd"],
                report.n_resamples,
                report.absent_class_resamples,
            )
        )
        print(
            f"{name}: P={r['precision_mean']:.3f}±{r['precision_sd']:.3f} "
            f"R={r['recall_mean']:.3f}±{r['recall_sd']:.3f} "
            f"F1={r['f1_mean']:.3f}±{r['f1_sd']:.3f}"
        )
    if unparseable:
        print(f"warning: {unparseable} unparseable external responses counted as non-story",
              file=sys.stderr)
    _write_csv(
        out / "eval.csv",
        cfg,
        (
            "method",
            "precision_mean",
            "precision_sd",
            "recall_mean",
            "recall_sd",
            "f1_mean",
            "f1_sd",
            "n_resamples",
            "absent_class_resamples",
        ),
        rows,
    )
    _write_manifest(cfg, ["eval.csv"])
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    out = cfg.out_dir()
    corpus = _load_corpus(cfg)
    tfidf, model = detector.load_model(cfg.path("model", required=True))
    docs = corpus.docs
    values = detector.decision_values(model, tfidf, docs)
    records = [
        {"doc_id": d.id, "story": bool(v > 0.0), "decision": float(v)}
        for d, v in zip(docs, values)
    ]
    _write_jsonl(out / "predictions.jsonl", cfg, records)
    _write_manifest(cfg, ["predictions.jsonl"])
    n_story = sum(1 for r in records if r["story"])
    print(f"predicted {n_story}/{len(records)} documents as stories")
    return 0


def _analyze_rates(cfg: RunConfig, corpus: Corpus, preds: dict[str, bool]) -> list[str]:
    out = cfg.out_dir()
    docs = corpus.docs
    by_comm = community.story_rates(
        docs, preds, "community", n_boot=int(cfg.get("n_boot")), seed=cfg.seed
    )
    by_cat = community.story_rates(
        docs, preds, "category", n_boot=int(cfg.get("n_boot")), seed=cfg.seed
    )
    _write_csv(
        out / "rates_by_community.csv",
        cfg,
        ("community", "n_texts", "story_rate", "bootstrap_mean", "bootstrap_sd"),
        (
            (p.group, p.n_texts, p.story_rate, p.bootstrap.mean, p.bootstrap.sd)
            for p in by_comm
        ),
    )
    _write_csv(
        out / "rates_by_category.csv",
        cfg,
        (
            "category",
            "n_texts",
            "story_rate",
            "bootstrap_mean",
            "bootstrap_sd",
            "member_rates",
        ),
        (
            (
                p.group,
                p.n_texts,
                p.story_rate,
                p.bootstrap.mean,
                p.bootstrap.sd,
                ";".join(repr(r) for r in p.member_rates),
            )
            for p in by_cat
        ),
    )
    plot_records = [
        {"category": p.group, "story_rate": p.story_rate, "samples": list(p.bootstrap.values)}
        for p in by_cat
    ]
    _write_jsonl(out / "rates_boxplot.jsonl", cfg, plot_records)

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    data = [rec["samples"] for rec in plot_records]
    ax.boxplot(data, positions=list(range(1, len(plot_records) + 1)))
    ax.set_xticks(list(range(1, len(plot_records) + 1)))
    ax.set_xticklabels([rec["category"] for rec in plot_records], rotation=20, ha="right")
    ax.set_xlabel("category")
    ax.set_ylabel("story rate")
    ax.set_title("Story rates by category (bootstrap spread)")
    fig.tight_layout()
    _save_svg(fig, out / "rates_boxplot.svg", cfg)
    plt.close(fig)
    overall = sum(1 for d in docs if preds[d.id]) / len(docs)
    print(f"overall story rate: {overall:.3f} across {len(by_comm)} communities")
    return [
        "rates_by_community.csv",
        "rates_by_category.csv",
        "rates_boxplot.jsonl",
        "rates_boxplot.svg",
    ]


def _analyze_distinctiveness(cfg: RunConfig, corpus: Corpus, preds: dict[str, bool]) -> list[str]:
    out = cfg.out_dir()
    weighting = str(cfg.get("weighting"))
    story_texts_all = [d.text for d in corpus if preds[d.id]]
    by_comm: dict[str, list[str]] = {}
    for d in corpus:
        if preds[d.id]:
            by_comm.setdefault(d.community, []).append(d.text)
    rows = []
    for name in sorted(corpus.communities()):
        texts = by_comm.get(name, [])
        if texts:
            table = community.specificity(texts, story_texts_all, community=name)
            value = community.distinctiveness(table, weighting=weighting)
            rows.append((name, len(texts), value, weighting, ""))
        else:
            rows.append((name, 0, math.nan, weighting, "no_predicted_stories"))
    _write_csv(
        out / "distinctiveness.csv",
        cfg,
        ("community", "n_story_texts", "distinctiveness", "weighting", "flag"),
        rows,
    )
    print(f"computed distinctiveness ({weighting} weighting) for {len(rows)} communities")
    return ["distinctiveness.csv"]


def _analyze_ratios(cfg: RunConfig, corpus: Corpus, preds: dict[str, bool]) -> list[str]:
    out = cfg.out_dir()
    rows, mean_ratio, n_included = community.post_comment_ratio(corpus.docs, preds)
    _write_csv(
        out / "ratios.csv",
        cfg,
        (
            "community",
            "n_posts",
            "n_comments",
            "p_story_given_post",
            "p_story_given_comment",
            "ratio",
            "included",
            "flag",
        ),
        (
            (
                r.community,
                r.n_posts,
                r.n_comments,
                r.p_story_given_post,
                r.p_story_given_comment,
                r.ratio,
                r.included,
                r.flag,
            )
            for r in rows
        ),
    )
    _write_csv(
        out / "ratios_summary.csv",
        cfg,
        ("mean_ratio", "n_included", "aggregation"),
        [(mean_ratio, n_included, "macro_over_communities")],
    )
    print(f"mean post:comment story ratio {mean_ratio:.3f} over {n_included} communities")
    return ["ratios.csv", "ratios_summary.csv"]


def _analyze_corners(cfg: RunConfig, corpus: Corpus, preds: dict[str, bool]) -> list[str]:
    out = cfg.out_dir()
    profiles = community.build_profiles(
        corpus.docs,
        preds,
        n_boot=int(cfg.get("n_boot")),
        seed=cfg.seed,
        weighting=str(cfg.get("weighting")),
    )
    _write_csv(
        out / "profiles.csv",
        cfg,
        (
            "community",
            "category",
            "n_texts",
            "story_rate",
            "distinctiveness",
            "p_story_given_post",
            "p_story_given_comment",
            "ratio",
            "flag",
        ),
        (
            (
                p.community,
                p.category,
                p.n_texts,
                p.story_rate,
                p.distinctiveness,
                p.p_story_given_post,
                p.p_story_given_comment,
                p.ratio,
                p.flag,
            )
            for p in profiles
        ),
    )
    qmap = community.quadrant_map(profiles, top_k=int(cfg.get("top_k")))
    corner_rows = []
    for corner in community.CORNERS:
        for rank, name in enumerate(qmap.corners[corner], 1):
            corner_rows.append((corner, rank, name))
    _write_csv(out / "corners.csv", cfg, ("corner", "rank", "community"), corner_rows)
    plot_records = [
        {"community": name, "distinctiveness": x, "story_rate": y}
        for name, x, y in qmap.points
    ]
    _write_jsonl(out / "corners_scatter.jsonl", cfg, plot_records)

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 5.5))
    xs = [rec["distinctiveness"] for rec in plot_records]
    ys = [rec["story_rate"] for rec in plot_records]
    ax.scatter(xs, ys)
    for rec in plot_records:
        ax.annotate(
            rec["community"],
            (rec["distinctiveness"], rec["story_rate"]),
            fontsize=7,
            xytext=(3, 3),
            textcoords="offset points",
        )
    ax.set_xlabel("vocabulary distinctiveness")
    ax.set_ylabel("story rate")
    ax.set_title("Communities by story rate and distinctiveness")
    fig.tight_layout()
    _save_svg(fig, out / "corners_scatter.svg", cfg)
    plt.close(fig)
    print(
        "corner communities: "
        + "; ".join(f"{c}: {', '.join(qmap.corners[c])}" for c in community.CORNERS)
    )
    return ["profiles.csv", "corners.csv", "corners_scatter.jsonl", "corners_scatter.svg"]


def _analyze_correlation(cfg: RunConfig, corpus: Corpus, preds: dict[str, bool]) -> list[str]:
    out = cfg.out_dir()
    rows, _, _ = community.post_comment_ratio(corpus.docs, preds)
    q_rates = community.community_question_rates(corpus.docs)
    r, p = community.question_story_correlation(rows, q_rates)
    n = sum(1 for row in rows if math.isfinite(row.p_story_given_post))
    _write_csv(
        out / "correlation.csv",
        cfg,
        ("r", "p", "n_communities", "x", "y"),
        [(r, p, n, "question_mark_rate", "p_story_given_post")],
    )
    print(f"question-rate vs story-in-posts correlation: r={r:.3f}, p={p:.4f} (n={n})")
    return ["correlation.csv"]


_ANALYZE = {
    "rates": _analyze_rates,
    "distinctiveness": _analyze_distinctiveness,
    "ratios": _analyze_ratios,
    "corners": _analyze_corners,
    "correlation": _analyze_correlation,
}


def cmd_analyze(cfg: RunConfig, args) -> int:
    corpus = _load_corpus(cfg)
    preds = _load_predictions(cfg, corpus)
    outputs = _ANALYZE[args.what](cfg, corpus, preds)
    _write_manifest(cfg, outputs)
    return 0


def cmd_prompts(cfg: RunConfig, args) -> int:
    out = cfg.out_dir()
    corpus = _load_corpus(cfg)
    mode = str(cfg.get("prompt_mode"))
    shots: list[tuple[str, bool]] = []
    shots_path = cfg.path("shots")
    if shots_path:
        with open(shots_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                if obj.get("_meta") is not None and "text" not in obj:
                    continue
                if "text" not in obj or "label" not in obj:
                    raise ConfigError(f"{shots_path}:{lineno}: need text and label fields")
                label = obj["label"]
                if isinstance(label, str):
                    label = label.strip().lower() == "story"
                shots.append((str(obj["text"]), bool(label)))
    spec = detector.PromptSpec(mode=mode, shots=tuple(shots))
    prompt_dir = out / "prompts"
    prompt_dir.mkdir(exist_ok=True)
    index_rows = []
    outputs = ["prompts_index.csv"]
    for i, doc in enumerate(corpus):
        name = f"{i:05d}.txt"
        (prompt_dir / name).write_text(detector.build_prompt(spec, doc.text), encoding="utf-8")
        index_rows.append((doc.id, f"prompts/{name}"))
        outputs.append(f"prompts/{name}")
    _write_csv(out / "prompts_index.csv", cfg, ("doc_id", "file"), index_rows)
    _write_manifest(cfg, outputs)
    print(f"wrote {len(index_rows)} {mode} prompts")
    return 0


def cmd_agreement(cfg: RunConfig, args) -> int:
    corpus = _load_corpus(cfg)
    annotations = corpus_mod.load_annotations(cfg.path("annotations", required=True), corpus)
    names = _annotator_names(cfg, annotations)
    if len(names) != 2:
        raise ConfigError(
            f"agreement needs exactly 2 annotators, found {len(names)}: {names} "
            "(set --annotators a,b)"
        )
    label = str(cfg.get("label") or "story")
    default_unit = (
        str(cfg.get("kappa_unit_story")) if label == "story" else str(cfg.get("kappa_unit_event"))
    )
    unit = str(cfg.get("unit") or default_unit)

    docs = corpus.docs
    completions_path = cfg.path("completions")
    if completions_path:
        done: dict[str, set[str]] = {}
        with open(completions_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                if obj.get("_meta") is not None and "doc_id" not in obj:
                    continue
                if obj.get("role", "annotator") != "annotator":
                    continue
                done.setdefault(str(obj["annotator"]), set()).add(str(obj["doc_id"]))
        shared = done.get(names[0], set()) & done.get(names[1], set())
        docs = [d for d in docs if d.id in shared]
        if not docs:
            raise ConfigError("no documents completed by both annotators")
    result = stats.span_kappa(
        annotations, unit=unit, label=label, docs=docs, annotators=(names[0], names[1])
    )
    print(
        f"label={label} unit={unit} kappa={result.kappa:.4f} "
        f"p_o={result.observed_agreement:.4f} p_e={result.expected_agreement:.4f} "
        f"n_docs={len(docs)}"
    )
    if cfg.out is not None:
        _write_csv(
            cfg.out_dir() / "agreement.csv",
            cfg,
            ("label", "unit", "kappa", "observed_agreement", "expected_agreement", "n_docs"),
            [
                (
                    label,
                    unit,
                    result.kappa,
                    result.observed_agreement,
                    result.expected_agreement,
                    len(docs),
                )
            ],
        )
        _write_manifest(cfg, ["agreement.csv"])
    return 0


def cmd_serve(cfg: RunConfig, args) -> int:
    corpus = _load_corpus(cfg)
    raw = str(cfg.get("annotators") or "")
    names = [a.strip() for a in raw.split(",") if a.strip()]
    if len(names) != 2:
        raise ConfigError("serve needs --annotators with exactly two comma-separated names")
    adjudicators = [a.strip() for a in str(cfg.get("adjudicators") or "").split(",") if a.strip()]
    exclusion_ids: frozenset[str] = frozenset()
    excl_path = cfg.path("exclusions")
    if excl_path:
        exclusion_ids = corpus_mod.load_exclusion_ids(excl_path)
    store = AnnotationStore(
        corpus,
        annotators=names,
        log_path=cfg.get("log"),
        adjudicators=adjudicators,
        exclusion_ids=exclusion_ids,
    )
    from .annotation_service import serve

    print(f"serving {len(corpus)} documents on {cfg.get('host')}:{cfg.get('port')}")
    serve(store, host=str(cfg.get("host")), port=int(cfg.get("port")))
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

_DISPATCH = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "sample": cmd_sample,
    "features": cmd_features,
    "compare": cmd_compare,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "analyze": cmd_analyze,
    "prompts": cmd_prompts,
    "agreement": cmd_agreement,
    "serve": cmd_serve,
}


def _add_common(p: argparse.ArgumentParser, *, out: bool = True) -> None:
    p.add_argument("--config", help="INI config file with a [storyscope] section")
    p.add_argument("--seed", type=int, default=None)
    if out:
        p.add_argument("--out", required=False, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storyscope",
        description="Storytelling measurement and detection for online-community text.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the planted-effect synthetic dataset")
    _add_common(p)
    p.add_argument("--n-docs", dest="n_docs", type=int, default=None)

    p = sub.add_parser("ingest", help="validate, categorize, and filter a corpus")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--categories")
    p.add_argument("--exclusions")
    p.add_argument("--excluded-categories", dest="excluded_categories", default=None)

    p = sub.add_parser("sample", help="draw annotation or prediction samples")
    _add_common(p)
    p.add_argument("mode", choices=("annotation", "prediction"))
    p.add_argument("--corpus")
    p.add_argument("--categories")
    p.add_argument("--excluded-categories", dest="excluded_categories", default=None)
    p.add_argument("--per-community", dest="per_community", type=int, default=None)
    p.add_argument("--min-tokens", dest="min_tokens", type=int, default=None)
    p.add_argument("--max-tokens", dest="max_tokens", type=int, default=None)
    p.add_argument("--downsample", default=None, help="category:cap[,category:cap...]")

    def add_feature_inputs(p: argparse.ArgumentParser) -> None:
        p.add_argument("--corpus")
        p.add_argument("--annotations")
        p.add_argument("--realis")
        p.add_argument("--entities")
        p.add_argument("--lexicon")
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument(
            "--sequentiality",
            action=argparse.BooleanOptionalAction,
            default=None,
            help="score sequentiality with the built-in trigram model",
        )

    p = sub.add_parser("features", help="extract per-document measure vectors to CSV")
    _add_common(p)
    add_feature_inputs(p)

    p = sub.add_parser("compare", help="story vs non-story tests over all measures")
    _add_common(p)
    add_feature_inputs(p)
    p.add_argument("--annotators", default=None)

    p = sub.add_parser("train", help="fit TF-IDF + linear story classifier")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--annotations")
    p.add_argument("--annotators", default=None)
    p.add_argument("--min-df", dest="min_df", type=int, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--train-frac", dest="train_frac", type=float, default=None)
    p.add_argument("--val-frac", dest="val_frac", type=float, default=None)

    p = sub.add_parser("eval", help="bootstrapped test-set evaluation vs baselines")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--annotations")
    p.add_argument("--annotators", default=None)
    p.add_argument("--model")
    p.add_argument("--external")
    p.add_argument("--n-resamples", dest="n_resamples", type=int, default=None)
    p.add_argument("--train-frac", dest="train_frac", type=float, default=None)
    p.add_argument("--val-frac", dest="val_frac", type=float, default=None)

    p = sub.add_parser("predict", help="story predictions for every document")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--model")

    p = sub.add_parser("analyze", help="community-level analyses and plots")
    _add_common(p)
    p.add_argument("what", choices=tuple(_ANALYZE))
    p.add_argument("--corpus")
    p.add_argument("--predictions")
    p.add_argument("--n-boot", dest="n_boot", type=int, default=None)
    p.add_argument("--weighting", choices=("frequency", "uniform"), default=None)
    p.add_argument("--top-k", dest="top_k", type=int, default=None)

    p = sub.add_parser("prompts", help="emit classification prompts, one file per document")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument(
        "--prompt-mode",
        dest="prompt_mode",
        choices=detector.PROMPT_MODES,
        default=None,
    )
    p.add_argument("--shots", help="JSONL of {text, label} few-shot examples")

    p = sub.add_parser("agreement", help="offline inter-annotator agreement")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--annotations")
    p.add_argument("--completions")
    p.add_argument("--annotators", default=None)
    p.add_argument("--label", choices=("story", "event"), default=None)
    p.add_argument("--unit", choices=("document", "token"), default=None)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    _add_common(p, out=False)
    p.add_argument("--corpus")
    p.add_argument("--annotators", default=None)
    p.add_argument("--adjudicators", default=None)
    p.add_argument("--exclusions")
    p.add_argument("--log")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.build(args)
        return _DISPATCH[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (
        CorpusError,
        TextProcError,
        FeaturesError,
        StatsError,
        DetectorError,
        CommunityError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
