import csv
import json
import re

import pytest

from storyscope import corpus as corpus_mod
from storyscope import stats, synth
from storyscope.cli import main

META_RE = re.compile(r"^# config_hash=([0-9a-f]{12}) seed=(\d+)$")


def read_csv(path):
    """Returns (hash, seed, header, rows) from a stamped CSV artifact."""
    lines = path.read_text(encoding="utf-8").splitlines()
    m = META_RE.match(lines[0])
    assert m, f"{path} lacks a metadata comment line: {lines[0]!r}"
    rows = list(csv.reader(lines[1:]))
    return m.group(1), int(m.group(2)), rows[0], rows[1:]


def read_jsonl(path):
    """Returns (meta, records) from a stamped JSONL artifact."""
    lines = [json.loads(x) for x in path.read_text(encoding="utf-8").splitlines() if x.strip()]
    assert "_meta" in lines[0], f"{path} lacks a _meta first line"
    return lines[0]["_meta"], lines[1:]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One full command pipeline over a small synthetic corpus."""
    root = tmp_path_factory.mktemp("pipeline")
    d = {
        "root": root,
        "synth": root / "synth",
        "features": root / "features",
        "compare": root / "compare",
        "train": root / "train",
        "eval": root / "eval",
        "predict": root / "predict",
        "prompts": root / "prompts",
        "agreement": root / "agreement",
    }
    for what in ("rates", "corners", "ratios", "correlation", "distinctiveness"):
        d[what] = root / f"analyze_{what}"

    assert main(["synth", "--out", str(d["synth"]), "--n-docs", "240", "--seed", "11"]) == 0
    corpus = str(d["synth"] / "corpus.jsonl")
    annotations = str(d["synth"] / "annotations.jsonl")
    feature_flags = [
        "--corpus", corpus,
        "--annotations", annotations,
        "--realis", str(d["synth"] / "realis.jsonl"),
        "--entities", str(d["synth"] / "entities.jsonl"),
        "--lexicon", str(d["synth"] / "lexicon.tsv"),
        "--seed", "11",
    ]
    assert main(["features", "--out", str(d["features"])] + feature_flags) == 0
    assert main(["compare", "--out", str(d["compare"])] + feature_flags) == 0
    assert main([
        "train", "--out", str(d["train"]), "--corpus", corpus,
        "--annotations", annotations, "--seed", "11",
    ]) == 0
    model = str(d["train"] / "model.json")
    assert main([
        "eval", "--out", str(d["eval"]), "--corpus", corpus,
        "--annotations", annotations, "--model", model,
        "--n-resamples", "200", "--seed", "11",
    ]) == 0
    assert main([
        "predict", "--out", str(d["predict"]), "--corpus", corpus,
        "--model", model, "--seed", "11",
    ]) == 0
    predictions = str(d["predict"] / "predictions.jsonl")
    for what in ("rates", "corners", "ratios", "correlation", "distinctiveness"):
        assert main([
            "analyze", what, "--out", str(d[what]), "--corpus", corpus,
            "--predictions", predictions, "--seed", "11",
        ]) == 0
    assert main([
        "agreement", "--out", str(d["agreement"]), "--corpus", corpus,
        "--annotations", annotations, "--seed", "11",
    ]) == 0
    assert main([
        "prompts", "--out", str(d["prompts"]), "--corpus", corpus, "--seed", "11",
    ]) == 0
    return d


# ---------------------------------------------------------------------------
# Artifact stamping and schemas
# ---------------------------------------------------------------------------


def test_synth_outputs_are_stamped(pipeline):
    out = pipeline["synth"]
    names = {
        "corpus.jsonl", "annotations.jsonl", "realis.jsonl", "entities.jsonl",
        "gold.jsonl", "lexicon.tsv", "categories.csv", "run_manifest.json",
    }
    assert names <= {p.name for p in out.iterdir()}
    meta, records = read_jsonl(out / "corpus.jsonl")
    assert set(meta) == {"config_hash", "seed"} and meta["seed"] == 11
    assert len(records) == 240
    assert META_RE.match((out / "lexicon.tsv").read_text().splitlines()[0])
    assert META_RE.match((out / "categories.csv").read_text().splitlines()[0])


def test_features_csv_schema(pipeline):
    _, seed, header, rows = read_csv(pipeline["features"] / "features.csv")
    assert seed == 11
    assert header[0] == "doc_id" and header[-1] == "flags"
    assert "sequentiality" in header and "past_rate" in header
    assert len(rows) == 240
    # every numeric cell parses back to a float
    for row in rows[:5]:
        for cell in row[1:-1]:
            float(cell)


def test_compare_finds_planted_directions(pipeline):
    _, _, header, rows = read_csv(pipeline["compare"] / "comparisons.csv")
    assert header == ["measure", "d", "direction", "p_adjusted", "p_raw", "t", "dof", "stars"]
    by_measure = {r[0]: r for r in rows}
    assert by_measure["past_rate"][2] == "story"
    assert by_measure["second"][2] == "non_story"
    assert float(by_measure["past_rate"][3]) < 0.01
    assert float(by_measure["second"][3]) < 0.01
    # sorted by descending |d|
    ds = [abs(float(r[1])) for r in rows]
    assert ds == sorted(ds, reverse=True)


def test_eval_reports_baseline_and_classifier(pipeline):
    _, _, header, rows = read_csv(pipeline["eval"] / "eval.csv")
    methods = {r[0]: r for r in rows}
    assert set(methods) == {"majority", "tfidf_linear"}
    i_f1 = header.index("f1_mean")
    assert float(methods["tfidf_linear"][i_f1]) > float(methods["majority"][i_f1])


def test_predictions_cover_corpus(pipeline):
    meta, records = read_jsonl(pipeline["predict"] / "predictions.jsonl")
    corpus = corpus_mod.load_corpus(pipeline["synth"] / "corpus.jsonl")
    assert {r["doc_id"] for r in records} == {d.id for d in corpus}
    for r in records[:10]:
        assert isinstance(r["story"], bool)
        assert isinstance(r["decision"], float)
        assert r["story"] == (r["decision"] > 0.0)


def test_analyze_rates_artifacts(pipeline):
    out = pipeline["rates"]
    _, _, header, rows = read_csv(out / "rates_by_community.csv")
    assert header == ["community", "n_texts", "story_rate", "bootstrap_mean", "bootstrap_sd"]
    assert len(rows) == 8
    _, _, cat_header, cat_rows = read_csv(out / "rates_by_category.csv")
    assert [r[0] for r in cat_rows] == ["advice", "hobbies", "life", "stories"]
    # the box-plot JSON records carry the samples the SVG draws
    meta, records = read_jsonl(out / "rates_boxplot.jsonl")
    assert [r["category"] for r in records] == ["advice", "hobbies", "life", "stories"]
    assert all(len(r["samples"]) == 20 for r in records)
    svg = (out / "rates_boxplot.svg").read_text(encoding="utf-8")
    assert svg.rstrip().endswith(f"<!-- config_hash={meta['config_hash']} seed=11 -->")
    assert "<svg" in svg


def test_analyze_corners_artifacts(pipeline):
    out = pipeline["corners"]
    _, _, _, prof_rows = read_csv(out / "profiles.csv")
    assert len(prof_rows) == 8
    _, _, header, corner_rows = read_csv(out / "corners.csv")
    assert header == ["corner", "rank", "community"]
    corners = {r[0] for r in corner_rows}
    assert corners == {
        "high_rate_high_distinct", "high_rate_low_distinct",
        "low_rate_high_distinct", "low_rate_low_distinct",
    }
    assert len(corner_rows) == 12  # 4 corners x top_k=3
    _, records = read_jsonl(out / "corners_scatter.jsonl")
    assert {r["community"] for r in records} <= {p[0] for p in map(tuple, prof_rows)}
    assert (out / "corners_scatter.svg").exists()


def test_analyze_ratio_artifacts(pipeline):
    out = pipeline["ratios"]
    _, _, _, rows = read_csv(out / "ratios.csv")
    assert len(rows) == 8
    _, _, header, summary = read_csv(out / "ratios_summary.csv")
    assert header == ["mean_ratio", "n_included", "aggregation"]
    assert summary[0][2] == "macro_over_communities"


def test_analyze_correlation_artifact(pipeline):
    _, _, header, rows = read_csv(pipeline["correlation"] / "correlation.csv")
    assert header == ["r", "p", "n_communities", "x", "y"]
    r = float(rows[0][0])
    assert -1.0 <= r <= 1.0
    assert rows[0][3] == "question_mark_rate"


def test_analyze_distinctiveness_artifact(pipeline):
    _, _, header, rows = read_csv(pipeline["distinctiveness"] / "distinctiveness.csv")
    assert header == ["community", "n_story_texts", "distinctiveness", "weighting", "flag"]
    assert all(r[3] == "frequency" for r in rows)


def test_agreement_cli_matches_library(pipeline):
    _, _, header, rows = read_csv(pipeline["agreement"] / "agreement.csv")
    assert header == ["label", "unit", "kappa", "observed_agreement", "expected_agreement", "n_docs"]
    row = rows[0]
    assert row[0] == "story" and row[1] == "document"
    corpus = corpus_mod.load_corpus(pipeline["synth"] / "corpus.jsonl")
    annotations = corpus_mod.load_annotations(pipeline["synth"] / "annotations.jsonl", corpus)
    expected = stats.span_kappa(
        annotations, unit="document", label="story", docs=corpus.docs,
        annotators=(synth.ANNOTATOR_A, synth.ANNOTATOR_B),
    )
    assert float(row[2]) == pytest.approx(expected.kappa, abs=1e-12)
    assert int(row[5]) == len(corpus)


def test_prompt_files_and_index(pipeline):
    out = pipeline["prompts"]
    _, _, header, rows = read_csv(out / "prompts_index.csv")
    assert header == ["doc_id", "file"]
    assert len(rows) == 240
    first = out / rows[0][1]
    text = first.read_text(encoding="utf-8")
    assert "story" in text and text.endswith("'story' or 'not story'.\n")
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert "prompts/00000.txt" in manifest["outputs"]


def test_run_manifest_contents(pipeline):
    manifest = json.loads((pipeline["corners"] / "run_manifest.json").read_text())
    assert manifest["command"] == "analyze"
    assert manifest["seed"] == 11
    assert manifest["outputs"] == sorted(manifest["outputs"])
    stamped_hash, _, _, _ = read_csv(pipeline["corners"] / "profiles.csv")
    assert manifest["config_hash"] == stamped_hash
    assert "out" not in manifest["config"]


# ---------------------------------------------------------------------------
# Determinism and the config hash
# ---------------------------------------------------------------------------


def rerun(pipeline, tmp_path, name, args):
    out1, out2 = tmp_path / f"{name}_1", tmp_path / f"{name}_2"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    return out1, out2


def test_feature_and_figure_outputs_are_byte_identical(pipeline, tmp_path):
    corpus = str(pipeline["synth"] / "corpus.jsonl")
    out1, out2 = rerun(
        pipeline, tmp_path, "feat",
        ["features", "--corpus", corpus, "--seed", "11"],
    )
    assert (out1 / "features.csv").read_bytes() == (out2 / "features.csv").read_bytes()

    predictions = str(pipeline["predict"] / "predictions.jsonl")
    out1, out2 = rerun(
        pipeline, tmp_path, "corners",
        ["analyze", "corners", "--corpus", corpus, "--predictions", predictions,
         "--seed", "11"],
    )
    for name in ("profiles.csv", "corners.csv", "corners_scatter.jsonl", "corners_scatter.svg"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_config_hash_tracks_semantics_not_locations(pipeline, tmp_path):
    corpus = str(pipeline["synth"] / "corpus.jsonl")
    base = ["features", "--corpus", corpus]
    out_a, out_b = rerun(pipeline, tmp_path, "hash_same", base + ["--seed", "11"])
    hash_a, _, _, _ = read_csv(out_a / "features.csv")
    hash_b, _, _, _ = read_csv(out_b / "features.csv")
    assert hash_a == hash_b  # different --out, same semantic config

    out_c = tmp_path / "hash_diff"
    assert main(base + ["--seed", "12", "--out", str(out_c)]) == 0
    hash_c, seed_c, _, _ = read_csv(out_c / "features.csv")
    assert seed_c == 12
    assert hash_c != hash_a


# ---------------------------------------------------------------------------
# Config file handling
# ---------------------------------------------------------------------------


def test_config_file_and_flag_precedence(pipeline, tmp_path):
    corpus = str(pipeline["synth"] / "corpus.jsonl")
    ini = tmp_path / "run.ini"
    ini.write_text(f"[storyscope]\nseed = 5\ncorpus = {corpus}\nsequentiality = false\n")

    out1 = tmp_path / "from_config"
    assert main(["features", "--config", str(ini), "--out", str(out1)]) == 0
    _, seed, _, _ = read_csv(out1 / "features.csv")
    assert seed == 5

    out2 = tmp_path / "flag_wins"
    assert main(["features", "--config", str(ini), "--seed", "7", "--out", str(out2)]) == 0
    _, seed, _, _ = read_csv(out2 / "features.csv")
    assert seed == 7


def test_config_file_errors(tmp_path, capsys):
    bad_key = tmp_path / "bad_key.ini"
    bad_key.write_text("[storyscope]\nturbo = on\n")
    assert main(["features", "--config", str(bad_key), "--out", str(tmp_path / "o")]) == 2
    assert "unknown config key" in capsys.readouterr().err

    bad_value = tmp_path / "bad_value.ini"
    bad_value.write_text("[storyscope]\nseed = soon\n")
    assert main(["features", "--config", str(bad_value), "--out", str(tmp_path / "o2")]) == 2

    no_section = tmp_path / "plain.ini"
    no_section.write_text("[other]\nseed = 1\n")
    assert main(["features", "--config", str(no_section), "--out", str(tmp_path / "o3")]) == 2

    assert main(["features", "--config", str(tmp_path / "ghost.ini"),
                 "--out", str(tmp_path / "o4")]) == 2


# ---------------------------------------------------------------------------
# Exit codes
# ---------------------------------------------------------------------------


def test_missing_required_input_is_a_config_error(tmp_path, capsys):
    assert main(["features", "--out", str(tmp_path / "out")]) == 2
    assert "--corpus" in capsys.readouterr().err
    assert main(["features", "--corpus", str(tmp_path / "nope.jsonl"),
                 "--out", str(tmp_path / "out")]) == 2


def test_runtime_failures_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a"}\n')  # missing required document fields
    assert main(["features", "--corpus", str(bad), "--out", str(tmp_path / "out")]) == 1
    assert "error" in capsys.readouterr().err.lower()

    foreign = tmp_path / "foreign.json"
    foreign.write_text('{"format": "other"}\n')
    corpus = tmp_path / "c.jsonl"
    doc = {"id": "a", "community": "c", "kind": "post", "text": "Hi there.",
           "summary": "Hi.", "category": "x"}
    corpus.write_text(json.dumps(doc) + "\n")
    assert main(["predict", "--corpus", str(corpus), "--model", str(foreign),
                 "--out", str(tmp_path / "out2")]) == 1


def test_prompts_few_shot_needs_shots(pipeline, tmp_path):
    corpus = str(pipeline["synth"] / "corpus.jsonl")
    assert main(["prompts", "--corpus", corpus, "--prompt-mode", "few_shot",
                 "--out", str(tmp_path / "p")]) == 1

    shots = tmp_path / "shots.jsonl"
    shots.write_text(
        "\n".join(
            json.dumps(x)
            for x in [
                {"text": "I fell down.", "label": "story"},
                {"text": "We got lost.", "label": True},
                {"text": "Check the box.", "label": "not story"},
                {"text": "Save early.", "label": False},
            ]
        )
        + "\n"
    )
    out = tmp_path / "p2"
    assert main(["prompts", "--corpus", corpus, "--prompt-mode", "few_shot",
                 "--shots", str(shots), "--out", str(out)]) == 0
    text = (out / "prompts" / "00000.txt").read_text()
    assert text.count("Answer: story") == 2
    assert text.count("Answer: not story") == 2


# ---------------------------------------------------------------------------
# Ingest and sample
# ---------------------------------------------------------------------------


def test_ingest_filters_excluded_categories(pipeline, tmp_path):
    out = tmp_path / "ingested"
    assert main([
        "ingest", "--corpus", str(pipeline["synth"] / "corpus.jsonl"),
        "--categories", str(pipeline["synth"] / "categories.csv"),
        "--excluded-categories", "advice", "--out", str(out),
    ]) == 0
    _, records = read_jsonl(out / "corpus.jsonl")
    communities = {r["community"] for r in records}
    assert "finance_tips" not in communities
    assert "gadget_help" not in communities
    assert "campfire_tales" in communities


def test_sample_is_deterministic_and_capped(pipeline, tmp_path):
    args = [
        "sample", "annotation",
        "--corpus", str(pipeline["synth"] / "corpus.jsonl"),
        "--categories", str(pipeline["synth"] / "categories.csv"),
        "--per-community", "10", "--min-tokens", "1", "--seed", "3",
    ]
    out1, out2 = rerun(pipeline, tmp_path, "sample", args)
    assert (out1 / "sample.jsonl").read_bytes() == (out2 / "sample.jsonl").read_bytes()
    _, records = read_jsonl(out1 / "sample.jsonl")
    per_comm = {}
    for r in records:
        per_comm[r["community"]] = per_comm.get(r["community"], 0) + 1
    assert all(n <= 10 for n in per_comm.values())
