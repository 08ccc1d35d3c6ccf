import json
import math
import os
from pathlib import Path

import pytest

import valence

ROOT = Path(os.environ.get("VALENCE_SOURCE_DIR", Path(__file__).resolve().parents[2]))
TERMS = ROOT / "data" / "lexicon" / "terms.tsv"
RATINGS = ROOT / "data" / "lexicon" / "ratings.tsv"


def test_agreement():
    assert valence.gwet_ac([[2, 0], [0, 2], [1, 1], [1, 1]]) == 0.0
    assert valence.percent_agreement([[2, 0], [0, 2], [1, 1], [1, 1]]) == pytest.approx(0.5)
    assert valence.gwet_ac([[3, 1, 0], [0, 2, 2]], "linear") <= 1.0
    with pytest.raises(valence.DomainError):
        valence.gwet_ac([[1, 0], [0, 1]])
    with pytest.raises(valence.ValidationError):
        valence.gwet_ac([[2, 0]], "cubic")


def test_verbalize_matches_softmax():
    p = valence.verbalize({"negative": 2.0, "positive": 0.0, "neutral": 0.0})
    z = math.exp(2) + 2
    assert p["stigmatizing"] == pytest.approx(math.exp(2) / z, abs=1e-12)
    assert sum(p.values()) == pytest.approx(1.0)
    with pytest.raises(valence.DomainError):
        valence.verbalize({"negative": 1.0})


def test_render_and_generation():
    assert valence.render("pt calm", "calm", "cloze_primed") == "pt calm Keyword is: calm. This sentence is: [MASK]"
    assert valence.render("pt calm") == "pt calm This sentence is: [MASK]"
    assert valence.postprocess_generation("Answer: Neutral") == "neutral"
    assert valence.postprocess_generation("no idea") == "unparseable"


def test_metrics_and_evaluate():
    gold = ["stigmatizing", "stigmatizing", "privileging", "neutral"]
    pred = ["stigmatizing", "privileging", "privileging", "neutral"]
    assert valence.macro_metrics(gold, pred)["macro_f1"] == pytest.approx(7 / 9)
    # Large enough that every resample contains all three classes.
    report = valence.evaluate(gold * 25, gold * 25, replicates=200, seed=3)
    assert report["bootstrap"]["macro_f1"]["ci_low"] == 1.0
    a = valence.evaluate(gold, pred, replicates=200, seed=3, threads=1)
    b = valence.evaluate(gold, pred, replicates=200, seed=3, threads=4)
    assert a == b
    assert valence.relative_drop(0.9572, 0.5358) == pytest.approx(0.4402, abs=1e-4)
    assert valence.relative_drop(0.0, 0.5) is None


def test_lexicon_and_extraction():
    scored = valence.score_lexicon(str(TERMS), str(RATINGS))
    assert scored and all("term_id" in s for s in scored)
    corpus = valence.synth(str(TERMS), n_notes=25, seed=1)
    assert len(corpus["notes"]) == 25
    chunks = valence.extract(corpus["notes"], str(TERMS))
    assert len(chunks) == 25
    for c in chunks:
        assert c["window_text"]
    assert valence.split_sizes(300) == (180, 60, 60)


def test_baseline_round_trip():
    prompts = ["hostile rude", "kind lovely", "routine visit"] * 10
    labels = ["stigmatizing", "privileging", "neutral"] * 10
    model = valence.train_baseline(prompts, labels, dim=256, max_epochs=30)
    assert model.predict("hostile rude") == "stigmatizing"
    assert sum(model.predict_proba("kind").values()) == pytest.approx(1.0)
    assert valence.BaselineModel.from_json(model.to_json()) == model
    with pytest.raises(valence.ValidationError):
        valence.train_baseline(prompts, ["bogus"] * len(prompts))


def test_pipeline(tmp_path):
    config = {
        "out_dir": str(tmp_path / "run"),
        "lexicon_terms": str(TERMS),
        "lexicon_ratings": str(RATINGS),
        "synth": {"n_notes": 60},
        "bootstrap_replicates": 50,
    }
    manifest = valence.run_pipeline(config)
    assert [s["stage"] for s in manifest["stages"]] == list(valence.PIPELINE_STAGES)
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert "valence_shift" in report
    with pytest.raises(valence.DependencyError):
        valence.run_pipeline({**config, "out_dir": str(tmp_path / "empty")}, ["eval"])
