import json

import numpy as np
import pytest

from apialign import cli
from apialign.alignment import read_pairs
from apialign.checkpoint import load_checkpoint
from apialign.corpus import Language, load_corpus
from apialign.model import embed_corpus, evaluate_loss
from apialign.phrases import read_rules

SMALL_CFG = """
[synth]
specs = demo
seed = 11
n_per_concept = 3
noise = 0.05

[model]
epochs = 2
embedding_dim = 8
hidden_units = 8
batch_size = 8
seed = 1

[align]
direction = both
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_CFG)
    return str(path)


@pytest.fixture
def synth_corpus(tmp_path, cfg_file):
    out = tmp_path / "corpus.tsv"
    assert cli.main(["synth", "--config", cfg_file, "--out", str(out)]) == 0
    return out


@pytest.fixture
def trained(tmp_path, cfg_file, synth_corpus):
    ckpt = tmp_path / "model.ckpt"
    assert cli.main(["train", "--config", cfg_file, "--corpus", str(synth_corpus),
                     "--checkpoint", str(ckpt)]) == 0
    return ckpt


def test_synth_is_reproducible(tmp_path, cfg_file, capsys):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    assert cli.main(["synth", "--config", cfg_file, "--out", str(a)]) == 0
    assert cli.main(["synth", "--config", cfg_file, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.truth.tsv").read_bytes() == (tmp_path / "b.truth.tsv").read_bytes()
    assert (tmp_path / "a.mappings.tsv").is_file() and (tmp_path / "a.migrations.tsv").is_file()
    assert "wrote 120 records (60 source, 60 target)" in capsys.readouterr().out


def test_synth_seed_override_changes_output(tmp_path, cfg_file):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    cli.main(["synth", "--config", cfg_file, "--out", str(a)])
    cli.main(["synth", "--config", cfg_file, "--seed", "12", "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()


def test_missing_specs_file(tmp_path, capsys):
    code = cli.main(["synth", "--specs", str(tmp_path / "nope.json"), "--out", str(tmp_path / "c.tsv")])
    assert code == 2
    assert "not found" in capsys.readouterr().err
    assert not (tmp_path / "c.tsv").exists()


def test_json_specs_file(tmp_path):
    specs = tmp_path / "specs.json"
    specs.write_text(json.dumps({"concepts": [
        {"id": "c1", "source": ["A.x", "A.y"], "target": ["X.a", "X.b"],
         "paraphrases": {"SOURCE": ["do a", "make a"], "TARGET": ["do a", "run a"]}},
        {"id": "c2", "source": ["B.x"], "target": ["Y.a"],
         "paraphrases": {"SOURCE": ["do b", "make b"], "TARGET": ["do b", "run b"]}}]}))
    out = tmp_path / "c.tsv"
    assert cli.main(["synth", "--specs", str(specs), "--out", str(out)]) == 0
    corpus = load_corpus(out)
    assert corpus.count(Language.SOURCE) == 2 * 50
    specs.write_text(json.dumps({"concepts": [{"source": ["A.x"]}]}))
    assert cli.main(["synth", "--specs", str(specs), "--out", str(out)]) == 2


def test_unknown_config_key(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[mine]\nthreshhold = 0.5\n")
    assert cli.main(["synth", "--config", str(bad), "--out", str(tmp_path / "c.tsv")]) == 2
    bad.write_text("[mystery]\nx = 1\n")
    assert cli.main(["synth", "--config", str(bad), "--out", str(tmp_path / "c.tsv")]) == 2
    bad.write_text("[model]\nhidden_units = many\n")
    assert cli.main(["synth", "--config", str(bad), "--out", str(tmp_path / "c.tsv")]) == 2
    assert not (tmp_path / "c.tsv").exists()


def test_bundled_demo_config_loads():
    cfg = cli.load_config("demo")
    assert (cfg.n_per_concept, cfg.epochs, cfg.model.hidden_units, cfg.direction) == (50, 15, 64, "both")
    cfg.validate()


def test_train_epochs_zero_writes_initial_model(tmp_path, cfg_file, synth_corpus):
    ckpt = tmp_path / "m0.ckpt"
    assert cli.main(["train", "--config", cfg_file, "--corpus", str(synth_corpus), "--checkpoint", str(ckpt),
                     "--epochs", "0"]) == 0
    model = load_checkpoint(ckpt)
    assert model.epochs_trained == 0 and model.history == []


def test_train_then_resume_continues_log(tmp_path, cfg_file, synth_corpus):
    straight_log, part_log = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    common = ["--config", cfg_file, "--corpus", str(synth_corpus), "--no-timestamps"]
    assert cli.main(["train", *common, "--checkpoint", str(tmp_path / "a.ckpt"), "--log", str(straight_log),
                     "--epochs", "3"]) == 0
    assert cli.main(["train", *common, "--checkpoint", str(tmp_path / "b.ckpt"), "--log", str(part_log),
                     "--epochs", "1"]) == 0
    assert cli.main(["train", *common, "--checkpoint", str(tmp_path / "b.ckpt"), "--log", str(part_log),
                     "--epochs", "3", "--resume"]) == 0
    a = [json.loads(x) for x in straight_log.read_text().splitlines()]
    b = [json.loads(x) for x in part_log.read_text().splitlines()]
    assert [r["epoch"] for r in b] == [1, 2, 3]
    for x, y in zip(a, b):
        assert abs(x["mean_loss"] - y["mean_loss"]) <= 1e-9
    assert straight_log.read_bytes() == part_log.read_bytes()


def test_trained_loss_below_initial(trained, synth_corpus):
    model = load_checkpoint(trained)
    corpus = load_corpus(synth_corpus)
    history = model.history
    assert history[-1]["mean_loss"] < history[0]["mean_loss"]
    assert evaluate_loss(model, corpus) < history[0]["token_loss"]


def test_train_single_language_corpus(tmp_path, cfg_file, synth_corpus, capsys):
    one = tmp_path / "one.tsv"
    one.write_text("".join(line for line in synth_corpus.read_text().splitlines(keepends=True)
                           if "\tSOURCE\t" in line))
    code = cli.main(["train", "--config", cfg_file, "--corpus", str(one), "--checkpoint", str(tmp_path / "x.ckpt")])
    assert code == 3
    assert "TARGET" in capsys.readouterr().err
    assert not (tmp_path / "x.ckpt").exists()


def test_align_mutual_matches_oracle(tmp_path, cfg_file, synth_corpus, trained):
    out = tmp_path / "pairs.tsv"
    assert cli.main(["align", "--config", cfg_file, "--corpus", str(synth_corpus), "--checkpoint", str(trained),
                     "--out", str(out), "--direction", "both", "--mutual"]) == 0
    got = {(p.source_id, p.target_id) for p in read_pairs(out)}
    model, corpus = load_checkpoint(trained), load_corpus(synth_corpus)
    vecs = embed_corpus(model, corpus)
    src = [v for v in vecs if v.language is Language.SOURCE]
    tgt = [v for v in vecs if v.language is Language.TARGET]

    def nn(q, side):
        mat = np.stack([v.values for v in side])
        sims = mat @ q.values / (np.linalg.norm(mat, axis=1) * np.linalg.norm(q.values))
        best = sims.max()
        return min(v.record_id for v, s in zip(side, sims) if s >= best - 1e-12)

    s2t = {v.record_id: nn(v, tgt) for v in src}
    t2s = {v.record_id: nn(v, src) for v in tgt}
    want = {(s, t) for s, t in s2t.items() if t2s[t] == s}
    assert got == want and got


def test_align_then_mine_then_eval(tmp_path, cfg_file, synth_corpus, trained, capsys):
    pairs, rules, report = tmp_path / "pairs.tsv", tmp_path / "rules.tsv", tmp_path / "report.txt"
    truth = tmp_path / "corpus.truth.tsv"
    assert cli.main(["align", "--config", cfg_file, "--corpus", str(synth_corpus), "--checkpoint", str(trained),
                     "--out", str(pairs), "--truth", str(truth)]) == 0
    assert len(read_pairs(pairs)) == 120
    assert cli.main(["mine", "--config", cfg_file, "--corpus", str(synth_corpus), "--pairs", str(pairs),
                     "--out", str(rules)]) == 0
    assert all(r.probability > 0.5 for r in read_rules(rules))
    assert cli.main(["eval", "--config", cfg_file, "--no-timestamps", "--rules", str(rules),
                     "--ground-truth", str(tmp_path / "corpus.mappings.tsv"),
                     "--migrations", str(tmp_path / "corpus.migrations.tsv"), "--pairs", str(pairs),
                     "--truth", str(truth), "--corpus", str(synth_corpus), "--report", str(report)]) == 0
    text = report.read_text()
    for needle in ("[alignment accuracy (%)]", "[mapping rules by source phrase length]",
                   "precision / recall / F", "EDR", "cost model: levenshtein", "exact match"):
        assert needle in text
    assert "generated" not in text


def test_mine_threshold_validation(tmp_path, cfg_file, synth_corpus, capsys):
    pairs = tmp_path / "pairs.tsv"
    pairs.write_text("s1\tt1\t0.5\n")
    code = cli.main(["mine", "--config", cfg_file, "--corpus", str(synth_corpus), "--pairs", str(pairs),
                     "--out", str(tmp_path / "rules.tsv"), "--threshold", "1.5"])
    assert code == 2
    assert "threshold" in capsys.readouterr().err
    assert not (tmp_path / "rules.tsv").exists()


def test_mine_unknown_record_is_data_error(tmp_path, cfg_file, synth_corpus, capsys):
    pairs = tmp_path / "pairs.tsv"
    pairs.write_text("nosuch\tnosuch2\t0.5\n")
    code = cli.main(["mine", "--config", cfg_file, "--corpus", str(synth_corpus), "--pairs", str(pairs),
                     "--out", str(tmp_path / "rules.tsv")])
    assert code == 3
    assert capsys.readouterr().err.startswith("error: mine: ")


def test_pipeline_outputs(tmp_path, cfg_file, capsys):
    out = tmp_path / "run"
    assert cli.main(["pipeline", "--config", cfg_file, "--out-dir", str(out), "--no-timestamps"]) == 0
    for name in cli.OUTPUT_FILES.values():
        assert (out / name).is_file(), name
    text = (out / "report.txt").read_text()
    assert "align.neural.s2t=" in text and "rules.total=" in text and "score.method.all.f=" in text


def test_pipeline_validation_precedes_writes(tmp_path, cfg_file):
    out = tmp_path / "run"
    code = cli.main(["pipeline", "--config", cfg_file, "--out-dir", str(out), "--threshold", "1.0"])
    assert code == 2
    assert not out.exists()
