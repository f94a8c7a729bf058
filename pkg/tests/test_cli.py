import json
import os

import pytest

from _synthetic import cue_lexicon, make_cue_corpus, make_embeddings, \
    make_position_corpus
from clausetag.cli import main, read_attention_tsv
from clausetag.corpus import load_corpus, write_corpus
from clausetag.crf import Lexicon
from clausetag.embeddings import write_embeddings
from clausetag.evaluation import read_metrics_csv, read_position_stats_csv
from clausetag.tagger import read_training_log


@pytest.fixture
def workdir(tmp_path):
    corpus = make_cue_corpus(n_paragraphs=8, min_clauses=3, max_clauses=5,
                             seed=21)
    corpus_path = tmp_path / "corpus.txt"
    write_corpus(corpus, corpus_path)
    table = make_embeddings(corpus, dim=8, seed=21)
    emb_path = tmp_path / "vectors.txt"
    write_embeddings(table, emb_path)
    lex_path = tmp_path / "lexicon.txt"
    Lexicon(cues=cue_lexicon()).save(lex_path)
    return tmp_path, str(corpus_path), str(emb_path), str(lex_path)


FAST = ["--epochs", "3", "--patience", "10", "--hidden", "6",
        "--proj-dim", "4", "--batch-size", "4", "--dropout", "0.2",
        "--val-fraction", "0.25"]


def train_args(out, corpus_path, emb_path, variant="recurrent", extra=()):
    return (["train", "--variant", variant, "--corpus", corpus_path,
             "--emb", emb_path, "--out", out, "--seed", "3"]
            + FAST + list(extra))


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def test_train_writes_model_log_and_config(workdir, capsys):
    tmp_path, corpus_path, emb_path, _ = workdir
    out = str(tmp_path / "run")
    assert main(train_args(out, corpus_path, emb_path)) == 0
    manifest = (tmp_path / "run" / "model" / "manifest").read_text()
    assert "variant: recurrent" in manifest
    assert "model_type: lstm_tagger" in manifest
    log = read_training_log(tmp_path / "run" / "train_log.csv")
    assert len(log) >= 1
    config = json.loads((tmp_path / "run" / "run_config.json").read_text())
    assert config["variant"] == "recurrent" and config["seed"] == 3
    assert "best validation accuracy" in capsys.readouterr().out


def test_train_variant_crf_routes_to_crf(workdir):
    tmp_path, corpus_path, _, lex_path = workdir
    out = str(tmp_path / "crfrun")
    args = ["train", "--variant", "crf", "--corpus", corpus_path,
            "--out", out, "--seed", "0", "--epochs", "5",
            "--lexicon", lex_path]
    assert main(args) == 0
    manifest = (tmp_path / "crfrun" / "model" / "manifest").read_text()
    assert "model_type: crf" in manifest
    assert (tmp_path / "crfrun" / "model" / "features.txt").exists()
    assert (tmp_path / "crfrun" / "model" / "lexicon.txt").exists()


def test_train_missing_embeddings_exits_2(workdir, capsys):
    tmp_path, corpus_path, _, _ = workdir
    missing = str(tmp_path / "nope.txt")
    code = main(["train", "--variant", "simple", "--corpus", corpus_path,
                 "--emb", missing, "--out", str(tmp_path / "x")])
    assert code == 2
    assert "nope.txt" in capsys.readouterr().err


def test_unknown_variant_exits_2(workdir):
    tmp_path, corpus_path, emb_path, _ = workdir
    with pytest.raises(SystemExit) as exc:
        main(["train", "--variant", "bogus", "--corpus", corpus_path,
              "--emb", emb_path, "--out", str(tmp_path / "x")])
    assert exc.value.code == 2


# ---------------------------------------------------------------------------
# tag
# ---------------------------------------------------------------------------

def crf_model_dir(workdir):
    tmp_path, corpus_path, _, lex_path = workdir
    out = str(tmp_path / "crf_train")
    if not os.path.exists(out):
        assert main(["train", "--variant", "crf", "--corpus", corpus_path,
                     "--out", out, "--seed", "0", "--epochs", "40",
                     "--patience", "40", "--alpha", "0.15",
                     "--lexicon", lex_path]) == 0
    return os.path.join(out, "model")


def test_tag_overfit_model_reproduces_gold(workdir):
    tmp_path, corpus_path, _, _ = workdir
    model = crf_model_dir(workdir)
    out = str(tmp_path / "tagged")
    assert main(["tag", "--model", model, "--corpus", corpus_path,
                 "--out", out]) == 0
    tagged = load_corpus(os.path.join(out, "tagged.txt"))
    gold = load_corpus(corpus_path)
    agree = total = 0
    for g, t in zip(gold, tagged):
        for gc, tc in zip(g.clauses, t.clauses):
            agree += int(gc.gold == tc.gold)
            total += 1
    assert agree / total >= 0.99


def test_tag_output_reparses_with_probability_column(workdir):
    tmp_path, corpus_path, _, _ = workdir
    model = crf_model_dir(workdir)
    out = str(tmp_path / "tagged_probs")
    assert main(["tag", "--model", model, "--corpus", corpus_path,
                 "--out", out, "--probs"]) == 0
    path = os.path.join(out, "tagged.txt")
    first_clause_line = [
        ln for ln in open(path, encoding="utf-8").read().splitlines()
        if ln and not ln.startswith("#")][0]
    assert len(first_clause_line.split("\t")) == 3
    tagged = load_corpus(path)  # third column ignored on read
    assert all(cl.gold is not None for p in tagged for cl in p.clauses)


def test_tag_empty_input_writes_empty_output(workdir):
    tmp_path, _, _, _ = workdir
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    model = crf_model_dir(workdir)
    out = str(tmp_path / "tagged_empty")
    assert main(["tag", "--model", model, "--corpus", str(empty),
                 "--out", out]) == 0
    assert (tmp_path / "tagged_empty" / "tagged.txt").read_text() == ""


def test_tag_with_bad_model_dir_exits_2(workdir):
    tmp_path, corpus_path, _, _ = workdir
    code = main(["tag", "--model", str(tmp_path / "nomodel"),
                 "--corpus", corpus_path, "--out", str(tmp_path / "t")])
    assert code == 2


def test_corrupt_model_weights_exit_3(workdir):
    tmp_path, corpus_path, _, _ = workdir
    model = crf_model_dir(workdir)
    import shutil
    broken = str(tmp_path / "broken_model")
    shutil.copytree(model, broken)
    with open(os.path.join(broken, "weights"), "r+b") as fh:
        fh.truncate(8)
    code = main(["tag", "--model", broken, "--corpus", corpus_path,
                 "--out", str(tmp_path / "t2")])
    assert code == 3


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def test_eval_identical_gold_pred_prints_accuracy_one(workdir, capsys):
    tmp_path, corpus_path, _, _ = workdir
    out = str(tmp_path / "eval")
    assert main(["eval", "--corpus", corpus_path, "--pred", corpus_path,
                 "--out", out]) == 0
    assert "accuracy    1.0000" in capsys.readouterr().out
    report = read_metrics_csv(os.path.join(out, "metrics.csv"))
    assert report.accuracy == 1.0


def test_eval_with_model(workdir):
    tmp_path, corpus_path, _, _ = workdir
    model = crf_model_dir(workdir)
    out = str(tmp_path / "evalm")
    assert main(["eval", "--corpus", corpus_path, "--model", model,
                 "--out", out]) == 0
    report = read_metrics_csv(os.path.join(out, "metrics.csv"))
    assert report.accuracy >= 0.99


def test_eval_without_pred_or_model_exits_2(workdir):
    tmp_path, corpus_path, _, _ = workdir
    assert main(["eval", "--corpus", corpus_path,
                 "--out", str(tmp_path / "e2")]) == 2


@pytest.mark.filterwarnings("ignore:overflow")
def test_training_divergence_exits_3(workdir, capsys):
    tmp_path, corpus_path, _, _ = workdir
    code = main(["train", "--variant", "crf", "--corpus", corpus_path,
                 "--out", str(tmp_path / "div"), "--alpha", "1e160",
                 "--epochs", "4", "--seed", "0"])
    assert code == 3
    assert "epoch" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# cv
# ---------------------------------------------------------------------------

def test_cv_deterministic_across_runs(workdir):
    tmp_path, corpus_path, emb_path, _ = workdir
    outs = []
    for name in ("cv1", "cv2"):
        out = str(tmp_path / name)
        args = (["cv", "--variant", "none", "--corpus", corpus_path,
                 "--emb", emb_path, "--out", out, "--k", "2",
                 "--seed", "7"] + FAST)
        assert main(args) == 0
        outs.append(out)
    for fname in ("fold_0.csv", "fold_1.csv", "pooled.csv",
                  "predictions.txt"):
        a = open(os.path.join(outs[0], fname)).read()
        b = open(os.path.join(outs[1], fname)).read()
        assert a == b, fname
    preds = load_corpus(os.path.join(outs[0], "predictions.txt"))
    assert all(cl.gold is not None for p in preds for cl in p.clauses)


def test_cv_simple_variant_smoke(workdir):
    tmp_path, corpus_path, emb_path, _ = workdir
    out = str(tmp_path / "cv_simple")
    args = (["cv", "--variant", "simple", "--corpus", corpus_path,
             "--emb", emb_path, "--out", out, "--k", "2", "--seed", "1"]
            + FAST)
    assert main(args) == 0
    assert read_metrics_csv(os.path.join(out, "pooled.csv")).total > 0


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

@pytest.fixture
def attention_setup(tmp_path, overfit_run):
    est, corpus, table, _ = overfit_run
    # append a paragraph holding a single-word clause (attention exports
    # work on unlabeled input; the model's vocabulary covers the cue)
    from clausetag.corpus import Clause, Paragraph
    export_corpus = list(corpus) + [
        Paragraph(id="single", clauses=[Clause.from_text("suggesting")])]
    corpus_path = tmp_path / "corpus.txt"
    write_corpus(export_corpus, corpus_path)
    emb_path = tmp_path / "vectors.txt"
    write_embeddings(table, emb_path)
    model_dir = str(tmp_path / "model")
    est.save(model_dir)
    return tmp_path, corpus, str(corpus_path), str(emb_path), model_dir


def test_attention_export_tsv_and_html(attention_setup):
    tmp_path, corpus, corpus_path, emb_path, model = attention_setup
    out = str(tmp_path / "att")
    assert main(["attention", "--model", model, "--corpus", corpus_path,
                 "--emb", emb_path, "--out", out]) == 0
    rows = read_attention_tsv(os.path.join(out, "attention.tsv"))
    assert rows
    for (pid, ci), (label, tokens, weights) in rows.items():
        assert abs(sum(weights) - 1.0) < 1e-6
        if len(tokens) == 1:
            assert weights[0] == 1.0
    assert ("single", 0) in rows
    # the trained model concentrates attention on the cue tokens
    from _synthetic import CUES
    focused = total = 0
    by_id = {p.id: p for p in corpus}
    for (pid, ci), (label, tokens, weights) in rows.items():
        if pid not in by_id:
            continue
        cue = CUES[by_id[pid].clauses[ci].gold]
        mean = sum(weights) / len(weights)
        focused += int(weights[tokens.index(cue)] >= 2.0 * mean)
        total += 1
    assert total > 0 and focused / total >= 0.90
    html = open(os.path.join(out, "attention.html")).read()
    assert "<html" in html and "suggesting" in html


def test_attention_refuses_variant_none(workdir):
    tmp_path, corpus_path, emb_path, _ = workdir
    out = str(tmp_path / "none_run")
    assert main(train_args(out, corpus_path, emb_path,
                           variant="none")) == 0
    code = main(["attention", "--model", os.path.join(out, "model"),
                 "--corpus", corpus_path, "--emb", emb_path,
                 "--out", str(tmp_path / "att2")])
    assert code == 2


def test_attention_refuses_crf_model(workdir):
    tmp_path, corpus_path, emb_path, _ = workdir
    model = crf_model_dir(workdir)
    code = main(["attention", "--model", model, "--corpus", corpus_path,
                 "--emb", emb_path, "--out", str(tmp_path / "att3")])
    assert code == 2


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------

def test_stats_header_and_normalization(tmp_path, capsys):
    corpus = make_position_corpus(n_paragraphs=10, seed=5)
    corpus_path = tmp_path / "pos.txt"
    write_corpus(corpus, corpus_path)
    out = str(tmp_path / "stats")
    assert main(["stats", "--corpus", str(corpus_path), "--out", out]) == 0
    path = os.path.join(out, "position_stats.csv")
    header = open(path).read().splitlines()[0]
    assert header.split(",")[1:] == [f"bucket_{i}" for i in range(1, 6)]
    stats = read_position_stats_csv(path)
    from clausetag.corpus import LABELS
    goal = stats[LABELS.index("goal")]
    implication = stats[LABELS.index("implication")]
    assert goal[0] > 0.9
    assert implication[4] > 0.9
    for row in stats:
        if row.sum() > 0:
            assert abs(row.sum() - 1.0) < 1e-12
