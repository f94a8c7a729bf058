"""Command-line interface.

Subcommands: train, tag, eval, cv, attention, stats. Every run writes its
fully-resolved configuration to <out>/run_config.json so results are
self-describing. Exit codes: 0 success, 2 usage/config errors, 3
runtime/model errors.
"""

from __future__ import annotations

import argparse
import html as html_mod
import json
import os
import sys

import numpy as np

from .corpus import load_corpus, write_corpus
from .crf import CrfDiscourseTagger
from .embeddings import load_embeddings
from .errors import (CapacityError, ClauseTagError, ConfigError, DataError,
                     DegenerateInputError, DimensionError, DivergenceError,
                     ModelLoadError, NumericError, ParseError)
from .evaluation import (cross_validate, format_metrics_text, position_stats,
                         score_paragraphs, write_metrics_csv,
                         write_position_stats_csv)
from .tagger import LstmDiscourseTagger, write_training_log

USAGE_ERRORS = (ParseError, ConfigError, DataError, CapacityError,
                DimensionError, DegenerateInputError, FileNotFoundError,
                IsADirectoryError, NotADirectoryError)
RUNTIME_ERRORS = (ModelLoadError, DivergenceError, NumericError)

VARIANTS = ("none", "simple", "recurrent", "crf")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clausetag",
        description="Label each clause of an experiment-narrative paragraph "
                    "with its discourse type.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, emb=True, seed=True):
        p.add_argument("--corpus", required=True, help="corpus file")
        p.add_argument("--out", required=True, help="output directory")
        if emb:
            p.add_argument("--emb", help="word-vector file (text format)")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    def add_train_flags(p):
        p.add_argument("--variant", choices=VARIANTS, default="recurrent")
        p.add_argument("--epochs", type=int, default=100)
        p.add_argument("--patience", type=int, default=5)
        p.add_argument("--dropout", type=float, default=0.5)
        p.add_argument("--alpha", type=float, default=None,
                       help="ADAM step size (default 0.001 LSTM, 0.1 CRF)")
        p.add_argument("--batch-size", type=int, default=10)
        p.add_argument("--hidden", type=int, default=50)
        p.add_argument("--proj-dim", type=int, default=50)
        p.add_argument("--val-fraction", type=float, default=0.1)
        p.add_argument("--l2", type=float, default=1e-4)
        p.add_argument("--lexicon", help="lexicon file for the CRF")

    p_train = sub.add_parser("train", help="train a tagger")
    add_common(p_train)
    add_train_flags(p_train)

    p_tag = sub.add_parser("tag", help="label a corpus with a trained model")
    add_common(p_tag)
    p_tag.add_argument("--model", required=True, help="model directory")
    p_tag.add_argument("--probs", action="store_true",
                       help="add a per-clause probability column")

    p_eval = sub.add_parser("eval", help="score predictions against gold")
    add_common(p_eval)
    p_eval.add_argument("--pred", help="predicted corpus file")
    p_eval.add_argument("--model", help="model directory to tag with")

    p_cv = sub.add_parser("cv", help="k-fold cross-validation")
    add_common(p_cv)
    add_train_flags(p_cv)
    p_cv.add_argument("--k", type=int, default=5)

    p_att = sub.add_parser("attention",
                           help="export attention heatmaps (TSV + HTML)")
    add_common(p_att)
    p_att.add_argument("--model", required=True, help="model directory")

    p_stats = sub.add_parser("stats",
                             help="label-by-position statistics CSV")
    add_common(p_stats, emb=False, seed=False)
    return parser


def _write_run_config(out_dir: str, args: argparse.Namespace) -> None:
    os.makedirs(out_dir, exist_ok=True)
    resolved = {k: v for k, v in sorted(vars(args).items())}
    with open(os.path.join(out_dir, "run_config.json"), "w",
              encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require_file(path: str | None, what: str) -> str:
    if not path:
        raise ConfigError(f"missing required {what}")
    if not os.path.exists(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _build_estimator(args) -> CrfDiscourseTagger | LstmDiscourseTagger:
    if args.variant == "crf":
        lexicon = None
        if args.lexicon:
            lexicon = _require_file(args.lexicon, "lexicon file")
        return CrfDiscourseTagger(
            lexicon=lexicon, l2=args.l2,
            learning_rate=args.alpha if args.alpha is not None else 0.1,
            max_epochs=args.epochs, patience=args.patience,
            batch_size=args.batch_size,
            validation_fraction=args.val_fraction, seed=args.seed)
    emb_path = _require_file(args.emb, "embeddings file (--emb)")
    return LstmDiscourseTagger(
        embeddings=load_embeddings(emb_path), variant=args.variant,
        projection_dim=args.proj_dim, hidden_size=args.hidden,
        max_epochs=args.epochs, patience=args.patience,
        dropout_p=args.dropout,
        learning_rate=args.alpha if args.alpha is not None else 0.001,
        batch_size=args.batch_size,
        validation_fraction=args.val_fraction, seed=args.seed)


def _model_type(model_dir: str) -> str:
    manifest = os.path.join(model_dir, "manifest")
    if not os.path.exists(manifest):
        raise ConfigError(f"not a model directory: {model_dir}")
    with open(manifest, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("model_type: "):
                return line.split(": ", 1)[1].strip()
    raise ModelLoadError(f"{model_dir}/manifest declares no model_type")


def _load_model(model_dir: str, emb_path: str | None):
    kind = _model_type(model_dir)
    if kind == "crf":
        return CrfDiscourseTagger.load(model_dir)
    table = load_embeddings(_require_file(
        emb_path, "embeddings file (--emb, required for LSTM models)"))
    return LstmDiscourseTagger.load(model_dir, embeddings=table)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    corpus = load_corpus(_require_file(args.corpus, "corpus file"))
    if not corpus:
        raise DataError(f"corpus {args.corpus} holds no paragraphs")
    est = _build_estimator(args)
    est.fit(corpus)
    model_dir = os.path.join(args.out, "model")
    est.save(model_dir)
    _write_run_config(args.out, args)
    write_training_log(est.history_, os.path.join(args.out, "train_log.csv"))
    best = max((h.val_accuracy for h in est.history_), default=float("nan"))
    print(f"trained variant={args.variant} on {len(corpus)} paragraphs; "
          f"best validation accuracy {best:.4f}")
    print(f"model written to {model_dir}")
    return 0


def cmd_tag(args) -> int:
    corpus = load_corpus(_require_file(args.corpus, "corpus file"))
    _write_run_config(args.out, args)
    out_path = os.path.join(args.out, "tagged.txt")
    if not corpus:
        open(out_path, "w", encoding="utf-8").close()
        print(f"empty corpus; wrote {out_path}")
        return 0
    est = _load_model(args.model, args.emb)
    preds = est.predict(corpus)
    probabilities = None
    if args.probs:
        if isinstance(est, LstmDiscourseTagger):
            dists = est.predict_proba(corpus)
        else:
            dists = est.predict_marginals(corpus)
        probabilities = {
            p.id: [float(row.max()) for row in dist]
            for p, dist in zip(corpus, dists)}
    tagged = []
    for p, labels in zip(corpus, preds):
        clauses = [type(cl)(tokens=cl.tokens, gold=lab, raw_text=cl.raw_text)
                   for cl, lab in zip(p.clauses, labels)]
        tagged.append(type(p)(id=p.id, clauses=clauses))
    write_corpus(tagged, out_path, probabilities=probabilities)
    print(f"tagged {len(corpus)} paragraphs -> {out_path}")
    return 0


def cmd_eval(args) -> int:
    gold = load_corpus(_require_file(args.corpus, "gold corpus"))
    if args.pred:
        pred_corpus = load_corpus(_require_file(args.pred, "prediction file"))
        by_id = {p.id: p for p in pred_corpus}
        missing = [p.id for p in gold if p.id not in by_id]
        if missing:
            raise DataError(
                f"predictions missing paragraphs: {', '.join(missing[:5])}")
        preds = []
        for p in gold:
            labels = [cl.gold for cl in by_id[p.id].clauses]
            if any(lb is None for lb in labels):
                raise DataError(f"prediction {p.id!r} has unlabeled clauses")
            preds.append(labels)
    elif args.model:
        est = _load_model(args.model, args.emb)
        preds = est.predict(gold)
    else:
        raise ConfigError("eval needs --pred or --model")
    report = score_paragraphs(gold, preds)
    _write_run_config(args.out, args)
    write_metrics_csv(report, os.path.join(args.out, "metrics.csv"))
    text = format_metrics_text(report)
    with open(os.path.join(args.out, "metrics.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    return 0


def cmd_cv(args) -> int:
    corpus = load_corpus(_require_file(args.corpus, "corpus file"))
    est = _build_estimator(args)
    result = cross_validate(corpus, est, k=args.k, seed=args.seed,
                            validation_fraction=args.val_fraction)
    _write_run_config(args.out, args)
    for i, report in enumerate(result.fold_reports):
        write_metrics_csv(report, os.path.join(args.out, f"fold_{i}.csv"))
    write_metrics_csv(result.pooled, os.path.join(args.out, "pooled.csv"))
    pred_corpus = []
    for p in corpus:
        clauses = [type(cl)(tokens=cl.tokens,
                            gold=result.predictions[p.id][j],
                            raw_text=cl.raw_text)
                   for j, cl in enumerate(p.clauses)]
        pred_corpus.append(type(p)(id=p.id, clauses=clauses))
    write_corpus(pred_corpus, os.path.join(args.out, "predictions.txt"))
    lines = [format_metrics_text(r, title=f"fold {i}")
             for i, r in enumerate(result.fold_reports)]
    lines.append(format_metrics_text(result.pooled, title="pooled"))
    mean_acc = float(np.mean([r.accuracy for r in result.fold_reports]))
    mean_f1 = float(np.mean([r.weighted_f1 for r in result.fold_reports]))
    lines.append(f"fold-mean accuracy {mean_acc:.4f}, "
                 f"fold-mean weighted f1 {mean_f1:.4f}")
    text = "\n\n".join(lines)
    with open(os.path.join(args.out, "report.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    return 0


def write_attention_tsv(rows, path) -> None:
    """rows: (paragraph_id, clause_index, label, tokens, weights)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("paragraph\tclause\tlabel\ttoken_index\ttoken\tweight\n")
        for pid, ci, label, tokens, weights in rows:
            for ti, (tok, wgt) in enumerate(zip(tokens, weights)):
                fh.write(f"{pid}\t{ci}\t{label}\t{ti}\t{tok}\t{wgt!r}\n")


def read_attention_tsv(path):
    """Parse back into {(paragraph, clause): (label, tokens, weights)}."""
    rows: dict[tuple[str, int], tuple[str, list[str], list[float]]] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[:3] != ["paragraph", "clause", "label"]:
            raise ParseError("not an attention TSV", path=path, line=1)
        for line_no, raw in enumerate(fh, start=2):
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != 6:
                raise ParseError("expected 6 columns", path=path,
                                 line=line_no)
            pid, ci, label, _, tok, wgt = parts
            key = (pid, int(ci))
            entry = rows.setdefault(key, (label, [], []))
            entry[1].append(tok)
            entry[2].append(float(wgt))
    return rows


def attention_html(rows) -> str:
    """Standalone page: tokens shaded by their attention weight."""
    parts = [
        "<!doctype html>",
        "<html><head><meta charset='utf-8'><title>attention weights"
        "</title>",
        "<style>body{font-family:sans-serif;max-width:60em;margin:2em auto}"
        ".clause{margin:.4em 0;line-height:1.9}"
        ".label{display:inline-block;min-width:7em;color:#555;"
        "font-size:.85em}"
        ".tok{padding:.15em .25em;border-radius:.2em}</style></head><body>",
        "<h1>attention weights</h1>",
    ]
    current_pid = None
    for pid, ci, label, tokens, weights in rows:
        if pid != current_pid:
            parts.append(f"<h3>paragraph {html_mod.escape(pid)}</h3>")
            current_pid = pid
        top = max(weights) if len(weights) else 1.0
        spans = []
        for tok, wgt in zip(tokens, weights):
            shade = wgt / top if top > 0 else 0.0
            spans.append(
                f"<span class='tok' title='{wgt:.4f}' "
                f"style='background:rgba(255,120,0,{shade:.3f})'>"
                f"{html_mod.escape(tok)}</span>")
        parts.append(f"<div class='clause'><span class='label'>"
                     f"[{html_mod.escape(label)}]</span> "
                     + " ".join(spans) + "</div>")
    parts.append("</body></html>")
    return "\n".join(parts)


def cmd_attention(args) -> int:
    corpus = load_corpus(_require_file(args.corpus, "corpus file"))
    if not corpus:
        raise DataError(f"corpus {args.corpus} holds no paragraphs")
    kind = _model_type(args.model)
    if kind != "lstm_tagger":
        raise ConfigError(
            f"model type {kind!r} has no attention weights to export")
    est = _load_model(args.model, args.emb)
    if est.variant == "none":
        raise ConfigError(
            "variant 'none' uses plain averaging; no attention to export")
    weights = est.attention_weights(corpus)
    preds = est.predict(corpus)
    rows = []
    for p, clause_rows, labels in zip(corpus, weights, preds):
        for ci, ((tokens, wgts), label) in enumerate(
                zip(clause_rows, labels)):
            rows.append((p.id, ci, label, tokens, list(map(float, wgts))))
    _write_run_config(args.out, args)
    tsv_path = os.path.join(args.out, "attention.tsv")
    html_path = os.path.join(args.out, "attention.html")
    write_attention_tsv(rows, tsv_path)
    with open(html_path, "w", encoding="utf-8") as fh:
        fh.write(attention_html(rows) + "\n")
    print(f"wrote {tsv_path} and {html_path}")
    return 0


def cmd_stats(args) -> int:
    corpus = load_corpus(_require_file(args.corpus, "corpus file"))
    if not corpus:
        raise DataError(f"corpus {args.corpus} holds no paragraphs")
    stats = position_stats(corpus)
    _write_run_config(args.out, args)
    out_path = os.path.join(args.out, "position_stats.csv")
    write_position_stats_csv(stats, out_path)
    print(f"wrote {out_path}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "tag": cmd_tag,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "attention": cmd_attention,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ClauseTagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
