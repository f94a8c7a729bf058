"""Clause-sequence labeler.

Pipeline per paragraph: embed -> (project -> attend -> weighted sum) ->
LSTM over clause vectors -> affine + softmax over the 8 discourse labels.
Training is mini-batch ADAM on mean per-clause cross-entropy with early
stopping on held-out validation accuracy. Gradients for the whole pipeline
are hand-derived; see kernel.gradient_check for the verification tooling.
"""

from __future__ import annotations

import copy
import csv
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from . import summarizer
from .corpus import LABELS, N_LABELS, TOKENIZER_VERSION, split_validation
from .embeddings import (EmbeddedParagraph, EmbeddingTable, corpus_maxima,
                         embed_paragraph, load_embeddings)
from .errors import (ConfigError, DataError, DivergenceError,
                     ModelLoadError)
from .kernel import (DTYPE, GradStore, glorot, init_lstm_params,
                     lstm_cell_backward, lstm_cell_step)
from .optim import AdamConfig, AdamState, adam_step
from .validation import as_paragraphs, check_is_fitted

FORMAT_VERSION = "1"


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

def init_tagger_params(variant: str, emb_dim: int, proj_dim: int,
                       hidden_dim: int, n_labels: int,
                       rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Fresh parameter dict for one attention variant.

    Matrices are Glorot-uniform; scoring vectors and biases start at zero,
    which makes early attention uniform (a stable start).
    """
    if variant not in summarizer.VARIANTS:
        raise ConfigError(f"unknown attention variant {variant!r}")
    params: dict[str, np.ndarray] = {}
    if variant != "none":
        params["proj.P"] = glorot(rng, (emb_dim, proj_dim))
    if variant == "simple":
        params["att.s"] = np.zeros(proj_dim, dtype=DTYPE)
    elif variant == "recurrent":
        params["att.W_ih"] = glorot(rng, (proj_dim, proj_dim))
        params["att.W_hh"] = glorot(rng, (proj_dim, proj_dim))
        params["att.s"] = np.zeros(proj_dim, dtype=DTYPE)
    for key, value in init_lstm_params(emb_dim, hidden_dim, rng).items():
        params[f"lstm.{key}"] = value
    params["out.W"] = glorot(rng, (hidden_dim, n_labels))
    params["out.b"] = np.zeros(n_labels, dtype=DTYPE)
    return params


def _lstm_view(params: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k[len("lstm."):]: v for k, v in params.items()
            if k.startswith("lstm.")}


# ---------------------------------------------------------------------------
# forward / loss / backward
# ---------------------------------------------------------------------------

def tagger_forward(ep: EmbeddedParagraph, params: Mapping[str, np.ndarray],
                   variant: str, mode: str = "infer", dropout_p: float = 0.0,
                   lstm_dropout_p: float = 0.0,
                   rng: np.random.Generator | None = None):
    """Per-clause label distributions for one paragraph.

    Returns (probs, cache): probs has one row per real clause (padded
    clauses emit no prediction) and each row sums to 1. In train mode,
    inverted dropout is applied to the projected words feeding attention,
    so inference needs no rescaling.
    """
    if mode not in ("train", "infer"):
        raise ConfigError(f"unknown mode {mode!r}")
    n = ep.n_clauses
    if not ep.clause_mask[:n].all() or ep.clause_mask[n:].any():
        raise DataError("clause mask must be a true-prefix (padding at tail)")
    D, word_mask = ep.D, ep.word_mask
    hidden_dim = params["out.W"].shape[0]
    if D.shape[2] != params["lstm.W_xi"].shape[0]:
        raise ConfigError(
            f"stage lstm: input dim {D.shape[2]} does not match "
            f"W_xi {params['lstm.W_xi'].shape}")

    cache: dict = {"variant": variant, "n": n, "word_mask": word_mask,
                   "D": D}

    if variant == "none":
        A = summarizer.uniform_attention(word_mask)
    else:
        D_low = summarizer.project(D, params["proj.P"])
        drop_mask = None
        if mode == "train" and dropout_p > 0.0:
            if rng is None:
                raise ConfigError("train-mode dropout needs an rng")
            keep = 1.0 - dropout_p
            drop_mask = (rng.random(D_low.shape) < keep) / keep
            D_low_att = D_low * drop_mask
        else:
            D_low_att = D_low
        if variant == "simple":
            A = summarizer.attend_simple(D_low_att, params["att.s"],
                                         word_mask)
        elif variant == "recurrent":
            A, att_hidden = summarizer.attend_recurrent(
                D_low_att, params["att.W_ih"], params["att.W_hh"],
                params["att.s"], word_mask)
            cache["att_hidden"] = att_hidden
        else:
            raise ConfigError(f"unknown attention variant {variant!r}")
        cache.update(D_low=D_low, D_low_att=D_low_att, drop_mask=drop_mask)

    D_summ = summarizer.summarize(D, A)
    cache.update(A=A, D_summ=D_summ)

    summ_drop = None
    lstm_input = D_summ
    if mode == "train" and lstm_dropout_p > 0.0:
        if rng is None:
            raise ConfigError("train-mode dropout needs an rng")
        keep = 1.0 - lstm_dropout_p
        summ_drop = (rng.random(D_summ.shape) < keep) / keep
        lstm_input = D_summ * summ_drop
    cache["summ_drop"] = summ_drop
    cache["lstm_input"] = lstm_input

    lstm_params = _lstm_view(params)
    h = np.zeros(hidden_dim, dtype=DTYPE)
    c = np.zeros(hidden_dim, dtype=DTYPE)
    step_caches = []
    hs = np.zeros((n, hidden_dim), dtype=DTYPE)
    for i in range(n):
        h, c, step = lstm_cell_step(lstm_input[i], h, c, lstm_params)
        step_caches.append(step)
        hs[i] = h

    logits = hs @ params["out.W"] + params["out.b"]  # (n, L)
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)
    cache.update(step_caches=step_caches, hs=hs, probs=probs)
    return probs, cache


def tagger_loss(probs: np.ndarray, label_ids: np.ndarray) -> float:
    """Mean negative log-probability of the gold labels over real clauses."""
    n = probs.shape[0]
    gold = np.asarray(label_ids[:n])
    if (gold < 0).any():
        raise DataError("gold label missing on an unpadded clause")
    with np.errstate(divide="ignore"):
        return float(-np.log(probs[np.arange(n), gold]).mean())


def tagger_backward(cache: dict, params: Mapping[str, np.ndarray],
                    label_ids: np.ndarray,
                    loss_normalizer: int | None = None) -> GradStore:
    """Gradients of the cross-entropy loss for every parameter block.

    `loss_normalizer` is the clause count the loss is averaged over
    (defaults to this paragraph's clause count; mini-batch training passes
    the batch-wide total so per-paragraph contributions just add up).
    """
    n = cache["n"]
    probs = cache["probs"]
    gold = np.asarray(label_ids[:n])
    if (gold < 0).any():
        raise DataError("gold label missing on an unpadded clause")
    norm = float(loss_normalizer if loss_normalizer is not None else n)

    store = GradStore(params)
    # fused softmax + cross-entropy: dlogits = (p - onehot) / norm
    dlogits = probs.copy()
    dlogits[np.arange(n), gold] -= 1.0
    dlogits /= norm

    hs = cache["hs"]
    store.add("out.W", hs.T @ dlogits)
    store.add("out.b", dlogits.sum(axis=0))
    dh_steps = dlogits @ params["out.W"].T  # (n, hidden)

    lstm_params = _lstm_view(params)
    lstm_input = cache["lstm_input"]
    d_input = np.zeros((cache["D_summ"].shape[0], lstm_input.shape[1]),
                       dtype=DTYPE)
    dh_next = np.zeros(dh_steps.shape[1], dtype=DTYPE)
    dc_next = np.zeros(dh_steps.shape[1], dtype=DTYPE)
    for i in range(n - 1, -1, -1):
        dh = dh_steps[i] + dh_next
        dx, dh_next, dc_next, gate_grads = lstm_cell_backward(
            cache["step_caches"][i], dh, dc_next, lstm_params)
        store.add_all(gate_grads, prefix="lstm.")
        d_input[i] = dx

    if cache["summ_drop"] is not None:
        dD_summ = d_input * cache["summ_drop"]
    else:
        dD_summ = d_input

    dA, _ = summarizer.summarize_backward(cache["D"], cache["A"], dD_summ)

    variant = cache["variant"]
    if variant == "none":
        return store
    word_mask = cache["word_mask"]
    if variant == "simple":
        dD_low_att, ds = summarizer.attend_simple_backward(
            cache["D_low_att"], params["att.s"], word_mask, cache["A"], dA)
        store.add("att.s", ds)
    else:
        dD_low_att, dW_ih, dW_hh, ds = summarizer.attend_recurrent_backward(
            cache["D_low_att"], params["att.W_ih"], params["att.W_hh"],
            params["att.s"], word_mask, cache["A"], cache["att_hidden"], dA)
        store.add("att.W_ih", dW_ih)
        store.add("att.W_hh", dW_hh)
        store.add("att.s", ds)
    if cache["drop_mask"] is not None:
        dD_low = dD_low_att * cache["drop_mask"]
    else:
        dD_low = dD_low_att
    store.add("proj.P",
              summarizer.project_backward(cache["D"], cache["D_low"], dD_low))
    return store


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    max_epochs: int = 100
    patience: int = 5
    dropout_p: float = 0.5
    lstm_dropout_p: float = 0.0
    batch_size: int = 10
    seed: int = 0
    adam: AdamConfig = field(default_factory=AdamConfig)

    def __post_init__(self):
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), "
                              f"got {self.dropout_p}")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_accuracy: float
    best_so_far: float


def clause_accuracy(eps: Sequence[EmbeddedParagraph],
                    params: Mapping[str, np.ndarray], variant: str) -> float:
    """Fraction of real clauses whose argmax label matches gold."""
    correct = 0
    total = 0
    for ep in eps:
        probs, _ = tagger_forward(ep, params, variant)
        gold = ep.label_ids[:ep.n_clauses]
        correct += int((probs.argmax(axis=1) == gold).sum())
        total += ep.n_clauses
    return correct / total if total else 0.0


def train_tagger(train_eps: Sequence[EmbeddedParagraph],
                 val_eps: Sequence[EmbeddedParagraph],
                 params: dict[str, np.ndarray], variant: str,
                 cfg: TrainConfig):
    """Mini-batch ADAM with early stopping on validation clause accuracy.

    Returns (best_params, history); best_params is the snapshot from the
    best validation epoch, never simply the last one.
    """
    if not train_eps or not val_eps:
        raise DataError("training and validation sets must be nonempty")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(params)
    history: list[EpochLog] = []
    best_params = copy.deepcopy(params)
    best_acc = -1.0
    epochs_since_gain = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(train_eps))
        epoch_nll = 0.0
        epoch_clauses = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            n_batch_clauses = int(sum(train_eps[i].n_clauses for i in batch))
            store = GradStore(params)
            batch_nll = 0.0
            for i in batch:
                ep = train_eps[i]
                probs, cache = tagger_forward(
                    ep, params, variant, mode="train",
                    dropout_p=cfg.dropout_p,
                    lstm_dropout_p=cfg.lstm_dropout_p, rng=rng)
                gold = ep.label_ids[:ep.n_clauses]
                with np.errstate(divide="ignore"):
                    batch_nll += float(
                        -np.log(probs[np.arange(ep.n_clauses), gold]).sum())
                grads = tagger_backward(cache, params, ep.label_ids,
                                        loss_normalizer=n_batch_clauses)
                for name, g in grads.items():
                    store.add(name, g)
            if not np.isfinite(batch_nll):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, "
                    f"batch starting at {start}")
            adam_step(params, store.grads, state, cfg.adam)
            epoch_nll += batch_nll
            epoch_clauses += n_batch_clauses

        train_loss = epoch_nll / max(epoch_clauses, 1)
        val_acc = clause_accuracy(val_eps, params, variant)
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = copy.deepcopy(params)
            epochs_since_gain = 0
        else:
            epochs_since_gain += 1
        history.append(EpochLog(epoch=epoch, train_loss=train_loss,
                                val_accuracy=val_acc, best_so_far=best_acc))
        if epochs_since_gain >= cfg.patience:
            break
    return best_params, history


def write_training_log(history: Sequence[EpochLog], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_accuracy",
                         "best_so_far"])
        for row in history:
            writer.writerow([row.epoch, repr(row.train_loss),
                             repr(row.val_accuracy), repr(row.best_so_far)])


def read_training_log(path) -> list[EpochLog]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            out.append(EpochLog(epoch=int(rec["epoch"]),
                                train_loss=float(rec["train_loss"]),
                                val_accuracy=float(rec["val_accuracy"]),
                                best_so_far=float(rec["best_so_far"])))
    return out


# ---------------------------------------------------------------------------
# model directory (manifest + flat weights)
# ---------------------------------------------------------------------------

def save_params(dirpath, params: Mapping[str, np.ndarray],
                manifest: Mapping[str, str]) -> None:
    """Write `manifest` (key/value text, with ordered param declarations)
    and `weights` (concatenated little-endian float64 arrays)."""
    import os
    os.makedirs(dirpath, exist_ok=True)
    lines = [f"format_version: {FORMAT_VERSION}"]
    for key, value in manifest.items():
        lines.append(f"{key}: {value}")
    blobs = []
    for name, arr in params.items():
        dims = " ".join(str(s) for s in np.shape(arr))
        lines.append(f"param: {name} {dims}".rstrip())
        blobs.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    with open(os.path.join(dirpath, "manifest"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(dirpath, "weights"), "wb") as fh:
        fh.write(b"".join(blobs))


def load_params(dirpath):
    """Read back (params, manifest) produced by save_params."""
    import os
    manifest_path = os.path.join(dirpath, "manifest")
    weights_path = os.path.join(dirpath, "weights")
    if not os.path.exists(manifest_path) or not os.path.exists(weights_path):
        raise ModelLoadError(f"{dirpath} is not a model directory")
    manifest: dict[str, str] = {}
    param_decls: list[tuple[str, tuple[int, ...]]] = []
    with open(manifest_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, value = line.partition(": ")
            if key == "param":
                parts = value.split()
                name = parts[0]
                shape = tuple(int(x) for x in parts[1:])
                param_decls.append((name, shape))
            else:
                manifest[key] = value
    version = manifest.pop("format_version", None)
    if version != FORMAT_VERSION:
        raise ModelLoadError(
            f"unsupported model format version {version!r} "
            f"(expected {FORMAT_VERSION})")
    raw = open(weights_path, "rb").read()
    expected = sum(int(np.prod(s)) if s else 1 for _, s in param_decls) * 8
    if len(raw) != expected:
        raise ModelLoadError(
            f"weights file holds {len(raw)} bytes, manifest declares "
            f"{expected}")
    params: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in param_decls:
        size = int(np.prod(shape)) if shape else 1
        chunk = np.frombuffer(raw, dtype="<f8", count=size, offset=offset)
        params[name] = chunk.astype(DTYPE).reshape(shape).copy()
        offset += size * 8
    return params, manifest


# ---------------------------------------------------------------------------
# estimator
# ---------------------------------------------------------------------------

class LstmDiscourseTagger(BaseEstimator):
    """Attention-summarized LSTM tagger with a scikit-learn style API.

    X is a sequence of paragraphs (Paragraph objects, or nested lists of
    clause strings / token lists); y is one label sequence per paragraph
    (optional when labels are embedded in the paragraphs).

    Word vectors come from `embeddings` (an EmbeddingTable or a path to a
    text vector file) and stay frozen; no gradient flows into them.
    """

    def __init__(self, embeddings=None, variant="recurrent",
                 projection_dim=50, hidden_size=50, max_epochs=100,
                 patience=5, dropout_p=0.5, lstm_dropout_p=0.0,
                 learning_rate=0.001, beta1=0.9, beta2=0.999,
                 adam_eps=1e-8, batch_size=10, validation_fraction=0.1,
                 seed=0):
        self.embeddings = embeddings
        self.variant = variant
        self.projection_dim = projection_dim
        self.hidden_size = hidden_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.dropout_p = dropout_p
        self.lstm_dropout_p = lstm_dropout_p
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.batch_size = batch_size
        self.validation_fraction = validation_fraction
        self.seed = seed

    # -- helpers ----------------------------------------------------------

    def _table(self) -> EmbeddingTable:
        if isinstance(self.embeddings, EmbeddingTable):
            table = self.embeddings
        elif isinstance(self.embeddings, str):
            table = load_embeddings(self.embeddings)
        elif self.embeddings is None:
            raise ConfigError(
                "no embeddings configured; pass an EmbeddingTable or a "
                "vector-file path")
        else:
            raise ConfigError(
                f"cannot interpret embeddings of type "
                f"{type(self.embeddings).__name__}")
        expected = getattr(self, "embedding_dim_", None)
        if expected is not None and table.dim != expected:
            raise ConfigError(
                f"embedding dim {table.dim} does not match the model's "
                f"trained dim {expected}")
        return table

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            max_epochs=self.max_epochs, patience=self.patience,
            dropout_p=self.dropout_p, lstm_dropout_p=self.lstm_dropout_p,
            batch_size=self.batch_size, seed=self.seed,
            adam=AdamConfig(alpha=self.learning_rate, beta1=self.beta1,
                            beta2=self.beta2, eps=self.adam_eps))

    def _embed_for_inference(self, paragraphs) -> list[EmbeddedParagraph]:
        table = self._table()
        out = []
        for p in paragraphs:
            if len(p.clauses) > self.max_clauses_:
                warnings.warn(
                    f"paragraph {p.id!r} has {len(p.clauses)} clauses; "
                    f"longest training paragraph had {self.max_clauses_}")
            widest = max(len(cl.tokens) for cl in p.clauses)
            if widest > self.max_words_:
                warnings.warn(
                    f"paragraph {p.id!r} has a {widest}-word clause; "
                    f"widest training clause had {self.max_words_}")
            out.append(embed_paragraph(p, table))
        return out

    # -- estimator API ----------------------------------------------------

    def fit(self, X, y=None, X_val=None, y_val=None):
        if self.variant not in summarizer.VARIANTS:
            raise ConfigError(f"unknown attention variant {self.variant!r}")
        paragraphs = as_paragraphs(X, y, require_labels=True)
        table = self._table()
        if table.dim < 1:
            raise ConfigError("embedding table is empty")

        if X_val is not None:
            train_paras = paragraphs
            val_paras = as_paragraphs(X_val, y_val, require_labels=True,
                                      id_prefix="v")
        else:
            train_paras, val_paras = split_validation(
                paragraphs, self.validation_fraction, self.seed)

        self.embedding_dim_ = table.dim
        self.unk_policy_ = table.unk_policy
        self.max_clauses_, self.max_words_ = corpus_maxima(paragraphs)
        train_eps = [embed_paragraph(p, table) for p in train_paras]
        val_eps = [embed_paragraph(p, table) for p in val_paras]

        rng = np.random.default_rng(self.seed)
        params = init_tagger_params(self.variant, table.dim,
                                    self.projection_dim, self.hidden_size,
                                    N_LABELS, rng)
        self.params_, self.history_ = train_tagger(
            train_eps, val_eps, params, self.variant, self._train_config())
        return self

    def predict_proba(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "params_")
        paragraphs = as_paragraphs(X)
        out = []
        for ep in self._embed_for_inference(paragraphs):
            probs, _ = tagger_forward(ep, self.params_, self.variant)
            out.append(probs)
        return out

    def predict(self, X) -> list[list[str]]:
        return [[LABELS[j] for j in probs.argmax(axis=1)]
                for probs in self.predict_proba(X)]

    def score(self, X, y=None) -> float:
        """Clause-level accuracy against gold labels."""
        check_is_fitted(self, "params_")
        paragraphs = as_paragraphs(X, y, require_labels=True)
        preds = self.predict(paragraphs)
        correct = total = 0
        for para, pred in zip(paragraphs, preds):
            for cl, lab in zip(para.clauses, pred):
                correct += int(cl.gold == lab)
                total += 1
        return correct / total

    def attention_weights(self, X):
        """Per paragraph, a list of (tokens, weights) pairs per clause."""
        check_is_fitted(self, "params_")
        if self.variant == "none":
            raise ConfigError(
                "variant 'none' uses plain averaging; no attention to "
                "export")
        paragraphs = as_paragraphs(X)
        out = []
        for ep in self._embed_for_inference(paragraphs):
            _, cache = tagger_forward(ep, self.params_, self.variant)
            A = cache["A"]
            rows = []
            for i, toks in enumerate(ep.tokens):
                rows.append((toks, A[i, :len(toks)].copy()))
            out.append(rows)
        return out

    # -- persistence ------------------------------------------------------

    def manifest(self) -> dict[str, str]:
        check_is_fitted(self, "params_")
        return {
            "model_type": "lstm_tagger",
            "variant": self.variant,
            "labels": ",".join(LABELS),
            "embedding_dim": str(self.embedding_dim_),
            "projection_dim": str(self.projection_dim),
            "hidden_size": str(self.hidden_size),
            "max_clauses": str(self.max_clauses_),
            "max_words": str(self.max_words_),
            "tokenizer": TOKENIZER_VERSION,
            "unk_policy": getattr(self, "unk_policy_", "zero"),
            "dropout_p": repr(self.dropout_p),
            "seed": str(self.seed),
            "note": ("hidden size, loss, batching and optimizer settings "
                     "are implementation defaults"),
        }

    def save(self, dirpath) -> None:
        save_params(dirpath, self.params_, self.manifest())

    @classmethod
    def load(cls, dirpath, embeddings=None, expected_variant=None):
        params, manifest = load_params(dirpath)
        if manifest.get("model_type") != "lstm_tagger":
            raise ModelLoadError(
                f"{dirpath} holds a {manifest.get('model_type')!r} model, "
                f"not an LSTM tagger")
        variant = manifest["variant"]
        if expected_variant is not None and variant != expected_variant:
            raise ModelLoadError(
                f"model was trained with variant {variant!r}, "
                f"caller expected {expected_variant!r}")
        stored_labels = manifest.get("labels", "")
        if stored_labels != ",".join(LABELS):
            raise ModelLoadError(
                f"model label set {stored_labels!r} does not match this "
                f"build's labels")
        est = cls(embeddings=embeddings, variant=variant,
                  projection_dim=int(manifest["projection_dim"]),
                  hidden_size=int(manifest["hidden_size"]),
                  dropout_p=float(manifest.get("dropout_p", "0.5")),
                  seed=int(manifest.get("seed", "0")))
        est.params_ = params
        est.embedding_dim_ = int(manifest["embedding_dim"])
        est.max_clauses_ = int(manifest["max_clauses"])
        est.max_words_ = int(manifest["max_words"])
        est.history_ = []
        if embeddings is not None:
            est._table()  # validates embedding dimension eagerly
        return est
