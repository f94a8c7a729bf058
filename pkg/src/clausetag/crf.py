"""Linear-chain CRF baseline over clause sequences.

Sparse indicator features per clause (lexicon cues, figure references,
citations, position buckets, suffix-based verb/adverb unigrams), label
transition weights with begin/end terms, maximum-likelihood training via
forward-backward expectations, Viterbi decoding.

The original feature set this stands in for relied on an external
part-of-speech parser; suffix heuristics (-ed / -ing / -ly / -s) replace the
POS features so the package stays self-contained.
"""

from __future__ import annotations

import copy
import os
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .corpus import (LABELS, LABEL_TO_INDEX, N_LABELS, Clause, Paragraph,
                     position_bucket)
from .errors import (ConfigError, DataError, DivergenceError, ModelLoadError,
                     ParseError)
from .kernel import DTYPE
from .optim import AdamConfig, AdamState, adam_step
from .tagger import EpochLog, load_params, save_params
from .validation import as_paragraphs, check_is_fitted

# Hand-crafted cue lists. Entries may be multi-word phrases, matched against
# the space-joined token string of a clause.
DEFAULT_LEXICON_CUES: dict[str, list[str]] = {
    "goal": ["investigate", "examine", "determine", "assess", "to test",
             "whether", "aim", "aimed"],
    "fact": ["known", "well established", "previously", "reported",
             "plays a role"],
    "result": ["observed", "found", "data not shown", "showed", "shown",
               "increased", "decreased", "detected"],
    "hypothesis": ["hypothesized", "hypothesize", "predicted", "speculated",
                   "might", "may", "possibility"],
    "method": ["performed", "used", "incubated", "transfected", "analyzed",
               "measured", "stained", "treated", "assay"],
    "problem": ["unclear", "unknown", "remains", "however", "surprisingly",
                "contradictory"],
    "implication": ["demonstrate", "demonstrates", "demonstrated", "suggest",
                    "suggests", "suggesting", "indicate", "indicates",
                    "indicating", "conclude", "therefore", "thus",
                    "together"],
}


@dataclass
class Lexicon:
    """Label-cue word/phrase lists; entries are lowercase and deduplicated."""
    cues: dict[str, list[str]] = field(
        default_factory=lambda: copy.deepcopy(DEFAULT_LEXICON_CUES))

    def __post_init__(self):
        cleaned = {}
        for cls, entries in self.cues.items():
            seen = []
            for e in entries:
                low = e.strip().lower()
                if low and low not in seen:
                    seen.append(low)
            cleaned[cls.strip().lower()] = seen
        self.cues = cleaned

    def classes(self) -> list[str]:
        return sorted(self.cues)

    def matches(self, cls: str, tokens: Sequence[str], joined: str) -> bool:
        token_set = set(tokens)
        for entry in self.cues.get(cls, ()):
            if " " in entry:
                if entry in joined:
                    return True
            elif entry in token_set:
                return True
        return False

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for cls in self.classes():
                fh.write(f"{cls}: {', '.join(self.cues[cls])}\n")

    @classmethod
    def load(cls, path) -> "Lexicon":
        cues: dict[str, list[str]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if ":" not in line:
                    raise ParseError("expected 'label: word[, word...]'",
                                     path=path, line=line_no)
                name, _, rest = line.partition(":")
                cues[name.strip().lower()] = [
                    w.strip() for w in rest.split(",") if w.strip()]
        return cls(cues=cues)


# ---------------------------------------------------------------------------
# feature extraction
# ---------------------------------------------------------------------------

_FIGURE_WORDS = {"fig", "figs", "figure", "figures"}
_FIGURE_NUM_RE = re.compile(r"^\d+[a-z]{0,2}$")
_NUMERAL_RE = re.compile(r"^\d+$")


def has_figure_reference(tokens: Sequence[str]) -> bool:
    """'Fig. 3A'-shaped token runs ('fig' ['.'] <numeral[letters]>)."""
    for i, tok in enumerate(tokens):
        if tok in _FIGURE_WORDS:
            for j in range(i + 1, min(i + 3, len(tokens))):
                if tokens[j] == ".":
                    continue
                return bool(_FIGURE_NUM_RE.match(tokens[j]))
    return False


def has_citation(tokens: Sequence[str]) -> bool:
    """Bracketed numerals ('[ 12 ]') or an 'et al' mention."""
    for i, tok in enumerate(tokens):
        if (tok == "[" and i + 2 < len(tokens)
                and _NUMERAL_RE.match(tokens[i + 1])
                and tokens[i + 2] == "]"):
            return True
        if tok == "et" and i + 1 < len(tokens) and tokens[i + 1] == "al":
            return True
    return False


def extract_features(clause: Clause, lexicon: Lexicon,
                     pos_bucket: int | None = None) -> dict[str, float]:
    """Sparse indicator features for one clause.

    Verb/adverb unigrams are approximated by suffix shape: -ly tokens count
    as adverbs, -ed/-ing/-s tokens as verbs, and both emit their identity.
    """
    tokens = clause.tokens
    joined = " ".join(tokens)
    feats: dict[str, float] = {"bias": 1.0}
    for cls in lexicon.classes():
        if lexicon.matches(cls, tokens, joined):
            feats[f"lex={cls}"] = 1.0
    if has_figure_reference(tokens):
        feats["figref"] = 1.0
    if has_citation(tokens):
        feats["cite"] = 1.0
    if pos_bucket is not None:
        feats[f"pos={pos_bucket}"] = 1.0
    for tok in tokens:
        if len(tok) > 3 and tok.endswith("ly"):
            feats[f"adv={tok}"] = 1.0
            feats["suf=ly"] = 1.0
        elif len(tok) > 3 and tok.endswith("ed"):
            feats[f"verb={tok}"] = 1.0
            feats["suf=ed"] = 1.0
        elif len(tok) > 4 and tok.endswith("ing"):
            feats[f"verb={tok}"] = 1.0
            feats["suf=ing"] = 1.0
        elif len(tok) > 3 and tok.endswith("s") and not tok.endswith("ss"):
            feats[f"verb={tok}"] = 1.0
            feats["suf=s"] = 1.0
    return feats


def paragraph_features(p: Paragraph, lexicon: Lexicon) -> list[dict[str, float]]:
    n = len(p.clauses)
    return [extract_features(cl, lexicon, position_bucket(i, n))
            for i, cl in enumerate(p.clauses)]


def build_feature_index(paragraphs: Sequence[Paragraph],
                        lexicon: Lexicon) -> dict[str, int]:
    """Sorted name -> column index over every feature seen in the corpus."""
    names: set[str] = set()
    for p in paragraphs:
        for feats in paragraph_features(p, lexicon):
            names.update(feats)
    return {name: i for i, name in enumerate(sorted(names))}


# ---------------------------------------------------------------------------
# model and dynamic programming
# ---------------------------------------------------------------------------

@dataclass
class CrfModel:
    feature_index: dict[str, int]
    emission: np.ndarray      # (n_features, L)
    transition: np.ndarray    # (L, L), [prev, next]
    begin: np.ndarray         # (L,)
    end: np.ndarray           # (L,)
    lexicon: Lexicon = field(default_factory=Lexicon)
    l2: float = 1e-4

    @classmethod
    def zeros(cls, feature_index, lexicon=None, l2=1e-4) -> "CrfModel":
        f = len(feature_index)
        return cls(feature_index=dict(feature_index),
                   emission=np.zeros((f, N_LABELS), dtype=DTYPE),
                   transition=np.zeros((N_LABELS, N_LABELS), dtype=DTYPE),
                   begin=np.zeros(N_LABELS, dtype=DTYPE),
                   end=np.zeros(N_LABELS, dtype=DTYPE),
                   lexicon=lexicon if lexicon is not None else Lexicon(),
                   l2=l2)

    def weight_dict(self) -> dict[str, np.ndarray]:
        return {"emission": self.emission, "transition": self.transition,
                "begin": self.begin, "end": self.end}

    def emission_scores(self, feats: Sequence[dict[str, float]]) -> np.ndarray:
        """(n, L) emission score matrix; unknown feature names are ignored."""
        out = np.zeros((len(feats), N_LABELS), dtype=DTYPE)
        for t, fv in enumerate(feats):
            for name, value in fv.items():
                idx = self.feature_index.get(name)
                if idx is not None:
                    out[t] += value * self.emission[idx]
        return out


def _logsumexp(a: np.ndarray, axis: int):
    m = np.max(a, axis=axis, keepdims=True)
    return np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)


def sequence_score(model: CrfModel, feats: Sequence[dict[str, float]],
                   label_ids: Sequence[int]) -> float:
    """Emission + transition + begin/end score of one labeling."""
    if len(feats) != len(label_ids):
        raise DataError(
            f"{len(feats)} clauses but {len(label_ids)} labels")
    em = model.emission_scores(feats)
    score = model.begin[label_ids[0]] + model.end[label_ids[-1]]
    prev = None
    for t, y in enumerate(label_ids):
        score += em[t, y]
        if prev is not None:
            score += model.transition[prev, y]
        prev = y
    return float(score)


def _forward_alphas(em, transition, begin) -> np.ndarray:
    n, L = em.shape
    alpha = np.zeros((n, L), dtype=DTYPE)
    alpha[0] = begin + em[0]
    for t in range(1, n):
        # alpha[t-1, prev] + transition[prev, next], reduced over prev
        alpha[t] = em[t] + _logsumexp(
            alpha[t - 1][:, None] + transition, axis=0)
    return alpha


def _backward_betas(em, transition, end) -> np.ndarray:
    n, L = em.shape
    beta = np.zeros((n, L), dtype=DTYPE)
    beta[n - 1] = end
    for t in range(n - 2, -1, -1):
        beta[t] = _logsumexp(
            transition + (em[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_partition(model: CrfModel,
                  feats: Sequence[dict[str, float]]) -> float:
    """Log of the sum of exp(score) over all labelings (forward recursion)."""
    if not feats:
        raise DataError("empty clause sequence")
    em = model.emission_scores(feats)
    alpha = _forward_alphas(em, model.transition, model.begin)
    return float(_logsumexp(alpha[-1] + model.end, axis=0))


def marginals(model: CrfModel, feats: Sequence[dict[str, float]]):
    """(unary, pairwise, logZ): per-position and per-adjacent-pair
    posterior probabilities from forward-backward."""
    if not feats:
        raise DataError("empty clause sequence")
    em = model.emission_scores(feats)
    alpha = _forward_alphas(em, model.transition, model.begin)
    beta = _backward_betas(em, model.transition, model.end)
    log_z = float(_logsumexp(alpha[-1] + model.end, axis=0))
    unary = np.exp(alpha + beta - log_z)
    n = em.shape[0]
    pairwise = np.zeros((max(n - 1, 0), N_LABELS, N_LABELS), dtype=DTYPE)
    for t in range(n - 1):
        pairwise[t] = np.exp(
            alpha[t][:, None] + model.transition
            + (em[t + 1] + beta[t + 1])[None, :] - log_z)
    return unary, pairwise, log_z


def viterbi(model: CrfModel, feats: Sequence[dict[str, float]]):
    """Argmax labeling and its score; ties break to the lowest label index."""
    if not feats:
        raise DataError("empty clause sequence")
    em = model.emission_scores(feats)
    n, L = em.shape
    score = model.begin + em[0]
    backptr = np.zeros((n, L), dtype=np.int64)
    for t in range(1, n):
        cand = score[:, None] + model.transition  # (prev, next)
        backptr[t] = cand.argmax(axis=0)
        score = cand.max(axis=0) + em[t]
    final = score + model.end
    best = int(final.argmax())
    path = [best]
    for t in range(n - 1, 0, -1):
        best = int(backptr[t, best])
        path.append(best)
    path.reverse()
    return path, sequence_score(model, feats, path)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def log_likelihood_and_grads(model: CrfModel,
                             feats: Sequence[dict[str, float]],
                             label_ids: Sequence[int]):
    """Per-paragraph log-likelihood and its gradient w.r.t. all weights.

    Gradient = empirical feature counts - expected counts (forward-backward).
    """
    unary, pairwise, log_z = marginals(model, feats)
    ll = sequence_score(model, feats, label_ids) - log_z

    diff = -unary
    n = len(feats)
    for t, y in enumerate(label_ids):
        diff[t, y] += 1.0
    g_em = np.zeros_like(model.emission)
    for t, fv in enumerate(feats):
        for name, value in fv.items():
            idx = model.feature_index.get(name)
            if idx is not None:
                g_em[idx] += value * diff[t]
    g_tr = -pairwise.sum(axis=0)
    for t in range(n - 1):
        g_tr[label_ids[t], label_ids[t + 1]] += 1.0
    g_begin = -unary[0].copy()
    g_begin[label_ids[0]] += 1.0
    g_end = -unary[-1].copy()
    g_end[label_ids[-1]] += 1.0
    grads = {"emission": g_em, "transition": g_tr,
             "begin": g_begin, "end": g_end}
    return ll, grads


def regularized_objective_and_grads(model: CrfModel, batch):
    """Mean log-likelihood over a batch minus the L2 penalty.

    `batch` is a list of (feats, label_ids) pairs. Returns (objective,
    gradient dict for ascent).
    """
    weights = model.weight_dict()
    total_ll = 0.0
    total = {k: np.zeros_like(v) for k, v in weights.items()}
    for feats, label_ids in batch:
        ll, grads = log_likelihood_and_grads(model, feats, label_ids)
        total_ll += ll
        for k in total:
            total[k] += grads[k]
    m = len(batch)
    obj = total_ll / m
    penalty = 0.0
    with np.errstate(over="ignore"):
        for k, w in weights.items():
            total[k] /= m
            total[k] -= 2.0 * model.l2 * w
            penalty += float(np.sum(w * w))
    return obj - model.l2 * penalty, total


@dataclass
class CrfTrainConfig:
    max_epochs: int = 100
    patience: int = 5
    batch_size: int = 8
    seed: int = 0
    adam: AdamConfig = field(default_factory=lambda: AdamConfig(alpha=0.1))


def _decode_accuracy(model: CrfModel, data) -> float:
    correct = total = 0
    for feats, label_ids in data:
        path, _ = viterbi(model, feats)
        correct += sum(int(a == b) for a, b in zip(path, label_ids))
        total += len(label_ids)
    return correct / total if total else 0.0


def train_crf(model: CrfModel, train_data, val_data, cfg: CrfTrainConfig):
    """Maximize mean per-paragraph log-likelihood - L2 by mini-batch ADAM,
    early-stopping on validation decode accuracy.

    `train_data`/`val_data` are lists of (feats, label_ids) pairs. Returns
    (best model, history); the logged train_loss is the negated objective.
    """
    if not train_data or not val_data:
        raise DataError("training and validation sets must be nonempty")
    rng = np.random.default_rng(cfg.seed)
    weights = model.weight_dict()
    state = AdamState(weights)
    best_model = copy.deepcopy(model)
    best_acc = -1.0
    since_gain = 0
    history: list[EpochLog] = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(train_data))
        epoch_obj = 0.0
        n_batches = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_data[i] for i in order[start:start + cfg.batch_size]]
            obj, grads = regularized_objective_and_grads(model, batch)
            if not np.isfinite(obj):
                raise DivergenceError(
                    f"non-finite CRF objective at epoch {epoch}, "
                    f"batch starting at {start}")
            # adam_step minimizes, so feed the descent direction
            adam_step(weights, {k: -g for k, g in grads.items()}, state,
                      cfg.adam)
            epoch_obj += obj
            n_batches += 1
        val_acc = _decode_accuracy(model, val_data)
        if val_acc > best_acc:
            best_acc = val_acc
            best_model = copy.deepcopy(model)
            since_gain = 0
        else:
            since_gain += 1
        history.append(EpochLog(epoch=epoch,
                                train_loss=-epoch_obj / n_batches,
                                val_accuracy=val_acc, best_so_far=best_acc))
        if since_gain >= cfg.patience:
            break
    return best_model, history


# ---------------------------------------------------------------------------
# estimator
# ---------------------------------------------------------------------------

class CrfDiscourseTagger(BaseEstimator):
    """Feature-based linear-chain CRF with a scikit-learn style API."""

    def __init__(self, lexicon=None, l2=1e-4, learning_rate=0.1,
                 max_epochs=100, patience=5, batch_size=8,
                 validation_fraction=0.1, seed=0):
        self.lexicon = lexicon
        self.l2 = l2
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.batch_size = batch_size
        self.validation_fraction = validation_fraction
        self.seed = seed

    def _lexicon(self) -> Lexicon:
        if self.lexicon is None:
            return Lexicon()
        if isinstance(self.lexicon, Lexicon):
            return self.lexicon
        if isinstance(self.lexicon, dict):
            return Lexicon(cues=self.lexicon)
        if isinstance(self.lexicon, str):
            return Lexicon.load(self.lexicon)
        raise ConfigError(
            f"cannot interpret lexicon of type {type(self.lexicon).__name__}")

    @staticmethod
    def _featurize(paragraphs, lexicon):
        data = []
        for p in paragraphs:
            feats = paragraph_features(p, lexicon)
            label_ids = [LABEL_TO_INDEX[cl.gold] for cl in p.clauses]
            data.append((feats, label_ids))
        return data

    def fit(self, X, y=None, X_val=None, y_val=None):
        from .corpus import split_validation
        paragraphs = as_paragraphs(X, y, require_labels=True)
        lexicon = self._lexicon()
        if X_val is not None:
            train_paras = paragraphs
            val_paras = as_paragraphs(X_val, y_val, require_labels=True,
                                      id_prefix="v")
        else:
            train_paras, val_paras = split_validation(
                paragraphs, self.validation_fraction, self.seed)
        index = build_feature_index(train_paras, lexicon)
        model = CrfModel.zeros(index, lexicon=lexicon, l2=self.l2)
        cfg = CrfTrainConfig(
            max_epochs=self.max_epochs, patience=self.patience,
            batch_size=self.batch_size, seed=self.seed,
            adam=AdamConfig(alpha=self.learning_rate))
        self.model_, self.history_ = train_crf(
            model, self._featurize(train_paras, lexicon),
            self._featurize(val_paras, lexicon), cfg)
        return self

    def predict(self, X) -> list[list[str]]:
        check_is_fitted(self, "model_")
        out = []
        for p in as_paragraphs(X):
            feats = paragraph_features(p, self.model_.lexicon)
            path, _ = viterbi(self.model_, feats)
            out.append([LABELS[i] for i in path])
        return out

    def predict_marginals(self, X) -> list[np.ndarray]:
        """Per-clause posterior label distributions, (c, 8) per paragraph."""
        check_is_fitted(self, "model_")
        out = []
        for p in as_paragraphs(X):
            feats = paragraph_features(p, self.model_.lexicon)
            unary, _, _ = marginals(self.model_, feats)
            out.append(unary)
        return out

    def score(self, X, y=None) -> float:
        check_is_fitted(self, "model_")
        paragraphs = as_paragraphs(X, y, require_labels=True)
        preds = self.predict(paragraphs)
        correct = total = 0
        for para, pred in zip(paragraphs, preds):
            for cl, lab in zip(para.clauses, pred):
                correct += int(cl.gold == lab)
                total += 1
        return correct / total

    # -- persistence ------------------------------------------------------

    def save(self, dirpath) -> None:
        check_is_fitted(self, "model_")
        manifest = {
            "model_type": "crf",
            "labels": ",".join(LABELS),
            "n_features": str(len(self.model_.feature_index)),
            "l2": repr(self.l2),
            "seed": str(self.seed),
        }
        save_params(dirpath, self.model_.weight_dict(), manifest)
        names = [None] * len(self.model_.feature_index)
        for name, idx in self.model_.feature_index.items():
            names[idx] = name
        with open(os.path.join(dirpath, "features.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write("\n".join(names) + "\n")
        self.model_.lexicon.save(os.path.join(dirpath, "lexicon.txt"))

    @classmethod
    def load(cls, dirpath):
        weights, manifest = load_params(dirpath)
        if manifest.get("model_type") != "crf":
            raise ModelLoadError(
                f"{dirpath} holds a {manifest.get('model_type')!r} model, "
                f"not a CRF")
        if manifest.get("labels", "") != ",".join(LABELS):
            raise ModelLoadError("model label set does not match this build")
        feat_path = os.path.join(dirpath, "features.txt")
        if not os.path.exists(feat_path):
            raise ModelLoadError(f"{dirpath} is missing features.txt")
        with open(feat_path, encoding="utf-8") as fh:
            names = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        index = {name: i for i, name in enumerate(names)}
        if len(index) != int(manifest.get("n_features", len(index))):
            raise ModelLoadError("feature index does not match manifest")
        if weights["emission"].shape != (len(index), N_LABELS):
            raise ModelLoadError(
                f"emission weights {weights['emission'].shape} do not match "
                f"{len(index)} features x {N_LABELS} labels")
        lexicon = Lexicon.load(os.path.join(dirpath, "lexicon.txt"))
        l2 = float(manifest.get("l2", "1e-4"))
        est = cls(l2=l2, seed=int(manifest.get("seed", "0")))
        est.model_ = CrfModel(feature_index=index,
                              emission=weights["emission"],
                              transition=weights["transition"],
                              begin=weights["begin"], end=weights["end"],
                              lexicon=lexicon, l2=l2)
        est.history_ = []
        return est
