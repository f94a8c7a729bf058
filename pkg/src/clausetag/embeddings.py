"""Pretrained word-vector loading and paragraph embedding.

Embedding file format: whitespace-separated text, one vector per line
("token v1 ... vd"), with an optional "count dim" header line:

    3 4
    phosphorylation 0.11 -0.02 0.74 0.30
    kinase 0.21 0.09 -0.13 0.05
    assay -0.40 0.17 0.22 -0.08

Vectors are frozen model inputs; no gradient ever flows into them.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .corpus import LABEL_TO_INDEX, Paragraph
from .errors import CapacityError, ConfigError, ParseError

UNK_POLICIES = ("zero", "hash")


@dataclass
class EmbeddingTable:
    dim: int
    vocab: dict[str, int]
    vectors: np.ndarray  # (|vocab|, dim)
    unk_policy: str = "zero"

    def __post_init__(self):
        if self.unk_policy not in UNK_POLICIES:
            raise ConfigError(
                f"unknown unk_policy {self.unk_policy!r}; "
                f"expected one of {UNK_POLICIES}")

    def lookup(self, token: str) -> np.ndarray:
        idx = self.vocab.get(token)
        if idx is not None:
            return self.vectors[idx]
        if self.unk_policy == "zero":
            return np.zeros(self.dim, dtype=np.float64)
        return hash_vector(token, self.dim)

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def __len__(self) -> int:
        return len(self.vocab)


def hash_vector(token: str, dim: int) -> np.ndarray:
    """Deterministic pseudo-random unit-scale vector for an OOV token."""
    digest = hashlib.md5(token.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    rng = np.random.default_rng(seed)
    return rng.standard_normal(dim) / np.sqrt(dim)


def load_embeddings(path, expected_dim: int | None = None,
                    unk_policy: str = "zero") -> EmbeddingTable:
    """Parse a text word-vector file; duplicate tokens keep first occurrence."""
    vocab: dict[str, int] = {}
    rows: list[np.ndarray] = []
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            if line_no == 1 and len(parts) == 2 and _all_int(parts):
                dim = int(parts[1])
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                if not values:
                    raise ParseError("vector row has no values", path=path,
                                     line=line_no)
                dim = len(values)
            if len(values) != dim:
                raise ParseError(
                    f"vector for {token!r} has width {len(values)}, "
                    f"expected {dim}", path=path, line=line_no)
            if token in vocab:
                continue
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise ParseError(f"non-numeric value in vector for {token!r}",
                                 path=path, line=line_no) from None
            vocab[token] = len(rows)
            rows.append(vec)
    if dim is None:
        raise ParseError("embedding file is empty", path=path)
    if expected_dim is not None and dim != expected_dim:
        raise ConfigError(
            f"embedding dimension {dim} does not match expected "
            f"{expected_dim}")
    vectors = (np.vstack(rows) if rows
               else np.zeros((0, dim), dtype=np.float64))
    return EmbeddingTable(dim=dim, vocab=vocab, vectors=vectors,
                          unk_policy=unk_policy)


def _all_int(parts: Iterable[str]) -> bool:
    try:
        [int(p) for p in parts]
        return True
    except ValueError:
        return False


def write_embeddings(table: EmbeddingTable, path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(table.vocab)} {table.dim}\n")
        for token, idx in table.vocab.items():
            values = " ".join(repr(float(v)) for v in table.vectors[idx])
            fh.write(f"{token} {values}\n")


# ---------------------------------------------------------------------------
# padding paragraphs into dense blocks
# ---------------------------------------------------------------------------

@dataclass
class EmbeddedParagraph:
    """A paragraph as a zero-padded (clauses, words, dim) value block."""
    D: np.ndarray                 # (c, w, d)
    word_mask: np.ndarray         # (c, w) bool
    clause_mask: np.ndarray       # (c,) bool
    label_ids: np.ndarray         # (c,) int64, -1 where absent/padded
    n_clauses: int
    paragraph_id: str = ""
    tokens: list[list[str]] = field(default_factory=list)

    @property
    def has_labels(self) -> bool:
        return bool((self.label_ids[:self.n_clauses] >= 0).all())


def embed_paragraph(p: Paragraph, table: EmbeddingTable,
                    max_clauses: int | None = None,
                    max_words: int | None = None,
                    truncate: bool = False) -> EmbeddedParagraph:
    """Embed and zero-pad one paragraph.

    Padded positions carry exactly-zero vectors and False masks. OOV tokens
    are resolved by the table's unk policy and stay unmasked (they are real
    words). Overflow beyond max_clauses/max_words raises unless `truncate`.
    """
    n_clauses = len(p.clauses)
    if n_clauses == 0:
        raise CapacityError(f"paragraph {p.id!r} has no clauses")
    c = max_clauses if max_clauses is not None else n_clauses
    widest = max(len(cl.tokens) for cl in p.clauses)
    w = max_words if max_words is not None else widest

    if n_clauses > c:
        if not truncate:
            raise CapacityError(
                f"paragraph {p.id!r} has {n_clauses} clauses, limit {c}")
        warnings.warn(f"truncating paragraph {p.id!r} to {c} clauses")
        n_clauses = c
    if widest > w and not truncate:
        raise CapacityError(
            f"paragraph {p.id!r} has a {widest}-word clause, limit {w}")

    D = np.zeros((c, w, table.dim), dtype=np.float64)
    word_mask = np.zeros((c, w), dtype=bool)
    clause_mask = np.zeros(c, dtype=bool)
    label_ids = np.full(c, -1, dtype=np.int64)
    kept_tokens: list[list[str]] = []

    for i in range(n_clauses):
        cl = p.clauses[i]
        toks = cl.tokens
        if len(toks) > w:
            warnings.warn(
                f"truncating clause {i} of paragraph {p.id!r} to {w} words")
            toks = toks[:w]
        clause_mask[i] = True
        kept_tokens.append(list(toks))
        for j, tok in enumerate(toks):
            D[i, j, :] = table.lookup(tok)
            word_mask[i, j] = True
        if cl.gold is not None:
            label_ids[i] = LABEL_TO_INDEX[cl.gold]

    return EmbeddedParagraph(D=D, word_mask=word_mask,
                             clause_mask=clause_mask, label_ids=label_ids,
                             n_clauses=n_clauses, paragraph_id=p.id,
                             tokens=kept_tokens)


def corpus_maxima(paragraphs) -> tuple[int, int]:
    """(max clause count, max clause width) over a corpus."""
    max_c = max(len(p.clauses) for p in paragraphs)
    max_w = max(len(cl.tokens) for p in paragraphs for cl in p.clauses)
    return max_c, max_w
