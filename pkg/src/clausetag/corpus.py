"""Corpus data model and line-oriented corpus I/O.

File format (UTF-8, one clause per line):

    #id: p17
    goal\tTo examine the role of X in Y ,
    method\twe performed a pulldown assay .

    #id: p18
    result\tphosphorylation was strongly reduced ( Fig. 2B )

Blank lines separate paragraphs. The label field may be empty for unlabeled
clauses. Anything after a second tab is ignored on read, which leaves room
for an optional probability column in tagged output. Lines starting with '#'
other than '#id:' are comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ParseError

LABELS = ("goal", "fact", "result", "hypothesis", "method",
          "problem", "implication", "none")
LABEL_TO_INDEX = {name: i for i, name in enumerate(LABELS)}
N_LABELS = len(LABELS)

TOKENIZER_VERSION = "lower-ws-punct-1"

_TOKEN_RE = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")


def canonical_label(name: str) -> str:
    """Case-insensitive label lookup; returns the canonical lowercase name."""
    low = name.strip().lower()
    if low not in LABEL_TO_INDEX:
        raise ValueError(f"unknown label {name!r}")
    return low


def position_bucket(index: int, n_clauses: int) -> int:
    """Fifth of the paragraph a clause falls into: floor(5 * i / n)."""
    return (5 * index) // n_clauses


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace and punctuation boundaries.

    Alphanumeric runs stay together ('fig' '.' '3a'); every punctuation
    character becomes its own token.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Clause:
    tokens: list[str]
    gold: str | None = None
    raw_text: str = ""

    @classmethod
    def from_text(cls, text: str, gold: str | None = None) -> "Clause":
        return cls(tokens=tokenize(text), gold=gold, raw_text=text)


@dataclass
class Paragraph:
    id: str
    clauses: list[Clause] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.clauses)

    @property
    def labels(self) -> list[str | None]:
        return [cl.gold for cl in self.clauses]

    def is_labeled(self) -> bool:
        return all(cl.gold is not None for cl in self.clauses)


# ---------------------------------------------------------------------------
# reading / writing
# ---------------------------------------------------------------------------

def load_corpus(path) -> list[Paragraph]:
    """Parse a corpus file into paragraphs, validating labels and ids."""
    paragraphs: list[Paragraph] = []
    seen_ids: set[str] = set()
    pending_id: str | None = None
    current: list[Clause] = []

    def flush(line_no):
        nonlocal pending_id, current
        if not current:
            if pending_id is not None:
                raise ParseError(f"paragraph {pending_id!r} has no clauses",
                                 path=path, line=line_no)
            return
        pid = pending_id if pending_id is not None else f"p{len(paragraphs)}"
        if pid in seen_ids:
            raise ParseError(f"duplicate paragraph id {pid!r}",
                             path=path, line=line_no)
        seen_ids.add(pid)
        paragraphs.append(Paragraph(id=pid, clauses=current))
        pending_id = None
        current = []

    with open(path, encoding="utf-8") as fh:
        line_no = 0
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.strip() == "":
                flush(line_no)
                continue
            if line.startswith("#"):
                if line.startswith("#id:"):
                    if current:
                        flush(line_no)
                    pending_id = line[len("#id:"):].strip()
                    if not pending_id:
                        raise ParseError("empty paragraph id", path=path,
                                         line=line_no)
                continue
            if "\t" not in line:
                raise ParseError(
                    "expected '<label>\\t<clause text>'", path=path,
                    line=line_no)
            fields = line.split("\t")
            label_field, text = fields[0], fields[1]
            if not text.strip():
                raise ParseError("empty clause text", path=path, line=line_no)
            gold = None
            if label_field.strip():
                try:
                    gold = canonical_label(label_field)
                except ValueError:
                    raise ParseError(
                        f"unknown label {label_field.strip()!r}",
                        path=path, line=line_no) from None
            clause = Clause.from_text(text, gold=gold)
            if not clause.tokens:
                raise ParseError("clause has no tokens", path=path,
                                 line=line_no)
            current.append(clause)
        flush(line_no + 1)
    return paragraphs


def format_corpus(paragraphs: Iterable[Paragraph],
                  probabilities=None) -> str:
    """Render paragraphs in canonical form.

    `probabilities` optionally maps paragraph id -> per-clause floats written
    as a third column (ignored by the parser on read).
    """
    blocks = []
    for p in paragraphs:
        lines = [f"#id: {p.id}"]
        probs = probabilities.get(p.id) if probabilities else None
        for j, cl in enumerate(p.clauses):
            text = cl.raw_text if cl.raw_text else " ".join(cl.tokens)
            text = text.replace("\t", " ").replace("\n", " ")
            label = cl.gold if cl.gold is not None else ""
            line = f"{label}\t{text}"
            if probs is not None:
                line += f"\t{probs[j]:.6f}"
            lines.append(line)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n" if blocks else ""


def write_corpus(paragraphs: Iterable[Paragraph], path,
                 probabilities=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_corpus(paragraphs, probabilities=probabilities))


# ---------------------------------------------------------------------------
# cross-validation folds
# ---------------------------------------------------------------------------

@dataclass
class FoldSplit:
    """Paragraph-level fold assignment (never by clause)."""
    k: int
    assignments: dict[str, int]
    validation_fraction: float = 0.1

    def fold_ids(self, fold: int) -> list[str]:
        return [pid for pid, f in self.assignments.items() if f == fold]

    def split(self, corpus: Sequence[Paragraph],
              fold: int) -> tuple[list[Paragraph], list[Paragraph]]:
        """(train, held-out) paragraphs for one fold, in corpus order."""
        train = [p for p in corpus if self.assignments[p.id] != fold]
        test = [p for p in corpus if self.assignments[p.id] == fold]
        return train, test


def make_folds(corpus: Sequence[Paragraph], k: int, seed: int,
               validation_fraction: float = 0.1) -> FoldSplit:
    """Deterministic shuffle by seed, then round-robin fold assignment."""
    if k < 2:
        raise ConfigError(f"fold count must be >= 2, got {k}")
    if k > len(corpus):
        raise ConfigError(
            f"fold count {k} exceeds corpus size {len(corpus)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(corpus))
    assignments = {corpus[int(j)].id: int(pos % k)
                   for pos, j in enumerate(order)}
    return FoldSplit(k=k, assignments=assignments,
                     validation_fraction=validation_fraction)


def split_validation(paragraphs: Sequence[Paragraph], fraction: float,
                     seed: int) -> tuple[list[Paragraph], list[Paragraph]]:
    """Hold out ~fraction of paragraphs (at least 1) for early stopping."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(
            f"validation fraction must be in (0, 1), got {fraction}")
    if len(paragraphs) < 2:
        raise ConfigError("need at least 2 paragraphs to split validation")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(paragraphs))
    n_val = max(1, int(round(fraction * len(paragraphs))))
    if n_val >= len(paragraphs):
        n_val = len(paragraphs) - 1
    val_idx = set(int(i) for i in order[:n_val])
    train = [p for i, p in enumerate(paragraphs) if i not in val_idx]
    val = [p for i, p in enumerate(paragraphs) if i in val_idx]
    return train, val
