"""Input validation and coercion helpers for the estimator API."""

from __future__ import annotations

from typing import Sequence

from .corpus import Clause, Paragraph, canonical_label
from .errors import DataError


def as_paragraphs(X, y=None, require_labels: bool = False,
                  id_prefix: str = "p") -> list[Paragraph]:
    """Coerce estimator input into a list of Paragraph objects.

    Accepts Paragraph objects, or raw nested sequences where each paragraph
    is a sequence of clauses and each clause is either a string or a token
    list. Optional `y` supplies one label sequence per paragraph and
    overrides any embedded gold labels.
    """
    if y is not None and len(y) != len(X):
        raise DataError(
            f"got {len(X)} paragraphs but {len(y)} label sequences")
    out: list[Paragraph] = []
    for i, item in enumerate(X):
        if isinstance(item, Paragraph):
            para = item
        else:
            para = _coerce_paragraph(item, f"{id_prefix}{i}")
        if y is not None:
            labels = y[i]
            if len(labels) != len(para.clauses):
                raise DataError(
                    f"paragraph {para.id!r}: {len(para.clauses)} clauses "
                    f"but {len(labels)} labels")
            para = Paragraph(id=para.id, clauses=[
                Clause(tokens=cl.tokens, gold=canonical_label(lb),
                       raw_text=cl.raw_text)
                for cl, lb in zip(para.clauses, labels)])
        out.append(para)
    if require_labels:
        for para in out:
            for j, cl in enumerate(para.clauses):
                if cl.gold is None:
                    raise DataError(
                        f"paragraph {para.id!r} clause {j} has no gold label")
    if not out:
        raise DataError("empty input: need at least one paragraph")
    return out


def _coerce_paragraph(item, pid: str) -> Paragraph:
    if isinstance(item, str):
        raise DataError(
            "a paragraph must be a sequence of clauses, not a bare string")
    clauses = []
    for part in item:
        if isinstance(part, str):
            clauses.append(Clause.from_text(part))
        elif isinstance(part, Sequence):
            tokens = [str(t).lower() for t in part]
            if not tokens:
                raise DataError(f"paragraph {pid!r} has an empty clause")
            clauses.append(Clause(tokens=tokens, raw_text=" ".join(tokens)))
        else:
            raise DataError(
                f"cannot interpret clause of type {type(part).__name__}")
    if not clauses:
        raise DataError(f"paragraph {pid!r} has no clauses")
    return Paragraph(id=pid, clauses=clauses)


def check_is_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise DataError(
            f"{type(estimator).__name__} is not fitted yet; call fit first")
