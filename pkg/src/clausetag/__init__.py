"""Clause-level discourse tagging for experiment narratives.

Two sequence labelers over paragraph clause sequences: an LSTM tagger whose
clause vectors come from attention-weighted sums of word embeddings, and a
feature-based linear-chain CRF baseline. Both expose a scikit-learn style
fit/predict API.
"""

from .corpus import (LABELS, Clause, FoldSplit, Paragraph, load_corpus,
                     make_folds, tokenize, write_corpus)
from .crf import CrfDiscourseTagger, Lexicon
from .embeddings import (EmbeddedParagraph, EmbeddingTable, embed_paragraph,
                         load_embeddings)
from .errors import ClauseTagError
from .evaluation import (MetricsReport, cross_validate, position_stats,
                         score_paragraphs, score_sequences)
from .tagger import LstmDiscourseTagger, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "LABELS",
    "Clause",
    "ClauseTagError",
    "CrfDiscourseTagger",
    "EmbeddedParagraph",
    "EmbeddingTable",
    "FoldSplit",
    "Lexicon",
    "LstmDiscourseTagger",
    "MetricsReport",
    "Paragraph",
    "TrainConfig",
    "cross_validate",
    "embed_paragraph",
    "load_corpus",
    "load_embeddings",
    "make_folds",
    "position_stats",
    "score_paragraphs",
    "score_sequences",
    "tokenize",
    "write_corpus",
    "__version__",
]
