import time

import numpy as np
import pytest

from _synthetic import make_cue_corpus, make_embeddings


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture(scope="session")
def overfit_run():
    """Recurrent tagger overfit on the 20-paragraph cue corpus.

    Shared by the acceptance criteria (learnability, attention focus,
    reproducibility) and the CLI attention export test; validating on the
    training set keeps the best snapshot improving until it has memorized
    the corpus.
    """
    from clausetag.tagger import LstmDiscourseTagger
    corpus = make_cue_corpus(n_paragraphs=20, seed=101)
    table = make_embeddings(corpus, dim=16, seed=101)
    est = LstmDiscourseTagger(embeddings=table, variant="recurrent",
                              projection_dim=8, hidden_size=16,
                              max_epochs=200, patience=200, dropout_p=0.5,
                              learning_rate=0.01, batch_size=10, seed=0)
    start = time.perf_counter()
    est.fit(corpus, X_val=corpus)
    elapsed = time.perf_counter() - start
    return est, corpus, table, elapsed
