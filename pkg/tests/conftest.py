"""Shared fixtures: synthetic corpora and small random models."""

import numpy as np
import pytest

from gmntm import corpus as C
from gmntm import gmm
from gmntm import model as M


def make_planted_docs(seed=7, n_docs=400, n_sent=5, sent_len=8, n_words=50):
    """Two-topic corpus with disjoint vocabularies a0..a49 / b0..b49."""
    rng = np.random.default_rng(seed)
    wa = [f"a{i}" for i in range(n_words)]
    wb = [f"b{i}" for i in range(n_words)]
    docs = []
    for d in range(n_docs):
        pool = wa if d % 2 == 0 else wb
        sents = [
            [pool[rng.integers(n_words)] for _ in range(sent_len)]
            for _ in range(n_sent)
        ]
        docs.append((f"t{d % 2}", sents))
    return docs, set(wa), set(wb)


def make_planted_corpus(**kw):
    docs, wa, wb = make_planted_docs(**kw)
    vocab = C.build_vocabulary([s for _, sents in docs for s in sents])
    return C.encode_corpus(docs, vocab), wa, wb


def make_tiny_corpus(seed=0, n_docs=6, n_sent=3, sent_len=5, n_words=12):
    """Small unlabeled corpus for fast unit tests."""
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(n_words)]
    docs = []
    for _ in range(n_docs):
        sents = [
            [words[rng.integers(n_words)] for _ in range(sent_len)]
            for _ in range(n_sent)
        ]
        docs.append((None, sents))
    vocab = C.build_vocabulary([s for _, sents in docs for s in sents])
    return C.encode_corpus(docs, vocab)


def make_random_state(corpus, seed=0, dim=3, topics=2, m=2, sigma=0.5, **kw):
    """Model with random (nonzero) weights for gradient/oracle tests."""
    cfg = M.TrainConfig(topics=topics, dim=dim, context=m, sigma_init=1.0,
                        seed=seed, **kw)
    rng = np.random.default_rng(seed)
    state = M.init_model(cfg, corpus, rng)
    W = len(corpus.vocab)
    state.weights.u = rng.normal(0.0, sigma, (2 + m, W, dim))
    state.weights.bias = rng.normal(0.0, sigma, W)
    state.mixture = random_mixture(rng, topics, dim)
    state.gmm_fitted = True
    return state


def random_mixture(rng, T, V, mode="diagonal"):
    w = rng.random(T) + 0.1
    w /= w.sum()
    means = rng.normal(0.0, 1.0, (T, V))
    if mode == "diagonal":
        cov = rng.random((T, V)) + 0.2
    else:
        cov = np.empty((T, V, V))
        for k in range(T):
            a = rng.normal(0.0, 1.0, (V, V + 2))
            cov[k] = a @ a.T / (V + 2) + 0.1 * np.eye(V)
    return gmm.GmmParams(weights=w, means=means, covariances=cov, mode=mode)


@pytest.fixture
def tiny_corpus():
    return make_tiny_corpus()


@pytest.fixture
def tiny_state(tiny_corpus):
    return make_random_state(tiny_corpus)
