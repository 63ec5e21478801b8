"""Held-out inference, topic posteriors, slot topics and perplexity."""

import math

import mpmath
import numpy as np
import pytest

from gmntm import gmm
from gmntm import inference as I
from gmntm import model as M
from gmntm import training as T

from conftest import make_tiny_corpus, make_random_state, random_mixture

mpmath.mp.dps = 50


def zero_u_state(corpus, **kw):
    state = make_random_state(corpus, **kw)
    state.weights.u[:] = 0.0
    state.weights.bias[:] = 0.0
    return state


def schedule(n=100):
    return T.LrSchedule(0.025, 0.0001, n)


# ---------------------------------------------------------------------------
# infer_heldout
# ---------------------------------------------------------------------------

def test_zero_u_log_probs_uniform(tiny_corpus):
    state = zero_u_state(tiny_corpus)
    W = len(tiny_corpus.vocab)
    fit = I.infer_heldout(state, [[1, 2, 3], [4, 5]], schedule(), passes=2,
                          rng=np.random.default_rng(0))
    assert fit.log_probs == pytest.approx(np.full(5, -math.log(W)))


def test_zero_passes_scores_at_random_init(tiny_corpus):
    state = make_random_state(tiny_corpus)
    rng1 = np.random.default_rng(3)
    fit = I.infer_heldout(state, [[1, 2]], schedule(), passes=0, rng=rng1)
    rng2 = np.random.default_rng(3)
    doc_vec = rng2.normal(0.0, state.config.sigma_init, state.embeddings.dim)
    assert fit.doc_vec == pytest.approx(doc_vec)
    assert fit.n_tokens == 2 and fit.n_scored == 2


def test_oov_targets_not_scored(tiny_corpus):
    state = zero_u_state(tiny_corpus)
    fit = I.infer_heldout(state, [[0, 1, 0, 2]], schedule(), passes=1,
                          rng=np.random.default_rng(0))
    assert fit.n_tokens == 4
    assert fit.n_scored == 2


def test_empty_heldout_document_rejected(tiny_corpus):
    state = make_random_state(tiny_corpus)
    with pytest.raises(ValueError):
        I.infer_heldout(state, [[]], schedule(), passes=1,
                        rng=np.random.default_rng(0))


def test_duplicated_training_document_scores_close():
    # Documents are long relative to the free vector parameters so the
    # fresh held-out fit cannot overshoot the training document's own fit.
    corpus = make_tiny_corpus(n_docs=8, n_sent=4, sent_len=15)
    cfg = M.TrainConfig(topics=2, dim=3, context=2, outer_iters=20, passes=2,
                        sigma_init=1.0, prior_weight=0.0, weight_decay=0.1,
                        seed=1)
    state = T.train(corpus, cfg)
    doc = corpus.documents[0]
    # Training document's own mean log-probability under the trained model.
    own = []
    for slot in corpus.slots():
        if slot.doc_id != doc.doc_id or slot.word == 0:
            continue
        ctx = slot_context(corpus, slot, cfg.context)
        p = M.word_distribution(state, slot.doc_id, slot.sent_id, ctx)
        own.append(math.log(p[slot.word]))
    sched = T.LrSchedule(0.05, 0.0001, 60 * 100)
    fit = I.infer_heldout(state, doc.sentences, sched, passes=100,
                          rng=np.random.default_rng(2))
    assert abs(fit.log_probs.mean() - np.mean(own)) < 0.1


def slot_context(corpus, slot, m):
    from gmntm.corpus import context_window
    return context_window(corpus, slot, m)


# ---------------------------------------------------------------------------
# topic_posterior / slot_topic
# ---------------------------------------------------------------------------

def test_topic_posterior_single_component():
    p = gmm.standard_normal_params(1, 2)
    assert I.topic_posterior(np.ones(2), p) == pytest.approx([1.0])


def test_topic_posterior_equidistant_symmetric():
    p = gmm.GmmParams(weights=np.array([0.5, 0.5]),
                      means=np.array([[-2.0], [2.0]]),
                      covariances=np.ones((2, 1)),
                      mode="diagonal")
    assert I.topic_posterior(np.zeros(1), p) == pytest.approx([0.5, 0.5])


def test_topic_posterior_matches_responsibilities():
    rng = np.random.default_rng(5)
    params = random_mixture(rng, 4, 3)
    x = rng.normal(0.0, 1.0, 3)
    assert np.array_equal(I.topic_posterior(x, params),
                          gmm.responsibilities(x, params))


def test_slot_topic_single_component(tiny_corpus):
    state = make_random_state(tiny_corpus, topics=1, dim=3)
    assert I.slot_topic(1, 0, 0, state) == pytest.approx([1.0])


def test_slot_topic_uniform_factors_cancel(tiny_corpus):
    state = make_random_state(tiny_corpus, topics=2, dim=3)
    # Symmetric mixture; zero vectors have uniform posteriors.
    state.mixture = gmm.GmmParams(weights=np.array([0.5, 0.5]),
                                  means=np.array([[-1.0, 0, 0], [1.0, 0, 0]]),
                                  covariances=np.ones((2, 3)),
                                  mode="diagonal")
    state.embeddings.sent_vecs[0][:] = 0.0
    state.embeddings.doc_vecs[0][:] = 0.0
    want = I.topic_posterior(state.embeddings.word_vecs[1], state.mixture)
    assert I.slot_topic(1, 0, 0, state) == pytest.approx(want)


def test_slot_topic_matches_product_oracle(tiny_corpus):
    state = make_random_state(tiny_corpus, topics=4, dim=3)
    emb = state.embeddings
    got = I.slot_topic(2, 1, 0, state)
    qs = [gmm.responsibilities(emb.word_vecs[2], state.mixture),
          gmm.responsibilities(emb.sent_vecs[1], state.mixture),
          gmm.responsibilities(emb.doc_vecs[0], state.mixture)]
    prod = [mpmath.mpf(float(qs[0][k])) * mpmath.mpf(float(qs[1][k]))
            * mpmath.mpf(float(qs[2][k])) for k in range(4)]
    z = sum(prod)
    want = np.array([float(v / z) for v in prod])
    assert got == pytest.approx(want, abs=1e-12)


def test_slot_topic_normalizes(tiny_corpus):
    state = make_random_state(tiny_corpus, topics=3, dim=3)
    p = I.slot_topic(1, 1, 1, state)
    assert abs(p.sum() - 1.0) < 1e-9 and np.all(p >= 0)


# ---------------------------------------------------------------------------
# perplexity
# ---------------------------------------------------------------------------

def test_zero_u_perplexity_is_vocab_size(tiny_corpus):
    state = zero_u_state(tiny_corpus)
    W = len(tiny_corpus.vocab)
    ppl, n = I.perplexity(state, [[[1, 2, 3]], [[4, 5]]], schedule(),
                          passes=2, rng=np.random.default_rng(0))
    assert ppl == pytest.approx(W)
    assert n == 5


def test_perfect_predictor_perplexity_one(tiny_corpus):
    state = zero_u_state(tiny_corpus)
    state.weights.bias[1] = 700.0  # softmax saturates at word 1
    ppl, _ = I.perplexity(state, [[[1, 1, 1]]], schedule(), passes=0,
                          rng=np.random.default_rng(0))
    assert ppl == pytest.approx(1.0)


def test_perplexity_formula_arithmetic():
    # Tokens with log-probs {-1,-1} and {-2} must give exp(4/3).
    total, n = (-1.0) + (-1.0) + (-2.0), 3
    assert math.exp(-total / n) == pytest.approx(math.exp(4 / 3))


def test_perplexity_document_order_invariant(tiny_corpus):
    state = zero_u_state(tiny_corpus)
    docs = [[[1, 2]], [[3, 4, 5]]]
    p1, _ = I.perplexity(state, docs, schedule(), passes=1,
                         rng=np.random.default_rng(0))
    p2, _ = I.perplexity(state, docs[::-1], schedule(), passes=1,
                         rng=np.random.default_rng(0))
    assert p1 == pytest.approx(p2)


def test_perplexity_rejects_all_oov(tiny_corpus):
    state = zero_u_state(tiny_corpus)
    with pytest.raises(ValueError):
        I.perplexity(state, [[[0, 0]]], schedule(), passes=0,
                     rng=np.random.default_rng(0))
