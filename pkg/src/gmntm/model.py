"""Trainable state: embedding tables, prediction weights, word softmax."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gmm
from .corpus import Corpus, Vocabulary

# Feature row layout inside the stacked prediction-weight tensor:
# row 0 = document, row 1 = sentence, row 2+t-1 = context offset t
# (t = 1 is the immediately preceding word).
DOC_ROW = 0
SEN_ROW = 1
CTX_BASE = 2


@dataclass
class EmbeddingTable:
    word_vecs: np.ndarray   # (W, V)
    sent_vecs: np.ndarray   # (S, V)
    doc_vecs: np.ndarray    # (D, V)

    @property
    def dim(self) -> int:
        return self.word_vecs.shape[1]

    def pooled(self) -> np.ndarray:
        """All vectors stacked: words, then sentences, then documents."""
        return np.concatenate([self.word_vecs, self.sent_vecs, self.doc_vecs])


@dataclass
class PredictionWeights:
    """Per-word output parameters.

    ``u`` stacks the document row, the sentence row and one row per
    context offset into a single (2 + m, W, V) tensor; ``bias`` is (W,).
    """

    u: np.ndarray
    bias: np.ndarray

    @property
    def m(self) -> int:
        return self.u.shape[0] - 2

    @property
    def u_doc(self) -> np.ndarray:
        return self.u[DOC_ROW]

    @property
    def u_sen(self) -> np.ndarray:
        return self.u[SEN_ROW]

    def u_ctx(self, t: int) -> np.ndarray:
        """Weights for the t-th previous word, t in 1..m."""
        return self.u[CTX_BASE + t - 1]


@dataclass
class TrainConfig:
    topics: int = 128
    dim: int = 128
    context: int = 6                 # max previous words m
    lr: float = 0.025
    lr_end: float = 0.0001
    outer_iters: int = 10
    passes: int = 1                  # stage-II passes per alternation
    em_max_iters: int = 100
    em_tol: float = 1e-4
    prior_weight: float | None = None   # None: 1.0 (prior counted once per vector per pass)
    cov_mode: str = "diagonal"
    var_floor: float = 1e-4
    sigma_init: float = 0.01
    seed: int = 0
    grad_mode: str = "exact"         # "exact" | "negative-sampling"
    neg_samples: int = 10
    weight_decay: float = 0.0
    # Max update-step norm per parameter vector; 0 disables. The variance
    # floor makes the prior gradient stiff right after init (step factor
    # lr*rho/var >> 1), so unclipped first-pass updates oscillate.
    clip_step: float = 0.25

    def validate(self) -> None:
        if self.topics < 1 or self.dim < 1 or self.context < 1:
            raise ValueError("topics, dim and context must be >= 1")
        if not (self.lr >= self.lr_end > 0):
            raise ValueError("need lr >= lr_end > 0")
        if self.prior_weight is not None and self.prior_weight < 0:
            raise ValueError("prior_weight must be >= 0")
        if self.cov_mode not in ("diagonal", "full"):
            raise ValueError(f"unknown covariance mode {self.cov_mode!r}")
        if self.grad_mode not in ("exact", "negative-sampling"):
            raise ValueError(f"unknown gradient mode {self.grad_mode!r}")


@dataclass
class ModelState:
    embeddings: EmbeddingTable
    weights: PredictionWeights
    mixture: gmm.GmmParams
    config: TrainConfig
    vocab: Vocabulary
    prior_weight: float = 0.0        # resolved rho actually used in training
    gmm_fitted: bool = False
    objective_trace: list = field(default_factory=list)

    @property
    def vocab_size(self) -> int:
        return self.embeddings.word_vecs.shape[0]

    def check_ids(self, doc_id: int, sent_id: int, context) -> None:
        emb = self.embeddings
        if not (0 <= doc_id < emb.doc_vecs.shape[0]):
            raise IndexError(f"document id {doc_id} out of range")
        if not (0 <= sent_id < emb.sent_vecs.shape[0]):
            raise IndexError(f"sentence id {sent_id} out of range")
        for w in context:
            if not (0 <= w < emb.word_vecs.shape[0]):
                raise IndexError(f"word id {w} out of range")

    def feature_matrix(self, doc_id: int, sent_id: int, context) -> np.ndarray:
        """Stacked input vectors: document, sentence, then context words
        (nearest predecessor first, matching offset rows)."""
        emb = self.embeddings
        rows = [emb.doc_vecs[doc_id], emb.sent_vecs[sent_id]]
        for t in range(1, len(context) + 1):
            rows.append(emb.word_vecs[context[-t]])
        return np.asarray(rows)


def all_scores(
    state: ModelState, doc_id: int, sent_id: int, context
) -> np.ndarray:
    """Softmax logits for every vocabulary word at this slot."""
    m = state.weights.m
    if len(context) > m:
        raise ValueError(f"context longer than m={m}")
    state.check_ids(doc_id, sent_id, context)
    feats = state.feature_matrix(doc_id, sent_id, context)
    scores = state.weights.bias.copy()
    for row in range(feats.shape[0]):
        scores += state.weights.u[row] @ feats[row]
    return scores


def score(
    state: ModelState, word: int, doc_id: int, sent_id: int, context
) -> float:
    """Logit of one word: a_doc + a_sen + sum_t a_t + bias."""
    if not (0 <= word < state.vocab_size):
        raise IndexError(f"word id {word} out of range")
    state.check_ids(doc_id, sent_id, context)
    emb = state.embeddings
    wts = state.weights
    total = wts.bias[word]
    total += wts.u_doc[word] @ emb.doc_vecs[doc_id]
    total += wts.u_sen[word] @ emb.sent_vecs[sent_id]
    for t in range(1, len(context) + 1):
        total += wts.u_ctx(t)[word] @ emb.word_vecs[context[-t]]
    return float(total)


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    e = np.exp(shifted)
    return e / e.sum()


def word_distribution(
    state: ModelState, doc_id: int, sent_id: int, context
) -> np.ndarray:
    """Softmax over all vocabulary words; positive, sums to 1."""
    return softmax(all_scores(state, doc_id, sent_id, context))


def init_model(
    config: TrainConfig, corpus: Corpus, rng: np.random.Generator
) -> ModelState:
    """Fresh state: small-Gaussian embeddings, all-zero prediction weights,
    standard-normal mixture components."""
    config.validate()
    W = len(corpus.vocab)
    S = corpus.num_sentences
    D = corpus.num_documents
    V = config.dim
    emb = EmbeddingTable(
        word_vecs=rng.normal(0.0, config.sigma_init, (W, V)),
        sent_vecs=rng.normal(0.0, config.sigma_init, (S, V)),
        doc_vecs=rng.normal(0.0, config.sigma_init, (D, V)),
    )
    wts = PredictionWeights(
        u=np.zeros((2 + config.context, W, V)),
        bias=np.zeros(W),
    )
    mixture = gmm.standard_normal_params(config.topics, V, config.cov_mode)
    rho = 1.0 if config.prior_weight is None else config.prior_weight
    return ModelState(
        embeddings=emb,
        weights=wts,
        mixture=mixture,
        config=config,
        vocab=corpus.vocab,
        prior_weight=rho,
    )
