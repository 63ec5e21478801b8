"""Held-out inference under a frozen model, topic posteriors, perplexity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gmm
from .corpus import OOV_ID
from .model import CTX_BASE, DOC_ROW, SEN_ROW, ModelState, softmax


@dataclass
class HeldoutFit:
    doc_vec: np.ndarray
    sent_vecs: np.ndarray          # (n_sentences, V)
    log_probs: np.ndarray          # per scored (non-OOV) slot, <= 0 up to fp
    n_scored: int
    n_tokens: int


def _doc_slots(sentences: list[list[int]], m: int):
    """(sent_index, pos, word, context) for every slot of one document."""
    out = []
    for si, sent in enumerate(sentences):
        for i, w in enumerate(sent):
            out.append((si, i, w, sent[max(0, i - m): i]))
    return out


def _heldout_scores(state, doc_vec, sent_vec, context):
    wts = state.weights
    scores = wts.bias + wts.u[DOC_ROW] @ doc_vec + wts.u[SEN_ROW] @ sent_vec
    for t in range(1, len(context) + 1):
        scores = scores + wts.u[CTX_BASE + t - 1] @ state.embeddings.word_vecs[context[-t]]
    return scores


def infer_heldout(
    state: ModelState,
    doc: list[list[int]],
    schedule,
    passes: int,
    rng: np.random.Generator,
    rho: float | None = None,
) -> HeldoutFit:
    """Fit fresh document and sentence vectors for one encoded document.

    Prediction weights, the mixture, and all word vectors stay frozen; SGD
    touches only the new vectors. Predictive log-probabilities are then
    computed under the frozen softmax; OOV targets are not scored.
    """
    if not doc or all(len(s) == 0 for s in doc):
        raise ValueError("held-out document is empty")
    if rho is None:
        rho = state.prior_weight
    cfg = state.config
    V = state.embeddings.dim
    doc_vec = rng.normal(0.0, cfg.sigma_init, V)
    sent_vecs = rng.normal(0.0, cfg.sigma_init, (len(doc), V))
    slots = _doc_slots(doc, cfg.context)

    # Prior counted once per vector per pass, as in training.
    doc_w = 1.0 / max(len(slots), 1)
    sent_w = np.array([1.0 / max(len(s), 1) for s in doc])
    n = 0
    for _ in range(passes):
        order = rng.permutation(len(slots))
        for j in order:
            si, _, w, context = slots[j]
            scores = _heldout_scores(state, doc_vec, sent_vecs[si], context)
            p = softmax(scores)
            wts = state.weights
            g_doc = wts.u[DOC_ROW][w] - p @ wts.u[DOC_ROW]
            g_sen = wts.u[SEN_ROW][w] - p @ wts.u[SEN_ROW]
            if rho != 0.0:
                g_doc = g_doc + rho * doc_w * gmm.log_density_grad(doc_vec, state.mixture)
                g_sen = g_sen + rho * sent_w[si] * gmm.log_density_grad(sent_vecs[si], state.mixture)
            lr = schedule.rate(n)
            doc_vec += lr * g_doc
            sent_vecs[si] += lr * g_sen
            n += 1

    log_probs = []
    for si, _, w, context in slots:
        if w == OOV_ID:
            continue
        scores = _heldout_scores(state, doc_vec, sent_vecs[si], context)
        shifted = scores - scores.max()
        log_probs.append(float(shifted[w] - np.log(np.exp(shifted).sum())))
    return HeldoutFit(
        doc_vec=doc_vec,
        sent_vecs=sent_vecs,
        log_probs=np.asarray(log_probs),
        n_scored=len(log_probs),
        n_tokens=len(slots),
    )


def topic_posterior(x: np.ndarray, params: gmm.GmmParams) -> np.ndarray:
    """Posterior over topics for any embedding vector."""
    return gmm.responsibilities(x, params)


def slot_topic(
    word: int, sent_id: int, doc_id: int, state: ModelState
) -> np.ndarray:
    """Topic distribution of one slot: renormalized product of the word,
    sentence and document posteriors, computed in log space.

    Falls back (with a warning) to a softmax over the summed log posteriors
    if the product underflows entirely.
    """
    emb = state.embeddings
    lw = gmm.log_responsibilities(emb.word_vecs[word], state.mixture)
    ls = gmm.log_responsibilities(emb.sent_vecs[sent_id], state.mixture)
    ld = gmm.log_responsibilities(emb.doc_vecs[doc_id], state.mixture)
    total = lw + ls + ld
    finite = np.isfinite(total)
    if not finite.any():
        import warnings

        warnings.warn("slot topic product underflowed; using softmax fallback")
        total = np.nan_to_num(lw, neginf=-1e300) + np.nan_to_num(ls, neginf=-1e300) \
            + np.nan_to_num(ld, neginf=-1e300)
    shifted = total - total[np.isfinite(total)].max()
    p = np.exp(shifted)
    p[~np.isfinite(p)] = 0.0
    return p / p.sum()


def perplexity(
    state: ModelState,
    heldout_docs: list[list[list[int]]],
    schedule,
    passes: int,
    rng: np.random.Generator,
    rho: float | None = None,
) -> tuple[float, int]:
    """exp of negative mean log-probability over scored (non-OOV) tokens.

    Returns (perplexity, token count); raises if nothing is scorable.
    """
    total = 0.0
    n = 0
    for doc in heldout_docs:
        fit = infer_heldout(state, doc, schedule, passes, rng, rho=rho)
        total += fit.log_probs.sum()
        n += fit.n_scored
    if n == 0:
        raise ValueError("no scorable (non-OOV) tokens in held-out set")
    return float(np.exp(-total / n)), n
