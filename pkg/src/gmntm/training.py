"""Alternating trainer: EM on pooled embeddings, SGD on the slot objective."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import gmm
from .corpus import Corpus, Slot, context_window
from .model import (
    CTX_BASE,
    DOC_ROW,
    SEN_ROW,
    ModelState,
    TrainConfig,
    all_scores,
    init_model,
    softmax,
)

log = logging.getLogger(__name__)


@dataclass
class LrSchedule:
    """Linear decay from lr_start to lr_end over total_updates steps."""

    lr_start: float
    lr_end: float
    total_updates: int

    def rate(self, n: int) -> float:
        if self.total_updates <= 1:
            return self.lr_end
        frac = min(n, self.total_updates - 1) / (self.total_updates - 1)
        return self.lr_start + (self.lr_end - self.lr_start) * frac


@dataclass
class SlotGradients:
    """Gradients of the slot objective for the touched parameters only.

    ``word_vecs`` accumulates over repeated context ids; ``u_ctx`` holds one
    entry per context offset t (nearest predecessor is t=1).
    """

    doc_vec: np.ndarray
    sen_vec: np.ndarray
    word_vecs: dict[int, np.ndarray]
    u_doc: np.ndarray
    u_sen: np.ndarray
    u_ctx: dict[int, np.ndarray]
    bias: float
    objective: float = 0.0


def _context_of(state: ModelState, corpus: Corpus, slot: Slot) -> list[int]:
    return context_window(corpus, slot, state.config.context)


def _touched_vectors(state: ModelState, slot: Slot, context) -> list[tuple[str, int, np.ndarray]]:
    emb = state.embeddings
    touched = [("doc", slot.doc_id, emb.doc_vecs[slot.doc_id]),
               ("sen", slot.sent_id, emb.sent_vecs[slot.sent_id])]
    for w in dict.fromkeys(context):
        touched.append(("word", w, emb.word_vecs[w]))
    return touched


class PriorWeights:
    """Per-vector prior weights: 1 / (touches per full corpus pass).

    Weighting each touched vector's log-prior this way counts every
    vector's prior exactly once per pass instead of once per touch, which
    would over-anchor frequent words by orders of magnitude.
    """

    def __init__(self, corpus: Corpus, m: int):
        W = len(corpus.vocab)
        doc_occ = np.zeros(corpus.num_documents)
        sent_occ = np.zeros(corpus.num_sentences)
        word_occ = np.zeros(W)
        for doc in corpus.documents:
            for sid, sent in zip(doc.sentence_ids, doc.sentences):
                doc_occ[doc.doc_id] += len(sent)
                sent_occ[sid] += len(sent)
                for i in range(len(sent)):
                    for w in dict.fromkeys(sent[max(0, i - m): i]):
                        word_occ[w] += 1
        self.doc = 1.0 / np.maximum(doc_occ, 1.0)
        self.sent = 1.0 / np.maximum(sent_occ, 1.0)
        self.word = 1.0 / np.maximum(word_occ, 1.0)

    def of(self, kind: str, idx: int) -> float:
        return float(getattr(self, "sent" if kind == "sen" else kind)[idx])


def _prior_weights(state: ModelState, corpus: Corpus) -> PriorWeights:
    pw = getattr(state, "_prior_weights", None)
    if pw is None or pw is not None and getattr(state, "_prior_corpus", None) is not corpus:
        pw = PriorWeights(corpus, state.config.context)
        state._prior_weights = pw
        state._prior_corpus = corpus
    return pw


def slot_objective(state: ModelState, corpus: Corpus, slot: Slot, rho: float) -> float:
    """Per-vector-weighted mixture log-prior over the slot's vectors plus
    the word log-likelihood under the softmax."""
    context = _context_of(state, corpus, slot)
    scores = all_scores(state, slot.doc_id, slot.sent_id, context)
    shifted = scores - scores.max()
    ll = shifted[slot.word] - np.log(np.exp(shifted).sum())
    prior = 0.0
    if rho != 0.0:
        pw = _prior_weights(state, corpus)
        for kind, idx, vec in _touched_vectors(state, slot, context):
            prior += pw.of(kind, idx) * gmm.log_density(vec, state.mixture)
    return float(rho * prior + ll)


def slot_gradients(
    state: ModelState,
    corpus: Corpus,
    slot: Slot,
    rho: float,
    rng: np.random.Generator | None = None,
) -> SlotGradients:
    """Gradients of slot_objective w.r.t. the touched parameters.

    Exact mode computes the full softmax expectation for the input-vector
    gradients; only the target word's output rows get gradients, matching
    the sparse update rule. Negative-sampling mode replaces the softmax
    likelihood with the sampled logistic surrogate.
    """
    context = _context_of(state, corpus, slot)
    emb = state.embeddings
    wts = state.weights
    wi = slot.word
    feats = state.feature_matrix(slot.doc_id, slot.sent_id, context)
    n_rows = feats.shape[0]

    if state.config.grad_mode == "negative-sampling" and rng is not None:
        grads_in, r, obj_ll = _neg_sampling_grads(state, feats, wi, rng)
    else:
        scores = wts.bias.copy()
        for row in range(n_rows):
            scores += wts.u[row] @ feats[row]
        p = softmax(scores)
        shifted = scores - scores.max()
        obj_ll = float(shifted[wi] - np.log(np.exp(shifted).sum()))
        r = 1.0 - p[wi]
        # d(ll)/d(feature row) = u_row[wi] - E_p[u_row]
        grads_in = np.empty_like(feats)
        for row in range(n_rows):
            grads_in[row] = wts.u[row][wi] - p @ wts.u[row]

    word_grads: dict[int, np.ndarray] = {}
    u_ctx: dict[int, np.ndarray] = {}
    for t in range(1, len(context) + 1):
        w = context[-t]
        g = grads_in[CTX_BASE + t - 1]
        if w in word_grads:
            word_grads[w] = word_grads[w] + g
        else:
            word_grads[w] = g.copy()
        u_ctx[t] = r * emb.word_vecs[w]

    doc_g = grads_in[DOC_ROW].copy()
    sen_g = grads_in[SEN_ROW].copy()
    obj = obj_ll
    if rho != 0.0:
        pw = _prior_weights(state, corpus)
        touched = _touched_vectors(state, slot, context)
        dens, pgrads = gmm.log_density_and_grad(
            np.asarray([vec for _, _, vec in touched]), state.mixture
        )
        for (kind, idx, _), dv, pg in zip(touched, dens, pgrads):
            coeff = rho * pw.of(kind, idx)
            obj += coeff * dv
            if kind == "doc":
                doc_g += coeff * pg
            elif kind == "sen":
                sen_g += coeff * pg
            else:
                word_grads[idx] += coeff * pg

    return SlotGradients(
        doc_vec=doc_g,
        sen_vec=sen_g,
        word_vecs=word_grads,
        u_doc=r * emb.doc_vecs[slot.doc_id],
        u_sen=r * emb.sent_vecs[slot.sent_id],
        u_ctx=u_ctx,
        bias=float(r),
        objective=float(obj),
    )


def _neg_sampling_grads(state, feats, wi, rng):
    """Logistic surrogate gradients over the target plus k noise words."""
    wts = state.weights
    k = state.config.neg_samples
    noise = _unigram_noise(state)
    negs = rng.choice(len(noise), size=k, p=noise)
    ids = np.concatenate([[wi], negs])
    n_rows = feats.shape[0]
    s = wts.bias[ids].copy()
    for row in range(n_rows):
        s += wts.u[row][ids] @ feats[row]
    sig = 1.0 / (1.0 + np.exp(-s))
    # d/ds of [log sigma(s_wi) + sum log sigma(-s_neg)]
    coeff = np.empty_like(s)
    coeff[0] = 1.0 - sig[0]
    coeff[1:] = -sig[1:]
    obj = float(np.log(max(sig[0], 1e-300)) + np.log(np.maximum(1.0 - sig[1:], 1e-300)).sum())
    grads_in = np.empty_like(feats)
    for row in range(n_rows):
        grads_in[row] = coeff @ wts.u[row][ids]
    return grads_in, float(coeff[0]), obj


def _unigram_noise(state: ModelState) -> np.ndarray:
    noise = getattr(state, "_noise_cache", None)
    if noise is None:
        counts = np.asarray(state.vocab.counts, dtype=np.float64)
        counts = np.maximum(counts, 1.0) ** 0.75
        noise = counts / counts.sum()
        state._noise_cache = noise
    return noise


def _clipped(step: np.ndarray, clip: float) -> np.ndarray:
    if clip <= 0.0:
        return step
    norm = float(np.linalg.norm(step))
    if norm > clip:
        return step * (clip / norm)
    return step


def apply_slot_gradients(
    state: ModelState, slot: Slot, grads: SlotGradients, lr: float
) -> None:
    if lr == 0.0:
        return
    emb = state.embeddings
    wts = state.weights
    wi = slot.word
    wd = state.config.weight_decay
    clip = state.config.clip_step
    emb.doc_vecs[slot.doc_id] += _clipped(lr * grads.doc_vec, clip)
    emb.sent_vecs[slot.sent_id] += _clipped(lr * grads.sen_vec, clip)
    for w, g in grads.word_vecs.items():
        emb.word_vecs[w] += _clipped(lr * g, clip)
    wts.u[DOC_ROW][wi] += _clipped(lr * (grads.u_doc - wd * wts.u[DOC_ROW][wi]), clip)
    wts.u[SEN_ROW][wi] += _clipped(lr * (grads.u_sen - wd * wts.u[SEN_ROW][wi]), clip)
    for t, g in grads.u_ctx.items():
        row = CTX_BASE + t - 1
        wts.u[row][wi] += _clipped(lr * (g - wd * wts.u[row][wi]), clip)
    wts.bias[wi] += float(np.clip(lr * grads.bias, -clip, clip)) if clip > 0 else lr * grads.bias


def stage2_sgd(
    state: ModelState,
    corpus: Corpus,
    schedule: LrSchedule,
    passes: int,
    rng: np.random.Generator,
    rho: float | None = None,
    start_update: int = 0,
) -> list[float]:
    """Ascend the slot objective; one fresh slot permutation per pass.

    Mutates embeddings and prediction weights in place; the mixture is
    untouched. ``start_update`` offsets into the schedule so successive
    calls share one decay. Returns the mean slot objective per pass.
    """
    if rho is None:
        rho = state.prior_weight
    slots = corpus.slots()
    trace: list[float] = []
    n = start_update
    for _ in range(passes):
        order = rng.permutation(len(slots))
        total = 0.0
        for j in order:
            slot = slots[j]
            grads = slot_gradients(state, corpus, slot, rho, rng)
            apply_slot_gradients(state, slot, grads, schedule.rate(n))
            total += grads.objective
            n += 1
        trace.append(total / max(len(slots), 1))
    return trace


def stage1_em(state: ModelState, rng: np.random.Generator | None = None) -> gmm.GmmParams:
    """Refit the mixture on all pooled embedding vectors.

    Cold-starts (k-means++ seeding) on the first call after init, then
    warm-starts from the current mixture. Replaces state.mixture; the
    embeddings and prediction weights are untouched.
    """
    cfg = state.config
    pooled = state.embeddings.pooled()
    init = state.mixture if state.gmm_fitted else None
    params = gmm.fit_em(
        pooled,
        cfg.topics,
        max_iters=cfg.em_max_iters,
        tol=cfg.em_tol,
        rng=rng if rng is not None else np.random.default_rng(cfg.seed),
        mode=cfg.cov_mode,
        var_floor=cfg.var_floor,
        init=init,
    )
    state.mixture = params
    state.gmm_fitted = True
    return params


def train(corpus: Corpus, config: TrainConfig, progress=None) -> ModelState:
    """Alternate mixture EM and slot-objective SGD (the full algorithm).

    Stops after ``outer_iters`` alternations or once the mean slot
    objective changes by less than 1e-4 between alternations.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    state = init_model(config, corpus, rng)
    n_slots = corpus.num_slots()
    updates_per_alt = n_slots * config.passes
    total_updates = max(updates_per_alt * config.outer_iters, 1)
    schedule = LrSchedule(config.lr, config.lr_end, total_updates)
    prev = -np.inf
    for alt in range(config.outer_iters):
        stage1_em(state, rng)
        start = alt * updates_per_alt
        pass_trace = stage2_sgd(
            state, corpus, schedule, config.passes, rng, start_update=start
        )
        mean_obj = pass_trace[-1]
        state.objective_trace.append(mean_obj)
        for p, obj in enumerate(pass_trace):
            n_done = min(start + (p + 1) * n_slots, total_updates)
            line = f"alt={alt} pass={p} mean_obj={obj:.6f} lr={schedule.rate(n_done - 1):.6f}"
            log.info(line)
            if progress is not None:
                progress(line)
        if abs(mean_obj - prev) < 1e-4:
            break
        prev = mean_obj
    return state
