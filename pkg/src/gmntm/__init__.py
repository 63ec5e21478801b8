"""Gaussian mixture neural topic model.

Topics are Gaussian mixture components over a shared embedding space;
every word, sentence and document owns a vector drawn from the mixture,
and each word occurrence is predicted by a softmax conditioned on its
document, sentence and preceding-word vectors. Training alternates EM on
the mixture with stochastic gradient ascent on the embeddings and
prediction weights.
"""

from .corpus import (
    Corpus,
    Slot,
    Vocabulary,
    build_vocabulary,
    context_window,
    encode_corpus,
    preprocess_text,
    split_sentences,
)
from .gmm import GmmParams, fit_em, log_density, log_density_grad, responsibilities
from .model import ModelState, TrainConfig, init_model, score, word_distribution
from .training import LrSchedule, slot_gradients, slot_objective, stage1_em, stage2_sgd, train
from .inference import HeldoutFit, infer_heldout, perplexity, slot_topic, topic_posterior
from .evalharness import (
    LabeledVectors,
    PRCurve,
    classify_eval,
    retrieval_eval,
    top_words,
    train_classifier,
)
from .serialize import load_corpus, load_model, save_corpus, save_model

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
