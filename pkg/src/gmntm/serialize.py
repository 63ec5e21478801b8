"""Binary corpus-archive and model-file formats.

Corpus archive: magic "GMNTMCORP1", vocabulary (length-prefixed UTF-8 words
with uint32 counts), then documents as length-prefixed token-id sequences.
All integers little-endian 32-bit.

Model file: magic "GMNTM1", header of 8 little-endian int64 values
(W, S, D, V, T, m, covariance mode, vocabulary checksum), then the mixture,
embedding and prediction-weight arrays as contiguous little-endian float32,
then the vocabulary word list.
"""

from __future__ import annotations

import struct

import numpy as np

from . import gmm
from .corpus import Corpus, Document, Vocabulary
from .model import EmbeddingTable, ModelState, PredictionWeights, TrainConfig

CORPUS_MAGIC = b"GMNTMCORP1"
MODEL_MAGIC = b"GMNTM1"

COV_MODE_CODES = {"diagonal": 0, "full": 1}
COV_MODE_NAMES = {v: k for k, v in COV_MODE_CODES.items()}


class FormatError(Exception):
    """Base class for file-format problems."""


class BadMagicError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class HeaderError(FormatError):
    pass


class _Reader:
    def __init__(self, f):
        self.f = f

    def read(self, n: int) -> bytes:
        data = self.f.read(n)
        if len(data) != n:
            raise TruncatedFileError(f"expected {n} bytes, got {len(data)}")
        return data

    def u32(self) -> int:
        return struct.unpack("<I", self.read(4))[0]

    def i64(self, count: int = 1):
        vals = struct.unpack(f"<{count}q", self.read(8 * count))
        return vals[0] if count == 1 else vals

    def f32_array(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        arr = np.frombuffer(self.read(4 * n), dtype="<f4").reshape(shape)
        return arr.astype(np.float64)

    def string(self) -> str:
        return self.read(self.u32()).decode("utf-8")


def _write_u32(f, value: int) -> None:
    f.write(struct.pack("<I", value))


def _write_string(f, s: str) -> None:
    data = s.encode("utf-8")
    _write_u32(f, len(data))
    f.write(data)


def _write_vocab(f, vocab: Vocabulary) -> None:
    _write_u32(f, len(vocab))
    for word, count in zip(vocab.words, vocab.counts):
        _write_string(f, word)
        _write_u32(f, count)


def _read_vocab(r: _Reader) -> Vocabulary:
    n = r.u32()
    words, counts = [], []
    for _ in range(n):
        words.append(r.string())
        counts.append(r.u32())
    if not words or words[0] != "<OOV>":
        raise HeaderError("vocabulary does not start with the OOV token")
    return Vocabulary(words=words, counts=counts, word_to_id={w: i for i, w in enumerate(words)})


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "wb") as f:
        f.write(CORPUS_MAGIC)
        _write_vocab(f, corpus.vocab)
        _write_u32(f, corpus.num_documents)
        for doc in corpus.documents:
            if doc.label is None:
                _write_u32(f, 0)
            else:
                _write_u32(f, 1)
                _write_string(f, doc.label)
            _write_u32(f, len(doc.sentences))
            for sent in doc.sentences:
                _write_u32(f, len(sent))
                f.write(np.asarray(sent, dtype="<u4").tobytes())


def load_corpus(path) -> Corpus:
    with open(path, "rb") as f:
        r = _Reader(f)
        if r.read(len(CORPUS_MAGIC)) != CORPUS_MAGIC:
            raise BadMagicError(f"{path} is not a corpus archive")
        vocab = _read_vocab(r)
        n_docs = r.u32()
        docs = []
        next_sent = 0
        for d in range(n_docs):
            label = r.string() if r.u32() else None
            n_sents = r.u32()
            sents = []
            for _ in range(n_sents):
                length = r.u32()
                ids = np.frombuffer(r.read(4 * length), dtype="<u4")
                if (ids >= len(vocab)).any():
                    raise HeaderError("token id out of vocabulary range")
                sents.append([int(i) for i in ids])
            sent_ids = list(range(next_sent, next_sent + n_sents))
            next_sent += n_sents
            docs.append(Document(doc_id=d, sentences=sents, sentence_ids=sent_ids, label=label))
        return Corpus(documents=docs, vocab=vocab, num_sentences=next_sent)


def save_model(state: ModelState, path) -> None:
    emb = state.embeddings
    wts = state.weights
    mix = state.mixture
    W, V = emb.word_vecs.shape
    S = emb.sent_vecs.shape[0]
    D = emb.doc_vecs.shape[0]
    T = mix.n_components
    m = wts.m
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack(
            "<8q", W, S, D, V, T, m,
            COV_MODE_CODES[mix.mode], state.vocab.checksum(),
        ))
        for arr in (
            mix.weights, mix.means, mix.covariances,
            emb.word_vecs, emb.sent_vecs, emb.doc_vecs,
            wts.u[0], wts.u[1], wts.u[2:], wts.bias,
        ):
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        _write_vocab(f, state.vocab)


def load_model(path) -> ModelState:
    with open(path, "rb") as f:
        r = _Reader(f)
        if r.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
            raise BadMagicError(f"{path} is not a model file")
        W, S, D, V, T, m, cov_code, checksum = r.i64(8)
        if min(W, S, D, V, T, m) < 1 or cov_code not in COV_MODE_NAMES:
            raise HeaderError("inconsistent model header")
        mode = COV_MODE_NAMES[cov_code]
        cov_shape = (T, V) if mode == "diagonal" else (T, V, V)
        mix = gmm.GmmParams(
            weights=r.f32_array((T,)),
            means=r.f32_array((T, V)),
            covariances=r.f32_array(cov_shape),
            mode=mode,
        )
        emb = EmbeddingTable(
            word_vecs=r.f32_array((W, V)),
            sent_vecs=r.f32_array((S, V)),
            doc_vecs=r.f32_array((D, V)),
        )
        u = np.empty((2 + m, W, V))
        u[0] = r.f32_array((W, V))
        u[1] = r.f32_array((W, V))
        u[2:] = r.f32_array((m, W, V))
        wts = PredictionWeights(u=u, bias=r.f32_array((W,)))
        vocab = _read_vocab(r)
        if len(vocab) != W:
            raise HeaderError("vocabulary size disagrees with header")
        if vocab.checksum() != checksum:
            raise HeaderError("vocabulary checksum mismatch")
        config = TrainConfig(topics=T, dim=V, context=m, cov_mode=mode)
        return ModelState(
            embeddings=emb, weights=wts, mixture=mix,
            config=config, vocab=vocab, gmm_fitted=True,
        )
