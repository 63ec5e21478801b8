"""Text ingestion: preprocessing, vocabulary, encoding, context windows."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from . import porter

OOV_TOKEN = "<OOV>"
OOV_ID = 0

_ALPHA_RUN = re.compile(r"[a-z]+")
_SENT_END = re.compile(r"(?<=[.!?])\s+")
# Common abbreviations whose trailing period should not end a sentence.
_ABBREVIATIONS = frozenset(
    {"mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "vs.", "etc.", "e.g.", "i.e."}
)


def _load_stopwords() -> frozenset[str]:
    text = resources.files("gmntm").joinpath("data/stopwords.txt").read_text()
    return frozenset(w for w in text.split() if w)


STOPWORDS = _load_stopwords()


def preprocess_text(raw: str, stopwords: frozenset[str] | None = None) -> list[str]:
    """Lowercase, keep alphabetic runs, drop stopwords, Porter-stem.

    Token order is preserved; may return an empty list.
    """
    if stopwords is None:
        stopwords = STOPWORDS
    tokens = _ALPHA_RUN.findall(raw.lower())
    return [porter.stem(t) for t in tokens if t not in stopwords]


def split_sentences(raw: str) -> list[str]:
    """Rule-based sentence splitting on ./!/? followed by whitespace.

    Best-effort abbreviation handling; never drops characters.
    """
    pieces = _SENT_END.split(raw)
    out: list[str] = []
    for piece in pieces:
        if out and out[-1].split()[-1].lower() in _ABBREVIATIONS:
            out[-1] = out[-1] + " " + piece
        else:
            out.append(piece)
    return [s for s in out if s.strip()]


@dataclass(frozen=True)
class Vocabulary:
    words: list[str]          # id -> word; words[0] == OOV_TOKEN
    counts: list[int]         # id -> corpus frequency
    word_to_id: dict[str, int] = field(repr=False)

    def __post_init__(self):
        assert self.words[OOV_ID] == OOV_TOKEN

    def __len__(self) -> int:
        return len(self.words)

    def get(self, word: str) -> int:
        return self.word_to_id.get(word, OOV_ID)

    def checksum(self) -> int:
        import zlib

        return zlib.crc32("\n".join(self.words).encode("utf-8"))


def build_vocabulary(
    token_streams, min_count: int = 1, max_size: int = 1_000_000
) -> Vocabulary:
    """Keep the max_size most frequent tokens with frequency >= min_count.

    Ties broken lexicographically. OOV always occupies id 0; OOV count is
    the number of dropped token occurrences.
    """
    if min_count < 1 or max_size < 1:
        raise ValueError("min_count and max_size must be >= 1")
    freq = Counter()
    for stream in token_streams:
        freq.update(stream)
    eligible = [(w, c) for w, c in freq.items() if c >= min_count]
    eligible.sort(key=lambda wc: (-wc[1], wc[0]))
    kept = eligible[:max_size]
    total = sum(freq.values())
    oov_count = total - sum(c for _, c in kept)
    words = [OOV_TOKEN] + [w for w, _ in kept]
    counts = [oov_count] + [c for _, c in kept]
    word_to_id = {w: i for i, w in enumerate(words)}
    return Vocabulary(words=words, counts=counts, word_to_id=word_to_id)


@dataclass(frozen=True)
class Document:
    doc_id: int
    sentences: list[list[int]]       # token ids per sentence
    sentence_ids: list[int]          # global sentence ids, consecutive
    label: str | None = None


@dataclass(frozen=True)
class Slot:
    doc_id: int
    sent_id: int
    pos: int
    word: int


@dataclass(frozen=True)
class Corpus:
    documents: list[Document]
    vocab: Vocabulary
    num_sentences: int
    dropped_documents: int = 0

    @property
    def num_documents(self) -> int:
        return len(self.documents)

    def num_slots(self) -> int:
        return sum(len(s) for d in self.documents for s in d.sentences)

    def sentence(self, doc: Document, sent_id: int) -> list[int]:
        return doc.sentences[sent_id - doc.sentence_ids[0]]

    def slots(self) -> list[Slot]:
        out = []
        for doc in self.documents:
            for sid, sent in zip(doc.sentence_ids, doc.sentences):
                for i, w in enumerate(sent):
                    out.append(Slot(doc.doc_id, sid, i, w))
        return out

    def labels(self) -> list[str | None]:
        return [d.label for d in self.documents]


def encode_corpus(
    documents: list[tuple[str | None, list[list[str]]]], vocab: Vocabulary
) -> Corpus:
    """Encode (label, sentences-of-tokens) documents against a vocabulary.

    OOV tokens map to id 0; sentences and documents that end up empty are
    dropped, the latter counted in ``dropped_documents``.
    """
    encoded_docs: list[Document] = []
    dropped = 0
    next_sent = 0
    for label, sentences in documents:
        enc_sents = []
        for sent in sentences:
            ids = [vocab.get(t) for t in sent]
            if ids:
                enc_sents.append(ids)
        if not enc_sents:
            dropped += 1
            continue
        sent_ids = list(range(next_sent, next_sent + len(enc_sents)))
        next_sent += len(enc_sents)
        encoded_docs.append(
            Document(
                doc_id=len(encoded_docs),
                sentences=enc_sents,
                sentence_ids=sent_ids,
                label=label,
            )
        )
    return Corpus(
        documents=encoded_docs,
        vocab=vocab,
        num_sentences=next_sent,
        dropped_documents=dropped,
    )


def context_window(corpus: Corpus, slot: Slot, m: int) -> list[int]:
    """The min(pos, m) word ids preceding the slot in its own sentence.

    Nearest predecessor last; never crosses a sentence boundary.
    """
    doc = corpus.documents[slot.doc_id]
    sent = corpus.sentence(doc, slot.sent_id)
    lo = max(0, slot.pos - m)
    return sent[lo: slot.pos]


def documents_from_text(
    raw_docs: list[tuple[str | None, str]],
    stopwords: frozenset[str] | None = None,
) -> list[tuple[str | None, list[list[str]]]]:
    """Full preprocessing of (label, raw text) pairs into token sentences."""
    out = []
    for label, raw in raw_docs:
        sents = [preprocess_text(s, stopwords) for s in split_sentences(raw)]
        out.append((label, [s for s in sents if s]))
    return out


def read_raw_documents(path) -> list[tuple[str | None, str]]:
    """Read raw documents from a directory (one file each) or a
    line-delimited file (one document per line, optional "label<TAB>")."""
    import os

    docs: list[tuple[str | None, str]] = []
    if os.path.isdir(path):
        for name in sorted(os.listdir(path)):
            full = os.path.join(path, name)
            if os.path.isfile(full):
                with open(full, encoding="utf-8", errors="replace") as f:
                    docs.append((None, f.read()))
    else:
        with open(path, encoding="utf-8", errors="replace") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                if "\t" in line:
                    label, text = line.split("\t", 1)
                    docs.append((label, text))
                else:
                    docs.append((None, line))
    return docs
