"""Downstream evaluations: retrieval PR curves, classification, topic words."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .inference import topic_posterior
from .model import ModelState

DEFAULT_RECALL_POINTS = (0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0)


@dataclass
class LabeledVectors:
    vectors: np.ndarray                  # (N, V)
    labels: list[frozenset[str]]         # one label set per document

    def __post_init__(self):
        self.labels = [
            frozenset([l]) if isinstance(l, str) else frozenset(l) for l in self.labels
        ]
        if len(self.labels) != self.vectors.shape[0]:
            raise ValueError("labels and vectors disagree in length")

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def label_set(self) -> list[str]:
        out = set()
        for ls in self.labels:
            out |= ls
        return sorted(out)

    def single_labels(self) -> list[str]:
        if any(len(ls) != 1 for ls in self.labels):
            raise ValueError("multi-label data where single labels are required")
        return [next(iter(ls)) for ls in self.labels]


@dataclass
class PRCurve:
    points: list[tuple[float, float]]                       # averaged over labels
    per_label: dict[str, list[tuple[float, float]]] = field(default_factory=dict)

    def format_rows(self) -> str:
        lines = ["\t".join(("label", "recall", "precision"))]
        for label, pts in sorted(self.per_label.items()):
            for r, p in pts:
                lines.append(f"{label}\t{r:g}\t{p:g}")
        for r, p in self.points:
            lines.append(f"__mean__\t{r:g}\t{p:g}")
        return "\n".join(lines)


def _check_nonzero(lv: LabeledVectors, name: str) -> None:
    norms = np.linalg.norm(lv.vectors, axis=1)
    bad = np.where(norms == 0)[0]
    if bad.size:
        raise ValueError(f"zero vector for {name} document {bad[0]}")


def cosine_ranking(database: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Database indices by descending cosine similarity, ties by id."""
    sims = database @ query / (np.linalg.norm(database, axis=1) * np.linalg.norm(query))
    ids = np.arange(database.shape[0])
    return np.lexsort((ids, -sims))


def _precision_at_recalls(
    ranking: np.ndarray, relevant: np.ndarray, recall_points
) -> list[float] | None:
    rel = relevant[ranking]
    total = int(rel.sum())
    if total == 0:
        return None
    cum = np.cumsum(rel)
    recall = cum / total
    ks = np.searchsorted(recall, np.asarray(recall_points) - 1e-12, side="left")
    return [float(cum[k] / (k + 1)) for k in ks]


def retrieval_eval(
    database: LabeledVectors,
    queries: LabeledVectors,
    recall_points=DEFAULT_RECALL_POINTS,
) -> PRCurve:
    """Rank the database by cosine similarity for each query; a document is
    relevant when it shares the evaluated label. Curves are averaged per
    label, then across labels."""
    if len(database) == 0 or len(queries) == 0:
        raise ValueError("database and queries must be nonempty")
    _check_nonzero(database, "database")
    _check_nonzero(queries, "query")
    recall_points = sorted(recall_points)
    per_label: dict[str, list[tuple[float, float]]] = {}
    for label in queries.label_set():
        relevant = np.array([label in ls for ls in database.labels])
        if not relevant.any():
            continue
        rows = []
        for qi, ls in enumerate(queries.labels):
            if label not in ls:
                continue
            ranking = cosine_ranking(database.vectors, queries.vectors[qi])
            precs = _precision_at_recalls(ranking, relevant, recall_points)
            if precs is not None:
                rows.append(precs)
        if rows:
            per_label[label] = list(zip(recall_points, np.mean(rows, axis=0)))
    if not per_label:
        raise ValueError("no query label has relevant database documents")
    mean = np.mean([[p for _, p in pts] for pts in per_label.values()], axis=0)
    return PRCurve(points=list(zip(recall_points, mean)), per_label=per_label)


@dataclass
class Classifier:
    mode: str                     # "multinomial" | "per-label-binary"
    labels: list[str]
    weights: np.ndarray           # (C, V)
    bias: np.ndarray              # (C,)

    def scores(self, vectors: np.ndarray) -> np.ndarray:
        return vectors @ self.weights.T + self.bias


def train_classifier(
    train: LabeledVectors,
    mode: str = "multinomial",
    l2: float = 1e-4,
    iters: int = 500,
    lr: float = 1.0,
) -> Classifier:
    """Full-batch gradient-descent logistic regression on document vectors.

    The loss is the mean cross entropy plus l2 * ||weights||^2 (bias
    excluded), so duplicating every sample leaves the optimum unchanged.
    """
    X = np.asarray(train.vectors, dtype=np.float64)
    n = X.shape[0]
    if mode == "multinomial":
        labels = sorted(set(train.single_labels()))
        if len(labels) < 2:
            raise ValueError("multinomial mode needs at least 2 labels")
        idx = {l: i for i, l in enumerate(labels)}
        y = np.array([idx[l] for l in train.single_labels()])
        C = len(labels)
        W = np.zeros((C, X.shape[1]))
        b = np.zeros(C)
        onehot = np.zeros((n, C))
        onehot[np.arange(n), y] = 1.0
        for _ in range(iters):
            z = X @ W.T + b
            z -= z.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            err = (p - onehot) / n
            W -= lr * (err.T @ X + 2 * l2 * W)
            b -= lr * err.sum(axis=0)
        return Classifier(mode=mode, labels=labels, weights=W, bias=b)
    if mode == "per-label-binary":
        labels = train.label_set()
        if not labels:
            raise ValueError("no labels in training data")
        W = np.zeros((len(labels), X.shape[1]))
        b = np.zeros(len(labels))
        for ci, label in enumerate(labels):
            y = np.array([float(label in ls) for ls in train.labels])
            for _ in range(iters):
                p = 1.0 / (1.0 + np.exp(-(X @ W[ci] + b[ci])))
                err = (p - y) / n
                W[ci] -= lr * (err @ X + 2 * l2 * W[ci])
                b[ci] -= lr * err.sum()
        return Classifier(mode=mode, labels=labels, weights=W, bias=b)
    raise ValueError(f"unknown classifier mode {mode!r}")


def _average_precision(scores: np.ndarray, positive: np.ndarray) -> float:
    """AP of a score-ranked list; ties broken by document id (ascending)."""
    ids = np.arange(scores.shape[0])
    order = np.lexsort((ids, -scores))
    pos = positive[order]
    n_pos = int(pos.sum())
    if n_pos == 0:
        return 0.0
    cum = np.cumsum(pos)
    ranks = np.where(pos)[0] + 1
    return float(np.sum(cum[ranks - 1] / ranks) / n_pos)


def classify_eval(
    classifier: Classifier, test: LabeledVectors, metric: str = "accuracy"
) -> float:
    """accuracy for multinomial classifiers, mean average precision for
    per-label-binary ones; mode/metric mismatches are errors."""
    scores = classifier.scores(test.vectors)
    if metric == "accuracy":
        if classifier.mode != "multinomial":
            raise ValueError("accuracy requires a multinomial classifier")
        pred = np.argmax(scores, axis=1)
        truth = test.single_labels()
        hits = sum(classifier.labels[p] == t for p, t in zip(pred, truth))
        return hits / len(test)
    if metric == "mean-average-precision":
        if classifier.mode != "per-label-binary":
            raise ValueError("mean-average-precision requires per-label-binary mode")
        aps = []
        for ci, label in enumerate(classifier.labels):
            positive = np.array([label in ls for ls in test.labels])
            aps.append(_average_precision(scores[:, ci], positive))
        return float(np.mean(aps))
    raise ValueError(f"unknown metric {metric!r}")


def top_words(
    state: ModelState, topic: int, n: int = 10, min_freq: int = 10
) -> list[tuple[str, float]]:
    """Vocabulary words with the largest posterior for one topic.

    Restricted to words with corpus frequency >= min_freq; ties broken by
    frequency (descending) then id.
    """
    if not (0 <= topic < state.mixture.n_components):
        raise IndexError(f"topic {topic} out of range")
    posts = topic_posterior(state.embeddings.word_vecs, state.mixture)[:, topic]
    counts = state.vocab.counts
    candidates = [
        (-posts[w], -counts[w], w)
        for w in range(len(state.vocab))
        if counts[w] >= min_freq and w != 0
    ]
    candidates.sort()
    return [(state.vocab.words[w], float(-negp)) for negp, _, w in candidates[:n]]
