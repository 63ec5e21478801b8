"""Command-line driver: corpus building, training, evaluation reports.

Exit codes: 0 success, 2 usage error, 3 input-format error, 4 numerical
error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import corpus as corpus_mod
from . import evalharness, inference, serialize, training
from .model import TrainConfig

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4

_CONFIG_KEYS = {
    "topics", "dim", "context", "lr", "lr_end", "outer_iters", "passes",
    "em_max_iters", "em_tol", "prior_weight", "cov_mode", "var_floor",
    "sigma_init", "seed", "grad_mode", "neg_samples", "weight_decay",
}


class UsageError(Exception):
    pass


def _read_config_file(path) -> dict[str, str]:
    out = {}
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                key = key.strip()
                if key not in _CONFIG_KEYS:
                    raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
                out[key] = value.strip()
        return out
    except OSError as e:
        raise UsageError(f"cannot read config file: {e}") from e


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig()
    overrides = dict(getattr(args, "_file_config", {}))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            overrides[key] = flag
    for key, value in overrides.items():
        current = getattr(cfg, key)
        if key in ("cov_mode", "grad_mode"):
            parsed = str(value)
        elif key == "prior_weight":
            parsed = None if str(value) in ("None", "auto") else float(value)
        elif isinstance(current, int):
            parsed = int(value)
        else:
            parsed = float(value)
        setattr(cfg, key, parsed)
    cfg.validate()
    return cfg


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topics", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--context", type=int, help="max previous words per slot")
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-end", dest="lr_end", type=float)
    p.add_argument("--outer-iters", dest="outer_iters", type=int)
    p.add_argument("--passes", type=int)
    p.add_argument("--em-max-iters", dest="em_max_iters", type=int)
    p.add_argument("--em-tol", dest="em_tol", type=float)
    p.add_argument("--rho", dest="prior_weight", type=float,
                   help="prior weight multiplier; default 1.0")
    p.add_argument("--cov-mode", dest="cov_mode", choices=("diagonal", "full"))
    p.add_argument("--var-floor", dest="var_floor", type=float)
    p.add_argument("--sigma-init", dest="sigma_init", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--grad-mode", dest="grad_mode",
                   choices=("exact", "negative-sampling"))
    p.add_argument("--neg-samples", dest="neg_samples", type=int)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmntm")
    parser.add_argument("--config", help="key=value config file; flags override")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="build a corpus archive from raw text")
    p.add_argument("input", help="document directory or line-delimited file")
    p.add_argument("output", help="corpus archive path")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--max-vocab", type=int, default=1_000_000)
    p.add_argument("--stopwords", help="override the built-in stopword list")
    p.add_argument("--vocab-from", help="reuse the vocabulary of an archive")

    p = sub.add_parser("train", help="train a model on a corpus archive")
    p.add_argument("corpus")
    p.add_argument("output", help="model file path")
    p.add_argument("--trace", help="write training-trace records here")
    _add_train_flags(p)

    p = sub.add_parser("perplexity", help="held-out perplexity report")
    p.add_argument("model")
    p.add_argument("corpus", help="held-out corpus archive")
    p.add_argument("--passes", type=int, default=5)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("retrieve", help="precision-recall retrieval report")
    p.add_argument("model")
    p.add_argument("database", help="training corpus archive (labels required)")
    p.add_argument("queries", help="held-out corpus archive (labels required)")
    p.add_argument("--recall-points", default=",".join(
        str(r) for r in evalharness.DEFAULT_RECALL_POINTS))
    p.add_argument("--passes", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("classify", help="document classification report")
    p.add_argument("model")
    p.add_argument("train_corpus")
    p.add_argument("test_corpus")
    p.add_argument("--mode", choices=("multinomial", "per-label-binary"),
                   default="multinomial")
    p.add_argument("--metric", choices=("accuracy", "map"), default="accuracy")
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--passes", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("topics", help="top words per topic")
    p.add_argument("model")
    p.add_argument("--topic", type=int, help="one topic; default all")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--min-freq", type=int, default=10)
    return parser


def _load_model_checked(path, corpus=None):
    state = serialize.load_model(path)
    if corpus is not None and corpus.vocab.checksum() != state.vocab.checksum():
        raise serialize.HeaderError("corpus and model vocabulary checksums differ")
    return state


def _heldout_fits(state, corpus, passes, seed, rho=0.0):
    rng = np.random.default_rng(seed)
    n_slots = sum(len(s) for d in corpus.documents for s in d.sentences)
    schedule = training.LrSchedule(
        state.config.lr, state.config.lr_end, max(n_slots * passes, 1)
    )
    return [
        inference.infer_heldout(state, d.sentences, schedule, passes, rng, rho=rho)
        for d in corpus.documents
    ]


def cmd_corpus(args) -> int:
    raw = corpus_mod.read_raw_documents(args.input)
    stopwords = None
    if args.stopwords:
        with open(args.stopwords, encoding="utf-8") as f:
            stopwords = frozenset(w for w in f.read().split() if w)
    docs = corpus_mod.documents_from_text(raw, stopwords)
    if args.vocab_from:
        vocab = serialize.load_corpus(args.vocab_from).vocab
    else:
        streams = (tok for _, sents in docs for tok in sents)
        vocab = corpus_mod.build_vocabulary(streams, args.min_count, args.max_vocab)
    encoded = corpus_mod.encode_corpus(docs, vocab)
    serialize.save_corpus(encoded, args.output)
    print(f"docs={encoded.num_documents} dropped={encoded.dropped_documents} "
          f"sentences={encoded.num_sentences} vocab={len(vocab)}")
    return 0


def cmd_train(args) -> int:
    cfg = _train_config(args)
    corpus = serialize.load_corpus(args.corpus)
    trace_lines = []
    state = training.train(corpus, cfg, progress=trace_lines.append)
    for line in trace_lines:
        print(line)
    serialize.save_model(state, args.output)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write("\n".join(trace_lines) + ("\n" if trace_lines else ""))
    return 0


def cmd_perplexity(args) -> int:
    corpus = serialize.load_corpus(args.corpus)
    state = _load_model_checked(args.model, corpus)
    fits = _heldout_fits(state, corpus, args.passes, args.seed, args.rho)
    total = sum(f.log_probs.sum() for f in fits)
    n = sum(f.n_scored for f in fits)
    if n == 0:
        raise ValueError("no scorable (non-OOV) tokens in held-out set")
    ppl = float(np.exp(-total / n))
    print(f"docs={len(fits)} tokens={n} perplexity={ppl:.6f}")
    return 0


def _labeled(vectors, labels, what) -> evalharness.LabeledVectors:
    if any(l is None for l in labels):
        raise UsageError(f"{what} corpus is missing document labels")
    return evalharness.LabeledVectors(vectors=np.asarray(vectors), labels=list(labels))


def cmd_retrieve(args) -> int:
    db_corpus = serialize.load_corpus(args.database)
    q_corpus = serialize.load_corpus(args.queries)
    state = _load_model_checked(args.model, db_corpus)
    if q_corpus.vocab.checksum() != state.vocab.checksum():
        raise serialize.HeaderError("query corpus vocabulary checksum differs")
    database = _labeled(state.embeddings.doc_vecs, db_corpus.labels(), "database")
    fits = _heldout_fits(state, q_corpus, args.passes, args.seed)
    queries = _labeled([f.doc_vec for f in fits], q_corpus.labels(), "query")
    points = [float(r) for r in args.recall_points.split(",")]
    curve = evalharness.retrieval_eval(database, queries, points)
    print(curve.format_rows())
    return 0


def cmd_classify(args) -> int:
    if (args.metric == "accuracy") != (args.mode == "multinomial"):
        raise UsageError(
            f"metric {args.metric!r} does not match classifier mode {args.mode!r}"
        )
    train_corpus = serialize.load_corpus(args.train_corpus)
    test_corpus = serialize.load_corpus(args.test_corpus)
    state = _load_model_checked(args.model, train_corpus)
    train_lv = _labeled(state.embeddings.doc_vecs, train_corpus.labels(), "train")
    fits = _heldout_fits(state, test_corpus, args.passes, args.seed)
    test_lv = _labeled([f.doc_vec for f in fits], test_corpus.labels(), "test")
    clf = evalharness.train_classifier(train_lv, args.mode, args.l2, args.iters)
    metric = "accuracy" if args.metric == "accuracy" else "mean-average-precision"
    value = evalharness.classify_eval(clf, test_lv, metric)
    print(f"metric={metric} value={value:.6f} n={len(test_lv)}")
    return 0


def cmd_topics(args) -> int:
    state = serialize.load_model(args.model)
    which = range(state.mixture.n_components) if args.topic is None else [args.topic]
    for k in which:
        rows = evalharness.top_words(state, k, args.n, args.min_freq)
        words = " ".join(f"{w}:{score:.4f}" for w, score in rows)
        print(f"topic={k} {words}")
    return 0


_COMMANDS = {
    "corpus": cmd_corpus,
    "train": cmd_train,
    "perplexity": cmd_perplexity,
    "retrieve": cmd_retrieve,
    "classify": cmd_classify,
    "topics": cmd_topics,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            args._file_config = _read_config_file(args.config)
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (serialize.FormatError, FileNotFoundError, IsADirectoryError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, IndexError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
