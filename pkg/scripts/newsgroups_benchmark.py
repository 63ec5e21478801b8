#!/usr/bin/env python3
"""Held-out perplexity benchmark against a unigram baseline.

Runs on a four-category 20 Newsgroups subset when scikit-learn can provide
it (cached copy or network access); any directory of labeled text files
works too (see ``gmntm corpus`` input formats). The model must beat the
unigram-frequency baseline on the same tokenization.
"""

import argparse
import math
import sys
import time

import numpy as np

from gmntm import corpus as corpus_mod
from gmntm import inference, model, training

CATEGORIES = ["sci.space", "rec.autos", "comp.graphics", "talk.politics.misc"]


def load_newsgroups(max_train, max_test):
    from sklearn.datasets import fetch_20newsgroups
    train = fetch_20newsgroups(subset="train", categories=CATEGORIES)
    test = fetch_20newsgroups(subset="test", categories=CATEGORIES)
    pair = lambda raw, n: [(CATEGORIES[y], t) for t, y in
                           zip(raw.data[:n], raw.target[:n])]
    return pair(train, max_train), pair(test, max_test)


def unigram_perplexity(vocab, heldout_docs):
    counts = np.asarray(vocab.counts, dtype=np.float64)
    probs = counts / counts.sum()
    total, n = 0.0, 0
    for doc in heldout_docs:
        for sent in doc:
            for w in sent:
                if w != corpus_mod.OOV_ID:
                    total += math.log(max(probs[w], 1e-300))
                    n += 1
    return math.exp(-total / n), n


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", help="labeled text input (dir or file); "
                    "defaults to the 20 Newsgroups subset")
    ap.add_argument("--max-train", type=int, default=2000)
    ap.add_argument("--max-test", type=int, default=500)
    ap.add_argument("--max-vocab", type=int, default=5000)
    ap.add_argument("--min-count", type=int, default=2)
    ap.add_argument("--topics", type=int, default=32)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--context", type=int, default=6)
    ap.add_argument("--outer-iters", type=int, default=3)
    ap.add_argument("--infer-passes", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if args.input:
        raw = corpus_mod.read_raw_documents(args.input)
        split = len(raw) - min(args.max_test, len(raw) // 5)
        train_raw, test_raw = raw[:split], raw[split:]
    else:
        try:
            train_raw, test_raw = load_newsgroups(args.max_train, args.max_test)
        except Exception as e:
            print(f"cannot load the newsgroups corpus ({e}); "
                  "pass --input to use local text instead", file=sys.stderr)
            return 3

    docs = corpus_mod.documents_from_text(train_raw)
    vocab = corpus_mod.build_vocabulary(
        (s for _, sents in docs for s in sents),
        min_count=args.min_count, max_size=args.max_vocab)
    train_c = corpus_mod.encode_corpus(docs, vocab)
    test_c = corpus_mod.encode_corpus(
        corpus_mod.documents_from_text(test_raw), vocab)
    print(f"train docs={train_c.num_documents} vocab={len(vocab)} "
          f"test docs={test_c.num_documents}")

    cfg = model.TrainConfig(topics=args.topics, dim=args.dim,
                            context=args.context,
                            outer_iters=args.outer_iters, sigma_init=1.0,
                            prior_weight=0.0, weight_decay=0.1,
                            seed=args.seed)
    t0 = time.time()
    state = training.train(train_c, cfg, progress=print)
    print(f"trained in {time.time() - t0:.0f}s")

    heldout = [d.sentences for d in test_c.documents]
    n_slots = max(sum(len(s) for s in d) for d in heldout)
    sched = training.LrSchedule(0.05, cfg.lr_end,
                                n_slots * args.infer_passes)
    ppl, n = inference.perplexity(state, heldout, sched, args.infer_passes,
                                  np.random.default_rng(args.seed), rho=0.0)
    base, _ = unigram_perplexity(vocab, heldout)
    verdict = "beats" if ppl < base else "does NOT beat"
    print(f"model perplexity={ppl:.1f} unigram baseline={base:.1f} "
          f"({n} tokens) -> model {verdict} the baseline")
    return 0 if ppl < base else 1


if __name__ == "__main__":
    sys.exit(main())
