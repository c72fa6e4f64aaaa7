"""Compare the numba and numpy percolation kernels on a large synthetic index.

    python3 benchmarks/bench_percolate.py --docs 200000 --inputs 2000
"""

import argparse
import time

import numpy as np

from affmatch import _kernels
from affmatch.percolator import CriterionIndex, QueryKind


def build(rng, n_docs, vocab):
    idx = CriterionIndex("bench")
    words = [f"w{i}" for i in range(vocab)]
    # zipf-ish term frequencies, like real organisation names
    p = 1.0 / np.arange(1, vocab + 1)
    p /= p.sum()
    lengths = rng.integers(1, 7, size=n_docs)
    drawn = rng.choice(vocab, size=int(lengths.sum()), p=p)
    bounds = np.concatenate(([0], np.cumsum(lengths)))
    for i in range(n_docs):
        text = " ".join(words[j] for j in drawn[bounds[i] : bounds[i + 1]])
        kind = QueryKind.BAG if i % 3 == 0 else QueryKind.PHRASE
        idx.add(text, {f"id{i}"}, kind)
    return idx.freeze(), words, p


def inputs(rng, words, p, n, length):
    drawn = rng.choice(len(words), size=(n, length), p=p)
    return [" ".join(words[j] for j in row) for row in drawn]


def run(idx, texts, backend):
    t0 = time.perf_counter()
    hits = sum(len(idx.percolate(t, backend=backend)) for t in texts)
    return time.perf_counter() - t0, hits


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--docs", type=int, default=100_000)
    ap.add_argument("--vocab", type=int, default=20_000)
    ap.add_argument("--inputs", type=int, default=1_000)
    ap.add_argument("--length", type=int, default=25, help="tokens per input")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    t0 = time.perf_counter()
    idx, words, p = build(rng, args.docs, args.vocab)
    print(f"index: {len(idx)} stored queries, built in {time.perf_counter() - t0:.2f}s")
    texts = inputs(rng, words, p, args.inputs, args.length)

    results = {}
    for backend in _kernels.BACKENDS:
        idx.percolate(texts[0], backend=backend)  # compile / warm caches
        elapsed, hits = run(idx, texts, backend)
        results[backend] = hits
        per = 1e6 * elapsed / len(texts)
        print(f"{backend:<6} {elapsed:8.3f}s  {per:9.1f} us/input  hits={hits}")
    if len(set(results.values())) > 1:
        raise SystemExit("backends disagree")


if __name__ == "__main__":
    main()
