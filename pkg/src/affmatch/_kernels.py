"""Percolation kernels over a frozen CSR query layout.

Both backends take the same arrays and return the same triple::

    bag_hits      int64[k]  bag query ids whose required term count is met
    phrase_q      int64[m]  phrase query ids ...
    phrase_start  int64[m]  ... and the input position each occurrence starts at

Arrays (built by ``CriterionIndex.freeze``):

    input_terms   int64[n]  term id per input position, -1 when out of vocabulary
    unique_terms  int64[u]  sorted distinct non-negative ids of ``input_terms``
    q_ptr/q_terms           per-query term ids (phrase: full sequence, bag: unique)
    q_required    int64[Q]  bag: terms needed; phrase: sequence length
    bag_ptr/bag_q           term id -> bag queries containing it
    first_ptr/first_q       term id -> phrase queries starting with it

Set ``AFFMATCH_KERNEL=numpy`` to force the pure-numpy path; the default is
numba when it imports.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


def percolate_numpy(
    input_terms, unique_terms, q_ptr, q_terms, q_required, bag_ptr, bag_q, first_ptr, first_q
):
    # bag: count unique input terms per query
    starts = bag_ptr[unique_terms]
    lengths = bag_ptr[unique_terms + 1] - starts
    postings = _gather(bag_q, starts, lengths)
    if postings.size:
        qs, counts = np.unique(postings, return_counts=True)
        bag_hits = qs[counts >= q_required[qs]]
    else:
        bag_hits = np.empty(0, np.int64)

    # phrase: candidates anchored on the first term, then verified
    n = input_terms.size
    known = np.flatnonzero(input_terms >= 0)
    t = input_terms[known]
    starts = first_ptr[t]
    lengths = first_ptr[t + 1] - starts
    cand_q = _gather(first_q, starts, lengths)
    cand_pos = np.repeat(known, lengths)
    qlen = q_ptr[cand_q + 1] - q_ptr[cand_q]
    fits = cand_pos + qlen <= n
    cand_q, cand_pos, qlen = cand_q[fits], cand_pos[fits], qlen[fits]
    if cand_q.size == 0:
        return bag_hits, np.empty(0, np.int64), np.empty(0, np.int64)
    within = _ranges(qlen)
    owner = np.repeat(np.arange(cand_q.size), qlen)
    expected = q_terms[q_ptr[cand_q][owner] + within]
    actual = input_terms[cand_pos[owner] + within]
    mismatches = np.bincount(owner, weights=(expected != actual), minlength=cand_q.size)
    ok = mismatches == 0
    return bag_hits, cand_q[ok], cand_pos[ok]


def _ranges(lengths):
    # concatenation of arange(l) for each l
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, np.int64)
    offsets = np.repeat(np.cumsum(lengths) - lengths, lengths)
    return np.arange(total, dtype=np.int64) - offsets


def _gather(values, starts, lengths):
    if lengths.size == 0:
        return np.empty(0, np.int64)
    idx = np.repeat(starts, lengths) + _ranges(lengths)
    return values[idx].astype(np.int64, copy=False)


@njit(cache=True, nogil=True)
def percolate_numba(
    input_terms, unique_terms, q_ptr, q_terms, q_required, bag_ptr, bag_q, first_ptr, first_q
):
    n_queries = q_required.size
    counts = np.zeros(n_queries, np.int64)
    total = 0
    for t in unique_terms:
        total += bag_ptr[t + 1] - bag_ptr[t]
    bag_hits = np.empty(total, np.int64)
    k = 0
    for t in unique_terms:
        for j in range(bag_ptr[t], bag_ptr[t + 1]):
            q = bag_q[j]
            counts[q] += 1
            if counts[q] == q_required[q]:
                bag_hits[k] = q
                k += 1
    bag_hits = np.sort(bag_hits[:k])

    n = input_terms.size
    total = 0
    for p in range(n):
        t = input_terms[p]
        if t >= 0:
            total += first_ptr[t + 1] - first_ptr[t]
    phrase_q = np.empty(total, np.int64)
    phrase_start = np.empty(total, np.int64)
    m = 0
    for p in range(n):
        t = input_terms[p]
        if t < 0:
            continue
        for j in range(first_ptr[t], first_ptr[t + 1]):
            q = first_q[j]
            a = q_ptr[q]
            length = q_ptr[q + 1] - a
            if p + length > n:
                continue
            ok = True
            for i in range(1, length):
                if input_terms[p + i] != q_terms[a + i]:
                    ok = False
                    break
            if ok:
                phrase_q[m] = q
                phrase_start[m] = p
                m += 1
    return bag_hits, phrase_q[:m], phrase_start[:m]


BACKENDS = {"numpy": percolate_numpy}
if HAVE_NUMBA:
    BACKENDS["numba"] = percolate_numba


def default_backend() -> str:
    name = os.environ.get("AFFMATCH_KERNEL", "").strip().lower()
    if name:
        if name not in BACKENDS:
            raise ValueError(f"AFFMATCH_KERNEL={name!r}; available: {sorted(BACKENDS)}")
        return name
    return "numba" if HAVE_NUMBA else "numpy"
