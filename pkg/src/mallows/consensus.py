"""Central-ranking (Kemeny-type consensus) search.

The objective for a candidate center ``c`` is the weighted stage
discordance ``sum_obs sum_j w_j s_j(obs, c)``. It decomposes over item
pairs: ``cost(c) = sum_{a before b in c} W[b, a]`` where ``W[b, a]`` is the
weight of observations that choose ``b`` while ``a`` is still available.
For complete rankings with unit weights this is the summed Kendall tau.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations

import numpy as np

from .ranking import RankingDataset

EXACT_LIMIT = 9


@dataclass(frozen=True)
class ConsensusResult:
    center: tuple[int, ...]
    objective: float
    method: str
    initial_objective: float | None = None


def pairwise_matrix(data: RankingDataset, items: Sequence[int], stage_weights: Sequence[float] | None = None) -> np.ndarray:
    """``W[b, a]`` over the given item list (indices follow ``items``).

    Stages beyond ``len(stage_weights)`` get weight zero; ``None`` gives
    every stage weight one.
    """
    index = {item: k for k, item in enumerate(items)}
    m = len(items)
    W = np.zeros((m, m))
    for obs, count in data:
        idx = [index[i] for i in obs]
        present = np.zeros(m, dtype=bool)
        for pos, b in enumerate(idx):
            if stage_weights is None:
                w = 1.0
            elif pos < len(stage_weights):
                w = float(stage_weights[pos])
            else:
                break
            if w == 0.0:
                present[b] = True
                continue
            # b beats every item not chosen before it
            row = W[b]
            row += count * w
            row[present] -= count * w
            row[b] -= count * w
            present[b] = True
    return W


def objective(W: np.ndarray, order: Sequence[int]) -> float:
    """Cost of an ordering given as item indices, best first."""
    order = np.asarray(order)
    M = W[np.ix_(order, order)]
    # entries below the diagonal: later item b over earlier item a
    return float(np.tril(M, -1).sum())


@lru_cache(maxsize=16)
def _pair_table(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Word lists of S_m (lexicographic) and their pair-order indicators."""
    words = np.array(list(permutations(range(m))), dtype=np.int8)
    pairs = np.array(list(combinations(range(m), 2)), dtype=np.int64).reshape(-1, 2)
    before = (words[:, pairs[:, 0]] < words[:, pairs[:, 1]]).astype(np.int8)
    return words, pairs, before


def exact_scores(W: np.ndarray) -> np.ndarray:
    """Objective of every ordering, indexed like lexicographic word lists.

    ``W`` may carry leading batch dimensions: shape ``(..., m, m)``.
    """
    m = W.shape[-1]
    _, pairs, before = _pair_table(m)
    a, b = pairs[:, 0], pairs[:, 1]
    base = W[..., a, b].sum(axis=-1)
    diff = W[..., b, a] - W[..., a, b]
    return base[..., None] + diff @ before.T.astype(float)


def _argmin_first(scores: np.ndarray) -> np.ndarray:
    best = scores.min(axis=-1, keepdims=True)
    tol = 1e-9 * np.maximum(1.0, np.abs(best))
    return np.argmax(scores <= best + tol, axis=-1)


def exact_center(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact minimiser(s) by enumeration, ties to the smallest word list.

    Returns ``(words, objective)``; words are 0-based ranks per item index.
    Works batched over leading dimensions of ``W``.
    """
    m = W.shape[-1]
    if m > EXACT_LIMIT:
        raise ValueError(f"exact search limited to {EXACT_LIMIT} items, got {m}")
    words, _, _ = _pair_table(m)
    scores = exact_scores(W)
    k = _argmin_first(scores)
    return words[k].astype(np.int64), np.take_along_axis(scores, k[..., None], axis=-1)[..., 0]


def borda_order(data: RankingDataset, items: Sequence[int]) -> list[int]:
    """Initial ordering of item indices by mean observed position.

    An item missing from an observation of length k counts as position
    k + 1; ties go to the more frequent item, then the smaller id.
    """
    index = {item: k for k, item in enumerate(items)}
    m = len(items)
    total = np.zeros(m)
    freq = np.zeros(m)
    n = 0
    for obs, count in data:
        pos = np.full(m, len(obs) + 1.0)
        for p, item in enumerate(obs, start=1):
            pos[index[item]] = p
            freq[index[item]] += count
        total += count * pos
        n += count
    score = total / max(n, 1)
    return sorted(range(m), key=lambda k: (score[k], -freq[k], items[k]))


def _adjacent_descent(D: np.ndarray, order: list[int], eps: float) -> tuple[list[int], int]:
    order = np.array(order)
    steps = 0
    while len(order) > 1:
        deltas = D[order[:-1], order[1:]]
        i = int(np.argmin(deltas))
        if deltas[i] >= -eps:
            break
        order[i], order[i + 1] = order[i + 1], order[i]
        steps += 1
    return order.tolist(), steps


def _pair_deltas(D: np.ndarray, order: list[int]) -> np.ndarray:
    """Objective change for swapping positions i < j, all pairs at once."""
    M = D[np.ix_(order, order)]
    m = len(order)
    rowcum = np.cumsum(M, axis=1)
    colcum = np.cumsum(M, axis=0)
    i, j = np.triu_indices(m, 1)
    inner_row = rowcum[i, j - 1] - rowcum[i, i]
    inner_col = colcum[j - 1, j] - colcum[i, j]
    out = np.full((m, m), np.inf)
    out[i, j] = M[i, j] + inner_row + inner_col
    return out


def local_search(W: np.ndarray, order: list[int], max_rounds: int | None = None) -> list[int]:
    """Adjacent-swap steepest descent, then arbitrary pair swaps.

    Pair swaps are taken best-first, each followed by a fresh adjacent
    descent, until neither move improves the objective.
    """
    D = W - W.T
    eps = 1e-9 * max(1.0, float(np.abs(W).max(initial=0.0)))
    order, _ = _adjacent_descent(D, list(order), eps)
    m = len(order)
    rounds = max_rounds if max_rounds is not None else m * m
    for _ in range(rounds):
        if m < 3:
            break
        deltas = _pair_deltas(D, order)
        flat = int(np.argmin(deltas))
        i, j = divmod(flat, m)
        if deltas[i, j] >= -eps:
            break
        order[i], order[j] = order[j], order[i]
        order, _ = _adjacent_descent(D, order, eps)
    return order


def _word_key(order: Sequence[int]) -> tuple[int, ...]:
    word = [0] * len(order)
    for rank, k in enumerate(order):
        word[k] = rank
    return tuple(word)


def fit_center(
    data: RankingDataset,
    stage_weights: Sequence[float] | None = None,
    method: str = "auto",
    restarts: int = 0,
    rng: np.random.Generator | None = None,
) -> ConsensusResult:
    """Estimate the central ranking of a dataset.

    Parameters
    ----------
    data : RankingDataset
        Complete or top-t observations.
    stage_weights : sequence of float, optional
        Per-stage weights ``theta_j`` of the discordance; default all ones.
    method : {"auto", "exact", "heuristic"}
        ``auto`` enumerates when at most 9 items are observed.
    restarts : int
        Extra heuristic runs from randomly perturbed Borda orders.

    Returns
    -------
    ConsensusResult
        ``center`` is a ranked list over the observed items. Ties in the
        objective resolve to the lexicographically smallest word list.
    """
    if len(data) == 0:
        raise ValueError("cannot estimate a center from an empty dataset")
    items = data.items()
    if data.universe is not None and data.is_complete():
        items = list(range(1, data.universe + 1))
    W = pairwise_matrix(data, items, stage_weights)
    m = len(items)
    if method == "auto":
        method = "exact" if m <= EXACT_LIMIT else "heuristic"
    if method == "exact":
        words, best = exact_center(W)
        order = np.argsort(words)
        return ConsensusResult(tuple(items[k] for k in order), float(best), "exact")
    if method != "heuristic":
        raise ValueError(f"unknown consensus method {method!r}")

    init = borda_order(data, items)
    init_obj = objective(W, init)
    best_order = local_search(W, init)
    best_obj = objective(W, best_order)
    if restarts:
        rng = rng if rng is not None else np.random.default_rng(0)
        for _ in range(restarts):
            start = list(init)
            # perturb by a handful of random adjacent swaps
            for _ in range(max(1, m // 4)):
                i = int(rng.integers(0, max(m - 1, 1)))
                if i + 1 < m:
                    start[i], start[i + 1] = start[i + 1], start[i]
            cand = local_search(W, start)
            obj = objective(W, cand)
            if obj < best_obj - 1e-9 or (abs(obj - best_obj) <= 1e-9 and _word_key(cand) < _word_key(best_order)):
                best_order, best_obj = cand, obj
    return ConsensusResult(tuple(items[k] for k in best_order), best_obj, "heuristic", init_obj)


def pairwise_counts_words(words: np.ndarray) -> np.ndarray:
    """``W[..., b, a]``: number of samples ranking item b above item a.

    ``words`` has shape ``(..., N, n)`` with 1-based word lists.
    """
    w = np.asarray(words)
    before = w[..., :, :, None] < w[..., :, None, :]
    return before.sum(axis=-3).astype(float)
