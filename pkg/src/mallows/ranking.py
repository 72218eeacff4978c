"""Top-t rankings and central orders over the positive integers."""

from __future__ import annotations

from bisect import bisect_right
from collections.abc import Sequence

import numpy as np

from .permutation import prefix_inversion_table


def check_top_t(items: Sequence[int]) -> tuple[int, ...]:
    """Validate a ranked prefix of distinct positive item ids."""
    items = tuple(int(i) for i in items)
    if not items:
        raise ValueError("a top-t ranking needs at least one item")
    if min(items) < 1:
        raise ValueError(f"item ids must be positive: {items}")
    if len(set(items)) != len(items):
        raise ValueError(f"duplicate item in ranking {items}")
    return items


class CenterOrder:
    """A ranking of all positive integers given by a ranked prefix.

    Items listed in ``ranked`` come first, in that order; every other
    positive integer follows in increasing id order. With an empty prefix
    this is the identity ordering.
    """

    def __init__(self, ranked: Sequence[int] = ()):
        self.ranked = check_top_t(ranked) if len(ranked) else ()
        self._pos = {item: r for r, item in enumerate(self.ranked, start=1)}
        self._listed = sorted(self.ranked)

    def __len__(self) -> int:
        return len(self.ranked)

    def __repr__(self) -> str:
        return f"CenterOrder({'|'.join(map(str, self.ranked))})"

    def rank_of(self, item: int) -> int:
        r = self._pos.get(item)
        if r is not None:
            return r
        # unlisted items keep id order after the prefix
        return len(self.ranked) + item - bisect_right(self._listed, item)

    def item_at(self, rank: int) -> int:
        m = len(self.ranked)
        if rank <= m:
            return self.ranked[rank - 1]
        k = rank - m
        # k-th positive integer not in the listed set
        v = k
        for u in self._listed:
            if u <= v:
                v += 1
            else:
                break
        return v

    def items_at(self, ranks: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`item_at` over an integer array of ranks."""
        ranks = np.asarray(ranks, dtype=np.int64)
        m = len(self.ranked)
        out = ranks - m
        for u in self._listed:
            out = out + (u <= out)
        if m:
            head = np.asarray(self.ranked, dtype=np.int64)
            inside = ranks <= m
            out = np.where(inside, head[np.clip(ranks, 1, m) - 1], out)
        return out

    def ranks_of(self, items: Sequence[int]) -> list[int]:
        return [self.rank_of(int(i)) for i in items]

    def top(self, t: int) -> tuple[int, ...]:
        return tuple(self.item_at(r) for r in range(1, t + 1))


def as_center(center) -> CenterOrder:
    if center is None:
        return CenterOrder()
    if isinstance(center, CenterOrder):
        return center
    return CenterOrder(tuple(center))


def stage_table(items: Sequence[int], center) -> list[int]:
    """Stage discordances ``s_j(pi o pi0^-1)`` of a top-t ranking.

    ``s_j`` counts the items not yet chosen before stage ``j`` that the
    center prefers to the item actually chosen at stage ``j``.
    """
    center = as_center(center)
    return prefix_inversion_table(center.ranks_of(items))


class RankingDataset:
    """Multiset of top-t rankings with multiplicities.

    ``universe`` is the number of items when it is known (items are then
    ``1..universe``); ``None`` means an open universe of positive ids.
    """

    def __init__(self, observations=(), counts=None, universe: int | None = None, source: str | None = None, fmt: str | None = None):
        obs = [check_top_t(o) for o in observations]
        if counts is None:
            counts = [1] * len(obs)
        counts = [int(c) for c in counts]
        if len(counts) != len(obs):
            raise ValueError("counts and observations differ in length")
        if any(c < 1 for c in counts):
            raise ValueError("multiplicities must be >= 1")
        if universe is not None:
            universe = int(universe)
            for o in obs:
                if max(o) > universe:
                    raise ValueError(f"item {max(o)} outside universe 1..{universe}")
        self.observations: list[tuple[int, ...]] = obs
        self.counts: list[int] = counts
        self.universe = universe
        self.source = source
        self.format = fmt

    @classmethod
    def from_rankings(cls, rankings, universe: int | None = None) -> RankingDataset:
        """Aggregate repeated rankings, keeping first-seen order."""
        tally: dict[tuple[int, ...], int] = {}
        for r in rankings:
            key = check_top_t(r)
            tally[key] = tally.get(key, 0) + 1
        return cls(list(tally), list(tally.values()), universe=universe)

    @classmethod
    def from_words(cls, words) -> RankingDataset:
        """Complete rankings given as word lists (rows of an array)."""
        ranked = []
        n = None
        for w in words:
            w = [int(v) for v in w]
            n = len(w)
            r = [0] * n
            for item, rank in enumerate(w, start=1):
                r[rank - 1] = item
            ranked.append(r)
        return cls.from_rankings(ranked, universe=n)

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self):
        return iter(zip(self.observations, self.counts))

    def __eq__(self, other) -> bool:
        if not isinstance(other, RankingDataset):
            return NotImplemented
        return (self.observations, self.counts, self.universe) == (other.observations, other.counts, other.universe)

    def __repr__(self) -> str:
        return f"RankingDataset(distinct={len(self)}, N={self.n_samples}, t_max={self.t_max if self.observations else 0}, universe={self.universe})"

    @property
    def n_samples(self) -> int:
        return sum(self.counts)

    @property
    def t_max(self) -> int:
        if not self.observations:
            raise ValueError("empty dataset")
        return max(len(o) for o in self.observations)

    def items(self) -> list[int]:
        """Sorted ids of every item that appears somewhere."""
        seen = set()
        for o in self.observations:
            seen.update(o)
        return sorted(seen)

    def is_complete(self) -> bool:
        if self.universe is None or not self.observations:
            return False
        return all(len(o) == self.universe for o in self.observations)

    def truncate(self, t: int) -> RankingDataset:
        """Top-t prefixes of every observation, re-aggregated."""
        if t < 1:
            raise ValueError("t must be >= 1")
        tally: dict[tuple[int, ...], int] = {}
        for o, c in self:
            key = o[:t]
            tally[key] = tally.get(key, 0) + c
        return RankingDataset(list(tally), list(tally.values()), universe=self.universe, source=self.source, fmt=self.format)

    def words(self) -> list[tuple[int, ...]]:
        """Word lists of complete observations, expanded by multiplicity."""
        if not self.is_complete():
            raise ValueError("word lists need complete rankings of a known universe")
        out = []
        for o, c in self:
            w = [0] * len(o)
            for rank, item in enumerate(o, start=1):
                w[item - 1] = rank
            out.extend([tuple(w)] * c)
        return out
