"""Exact permutation combinatorics.

All interfaces are 1-based. A permutation is held as its *word list*
``(pi(1), ..., pi(n))`` where ``pi(i)`` is the rank given to item ``i``;
the *ranked list* ``(pi^-1(1) | ... | pi^-1(n))`` lists items from most to
least preferred.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

MAX_SIZE = 10**6


class _Fenwick:
    """Binary indexed tree over positions 1..size holding counts."""

    __slots__ = ("size", "tree")

    def __init__(self, size: int, fill: int = 0):
        self.size = size
        if fill:
            # O(n) construction of an all-`fill` tree
            tree = [0] + [fill] * size
            for i in range(1, size + 1):
                j = i + (i & -i)
                if j <= size:
                    tree[j] += tree[i]
            self.tree = tree
        else:
            self.tree = [0] * (size + 1)

    def add(self, i: int, delta: int) -> None:
        tree, size = self.tree, self.size
        while i <= size:
            tree[i] += delta
            i += i & -i

    def prefix(self, i: int) -> int:
        tree, total = self.tree, 0
        while i > 0:
            total += tree[i]
            i -= i & -i
        return total

    def find_kth(self, k: int) -> int:
        """Smallest position whose prefix count reaches k (k >= 1)."""
        tree, pos = self.tree, 0
        step = 1 << self.size.bit_length()
        while step:
            nxt = pos + step
            if nxt <= self.size and tree[nxt] < k:
                pos = nxt
                k -= tree[nxt]
            step >>= 1
        return pos + 1


def _check_word(word: Sequence[int], max_size: int = MAX_SIZE) -> tuple[int, ...]:
    word = tuple(int(v) for v in word)
    n = len(word)
    if n == 0:
        raise ValueError("permutation must have at least one element")
    if n > max_size:
        raise ValueError(f"permutation size {n} exceeds the configured maximum {max_size}")
    seen = bytearray(n + 1)
    for v in word:
        if v < 1 or v > n or seen[v]:
            raise ValueError(f"word {word[:20]}... is not a bijection on 1..{n}")
        seen[v] = 1
    return word


@dataclass(frozen=True)
class Permutation:
    """A bijection on ``{1, ..., n}`` stored as its word list."""

    word: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "word", _check_word(self.word))

    @classmethod
    def from_ranked(cls, ranked: Sequence[int]) -> Permutation:
        """Build from a ranked list ``(best | second | ... )`` of items."""
        return cls(_inverse_word(_check_word(ranked)))

    @property
    def n(self) -> int:
        return len(self.word)

    @property
    def ranked(self) -> tuple[int, ...]:
        return _inverse_word(self.word)

    def __len__(self) -> int:
        return len(self.word)

    def __iter__(self):
        return iter(self.word)

    def __getitem__(self, item):
        return self.word[item]

    def __str__(self) -> str:
        return "(" + "|".join(map(str, self.ranked)) + ")"


PermLike = Permutation | Sequence[int]


def _word(p: PermLike) -> tuple[int, ...]:
    if isinstance(p, Permutation):
        return p.word
    return _check_word(p)


def _inverse_word(word: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(word)
    for i, v in enumerate(word, start=1):
        inv[v - 1] = i
    return tuple(inv)


def identity(n: int) -> Permutation:
    return Permutation(tuple(range(1, n + 1)))


def invert(p: PermLike) -> Permutation:
    return Permutation(_inverse_word(_word(p)))


def compose(p: PermLike, q: PermLike) -> Permutation:
    """Return ``p o q``, i.e. ``i -> p(q(i))``."""
    pw, qw = _word(p), _word(q)
    if len(pw) != len(qw):
        raise ValueError(f"size mismatch: {len(pw)} vs {len(qw)}")
    return Permutation(tuple(pw[v - 1] for v in qw))


def relative(p: PermLike, center: PermLike) -> Permutation:
    """Return ``p o center^-1``, the ranking seen through the center."""
    return compose(p, invert(center))


def _count_inversions(values: Sequence[int]) -> int:
    # values are distinct; compress to 1..n for the tree
    order = sorted(range(len(values)), key=values.__getitem__)
    rank = [0] * len(values)
    for r, idx in enumerate(order, start=1):
        rank[idx] = r
    tree = _Fenwick(len(values))
    total = 0
    for seen, r in enumerate(rank):
        total += seen - tree.prefix(r)
        tree.add(r, 1)
    return total


def inversions(p: PermLike) -> int:
    """Number of pairs ``i < j`` with ``pi(i) > pi(j)``, in O(n log n).

    >>> inversions((3, 2, 1))
    3
    """
    return _count_inversions(_word(p))


def kendall_tau(p: PermLike, q: PermLike) -> int:
    """Kendall's tau distance ``inv(p o q^-1)``."""
    return inversions(relative(p, q))


def prefix_inversion_table(ranked: Sequence[int]) -> list[int]:
    """Stage discordances of a ranked prefix of distinct positive integers.

    For a ranked prefix ``(r_1, ..., r_t)`` (the values ``pi^-1(j)``),
    ``s_j = r_j - 1 - #{j' < j : r_j' < r_j}``: the number of still unused
    positive integers below ``r_j``. Works for prefixes of permutations of
    the positive integers as well as for complete finite permutations.
    """
    ranked = [int(v) for v in ranked]
    if not ranked:
        return []
    if min(ranked) < 1:
        raise ValueError("ranked prefix entries must be positive")
    if len(set(ranked)) != len(ranked):
        seen = set()
        for j, v in enumerate(ranked):
            if v in seen:
                raise ValueError(f"duplicate entry {v} at position {j + 1}")
            seen.add(v)
    order = sorted(range(len(ranked)), key=ranked.__getitem__)
    comp = [0] * len(ranked)
    for r, idx in enumerate(order, start=1):
        comp[idx] = r
    tree = _Fenwick(len(ranked))
    table = []
    for v, c in zip(ranked, comp):
        below = tree.prefix(c - 1)
        table.append(v - 1 - below)
        tree.add(c, 1)
    return table


def inversion_table(p: PermLike) -> list[int]:
    """Inversion table ``(s_1, ..., s_{n-1})`` with ``s_j`` in ``0..n-j``.

    ``s_j = k`` means that at stage ``j`` the ``(k+1)``-th smallest of the
    remaining ranks was taken. The entries sum to ``inversions(p)``.
    """
    word = _word(p)
    return prefix_inversion_table(_inverse_word(word))[: len(word) - 1]


def decode_inversion_table(s: Sequence[int], n: int) -> Permutation:
    """Inverse of :func:`inversion_table`.

    ``s`` may have length ``n - 1`` or ``n`` (a trailing zero is allowed).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if len(s) not in (n - 1, n):
        raise ValueError(f"inversion table of length {len(s)} does not fit n={n}")
    tree = _Fenwick(n, fill=1)
    ranked = []
    for j in range(1, n + 1):
        k = int(s[j - 1]) if j <= len(s) else 0
        if not 0 <= k <= n - j:
            raise ValueError(f"stage {j}: s_{j}={k} outside 0..{n - j}")
        v = tree.find_kth(k + 1)
        tree.add(v, -1)
        ranked.append(v)
    return Permutation(_inverse_word(ranked))


def splitting_times(prefix: Sequence[int]) -> list[int]:
    """Positions ``m`` at which the prefix maps ``{1..m}`` onto itself.

    Only splitting times within the prefix are reported; a trailing block
    after the last one may be an incomplete component.
    """
    times = []
    running = 0
    for m, v in enumerate(prefix, start=1):
        if v > running:
            running = v
        if running == m:
            times.append(m)
    return times


def components(prefix: Sequence[int], include_partial: bool = False) -> list[tuple[int, tuple[int, ...]]]:
    """Split a prefix into ``(length, reduced component)`` blocks.

    Each reduced component is an indecomposable permutation of
    ``1..length``, obtained by subtracting the block's offset.
    """
    out = []
    start = 0
    for m in splitting_times(prefix):
        block = prefix[start:m]
        out.append((m - start, tuple(int(v) - start for v in block)))
        start = m
    if include_partial and start < len(prefix):
        out.append((len(prefix) - start, tuple(int(v) - start for v in prefix[start:])))
    return out


def all_permutations(n: int) -> Iterable[tuple[int, ...]]:
    """Word lists of all of S_n in lexicographic order."""
    from itertools import permutations

    return permutations(range(1, n + 1))
