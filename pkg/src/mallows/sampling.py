"""Exact samplers for the Mallows family.

Every sampler takes an explicit ``numpy.random.Generator``; there is no
module-level random state.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from sortedcontainers import SortedList

from .permutation import Permutation
from .ranking import CenterOrder, as_center  # noqa: F401

STREAM_CAP = 10**6


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)) or np.any(theta <= 0):
        raise ValueError(f"dispersion must be positive and finite, got {theta}")
    return theta


def truncated_geometric_pmf(theta: float, k: int) -> np.ndarray:
    """``P(G = i) = q^i (1 - q) / (1 - q^k)`` for ``i = 0..k-1``, ``q = e^-theta``."""
    _check_theta(theta)
    if k < 1:
        raise ValueError("support size must be >= 1")
    i = np.arange(k)
    return np.exp(-theta * i) * (-math.expm1(-theta)) / (-math.expm1(-k * theta))


def sample_truncated_geometric(theta, k, rng: np.random.Generator, size=None):
    """Draw from the geometric law conditioned on ``{0, ..., k-1}``.

    Uses the closed-form inverse CDF on a single uniform per draw.
    ``theta`` and ``k`` broadcast against ``size``.
    """
    theta = _check_theta(theta)
    k = np.asarray(k, dtype=np.int64)
    if np.any(k < 1):
        raise ValueError("support size must be >= 1")
    u = rng.random(size)
    # log(1 - U (1 - q^k)) / log q with q = exp(-theta)
    mass = -np.expm1(-k * theta)
    draw = np.floor(-np.log1p(-u * mass) / theta)
    out = np.clip(draw, 0, k - 1).astype(np.int64)
    return int(out) if np.ndim(out) == 0 else out


def sample_geometric(theta, rng: np.random.Generator, size=None):
    """Geometric on ``{0, 1, ...}`` with success probability ``1 - e^-theta``."""
    theta = _check_theta(theta)
    out = np.floor(rng.standard_exponential(size) / theta).astype(np.int64)
    return int(out) if np.ndim(out) == 0 else out


def decode_tables(tables: np.ndarray, n: int) -> np.ndarray:
    """Vectorised inversion-table decoding.

    ``tables`` has shape ``(size, n - 1)``; returns the ranked lists
    ``(size, n)`` of the corresponding permutations of ``1..n``.
    """
    tables = np.asarray(tables, dtype=np.int64)
    size = tables.shape[0]
    remaining = np.tile(np.arange(1, n + 1, dtype=np.int64), (size, 1))
    ranked = np.empty((size, n), dtype=np.int64)
    rows = np.arange(size)
    for j in range(n - 1):
        width = n - j
        idx = tables[:, j]
        ranked[:, j] = remaining[rows, idx]
        keep = np.arange(width)[None, :] != idx[:, None]
        remaining = remaining[keep].reshape(size, width - 1)
    ranked[:, n - 1] = remaining[:, 0]
    return ranked


def _ranked_to_words(ranked: np.ndarray) -> np.ndarray:
    size, n = ranked.shape
    words = np.empty_like(ranked)
    words[np.arange(size)[:, None], ranked - 1] = np.arange(1, n + 1)[None, :]
    return words


def _apply_center(rel_ranked: np.ndarray, center) -> np.ndarray:
    """Ranked lists of ``sigma o center`` given ranked lists of ``sigma``."""
    if center is None:
        return rel_ranked
    # a Permutation is a word list; a plain sequence is a ranked list
    ranked = center.ranked if isinstance(center, Permutation) else Permutation.from_ranked(tuple(int(v) for v in center)).ranked
    if len(ranked) != rel_ranked.shape[1]:
        raise ValueError(f"center has size {len(ranked)}, expected {rel_ranked.shape[1]}")
    center_ranked = np.asarray(ranked, dtype=np.int64)
    return center_ranked[rel_ranked - 1]


def sample_gm(n: int, thetas: Sequence[float], rng: np.random.Generator, center=None, size=None):
    """Sample the Generalized Mallows model with stage dispersions ``thetas``.

    Returns a :class:`Permutation` when ``size`` is None, otherwise an
    ``(size, n)`` integer array of word lists.
    """
    if n < 1:
        raise ValueError("n must be positive")
    thetas = _check_theta(np.asarray(thetas, dtype=float).reshape(-1)) if n > 1 else np.zeros(0)
    if thetas.size != n - 1:
        raise ValueError(f"need {n - 1} stage dispersions, got {thetas.size}")
    count = 1 if size is None else int(size)
    supports = np.arange(n, 1, -1)
    if n > 1:
        tables = sample_truncated_geometric(thetas[None, :], supports[None, :], rng, size=(count, n - 1))
    else:
        tables = np.zeros((count, 0), dtype=np.int64)
    ranked = _apply_center(decode_tables(tables, n), center)
    words = _ranked_to_words(ranked)
    if size is None:
        return Permutation(tuple(int(v) for v in words[0]))
    return words


def sample_mallows_phi(n: int, theta: float, rng: np.random.Generator, center=None, size=None):
    """Exact sample from Mallows' phi model via its multistage form."""
    _check_theta(theta)
    return sample_gm(n, np.full(max(n - 1, 0), float(theta)), rng, center=center, size=size)


def sample_igm_top_t(thetas: Sequence[float], rng: np.random.Generator, center=None, size=None):
    """Sample top-t orderings from the Infinite Generalized Mallows model.

    ``s_j`` is geometric on ``{0, 1, ...}`` with success ``1 - e^-theta_j``;
    at stage ``j`` the ``(s_j + 1)``-th best unused item of the central
    order is taken. ``center`` is a ranked prefix over the positive
    integers (unlisted ids follow in id order); ``None`` is the identity.

    Returns a tuple of items, or an ``(size, t)`` array.
    """
    thetas = _check_theta(np.asarray(thetas, dtype=float).reshape(-1))
    t = thetas.size
    if t < 1:
        raise ValueError("need at least one stage")
    count = 1 if size is None else int(size)
    s = sample_geometric(thetas[None, :], rng, size=(count, t))
    rel = psi_decode(s + 1)
    items = as_center(center).items_at(rel)
    if size is None:
        return tuple(int(v) for v in items[0])
    return items


def psi_decode(x: np.ndarray) -> np.ndarray:
    """Vectorised shifted construction: ``Pi_i`` = ``X_i``-th smallest unused.

    ``x`` holds positive integers with shape ``(size, m)``.
    """
    x = np.asarray(x, dtype=np.int64)
    size, m = x.shape
    out = np.empty_like(x)
    used = np.empty((size, 0), dtype=np.int64)
    for i in range(m):
        v = x[:, i].copy()
        for c in range(used.shape[1]):
            v += used[:, c] <= v
        out[:, i] = v
        used = np.sort(np.concatenate([used, v[:, None]], axis=1), axis=1)
    return out


@dataclass(frozen=True)
class FiniteRow:
    """Distribution on ``1..len(probs)`` with ``P(k) = probs[k-1]``."""

    probs: tuple[float, ...]
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("row must be a non-negative probability vector summing to 1")
        object.__setattr__(self, "probs", tuple(float(v) for v in p))
        object.__setattr__(self, "_cdf", np.cumsum(p))

    @property
    def p1(self) -> float:
        return self.probs[0]

    def pmf(self, k: int) -> float:
        return self.probs[k - 1] if 1 <= k <= len(self.probs) else 0.0

    def cumulative(self, n_max: int) -> np.ndarray:
        """``P(X <= i)`` for ``i = 1..n_max``."""
        c = np.ones(n_max)
        m = min(n_max, len(self.probs))
        c[:m] = np.minimum(self._cdf[:m], 1.0)
        return c

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        k = np.searchsorted(self._cdf, u * self._cdf[-1], side="right") + 1
        k = np.minimum(k, len(self.probs))
        return int(k) if np.ndim(k) == 0 else k


@dataclass(frozen=True)
class GeometricRow:
    """Geometric on the positive integers: ``P(k) = (1 - q) q^(k-1)``."""

    q: float

    def __post_init__(self):
        if not 0 <= self.q < 1:
            raise ValueError(f"geometric ratio must lie in [0, 1), got {self.q}")

    @classmethod
    def from_theta(cls, theta: float) -> GeometricRow:
        _check_theta(theta)
        return cls(math.exp(-theta))

    @property
    def p1(self) -> float:
        return 1.0 - self.q

    def pmf(self, k: int) -> float:
        return (1.0 - self.q) * self.q ** (k - 1) if k >= 1 else 0.0

    def cumulative(self, n_max: int) -> np.ndarray:
        return -np.expm1(np.arange(1, n_max + 1) * math.log(self.q)) if self.q > 0 else np.ones(n_max)

    def sample(self, rng: np.random.Generator, size=None):
        if self.q == 0:
            return 1 if size is None else np.ones(size, dtype=np.int64)
        k = np.floor(rng.standard_exponential(size) / -math.log(self.q)).astype(np.int64) + 1
        return int(k) if np.ndim(k) == 0 else k


RowDistribution = FiniteRow | GeometricRow


class UnusedIntegers:
    """The positive integers not yet taken, with O(log n) k-th queries."""

    def __init__(self):
        self._holes = SortedList()
        self._frontier = 1

    def take_kth(self, k: int) -> int:
        if k < 1:
            raise ValueError("k must be >= 1")
        holes = self._holes
        if k <= len(holes):
            return holes.pop(k - 1)
        v = self._frontier + (k - len(holes) - 1)
        holes.update(range(self._frontier, v))
        self._frontier = v + 1
        return v


class PShiftedStream:
    """Extendable prefix of a P-shifted permutation of the positive integers.

    ``rows`` is either a single row distribution (homogeneous case, which
    must have ``p_1 > 0``) or a callable mapping the 1-based index ``i`` to
    the row used for ``X_i``. The recorded ``X_i`` satisfy
    ``prefix_inversion_table(prefix)[i-1] == X_i - 1``.
    """

    def __init__(self, rows: RowDistribution | Callable[[int], RowDistribution], rng: np.random.Generator, cap: int = STREAM_CAP):
        if callable(rows) and not hasattr(rows, "sample"):
            self._row_at = rows
            self._homogeneous = None
        else:
            if rows.p1 <= 0:
                raise ValueError("homogeneous row distribution needs p_1 > 0")
            self._row_at = None
            self._homogeneous = rows
        self.rng = rng
        self.cap = cap
        self.prefix: list[int] = []
        self.draws: list[int] = []
        self._unused = UnusedIntegers()

    def __len__(self) -> int:
        return len(self.prefix)

    def _draw_block(self, m: int) -> np.ndarray:
        if self._homogeneous is not None:
            return np.atleast_1d(self._homogeneous.sample(self.rng, size=m))
        start = len(self.prefix) + 1
        return np.array([self._row_at(i).sample(self.rng) for i in range(start, start + m)], dtype=np.int64)

    def extend(self, m: int) -> list[int]:
        """Append ``m`` more positions and return the new values."""
        if len(self.prefix) + m > self.cap:
            raise OverflowError(f"stream cap of {self.cap} positions exceeded")
        new = []
        for x in self._draw_block(m):
            x = int(x)
            self.draws.append(x)
            v = self._unused.take_kth(x)
            self.prefix.append(v)
            new.append(v)
        return new


def sample_p_shifted(rows, m: int, rng: np.random.Generator, cap: int = STREAM_CAP) -> list[int]:
    """First ``m`` values ``(Pi_1, ..., Pi_m)`` of a P-shifted permutation."""
    stream = PShiftedStream(rows, rng, cap=cap)
    return stream.extend(m)


def shifted_from_draws(draws: Sequence[int]) -> list[int]:
    """Deterministic shifted construction from given ``X_1, X_2, ...``.

    >>> shifted_from_draws([2, 1, 2, 3, 4, 1])
    [2, 1, 4, 6, 8, 3]
    """
    unused = UnusedIntegers()
    return [unused.take_kth(int(x)) for x in draws]


__all__ = [
    "CenterOrder",
    "FiniteRow",
    "GeometricRow",
    "PShiftedStream",
    "UnusedIntegers",
    "decode_tables",
    "psi_decode",
    "sample_geometric",
    "sample_gm",
    "sample_igm_top_t",
    "sample_mallows_phi",
    "sample_p_shifted",
    "sample_truncated_geometric",
    "shifted_from_draws",
    "truncated_geometric_pmf",
]
