"""Renewal structure of shifted random permutations of the positive integers.

A shifted permutation splits at its splitting times into i.i.d.
components. For the single-parameter infinite Mallows permutation the
mean component length is ``1 / (e^-theta; e^-theta)_inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sampling import STREAM_CAP, GeometricRow, PShiftedStream

PGF_NMAX = 200


def q_pochhammer(a: float, q: float, tol: float = 1e-15) -> float:
    """``(a; q)_inf = prod_{k>=0} (1 - a q^k)``.

    The product stops once ``|a| q^k < tol (1 - q)(1 - |a|)``, which bounds
    the relative error of the dropped tail by about ``tol``.
    """
    if not abs(a) < 1:
        raise ValueError(f"need |a| < 1, got a={a}")
    if not 0 <= q < 1:
        raise ValueError(f"need 0 <= q < 1, got q={q}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == 0:
        return 1.0
    stop = tol * (1 - q) * (1 - abs(a))
    logs = []
    term = a
    while abs(term) >= stop:
        logs.append(math.log1p(-term))
        term *= q
        if q == 0:
            break
    return math.exp(math.fsum(logs))


def expected_component_length(theta: float, tol: float = 1e-15) -> float:
    """Mean first-component length ``1/(e^-theta; e^-theta)_inf``."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    q = math.exp(-theta)
    return 1.0 / q_pochhammer(q, q, tol)


effective_length = expected_component_length


def renewal_sequence(row, n_max: int) -> np.ndarray:
    """``u_n = prod_{i=1}^n P(X <= i)`` for ``n = 1..n_max``.

    ``u_n`` is the probability that ``n`` is a splitting time.
    """
    if row.p1 <= 0:
        raise ValueError("row distribution needs p_1 > 0")
    cum = np.clip(row.cumulative(n_max), 0.0, 1.0)
    return np.exp(np.cumsum(np.log(cum)))


def component_length_pmf(row, n_max: int = PGF_NMAX) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``F(z) = 1 - 1/(1 + sum u_n z^n)``.

    Returns ``(u, pmf)`` where ``pmf[n-1] = P(L = n)`` for ``n = 1..n_max``,
    computed by power-series division with exactly rounded sums.
    """
    u = renewal_sequence(row, n_max)
    c = [1.0]
    for n in range(1, n_max + 1):
        c.append(-math.fsum(u[k - 1] * c[n - k] for k in range(1, n + 1)))
    pmf = -np.asarray(c[1:])
    return u, pmf


@dataclass
class LengthLaw:
    pmf: np.ndarray
    u: np.ndarray
    mean: float
    tail: float
    n_max: int


def component_length_law(row, tail_tol: float = 1e-13, n_max: int = PGF_NMAX, n_limit: int = 20000) -> LengthLaw:
    """Component-length law with ``n_max`` doubled until the tail is negligible."""
    while True:
        u, pmf = component_length_pmf(row, n_max)
        tail = 1.0 - math.fsum(pmf)
        if tail < tail_tol or n_max >= n_limit:
            break
        n_max *= 2
    mean = math.fsum(np.arange(1, n_max + 1) * pmf)
    return LengthLaw(pmf, u, mean, tail, n_max)


def pgf(row, z: float, n_max: int = PGF_NMAX) -> float:
    """Evaluate ``F(z)`` from the truncated ``u`` series (``|z| < 1``)."""
    u = renewal_sequence(row, n_max)
    s = math.fsum(u * z ** np.arange(1, n_max + 1))
    return 1.0 - 1.0 / (1.0 + s)


@dataclass
class RenewalSummary:
    """Observed component lengths of one or more simulated streams."""

    lengths: np.ndarray
    positions: int
    theta: float | None = None
    expected_length: float | None = None
    truncated: bool = False
    reduced: list = field(default_factory=list, repr=False)

    @property
    def n_components(self) -> int:
        return int(self.lengths.size)

    @property
    def mean(self) -> float:
        return float(self.lengths.mean()) if self.lengths.size else float("nan")

    @property
    def std_error(self) -> float:
        if self.lengths.size < 2:
            return float("nan")
        return float(self.lengths.std(ddof=1) / math.sqrt(self.lengths.size))

    def merge(self, other: RenewalSummary) -> RenewalSummary:
        return RenewalSummary(
            np.concatenate([self.lengths, other.lengths]),
            self.positions + other.positions,
            self.theta,
            self.expected_length,
            self.truncated or other.truncated,
            self.reduced + other.reduced,
        )


class StreamCapExceeded(RuntimeError):
    """The stream hit its position cap; ``summary`` holds what was seen."""

    def __init__(self, message: str, summary: RenewalSummary):
        super().__init__(message)
        self.summary = summary


def renewal_monte_carlo(
    theta: float | None,
    n_components: int,
    rng: np.random.Generator,
    row=None,
    cap: int = STREAM_CAP,
    block: int = 4096,
    keep_reduced: int = 0,
) -> RenewalSummary:
    """Simulate one infinite permutation and record its component lengths.

    The stream is the single-parameter IGM permutation for ``theta`` unless
    another homogeneous ``row`` is given. The trailing incomplete component
    is discarded. ``keep_reduced`` stores that many reduced components.
    """
    if row is None:
        row = GeometricRow.from_theta(theta)
    stream = PShiftedStream(row, rng, cap=cap)
    lengths: list[int] = []
    reduced: list[tuple[int, ...]] = []
    running = 0
    start = 0
    while len(lengths) < n_components:
        m = min(block, cap - len(stream))
        if m <= 0:
            summary = RenewalSummary(np.asarray(lengths, dtype=np.int64), len(stream), theta, None, True, reduced)
            raise StreamCapExceeded(f"stream cap {cap} reached after {len(lengths)} components", summary)
        base = len(stream)
        for offset, v in enumerate(stream.extend(m), start=1):
            pos = base + offset
            if v > running:
                running = v
            if running == pos:
                lengths.append(pos - start)
                if len(reduced) < keep_reduced:
                    reduced.append(tuple(x - start for x in stream.prefix[start:pos]))
                start = pos
                if len(lengths) == n_components:
                    break
    expected = expected_component_length(theta) if theta is not None else None
    return RenewalSummary(np.asarray(lengths, dtype=np.int64), start, theta, expected, False, reduced)


def length_curve(thetas) -> list[tuple[float, float]]:
    """``(theta, E L)`` pairs; the mean diverges at theta = 0 and is reported as inf."""
    out = []
    for th in thetas:
        th = float(th)
        out.append((th, expected_component_length(th) if th > 0 else math.inf))
    return out
