"""Maximum likelihood for Mallows' phi, Generalized Mallows and IGM models."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .consensus import fit_center
from .permutation import Permutation, _word, inversions, relative
from .ranking import CenterOrder, RankingDataset, as_center, stage_table

THETA_MAX = 50.0
THETA_MIN = 1e-8
BISECTION_ITERS = 200
NEWTON_STEPS = 10

# Bernoulli-number coefficients of 1/(e^x - 1) - 1/x + 1/2 in odd powers of x
_COTH_SERIES = (1 / 12, -1 / 720, 1 / 30240, -1 / 1209600)


@dataclass
class FittedModel:
    """Estimated dispersion(s) and center with fit diagnostics.

    ``center`` is a ranked list (best item first). For IGM models it is a
    prefix of an order of the positive integers.
    """

    kind: str
    thetas: tuple[float, ...]
    center: tuple[int, ...]
    log_likelihood: float = float("nan")
    n: int | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def theta(self) -> float:
        if len(self.thetas) != 1:
            raise AttributeError("model has stage-specific dispersions")
        return self.thetas[0]

    @property
    def t(self) -> int:
        return len(self.thetas)


@dataclass(frozen=True)
class SufficientStats:
    """Stage means of the discordance table and the mean inversion count."""

    stage_means: tuple[float, ...]
    stage_counts: tuple[int, ...]
    mean_inversions: float
    n_samples: int


def _check_q(q: float) -> float:
    q = float(q)
    if not 0 <= q < 1:
        raise ValueError(f"q must lie in [0, 1), got {q}")
    return q


def q_factorial(q: float, n: int, log: bool = False) -> float:
    """``prod_{k=1}^n (1 - q^k)/(1 - q)``, the generating function of inversions."""
    q = _check_q(q)
    if q == 0:
        return 0.0 if log else 1.0
    k = np.arange(1, n + 1)
    lq = math.log(q)
    total = float(np.sum(np.log(-np.expm1(k * lq))) - n * math.log1p(-q))
    return total if log else math.exp(total)


def log_normalizer_phi(theta: float, n: int) -> float:
    """``log Psi(theta)`` of Mallows' phi model on n items."""
    return q_factorial(math.exp(-theta), n, log=True) if theta > 0 else math.lgamma(n + 1)


def truncgeo_mean(theta, k):
    """Mean of the geometric law on ``{0..k-1}`` with ratio ``e^-theta``.

    Equal to ``1/(e^theta - 1) - k/(e^{k theta} - 1)``; a series in theta is
    used where that difference cancels.
    """
    theta = np.asarray(theta, dtype=float)
    k = np.asarray(k, dtype=float)
    x = k * theta
    small = x < 0.05
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        direct = 1.0 / np.expm1(theta) - k / np.expm1(x)
    series = (k - 1) / 2
    kp = k * k
    th = theta.copy()
    for c in _COTH_SERIES:
        series = series + c * (1.0 - kp) * th
        kp = kp * k * k
        th = th * theta * theta
    out = np.where(small, series, direct)
    out = np.where(np.isinf(theta), 0.0, out)
    return float(out) if out.ndim == 0 else out


def truncgeo_var(theta, k):
    """Variance of the same law; ``-d mean / d theta``."""
    theta = np.asarray(theta, dtype=float)
    k = np.asarray(k, dtype=float)
    x = k * theta
    small = x < 0.05
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = np.exp(-theta) / np.expm1(-theta) ** 2
        b = k * k * np.exp(-x) / np.expm1(-x) ** 2
        direct = a - b
    series = (k * k - 1) / 12 - (k**4 - 1) * theta**2 / 240
    out = np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


def expected_inversions(theta: float, n: int) -> float:
    """``E inv(pi)`` under Mallows' phi on n items, as a function of theta."""
    if n < 2:
        return 0.0
    return float(np.sum(truncgeo_mean(theta, np.arange(2, n + 1))))


def mean_inversions_g(q: float, n: int) -> float:
    """Mean number of inversions as a function of ``q = e^-theta``.

    ``g(q) = q sum_{k=1}^{n-1} (1 - (k+1) q^k + k q^{k+1}) / ((1-q)(1-q^{k+1}))``,
    continuous at ``q = 0`` (value 0) and as ``q -> 1`` (value n(n-1)/4).
    """
    q = _check_q(q)
    if q == 0 or n < 2:
        return 0.0
    theta = -math.log(q)
    if n * theta < 0.05:
        return expected_inversions(theta, n)
    k = np.arange(1, n)
    num = 1.0 - (k + 1) * q**k + k * q ** (k + 1)
    den = (1.0 - q) * (1.0 - q ** (k + 1))
    return float(q * np.sum(num / den))


def _solve_decreasing(mean_fn, var_fn, target: float, lo: float, hi: float, tol: float) -> tuple[float, int, float]:
    """Root of a strictly decreasing ``mean_fn`` on ``[lo, hi]``.

    Bisection in log(theta), then Newton polish with ``-var_fn`` as slope.
    """
    a, b = math.log(lo), math.log(hi)
    iters = 0
    for iters in range(1, BISECTION_ITERS + 1):
        mid = 0.5 * (a + b)
        if mean_fn(math.exp(mid)) > target:
            a = mid
        else:
            b = mid
        if b - a < 1e-13:
            break
    theta = math.exp(0.5 * (a + b))
    for _ in range(NEWTON_STEPS):
        resid = mean_fn(theta) - target
        if abs(resid) <= tol:
            break
        slope = -var_fn(theta)
        if slope == 0:
            break
        step = theta - resid / slope
        if not math.exp(a) <= step <= math.exp(b):
            break
        theta = step
        iters += 1
    return theta, iters, mean_fn(theta) - target


def solve_theta_phi(mean_inv: float, n: int) -> tuple[float, dict]:
    """MLE of theta for Mallows' phi given the mean inversion count."""
    top = n * (n - 1) / 4
    diag = {"clamped": None, "iterations": 0, "residual": 0.0}
    if mean_inv <= 0:
        diag["clamped"] = "theta_max"
        return THETA_MAX, diag
    if mean_inv >= expected_inversions(THETA_MIN, n) or mean_inv >= top:
        diag["clamped"] = "theta_min"
        return THETA_MIN, diag
    if mean_inv <= expected_inversions(THETA_MAX, n):
        diag["clamped"] = "theta_max"
        return THETA_MAX, diag
    tol = 1e-10 * n * n
    theta, iters, resid = _solve_decreasing(
        lambda th: expected_inversions(th, n),
        lambda th: float(np.sum(truncgeo_var(th, np.arange(2, n + 1)))),
        mean_inv, THETA_MIN, THETA_MAX, tol,
    )
    diag.update(iterations=iters, residual=resid)
    return theta, diag


def solve_theta_stage(mean_s: float, k: int) -> tuple[float, dict]:
    """MLE of a stage dispersion with truncated-geometric support size k."""
    diag = {"clamped": None, "iterations": 0, "residual": 0.0}
    if mean_s <= truncgeo_mean(THETA_MAX, k):
        diag["clamped"] = "theta_max"
        return THETA_MAX, diag
    if mean_s >= truncgeo_mean(THETA_MIN, k):
        diag["clamped"] = "theta_min"
        return THETA_MIN, diag
    theta, iters, resid = _solve_decreasing(
        lambda th: truncgeo_mean(th, k), lambda th: truncgeo_var(th, k),
        mean_s, THETA_MIN, THETA_MAX, 1e-10 * k * k,
    )
    diag.update(iterations=iters, residual=resid)
    return theta, diag


def igm_theta(mean_s: float) -> tuple[float, str | None]:
    """Geometric MLE ``log(1 + 1/mean)`` with the clamping policy."""
    if mean_s <= 0:
        return THETA_MAX, "theta_max"
    theta = math.log1p(1.0 / mean_s)
    if theta > THETA_MAX:
        return THETA_MAX, "theta_max"
    if theta < THETA_MIN:
        return THETA_MIN, "theta_min"
    return theta, None


def _center_word(center, n: int) -> tuple[int, ...]:
    """Accept a Permutation (word list) or a ranked list of items 1..n."""
    word = center.word if isinstance(center, Permutation) else Permutation.from_ranked(tuple(center)).word
    if len(word) != n:
        raise ValueError(f"center has {len(word)} items, data has {n}")
    return word


def _complete_words(data: RankingDataset) -> tuple[list[tuple[int, ...]], list[int], int]:
    if not data.is_complete():
        raise ValueError("this estimator needs complete rankings over a known universe")
    words, counts = [], []
    for obs, c in data:
        words.append(Permutation.from_ranked(obs).word)
        counts.append(c)
    return words, counts, data.universe


def sufficient_stats(data: RankingDataset, center, t: int | None = None) -> SufficientStats:
    """Stage means ``s_j`` against ``center`` and the mean total discordance.

    Observations contribute to stage j only when they reach it. With
    complete data the stage count is ``n - 1``.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    order = as_center(center)
    if t is None:
        t = data.t_max - 1 if data.is_complete() else data.t_max
    sums = np.zeros(t)
    cnts = np.zeros(t, dtype=np.int64)
    total = 0.0
    for obs, c in data:
        s = stage_table(obs, order)[:t]
        sums[: len(s)] += c * np.asarray(s, dtype=float)
        cnts[: len(s)] += c
        total += c * sum(s)
    means = np.divide(sums, cnts, out=np.zeros(t), where=cnts > 0)
    return SufficientStats(tuple(means), tuple(int(v) for v in cnts), total / data.n_samples, data.n_samples)


def fit_theta_known_center(data: RankingDataset, center) -> FittedModel:
    """Dispersion MLE of Mallows' phi model with the center given.

    Solves ``E_theta inv = mean inv(pi_i o center^-1)``.
    """
    words, counts, n = _complete_words(data)
    cw = _center_word(center, n)
    mean_inv = sum(c * inversions(relative(w, cw)) for w, c in zip(words, counts)) / sum(counts)
    theta, diag = solve_theta_phi(mean_inv, n)
    diag["mean_inversions"] = mean_inv
    model = FittedModel("phi", (theta,), Permutation(cw).ranked, n=n, diagnostics=diag)
    model.log_likelihood = log_likelihood(data, model)
    return model


def fit_phi(data: RankingDataset, method: str = "auto", **kwargs) -> FittedModel:
    """Joint MLE: consensus center, then the dispersion given it."""
    res = fit_center(data, method=method, **kwargs)
    model = fit_theta_known_center(data, res.center)
    model.diagnostics["center_method"] = res.method
    model.diagnostics["center_objective"] = res.objective
    return model


def fit_gm_known_center(data: RankingDataset, center) -> FittedModel:
    """Stage-wise dispersion MLEs of the Generalized Mallows model.

    Stage j solves ``m_j(theta_j) = mean s_j`` with support size
    ``n - j + 1``; the last stage has no parameter.
    """
    _, _, n = _complete_words(data)
    ranked = Permutation(_center_word(center, n)).ranked
    stats = sufficient_stats(data, ranked, t=n - 1)
    thetas, clamps, iters = [], [], []
    for j, s in enumerate(stats.stage_means, start=1):
        th, d = solve_theta_stage(s, n - j + 1)
        thetas.append(th)
        clamps.append(d["clamped"])
        iters.append(d["iterations"])
    model = FittedModel("gm", tuple(thetas), ranked, n=n, diagnostics={"clamped": clamps, "iterations": iters, "stage_means": stats.stage_means})
    model.log_likelihood = log_likelihood(data, model)
    return model


def fit_igm_thetas(data: RankingDataset, center, t: int, single: bool = False) -> FittedModel:
    """Closed-form IGM dispersions ``log(1 + 1/mean s_j)`` for stages 1..t.

    With ``single=True`` all stages are pooled into one dispersion.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    order = as_center(center)
    stats = sufficient_stats(data, order, t=t)
    counts = np.asarray(stats.stage_counts, dtype=float)
    means = np.asarray(stats.stage_means)
    if single:
        reached = counts.sum()
        pooled = float((means * counts).sum() / reached) if reached else 0.0
        theta, flag = igm_theta(pooled)
        thetas, clamps = (theta,), [flag]
    else:
        pairs = [igm_theta(m) if c > 0 else (THETA_MAX, "no_data") for m, c in zip(means, counts)]
        thetas = tuple(p[0] for p in pairs)
        clamps = [p[1] for p in pairs]
    model = FittedModel(
        "igm",
        thetas,
        tuple(order.ranked),
        diagnostics={"clamped": clamps, "stage_means": stats.stage_means, "stage_counts": stats.stage_counts, "single": single, "t": t},
    )
    model.log_likelihood = log_likelihood(data, model)
    return model


def fit_igm(data: RankingDataset, t: int, single: bool = False, center=None, method: str = "auto", **kwargs) -> FittedModel:
    """IGM fit of model size t; the center is estimated from all observed stages if not given."""
    if center is None:
        res = fit_center(data, method=method, **kwargs)
        center = res.center
    return fit_igm_thetas(data, center, t, single=single)


def _igm_thetas_for(model: FittedModel, t: int) -> np.ndarray:
    if len(model.thetas) == 1:
        return np.full(t, model.thetas[0])
    if len(model.thetas) != t:
        raise ValueError(f"model has {len(model.thetas)} dispersions for size t={t}")
    return np.asarray(model.thetas, dtype=float)


def log_likelihood(data: RankingDataset, model: FittedModel) -> float:
    """Exact log density of the data, summed over observations."""
    kind = model.kind
    if kind in ("phi", "gm"):
        n = model.n if model.n is not None else len(model.center)
        if kind == "phi":
            theta = model.thetas[0]
            log_psi = log_normalizer_phi(theta, n)
        else:
            th = np.asarray(model.thetas, dtype=float)
            if th.size != n - 1:
                raise ValueError("GM model needs n - 1 stage dispersions")
            k = np.arange(n, 1, -1)
            log_psi = float(np.sum(np.log(-np.expm1(-k * th)) - np.log(-np.expm1(-th))))
        total = 0.0
        for obs, c in data:
            if len(obs) != n or sorted(obs) != list(range(1, n + 1)):
                raise ValueError(f"observation {obs} is not a complete ranking of {n} items")
            s = stage_table(obs, model.center)[: n - 1]
            if kind == "phi":
                energy = theta * sum(s)
            else:
                energy = float(np.dot(th, s))
            total += c * (-energy - log_psi)
        return total
    if kind == "igm":
        t = int(model.diagnostics.get("t", len(model.thetas)))
        th = _igm_thetas_for(model, t)
        order = CenterOrder(model.center)
        log_norm = np.log(-np.expm1(-th))
        total = 0.0
        for obs, c in data:
            s = np.asarray(stage_table(obs, order)[:t], dtype=float)
            m = s.size
            total += c * float(np.sum(-th[:m] * s + log_norm[:m]))
        return total
    raise ValueError(f"unknown model kind {kind!r}")


def phi_log_density(word: Sequence[int], theta: float, center=None) -> float:
    """``log P_{theta, center}(pi)`` for one complete ranking given by its word.

    ``center`` is a Permutation or a ranked list; None means the identity.
    """
    w = _word(word)
    cw = _center_word(center, len(w)) if center is not None else tuple(range(1, len(w) + 1))
    return -theta * inversions(relative(w, cw)) - log_normalizer_phi(theta, len(w))
