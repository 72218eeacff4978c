"""Automatic choice of the top-t model size from the effective length."""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field

from .consensus import fit_center
from .estimation import fit_igm_thetas
from .ranking import RankingDataset
from .regeneration import expected_component_length as effective_length

DEFAULT_LAMBDA = 0.5


@dataclass
class SelectionTrace:
    """Everything the t-selection loop looked at."""

    t_max: int
    lam: float
    cutoff: int
    theta0: float
    window: tuple[int, ...]
    thetas: list[float] = field(default_factory=list)
    lengths: list[float] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    centers: list[tuple[int, ...]] = field(default_factory=list)
    selected: int = 0
    chosen: int = 0
    degenerate: bool = False

    def rows(self) -> list[dict]:
        return [
            {"t": t, "theta": th, "effective_length": el, "error": err, "selected": int(t == self.selected)}
            for t, th, el, err in zip(self.window, self.thetas, self.lengths, self.errors)
        ]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def default_window(theta0: float, t_max: int) -> tuple[int, ...]:
    """Window ``{r - w, ..., r + w}`` around ``r = round(E L(theta0))``, clipped to ``1..t_max``."""
    r = _round_half_up(effective_length(theta0))
    w = max(2, math.ceil(r / 2))
    hi = min(t_max, r + w)
    lo = min(max(1, r - w), hi)
    return tuple(range(lo, hi + 1))


def fit_single_igm(data: RankingDataset, t: int, center_method: str = "heuristic"):
    """Single-parameter IGM fit on the top-t truncated data (center re-estimated)."""
    top = data.truncate(t)
    res = fit_center(top, method=center_method)
    return fit_igm_thetas(top, res.center, t, single=True)


def select_t(
    data: RankingDataset,
    window: Iterable[int] | None = None,
    lam: float = DEFAULT_LAMBDA,
    center_method: str = "heuristic",
) -> tuple[int, SelectionTrace]:
    """Pick the model size whose effective length is closest to it.

    Fits ``theta0`` at t = 1, scans a window of candidate sizes around the
    implied effective length, refitting the single-parameter IGM (center
    included) at each, and keeps the first t minimising
    ``|t - 1/(e^-theta(t); e^-theta(t))_inf|``. The result never exceeds
    ``max(1, floor(lam * t_max))``.
    """
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    if len(data) == 0:
        raise ValueError("cannot select t on an empty dataset")
    t_max = data.t_max
    cutoff = max(1, math.floor(lam * t_max))
    theta0 = fit_single_igm(data, 1, center_method).thetas[0]
    if window is None:
        window = default_window(theta0, t_max)
    window = tuple(sorted({int(t) for t in window}))
    if not window or window[0] < 1:
        raise ValueError("window must contain positive model sizes")
    trace = SelectionTrace(t_max, lam, cutoff, theta0, window)

    best_err = math.inf
    t_sel = 0
    for t in window:
        model = fit_single_igm(data, t, center_method)
        theta = model.thetas[0]
        length = effective_length(theta)
        err = abs(t - length)
        trace.thetas.append(theta)
        trace.lengths.append(length)
        trace.errors.append(err)
        trace.centers.append(model.center)
        # strict comparison keeps the smaller t on ties
        if err < best_err:
            best_err = err
            t_sel = t
    trace.selected = t_sel
    trace.chosen = min(t_sel, cutoff)
    trace.degenerate = t_max == 1
    return trace.chosen, trace
