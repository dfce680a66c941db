"""Small least-squares helpers used by the experiment drivers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "LineFit",
    "linear_fit",
    "LoopLawComparison",
    "loop_law_comparison",
    "hc_bracket",
    "power_law_exponent",
    "DecayComparison",
    "decay_law_comparison",
]


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_err: float
    r2: float
    rss: float
    n: int


def linear_fit(x, y, sigma=None) -> LineFit:
    """Least-squares line ``y = slope x + intercept``, optionally weighted by ``1/sigma**2``.

    ``r2`` and ``rss`` use the same weights.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need at least two matching points")
    w = np.ones_like(x) if sigma is None else 1.0 / np.asarray(sigma, dtype=float) ** 2
    X = np.column_stack([x, np.ones_like(x)])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    resid = y - X @ coef
    rss = float((w * resid**2).sum())
    ybar = float((w * y).sum() / w.sum())
    tss = float((w * (y - ybar) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    dof = x.size - 2
    if dof > 0:
        cov = np.linalg.pinv((X * w[:, None]).T @ X) * (rss / dof)
        err = float(math.sqrt(max(cov[0, 0], 0.0)))
    else:
        err = float("nan")
    return LineFit(float(coef[0]), float(coef[1]), err, r2, rss, int(x.size))


@dataclass(frozen=True)
class LoopLawComparison:
    perimeter: LineFit
    area: LineFit
    n_used: int

    @property
    def preferred(self) -> str:
        return "perimeter" if self.perimeter.r2 > self.area.r2 else "area"


def loop_law_comparison(perimeters, areas, means, stderrs, min_snr: float = 3.0) -> LoopLawComparison:
    """Compare ``log W`` against perimeter and against area.

    Loops whose mean is not at least ``min_snr`` standard errors above zero
    are dropped, since their logarithm is noise dominated.
    """
    P = np.asarray(perimeters, dtype=float)
    A = np.asarray(areas, dtype=float)
    W = np.asarray(means, dtype=float)
    E = np.asarray(stderrs, dtype=float)
    keep = W > min_snr * np.maximum(E, 1e-300)
    if keep.sum() < 3:
        raise ValueError("fewer than three resolvable loops")
    y = np.log(W[keep])
    return LoopLawComparison(linear_fit(P[keep], y), linear_fit(A[keep], y), int(keep.sum()))


def hc_bracket(hs: Sequence[float], preferred: Sequence[str]) -> tuple[float, float]:
    """Largest perimeter-law field below the smallest area-law field.

    Raises if the scan does not contain both regimes in that order.
    """
    order = np.argsort(hs)
    hs = [float(hs[i]) for i in order]
    pr = [preferred[i] for i in order]
    if "area" not in pr or "perimeter" not in pr:
        raise ValueError("scan does not bracket the transition")
    first_area = pr.index("area")
    below = [h for h, p in zip(hs[:first_area], pr[:first_area]) if p == "perimeter"]
    if not below:
        raise ValueError("no perimeter-law point below the first area-law point")
    return below[-1], hs[first_area]


def power_law_exponent(x, y) -> LineFit:
    """Fit ``log y = alpha log x + c``; ``slope`` is ``alpha``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    return linear_fit(np.log(x), np.log(y))


@dataclass(frozen=True)
class DecayComparison:
    power: LineFit
    exponential: LineFit
    window: tuple[float, float]

    @property
    def ratio(self) -> float:
        """``rss_exponential / rss_power``; large favours the power law."""
        return self.exponential.rss / max(self.power.rss, 1e-300)

    @property
    def preferred(self) -> str:
        return "power" if self.ratio > 1.0 else "exponential"


def decay_law_comparison(t, y, err, snr: float = 3.0, span: float = 10.0) -> DecayComparison:
    """Weighted fits of ``log y`` against ``log t`` and against ``t``.

    The window ends at the last time before ``y`` first falls below
    ``snr * err`` and starts a factor ``span`` earlier.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    err = np.asarray(err, dtype=float)
    ok = (t > 0) & (y > snr * err)
    pos = np.flatnonzero(t > 0)
    if pos.size == 0:
        raise ValueError("no positive times")
    fail = pos[~ok[pos]]
    end_idx = fail[0] - 1 if fail.size else pos[-1]
    if end_idx < pos[0]:
        raise ValueError("signal never resolved")
    t_end = t[end_idx]
    t_start = max(t_end / span, t[pos[0]])
    sel = ok & (t >= t_start) & (t <= t_end)
    if sel.sum() < 3:
        raise ValueError("fewer than three points in the fit window")
    ly = np.log(y[sel])
    sig = err[sel] / y[sel]
    return DecayComparison(
        linear_fit(np.log(t[sel]), ly, sig),
        linear_fit(t[sel], ly, sig),
        (float(t_start), float(t_end)),
    )
