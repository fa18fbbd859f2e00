"""Fidelity metrics: how close is one selection distribution to another.

The headline number is the Jensen-Shannon divergence between a
method's selection distribution and a reference distribution, in nats
(natural log), which is 0 for identical distributions and ln 2 for
disjoint ones.  Probability ratios track a single individual instead:
how much more or less likely one method is to pick it than the
reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log

import numpy as np

from .core import RandomSource
from .exceptions import ShapeError
from .oracle import SelectionDistribution

__all__ = [
    "js_divergence",
    "probability_ratio",
    "FidelityReport",
    "FidelitySummary",
    "aggregate_fidelity",
]

JS_MAX = log(2.0)


def _as_probs(dist) -> np.ndarray:
    if isinstance(dist, SelectionDistribution):
        return dist.probs
    arr = np.asarray(dist, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ShapeError(f"distribution must be a non-empty vector, got shape {arr.shape}")
    if (arr < 0).any() or not np.isfinite(arr).all():
        raise ShapeError("distribution entries must be finite and >= 0")
    if abs(arr.sum() - 1.0) > 1e-6:
        raise ShapeError(f"distribution must sum to 1 within 1e-6, got {arr.sum()!r}")
    return arr


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence between two distributions, in nats.

    D = 1/2 sum_i p_i ln(2 p_i / (p_i + q_i))
      + 1/2 sum_i q_i ln(2 q_i / (p_i + q_i))

    with the 0 * ln(0) terms taken as 0.  Symmetric, 0 iff p = q, and
    at most ln 2 (reached by distributions with disjoint support).
    """
    p_arr = _as_probs(p)
    q_arr = _as_probs(q)
    if p_arr.shape != q_arr.shape:
        raise ShapeError(f"length mismatch: {p_arr.shape} vs {q_arr.shape}")
    mix = p_arr + q_arr

    def half(a: np.ndarray) -> float:
        nz = a > 0
        return float(np.sum(a[nz] * np.log(2.0 * a[nz] / mix[nz])))

    # Rounding can leave a tiny negative residue for near-identical inputs.
    return max(0.5 * (half(p_arr) + half(q_arr)), 0.0)


def probability_ratio(q_prob: float, p_prob: float) -> float:
    """Ratio q/p of a candidate method's probability to the reference's.

    ``p_prob`` is the reference probability and must be positive; a
    reference that never selects the individual leaves the ratio
    undefined.
    """
    q = float(q_prob)
    p = float(p_prob)
    for name, value in (("q_prob", q), ("p_prob", p)):
        if not np.isfinite(value) or value < 0:
            raise ShapeError(f"{name} must be finite and >= 0, got {value}")
    if p == 0.0:
        raise ValueError("p_prob is 0: probability ratio is undefined")
    return q / p


@dataclass(frozen=True)
class FidelityReport:
    """One generation's fidelity measurements against the reference.

    ``probability_ratio`` is None when the reference probability of the
    tracked individual was zero (ratio undefined).
    """

    js_divergence: float
    probability_ratio: float | None = None
    generation: int | None = None

    def __post_init__(self):
        js = float(self.js_divergence)
        if not np.isfinite(js) or js < 0 or js > JS_MAX + 1e-12:
            raise ShapeError(f"js_divergence must lie in [0, ln 2], got {js}")
        if self.probability_ratio is not None:
            ratio = float(self.probability_ratio)
            if not np.isfinite(ratio) or ratio < 0:
                raise ShapeError(f"probability_ratio must be finite and >= 0, got {ratio}")

    def to_json_dict(self) -> dict:
        return {
            "js_divergence": float(self.js_divergence),
            "probability_ratio": None
            if self.probability_ratio is None
            else float(self.probability_ratio),
            "generation": self.generation,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FidelityReport":
        return cls(
            js_divergence=data["js_divergence"],
            probability_ratio=data.get("probability_ratio"),
            generation=data.get("generation"),
        )


@dataclass(frozen=True)
class FidelitySummary:
    """Aggregate over fidelity reports: means with bootstrap 95% CIs.

    Ratio fields are None when no report carried a defined ratio.
    """

    n_reports: int
    js_mean: float
    js_ci_low: float
    js_ci_high: float
    ratio_mean: float | None
    ratio_ci_low: float | None
    ratio_ci_high: float | None
    n_resamples: int

    def to_json_dict(self) -> dict:
        return {
            "n_reports": self.n_reports,
            "js_mean": self.js_mean,
            "js_ci": [self.js_ci_low, self.js_ci_high],
            "ratio_mean": self.ratio_mean,
            "ratio_ci": None
            if self.ratio_mean is None
            else [self.ratio_ci_low, self.ratio_ci_high],
            "n_resamples": self.n_resamples,
        }


def _bootstrap_ci(
    values: np.ndarray, n_resamples: int, gen: np.random.Generator
) -> tuple[float, float]:
    idx = gen.integers(0, values.size, size=(n_resamples, values.size))
    means = values[idx].mean(axis=1)
    low, high = np.percentile(means, [2.5, 97.5])
    return float(low), float(high)


def aggregate_fidelity(
    reports,
    n_resamples: int = 10_000,
    rng: RandomSource | None = None,
) -> FidelitySummary:
    """Mean JS divergence and probability ratio with percentile CIs.

    Each metric is bootstrapped independently: ``n_resamples`` resamples
    with replacement, mean per resample, 2.5th/97.5th percentiles.  A
    single report yields a degenerate CI equal to its value.
    """
    reports = list(reports)
    if not reports:
        raise ShapeError("aggregate_fidelity needs at least one report")
    if n_resamples < 1:
        raise ShapeError(f"n_resamples must be >= 1, got {n_resamples}")
    if rng is None:
        rng = RandomSource(0)
    gen = rng.generator(0)

    js = np.array([r.js_divergence for r in reports], dtype=np.float64)
    js_low, js_high = _bootstrap_ci(js, n_resamples, gen)

    ratios = np.array(
        [r.probability_ratio for r in reports if r.probability_ratio is not None],
        dtype=np.float64,
    )
    if ratios.size:
        ratio_mean = float(ratios.mean())
        ratio_low, ratio_high = _bootstrap_ci(ratios, n_resamples, gen)
    else:
        ratio_mean = ratio_low = ratio_high = None

    return FidelitySummary(
        n_reports=len(reports),
        js_mean=float(js.mean()),
        js_ci_low=js_low,
        js_ci_high=js_high,
        ratio_mean=ratio_mean,
        ratio_ci_low=ratio_low,
        ratio_ci_high=ratio_high,
        n_resamples=n_resamples,
    )
