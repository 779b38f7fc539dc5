"""Photon-number assignment from arrival times.

A decision rule is a strictly decreasing list of thresholds t_1 > ... >
t_{B-1} cutting the time axis into B labels: label 1 for the latest
arrivals (single photon) down to label B for the earliest ("B or more").
Thresholds are placed at the crossing points of adjacent weighted
component densities (maximum a posteriori), which minimizes the total
assignment error for the modeled source.  A tag exactly on a threshold
takes the later-time (smaller-n) label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .emg import emg_cdf, emg_mode, emg_pdf
from .errors import ParameterDomainError
from .model import PhotonSource, PnrModel, click_weights
from .montecarlo import TagStream

__all__ = [
    "DecisionRule",
    "ConfusionMatrix",
    "optimal_thresholds",
    "confusion",
    "classify_tags",
]


@dataclass(frozen=True)
class DecisionRule:
    """Strictly decreasing thresholds t_1 > ... > t_{B-1}, ps.

    fallback_labels records boundaries b where no density crossing was
    found and the midpoint of the neighboring modes was used instead.
    """

    thresholds: tuple[float, ...]
    fallback_labels: tuple[int, ...] = ()

    def __post_init__(self):
        ts = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", ts)
        object.__setattr__(self, "fallback_labels", tuple(self.fallback_labels))
        if len(ts) < 1:
            raise ParameterDomainError("a decision rule needs at least one threshold")
        if any(not math.isfinite(t) for t in ts):
            raise ParameterDomainError("thresholds must be finite")
        if any(a <= b for a, b in zip(ts, ts[1:])):
            raise ParameterDomainError("thresholds must be strictly decreasing")

    @property
    def n_labels(self) -> int:
        return len(self.thresholds) + 1

    def assign(self, arrivals) -> np.ndarray:
        """Labels 1..B for arrival time(s); ties go to the smaller-n label."""
        arr = np.asarray(arrivals, dtype=float)
        ascending = np.array(self.thresholds[::-1])
        labels = self.n_labels - np.searchsorted(ascending, arr, side="right")
        return labels.astype(np.int64)

    def label_intervals(self) -> list[tuple[float, float]]:
        """Half-open time interval [lo, hi) covered by each label 1..B."""
        ts = self.thresholds
        intervals = [(ts[0], math.inf)]
        for b in range(1, len(ts)):
            intervals.append((ts[b], ts[b - 1]))
        intervals.append((-math.inf, ts[-1]))
        return intervals

    def to_dict(self) -> dict:
        return {
            "thresholds_ps": list(self.thresholds),
            "fallback_labels": list(self.fallback_labels),
        }

    @classmethod
    def from_dict(cls, cfg: dict) -> "DecisionRule":
        return cls(
            thresholds=tuple(cfg["thresholds_ps"]),
            fallback_labels=tuple(cfg.get("fallback_labels", ())),
        )


@dataclass(frozen=True)
class ConfusionMatrix:
    """probs[b-1, j-1] = P(assigned label j | true bucket b); B x B.

    True buckets follow the rule's labels: bucket b < B is exactly b
    photons, bucket B is "B or more".  Rows of an analytic matrix sum to 1;
    empirical rows with no tags stay all-zero.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ParameterDomainError("confusion matrix must be square")

    @property
    def n_labels(self) -> int:
        return self.probs.shape[0]

    def to_dict(self) -> dict:
        return {"probs": [[float(v) for v in row] for row in self.probs]}


def _crossing(f, lo: float, hi: float, mode_lo: float, mode_hi: float):
    """Root of f in [lo, hi]; prefers the sign change between the two modes."""
    grid = np.linspace(lo, hi, 513)
    vals = np.array([f(g) for g in grid])
    sign = np.sign(vals)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    exact = np.nonzero(sign == 0)[0]
    if len(flips) == 0 and len(exact) == 0:
        return None
    if len(exact) and len(flips) == 0:
        return float(grid[exact[0]])
    candidates = [(grid[i], grid[i + 1]) for i in flips]
    if len(candidates) > 1:
        center = 0.5 * (mode_lo + mode_hi)
        inside = [
            c for c in candidates if c[1] >= min(mode_lo, mode_hi) and c[0] <= max(mode_lo, mode_hi)
        ]
        if inside:
            candidates = inside
        candidates.sort(key=lambda c: abs(0.5 * (c[0] + c[1]) - center))
    a, b = candidates[0]
    return float(brentq(f, a, b, xtol=1e-9))


def optimal_thresholds(m: PnrModel, s: PhotonSource, labels: int) -> DecisionRule:
    """MAP thresholds between adjacent components for B = `labels` buckets.

    Threshold b is where the weighted densities of buckets b and b+1 cross,
    searched between mu_{b+1} and mu_b.  The bucket-B density uses the
    component-B shape with the aggregated >= B Poisson weight.  If no
    crossing exists in the bracket (extreme weight imbalance), the midpoint
    of the two modes is used and the boundary is flagged.
    """
    if int(labels) != labels or not 2 <= labels <= m.n_max:
        raise ParameterDomainError(
            f"labels must be an integer in [2, n_max={m.n_max}], got {labels!r}"
        )
    B = int(labels)
    w = click_weights(s, B)
    comps = [m.component(n) for n in range(1, B + 1)]
    thresholds = []
    fallbacks = []
    for b in range(1, B):
        p_hi, p_lo = comps[b - 1], comps[b]  # later (n=b) and earlier (n=b+1)

        def diff(t):
            return w[b - 1] * emg_pdf(p_hi, t) - w[b] * emg_pdf(p_lo, t)

        mode_hi, mode_lo = emg_mode(p_hi), emg_mode(p_lo)
        t_b = _crossing(diff, p_lo.mu, p_hi.mu, mode_lo, mode_hi)
        if t_b is None:
            thresholds.append(0.5 * (mode_lo + mode_hi))
            fallbacks.append(b)
        else:
            thresholds.append(t_b)
    rule = DecisionRule(thresholds=tuple(thresholds), fallback_labels=tuple(fallbacks))
    return rule


def _interval_masses(p, intervals) -> np.ndarray:
    out = np.empty(len(intervals))
    for j, (lo, hi) in enumerate(intervals):
        hi_mass = 1.0 if math.isinf(hi) else emg_cdf(p, hi)
        lo_mass = 0.0 if math.isinf(lo) else emg_cdf(p, lo)
        out[j] = hi_mass - lo_mass
    return out


def confusion(m: PnrModel, s: PhotonSource, rule: DecisionRule) -> ConfusionMatrix:
    """Analytic confusion matrix of the rule under the model and source.

    Row b < B integrates component b's density over each label interval;
    row B is the Poisson-weighted average over components B..n_max (photon
    numbers beyond n_max share the n_max component).
    """
    B = rule.n_labels
    if B > m.n_max:
        raise ParameterDomainError(
            f"rule has {B} labels but the model only resolves n_max={m.n_max}"
        )
    intervals = rule.label_intervals()
    probs = np.zeros((B, B))
    for b in range(1, B):
        probs[b - 1] = _interval_masses(m.component(b), intervals)
    w = click_weights(s, m.n_max)
    tail_w = w[B - 1 :]
    tail = np.zeros(B)
    for i, n in enumerate(range(B, m.n_max + 1)):
        tail += tail_w[i] * _interval_masses(m.component(n), intervals)
    probs[B - 1] = tail / tail_w.sum()
    return ConfusionMatrix(probs=probs)


def classify_tags(
    tags: TagStream, rule: DecisionRule
) -> tuple[np.ndarray, ConfusionMatrix]:
    """Assign labels to every tag; tally the empirical confusion matrix.

    True buckets clamp true_n at B ("B or more").  Rows without tags are
    left all-zero.
    """
    B = rule.n_labels
    labels = rule.assign(tags.arrival_ps)
    counts = np.zeros((B, B))
    if len(tags):
        buckets = np.minimum(tags.true_n, B)
        np.add.at(counts, (buckets - 1, labels - 1), 1.0)
    row_sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(row_sums > 0, counts / np.where(row_sums > 0, row_sums, 1.0), 0.0)
    return labels, ConfusionMatrix(probs=probs)
