"""Monte Carlo time-tag simulation and arrival-time histograms.

simulate_tags draws, per trigger shot, a Poisson photon number N; shots
with N = 0 produce no click, and N > n_max is clamped to n_max (the
overflow bucket).  The arrival time is then one EMG draw from the matching
component.  Everything is driven by a single seeded numpy Generator with a
fixed draw order, so a seed pins the stream bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .emg import emg_cdf
from .errors import ParameterDomainError
from .model import PhotonSource, PnrModel, click_weights

__all__ = [
    "TagStream",
    "Histogram",
    "simulate_tags",
    "bin_arrivals",
    "histogram",
    "expected_bin_counts",
    "write_tags",
    "read_tags",
    "write_labeled_tags",
    "write_histogram",
    "read_histogram",
]


@dataclass(frozen=True)
class TagStream:
    """Click records: trigger-shot index, photon number, arrival time."""

    shot_index: np.ndarray  # int64
    true_n: np.ndarray  # int64, >= 1
    arrival_ps: np.ndarray  # float64
    shots: int  # trigger shots behind the stream (clicks <= shots)

    def __post_init__(self):
        if not (len(self.shot_index) == len(self.true_n) == len(self.arrival_ps)):
            raise ParameterDomainError("tag stream columns must have equal length")
        if len(self.true_n) and self.true_n.min() < 1:
            raise ParameterDomainError("true_n must be >= 1")
        if len(self.arrival_ps) and not np.all(np.isfinite(self.arrival_ps)):
            raise ParameterDomainError("arrival times must be finite")

    def __len__(self) -> int:
        return len(self.arrival_ps)


@dataclass(frozen=True)
class Histogram:
    """Uniform-bin counts with out-of-range tags tallied separately."""

    bin_edges: np.ndarray
    counts: np.ndarray  # int64, len(bin_edges) - 1
    total: int  # sum of in-range counts
    underflow: int
    overflow: int

    def __post_init__(self):
        if len(self.counts) != len(self.bin_edges) - 1:
            raise ParameterDomainError("counts must have len(bin_edges) - 1 entries")
        if int(self.counts.sum()) != self.total:
            raise ParameterDomainError("total must equal the sum of counts")

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])


def simulate_tags(m: PnrModel, s: PhotonSource, shots: int, seed: int) -> TagStream:
    """Simulate `shots` trigger shots; returns the click records.

    The expected click fraction is 1 - exp(-mean_photon).  Deterministic
    for a given seed.
    """
    if int(shots) != shots or shots < 0:
        raise ParameterDomainError(f"shots must be an integer >= 0, got {shots!r}")
    shots = int(shots)
    rng = np.random.default_rng(seed)
    n_raw = rng.poisson(s.mean_photon, size=shots)
    clicked = np.nonzero(n_raw > 0)[0]
    n = np.minimum(n_raw[clicked], m.n_max).astype(np.int64)
    k = len(clicked)
    mu = np.array([m.mu_n(i) for i in range(1, m.n_max + 1)])
    sig = np.array([m.sigma_n(i) for i in range(1, m.n_max + 1)])
    tau = np.array([m.tau_n(i) for i in range(1, m.n_max + 1)])
    idx = n - 1
    arrival = (
        mu[idx]
        + sig[idx] * rng.standard_normal(k)
        + tau[idx] * rng.standard_exponential(k)
    )
    return TagStream(
        shot_index=clicked.astype(np.int64),
        true_n=n,
        arrival_ps=arrival,
        shots=shots,
    )


def bin_arrivals(arrivals: np.ndarray, bin_width: float, t_range) -> Histogram:
    """Left-closed uniform binning of arrival times over [lo, hi).

    A tag exactly on an inner edge lands in the bin starting at that edge;
    tags below lo / at or above the last edge go to underflow / overflow.
    """
    lo, hi = (float(t_range[0]), float(t_range[1]))
    if not (bin_width > 0) or not math.isfinite(bin_width):
        raise ParameterDomainError(f"bin_width must be > 0, got {bin_width!r}")
    if not (lo < hi):
        raise ParameterDomainError(f"range must be nonempty, got [{lo}, {hi}]")
    ratio = (hi - lo) / bin_width
    n_bins = int(round(ratio)) if abs(ratio - round(ratio)) < 1e-9 else int(math.ceil(ratio))
    edges = lo + bin_width * np.arange(n_bins + 1)
    arrivals = np.asarray(arrivals, dtype=float)
    pos = np.searchsorted(edges, arrivals, side="right") - 1
    underflow = int(np.count_nonzero(pos < 0))
    overflow = int(np.count_nonzero(pos >= n_bins))
    in_range = pos[(pos >= 0) & (pos < n_bins)]
    counts = np.bincount(in_range, minlength=n_bins).astype(np.int64)
    return Histogram(
        bin_edges=edges,
        counts=counts,
        total=int(counts.sum()),
        underflow=underflow,
        overflow=overflow,
    )


def histogram(tags: TagStream, bin_width: float, t_range) -> Histogram:
    """Histogram of a tag stream's arrival times; see bin_arrivals."""
    return bin_arrivals(tags.arrival_ps, bin_width, t_range)


def expected_bin_counts(
    m: PnrModel, s: PhotonSource, h: Histogram, n: int | None = None
) -> np.ndarray:
    """Expected in-range counts for h's binning; single component n or mixture."""
    total = h.total + h.underflow + h.overflow
    if n is not None:
        cdf = emg_cdf(m.component(n), h.bin_edges)
        return total * np.diff(cdf)
    w = click_weights(s, m.n_max)
    acc = np.zeros(len(h.counts))
    for i in range(1, m.n_max + 1):
        acc += w[i - 1] * np.diff(emg_cdf(m.component(i), h.bin_edges))
    return total * acc


# --- CSV formats ------------------------------------------------------------

_TAG_HEADER = ["shot", "true_n", "arrival_ps"]


def write_tags(tags: TagStream, path) -> None:
    """Tag-stream CSV: columns shot,true_n,arrival_ps."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(_TAG_HEADER)
        for s, n, t in zip(tags.shot_index, tags.true_n, tags.arrival_ps):
            w.writerow([int(s), int(n), repr(float(t))])


def read_tags(path) -> TagStream:
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header != _TAG_HEADER:
            raise ParameterDomainError(
                f"{path}: expected tag CSV header {','.join(_TAG_HEADER)}"
            )
        shot, true_n, arrival = [], [], []
        for row in r:
            shot.append(int(row[0]))
            true_n.append(int(row[1]))
            arrival.append(float(row[2]))
    shots = max(shot) + 1 if shot else 0
    return TagStream(
        shot_index=np.array(shot, dtype=np.int64),
        true_n=np.array(true_n, dtype=np.int64),
        arrival_ps=np.array(arrival, dtype=float),
        shots=shots,
    )


def write_labeled_tags(tags: TagStream, labels: np.ndarray, path) -> None:
    """Labeled-stream CSV: columns shot,true_n,arrival_ps,label."""
    if len(labels) != len(tags):
        raise ParameterDomainError("labels must match the tag stream length")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(_TAG_HEADER + ["label"])
        for s, n, t, lab in zip(tags.shot_index, tags.true_n, tags.arrival_ps, labels):
            w.writerow([int(s), int(n), repr(float(t)), int(lab)])


def write_histogram(h: Histogram, path) -> None:
    """Histogram CSV: a metadata comment line, then bin_left_ps,count rows."""
    with open(path, "w", newline="") as f:
        f.write(
            "# bin_width_ps={} range_lo_ps={} range_hi_ps={} underflow={} overflow={}\n".format(
                repr(h.bin_width),
                repr(float(h.bin_edges[0])),
                repr(float(h.bin_edges[-1])),
                h.underflow,
                h.overflow,
            )
        )
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["bin_left_ps", "count"])
        for left, c in zip(h.bin_edges[:-1], h.counts):
            w.writerow([repr(float(left)), int(c)])


def read_histogram(path) -> Histogram:
    with open(path, newline="") as f:
        meta_line = f.readline()
        if not meta_line.startswith("# "):
            raise ParameterDomainError(f"{path}: missing histogram metadata line")
        meta = dict(kv.split("=", 1) for kv in meta_line[2:].split())
        r = csv.reader(f)
        header = next(r, None)
        if header != ["bin_left_ps", "count"]:
            raise ParameterDomainError(f"{path}: expected bin_left_ps,count header")
        lefts, counts = [], []
        for row in r:
            lefts.append(float(row[0]))
            counts.append(int(row[1]))
    width = float(meta["bin_width_ps"])
    lo = float(meta["range_lo_ps"])
    edges = lo + width * np.arange(len(lefts) + 1)
    counts = np.array(counts, dtype=np.int64)
    return Histogram(
        bin_edges=edges,
        counts=counts,
        total=int(counts.sum()),
        underflow=int(meta["underflow"]),
        overflow=int(meta["overflow"]),
    )
