"""Maximum-likelihood histogram fitting of the Poisson-weighted EMG mixture.

The objective is the multinomial negative log-likelihood of the bin counts
(including the underflow/overflow cells) against bin probabilities obtained
from CDF differences of the weighted mixture.  The canonical free set is
the three-parameter structure {sigma_int, tau, delta_mu}; t0 and
mean_photon can be freed as well.  Optimization is bounded Nelder-Mead
restarted from seeded perturbations of the initial guess; the best restart
wins, ties broken by restart index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy.optimize import Bounds, minimize
from scipy.stats import chi2 as chi2_dist

from .emg import emg_cdf
from .errors import (
    IllPosedFitError,
    InsufficientDataError,
    ParameterDomainError,
    PnrError,
)
from .model import PhotonSource, PnrModel, click_weights
from .montecarlo import Histogram
from .util import run_tasks

__all__ = [
    "FREE_PARAMETERS",
    "FitConfig",
    "FitResult",
    "fit_histogram",
    "goodness_of_fit",
]

FREE_PARAMETERS = ("delta_mu", "t0", "sigma_int", "tau", "mean_photon")

_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class FitConfig:
    """What to fit and how.

    free names a subset of FREE_PARAMETERS; jitter contributions other than
    sigma_int stay fixed at the values carried by the initial model
    (measured externally).  Missing bounds/initial entries fall back to
    defaults derived from the initial model.
    """

    free: tuple[str, ...] = ("delta_mu", "sigma_int", "tau")
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    initial: Mapping[str, float] = field(default_factory=dict)
    rel_tol: float = 1e-8
    max_iter: int = 2000
    restarts: int = 3
    restart_seed: int = 0
    compute_uncertainty: bool = False

    def __post_init__(self):
        object.__setattr__(self, "free", tuple(self.free))
        seen = set()
        for name in self.free:
            if name not in FREE_PARAMETERS:
                raise ParameterDomainError(
                    f"unknown free parameter {name!r}; expected from {FREE_PARAMETERS}"
                )
            if name in seen:
                raise ParameterDomainError(f"duplicate free parameter {name!r}")
            seen.add(name)
        for name, (lo, hi) in dict(self.bounds).items():
            if not (lo < hi):
                raise ParameterDomainError(
                    f"bounds for {name!r} need lower < upper, got ({lo}, {hi})"
                )
        if self.rel_tol <= 0 or self.max_iter < 1 or self.restarts < 1:
            raise ParameterDomainError("rel_tol, max_iter and restarts must be positive")

    @classmethod
    def from_dict(cls, cfg: dict) -> "FitConfig":
        known = {
            "free", "bounds", "initial", "rel_tol", "max_iter",
            "restarts", "restart_seed", "compute_uncertainty",
        }
        extra = set(cfg) - known
        if extra:
            raise ParameterDomainError(f"unknown fit config keys: {sorted(extra)}")
        kwargs = dict(cfg)
        if "free" in kwargs:
            kwargs["free"] = tuple(kwargs["free"])
        if "bounds" in kwargs:
            kwargs["bounds"] = {k: (float(v[0]), float(v[1])) for k, v in kwargs["bounds"].items()}
        return cls(**kwargs)


@dataclass(frozen=True)
class FitResult:
    estimates: dict
    objective: float
    converged: bool
    iterations: int
    model: PnrModel
    source: PhotonSource
    uncertainties: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "estimates": dict(self.estimates),
            "objective": self.objective,
            "converged": self.converged,
            "iterations": self.iterations,
        }
        if self.uncertainties is not None:
            out["uncertainties"] = dict(self.uncertainties)
        return out


def _current_value(name: str, m: PnrModel, s: PhotonSource) -> float:
    if name == "delta_mu":
        return m.delta_mu
    if name == "t0":
        return m.t0
    if name == "sigma_int":
        rule = m.jitter.intrinsic
        if not rule.is_law_based:
            raise ParameterDomainError(
                "sigma_int can only be fitted for law-based intrinsic rules"
            )
        return rule.value
    if name == "tau":
        if not m.tau.is_law_based:
            raise ParameterDomainError("tau can only be fitted for law-based tau rules")
        return m.tau.value
    if name == "mean_photon":
        return s.mean_photon
    raise ParameterDomainError(f"unknown parameter {name!r}")


def _default_bounds(name: str, value: float, m: PnrModel) -> tuple[float, float]:
    if name == "delta_mu":
        return (0.2 * value, 5.0 * value)
    if name == "t0":
        return (value - 2.0 * m.delta_mu, value + 2.0 * m.delta_mu)
    if name == "mean_photon":
        return (0.05 * value, 20.0 * value)
    # sigma_int / tau: widths may legitimately shrink to zero
    return (0.0, 10.0 * max(value, 1.0))


def _apply(names, values, m0: PnrModel, s0: PhotonSource):
    kv = dict(zip(names, values))
    jitter = m0.jitter
    if "sigma_int" in kv:
        jitter = replace(jitter, intrinsic=jitter.intrinsic.with_anchor(kv["sigma_int"]))
    model = PnrModel(
        t0=kv.get("t0", m0.t0),
        delta_mu=kv.get("delta_mu", m0.delta_mu),
        jitter=jitter,
        tau=m0.tau.with_anchor(kv["tau"]) if "tau" in kv else m0.tau,
        n_max=m0.n_max,
    )
    source = PhotonSource(kv["mean_photon"]) if "mean_photon" in kv else s0
    return model, source


def _cell_probabilities(m: PnrModel, s: PhotonSource, edges: np.ndarray) -> np.ndarray:
    """[underflow, bins..., overflow] probabilities from weighted CDF differences."""
    w = click_weights(s, m.n_max)
    cdf = np.zeros(len(edges))
    for n in range(1, m.n_max + 1):
        cdf += w[n - 1] * emg_cdf(m.component(n), edges)
    probs = np.empty(len(edges) + 1)
    probs[0] = cdf[0]
    probs[1:-1] = np.diff(cdf)
    probs[-1] = 1.0 - cdf[-1]
    return np.clip(probs, 0.0, None)


def _cell_counts(h: Histogram) -> np.ndarray:
    return np.concatenate(([h.underflow], h.counts, [h.overflow])).astype(float)


def _nll(counts: np.ndarray, probs: np.ndarray) -> float:
    occupied = counts > 0
    return float(-(counts[occupied] * np.log(np.clip(probs[occupied], _LOG_FLOOR, None))).sum())


def fit_histogram(
    h: Histogram, m0: PnrModel, s: PhotonSource, cfg: FitConfig | None = None
) -> FitResult:
    """Fit the free parameters to a histogram by multinomial max likelihood.

    Returns converged=False (not an exception) when the optimizer hits its
    iteration budget.  Degenerate input (all mass in a single cell) raises
    IllPosedFitError.
    """
    cfg = cfg or FitConfig()
    if h.total <= 0:
        raise IllPosedFitError("histogram has no in-range counts")
    if m0.n_max < 2:
        raise ParameterDomainError("fitting needs n_max >= 2")
    cells = _cell_counts(h)
    if np.count_nonzero(cells) < 2:
        raise IllPosedFitError("all histogram mass sits in one cell; fit is ill-posed")

    edges = h.bin_edges
    free = cfg.free
    if "sigma_int" in free and not m0.jitter.intrinsic.is_law_based:
        raise ParameterDomainError(
            "sigma_int can only be fitted for law-based intrinsic rules"
        )
    if "tau" in free and not m0.tau.is_law_based:
        raise ParameterDomainError("tau can only be fitted for law-based tau rules")

    def objective(x: np.ndarray) -> float:
        try:
            m, src = _apply(free, x, m0, s)
        except PnrError:
            return math.inf
        return _nll(cells, _cell_probabilities(m, src, edges))

    if not free:
        f0 = _nll(cells, _cell_probabilities(m0, s, edges))
        return FitResult(
            estimates={}, objective=f0, converged=True, iterations=0, model=m0, source=s
        )

    x0 = np.array([cfg.initial.get(p, _current_value(p, m0, s)) for p in free])
    lo = np.empty(len(free))
    hi = np.empty(len(free))
    for i, p in enumerate(free):
        lo[i], hi[i] = cfg.bounds.get(p, _default_bounds(p, x0[i], m0))
        if not (lo[i] <= x0[i] <= hi[i]):
            raise ParameterDomainError(
                f"initial guess for {p!r} ({x0[i]}) lies outside bounds "
                f"[{lo[i]}, {hi[i]}]"
            )

    f0 = objective(x0)
    fatol = cfg.rel_tol * (abs(f0) + 1.0)
    xatol = 1e-6 * max(1.0, float(np.max(np.abs(x0))))
    rng = np.random.default_rng(cfg.restart_seed)
    starts = [x0]
    span = hi - lo
    for _ in range(cfg.restarts - 1):
        jitter = (rng.random(len(free)) - 0.5) * 0.2 * span
        starts.append(np.clip(x0 + jitter, lo + 1e-9 * span, hi - 1e-9 * span))

    def one_start(start: np.ndarray):
        return minimize(
            objective,
            start,
            method="Nelder-Mead",
            bounds=Bounds(lo, hi),
            options={
                "maxiter": cfg.max_iter,
                "maxfev": 4 * cfg.max_iter,
                "fatol": fatol,
                "xatol": xatol,
            },
        )

    results = run_tasks(one_start, starts)
    best_idx = min(range(len(results)), key=lambda i: (results[i].fun, i))
    best = results[best_idx]
    estimates = dict(zip(free, (float(v) for v in best.x)))
    model, source = _apply(free, best.x, m0, s)
    uncertainties = None
    if cfg.compute_uncertainty:
        uncertainties = _curvature_uncertainty(objective, best.x, lo, hi, free)
    return FitResult(
        estimates=estimates,
        objective=float(best.fun),
        converged=bool(best.success),
        iterations=int(best.nit),
        model=model,
        source=source,
        uncertainties=uncertainties,
    )


def _curvature_uncertainty(objective, x, lo, hi, names) -> dict:
    """Inverse-Hessian square roots as a rough per-parameter error scale."""
    k = len(x)
    step = np.maximum(1e-4 * np.maximum(np.abs(x), 1.0), 1e-8)
    step = np.minimum(step, (hi - lo) / 4.0)
    hess = np.empty((k, k))
    f0 = objective(x)

    def at(dx):
        return objective(np.clip(x + dx, lo, hi))

    for i in range(k):
        ei = np.zeros(k)
        ei[i] = step[i]
        hess[i, i] = (at(ei) - 2.0 * f0 + at(-ei)) / step[i] ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = step[j]
            hess[i, j] = hess[j, i] = (
                at(ei + ej) - at(ei - ej) - at(-ei + ej) + at(-ei - ej)
            ) / (4.0 * step[i] * step[j])
    try:
        cov = np.linalg.inv(hess)
        diag = np.diag(cov)
        return {
            name: (math.sqrt(d) if d > 0 else math.nan)
            for name, d in zip(names, diag)
        }
    except np.linalg.LinAlgError:
        return {name: math.nan for name in names}


def goodness_of_fit(
    h: Histogram,
    m: PnrModel,
    s: PhotonSource,
    n_free: int = 0,
    min_expected: float = 5.0,
) -> dict:
    """Pearson chi-square of the histogram against the model.

    Adjacent cells (underflow, bins, overflow) are pooled left to right
    until each pool has expected count >= min_expected; a trailing
    short pool merges into its neighbor.  dof = pools - n_free - 1.
    """
    counts = _cell_counts(h)
    total = counts.sum()
    if total <= 0:
        raise InsufficientDataError("histogram is empty")
    expected = total * _cell_probabilities(m, s, h.bin_edges)

    pooled_obs, pooled_exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(counts, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            pooled_obs.append(acc_o)
            pooled_exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if pooled_exp:
            pooled_obs[-1] += acc_o
            pooled_exp[-1] += acc_e
        else:
            pooled_obs.append(acc_o)
            pooled_exp.append(acc_e)

    if len(pooled_exp) < 3:
        raise InsufficientDataError(
            f"only {len(pooled_exp)} pooled bins with expected >= {min_expected}; "
            "need at least 3"
        )
    dof = len(pooled_exp) - n_free - 1
    if dof < 1:
        raise InsufficientDataError(
            f"{len(pooled_exp)} pooled bins leave no degrees of freedom "
            f"after {n_free} free parameters"
        )
    obs = np.array(pooled_obs)
    exp = np.array(pooled_exp)
    chi2 = float(((obs - exp) ** 2 / exp).sum())
    return {
        "chi2": chi2,
        "dof": dof,
        "chi2_per_dof": chi2 / dof,
        "p_proxy": float(chi2_dist.sf(chi2, dof)),
    }
