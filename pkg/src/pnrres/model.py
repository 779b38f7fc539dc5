"""Photon-number-resolved arrival-time model.

Peak centers follow the 1/sqrt(n) law, mu_n = t0 + delta_mu/sqrt(n), so
higher photon numbers arrive earlier.  Each component n is an EMG whose
Gaussian width combines five jitter contributions in quadrature::

    sigma_n = sqrt(noise^2 + inst^2 + opt^2 + geom_n^2 + int_n^2)

The geometric and intrinsic terms (and tau) may depend on n through a
per-n rule: a constant, a 1/sqrt(n) law anchored at n = 1, or an explicit
list.  A Poissonian source conditioned on "at least one photon" supplies
the mixture weights; photon numbers >= n_max share the n_max component
(the overflow bucket).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emg import EmgParams, emg_pdf, emg_cdf
from .errors import ParameterDomainError, PhotonNumberRangeError

__all__ = [
    "PerNRule",
    "JitterBudget",
    "PnrModel",
    "PhotonSource",
    "click_weights",
    "mixture_pdf",
    "mixture_cdf",
    "load_model_config",
    "model_from_dict",
]

_LAWS = ("constant", "inverse-sqrt-n")


@dataclass(frozen=True)
class PerNRule:
    """Photon-number dependence of a nonnegative parameter (width or tau).

    Either law-based (anchor value at n = 1 plus "constant" or
    "inverse-sqrt-n") or an explicit per-n list.
    """

    law: str = "constant"
    value: float | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.values is not None:
            vals = tuple(float(v) for v in self.values)
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "law", "explicit")
            object.__setattr__(self, "value", None)
            if len(vals) == 0:
                raise ParameterDomainError("explicit per-n list must be nonempty")
            if any(not math.isfinite(v) or v < 0 for v in vals):
                raise ParameterDomainError("per-n values must be finite and >= 0")
            return
        if self.law not in _LAWS:
            raise ParameterDomainError(
                f"unknown per-n law {self.law!r}; expected one of {_LAWS}"
            )
        if self.value is None:
            raise ParameterDomainError("law-based per-n rule needs a value")
        v = float(self.value)
        object.__setattr__(self, "value", v)
        if not math.isfinite(v) or v < 0:
            raise ParameterDomainError(f"per-n value must be finite and >= 0, got {v!r}")

    @classmethod
    def constant(cls, value: float) -> "PerNRule":
        return cls(law="constant", value=value)

    @classmethod
    def inverse_sqrt_n(cls, value_at_1: float) -> "PerNRule":
        return cls(law="inverse-sqrt-n", value=value_at_1)

    @classmethod
    def explicit(cls, values) -> "PerNRule":
        return cls(values=tuple(values))

    @classmethod
    def coerce(cls, spec) -> "PerNRule":
        """Build a rule from a scalar, a {value, law} mapping, or a list."""
        if isinstance(spec, PerNRule):
            return spec
        if isinstance(spec, (int, float)):
            return cls.constant(float(spec))
        if isinstance(spec, dict):
            extra = set(spec) - {"value", "law"}
            if extra:
                raise ParameterDomainError(f"unknown per-n rule keys: {sorted(extra)}")
            return cls(law=spec.get("law", "constant"), value=spec.get("value"))
        if isinstance(spec, (list, tuple)):
            return cls.explicit(spec)
        raise ParameterDomainError(f"cannot interpret per-n rule from {spec!r}")

    @property
    def is_law_based(self) -> bool:
        return self.values is None

    def with_anchor(self, value: float) -> "PerNRule":
        """Same law, new anchor value (law-based rules only)."""
        if not self.is_law_based:
            raise ParameterDomainError("explicit per-n lists have no anchor value")
        return PerNRule(law=self.law, value=value)

    def value_at(self, n: int) -> float:
        if n < 1:
            raise PhotonNumberRangeError(f"photon number must be >= 1, got {n}")
        if self.values is not None:
            if n > len(self.values):
                raise PhotonNumberRangeError(
                    f"explicit per-n list covers n <= {len(self.values)}, got {n}"
                )
            return self.values[n - 1]
        if self.law == "constant":
            return self.value
        return self.value / math.sqrt(n)

    def to_config(self):
        if self.values is not None:
            return list(self.values)
        if self.law == "constant":
            return self.value
        return {"value": self.value, "law": self.law}


def _check_nonneg(name: str, v: float) -> float:
    v = float(v)
    if not math.isfinite(v) or v < 0:
        raise ParameterDomainError(f"{name} must be finite and >= 0, got {v!r}")
    return v


@dataclass(frozen=True)
class JitterBudget:
    """The five timing-jitter contributions, ps.

    noise, inst and opt are photon-number independent; geom and intrinsic
    carry a per-n rule.
    """

    noise: float = 0.0
    inst: float = 0.0
    opt: float = 0.0
    geom: PerNRule = field(default_factory=lambda: PerNRule.constant(0.0))
    intrinsic: PerNRule = field(default_factory=lambda: PerNRule.constant(0.0))

    def __post_init__(self):
        object.__setattr__(self, "noise", _check_nonneg("noise", self.noise))
        object.__setattr__(self, "inst", _check_nonneg("inst", self.inst))
        object.__setattr__(self, "opt", _check_nonneg("opt", self.opt))
        object.__setattr__(self, "geom", PerNRule.coerce(self.geom))
        object.__setattr__(self, "intrinsic", PerNRule.coerce(self.intrinsic))

    def sigma_n(self, n: int) -> float:
        """Quadrature sum of all five contributions at photon number n."""
        return math.sqrt(
            self.noise**2
            + self.inst**2
            + self.opt**2
            + self.geom.value_at(n) ** 2
            + self.intrinsic.value_at(n) ** 2
        )


@dataclass(frozen=True)
class PhotonSource:
    """Poissonian source with mean photon number per pulse mean_photon."""

    mean_photon: float

    def __post_init__(self):
        v = float(self.mean_photon)
        object.__setattr__(self, "mean_photon", v)
        if not math.isfinite(v) or v <= 0:
            raise ParameterDomainError(f"mean_photon must be > 0, got {v!r}")


@dataclass(frozen=True)
class PnrModel:
    """Arrival-time model: peak-position law + jitter budget + tail law.

    Parameters
    ----------
    t0 : float
        Asymptotic arrival offset, ps (center for n -> infinity).
    delta_mu : float
        Separation scale, ps; peak centers sit at t0 + delta_mu/sqrt(n).
    jitter : JitterBudget
        Gaussian-width contributions.
    tau : PerNRule or float
        Exponential tail constant per n (scalar means constant in n).
    n_max : int
        Highest explicitly modeled photon number (>= 2); larger photon
        numbers share component n_max.
    """

    t0: float
    delta_mu: float
    jitter: JitterBudget
    tau: PerNRule = field(default_factory=lambda: PerNRule.constant(0.0))
    n_max: int = 4

    def __post_init__(self):
        t0 = float(self.t0)
        dmu = float(self.delta_mu)
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "delta_mu", dmu)
        object.__setattr__(self, "tau", PerNRule.coerce(self.tau))
        if not math.isfinite(t0):
            raise ParameterDomainError(f"t0 must be finite, got {t0!r}")
        if not math.isfinite(dmu) or dmu <= 0:
            raise ParameterDomainError(f"delta_mu must be > 0, got {dmu!r}")
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ParameterDomainError(f"n_max must be an integer >= 2, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))
        # fail fast if an explicit list is too short or a component is invalid
        for n in range(1, self.n_max + 1):
            self.component(n)

    def _check_n(self, n: int):
        if int(n) != n or not 1 <= n <= self.n_max:
            raise PhotonNumberRangeError(
                f"photon number must be an integer in [1, {self.n_max}], got {n!r}"
            )

    def mu_n(self, n: int) -> float:
        """Peak center t0 + delta_mu/sqrt(n)."""
        self._check_n(n)
        return self.t0 + self.delta_mu / math.sqrt(n)

    def separation(self, n: int) -> float:
        """Peak-center difference mu_n - mu_{n+1}; defined for n < n_max."""
        self._check_n(n)
        self._check_n(n + 1)
        return self.delta_mu * (1.0 / math.sqrt(n) - 1.0 / math.sqrt(n + 1))

    def sigma_n(self, n: int) -> float:
        """Gaussian width of component n (jitter quadrature sum)."""
        self._check_n(n)
        return self.jitter.sigma_n(n)

    def tau_n(self, n: int) -> float:
        self._check_n(n)
        return self.tau.value_at(n)

    def sigma_tot_n(self, n: int) -> float:
        """Total width sqrt(sigma_n^2 + tau_n^2)."""
        return math.sqrt(self.sigma_n(n) ** 2 + self.tau_n(n) ** 2)

    def component(self, n: int) -> EmgParams:
        """EMG parameters of the photon-number-n component."""
        self._check_n(n)
        return EmgParams(mu=self.mu_n(n), sigma=self.sigma_n(n), tau=self.tau_n(n))

    def components(self) -> list[EmgParams]:
        return [self.component(n) for n in range(1, self.n_max + 1)]


def click_weights(source: PhotonSource, n_max: int) -> np.ndarray:
    """Click-conditioned Poisson weights over n = 1..n_max.

    Entries 1..n_max-1 are P(N = n | N >= 1); the last entry is the
    overflow mass P(N >= n_max | N >= 1), so the weights sum to 1 exactly.
    """
    if int(n_max) != n_max or n_max < 1:
        raise ParameterDomainError(f"n_max must be an integer >= 1, got {n_max!r}")
    mu = source.mean_photon
    n_max = int(n_max)
    denom = -math.expm1(-mu)  # P(N >= 1)
    w = []
    log_mu = math.log(mu)
    for n in range(1, n_max):
        log_pmf = -mu + n * log_mu - math.lgamma(n + 1)
        w.append(math.exp(log_pmf) / denom)
    w.append(max(0.0, 1.0 - math.fsum(w)))
    # close the sum to exactly 1 on the largest weight; the correction is
    # O(1 ulp) and keeps every entry nonnegative
    for _ in range(5):
        resid = 1.0 - math.fsum(w)
        if resid == 0.0:
            break
        w[max(range(len(w)), key=w.__getitem__)] += resid
    return np.array(w)


def mixture_pdf(m: PnrModel, s: PhotonSource, t):
    """Poisson-weighted mixture density over components 1..n_max."""
    w = click_weights(s, m.n_max)
    parts = [w[n - 1] * emg_pdf(m.component(n), t) for n in range(1, m.n_max + 1)]
    return sum(parts)


def mixture_cdf(m: PnrModel, s: PhotonSource, t):
    """Poisson-weighted mixture CDF over components 1..n_max."""
    w = click_weights(s, m.n_max)
    parts = [w[n - 1] * emg_cdf(m.component(n), t) for n in range(1, m.n_max + 1)]
    return sum(parts)


# --- model config JSON ----------------------------------------------------

_TOP_KEYS = {"t0_ps", "delta_mu_ps", "tau_ps", "jitter_ps", "n_max", "mean_photon"}
_JITTER_KEYS = {"noise", "inst", "opt", "geom", "intrinsic"}


def _scalar_jitter(key: str, spec) -> float:
    """noise/inst/opt are n-independent; accept scalar or a constant rule."""
    rule = PerNRule.coerce(spec)
    if rule.is_law_based and rule.law == "constant":
        return rule.value
    if not rule.is_law_based and len(set(rule.values)) == 1:
        return rule.values[0]
    raise ParameterDomainError(
        f"jitter_ps.{key} has no photon-number dependence; give a scalar"
    )


def model_from_dict(cfg: dict) -> tuple[PnrModel, PhotonSource]:
    """Build (PnrModel, PhotonSource) from a parsed model-config mapping."""
    if not isinstance(cfg, dict):
        raise ParameterDomainError("model config must be a JSON object")
    extra = set(cfg) - _TOP_KEYS
    if extra:
        raise ParameterDomainError(f"unknown model config keys: {sorted(extra)}")
    for key in ("delta_mu_ps", "n_max", "mean_photon"):
        if key not in cfg:
            raise ParameterDomainError(f"model config is missing {key!r}")
    jitter_cfg = cfg.get("jitter_ps", {})
    if not isinstance(jitter_cfg, dict):
        raise ParameterDomainError("jitter_ps must be an object")
    extra = set(jitter_cfg) - _JITTER_KEYS
    if extra:
        raise ParameterDomainError(f"unknown jitter_ps keys: {sorted(extra)}")
    jitter = JitterBudget(
        noise=_scalar_jitter("noise", jitter_cfg.get("noise", 0.0)),
        inst=_scalar_jitter("inst", jitter_cfg.get("inst", 0.0)),
        opt=_scalar_jitter("opt", jitter_cfg.get("opt", 0.0)),
        geom=PerNRule.coerce(jitter_cfg.get("geom", 0.0)),
        intrinsic=PerNRule.coerce(jitter_cfg.get("intrinsic", 0.0)),
    )
    model = PnrModel(
        t0=cfg.get("t0_ps", 0.0),
        delta_mu=cfg["delta_mu_ps"],
        jitter=jitter,
        tau=PerNRule.coerce(cfg.get("tau_ps", 0.0)),
        n_max=cfg["n_max"],
    )
    source = PhotonSource(mean_photon=cfg["mean_photon"])
    return model, source


def load_model_config(path) -> tuple[PnrModel, PhotonSource]:
    """Read a model config JSON file; see model_from_dict for the schema."""
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterDomainError(f"invalid JSON in {path}: {exc}") from exc
    return model_from_dict(cfg)
