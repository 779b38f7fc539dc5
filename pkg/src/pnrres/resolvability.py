"""Photon-number resolvability criteria.

Exact criterion: photon number n is resolvable when the peak-center
separation is at least the full width at half maximum of component n::

    mu_n - mu_{n+1} >= FWHM_n

Gaussian-limit criterion (valid for tau << sigma)::

    delta_mu (1/sqrt(n) - 1/sqrt(n+1)) >= k sqrt(sigma_n^2 + tau_n^2)

with k = 2 sqrt(2 ln 2).  Both use the unit-normalized component shapes;
mixture weights do not enter.  The maximum resolvable photon number is the
largest n for which every m <= n satisfies the criterion (prefix rule), so
a gap in the ok-flags never inflates the headline number.
"""

from __future__ import annotations

from dataclasses import dataclass

from .emg import GAUSSIAN_FWHM_FACTOR, emg_fwhm
from .errors import ParameterDomainError
from .model import PnrModel
from .util import run_tasks

__all__ = [
    "ResolvabilityEntry",
    "ResolvabilityReport",
    "resolve_exact",
    "resolve_gaussian",
    "figure2_curves",
]

# tau_n / sigma_n above this ratio flags the Gaussian approximation as suspect
GAUSSIAN_VALIDITY_RATIO = 0.1


@dataclass(frozen=True)
class ResolvabilityEntry:
    """Per-photon-number row of a resolvability report."""

    n: int
    mu_n: float
    separation: float
    fwhm: float
    sigma_tot: float
    exact_ok: bool
    gaussian_ok: bool
    gaussian_approx_valid: bool

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mu_n_ps": self.mu_n,
            "separation_ps": self.separation,
            "fwhm_ps": self.fwhm,
            "sigma_tot_ps": self.sigma_tot,
            "exact_ok": self.exact_ok,
            "gaussian_ok": self.gaussian_ok,
            "gaussian_approx_valid": self.gaussian_approx_valid,
        }


@dataclass(frozen=True)
class ResolvabilityReport:
    per_n: tuple[ResolvabilityEntry, ...]
    n_resolvable_exact: int
    n_resolvable_gaussian: int
    k_constant: float = GAUSSIAN_FWHM_FACTOR

    def entry(self, n: int) -> ResolvabilityEntry:
        for e in self.per_n:
            if e.n == n:
                return e
        raise KeyError(n)

    def to_dict(self) -> dict:
        return {
            "per_n": [e.to_dict() for e in self.per_n],
            "n_resolvable_exact": self.n_resolvable_exact,
            "n_resolvable_gaussian": self.n_resolvable_gaussian,
            "k_constant": self.k_constant,
        }


def _prefix_max(flags: list[bool]) -> int:
    n = 0
    for ok in flags:
        if not ok:
            break
        n += 1
    return n


def _build_report(m: PnrModel) -> ResolvabilityReport:
    if m.n_max < 2:
        raise ParameterDomainError("resolvability needs n_max >= 2")
    ns = list(range(1, m.n_max))
    fwhms = run_tasks(lambda n: emg_fwhm(m.component(n)).fwhm, ns)
    entries = []
    for n, fwhm in zip(ns, fwhms):
        sep = m.separation(n)
        sigma_tot = m.sigma_tot_n(n)
        entries.append(
            ResolvabilityEntry(
                n=n,
                mu_n=m.mu_n(n),
                separation=sep,
                fwhm=fwhm,
                sigma_tot=sigma_tot,
                exact_ok=sep >= fwhm,
                gaussian_ok=sep >= GAUSSIAN_FWHM_FACTOR * sigma_tot,
                gaussian_approx_valid=m.tau_n(n) <= GAUSSIAN_VALIDITY_RATIO * m.sigma_n(n),
            )
        )
    return ResolvabilityReport(
        per_n=tuple(entries),
        n_resolvable_exact=_prefix_max([e.exact_ok for e in entries]),
        n_resolvable_gaussian=_prefix_max([e.gaussian_ok for e in entries]),
    )


def resolve_exact(m: PnrModel) -> ResolvabilityReport:
    """Full report; the exact_ok flags apply the FWHM criterion as stated.

    The Gaussian-limit flags are filled in as well (they cost nothing once
    the per-n table is built), so one call serves both views.
    """
    return _build_report(m)


def resolve_gaussian(m: PnrModel) -> ResolvabilityReport:
    """Full report; the gaussian_ok flags apply the k*sigma_tot criterion.

    Rows where tau_n > sigma_n / 10 have gaussian_approx_valid = False:
    the approximation assumes tau << sigma and its verdict may disagree
    with the exact FWHM criterion there.
    """
    return _build_report(m)


def figure2_curves(m: PnrModel) -> list[dict]:
    """Separation and FWHM versus n, plot-ready (rows of n/separation/fwhm).

    The index where the separation curve crosses below the FWHM curve
    equals the exact maximum resolvable photon number.
    """
    report = _build_report(m)
    return [
        {"n": e.n, "separation_ps": e.separation, "fwhm_ps": e.fwhm}
        for e in report.per_n
    ]
