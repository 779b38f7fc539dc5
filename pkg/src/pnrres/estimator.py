"""Scikit-learn style front end for the arrival-time mixture.

Wraps histogram fitting (fit), MAP threshold classification (predict /
predict_proba) and the mixture log-density (score_samples / score) behind
the estimator API, so the model drops into sklearn pipelines and
model-selection tooling via get_params / set_params / clone.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .discrimination import optimal_thresholds
from .fitting import FitConfig, fit_histogram
from .model import JitterBudget, PerNRule, PhotonSource, PnrModel, click_weights, mixture_pdf
from .montecarlo import bin_arrivals
from .emg import emg_pdf

__all__ = ["PhotonNumberEstimator"]


class PhotonNumberEstimator(BaseEstimator):
    """Fit the photon-number arrival-time mixture, then label arrivals.

    Parameters
    ----------
    n_max : int
        Highest explicitly modeled photon number.
    t0_ps, delta_mu_ps : float
        Peak-position law; centers sit at t0 + delta_mu/sqrt(n).
    noise_ps, inst_ps, opt_ps, geom_ps : float
        Fixed (externally measured) jitter contributions.
    sigma_int_ps, tau_ps : float
        Initial intrinsic jitter and exponential tail constants.
    mean_photon : float
        Initial Poisson mean photon number per pulse.
    free_parameters : tuple of str
        Parameters released to the fit (default: the canonical trio).
    bin_width_ps : float or None
        Histogram bin width; None picks 1/200 of the data span.
    fit_range_ps : (float, float) or None
        Histogram range; None covers the data with a small margin.
    n_labels : int or None
        Label count for prediction; None uses n_max.
    restart_seed : int
        Seed for the optimizer's restart perturbations.

    Attributes
    ----------
    model_ : PnrModel
        Fitted arrival-time model.
    source_ : PhotonSource
        Fitted (or fixed) photon source.
    fit_result_ : FitResult
        Full optimizer output.
    rule_ : DecisionRule
        MAP thresholds used by predict.
    """

    def __init__(
        self,
        n_max=4,
        t0_ps=0.0,
        delta_mu_ps=100.0,
        noise_ps=0.0,
        inst_ps=0.0,
        opt_ps=0.0,
        geom_ps=0.0,
        sigma_int_ps=5.0,
        tau_ps=0.0,
        mean_photon=1.0,
        free_parameters=("delta_mu", "sigma_int", "tau"),
        bin_width_ps=None,
        fit_range_ps=None,
        n_labels=None,
        restart_seed=0,
    ):
        self.n_max = n_max
        self.t0_ps = t0_ps
        self.delta_mu_ps = delta_mu_ps
        self.noise_ps = noise_ps
        self.inst_ps = inst_ps
        self.opt_ps = opt_ps
        self.geom_ps = geom_ps
        self.sigma_int_ps = sigma_int_ps
        self.tau_ps = tau_ps
        self.mean_photon = mean_photon
        self.free_parameters = free_parameters
        self.bin_width_ps = bin_width_ps
        self.fit_range_ps = fit_range_ps
        self.n_labels = n_labels
        self.restart_seed = restart_seed

    def _initial_model(self) -> tuple[PnrModel, PhotonSource]:
        jitter = JitterBudget(
            noise=self.noise_ps,
            inst=self.inst_ps,
            opt=self.opt_ps,
            geom=PerNRule.constant(self.geom_ps),
            intrinsic=PerNRule.constant(self.sigma_int_ps),
        )
        model = PnrModel(
            t0=self.t0_ps,
            delta_mu=self.delta_mu_ps,
            jitter=jitter,
            tau=PerNRule.constant(self.tau_ps),
            n_max=self.n_max,
        )
        return model, PhotonSource(self.mean_photon)

    def _column(self, X) -> np.ndarray:
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError("arrival times must be a single column")
            X = X[:, 0]
        return X

    def fit(self, X, y=None):
        """Fit the free parameters to arrival times X (shape (n,) or (n, 1))."""
        arrivals = self._column(X)
        if self.fit_range_ps is not None:
            lo, hi = self.fit_range_ps
        else:
            span = arrivals.max() - arrivals.min()
            margin = 0.05 * span if span > 0 else 1.0
            lo, hi = arrivals.min() - margin, arrivals.max() + margin
        width = self.bin_width_ps if self.bin_width_ps is not None else (hi - lo) / 200.0
        hist = bin_arrivals(arrivals, width, (lo, hi))
        m0, s0 = self._initial_model()
        cfg = FitConfig(free=tuple(self.free_parameters), restart_seed=self.restart_seed)
        self.fit_result_ = fit_histogram(hist, m0, s0, cfg)
        self.model_ = self.fit_result_.model
        self.source_ = self.fit_result_.source
        labels = self.n_labels if self.n_labels is not None else self.model_.n_max
        self.rule_ = optimal_thresholds(self.model_, self.source_, labels)
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        """Photon-number labels 1..B for arrival times X."""
        check_is_fitted(self, "rule_")
        return self.rule_.assign(self._column(X))

    def predict_proba(self, X) -> np.ndarray:
        """Posterior P(bucket | arrival) over the B labels, rows sum to 1."""
        check_is_fitted(self, "rule_")
        arrivals = self._column(X)
        B = self.rule_.n_labels
        w = click_weights(self.source_, self.model_.n_max)
        joint = np.zeros((len(arrivals), B))
        for n in range(1, self.model_.n_max + 1):
            dens = w[n - 1] * emg_pdf(self.model_.component(n), arrivals)
            joint[:, min(n, B) - 1] += dens
        norm = joint.sum(axis=1, keepdims=True)
        norm[norm == 0.0] = 1.0
        return joint / norm

    def score_samples(self, X) -> np.ndarray:
        """Log of the mixture density at each arrival time."""
        check_is_fitted(self, "model_")
        dens = mixture_pdf(self.model_, self.source_, self._column(X))
        return np.log(np.clip(dens, 1e-300, None))

    def score(self, X, y=None) -> float:
        """Mean log-likelihood of arrivals under the fitted mixture."""
        return float(np.mean(self.score_samples(X)))
