"""Photon-number resolvability analysis for SNSPD arrival-time statistics.

Models photon-number-resolved arrival times as a Poisson-weighted mixture
of exponentially-modified Gaussians, fits that model to histograms, and
evaluates how many photon numbers a detector can resolve.
"""

from .emg import (
    GAUSSIAN_FWHM_FACTOR,
    EmgParams,
    FwhmResult,
    emg_cdf,
    emg_fwhm,
    emg_mode,
    emg_pdf,
    emg_sample,
)
from .errors import (
    IllPosedFitError,
    InsufficientDataError,
    NumericalFailureError,
    ParameterDomainError,
    PhotonNumberRangeError,
    PnrError,
)
from .estimator import PhotonNumberEstimator
from .discrimination import (
    ConfusionMatrix,
    DecisionRule,
    classify_tags,
    confusion,
    optimal_thresholds,
)
from .fitting import FitConfig, FitResult, fit_histogram, goodness_of_fit
from .model import (
    JitterBudget,
    PerNRule,
    PhotonSource,
    PnrModel,
    click_weights,
    load_model_config,
    mixture_cdf,
    mixture_pdf,
    model_from_dict,
)
from .montecarlo import (
    Histogram,
    TagStream,
    bin_arrivals,
    histogram,
    read_histogram,
    read_tags,
    simulate_tags,
    write_histogram,
    write_labeled_tags,
    write_tags,
)
from .resolvability import (
    ResolvabilityEntry,
    ResolvabilityReport,
    figure2_curves,
    resolve_exact,
    resolve_gaussian,
)

__version__ = "0.1.0"
