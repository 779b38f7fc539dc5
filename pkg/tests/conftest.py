import time

import numpy as np
import pytest

from pnrres import (
    FitConfig,
    JitterBudget,
    PerNRule,
    PhotonSource,
    PnrModel,
    fit_histogram,
    histogram,
    simulate_tags,
)


@pytest.fixture
def gauss5_model():
    """Reference desk-scale model: delta_mu 100 ps, sigma_n = 5 ps, tau = 0."""
    return PnrModel(
        t0=0.0,
        delta_mu=100.0,
        jitter=JitterBudget(noise=3.0, inst=4.0),
        tau=0.0,
        n_max=6,
    )


@pytest.fixture
def source15():
    return PhotonSource(mean_photon=1.5)


@pytest.fixture
def emg_fig2_model():
    """EMG model whose n=3/4 components intersect near their half maxima."""
    return PnrModel(
        t0=0.0,
        delta_mu=145.0,
        jitter=JitterBudget(intrinsic=PerNRule.constant(4.0)),
        tau=3.0,
        n_max=6,
    )


TRUTH = {"delta_mu": 80.0, "sigma_int": 4.0, "tau": 3.0}


def roundtrip_truth_model():
    return PnrModel(
        t0=0.0,
        delta_mu=TRUTH["delta_mu"],
        jitter=JitterBudget(noise=2.0, inst=2.0, opt=1.0,
                            intrinsic=PerNRule.constant(TRUTH["sigma_int"])),
        tau=TRUTH["tau"],
        n_max=6,
    )


def roundtrip_initial_model():
    return PnrModel(
        t0=0.0,
        delta_mu=70.0,
        jitter=JitterBudget(noise=2.0, inst=2.0, opt=1.0,
                            intrinsic=PerNRule.constant(5.5)),
        tau=1.5,
        n_max=6,
    )


@pytest.fixture(scope="session")
def roundtrip_big():
    """One big simulate + fit shared by the fit tests and the acceptance gate."""
    truth = roundtrip_truth_model()
    source = PhotonSource(1.5)
    t0 = time.perf_counter()
    tags = simulate_tags(truth, source, shots=1_290_000, seed=20240811)
    h = histogram(tags, bin_width=1.0, t_range=(10.0, 130.0))
    result = fit_histogram(h, roundtrip_initial_model(), source, FitConfig())
    duration = time.perf_counter() - t0
    return {
        "tags": tags,
        "histogram": h,
        "result": result,
        "duration_s": duration,
        "truth": dict(TRUTH),
        "source": source,
    }


def seeded_rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
