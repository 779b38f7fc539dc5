import math

import numpy as np
import pytest

from pnrres import (
    GAUSSIAN_FWHM_FACTOR,
    JitterBudget,
    PerNRule,
    PnrModel,
    figure2_curves,
    resolve_exact,
    resolve_gaussian,
)


def scaled_model(c=1.0, delta_mu=100.0, sigma=5.0, tau=0.0, n_max=6, t0=0.0):
    """Single-contribution jitter so sigma_n == sigma exactly."""
    return PnrModel(
        t0=c * t0,
        delta_mu=c * delta_mu,
        jitter=JitterBudget(noise=c * sigma),
        tau=c * tau,
        n_max=n_max,
    )


class TestExactCriterion:
    def test_reference_config(self, gauss5_model):
        report = resolve_exact(gauss5_model)
        seps = [e.separation for e in report.per_n]
        assert seps[0] == pytest.approx(29.29, abs=0.01)
        assert seps[1] == pytest.approx(12.98, abs=0.01)
        assert seps[2] == pytest.approx(7.74, abs=0.01)
        for e in report.per_n:
            assert e.fwhm == pytest.approx(11.77, abs=0.01)
        assert [e.exact_ok for e in report.per_n] == [True, True, False, False, False]
        assert report.n_resolvable_exact == 2

    def test_infinite_separation_resolves_everything(self):
        report = resolve_exact(scaled_model(delta_mu=1e9))
        assert report.n_resolvable_exact == report.n_resolvable_gaussian == 5

    def test_total_overlap_resolves_nothing(self):
        report = resolve_exact(scaled_model(delta_mu=1.0, sigma=50.0))
        assert report.n_resolvable_exact == 0

    def test_criterion_brackets_the_boundary(self):
        # sep(1) marginally above/below fwhm(1) flips the verdict
        sigma = 5.0
        fwhm = GAUSSIAN_FWHM_FACTOR * sigma
        gap1 = 1.0 - 1.0 / math.sqrt(2.0)
        for eps, ok in ((1e-6, True), (-1e-6, False)):
            m = scaled_model(delta_mu=fwhm * (1.0 + eps) / gap1, sigma=sigma, n_max=2)
            assert resolve_exact(m).per_n[0].exact_ok is ok

    def test_boundary_equality_is_inclusive(self):
        # engineer sigma_tot so k*sigma_tot == separation bit for bit, then
        # the gaussian flag must read True (Eq. uses >=, not >)
        m = scaled_model(delta_mu=120.0, sigma=5.0, n_max=2)
        sep = resolve_exact(m).per_n[0].separation
        target = sep / GAUSSIAN_FWHM_FACTOR
        hit = None
        cand = target
        for _ in range(6):
            if GAUSSIAN_FWHM_FACTOR * cand == sep:
                hit = cand
                break
            cand = np.nextafter(cand, 0.0)
        cand = np.nextafter(target, np.inf)
        for _ in range(6):
            if hit is not None:
                break
            if GAUSSIAN_FWHM_FACTOR * cand == sep:
                hit = cand
            cand = np.nextafter(cand, np.inf)
        assert hit is not None, "no float gives exact equality; rework the probe"
        m_eq = scaled_model(delta_mu=120.0, sigma=float(hit), n_max=2)
        entry = resolve_gaussian(m_eq).per_n[0]
        assert GAUSSIAN_FWHM_FACTOR * entry.sigma_tot == entry.separation
        assert entry.gaussian_ok is True

    def test_prefix_rule_stops_at_first_failure(self):
        # n-dependent width: make n=2 fail while n=3 would pass again
        m = PnrModel(
            t0=0.0,
            delta_mu=100.0,
            jitter=JitterBudget(intrinsic=PerNRule.explicit([2.0, 9.0, 1.0, 1.0, 1.0, 1.0])),
            tau=0.0,
            n_max=6,
        )
        report = resolve_exact(m)
        flags = [e.exact_ok for e in report.per_n]
        assert flags[0] is True and flags[1] is False and flags[2] is True
        assert report.n_resolvable_exact == 1  # not 3: prefix rule


class TestGaussianCriterion:
    def test_matches_exact_at_tau_zero(self):
        rng = np.random.default_rng(23)
        for _ in range(15):
            m = scaled_model(
                delta_mu=float(rng.uniform(20, 300)),
                sigma=float(rng.uniform(1, 20)),
                n_max=int(rng.integers(2, 7)),
            )
            report = resolve_exact(m)
            for e in report.per_n:
                assert e.exact_ok == e.gaussian_ok
            assert report.n_resolvable_exact == report.n_resolvable_gaussian

    def test_zero_width_limit_passes_everywhere(self):
        report = resolve_gaussian(scaled_model(sigma=1e-9))
        assert all(e.gaussian_ok for e in report.per_n)
        assert report.n_resolvable_gaussian == 5

    def test_validity_flag_tracks_tau_over_sigma(self):
        ok = resolve_gaussian(scaled_model(sigma=5.0, tau=0.4))
        assert all(e.gaussian_approx_valid for e in ok.per_n)
        bad = resolve_gaussian(scaled_model(sigma=5.0, tau=5.0))
        assert not any(e.gaussian_approx_valid for e in bad.per_n)

    def test_verdicts_may_split_when_tail_dominates(self, emg_fig2_model):
        report = resolve_gaussian(emg_fig2_model)
        assert report.n_resolvable_exact == 3
        assert report.n_resolvable_gaussian == 2
        assert not report.per_n[2].gaussian_approx_valid

    def test_k_constant_value(self, gauss5_model):
        report = resolve_gaussian(gauss5_model)
        assert report.k_constant == pytest.approx(2.3548200450309493, rel=1e-15)


class TestInvariances:
    @pytest.mark.parametrize("c", [1e-3, 0.5, 1000.0])
    def test_time_unit_rescaling_preserves_verdicts(self, c):
        base = resolve_exact(scaled_model(1.0, tau=2.0, t0=17.0))
        scaled = resolve_exact(scaled_model(c, tau=2.0, t0=17.0))
        for a, b in zip(base.per_n, scaled.per_n):
            assert a.exact_ok == b.exact_ok
            assert a.gaussian_ok == b.gaussian_ok
            assert b.separation == pytest.approx(c * a.separation, rel=1e-12)
            assert b.fwhm == pytest.approx(c * a.fwhm, rel=1e-6)
        assert base.n_resolvable_exact == scaled.n_resolvable_exact
        assert base.n_resolvable_gaussian == scaled.n_resolvable_gaussian

    def test_more_separation_never_resolves_less(self):
        previous = -1
        for dmu in (10.0, 30.0, 60.0, 120.0, 240.0, 480.0):
            n_res = resolve_exact(scaled_model(delta_mu=dmu, tau=1.0)).n_resolvable_exact
            assert n_res >= previous
            previous = n_res

    def test_separation_column_strictly_decreasing(self, emg_fig2_model):
        rows = figure2_curves(emg_fig2_model)
        seps = [r["separation_ps"] for r in rows]
        assert all(a > b for a, b in zip(seps, seps[1:]))


class TestFigure2Curves:
    def test_crossing_matches_resolvable_number(self, gauss5_model):
        rows = figure2_curves(gauss5_model)
        assert len(rows) == gauss5_model.n_max - 1
        above = [r["separation_ps"] >= r["fwhm_ps"] for r in rows]
        assert above == [True, True, False, False, False]

    def test_constant_width_gives_flat_fwhm_curve(self, gauss5_model):
        rows = figure2_curves(gauss5_model)
        fwhms = [r["fwhm_ps"] for r in rows]
        assert max(fwhms) - min(fwhms) < 1e-9

    def test_report_round_trips_to_dict(self, gauss5_model):
        d = resolve_exact(gauss5_model).to_dict()
        assert d["n_resolvable_exact"] == 2
        assert len(d["per_n"]) == 5
        assert set(d["per_n"][0]) == {
            "n", "mu_n_ps", "separation_ps", "fwhm_ps", "sigma_tot_ps",
            "exact_ok", "gaussian_ok", "gaussian_approx_valid",
        }
