import math

import numpy as np
import pytest

from ssnscope import (
    BASELINE_DIFFERENTIAL,
    BASELINE_IDEAL,
    BASELINE_SAME,
    EstimateSeries,
    RngStream,
    aggregate_windows,
    coherent_variance,
    effective_klyshko,
    estimate_transmittance_differential,
    estimate_transmittance_direct,
    estimate_transmittance_klyshko,
    gamma_analytic,
    gamma_empirical,
    gamma_vs_series,
    input_photons,
    klyshko_efficiency,
    reference_chain,
    simulate_windows,
    ssn_threshold,
)
from ssnscope.errors import (
    DegenerateSeriesError,
    ParameterError,
    SingularGammaError,
    UndefinedEstimateError,
)
from ssnscope.estimation import EstimateWarning
from ssnscope.pipelines import (
    differential_calibration_ratio,
    differential_series,
    direct_series,
    klyshko_calibration_ratio,
    klyshko_series,
)
from ssnscope.twinbeam import CountsWindow

from conftest import assert_within_sigma


def window(detected, dark, heralds):
    return CountsWindow(n_pairs=heralds, n_herald=heralds, n_exposed=heralds,
                        n_detected=detected, n_dark=dark)


class TestKlyshkoEfficiency:
    def test_canonical_ratio(self):
        assert klyshko_efficiency(90, 100) == pytest.approx(0.90)

    def test_extremes(self):
        assert klyshko_efficiency(0, 100) == 0.0
        assert klyshko_efficiency(100, 100) == 1.0

    def test_zero_singles_undefined(self):
        with pytest.raises(UndefinedEstimateError):
            klyshko_efficiency(5, 0)

    def test_above_one_warns_not_clamps(self):
        with pytest.warns(EstimateWarning):
            assert klyshko_efficiency(110, 100) == pytest.approx(1.1)


class TestKlyshkoTransmittance:
    def test_identical_aggregates(self):
        agg = window(80, 0, 100)
        assert estimate_transmittance_klyshko(agg, agg) == pytest.approx(1.0)

    def test_direct_substitution(self):
        est = estimate_transmittance_klyshko(window(80, 0, 100), window(90, 0, 100))
        assert est == pytest.approx(8.0 / 9.0)

    def test_zero_reference_raises(self):
        with pytest.raises(UndefinedEstimateError):
            estimate_transmittance_klyshko(window(10, 0, 100), window(0, 0, 100))

    def test_negative_correction_clamps_with_warning(self):
        with pytest.warns(EstimateWarning):
            est = estimate_transmittance_klyshko(
                window(5, 0, 100), window(90, 0, 100), expected_dark_with=10.0)
        assert est == 0.0

    def test_ground_truth_recovery(self, paper_chain):
        # Monte Carlo oracle: the series mean must sit on the configured
        # transmittance to within 3 standard errors
        ratio = klyshko_calibration_ratio(paper_chain, RngStream(61, (0,)), 800)
        series = klyshko_series(paper_chain, 0.7, RngStream(61, (1,)), 1000, ratio)
        assert_within_sigma(series.mean, 0.7, series.std_error,
                            label="klyshko recovery")

    def test_aggregate_matches_series_scale(self, paper_chain):
        windows = simulate_windows(paper_chain, 0.5, RngStream(62, (0,)), 400)
        cal = simulate_windows(paper_chain, 1.0, RngStream(62, (1,)), 400)
        est = estimate_transmittance_klyshko(
            aggregate_windows(windows), aggregate_windows(cal),
            expected_dark_with=400 * paper_chain.dark_mean,
            expected_dark_no=400 * paper_chain.dark_mean)
        se = 0.5 * math.sqrt(2.0 / (400 * paper_chain.mean_heralds * 0.3))
        assert_within_sigma(est, 0.5, 3 * se, n_sigma=3, label="aggregate estimate")


class TestDirectEstimator:
    def test_unit_normalisation(self):
        series = estimate_transmittance_direct([36000], 40000, 0.9)
        assert series.estimates.tolist() == [1.0]

    def test_zero_counts(self):
        assert estimate_transmittance_direct([0], 40000, 0.9).estimates.tolist() == [0.0]

    def test_bad_normalisation(self):
        with pytest.raises(ParameterError):
            estimate_transmittance_direct([1], 0.0, 0.9)

    def test_variance_matches_poisson_propagation(self):
        # oracle: Var(eta) = eta / (eta_det * N_in) = 0.5 / (0.9 * 40000)
        series = direct_series(40000, 0.5, 0.9, RngStream(63, (0,)), 10_000)
        expected = 0.5 / (0.9 * 40000)
        se = expected * math.sqrt(2.0 / (len(series) - 1))
        assert_within_sigma(series.variance, expected, se, label="direct variance")


class TestDifferentialEstimator:
    def test_exact_ratio(self):
        series = estimate_transmittance_differential([80, 40], [100, 50], 0.8)
        assert np.allclose(series.estimates, 1.0)

    def test_all_zero_signal(self):
        series = estimate_transmittance_differential([0, 0], [90, 110], 1.0)
        assert np.allclose(series.estimates, 0.0)

    def test_zero_monitor_windows_dropped(self):
        series = estimate_transmittance_differential([5, 7, 9], [10, 0, 10], 1.0)
        assert len(series) == 2 and series.dropped_windows == 1

    def test_variance_exceeds_direct_by_monitor_noise(self):
        # brute-force oracle: re-simulate the same configuration with plain
        # numpy draws, entirely outside the package code path
        mean, split, eta, det, n = 53058.0, 0.5, 0.8, 0.9, 10_000
        cal = differential_calibration_ratio(mean, split, det, RngStream(64, (0,)), 2000)
        series = differential_series(mean, split, eta, det,
                                     RngStream(64, (1,)), n, cal)
        rng = np.random.default_rng(987654)
        src = rng.poisson(mean, size=n)
        to_sample = rng.binomial(src, split)
        sig = rng.binomial(to_sample, eta * det)
        mon = rng.binomial(src - to_sample, det)
        brute = (sig / mon) / (split / (1 - split))
        se = math.sqrt(2.0) * series.variance * math.sqrt(2.0 / (n - 1))
        assert_within_sigma(series.variance, brute.var(ddof=1), se,
                            label="differential variance vs brute force")
        direct_var = coherent_variance(eta, det, mean * split)
        assert series.variance > 1.5 * direct_var


class TestInputPhotons:
    def test_identity(self):
        assert input_photons(1000, 0, 1.0, 1.0) == pytest.approx(1000)

    def test_exact_arithmetic(self):
        assert input_photons(1000, 100, 0.9, 1.0) == pytest.approx(1000)

    def test_zero_denominator(self):
        with pytest.raises(ParameterError):
            input_photons(1000, 0, 1.0, 0.0)

    def test_negative_corrected_counts(self):
        with pytest.raises(ParameterError):
            input_photons(50, 100, 1.0, 1.0)

    def test_round_trip_recovers_exposure(self, paper_chain):
        # simulation round-trip oracle at the calibrated 40k-herald chain
        eta = 0.7
        windows = simulate_windows(paper_chain, eta, RngStream(65, (0,)), 1000)
        n_det_mean = np.mean([w.n_detected for w in windows])
        post = paper_chain.eta_opt * paper_chain.eta_det
        recovered = input_photons(n_det_mean, paper_chain.dark_mean, post, eta)
        expected = paper_chain.mean_exposure
        se = math.sqrt((expected * eta * post + paper_chain.dark_mean) / 1000) \
            / (post * eta)
        assert_within_sigma(recovered, expected, se, label="exposure round trip")


class TestCoherentVariance:
    def test_opaque_sample(self):
        assert coherent_variance(0.0, 0.9, 1e4) == 0.0

    def test_monte_carlo_ideal_detector(self):
        # oracle: Monte Carlo variance of the direct estimator, 1e5 windows
        series = direct_series(1e4, 1.0, 1.0, RngStream(166, (0,)), 100_000)
        expected = coherent_variance(1.0, 1.0, 1e4)
        assert expected == pytest.approx(1e-4)
        se = expected * math.sqrt(2.0 / (len(series) - 1))
        assert_within_sigma(series.variance, expected, se, label="coherent var (det=1)")

    def test_monte_carlo_90_percent_detector(self):
        series = direct_series(1e4, 1.0, 0.9, RngStream(66, (1,)), 100_000)
        expected = coherent_variance(1.0, 0.9, 1e4)
        assert expected == pytest.approx(1.111111e-4, rel=1e-5)
        se = expected * math.sqrt(2.0 / (len(series) - 1))
        assert_within_sigma(series.variance, expected, se, label="coherent var (det=0.9)")

    def test_rejects_nonpositive_input(self):
        with pytest.raises(ParameterError):
            coherent_variance(0.5, 0.9, 0.0)


class TestGammaAnalytic:
    def test_threshold_boundary(self):
        assert gamma_analytic(1.0, 0.5, 0.5) == pytest.approx(1.0)

    def test_opaque_sample(self):
        assert gamma_analytic(0.0, 0.7, 0.9) == pytest.approx(0.9)

    def test_singularity(self):
        with pytest.raises(SingularGammaError):
            gamma_analytic(1.0, 1.0, 0.9)

    def test_headline_inversion_and_monte_carlo(self):
        # eta_probe inverted from gamma = 1.76 at eta_ref = 0.90:
        # 0.9 / (1 - eta_probe) = 1.76  =>  eta_probe = 0.48864
        eta_probe = 1.0 - 0.9 / 1.76
        assert eta_probe == pytest.approx(0.48864, abs=1e-5)
        analytic = gamma_analytic(1.0, eta_probe, 0.90)
        assert analytic == pytest.approx(1.76, abs=1e-9)
        # Monte Carlo cross-check with the matching chain (pre-sample optics
        # solved so s*u*d equals the inverted eta_probe; no dark counts)
        u = eta_probe / (0.85 * 0.9)
        chain = reference_chain(eta_pre_sample=u, dark_mean=0.0)
        cal = klyshko_calibration_ratio(chain, RngStream(67, (0,)), 1500)
        series = klyshko_series(chain, 1.0, RngStream(67, (1,)), 4000, cal)
        report = gamma_empirical(series, baseline_eta_det=0.9, eta_sample_ref=1.0)
        assert_within_sigma(report.gamma, analytic, report.gamma_stderr,
                            label="gamma MC vs analytic")

    def test_monotonic_in_all_arguments(self):
        grid = np.linspace(0.05, 0.95, 12)
        for eta_p in (0.3, 0.6):
            for eta_r in (0.4, 0.9):
                g_s = [gamma_analytic(e, eta_p, eta_r) for e in grid]
                assert np.all(np.diff(g_s) > 0)
        for eta_s in (0.3, 1.0):
            g_p = [gamma_analytic(eta_s, e, 0.7) for e in grid]
            g_r = [gamma_analytic(eta_s, 0.7, e) for e in grid]
            assert np.all(np.diff(g_p) > 0) and np.all(np.diff(g_r) > 0)


class TestSsnThreshold:
    def test_above(self):
        assert ssn_threshold(0.6, 0.5) is True

    def test_boundary_excluded(self):
        assert ssn_threshold(0.5, 0.5) is False

    def test_headline_configuration(self):
        assert ssn_threshold(0.48864, 0.90) is True

    def test_coherence_with_gamma_on_grid(self):
        # gamma(1, p, r) > 1 exactly when p + r > 1 (100-point grid)
        for eta_p in np.linspace(0.01, 0.97, 10):
            for eta_r in np.linspace(0.01, 0.99, 10):
                gamma = gamma_analytic(1.0, eta_p, eta_r)
                assert (gamma > 1.0) == ssn_threshold(eta_p, eta_r), \
                    f"mismatch at ({eta_p}, {eta_r})"


class TestGammaEmpirical:
    def test_self_comparison_is_unity(self):
        series = direct_series(40000, 0.8, 0.9, RngStream(68, (0,)), 3000)
        report = gamma_empirical(series, baseline_eta_det=0.9, eta_sample_ref=0.8)
        assert report.baseline_kind == BASELINE_SAME
        assert_within_sigma(report.gamma, 1.0, report.gamma_stderr,
                            label="self-comparison gamma")

    def test_headline_band(self, paper_chain):
        # 13 series x 40 windows at the calibrated chain, unit transmittance:
        # pooled gamma lands in the reported 3-sigma band [1.49, 2.03]
        cal = klyshko_calibration_ratio(paper_chain, RngStream(69, (0,)), 800)
        series = klyshko_series(paper_chain, 1.0, RngStream(69, (1,)), 13 * 40, cal)
        report = gamma_empirical(series, baseline_eta_det=0.9, eta_sample_ref=1.0)
        assert 1.49 <= report.gamma <= 2.03
        report_abs = gamma_empirical(series, baseline_eta_det=1.0, eta_sample_ref=1.0)
        assert report_abs.baseline_kind == BASELINE_IDEAL
        assert 1.31 <= report_abs.gamma <= 1.85
        assert report_abs.gamma == pytest.approx(0.9 * report.gamma)

    def test_zero_variance_degenerate(self):
        series = EstimateSeries(np.full(10, 0.5), n_input_photons_mean=1e4)
        with pytest.raises(DegenerateSeriesError):
            gamma_empirical(series, 0.9)

    def test_baseline_ordering(self, paper_chain):
        # for a fixed experimental series: ideal-detector <= same-detector
        # <= differential, matching the reported ordering
        cal = klyshko_calibration_ratio(paper_chain, RngStream(70, (0,)), 800)
        series = klyshko_series(paper_chain, 1.0, RngStream(70, (1,)), 2000, cal)
        g_same = gamma_empirical(series, 0.9, eta_sample_ref=1.0).gamma
        g_abs = gamma_empirical(series, 1.0, eta_sample_ref=1.0).gamma
        mean = paper_chain.mean_exposure / 0.5
        dcal = differential_calibration_ratio(mean, 0.5, 0.9, RngStream(70, (2,)), 1000)
        baseline = differential_series(mean, 0.5, 1.0, 0.9,
                                       RngStream(70, (3,)), 10_000, dcal)
        g_dif = gamma_vs_series(series, baseline).gamma
        assert g_abs <= g_same <= g_dif
        assert gamma_vs_series(series, baseline).baseline_kind == BASELINE_DIFFERENTIAL


class TestGammaConsistency:
    @pytest.mark.parametrize("eta_sample", [0.2, 0.4, 0.6, 0.8, 1.0])
    def test_clean_chain_matches_analytic(self, clean_chain, eta_sample):
        # with no leakage, no dark counts and unit post-sample optics the
        # camera-count estimator is exactly the analytic coincidence scheme
        klyshko = effective_klyshko(clean_chain)
        analytic = gamma_analytic(eta_sample, klyshko.eta_probe, klyshko.eta_ref)
        cal = klyshko_calibration_ratio(clean_chain, RngStream(71, (0,)), 1000)
        series = klyshko_series(clean_chain, eta_sample,
                                RngStream(71, (int(eta_sample * 10),)), 2500, cal)
        report = gamma_empirical(series, baseline_eta_det=clean_chain.eta_det,
                                 eta_sample_ref=eta_sample)
        assert_within_sigma(report.gamma, analytic, report.gamma_stderr,
                            label=f"gamma consistency at eta={eta_sample}")


class TestEstimateSeries:
    def test_variance_needs_two(self):
        with pytest.raises(DegenerateSeriesError):
            _ = EstimateSeries(np.array([1.0])).variance

    def test_unbiased_denominator(self):
        s = EstimateSeries(np.array([1.0, 2.0, 3.0]))
        assert s.variance == pytest.approx(1.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ParameterError):
            EstimateSeries(np.array([1.0, float("nan")]))
