"""Transmittance estimators and precision-ratio metrics.

The quantum scheme estimates sample transmittance as a ratio of dark-corrected
camera-counts-per-herald with and without the sample; gating makes camera
counts stand in for coincidences (exact up to gate leakage).  Classical
baselines are a direct shot-noise-limited measurement and a monitored
differential measurement.  The precision ratio compares a scheme's per-window
estimator variance against the shot-noise-limited variance at the same photon
exposure of the sample; values above 1 mean sub-shot-noise performance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateSeriesError,
    ParameterError,
    SingularGammaError,
    UndefinedEstimateError,
)
from .photonstats import Efficiency
from .twinbeam import CountsWindow

__all__ = [
    "BASELINE_SAME",
    "BASELINE_IDEAL",
    "BASELINE_DIFFERENTIAL",
    "EstimateWarning",
    "EstimateSeries",
    "PrecisionReport",
    "klyshko_efficiency",
    "estimate_transmittance_klyshko",
    "estimate_transmittance_direct",
    "estimate_transmittance_differential",
    "input_photons",
    "coherent_variance",
    "gamma_analytic",
    "ssn_threshold",
    "gamma_empirical",
    "gamma_vs_series",
]

BASELINE_SAME = "same-detector-efficiency"
BASELINE_IDEAL = "ideal-100%-detector"
BASELINE_DIFFERENTIAL = "differential"


class EstimateWarning(UserWarning):
    """Non-fatal estimator anomaly (ratio above 1, clamped negative counts)."""


@dataclass
class EstimateSeries:
    """Repeated transmittance estimates plus the exposure they were taken at.

    ``n_input_photons_mean`` is the mean number of photons reaching the sample
    per window; it normalises precision comparisons.  Sample statistics use
    the unbiased (n-1) variance and require at least two entries.
    """

    estimates: np.ndarray
    n_input_photons_mean: Optional[float] = None
    dropped_windows: int = 0

    def __post_init__(self):
        self.estimates = np.asarray(self.estimates, dtype=float)
        if self.estimates.ndim != 1:
            raise ParameterError("estimates must be a 1-D sequence")
        if not np.all(np.isfinite(self.estimates)):
            raise ParameterError("estimates must be finite")

    def __len__(self) -> int:
        return self.estimates.size

    @property
    def mean(self) -> float:
        if self.estimates.size == 0:
            raise DegenerateSeriesError("empty estimate series")
        return float(self.estimates.mean())

    @property
    def variance(self) -> float:
        if self.estimates.size < 2:
            raise DegenerateSeriesError("variance needs at least two estimates")
        return float(self.estimates.var(ddof=1))

    @property
    def std_error(self) -> float:
        """Standard error of the series mean."""
        return math.sqrt(self.variance / self.estimates.size)


@dataclass
class PrecisionReport:
    """Empirical precision ratio against a named classical baseline."""

    gamma: float
    gamma_stderr: float
    baseline_kind: str
    eta_sample_est: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma!r}")
        if self.baseline_kind not in (BASELINE_SAME, BASELINE_IDEAL,
                                      BASELINE_DIFFERENTIAL):
            raise ParameterError(f"unknown baseline kind {self.baseline_kind!r}")


def klyshko_efficiency(n_coinc: int, n_singles: int) -> float:
    """Ratio of coincidence counts to singles counts (heralding efficiency).

    May exceed 1 when dark counts inflate the coincidence tally; that is
    reported with a warning rather than clamped, since a silent clamp would
    hide the miscalibration.
    """
    if n_singles <= 0:
        raise UndefinedEstimateError("klyshko ratio undefined for zero singles")
    if n_coinc < 0:
        raise ParameterError("coincidence count must be >= 0")
    ratio = n_coinc / n_singles
    if ratio > 1.0:
        warnings.warn(f"klyshko ratio {ratio:.4f} exceeds 1; dark counts "
                      "are probably inflating the coincidences", EstimateWarning)
    return ratio


def estimate_transmittance_klyshko(with_sample: CountsWindow,
                                   no_sample: CountsWindow,
                                   expected_dark_with: float = 0.0,
                                   expected_dark_no: float = 0.0) -> float:
    """Transmittance from gated camera counts, with and without the sample.

    Both arguments are window aggregates (sum the windows of each series).
    Dark correction subtracts the configured expected dark total of each
    aggregate, not the realised per-window dark, which is unobservable in a
    real measurement.  Negative dark-corrected counts clamp to zero with a
    warning.
    """
    ratio_with = _dark_corrected_ratio(with_sample, expected_dark_with)
    ratio_no = _dark_corrected_ratio(no_sample, expected_dark_no)
    if ratio_no <= 0.0:
        raise UndefinedEstimateError(
            "no-sample reference ratio is zero; cannot normalise")
    return ratio_with / ratio_no


def _dark_corrected_ratio(agg: CountsWindow, expected_dark: float) -> float:
    if agg.n_herald <= 0:
        raise UndefinedEstimateError("aggregate has no heralds")
    corrected = agg.n_detected - expected_dark
    if corrected < 0:
        warnings.warn("dark-corrected counts were negative and clamped to 0",
                      EstimateWarning)
        corrected = 0.0
    return corrected / agg.n_herald


def estimate_transmittance_direct(detected: Sequence[int], mean_input: float,
                                  eta_det: float) -> EstimateSeries:
    """Per-window estimates for the direct classical scheme: counts over
    the known mean illumination times detector efficiency."""
    eta_det = Efficiency(eta_det)
    if mean_input <= 0 or eta_det <= 0:
        raise ParameterError("normalisation mean_input * eta_det must be positive")
    counts = np.asarray(detected, dtype=float)
    return EstimateSeries(counts / (mean_input * eta_det),
                          n_input_photons_mean=float(mean_input))


def estimate_transmittance_differential(signal: Sequence[int],
                                        monitor: Sequence[int],
                                        calibration_ratio: float,
                                        mean_input_photons: Optional[float] = None,
                                        ) -> EstimateSeries:
    """Per-window estimates for the differential scheme.

    ``calibration_ratio`` is the no-sample signal/monitor ratio.  Windows with
    a zero monitor count cannot be normalised; they are dropped and tallied in
    ``dropped_windows`` instead of aborting the series.
    """
    if calibration_ratio <= 0:
        raise ParameterError("calibration_ratio must be positive")
    sig = np.asarray(signal, dtype=float)
    mon = np.asarray(monitor, dtype=float)
    if sig.shape != mon.shape:
        raise ParameterError("signal and monitor series must have equal length")
    good = mon > 0
    estimates = (sig[good] / mon[good]) / calibration_ratio
    return EstimateSeries(estimates,
                          n_input_photons_mean=mean_input_photons,
                          dropped_windows=int(np.count_nonzero(~good)))


def input_photons(n_det_mean: float, n_dc_mean: float,
                  post_sample_efficiency: float, eta_sample: float) -> float:
    """Infer the mean photon number at the sample from mean camera counts.

    ``post_sample_efficiency`` is everything between the sample and a recorded
    count (collection optics times camera quantum efficiency), so the result
    is the actual exposure of the sample per window.
    """
    post = Efficiency(post_sample_efficiency)
    denom = post * eta_sample
    if denom <= 0:
        raise ParameterError("post_sample_efficiency * eta_sample must be positive")
    numer = n_det_mean - n_dc_mean
    if numer < 0:
        raise ParameterError(
            "dark-corrected mean counts are negative; dark calibration is off")
    return numer / denom


def coherent_variance(eta_sample: float, eta_det: float, n_input: float) -> float:
    """Shot-noise-limited variance of the direct estimator per window:
    eta_sample / (eta_det * n_input)."""
    eta_det = Efficiency(eta_det)
    if n_input <= 0 or eta_det <= 0:
        raise ParameterError("n_input and eta_det must be positive")
    if eta_sample < 0:
        raise ParameterError("eta_sample must be >= 0")
    return eta_sample / (eta_det * n_input)


def gamma_analytic(eta_sample: float, eta_probe: float, eta_ref: float) -> float:
    """Precision ratio of the ideal gated scheme over the shot-noise limit:
    eta_ref / (1 - eta_sample * eta_probe)."""
    eta_probe = Efficiency(eta_probe)
    eta_ref = Efficiency(eta_ref)
    if not math.isfinite(eta_sample) or eta_sample < 0:
        raise ParameterError("eta_sample must be finite and >= 0")
    loss_term = 1.0 - eta_sample * eta_probe
    if loss_term <= 0.0:
        raise SingularGammaError(
            f"precision ratio diverges at eta_sample*eta_probe = "
            f"{eta_sample * eta_probe:.6g} >= 1")
    return eta_ref / loss_term


def ssn_threshold(eta_probe: float, eta_ref: float) -> bool:
    """Whether the Klyshko pair permits sub-shot-noise operation at unit
    transmittance (strict: the boundary itself is excluded)."""
    return Efficiency(eta_probe) + Efficiency(eta_ref) > 1.0


def gamma_empirical(experimental: EstimateSeries, baseline_eta_det: float,
                    eta_sample_ref: Optional[float] = None,
                    baseline_kind: Optional[str] = None) -> PrecisionReport:
    """Empirical precision ratio of a measured series over the coherent
    baseline at the same exposure.

    gamma = coherent_variance(eta_ref, baseline_eta_det, <N_in>) / sample
    variance of the series.  The uncertainty follows from the chi-squared
    distribution of a sample variance with n-1 degrees of freedom:
    se(gamma)/gamma = sqrt(2/(n-1)).
    """
    baseline_eta_det = Efficiency(baseline_eta_det)
    if len(experimental) < 2:
        raise DegenerateSeriesError("need at least two estimates for a variance")
    if experimental.n_input_photons_mean is None or \
            experimental.n_input_photons_mean <= 0:
        raise ParameterError("series carries no positive mean input photon number")
    var_exp = experimental.variance
    if var_exp == 0.0:
        raise DegenerateSeriesError("experimental variance is zero (infinite gamma)")
    eta_ref_point = experimental.mean if eta_sample_ref is None else eta_sample_ref
    if eta_ref_point <= 0.0:
        raise UndefinedEstimateError(
            "estimated transmittance is not positive; the coherent reference "
            "variance vanishes and the precision ratio is undefined")
    var_coh = coherent_variance(eta_ref_point, baseline_eta_det,
                                experimental.n_input_photons_mean)
    gamma = var_coh / var_exp
    stderr = gamma * math.sqrt(2.0 / (len(experimental) - 1))
    if baseline_kind is None:
        baseline_kind = BASELINE_IDEAL if baseline_eta_det == 1.0 else BASELINE_SAME
    return PrecisionReport(gamma=gamma, gamma_stderr=stderr,
                           baseline_kind=baseline_kind,
                           eta_sample_est=experimental.mean)


def gamma_vs_series(experimental: EstimateSeries, baseline: EstimateSeries,
                    baseline_kind: str = BASELINE_DIFFERENTIAL) -> PrecisionReport:
    """Precision ratio against another simulated series (e.g. the differential
    baseline, whose variance has no closed form here and is always obtained by
    Monte Carlo).  Both variances are normalised per input photon."""
    for series, label in ((experimental, "experimental"), (baseline, "baseline")):
        if len(series) < 2:
            raise DegenerateSeriesError(f"{label} series too short")
        if series.n_input_photons_mean is None or series.n_input_photons_mean <= 0:
            raise ParameterError(f"{label} series has no positive input photon mean")
    var_exp = experimental.variance
    if var_exp == 0.0:
        raise DegenerateSeriesError("experimental variance is zero (infinite gamma)")
    per_photon_exp = var_exp * experimental.n_input_photons_mean
    per_photon_base = baseline.variance * baseline.n_input_photons_mean
    gamma = per_photon_base / per_photon_exp
    rel = math.sqrt(2.0 / (len(experimental) - 1) + 2.0 / (len(baseline) - 1))
    return PrecisionReport(gamma=gamma, gamma_stderr=gamma * rel,
                           baseline_kind=baseline_kind,
                           eta_sample_est=experimental.mean)
