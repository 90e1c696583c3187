"""Window-series pipelines: many simulated windows -> one EstimateSeries.

These glue the window simulators to the estimators the way the bench
procedures do: a no-sample calibration run fixes the normalisation, then each
acquisition window yields one transmittance estimate.  Per-window estimates
are deliberately left unclamped (a dark-dominated window may estimate
slightly negative); clamping would bias the variance analysis that the
precision ratios are built on.

Each series records the realised mean photon exposure of the sample per
window, which the simulator can observe exactly; the count-based exposure
estimate of :func:`ssnscope.estimation.input_photons` is checked against it
in the test suite.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError, UndefinedEstimateError
from .estimation import EstimateSeries
from .photonstats import RngStream
from .twinbeam import (
    OpticalChain,
    simulate_differential_classical,
    simulate_direct_classical,
    simulate_windows,
)

__all__ = [
    "klyshko_calibration_ratio",
    "klyshko_series",
    "direct_series",
    "differential_calibration_ratio",
    "differential_series",
]


def klyshko_calibration_ratio(chain: OpticalChain, stream: RngStream,
                              n_windows: int = 1000,
                              use_coincidences: bool = False) -> float:
    """No-sample counts-per-herald ratio used to normalise estimates."""
    windows = simulate_windows(chain, 1.0, stream, n_windows)
    heralds = sum(w.n_herald for w in windows)
    if heralds == 0:
        raise UndefinedEstimateError("calibration run produced no heralds")
    if use_coincidences:
        counts = sum(w.n_detected_heralded for w in windows)
    else:
        counts = sum(w.n_detected for w in windows) - chain.dark_mean * n_windows
    ratio = counts / heralds
    if ratio <= 0:
        raise UndefinedEstimateError("calibration ratio is not positive")
    return ratio


def klyshko_series(chain: OpticalChain, eta_sample: float, stream: RngStream,
                   n_windows: int, calibration_ratio: float,
                   use_coincidences: bool = False) -> EstimateSeries:
    """Per-window gated transmittance estimates.

    ``use_coincidences`` switches from camera counts to the herald-resolved
    counts a characterisation-mode coincidence counter would record; this is
    the estimator the ideal-gating precision formulas describe exactly.
    """
    if calibration_ratio <= 0:
        raise ParameterError("calibration_ratio must be positive")
    windows = simulate_windows(chain, eta_sample, stream, n_windows)
    heralds = np.array([w.n_herald for w in windows], float)
    if np.any(heralds == 0):
        raise UndefinedEstimateError("a window recorded no heralds")
    if use_coincidences:
        counts = np.array([w.n_detected_heralded for w in windows], float)
        dark = 0.0
    else:
        counts = np.array([w.n_detected for w in windows], float)
        dark = chain.dark_mean
    estimates = ((counts - dark) / heralds) / calibration_ratio
    exposure = np.mean([w.n_exposed for w in windows])
    return EstimateSeries(estimates, n_input_photons_mean=float(exposure))


def direct_series(mean_photons_at_sample: float, eta_sample: float,
                  eta_det: float, stream: RngStream,
                  n_windows: int) -> EstimateSeries:
    """Per-window estimates for the direct shot-noise-limited scheme."""
    detected = [simulate_direct_classical(mean_photons_at_sample, eta_sample,
                                          eta_det, stream.substream(w))
                for w in range(n_windows)]
    estimates = np.asarray(detected, float) / (mean_photons_at_sample * eta_det)
    return EstimateSeries(estimates,
                          n_input_photons_mean=float(mean_photons_at_sample))


def differential_calibration_ratio(mean_photons: float, split: float,
                                   eta_det: float, stream: RngStream,
                                   n_windows: int = 1000) -> float:
    """No-sample signal/monitor ratio of the differential scheme."""
    sig = mon = 0
    for w in range(n_windows):
        s, m = simulate_differential_classical(mean_photons, split, 1.0,
                                               eta_det, stream.substream(w))
        sig += s
        mon += m
    if mon == 0:
        raise UndefinedEstimateError("differential calibration saw no monitor counts")
    return sig / mon


def differential_series(mean_photons: float, split: float, eta_sample: float,
                        eta_det: float, stream: RngStream, n_windows: int,
                        calibration_ratio: float) -> EstimateSeries:
    """Per-window estimates for the monitored differential scheme.

    Windows with a zero monitor count are dropped (and tallied), mirroring
    :func:`ssnscope.estimation.estimate_transmittance_differential`.
    """
    if calibration_ratio <= 0:
        raise ParameterError("calibration_ratio must be positive")
    sig = np.empty(n_windows)
    mon = np.empty(n_windows)
    for w in range(n_windows):
        sig[w], mon[w] = simulate_differential_classical(
            mean_photons, split, eta_sample, eta_det, stream.substream(w))
    good = mon > 0
    estimates = (sig[good] / mon[good]) / calibration_ratio
    return EstimateSeries(estimates,
                          n_input_photons_mean=float(mean_photons * split),
                          dropped_windows=int(np.count_nonzero(~good)))
