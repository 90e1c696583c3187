"""Raster-scan image formation and pixel-wise precision analysis.

A scan steps a Gaussian probe spot across a ground-truth transmittance map;
each pixel sees the kernel-weighted local transmittance and is acquired
through the gated twin-beam pipeline or one of the classical baselines.
Streams are keyed by ``(scenario, pixel, repetition, window)``, so pixel
results are independent of acquisition order and the scan is bit-reproducible
under any parallel schedule.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError, UndefinedEstimateError
from .estimation import coherent_variance
from .photonstats import RngStream
from .pipelines import (
    differential_calibration_ratio,
    klyshko_calibration_ratio,
)
from .twinbeam import (
    OpticalChain,
    simulate_differential_classical,
    simulate_direct_classical,
    simulate_window,
)

__all__ = [
    "TransmittanceMap",
    "ProbeSpot",
    "ScanConfig",
    "ImageStack",
    "PixelwisePrecision",
    "TransmittanceHistogram",
    "ESTIMATOR_KINDS",
    "CALIBRATION_PIXEL",
    "effective_transmittance",
    "raster_scan",
    "resolution_metric",
    "pixelwise_precision",
]

ESTIMATOR_KINDS = ("klyshko", "direct", "differential")

# reserved pixel index for the automatic no-sample calibration run; real
# pixel indices are bounded by width*height of the scan
CALIBRATION_PIXEL = 2**32 - 1


@dataclass(frozen=True)
class TransmittanceMap:
    """Ground-truth transmittance on a square grid.

    ``grid[row, col]`` covers the physical cell
    ``[col*pitch, (col+1)*pitch) x [row*pitch, (row+1)*pitch)`` micrometres.
    """

    grid: np.ndarray
    pitch_um: float

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 2 or grid.size == 0:
            raise ParameterError("grid must be a non-empty 2-D array")
        if not np.all((grid >= 0.0) & (grid <= 1.0)):
            raise ParameterError("transmittance values must lie in [0, 1]")
        if not self.pitch_um > 0:
            raise ParameterError("pitch_um must be positive")
        object.__setattr__(self, "grid", grid)

    @property
    def height_um(self) -> float:
        return self.grid.shape[0] * self.pitch_um

    @property
    def width_um(self) -> float:
        return self.grid.shape[1] * self.pitch_um

    def contains(self, x_um: float, y_um: float) -> bool:
        return 0.0 <= x_um <= self.width_um and 0.0 <= y_um <= self.height_um


@dataclass(frozen=True)
class ProbeSpot:
    """Gaussian intensity profile of the focused probe.

    The kernel is truncated at ``truncation_radius`` standard deviations and
    renormalised to unit weight over its support (clipped and renormalised
    again at map edges, which avoids biased dark borders).
    """

    sigma_um: float
    truncation_radius: float = 4.0

    def __post_init__(self):
        if not self.sigma_um > 0:
            raise ParameterError("sigma_um must be positive")
        if not self.truncation_radius >= 1.0:
            raise ParameterError("truncation_radius below 1 sigma is meaningless")

    @classmethod
    def from_fwhm(cls, fwhm_um: float, truncation_radius: float = 4.0) -> "ProbeSpot":
        return cls(fwhm_um / (2.0 * math.sqrt(2.0 * math.log(2.0))),
                   truncation_radius)

    @property
    def fwhm_um(self) -> float:
        return self.sigma_um * 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class ScanConfig:
    """Raster geometry: pixel (r, c) is acquired at
    ``origin + ((c + 0.5) * step, (r + 0.5) * step)`` micrometres."""

    step_um: float
    width_px: int
    height_px: int
    windows_per_pixel: int = 1
    repetitions: int = 1
    origin_um: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if min(self.step_um, self.width_px, self.height_px,
               self.windows_per_pixel, self.repetitions) <= 0:
            raise ParameterError("all scan parameters must be positive")

    @property
    def total_windows(self) -> int:
        return (self.width_px * self.height_px
                * self.windows_per_pixel * self.repetitions)

    def pixel_center(self, row: int, col: int) -> Tuple[float, float]:
        return (self.origin_um[0] + (col + 0.5) * self.step_um,
                self.origin_um[1] + (row + 0.5) * self.step_um)


@dataclass
class ImageStack:
    """Repeated-scan estimates plus per-acquisition photon bookkeeping.

    ``per_pixel_input_photons`` is the realised mean photon number at the
    sample per window for each acquisition (the simulator observes exposure
    directly; a bench estimates it from counts).  ``photons_exposed`` is the
    realised total over the acquisition's windows, with no post-selection.
    """

    images: np.ndarray                    # (repetitions, height, width)
    per_pixel_input_photons: np.ndarray   # same shape
    photons_exposed: np.ndarray           # same shape
    eta_effective: np.ndarray             # (height, width) ground truth
    failed: np.ndarray                    # same shape as images, bool
    estimator_kind: str = "klyshko"

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        if self.images.ndim != 3:
            raise ParameterError("images must have shape (reps, height, width)")
        if not np.all(np.isfinite(self.images)):
            raise ParameterError("estimates must be finite")
        for name in ("per_pixel_input_photons", "photons_exposed"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.images.shape:
                raise ParameterError(f"{name} shape must match images")
            setattr(self, name, arr)

    @property
    def repetitions(self) -> int:
        return self.images.shape[0]

    def mean_image(self) -> np.ndarray:
        return self.images.mean(axis=0)


def effective_transmittance(tmap: TransmittanceMap, spot: ProbeSpot,
                            position: Tuple[float, float]) -> float:
    """Kernel-weighted transmittance under the spot centred at ``position``.

    The Gaussian is sampled at cell centres over its truncated support,
    clipped at the map edge and renormalised.
    """
    x, y = position
    if not tmap.contains(x, y):
        raise ParameterError(f"position {position} outside map "
                             f"({tmap.width_um} x {tmap.height_um} um)")
    rows, wy = _axis_weights(y, spot, tmap.pitch_um, tmap.grid.shape[0])
    cols, wx = _axis_weights(x, spot, tmap.pitch_um, tmap.grid.shape[1])
    block = tmap.grid[rows[0]:rows[1], cols[0]:cols[1]]
    weights = np.outer(wy, wx)
    return float((block * weights).sum() / weights.sum())


def _axis_weights(center: float, spot: ProbeSpot, pitch: float, n_cells: int):
    radius = spot.truncation_radius * spot.sigma_um
    lo = max(0, math.ceil((center - radius) / pitch - 0.5))
    hi = min(n_cells - 1, math.floor((center + radius) / pitch - 0.5))
    if hi < lo:  # spot narrower than one cell: take the nearest cell
        nearest = min(n_cells - 1, max(0, int(center / pitch)))
        lo = hi = nearest
    centers = (np.arange(lo, hi + 1) + 0.5) * pitch
    w = np.exp(-0.5 * ((centers - center) / spot.sigma_um) ** 2)
    return (lo, hi + 1), w


def raster_scan(tmap: TransmittanceMap, spot: ProbeSpot, config: ScanConfig,
                chain: OpticalChain, estimator_kind: str, master_seed: int,
                scenario_id: int = 0, split: float = 0.5,
                calibration_windows: int = 1000, workers: Optional[int] = None,
                drift_span: float = 0.0) -> ImageStack:
    """Acquire a repeated raster scan of ``tmap`` through the chosen pipeline.

    A no-sample calibration run (on the reserved calibration pixel stream) is
    included automatically for the klyshko and differential estimators.
    ``drift_span`` optionally ramps the pair rate linearly across repetitions
    from ``1 - span/2`` to ``1 + span/2`` of nominal, reproducing slow source
    drift; the calibration is taken at the nominal rate.  Per-pixel estimator
    failures are flagged in ``failed`` (estimate 0) instead of aborting.
    """
    if estimator_kind not in ESTIMATOR_KINDS:
        raise ParameterError(f"estimator_kind must be one of {ESTIMATOR_KINDS}")
    _check_scan_fits(tmap, config)
    base = RngStream(master_seed, (scenario_id,))

    eta_eff = np.empty((config.height_px, config.width_px))
    for r in range(config.height_px):
        for c in range(config.width_px):
            eta_eff[r, c] = effective_transmittance(
                tmap, spot, config.pixel_center(r, c))

    mean_at_sample = chain.mean_exposure
    if estimator_kind == "klyshko":
        cal_ratio = klyshko_calibration_ratio(
            chain, base.substream(CALIBRATION_PIXEL, 0), calibration_windows)
    elif estimator_kind == "differential":
        cal_ratio = differential_calibration_ratio(
            mean_at_sample / split, split, chain.eta_det,
            base.substream(CALIBRATION_PIXEL, 0), calibration_windows)
    else:
        cal_ratio = None

    shape = (config.repetitions, config.height_px, config.width_px)
    images = np.zeros(shape)
    input_photons = np.zeros(shape)
    exposed = np.zeros(shape)
    failed = np.zeros(shape, dtype=bool)

    def acquire(task):
        rep, row, col = task
        factor = _drift_factor(drift_span, rep, config.repetitions)
        rep_chain = chain.scaled(factor) if factor != 1.0 else chain
        pixel = row * config.width_px + col
        stream = base.substream(pixel, rep)
        eta = eta_eff[row, col]
        try:
            return task + _acquire_pixel(rep_chain, eta, estimator_kind, stream,
                                         config.windows_per_pixel, cal_ratio,
                                         mean_at_sample * factor,
                                         mean_at_sample, split)
        except UndefinedEstimateError:
            return task + (0.0, mean_at_sample * factor, 0.0, True)

    tasks = [(rep, r, c)
             for rep in range(config.repetitions)
             for r in range(config.height_px)
             for c in range(config.width_px)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(acquire, tasks))
    else:
        results = [acquire(t) for t in tasks]

    for rep, row, col, est, n_in, n_exp, fail in results:
        images[rep, row, col] = est
        input_photons[rep, row, col] = n_in
        exposed[rep, row, col] = n_exp
        failed[rep, row, col] = fail

    return ImageStack(images, input_photons, exposed, eta_eff, failed,
                      estimator_kind=estimator_kind)


def _acquire_pixel(chain, eta, kind, stream, n_windows, cal_ratio,
                   mean_actual, mean_nominal, split):
    """One (repetition, pixel) acquisition; returns
    (estimate, input_photons_per_window, exposed_total, failed).

    ``mean_actual`` is the (possibly drifted) illumination; normalisation
    always uses the calibration-time ``mean_nominal``, so source drift shows
    up in the direct estimates while the ratio estimators cancel it.
    """
    if kind == "klyshko":
        detected = heralds = n_exposed = 0
        for w in range(n_windows):
            win = simulate_window(chain, eta, stream.substream(w))
            detected += win.n_detected
            heralds += win.n_herald
            n_exposed += win.n_exposed
        if heralds == 0:
            raise UndefinedEstimateError("no heralds at this pixel")
        est = ((detected - chain.dark_mean * n_windows) / heralds) / cal_ratio
        return est, n_exposed / n_windows, float(n_exposed), False
    if kind == "direct":
        counts = sum(
            simulate_direct_classical(mean_actual, eta, chain.eta_det,
                                      stream.substream(w))
            for w in range(n_windows))
        est = counts / (n_windows * mean_nominal * chain.eta_det)
        return est, mean_actual, mean_actual * n_windows, False
    # differential
    sig = mon = 0
    for w in range(n_windows):
        s, m = simulate_differential_classical(
            mean_actual / split, split, eta, chain.eta_det,
            stream.substream(w))
        sig += s
        mon += m
    if mon == 0:
        raise UndefinedEstimateError("no monitor counts at this pixel")
    est = (sig / mon) / cal_ratio
    return est, mean_actual, mean_actual * n_windows, False


def _drift_factor(span: float, rep: int, repetitions: int) -> float:
    if span == 0.0 or repetitions == 1:
        return 1.0
    return 1.0 + span * (rep / (repetitions - 1) - 0.5)


def _check_scan_fits(tmap: TransmittanceMap, config: ScanConfig) -> None:
    for row, col in ((0, 0), (config.height_px - 1, config.width_px - 1)):
        x, y = config.pixel_center(row, col)
        if not tmap.contains(x, y):
            raise ParameterError(
                f"scan pixel ({row}, {col}) at ({x:.2f}, {y:.2f}) um falls "
                f"outside the {tmap.width_um:.2f} x {tmap.height_um:.2f} um map")


def resolution_metric(stack: ImageStack, groups: Sequence, step_um: float,
                      gap_fraction: float = 0.5,
                      line_fraction: float = 1.0 / 3.0) -> Optional[float]:
    """Smallest resolved line-pair width under the dip criterion.

    A group is resolved when the mean estimate over the central
    ``gap_fraction`` of the inter-line gap exceeds the mean over the central
    ``line_fraction`` of each line by at least three pooled standard errors.
    Returns ``None`` when no group is resolved.
    """
    resolved = [g.width_um for g in groups
                if group_dip_significance(stack, g, step_um, gap_fraction,
                                          line_fraction)[2] >= 3.0]
    return min(resolved) if resolved else None


def group_dip_significance(stack: ImageStack, group, step_um: float,
                           gap_fraction: float = 0.5,
                           line_fraction: float = 1.0 / 3.0):
    """(dip, pooled standard error, significance) for one line-pair group.

    Regions default to the central part of the gap and of each line; if the
    scan step leaves no pixel centre inside a central region it falls back to
    the full region, and a group with no usable pixels at all is simply not
    resolvable (significance -inf).
    """
    width_px = stack.images.shape[2]
    gap_cols = _region_columns(group.gap_range, gap_fraction, step_um, width_px)
    line_cols = np.concatenate([
        _region_columns(group.line1_range, line_fraction, step_um, width_px),
        _region_columns(group.line2_range, line_fraction, step_um, width_px)])
    if gap_cols.size == 0 or line_cols.size == 0:
        return math.nan, math.nan, -math.inf
    gap_samples = stack.images[:, :, gap_cols].ravel()
    line_samples = stack.images[:, :, line_cols].ravel()
    dip = float(gap_samples.mean() - line_samples.mean())
    if gap_samples.size < 2 or line_samples.size < 2:
        return dip, math.nan, -math.inf
    se = math.sqrt(gap_samples.var(ddof=1) / gap_samples.size
                   + line_samples.var(ddof=1) / line_samples.size)
    if se == 0.0:
        return dip, se, math.copysign(math.inf, dip)
    return dip, se, dip / se


def _region_columns(span: Tuple[float, float], fraction: float, step_um: float,
                    width_px: int) -> np.ndarray:
    cols = _columns_in(_central(span, fraction), step_um, width_px)
    if cols.size == 0:
        cols = _columns_in(span, step_um, width_px)
    return cols


def _central(span: Tuple[float, float], fraction: float) -> Tuple[float, float]:
    lo, hi = span
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * fraction
    return mid - half, mid + half


def _columns_in(span: Tuple[float, float], step_um: float,
                width_px: int) -> np.ndarray:
    centers = (np.arange(width_px) + 0.5) * step_um
    return np.nonzero((centers >= span[0]) & (centers <= span[1]))[0]


@dataclass
class TransmittanceHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    expected_gamma: Optional[np.ndarray] = None

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


@dataclass
class PixelwisePrecision:
    """Per-pixel precision ratios from a repeated scan."""

    gamma_map: np.ndarray
    mean_gamma: float
    mean_gamma_stderr: float
    mean_transmittance: float
    histogram: TransmittanceHistogram


def pixelwise_precision(stack: ImageStack, baseline_eta_det: float,
                        klyshko=None, bin_width: float = 0.005,
                        expected_gamma: Optional[Callable[[float], float]] = None,
                        ) -> PixelwisePrecision:
    """Pixel-by-pixel variance analysis of a repeated scan.

    Each pixel's variance across repetitions is compared with the coherent
    baseline at that pixel's mean transmittance and mean exposure.  The
    transmittance histogram carries an expected-precision-ratio axis computed
    from the chain's effective Klyshko pair (``klyshko``) or from an explicit
    ``expected_gamma`` callable (e.g. the model's own calibration relation).
    """
    if stack.repetitions < 2:
        raise ParameterError("pixel-wise variance needs at least 2 repetitions")
    mean_eta = stack.images.mean(axis=0)
    var_eta = stack.images.var(axis=0, ddof=1)
    mean_n_in = stack.per_pixel_input_photons.mean(axis=0)
    if np.any(var_eta == 0):
        raise ParameterError("a pixel has zero variance across repetitions")
    coherent = np.vectorize(coherent_variance)(
        np.clip(mean_eta, 0.0, None), float(baseline_eta_det), mean_n_in)
    gamma_map = coherent / var_eta
    n_px = gamma_map.size
    mean_gamma = float(gamma_map.mean())
    stderr = float(gamma_map.std(ddof=1) / math.sqrt(n_px))

    lo = math.floor(mean_eta.min() / bin_width) * bin_width
    hi = math.ceil(mean_eta.max() / bin_width) * bin_width
    n_bins = max(1, round((hi - lo) / bin_width))
    edges = lo + bin_width * np.arange(n_bins + 1)
    counts, _ = np.histogram(mean_eta.ravel(), bins=edges)
    expected = None
    centers = 0.5 * (edges[:-1] + edges[1:])
    if expected_gamma is not None:
        expected = np.array([expected_gamma(c) for c in centers])
    elif klyshko is not None:
        from .estimation import gamma_analytic
        expected = np.array([
            gamma_analytic(c, klyshko.eta_probe, klyshko.eta_ref)
            for c in centers])
    histogram = TransmittanceHistogram(edges, counts, expected)
    return PixelwisePrecision(gamma_map=gamma_map, mean_gamma=mean_gamma,
                              mean_gamma_stderr=stderr,
                              mean_transmittance=float(mean_eta.mean()),
                              histogram=histogram)
