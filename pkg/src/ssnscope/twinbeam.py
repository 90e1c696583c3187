"""One-integration-window model of the gated twin-beam experiment.

A window is simulated as a chain of exact thinning steps: pair generation
(Poisson), herald detection, the feed-forward gate (open with loss for
heralded partners, closed with leakage for unheralded ones), pre-sample
optics, the sample itself, post-sample optics and the camera, plus Poisson
dark counts.  Per-pair multi-photon pile-up inside a single gate is ignored:
at the operating rates the mean occupancy per gate is far below one, so each
pair is treated independently and the thinning composition is exact.

Classical baselines (a direct shot-noise-limited measurement and a 50/50
differential measurement) are provided for precision-ratio comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Tuple

from .errors import DegenerateChainError, ParameterError
from .photonstats import Efficiency, RngLike, RngStream, _as_generator

__all__ = [
    "OpticalChain",
    "CountsWindow",
    "EffectiveKlyshko",
    "simulate_window",
    "simulate_windows",
    "aggregate_windows",
    "effective_klyshko",
    "simulate_direct_classical",
    "simulate_differential_classical",
]


@dataclass(frozen=True)
class OpticalChain:
    """Efficiencies and rates of the source -> gate -> sample -> camera path.

    Parameters
    ----------
    pair_rate : mean photon pairs generated per integration window.
    eta_herald : herald-arm collection + SPAD efficiency.
    eta_switch : gate transmission for a heralded partner (open gate).
    p_leak : probability an unheralded photon passes the closed gate.
    eta_pre_sample : probe-arm optics between gate and sample.
    eta_opt : optics between sample and camera.
    eta_det : camera quantum efficiency.
    dark_mean : mean camera dark counts per window.
    """

    pair_rate: float
    eta_herald: float
    eta_switch: float
    p_leak: float
    eta_pre_sample: float = 1.0
    eta_opt: float = 1.0
    eta_det: float = 1.0
    dark_mean: float = 0.0

    def __post_init__(self):
        for name in ("eta_herald", "eta_switch", "p_leak", "eta_pre_sample",
                     "eta_opt", "eta_det"):
            object.__setattr__(self, name, Efficiency(getattr(self, name)))
        for name in ("pair_rate", "dark_mean"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def mean_heralds(self) -> float:
        return self.pair_rate * self.eta_herald

    @property
    def mean_exposure(self) -> float:
        """Expected photons reaching the sample per window (independent of the sample)."""
        h, s, leak = self.eta_herald, self.eta_switch, self.p_leak
        return self.pair_rate * self.eta_pre_sample * (h * s + (1.0 - h) * leak)

    def scaled(self, pair_rate_factor: float) -> "OpticalChain":
        """Copy with the pair rate multiplied, e.g. for source-brightness drift."""
        return replace(self, pair_rate=self.pair_rate * pair_rate_factor)


@dataclass(frozen=True)
class CountsWindow:
    """Photon-count record for one integration window.

    ``n_exposed_heralded`` / ``n_detected_heralded`` split the exposed and
    camera counts into their heralded parts; they correspond to putting a
    time-resolving counter in the probe channel during characterisation and
    are what a coincidence measurement of the gate quality sees.
    """

    n_pairs: int
    n_herald: int
    n_exposed: int
    n_detected: int
    n_dark: int
    n_exposed_heralded: int = 0
    n_detected_heralded: int = 0

    def __post_init__(self):
        if self.n_herald > self.n_pairs or self.n_exposed_heralded > self.n_herald:
            raise ParameterError("heralded counts exceed their parent counts")
        if self.n_exposed > self.n_pairs:
            raise ParameterError("more photons exposed than pairs generated")
        if self.n_dark > self.n_detected:
            raise ParameterError("dark counts are a subset of detected counts")
        if min(self.n_pairs, self.n_herald, self.n_exposed, self.n_detected,
               self.n_dark, self.n_exposed_heralded, self.n_detected_heralded) < 0:
            raise ParameterError("counts must be non-negative")

    def __add__(self, other: "CountsWindow") -> "CountsWindow":
        return CountsWindow(
            self.n_pairs + other.n_pairs,
            self.n_herald + other.n_herald,
            self.n_exposed + other.n_exposed,
            self.n_detected + other.n_detected,
            self.n_dark + other.n_dark,
            self.n_exposed_heralded + other.n_exposed_heralded,
            self.n_detected_heralded + other.n_detected_heralded,
        )


ZERO_WINDOW = CountsWindow(0, 0, 0, 0, 0)


def aggregate_windows(windows: Iterable[CountsWindow]) -> CountsWindow:
    """Sum count records over a series of windows."""
    total = ZERO_WINDOW
    for w in windows:
        total = total + w
    return total


@dataclass(frozen=True)
class EffectiveKlyshko:
    """Analytic Klyshko pair implied by a chain.

    eta_probe: probability a heralded photon yields a camera count (the
    sample factor is excluded unless requested, so precision formulas can
    multiply by the sample transmittance explicitly without double counting).
    eta_ref: fraction of sample-exposing photons that carry a herald; exactly
    1 when the gate has no leakage.
    """

    eta_probe: Efficiency
    eta_ref: Efficiency


def effective_klyshko(chain: OpticalChain, eta_sample: float = 1.0,
                      include_sample: bool = False) -> EffectiveKlyshko:
    """Closed-form Klyshko efficiencies of the gated chain.

    ``eta_ref = h*s / (h*s + (1-h)*leak)`` (pre-sample optics cancel in the
    ratio); ``eta_probe = s * eta_pre_sample * eta_opt * eta_det``, times the
    sample transmittance only when ``include_sample`` is set.
    """
    eta_sample = Efficiency(eta_sample)
    h, s, leak = chain.eta_herald, chain.eta_switch, chain.p_leak
    weight = h * s + (1.0 - h) * leak
    if weight <= 0.0 or chain.eta_pre_sample == 0.0:
        raise DegenerateChainError("no photon can ever reach the sample")
    eta_ref = h * s / weight
    eta_probe = s * chain.eta_pre_sample * chain.eta_opt * chain.eta_det
    if include_sample:
        eta_probe *= eta_sample
    return EffectiveKlyshko(Efficiency(eta_probe), Efficiency(eta_ref))


def simulate_window(chain: OpticalChain, eta_sample: float,
                    stream: RngLike) -> CountsWindow:
    """Simulate one integration window through the gated chain.

    The draw order below is fixed and part of the reproducibility contract:
    pairs, heralds, heralded exposure, leaked exposure, heralded detection,
    leaked detection, dark counts.
    """
    eta_sample = Efficiency(eta_sample)
    rng = _as_generator(stream)

    n_pairs = int(rng.poisson(chain.pair_rate)) if chain.pair_rate > 0 else 0
    n_herald = _binom(rng, n_pairs, chain.eta_herald)
    exposed_her = _binom(rng, n_herald, chain.eta_switch * chain.eta_pre_sample)
    exposed_leak = _binom(rng, n_pairs - n_herald, chain.p_leak * chain.eta_pre_sample)
    p_detect = eta_sample * chain.eta_opt * chain.eta_det
    detected_her = _binom(rng, exposed_her, p_detect)
    detected_leak = _binom(rng, exposed_leak, p_detect)
    n_dark = int(rng.poisson(chain.dark_mean)) if chain.dark_mean > 0 else 0

    return CountsWindow(
        n_pairs=n_pairs,
        n_herald=n_herald,
        n_exposed=exposed_her + exposed_leak,
        n_detected=detected_her + detected_leak + n_dark,
        n_dark=n_dark,
        n_exposed_heralded=exposed_her,
        n_detected_heralded=detected_her,
    )


def simulate_windows(chain: OpticalChain, eta_sample: float, stream: RngStream,
                     n_windows: int) -> list:
    """Simulate ``n_windows`` windows on per-window substreams of ``stream``."""
    return [simulate_window(chain, eta_sample, stream.substream(w))
            for w in range(n_windows)]


def _binom(rng, n: int, p: float) -> int:
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return int(n)
    return int(rng.binomial(int(n), float(p)))


def simulate_direct_classical(mean_photons_at_sample: float, eta_sample: float,
                              eta_det: float, stream: RngLike) -> int:
    """Shot-noise-limited baseline: Poisson light straight through the sample."""
    if not math.isfinite(mean_photons_at_sample) or mean_photons_at_sample < 0:
        raise ParameterError("mean photon number must be finite and >= 0")
    eta_sample = Efficiency(eta_sample)
    eta_det = Efficiency(eta_det)
    mean = mean_photons_at_sample * eta_sample * eta_det
    if mean == 0:
        return 0
    return int(_as_generator(stream).poisson(mean))


def simulate_differential_classical(mean_photons: float, split: float,
                                    eta_sample: float, eta_det: float,
                                    stream: RngLike) -> Tuple[int, int]:
    """Differential baseline: a beamsplitter sends fraction ``split`` through
    the sample and the remainder to a monitor detector.

    Returns ``(signal, monitor)`` detected counts.  Binomial thinnings of one
    Poisson draw, so the two counts are independent Poisson variates.
    """
    if not math.isfinite(mean_photons) or mean_photons < 0:
        raise ParameterError("mean photon number must be finite and >= 0")
    split = Efficiency(split)
    eta_sample = Efficiency(eta_sample)
    eta_det = Efficiency(eta_det)
    rng = _as_generator(stream)
    n_source = int(rng.poisson(mean_photons)) if mean_photons > 0 else 0
    to_sample = _binom(rng, n_source, split)
    signal = _binom(rng, to_sample, eta_sample * eta_det)
    monitor = _binom(rng, n_source - to_sample, eta_det)
    return signal, monitor
