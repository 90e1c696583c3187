"""Desk-scale simulator for a gated twin-beam sub-shot-noise transmittance
microscope: heralded photon-pair probing with feed-forward gating, camera
detection, Klyshko-ratio transmittance estimation, precision-ratio analysis
against classical baselines, and raster-scan image formation."""

from .errors import (
    ConfigError,
    DegenerateChainError,
    DegenerateSeriesError,
    EstimationError,
    ParameterError,
    SingularGammaError,
    UndefinedEstimateError,
)
from .estimation import (
    BASELINE_DIFFERENTIAL,
    BASELINE_IDEAL,
    BASELINE_SAME,
    EstimateSeries,
    PrecisionReport,
    coherent_variance,
    estimate_transmittance_differential,
    estimate_transmittance_direct,
    estimate_transmittance_klyshko,
    gamma_analytic,
    gamma_empirical,
    gamma_vs_series,
    input_photons,
    klyshko_efficiency,
    ssn_threshold,
)
from .imaging import (
    ImageStack,
    PixelwisePrecision,
    ProbeSpot,
    ScanConfig,
    TransmittanceMap,
    effective_transmittance,
    pixelwise_precision,
    raster_scan,
    resolution_metric,
)
from .photonstats import (
    Efficiency,
    RngStream,
    sample_bernoulli,
    sample_poisson,
    thin_binomial,
)
from .presets import gamma_reference, reference_chain
from .targets import (
    make_glyph_phantom,
    make_letter_patch,
    make_resolution_target,
    resolution_target_layout,
)
from .twinbeam import (
    CountsWindow,
    EffectiveKlyshko,
    OpticalChain,
    aggregate_windows,
    effective_klyshko,
    simulate_differential_classical,
    simulate_direct_classical,
    simulate_window,
    simulate_windows,
)

__version__ = "0.1.0"
