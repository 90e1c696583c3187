"""Calibrated default optical chain used by the CLI scenarios and tests.

The herald efficiency is solved so the gated reference-arm Klyshko
efficiency is exactly 0.90 given the 15% switch loss and 10% leakage
(``0.90 = h*0.85 / (h*0.85 + (1-h)*0.10)`` gives ``h = 18/35``), and the
pair rate delivers 40 000 heralds per one-second window.  The pre-sample
optical efficiency and the dark rate are free parameters of the model; the
values below were fitted so that the desk-scale calibration sweep reproduces
the bench behaviour this simulator models: a headline precision ratio of
about 1.76 near unit transmittance (when reported as the mean over
40-window series) and a sub-shot-noise crossover at a transmittance of 0.40.

For the camera-count estimator the per-window variance follows
``Var = eta^2 * (1/mu_D + dark/mu_D^2 + 1/mu_H - 2*s/(lambda*K))`` with
``mu_D`` the mean photon counts, ``mu_H`` the mean heralds, ``lambda`` the
pair rate and ``K = h*s + (1-h)*leak``, which gives the closed form

    1/gamma(eta) = 1 - A*eta + B/eta,
    A = eta_det * eta_pre * (s - (1-h)*leak/h),   B = dark / (eta_det * lambda * eta_pre * K)

used by :func:`gamma_reference` (post-sample optics at 1, baseline detector
matching the camera).  ``A`` and ``B`` below give gamma(1) = 1.6697 (i.e.
1.76 after the 39/37 small-sample inflation of 40-window series) and
sqrt(B/A) = 0.400 for the crossover.
"""

from __future__ import annotations

from .errors import ParameterError
from .twinbeam import OpticalChain

__all__ = [
    "HERALD_RATE_HZ",
    "DARK_RATE_HZ",
    "ETA_HERALD",
    "ETA_SWITCH",
    "P_LEAK",
    "ETA_PRE_SAMPLE",
    "ETA_OPT",
    "ETA_DET",
    "reference_chain",
    "gamma_reference",
]

ETA_HERALD = 18.0 / 35.0       # gated reference Klyshko comes out at 0.90 exactly
ETA_SWITCH = 0.85              # 15% switch loss
P_LEAK = 0.10                  # 10% leakage of unheralded photons
ETA_PRE_SAMPLE = 0.7022163     # fitted, see module docstring
ETA_OPT = 1.0                  # post-sample losses folded into ETA_PRE_SAMPLE
ETA_DET = 0.90                 # camera quantum efficiency
HERALD_RATE_HZ = 40000.0
DARK_RATE_HZ = 1824.0          # fitted, see module docstring


def reference_chain(window_s: float = 1.0, **overrides) -> OpticalChain:
    """Calibrated chain for an integration window of ``window_s`` seconds.

    Keyword overrides replace individual :class:`OpticalChain` fields after
    the per-window scaling, e.g. ``reference_chain(p_leak=0.0)``.
    """
    if window_s <= 0:
        raise ParameterError("window_s must be positive")
    fields = dict(
        pair_rate=HERALD_RATE_HZ / ETA_HERALD * window_s,
        eta_herald=ETA_HERALD,
        eta_switch=ETA_SWITCH,
        p_leak=P_LEAK,
        eta_pre_sample=ETA_PRE_SAMPLE,
        eta_opt=ETA_OPT,
        eta_det=ETA_DET,
        dark_mean=DARK_RATE_HZ * window_s,
    )
    fields.update(overrides)
    return OpticalChain(**fields)


def gamma_reference(chain: OpticalChain, eta_sample: float,
                    baseline_eta_det: float | None = None) -> float:
    """Closed-form precision ratio of the camera-count estimator for a chain
    with unit post-sample optics (delta-method, exact for large windows).

    This is the model's own calibration relation; unlike the ideal
    coincidence formula it accounts for leaked unheralded counts and dark
    counts.  Used to predict sweep results and pin acceptance tolerances.
    """
    if chain.eta_opt != 1.0:
        raise ParameterError("closed form assumes post-sample optics of 1")
    if eta_sample <= 0:
        raise ParameterError("eta_sample must be positive")
    h, s, leak = chain.eta_herald, chain.eta_switch, chain.p_leak
    d = chain.eta_det
    d_base = d if baseline_eta_det is None else baseline_eta_det
    k_weight = h * s + (1.0 - h) * leak
    mu_exposed = chain.pair_rate * chain.eta_pre_sample * k_weight
    a_gain = d * chain.eta_pre_sample * (s - (1.0 - h) * leak / h)
    b_dark = chain.dark_mean / (d * mu_exposed)
    gamma_same = 1.0 / (1.0 - a_gain * eta_sample + b_dark / eta_sample)
    # the coherent numerator scales as 1/baseline detector efficiency
    return gamma_same * d / d_base
