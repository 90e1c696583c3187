import pytest

from ssnscope import RngStream, reference_chain


def assert_within_sigma(observed, expected, sigma, n_sigma=3.0, label=""):
    """Assert |observed - expected| <= n_sigma * sigma with a readable message."""
    delta = abs(observed - expected)
    assert delta <= n_sigma * sigma, (
        f"{label or 'value'}: {observed!r} deviates from {expected!r} "
        f"by {delta / sigma:.2f} sigma (allowed {n_sigma})")


@pytest.fixture
def stream():
    return RngStream(20240817, (0,))


@pytest.fixture
def paper_chain():
    """Calibrated chain: 40 000 heralds per 1 s window, gated eta_ref = 0.90."""
    return reference_chain()


@pytest.fixture
def clean_chain():
    """Leak-free, dark-free chain with unit post-sample optics: the regime in
    which the camera-count estimator coincides exactly with the analytic
    coincidence formulas."""
    return reference_chain(p_leak=0.0, dark_mean=0.0)
