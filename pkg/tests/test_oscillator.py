import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, settings, strategies as st

from oscbound.funcspace import TrigPoly
from oscbound.oscillator import (
    BandError,
    LeakProfileError,
    approx_oscillating,
    random_oscillating,
    validate_oscillation,
)


def test_random_band_support_and_normalization():
    u, cert = random_oscillating(100.0, seed=0)
    assert cert.passed
    assert cert.a == 50.0
    assert cert.b == 100.0
    nz = np.abs(u.freqs[np.abs(u.coeffs) > 0])
    assert nz.min() >= 50
    assert nz.max() <= 100
    assert_allclose(u.l2_norm(), 1.0, rtol=1e-12)


def test_random_is_deterministic_per_seed():
    u1, _ = random_oscillating(40.0, seed=42)
    u2, _ = random_oscillating(40.0, seed=42)
    u3, _ = random_oscillating(40.0, seed=43)
    assert np.array_equal(u1.coeffs, u2.coeffs)
    assert not np.array_equal(u1.coeffs, u3.coeffs)
    # frozen fingerprint so the sampled ensemble never drifts silently
    assert u1.coeffs[u1.max_freq + 20] == \
        (-0.03906691147859386 + 0.03363328278850824j)
    assert_allclose(np.sum(np.abs(u1.coeffs) ** 2), 1.0 / (2.0 * math.pi),
                    rtol=1e-14)


def test_random_real_valued_output():
    u, cert = random_oscillating(30.0, seed=2, real_valued=True)
    assert cert.passed
    assert u.conjugate_defect() == 0.0
    assert_allclose(u.l2_norm(), 1.0, rtol=1e-12)


def test_random_narrow_band_single_mode():
    # only one integer frequency fits in [0.95 k, k] at k = 10
    u, cert = random_oscillating(10.0, xi_lo=0.95, xi_hi=1.0, seed=5)
    assert cert.passed
    nz = np.abs(u.freqs[np.abs(u.coeffs) > 0])
    assert set(nz.tolist()) == {10}


def test_band_errors():
    with pytest.raises(BandError):
        random_oscillating(0.5)
    with pytest.raises(BandError):
        random_oscillating(10.0, xi_lo=1.0, xi_hi=0.5)
    with pytest.raises(BandError):
        random_oscillating(10.0, xi_lo=-0.1, xi_hi=0.5)


def test_validate_accepts_band_edge_mode():
    cert = validate_oscillation(TrigPoly.single_mode(10), 10.0, 10.0)
    assert cert.passed
    assert cert.projection_defect == 0.0
    assert_allclose(cert.worst_ratio, 1.0, rtol=1e-14)


def test_validate_flags_low_frequency_mass():
    u = TrigPoly.from_dict({3: 0.5, 8: 1.0})
    cert = validate_oscillation(u, 5.0, 10.0)
    assert not cert.passed
    assert_allclose(cert.projection_defect, math.sqrt(2.0 * math.pi * 0.25),
                    rtol=1e-12)


def test_validate_flags_high_frequency_leakage():
    u = TrigPoly.from_dict({8: 1.0, 12: 0.3})
    cert = validate_oscillation(u, 5.0, 10.0)
    assert not cert.passed
    assert cert.projection_defect == 0.0
    assert cert.worst_ratio > 1.0
    assert_allclose(cert.worst_ratio, 1.7556192241716455, rtol=1e-12)


def test_validate_low_mass_of_pure_low_input_is_full_norm():
    u = TrigPoly.from_dict({1: 2.0, -2: 1.0})
    cert = validate_oscillation(u, 5.0, 10.0)
    assert_allclose(cert.projection_defect, u.l2_norm(), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(2.0, 80.0), st.integers(0, 100))
def test_random_always_validates(k, seed):
    u, cert = random_oscillating(k, seed=seed)
    assert cert.passed
    assert_allclose(u.l2_norm(), 1.0, rtol=1e-12)


def test_approx_leakage_norm_is_exact():
    k, J = 50.0, 4
    u, cert = approx_oscillating(k, eps=0.25, leak_power=J, seed=1)
    f, c = u.freqs, u.coeffs
    cut = math.ceil(0.25 * k) - 1
    leak = math.sqrt(2.0 * math.pi *
                     float(np.sum(np.abs(c[np.abs(f) <= cut]) ** 2)))
    assert_allclose(leak, k ** (-J), rtol=1e-12)
    assert_allclose(cert.leakage, k ** (-J), rtol=1e-12)
    assert cert.leak_bound == k ** (-J)
    assert_allclose(u.l2_norm(), 1.0, rtol=1e-12)
    assert cert.passed


def test_approx_band_structure():
    k = 40.0
    u, _ = approx_oscillating(k, eps=0.25, seed=0)
    f, c = u.freqs, u.coeffs
    cut, lo = math.ceil(0.25 * k) - 1, math.ceil(0.5 * k)
    gap = (np.abs(f) > cut) & (np.abs(f) < lo)
    assert np.all(c[gap] == 0)
    assert np.any(np.abs(c[np.abs(f) <= cut]) > 0)


def test_approx_weighted_ratios_decrease():
    _, cert = approx_oscillating(50.0, eps=0.25, leak_power=4, seed=1)
    ratios = np.array(cert.norm_ratios)
    assert ratios[0] == 1.0
    assert np.all(np.diff(ratios) < 0)
    assert np.all(ratios <= 1.0)


def test_approx_real_valued():
    u, cert = approx_oscillating(30.0, seed=3, real_valued=True)
    assert u.conjugate_defect() == 0.0
    assert cert.passed


def test_approx_argument_validation():
    with pytest.raises(ValueError):
        approx_oscillating(40.0, eps=1.5)
    with pytest.raises(ValueError):
        approx_oscillating(40.0, eps=0.0)
    with pytest.raises(ValueError):
        approx_oscillating(40.0, eps=0.6)
    with pytest.raises(LeakProfileError):
        approx_oscillating(40.0, leak_power=0)
