import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from mmwpt.beamforming import (
    AnglePair,
    GainKernelParams,
    fejer_gain,
    interference_gain,
    mean_interference_gain,
    mean_kernel_gain,
    phase_offset,
    ula_response,
)


def _direct(n, w):
    return abs(np.exp(-1j * np.arange(n) * w).sum()) ** 2


def _bessel_mean(n, s):
    # E[cos(k * 2 pi s (sin a - sin b))] = J0(2 pi k s)^2 for independent uniform a, b
    k = np.arange(1, n)
    return n + 2.0 * np.sum((n - k) * special.j0(2 * math.pi * k * s) ** 2)


@pytest.mark.parametrize("n", [1, 2, 16, 256])
def test_peak_is_n_squared(n):
    assert fejer_gain(n, 0.0) == n * n
    assert fejer_gain(n, 2 * math.pi) == pytest.approx(n * n)


@pytest.mark.parametrize("n", [2, 7, 32])
def test_nulls(n):
    for k in range(1, n):
        assert fejer_gain(n, 2 * math.pi * k / n) == pytest.approx(0.0, abs=1e-9)


def test_single_element_is_isotropic():
    assert np.all(fejer_gain(1, np.linspace(-10, 10, 101)) == 1.0)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 256), w=st.floats(-4 * math.pi, 4 * math.pi))
def test_matches_direct_sum(n, w):
    assert fejer_gain(n, w) == pytest.approx(_direct(n, w), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 256), w=st.floats(-1e-6, 1e-6))
def test_near_singular(n, w):
    assert fejer_gain(n, w) == pytest.approx(_direct(n, w), abs=1e-9)


def test_array_and_scalar_agree():
    ws = np.linspace(-3, 3, 11)
    arr = fejer_gain(16, ws)
    assert all(arr[i] == fejer_gain(16, float(w)) for i, w in enumerate(ws))


def test_beamformed_response_equals_kernel():
    n, s, theta, steer = 16, 0.5, 0.7, 0.2
    g = abs(np.vdot(ula_response(n, s, steer), ula_response(n, s, theta))) ** 2
    assert g == pytest.approx(fejer_gain(n, phase_offset(s, theta, steer)), rel=1e-12)


def test_interference_gain_product():
    kp = GainKernelParams(m_bs=32, n_ue=16)
    rx, tx = AnglePair(0.3, 1.1), AnglePair(2.0, -0.4)
    want = fejer_gain(16, phase_offset(0.5, 0.3, 1.1)) * fejer_gain(32, phase_offset(0.5, 2.0, -0.4))
    assert interference_gain(rx, tx, kp) == pytest.approx(want, rel=1e-14)
    assert 0 <= rx.aod_rad < 2 * math.pi and 0 <= tx.aod_rad < 2 * math.pi


@pytest.mark.parametrize("n,frozen", [(16, 23.3385), (32, 51.0103), (64, 110.8367)])
def test_mean_kernel_gain_bessel(n, frozen):
    got = mean_kernel_gain(n, 0.5)
    assert got == pytest.approx(_bessel_mean(n, 0.5), rel=1e-10)
    assert got == pytest.approx(frozen, abs=1e-4)


def test_mean_kernel_other_spacing():
    assert mean_kernel_gain(8, 0.37) == pytest.approx(_bessel_mean(8, 0.37), rel=1e-10)


def test_mean_interference_gain_is_product():
    kp = GainKernelParams(m_bs=32, n_ue=16)
    assert mean_interference_gain(kp) == pytest.approx(23.3385 * 51.0103, rel=1e-5)


def test_mean_kernel_sampled():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(0, 2 * math.pi, (2, 400_000))
    mc = fejer_gain(16, phase_offset(0.5, a, b)).mean()
    assert mc == pytest.approx(mean_kernel_gain(16, 0.5), rel=0.02)


def test_validation():
    with pytest.raises(ValueError):
        GainKernelParams(0, 16)
    with pytest.raises(ValueError):
        ula_response(0, 0.5, 0.0)
    with pytest.raises(ValueError):
        mean_interference_gain(GainKernelParams(4, 4), tol=0.0)
