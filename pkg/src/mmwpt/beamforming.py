"""ULA responses and analog-beamforming gain kernels."""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .quadrature import QuadratureError, QuadSpec, integrate_2d

__all__ = [
    "AnglePair",
    "GainKernelParams",
    "ula_response",
    "phase_offset",
    "fejer_gain",
    "interference_gain",
    "mean_kernel_gain",
    "mean_interference_gain",
]

TWO_PI = 2.0 * math.pi
# below this |1 - cos w| the ratio form is replaced by its series
_SINGULAR_EPS = 1e-12
# 2 pi split into two 24-bit parts plus a remainder: k * part is exact for
# |k| < 2^29, so the reduced angle keeps full absolute precision
_TWO_PI_A = 6.2831854820251465
_TWO_PI_B = -1.7484555314695172e-07
_TWO_PI_C = -6.8604979977715316e-15


@dataclass(frozen=True)
class AnglePair:
    """Angle of arrival/departure of one link end vs. the steering angle."""

    aoa_rad: float
    aod_rad: float

    def __post_init__(self):
        object.__setattr__(self, "aoa_rad", float(self.aoa_rad) % TWO_PI)
        object.__setattr__(self, "aod_rad", float(self.aod_rad) % TWO_PI)


@dataclass(frozen=True)
class GainKernelParams:
    m_bs: int
    n_ue: int
    spacing_ratio: float = 0.5

    def __post_init__(self):
        if self.m_bs < 1 or self.n_ue < 1:
            raise ValueError("antenna counts must be >= 1")
        if not self.spacing_ratio > 0:
            raise ValueError("spacing_ratio must be > 0")


def ula_response(n_elems: int, spacing_ratio: float, theta_rad: float) -> np.ndarray:
    if n_elems < 1:
        raise ValueError("n_elems must be >= 1")
    i = np.arange(n_elems)
    return np.exp(-1j * TWO_PI * spacing_ratio * i * math.sin(theta_rad))


def phase_offset(spacing_ratio, angle, steer):
    """Inter-element phase difference 2 pi (d/lambda) (sin angle - sin steer)."""
    return TWO_PI * spacing_ratio * (np.sin(angle) - np.sin(steer))


def fejer_gain(n_elems: int, omega):
    """(1 - cos(n w)) / (1 - cos w) = |sum_{i<n} exp(-j i w)|^2.

    Works on scalars and arrays. Near w = 0 (mod 2 pi) the ratio is replaced by
    the Taylor expansion n^2 (1 - (n^2 - 1) u^2 / 12) in the reduced angle u.
    """
    n = int(n_elems)
    w = np.asarray(omega, dtype=float)
    # reduce to [-pi, pi]; both numerator and denominator are 2 pi periodic
    k = np.round(w / TWO_PI)
    u = ((w - k * _TWO_PI_A) - k * _TWO_PI_B) - k * _TWO_PI_C
    # 1 - cos x computed as 2 sin^2(x/2) keeps relative precision for small x
    den = 2.0 * np.sin(0.5 * u) ** 2
    num = 2.0 * np.sin(0.5 * n * u) ** 2
    small = den < _SINGULAR_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num / den
    series = n * n * (1.0 - (n * n - 1.0) * u * u / 12.0)
    g = np.where(small, series, ratio)
    g = np.clip(g, 0.0, float(n * n))
    return float(g) if g.ndim == 0 else g


def interference_gain(angles_rx: AnglePair, angles_tx: AnglePair, kp: GainKernelParams,
                      rx_elems: int | None = None, tx_elems: int | None = None) -> float:
    """Product of the receive-side and transmit-side kernels of one interferer.

    ``angles_rx``: arrival angle of the interferer vs. the receiver's steering
    angle; ``angles_tx``: departure angle towards the victim vs. the
    interferer's own steering angle. Downlink default: the receiver is the
    user (``n_ue`` elements) and the transmitter the BS (``m_bs``).
    """
    nr = kp.n_ue if rx_elems is None else rx_elems
    nt = kp.m_bs if tx_elems is None else tx_elems
    w_rx = phase_offset(kp.spacing_ratio, angles_rx.aoa_rad, angles_rx.aod_rad)
    w_tx = phase_offset(kp.spacing_ratio, angles_tx.aoa_rad, angles_tx.aod_rad)
    return float(fejer_gain(nr, w_rx) * fejer_gain(nt, w_tx))


_cache: dict[tuple, float] = {}
_cache_lock = threading.Lock()


def mean_kernel_gain(n_elems: int, spacing_ratio: float, tol: float = 1e-9) -> float:
    """E[fejer_gain(n, w)] with both angles independent U(0, 2 pi)."""
    key = (int(n_elems), float(spacing_ratio), float(tol))
    with _cache_lock:
        if key in _cache:
            return _cache[key]
    if n_elems == 1:
        val = 1.0
    else:
        val = _mean_kernel_quad(int(n_elems), float(spacing_ratio), tol)
    with _cache_lock:
        _cache[key] = val
    return val


def _mean_kernel_quad(n: int, s: float, tol: float) -> float:
    # smooth and 2 pi periodic in both angles: the periodic tensor rule
    # converges geometrically once it resolves the ~n*s harmonics
    spec = QuadSpec(rel_tol=tol, abs_tol=tol * 1e-6, max_subdivisions=4096)

    def f(a, b):
        return fejer_gain(n, TWO_PI * s * (np.sin(a) - np.sin(b)))

    res = integrate_2d(f, (0.0, TWO_PI, 0.0, TWO_PI), spec, periodic=True)
    if not res.converged:
        raise QuadratureError(f"mean kernel gain did not converge for n={n}", res)
    return res.value / (TWO_PI * TWO_PI)


def mean_interference_gain(kp: GainKernelParams, tol: float = 1e-9) -> float:
    """E[interference_gain] over independent uniform angles.

    The four angles enter as two independent pairs, so the 4-D mean is the
    product of two 2-D means, each taken against the uniform density
    1/(4 pi^2) on [0, 2 pi)^2.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    return (mean_kernel_gain(kp.n_ue, kp.spacing_ratio, tol)
            * mean_kernel_gain(kp.m_bs, kp.spacing_ratio, tol))
