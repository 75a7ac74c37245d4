"""Closed-form-by-quadrature evaluation of harvested power, SNR CDF and rate.

The association densities are used unnormalised throughout (they integrate
jointly to one), so no LoS/NLoS association probability is ever divided out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .beamforming import GainKernelParams, mean_interference_gain
from .netgeometry import assoc_tail, integrate_assoc
from .params import LinkClass, SystemParams
from .quadrature import CumulativeTail, QuadResult, QuadSpec, QuadratureError, integrate

__all__ = [
    "EnergyReport",
    "RateReport",
    "SnrThresholdGeometry",
    "avg_power_lower",
    "avg_interference_power",
    "avg_power_exact",
    "energy_report",
    "stable_transmit_power",
    "outage_distances",
    "snr_cdf",
    "rate_from_ccdf",
    "rate_upper",
]

DEFAULT_SPEC = QuadSpec(rel_tol=1e-9, abs_tol=1e-300)


@dataclass(frozen=True)
class EnergyReport:
    en1_mean_w: float
    en2_mean_w: float
    total_w: float
    pu_stable_w: float
    method: str
    ci_halfwidth_w: float = 0.0
    # Monte Carlo extras; absent for analytic reports
    n_trials: int = 0
    n_empty: int = 0
    en1_ci_halfwidth_w: float = 0.0
    en2_ci_halfwidth_w: float = 0.0
    total_std_w: float = 0.0

    def __post_init__(self):
        for name in ("en1_mean_w", "en2_mean_w", "total_w", "pu_stable_w", "ci_halfwidth_w"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.method not in ("analytic", "montecarlo"):
            raise ValueError("method must be 'analytic' or 'montecarlo'")


@dataclass(frozen=True)
class RateReport:
    """Average uplink rates in bit/s/Hz; ``*_bps`` properties scale by bandwidth."""

    rate_upper: float
    rate_exact: Optional[float] = None
    method: str = "analytic"
    bandwidth_hz: float = 2e9
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def rate_upper_bps(self) -> float:
        return self.rate_upper * self.bandwidth_hz

    @property
    def rate_exact_bps(self) -> Optional[float]:
        return None if self.rate_exact is None else self.rate_exact * self.bandwidth_hz


@dataclass(frozen=True)
class SnrThresholdGeometry:
    """Serving distances beyond which the SNR falls below a threshold."""

    delta1_m: float
    delta2_m: float


# ---------------------------------------------------------------------------
# Mean harvested power

def _lower_terms(params: SystemParams, spec: QuadSpec) -> QuadResult:
    """E{En1} / (N M P_mm) as a QuadResult."""
    p = params
    D = p.ref_dist_m
    out = QuadResult(0.0, 0.0, 0, True)
    for link, beta, alpha in ((LinkClass.LOS, p.beta_los, p.alpha_los),
                              (LinkClass.NLOS, p.beta_nlos, p.alpha_nlos)):
        disk = integrate_assoc(link, p, 0.0, D, spec=spec)
        tail = integrate_assoc(link, p, D, math.inf, weight=lambda x, a=alpha: x ** -a, spec=spec)
        scaled_disk = QuadResult(beta * D ** -alpha * disk.value, beta * D ** -alpha * disk.err_estimate,
                                 disk.evaluations, disk.converged)
        scaled_tail = QuadResult(beta * tail.value, beta * tail.err_estimate,
                                 tail.evaluations, tail.converged)
        out = out + scaled_disk + scaled_tail
    return out


def avg_power_lower(params: SystemParams, spec: QuadSpec | None = None) -> float:
    """Mean power received from the serving BS alone (W)."""
    spec = spec or DEFAULT_SPEC
    res = _lower_terms(params, spec)
    return params.array_gain * params.pmm_watts * res.require("average serving-link power")


def _inner_tail(params: SystemParams, link: LinkClass, spec: QuadSpec) -> CumulativeTail:
    """y -> int_y^inf max(t, D)^-alpha * p_c(t) * t dt for one link class."""
    D = float(params.ref_dist_m)
    L = float(params.los_decay_length)
    alpha = float(params.alpha_los if link is LinkClass.LOS else params.alpha_nlos)
    if link is LinkClass.LOS:
        def f(t):
            return (t if t > D else D) ** -alpha * math.exp(-t / L) * t
    else:
        def f(t):
            return (t if t > D else D) ** -alpha * -math.expm1(-t / L) * t
    grid = np.geomspace(min(D, L) * 1e-3, max(D, L) * 1e3, 97)
    return CumulativeTail(f, grid, spec, breakpoints=[D, L])


def _interference_terms(params: SystemParams, spec: QuadSpec, inner_spec: QuadSpec):
    """Bracketed double integrals of the interference mean, per beta."""
    p = params
    two_pi_rho = 2.0 * math.pi * p.bs_density
    inner_los = _inner_tail(p, LinkClass.LOS, inner_spec)
    inner_nlos = _inner_tail(p, LinkClass.NLOS, inner_spec)
    c_ln = (p.beta_nlos / p.beta_los) ** (1.0 / p.alpha_nlos)
    e_ln = p.alpha_los / p.alpha_nlos
    c_nl = (p.beta_los / p.beta_nlos) ** (1.0 / p.alpha_los)
    e_nl = p.alpha_nlos / p.alpha_los

    # serving LoS at x: LoS interferers beyond x, NLoS beyond phi_LoS(x)
    def los_serving(x):
        return (p.beta_los * inner_los(x)
                + p.beta_nlos * inner_nlos(c_ln * x ** e_ln))

    # serving NLoS at x: LoS interferers beyond phi_NLoS(x), NLoS beyond x
    def nlos_serving(x):
        return (p.beta_los * inner_los(c_nl * x ** e_nl)
                + p.beta_nlos * inner_nlos(x))

    a = integrate_assoc(LinkClass.LOS, p, weight=los_serving, spec=spec)
    b = integrate_assoc(LinkClass.NLOS, p, weight=nlos_serving, spec=spec)
    total = a + b
    ok = total.converged and inner_los.converged and inner_nlos.converged
    return QuadResult(two_pi_rho * total.value, two_pi_rho * total.err_estimate,
                      total.evaluations + inner_los.evaluations + inner_nlos.evaluations, ok)


def avg_interference_power(params: SystemParams, spec: QuadSpec | None = None,
                           hbar: float | None = None, verify: bool = False) -> float:
    """Mean power received from all non-serving BSs (W).

    ``hbar`` overrides the mean interference beamforming gain. With
    ``verify=True`` the nested integral is recomputed with inner integrals at
    the outer tolerance and the two results must agree to 10x that tolerance.
    """
    spec = spec or DEFAULT_SPEC
    if hbar is None:
        hbar = mean_interference_gain(GainKernelParams(params.m_bs, params.n_ue, params.spacing_ratio))
    if hbar == 0:
        return 0.0
    res = _interference_terms(params, spec, spec.loosened(10.0))
    val = res.require("average interference power")
    if verify:
        tight = _interference_terms(params, spec, spec).require("average interference power (verify)")
        if abs(tight - val) > 10 * max(spec.rel_tol * abs(tight), spec.abs_tol):
            raise QuadratureError(
                f"nested interference integral unstable under inner refinement: {val!r} vs {tight!r}")
        val = tight
    return params.pmm_watts / params.array_gain * hbar * val


def avg_power_exact(params: SystemParams, spec: QuadSpec | None = None,
                    hbar: float | None = None, verify: bool = False) -> float:
    """Mean total received power, serving plus interfering BSs (W)."""
    return avg_power_lower(params, spec) + avg_interference_power(params, spec, hbar, verify)


def stable_transmit_power(params: SystemParams, pbar_w: float, eta: float | None = None) -> float:
    """Sustainable uplink transmit power eta * phi / (1 - phi) * pbar (W)."""
    if pbar_w < 0:
        raise ValueError("pbar_w must be >= 0")
    phi = params.phi_split
    if not 0.0 < phi < 1.0:
        raise ValueError("phi_split must lie strictly inside (0, 1)")
    eta = params.eta_rfdc if eta is None else eta
    return eta * phi / (1.0 - phi) * pbar_w


def energy_report(params: SystemParams, spec: QuadSpec | None = None) -> EnergyReport:
    en1 = avg_power_lower(params, spec)
    en2 = avg_interference_power(params, spec)
    total = en1 + en2
    return EnergyReport(en1, en2, total, stable_transmit_power(params, total), "analytic")


# ---------------------------------------------------------------------------
# SNR CDF and rate

def outage_distances(x: float, params: SystemParams, pu_w: float) -> SnrThresholdGeometry:
    if not x > 0:
        raise ValueError("threshold must be > 0")
    p = params
    if p.noise_watts == 0:
        return SnrThresholdGeometry(math.inf, math.inf)
    base = p.array_gain * pu_w / (x * p.noise_watts)
    return SnrThresholdGeometry((base * p.beta_los) ** (1.0 / p.alpha_los),
                                (base * p.beta_nlos) ** (1.0 / p.alpha_nlos))


class _SnrCdf:
    """Caches the threshold-independent disk masses of one (params, pu) pair."""

    def __init__(self, params: SystemParams, pu_w: float, spec: QuadSpec):
        if not pu_w > 0:
            raise ValueError("pu_w must be > 0")
        self.p, self.pu, self.spec = params, pu_w, spec
        D = params.ref_dist_m
        self.disk = {
            link: integrate_assoc(link, params, 0.0, D, spec=spec).require("disk mass")
            for link in (LinkClass.LOS, LinkClass.NLOS)
        }
        self.tail = {link: assoc_tail(link, params, spec) for link in (LinkClass.LOS, LinkClass.NLOS)}

    def __call__(self, x: float) -> float:
        if not x > 0:
            raise ValueError("threshold must be > 0")
        geo = outage_distances(x, self.p, self.pu)
        D = self.p.ref_dist_m
        total = 0.0
        for link, delta in ((LinkClass.LOS, geo.delta1_m), (LinkClass.NLOS, geo.delta2_m)):
            if D > delta:
                total += self.disk[link]
            if math.isfinite(delta):
                total += self.tail[link].query(max(D, delta)).require("SNR tail mass")
        return total

    def ccdf(self, x: float) -> float:
        """1 - F(x) summed directly, so tiny tails keep their relative accuracy."""
        if not x > 0:
            raise ValueError("threshold must be > 0")
        geo = outage_distances(x, self.p, self.pu)
        D = self.p.ref_dist_m
        total = 0.0
        for link, delta in ((LinkClass.LOS, geo.delta1_m), (LinkClass.NLOS, geo.delta2_m)):
            if not delta > D:
                continue
            total += self.disk[link]
            if not math.isfinite(delta):
                total += self.tail[link].query(D).require("SNR tail mass")
                continue
            inner = (self.tail[link].query(D).require("SNR tail mass")
                     - self.tail[link].query(delta).require("SNR tail mass"))
            if inner < 1e-3 * self.tail[link].query(D).value:
                inner = integrate_assoc(link, self.p, D, delta, spec=self.spec).require("SNR ring mass")
            total += inner
        return min(1.0, max(0.0, total))

    def kinks(self) -> list[float]:
        """Thresholds where an outage distance crosses D (derivative jumps)."""
        p = self.p
        if p.noise_watts == 0:
            return []
        g = p.array_gain * self.pu / p.noise_watts
        return [g * p.beta_los * p.ref_dist_m ** -p.alpha_los,
                g * p.beta_nlos * p.ref_dist_m ** -p.alpha_nlos]


def snr_cdf(x, params: SystemParams, pu_w: float, spec: QuadSpec | None = None):
    """P(SNR < x) at the serving BS for uplink transmit power ``pu_w``.

    ``x`` may be a scalar or a sequence of thresholds.
    """
    spec = spec or QuadSpec(rel_tol=1e-10, abs_tol=1e-14)
    cdf = _SnrCdf(params, pu_w, spec)
    if np.ndim(x) == 0:
        return cdf(float(x))
    return np.array([cdf(float(v)) for v in np.asarray(x, dtype=float)])


def rate_from_ccdf(ccdf, phi_split: float, spec: QuadSpec | None = None,
                   x_lo: float = 1e-6, x_hi: float = 1e6, kinks=()) -> float:
    """(1 - phi) / ln 2 * int_0^inf ccdf(x) / (1 + x) dx in bit/s/Hz.

    ``ccdf`` is either a callable threshold -> P(SINR > x) or an object with
    an ``mean_log2_1p()`` method (empirical CDFs), whose step integral is then
    evaluated exactly. Callables are integrated in log-threshold over
    [x_lo, x_hi], extended by decades while the ccdf is still above 1e-13;
    the piece below x_lo is added from the bound ccdf(x_lo) log(1 + x_lo).
    ``kinks`` lists thresholds where the ccdf is not smooth.
    """
    if not 0.0 < phi_split < 1.0:
        raise ValueError("phi_split must lie strictly inside (0, 1)")
    if hasattr(ccdf, "mean_log2_1p"):
        return (1.0 - phi_split) * ccdf.mean_log2_1p()
    spec = spec or QuadSpec(rel_tol=1e-8, abs_tol=1e-14, max_subdivisions=500)
    hi = x_hi
    while ccdf(hi) > 1e-13 and hi < 1e30:
        hi *= 10.0

    def g(u):
        x = math.exp(u)
        return ccdf(x) * x / (1.0 + x)

    lo_u, hi_u = math.log(x_lo), math.log(hi)
    decades = list(np.arange(math.ceil(math.log10(x_lo)), math.floor(math.log10(hi)) + 1) * math.log(10))
    decades += [math.log(k) for k in kinks if x_lo < k < hi]
    decades.sort()
    res = integrate(g, lo_u, hi_u, spec, breakpoints=decades)
    head = ccdf(x_lo) * math.log1p(x_lo)
    value = res.require("rate integral") + head
    return (1.0 - phi_split) / math.log(2.0) * value


def rate_upper(params: SystemParams, pu_w: float | None = None,
               spec: QuadSpec | None = None) -> RateReport:
    """Noise-only (interference-free) average uplink rate.

    Uses the stable transmit power derived from the exact mean harvested
    power unless ``pu_w`` is given.
    """
    if pu_w is None:
        pu_w = stable_transmit_power(params, avg_power_exact(params))
    if pu_w <= 0 or params.noise_watts == 0:
        raise ValueError("rate_upper needs pu_w > 0 and noise_watts > 0")
    cdf = _SnrCdf(params, pu_w, spec or QuadSpec(rel_tol=1e-10, abs_tol=1e-14))
    rate = rate_from_ccdf(cdf.ccdf, params.phi_split, kinks=cdf.kinks())
    return RateReport(rate_upper=rate, method="analytic", bandwidth_hz=params.bandwidth_hz,
                      extras={"pu_w": pu_w})
