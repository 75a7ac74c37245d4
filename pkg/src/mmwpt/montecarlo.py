"""Monte Carlo oracle: sampled deployments, beam angles, harvested power and uplink SINR.

Trials are simulated in fixed-size chunks. Chunk ``c`` of a batch draws from
``SeedSequence(seed, spawn_key=(stream, c))``, so results depend only on
(params, batch) and not on how chunks are scheduled. Sample means use
``math.fsum`` (exactly rounded, order independent).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analytic import EnergyReport, RateReport, avg_power_exact, rate_from_ccdf, stable_transmit_power
from .beamforming import fejer_gain
from .netgeometry import (
    EmptyDeployment,
    NetworkRealization,
    default_sim_radius,
    empty_probability,
)
from .params import ConfigError, SystemParams

__all__ = [
    "TrialBatchSpec",
    "EmpiricalCdf",
    "HarvestSamples",
    "UplinkSamples",
    "harvest_samples",
    "harvest_from_realization",
    "mc_harvest",
    "uplink_samples",
    "mc_uplink",
    "mc_rate",
    "association_samples",
    "SNR_CAP",
]

TWO_PI = 2.0 * math.pi
SNR_CAP = 1e30
MAX_P_EMPTY = 1e-6
INTERFERER_MODELS = ("ppp", "per_cell")

# spawn-key streams, so harvest and uplink draws never share a substream
_STREAM_HARVEST = 0
_STREAM_UPLINK = 1
_STREAM_ASSOC = 2


@dataclass(frozen=True)
class TrialBatchSpec:
    """How many trials to run and how.

    ``sim_radius_m=None`` selects :func:`netgeometry.default_sim_radius`.
    ``interferer_model`` picks the uplink interfering-user geometry:
    ``"ppp"`` (independent PPP of density rho around the serving BS) or
    ``"per_cell"`` (one user per non-serving BS, displaced from it by a
    nearest-neighbour distance at a uniform angle).
    """

    n_trials: int = 100_000
    seed: int = 0
    sim_radius_m: Optional[float] = None
    record_sinr: bool = True
    interferer_model: str = "ppp"
    chunk_size: int = 2000

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("must be >= 1", "n_trials")
        if self.sim_radius_m is not None and not self.sim_radius_m > 0:
            raise ConfigError("must be > 0", "sim_radius_m")
        if self.interferer_model not in INTERFERER_MODELS:
            raise ConfigError(f"must be one of {INTERFERER_MODELS}", "interferer_model")
        if self.chunk_size < 1:
            raise ConfigError("must be >= 1", "chunk_size")

    def radius_for(self, params: SystemParams) -> float:
        r = default_sim_radius(params) if self.sim_radius_m is None else float(self.sim_radius_m)
        pe = empty_probability(params, r)
        if pe > MAX_P_EMPTY:
            raise ConfigError(f"P(empty disk) = {pe:.3g} exceeds {MAX_P_EMPTY:g}; "
                              "increase the simulation radius", "sim_radius_m")
        return r

    def chunks(self):
        full, rest = divmod(self.n_trials, self.chunk_size)
        sizes = [self.chunk_size] * full + ([rest] if rest else [])
        return list(enumerate(sizes))


def _rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, chunk)))


class EmpiricalCdf:
    """Sorted-sample CDF: ``cdf(x)`` is the fraction of samples <= x."""

    def __init__(self, samples):
        self.sorted_samples = np.sort(np.asarray(samples, dtype=float))
        self.n = int(self.sorted_samples.size)
        if self.n == 0:
            raise ValueError("EmpiricalCdf needs at least one sample")

    def __call__(self, x):
        r = np.searchsorted(self.sorted_samples, x, side="right") / self.n
        return float(r) if np.ndim(r) == 0 else r

    def ccdf(self, x):
        return 1.0 - np.asarray(self(x)) if np.ndim(x) else 1.0 - self(x)

    @property
    def n_capped(self) -> int:
        return int(np.count_nonzero(self.sorted_samples >= SNR_CAP))

    def mean_log2_1p(self) -> float:
        """Exact int_0^inf ccdf(x)/(1+x) dx / ln 2 over the uncapped samples."""
        s = self.sorted_samples[self.sorted_samples < SNR_CAP]
        if s.size == 0:
            return 0.0
        return math.fsum(np.log2(np.maximum(s, 0.0) + 1.0)) / s.size

    def sup_distance(self, other, thresholds) -> float:
        """max |self(x) - other(x)| over ``thresholds``; ``other`` is any CDF callable."""
        xs = np.asarray(thresholds, dtype=float)
        mine = np.asarray(self(xs))
        theirs = np.array([other(float(x)) for x in xs])
        return float(np.max(np.abs(mine - theirs)))


# ---------------------------------------------------------------------------
# Deployment core shared by the harvest, uplink and association samplers

@dataclass
class _Deployment:
    counts: np.ndarray      # BSs per trial
    starts: np.ndarray      # offset of each trial's first BS
    trial: np.ndarray       # owning trial of each BS
    radii: np.ndarray
    azimuths: np.ndarray
    is_los: np.ndarray
    gains: np.ndarray       # beta * max(r, D)^-alpha
    serving: np.ndarray     # flat index of each non-empty trial's serving BS (-1 if empty)


def _segment_serving(counts, gains):
    """Flat index of the max-gain BS per trial; first index wins ties; -1 if empty."""
    n = counts.size
    serving = np.full(n, -1, dtype=np.int64)
    nonempty = counts > 0
    if not nonempty.any():
        return serving
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    ne_starts = starts[nonempty]
    gmax = np.maximum.reduceat(gains, ne_starts)
    trial_of = np.repeat(np.arange(n), counts)
    full_max = np.empty(n)
    full_max[nonempty] = gmax
    idx = np.arange(gains.size)
    big = np.iinfo(np.int64).max
    cand = np.where(gains == full_max[trial_of], idx, big)
    serving[nonempty] = np.minimum.reduceat(cand, ne_starts)
    return serving


def _gains(radii, is_los, params: SystemParams):
    r = np.maximum(radii, params.ref_dist_m)
    return np.where(is_los, params.beta_los * r ** -params.alpha_los,
                    params.beta_nlos * r ** -params.alpha_nlos)


def _deploy(rng, n_trials, params: SystemParams, radius: float) -> _Deployment:
    counts = rng.poisson(params.bs_density * math.pi * radius * radius, size=n_trials)
    total = int(counts.sum())
    radii = radius * np.sqrt(rng.random(total))
    azimuths = TWO_PI * rng.random(total)
    is_los = rng.random(total) < np.exp(-radii / params.los_decay_length)
    return _assemble(counts, radii, azimuths, is_los, params)


def _assemble(counts, radii, azimuths, is_los, params):
    counts = np.asarray(counts, dtype=np.int64)
    gains = _gains(radii, is_los, params)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
    trial = np.repeat(np.arange(counts.size), counts)
    serving = _segment_serving(counts, gains)
    return _Deployment(counts, starts, trial, radii, azimuths, is_los, gains, serving)


def _segment_sum(values, dep: _Deployment):
    out = np.zeros(dep.counts.size)
    nonempty = dep.counts > 0
    if values.size:
        out[nonempty] = np.add.reduceat(values, dep.starts[nonempty])
    return out


# ---------------------------------------------------------------------------
# Harvested power

@dataclass
class HarvestSamples:
    en1: np.ndarray
    en2: np.ndarray
    serving_radius: np.ndarray
    serving_los: np.ndarray
    n_empty: int

    @property
    def total(self):
        return self.en1 + self.en2


def _harvest_core(dep: _Deployment, params: SystemParams, theta_ro, aoa, aod, steer):
    """En1/En2 per trial given per-BS angles and per-trial receive steering."""
    p = params
    nm = p.array_gain
    ok = dep.serving >= 0
    en1 = np.zeros(dep.counts.size)
    en1[ok] = nm * p.pmm_watts * dep.gains[dep.serving[ok]]
    w_rx = TWO_PI * p.spacing_ratio * (np.sin(aoa) - np.sin(theta_ro[dep.trial]))
    w_tx = TWO_PI * p.spacing_ratio * (np.sin(aod) - np.sin(steer))
    hbar = fejer_gain(p.n_ue, w_rx) * fejer_gain(p.m_bs, w_tx)
    contrib = hbar * dep.gains
    contrib[dep.serving[ok]] = 0.0
    en2 = p.pmm_watts / nm * _segment_sum(contrib, dep)
    return en1, en2


def harvest_samples(params: SystemParams, batch: TrialBatchSpec) -> HarvestSamples:
    """Per-trial serving-link and interference received power."""
    radius = batch.radius_for(params)
    parts = []
    for c, size in batch.chunks():
        rng = _rng(batch.seed, _STREAM_HARVEST, c)
        dep = _deploy(rng, size, params, radius)
        n = dep.radii.size
        theta_ro = TWO_PI * rng.random(size)
        aoa, aod, steer = (TWO_PI * rng.random(n) for _ in range(3))
        en1, en2 = _harvest_core(dep, params, theta_ro, aoa, aod, steer)
        ok = dep.serving >= 0
        r0 = np.full(size, np.nan)
        l0 = np.zeros(size, dtype=bool)
        r0[ok] = dep.radii[dep.serving[ok]]
        l0[ok] = dep.is_los[dep.serving[ok]]
        parts.append((en1, en2, r0, l0, int(np.count_nonzero(~ok))))
    return HarvestSamples(
        np.concatenate([x[0] for x in parts]),
        np.concatenate([x[1] for x in parts]),
        np.concatenate([x[2] for x in parts]),
        np.concatenate([x[3] for x in parts]),
        sum(x[4] for x in parts),
    )


def harvest_from_realization(real: NetworkRealization, params: SystemParams,
                             rng_seed=None, theta_ro: float | None = None,
                             aoa=None, aod=None, steer=None) -> tuple[float, float]:
    """(En1, En2) for one explicit deployment.

    Angles default to independent U(0, 2 pi) draws; pass arrays (one entry
    per BS, serving entry ignored) to force specific beam geometries.
    """
    rng = np.random.default_rng(rng_seed)
    n = len(real.bss)
    if n == 0:
        raise EmptyDeployment(rng_seed, real.sim_radius_m)
    dep = _assemble([n], real.radii, real.azimuths, real.is_los, params)
    if dep.serving[0] != real.serving_idx:
        raise ValueError("realization serving index disagrees with the association rule")
    t0 = np.array([TWO_PI * rng.random() if theta_ro is None else theta_ro])
    draw = lambda v: TWO_PI * rng.random(n) if v is None else np.asarray(v, dtype=float)  # noqa: E731
    en1, en2 = _harvest_core(dep, params, t0, draw(aoa), draw(aod), draw(steer))
    return float(en1[0]), float(en2[0])


def _mean_ci(x):
    n = x.size
    mean = math.fsum(x) / n
    if n < 2:
        return mean, 0.0, 0.0
    var = math.fsum((x - mean) ** 2) / (n - 1)
    sd = math.sqrt(var)
    return mean, 1.959963984540054 * sd / math.sqrt(n), sd


def mc_harvest(params: SystemParams, batch: TrialBatchSpec) -> EnergyReport:
    """Sample means of En1, En2 and their sum, with 95% normal-approximation CIs.

    Empty deployments count as zero-power trials and are reported in
    ``n_empty``; the radius policy keeps their probability below 1e-6.
    """
    s = harvest_samples(params, batch)
    m1, c1, _ = _mean_ci(s.en1)
    m2, c2, _ = _mean_ci(s.en2)
    mt, ct, sdt = _mean_ci(s.total)
    return EnergyReport(
        en1_mean_w=m1, en2_mean_w=m2, total_w=mt,
        pu_stable_w=stable_transmit_power(params, mt),
        method="montecarlo", ci_halfwidth_w=ct,
        n_trials=batch.n_trials, n_empty=s.n_empty,
        en1_ci_halfwidth_w=c1, en2_ci_halfwidth_w=c2, total_std_w=sdt,
    )


# ---------------------------------------------------------------------------
# Association (serving link only)

def association_samples(params: SystemParams, batch: TrialBatchSpec):
    """(serving distance, serving-is-LoS) per trial; NaN distance for empty trials."""
    radius = batch.radius_for(params)
    rs, ls = [], []
    for c, size in batch.chunks():
        dep = _deploy(_rng(batch.seed, _STREAM_ASSOC, c), size, params, radius)
        ok = dep.serving >= 0
        r0 = np.full(size, np.nan)
        l0 = np.zeros(size, dtype=bool)
        r0[ok] = dep.radii[dep.serving[ok]]
        l0[ok] = dep.is_los[dep.serving[ok]]
        rs.append(r0)
        ls.append(l0)
    return np.concatenate(rs), np.concatenate(ls)


# ---------------------------------------------------------------------------
# Uplink

@dataclass
class UplinkSamples:
    snr: np.ndarray
    sinr: np.ndarray
    interference_w: np.ndarray
    n_empty: int


def _uplink_interference(rng, dep: _Deployment, params: SystemParams, pu_w: float,
                         radius: float, model: str):
    """Aggregate uplink interference power at each trial's serving BS."""
    p = params
    n_trials = dep.counts.size
    ok = dep.serving >= 0
    if model == "ppp":
        counts = rng.poisson(p.bs_density * math.pi * radius * radius, size=n_trials)
        counts[~ok] = 0
        total = int(counts.sum())
        dist = radius * np.sqrt(rng.random(total))
    else:
        # users of every non-serving BS, displaced by a nearest-neighbour distance
        counts = dep.counts - ok.astype(np.int64)
        keep = np.ones(dep.radii.size, dtype=bool)
        keep[dep.serving[ok]] = False
        total = int(counts.sum())
        bx = dep.radii[keep] * np.cos(dep.azimuths[keep])
        by = dep.radii[keep] * np.sin(dep.azimuths[keep])
        d = np.sqrt(-np.log1p(-rng.random(total)) / (math.pi * p.bs_density))
        phi = TWO_PI * rng.random(total)
        ux, uy = bx + d * np.cos(phi), by + d * np.sin(phi)
        owner = np.repeat(np.arange(n_trials), counts)
        srv = dep.serving[owner]
        sx = dep.radii[srv] * np.cos(dep.azimuths[srv])
        sy = dep.radii[srv] * np.sin(dep.azimuths[srv])
        dist = np.hypot(ux - sx, uy - sy)
    is_los = rng.random(total) < np.exp(-dist / p.los_decay_length)
    gains = _gains(dist, is_los, p)
    steer_bs = TWO_PI * rng.random(n_trials)
    aoa, aod, steer_ue = (TWO_PI * rng.random(total) for _ in range(3))
    owner = np.repeat(np.arange(n_trials), counts)
    w_rx = TWO_PI * p.spacing_ratio * (np.sin(aoa) - np.sin(steer_bs[owner]))
    w_tx = TWO_PI * p.spacing_ratio * (np.sin(aod) - np.sin(steer_ue))
    # receive side is the BS array, transmit side the user array
    hbar = fejer_gain(p.m_bs, w_rx) * fejer_gain(p.n_ue, w_tx)
    contrib = hbar * gains
    out = np.zeros(n_trials)
    nz = counts > 0
    if total:
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        out[nz] = np.add.reduceat(contrib, starts[nz])
    return pu_w / p.array_gain * out


def uplink_samples(params: SystemParams, pu_w: float, batch: TrialBatchSpec,
                   interferers: bool = True) -> UplinkSamples:
    """Per-trial SNR and SINR at the serving BS for uplink power ``pu_w``.

    Zero noise makes the SNR (and an interference-free SINR) infinite; such
    samples are stored as ``SNR_CAP``.
    """
    if not pu_w > 0:
        raise ValueError("pu_w must be > 0")
    p = params
    if p.noise_watts == 0:
        warnings.warn("noise_watts = 0: SNR samples are capped at 1e30 and excluded from rates",
                      RuntimeWarning, stacklevel=2)
    radius = batch.radius_for(p)
    snr_parts, sinr_parts, i_parts, empty = [], [], [], 0
    for c, size in batch.chunks():
        rng = _rng(batch.seed, _STREAM_UPLINK, c)
        dep = _deploy(rng, size, p, radius)
        ok = dep.serving >= 0
        empty += int(np.count_nonzero(~ok))
        signal = np.zeros(size)
        signal[ok] = p.array_gain * pu_w * dep.gains[dep.serving[ok]]
        if interferers and batch.record_sinr:
            interference = _uplink_interference(rng, dep, p, pu_w, radius, batch.interferer_model)
        else:
            interference = np.zeros(size)
        with np.errstate(divide="ignore", invalid="ignore"):
            snr = np.where(signal > 0, signal / p.noise_watts, 0.0) if p.noise_watts > 0 \
                else np.where(signal > 0, SNR_CAP, 0.0)
            den = interference + p.noise_watts
            sinr = np.where(den > 0, signal / np.where(den > 0, den, 1.0), np.where(signal > 0, SNR_CAP, 0.0))
        snr_parts.append(np.minimum(snr, SNR_CAP))
        sinr_parts.append(np.minimum(sinr, SNR_CAP))
        i_parts.append(interference)
    return UplinkSamples(np.concatenate(snr_parts), np.concatenate(sinr_parts),
                         np.concatenate(i_parts), empty)


def mc_uplink(params: SystemParams, pu_w: float, batch: TrialBatchSpec,
              interferers: bool = True) -> tuple[EmpiricalCdf, EmpiricalCdf]:
    """(empirical SINR CDF, empirical SNR CDF)."""
    s = uplink_samples(params, pu_w, batch, interferers)
    return EmpiricalCdf(s.sinr), EmpiricalCdf(s.snr)


def mc_rate(params: SystemParams, batch: TrialBatchSpec, pu_source: str = "analytic",
            pu_w: float | None = None) -> RateReport:
    """Interference-inclusive (exact) and noise-only (upper) average rates.

    The uplink power is the stable transmit power of the analytic mean
    harvested power (``pu_source="analytic"``) or of the Monte Carlo mean
    (``"montecarlo"``), unless ``pu_w`` is given explicitly.
    """
    if pu_w is None:
        if pu_source == "analytic":
            pbar = avg_power_exact(params)
        elif pu_source == "montecarlo":
            pbar = mc_harvest(params, batch).total_w
        else:
            raise ConfigError("must be 'analytic' or 'montecarlo'", "pu_source")
        pu_w = stable_transmit_power(params, pbar)
    s = uplink_samples(params, pu_w, batch)
    sinr, snr = EmpiricalCdf(s.sinr), EmpiricalCdf(s.snr)
    return RateReport(
        rate_upper=rate_from_ccdf(snr, params.phi_split),
        rate_exact=rate_from_ccdf(sinr, params.phi_split),
        method="montecarlo",
        bandwidth_hz=params.bandwidth_hz,
        extras={"pu_w": pu_w, "n_trials": batch.n_trials, "n_empty": s.n_empty},
    )
