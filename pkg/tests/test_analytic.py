import math

import numpy as np
import pytest
from scipy import integrate, special

from mmwpt.analytic import (
    avg_interference_power,
    avg_power_exact,
    avg_power_lower,
    energy_report,
    outage_distances,
    rate_from_ccdf,
    rate_upper,
    snr_cdf,
    stable_transmit_power,
)
from mmwpt.beamforming import GainKernelParams, mean_interference_gain
from mmwpt.params import SystemParams

P = SystemParams()
PU = stable_transmit_power(P, avg_power_exact(P))


def test_lower_below_exact_on_grid():
    for rho in np.logspace(-6, -2, 9):
        q = P.with_(bs_density=float(rho))
        assert avg_power_lower(q) <= avg_power_exact(q)


def test_zero_interference_gain_collapses_to_lower():
    assert avg_power_exact(P, hbar=0.0) == avg_power_lower(P)


def test_no_blockage_lower_bound_closed_form():
    # every link LoS: nearest-point distance law gives
    # E{En1} = NMP beta [D^-2 (1 - e^{-pi rho D^2}) + pi rho E1(pi rho D^2)]
    q = P.with_(blockage_decay_m=1e15)
    a = math.pi * q.bs_density
    want = q.array_gain * q.pmm_watts * q.beta_los * ((1 - math.exp(-a)) + a * special.exp1(a))
    assert avg_power_lower(q) == pytest.approx(want, rel=1e-8)


def test_no_blockage_interference_closed_form():
    # all LoS with alpha = 4: inner tail int_x^inf beta max(t,D)^-4 t dt in closed form
    q = P.with_(blockage_decay_m=1e15, alpha_los=4.0, alpha_nlos=4.0)
    rho, b, D = q.bs_density, q.beta_los, q.ref_dist_m

    def inner(x):
        return b / (2 * x * x) if x >= D else b * (D * D - x * x) / (2 * D ** 4) + b / (2 * D * D)

    def outer(x):
        return 2 * math.pi * rho * x * math.exp(-math.pi * rho * x * x) * inner(x)

    val = integrate.quad(outer, 0, D)[0] + integrate.quad(outer, D, np.inf, limit=200)[0]
    hbar = mean_interference_gain(GainKernelParams(q.m_bs, q.n_ue, q.spacing_ratio))
    want = q.pmm_watts / q.array_gain * hbar * 2 * math.pi * rho * val
    assert avg_interference_power(q) == pytest.approx(want, rel=1e-6)


def test_interference_share_small_at_defaults():
    rep = energy_report(P)
    assert rep.en2_mean_w / rep.total_w < 0.1
    assert rep.total_w == rep.en1_mean_w + rep.en2_mean_w


def test_verify_mode_agrees():
    assert avg_interference_power(P, verify=True) == pytest.approx(avg_interference_power(P), rel=1e-8)


@pytest.mark.parametrize("c", [10.0, 0.37])
def test_linear_in_transmit_power(c):
    q = P.with_(pmm_watts=P.pmm_watts * c)
    assert avg_power_exact(q) / avg_power_exact(P) == pytest.approx(c, rel=1e-10)
    assert avg_power_lower(q) / avg_power_lower(P) == pytest.approx(c, rel=1e-10)


def test_stable_transmit_power():
    assert stable_transmit_power(P, 1.0) == pytest.approx(0.5 * 0.5 / 0.5)
    assert stable_transmit_power(P.with_(eta_rfdc=0.0), 1.0) == 0.0
    with pytest.raises(ValueError):
        stable_transmit_power(P, -1.0)


def test_snr_cdf_limits():
    assert snr_cdf(1e-30, P, PU) == pytest.approx(0.0, abs=1e-9)
    assert snr_cdf(1e30, P, PU) == pytest.approx(1.0, abs=1e-6)


def test_snr_cdf_monotone_and_bounded():
    xs = np.logspace(-6, 6, 60)
    f = snr_cdf(xs, P, PU)
    assert np.all(f >= -1e-9) and np.all(f <= 1 + 1e-9)
    assert np.all(np.diff(f) >= -1e-12)


def test_snr_cdf_decreases_with_power():
    xs = np.logspace(-3, 2, 12)
    assert np.all(snr_cdf(xs, P, 2 * PU) <= snr_cdf(xs, P, PU) + 1e-12)


def test_outage_distances():
    geo = outage_distances(1.0, P, PU)
    assert P.array_gain * PU * P.beta_los * geo.delta1_m ** -2 == pytest.approx(P.noise_watts, rel=1e-12)
    with pytest.raises(ValueError):
        outage_distances(0.0, P, PU)


def test_rate_zero_ccdf():
    assert rate_from_ccdf(lambda x: 0.0, 0.5) == 0.0


@pytest.mark.parametrize("gamma", [0.5, 3.0, 100.0])
def test_rate_step_ccdf(gamma):
    got = rate_from_ccdf(lambda x: 1.0 if x < gamma else 0.0, 0.5, kinks=[gamma])
    assert got == pytest.approx(0.5 * math.log2(1 + gamma), rel=1e-6)


@pytest.mark.parametrize("g", [0.1, 1.0, 10.0])
def test_rate_exponential_closed_form(g):
    want = math.exp(1 / g) * special.exp1(1 / g) / math.log(2) * 0.5
    assert rate_from_ccdf(lambda x: math.exp(-x / g), 0.5) == pytest.approx(want, rel=1e-6)


def test_rate_known_value_mean_one():
    # e * E1(1) / ln 2 = 0.596347... / 0.693147... = 0.8603474
    assert rate_from_ccdf(lambda x: math.exp(-x), 1e-12) == pytest.approx(0.8603474, rel=1e-6)


def test_rate_monotone_in_ccdf():
    lo = rate_from_ccdf(lambda x: math.exp(-x), 0.5)
    hi = rate_from_ccdf(lambda x: math.exp(-x / 2), 0.5)
    assert hi >= lo


def test_rate_upper_grows_with_m():
    assert rate_upper(P.with_(m_bs=64)).rate_upper > rate_upper(P).rate_upper


def test_rate_upper_vanishes_with_huge_noise():
    assert rate_upper(P.with_(noise_watts=1e6)).rate_upper < 1e-9


def test_rate_upper_distance_domain_oracle():
    # E log2(1 + SNR) written directly over the serving-distance law
    from mmwpt.netgeometry import assoc_pdf_los, assoc_pdf_nlos

    k = P.array_gain * PU / P.noise_watts
    tot = 0.0
    for pdf, b, a in ((assoc_pdf_los, P.beta_los, P.alpha_los), (assoc_pdf_nlos, P.beta_nlos, P.alpha_nlos)):
        def f(r):
            return float(pdf(r, P)) * math.log2(1 + k * b * max(r, 1.0) ** -a)
        edges = [0, 1, 10, 100, 1000]
        tot += sum(integrate.quad(f, lo, hi, limit=400)[0] for lo, hi in zip(edges, edges[1:]))
        tot += integrate.quad(f, 1000, np.inf, limit=400)[0]
    assert rate_upper(P).rate_upper == pytest.approx(0.5 * tot, rel=1e-6)
    assert rate_upper(P).rate_upper_bps == pytest.approx(0.5 * tot * 2e9, rel=1e-6)
