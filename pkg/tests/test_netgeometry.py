import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from mmwpt.netgeometry import (
    BsPoint,
    EmptyDeployment,
    assoc_pdf_los,
    assoc_pdf_nlos,
    boundary_los_to_nlos,
    boundary_nlos_to_los,
    default_sim_radius,
    empty_probability,
    integrate_assoc,
    los_assoc_probability,
    los_probability,
    nlos_assoc_probability,
    path_gain,
    realization_from_points,
    sample_realization,
    serving_index,
    theta_fn,
    xi_fn,
)
from mmwpt.params import ConfigError, LinkClass, SystemParams

P = SystemParams()


def test_los_probability_values():
    assert los_probability(0.0, P) == 1.0
    assert los_probability(141.4, P) == pytest.approx(math.exp(-1), rel=1e-15)
    assert los_probability(282.8, P) == pytest.approx(0.135335283, rel=1e-8)


def test_rate_form_reads_decay_as_inverse_length():
    q = P.with_(blockage_form="rate", blockage_decay_m=0.01)
    assert los_probability(100.0, q) == pytest.approx(math.exp(-1.0))


def test_negative_distance_rejected():
    with pytest.raises(ValueError):
        los_probability(-1.0, P)
    with pytest.raises(ValueError):
        theta_fn(-0.5, P)


def _theta_closed(x, L):
    # closed-form antiderivative at 50 digits; double precision would cancel for small x
    with mpmath.workdps(50):
        u = mpmath.mpf(x) / L
        return float(mpmath.mpf(L) ** 2 * (1 - mpmath.exp(-u) * (1 + u)))


@pytest.mark.parametrize("x", [0.0, 1e-6, 0.5, 10.0, 141.4, 1000.0, 1e5])
def test_theta_closed_form(x):
    assert theta_fn(x, P) == pytest.approx(_theta_closed(x, 141.4), rel=1e-12, abs=1e-300)


def test_theta_limit():
    assert theta_fn(1e7, P) == pytest.approx(19993.96, rel=1e-7)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0.0, 1e5))
def test_theta_plus_xi(x):
    assert theta_fn(x, P) + xi_fn(x, P) == pytest.approx(0.5 * x * x, rel=1e-12, abs=1e-300)


def test_theta_xi_nondecreasing():
    xs = np.linspace(0, 2000, 400)
    assert np.all(np.diff(theta_fn(xs, P)) >= 0)
    assert np.all(np.diff(xi_fn(xs, P)) >= -1e-9)


def test_boundary_identical_laws():
    q = P.with_(beta_nlos=P.beta_los, alpha_nlos=P.alpha_los)
    assert boundary_los_to_nlos(37.0, q) == pytest.approx(37.0)


def test_boundary_value_and_numeric_solve():
    q = P.with_(beta_nlos=P.beta_los * 1e-3)
    got = boundary_los_to_nlos(100.0, q)
    assert got == pytest.approx(1.77828, rel=1e-5)
    # equal path gain: beta_L x^-2 = beta_N t^-4
    t = optimize.brentq(lambda t: q.beta_los * 100.0 ** -2 - q.beta_nlos * t ** -4, 0.1, 100.0, xtol=1e-14)
    assert got == pytest.approx(t, rel=1e-10)


@pytest.mark.parametrize("x", [1.0, 50.0, 500.0])
def test_boundary_round_trip(x):
    assert boundary_nlos_to_los(boundary_los_to_nlos(x, P), P) == pytest.approx(x, rel=1e-12)


def test_pdfs_vanish_at_origin():
    assert assoc_pdf_los(0.0, P) == 0.0
    assert assoc_pdf_nlos(0.0, P) == 0.0


@pytest.mark.parametrize("rho", [1e-6, 1e-5, 1e-4, 1e-3])
def test_association_normalization(rho):
    q = P.with_(bs_density=rho)
    assert los_assoc_probability(q) + nlos_assoc_probability(q) == pytest.approx(1.0, abs=1e-9)


def test_no_blockage_reduces_to_rayleigh_nearest():
    # all links LoS: serving distance is the nearest point of a PPP
    q = P.with_(blockage_decay_m=1e15)
    for r in (10.0, 50.0, 120.0):
        f = assoc_pdf_los(r, q)
        assert f == pytest.approx(2 * math.pi * 1e-4 * r * math.exp(-math.pi * 1e-4 * r * r), rel=1e-9)


def test_partial_mass_matches_vectorized_pdf():
    q = P.with_(bs_density=1e-5)
    xs = np.linspace(0, 300, 30001)
    trap = np.trapezoid(assoc_pdf_nlos(xs, q), xs)
    assert integrate_assoc(LinkClass.NLOS, q, 0.0, 300.0).value == pytest.approx(trap, rel=1e-6)


def test_sample_realization_deterministic_and_serving_rule():
    a = sample_realization(P, rng_seed=42)
    b = sample_realization(P, rng_seed=42)
    assert a == b
    g = path_gain(a.radii, a.is_los, P)
    assert a.serving_idx == int(np.argmax(g))
    assert all(0 <= p.azimuth_rad < 2 * math.pi for p in a.bss)


def test_serving_ties_break_to_smallest_index():
    assert serving_index([1.0, 3.0, 3.0, 2.0]) == 1
    pts = [BsPoint(0.5, 0.0, LinkClass.LOS), BsPoint(0.9, 1.0, LinkClass.LOS)]
    # both inside D: identical gain beta * D^-alpha
    assert realization_from_points(pts, P, 100.0).serving_idx == 0


def test_radius_policy():
    with pytest.raises(ConfigError):
        sample_realization(P, sim_radius_m=50.0, rng_seed=0)
    r = default_sim_radius(P)
    assert empty_probability(P, r) <= 1e-9
    with pytest.raises(EmptyDeployment):
        realization_from_points([], P, 10.0)


def test_path_gain_clamps_at_reference_distance():
    g = path_gain([0.2, 1.0, 2.0], [True, True, True], P)
    assert g[0] == g[1] == P.beta_los
    assert g[2] == pytest.approx(P.beta_los / 4)
