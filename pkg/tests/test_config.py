import math

import pytest

from mmwpt.config import load_config, params_from_mapping
from mmwpt.params import ConfigError, SystemParams, dbm_to_watts, free_space_intercept, noise_power_dbm


def test_empty_file_gives_defaults(tmp_path):
    f = tmp_path / "empty.yaml"
    f.write_text("")
    assert load_config(f) == SystemParams()
    assert load_config(None) == SystemParams()


def test_default_values():
    p = SystemParams()
    assert p.pmm_watts == pytest.approx(19.953, rel=1e-4)
    assert p.beta_los == pytest.approx(free_space_intercept(38e9))
    assert p.beta_nlos / p.beta_los == pytest.approx(10 ** -2.7)
    assert (p.m_bs, p.n_ue, p.spacing_ratio, p.phi_split, p.eta_rfdc) == (32, 16, 0.5, 0.5, 0.5)


def test_noise_from_bandwidth_and_figure():
    assert noise_power_dbm(2e9, 10.0) == pytest.approx(-70.9897, abs=1e-4)
    assert SystemParams().noise_watts == pytest.approx(7.962e-11, rel=1e-4)
    # rounding the level to -71.0 dBm gives the commonly quoted 7.943e-11 W
    assert dbm_to_watts(-71.0) == pytest.approx(7.943e-11, rel=1e-4)


def test_dbm_aliases(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("pmm_dbm: 43\nnoise_dbm: -71.0\nbandwidth_hz: 1.0e9\nm_bs: 64\n")
    p = load_config(f)
    assert p.pmm_watts == pytest.approx(19.953, rel=1e-4)
    assert p.noise_watts == pytest.approx(7.943e-11, rel=1e-4)
    assert p.m_bs == 64


def test_noise_tracks_bandwidth_when_not_given():
    p = params_from_mapping({"bandwidth_hz": 1e9, "noise_figure_db": 7})
    assert p.noise_watts == pytest.approx(dbm_to_watts(-174 + 90 + 7))


def test_carrier_and_gap():
    p = params_from_mapping({"carrier_hz": 28e9, "nlos_gap_db": 20})
    lam = 299_792_458.0 / 28e9
    assert p.beta_los == pytest.approx((lam / (4 * math.pi)) ** 2)
    assert p.beta_nlos == pytest.approx(p.beta_los / 100)


def test_density_per_km2():
    assert params_from_mapping({"density_per_km2": 100}).bs_density == pytest.approx(1e-4)


@pytest.mark.parametrize("raw,key", [
    ({"beta_los": -1.0}, "beta_los"),
    ({"phi_split": 1.0}, "phi_split"),
    ({"m_bs": 2.5}, "m_bs"),
    ({"alpha_los": 4, "alpha_nlos": 2}, "alpha_nlos"),
    ({"bogus": 1}, "bogus"),
    ({"pmm_dbm": 40, "pmm_watts": 10}, "pmm_dbm"),
    ({"eta_rfdc": "lots"}, "eta_rfdc"),
])
def test_errors_name_the_key(raw, key):
    with pytest.raises(ConfigError) as exc:
        params_from_mapping(raw)
    assert exc.value.key == key


def test_malformed_and_nested(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("pmm_dbm: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    nested = tmp_path / "nested.yaml"
    nested.write_text("radio:\n  pmm_dbm: 43\n")
    with pytest.raises(ConfigError):
        load_config(nested)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_eta_zero_and_noise_zero_allowed():
    p = params_from_mapping({"eta_rfdc": 0, "noise_watts": 0})
    assert p.eta_rfdc == 0 and p.noise_watts == 0
