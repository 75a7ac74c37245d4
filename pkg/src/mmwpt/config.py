"""Flat key-value configuration files (YAML) and dB/dBm unit resolution.

Every :class:`SystemParams` field is accepted under its own name in linear
units. A few fields also accept a dB-flavoured alias:

==================  =====================================
alias               resolves to
==================  =====================================
``pmm_dbm``         ``pmm_watts``
``noise_dbm``       ``noise_watts``
``beta_los_db``     ``beta_los`` (10 log10 of the gain)
``beta_nlos_db``    ``beta_nlos``
``nlos_gap_db``     ``beta_nlos = beta_los * 10^(-gap/10)``
``carrier_hz``      ``beta_los = (lambda / 4 pi)^2``
``density_per_km2`` ``bs_density`` (divided by 1e6)
==================  =====================================

A field and its alias together is an error. When neither ``noise_watts``
nor ``noise_dbm`` is given, the noise power is derived from
``bandwidth_hz`` and ``noise_figure_db`` as -174 + 10 log10(BW) + Nf dBm.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Mapping

import yaml

from .params import (
    DEFAULT_CARRIER_HZ,
    DEFAULT_NLOS_GAP_DB,
    ConfigError,
    SystemParams,
    dbm_to_watts,
    free_space_intercept,
    noise_power_dbm,
)

__all__ = ["load_config", "params_from_mapping", "ALIASES"]

ALIASES = {
    "pmm_dbm": "pmm_watts",
    "noise_dbm": "noise_watts",
    "beta_los_db": "beta_los",
    "beta_nlos_db": "beta_nlos",
    "nlos_gap_db": "beta_nlos",
    "carrier_hz": "beta_los",
    "density_per_km2": "bs_density",
}
_INT_FIELDS = ("m_bs", "n_ue")
_STR_FIELDS = ("blockage_form",)


def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        try:
            value = float(str(value))
        except ValueError:
            raise ConfigError(f"expected a number, got {value!r}", key) from None
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"must be finite, got {value!r}", key)
    return value


def params_from_mapping(raw: Mapping[str, Any] | None) -> SystemParams:
    """Resolve a flat mapping (field names and aliases) into SystemParams."""
    raw = dict(raw or {})
    known = set(SystemParams.field_names()) | set(ALIASES)
    unknown = sorted(k for k in raw if k not in known)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", unknown[0])
    for alias, field in ALIASES.items():
        clash = [k for k in raw if k != alias and (k == field or ALIASES.get(k) == field)]
        if alias in raw and clash:
            raise ConfigError(f"conflicts with {clash[0]}", alias)

    out: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _STR_FIELDS:
            out[key] = str(value)
        elif key in _INT_FIELDS:
            v = _number(key, value)
            if v != int(v):
                raise ConfigError(f"must be an integer, got {value!r}", key)
            out[key] = int(v)
        elif key not in ALIASES:
            out[key] = _number(key, value)

    if "pmm_dbm" in raw:
        out["pmm_watts"] = dbm_to_watts(_number("pmm_dbm", raw["pmm_dbm"]))
    if "density_per_km2" in raw:
        out["bs_density"] = _number("density_per_km2", raw["density_per_km2"]) / 1e6

    if "beta_los_db" in raw:
        out["beta_los"] = 10.0 ** (_number("beta_los_db", raw["beta_los_db"]) / 10.0)
    elif "carrier_hz" in raw:
        f = _number("carrier_hz", raw["carrier_hz"])
        if f <= 0:
            raise ConfigError("must be > 0", "carrier_hz")
        out["beta_los"] = free_space_intercept(f)
    beta_los = out.get("beta_los", free_space_intercept(DEFAULT_CARRIER_HZ))
    if "beta_nlos_db" in raw:
        out["beta_nlos"] = 10.0 ** (_number("beta_nlos_db", raw["beta_nlos_db"]) / 10.0)
    elif "nlos_gap_db" in raw:
        out["beta_nlos"] = beta_los * 10.0 ** (-_number("nlos_gap_db", raw["nlos_gap_db"]) / 10.0)
    elif "beta_los" in out and "beta_nlos" not in out:
        # keep the default LoS/NLoS gap when only the LoS intercept moves
        out["beta_nlos"] = beta_los * 10.0 ** (-DEFAULT_NLOS_GAP_DB / 10.0)

    if "noise_dbm" in raw:
        out["noise_watts"] = dbm_to_watts(_number("noise_dbm", raw["noise_dbm"]))
    elif "noise_watts" not in out:
        bw = out.get("bandwidth_hz", SystemParams.bandwidth_hz)
        nf = out.get("noise_figure_db", SystemParams.noise_figure_db)
        if not bw > 0:
            raise ConfigError("must be > 0", "bandwidth_hz")
        out["noise_watts"] = dbm_to_watts(noise_power_dbm(bw, nf))

    return SystemParams(**out)


def load_config(path: str | Path | None) -> SystemParams:
    """Read a YAML mapping of flat keys; ``None`` or an empty file gives the defaults."""
    if path is None:
        return SystemParams()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc.strerror}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config file {p}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {p} must hold a flat mapping, got {type(raw).__name__}")
    nested = [k for k, v in raw.items() if isinstance(v, (dict, list))]
    if nested:
        raise ConfigError("nested values are not allowed; use flat keys", str(nested[0]))
    return params_from_mapping({str(k): v for k, v in raw.items()})
