"""System parameters shared by every engine.

All fields are stored in linear SI units (W, m, Hz, BS/m^2). dB/dBm
conversions live in :mod:`mmwpt.config`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_PER_HZ = -174.0


class LinkClass(str, Enum):
    LOS = "LoS"
    NLOS = "NLoS"


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; ``key`` names the offending field."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def free_space_intercept(carrier_hz: float) -> float:
    """(lambda / 4 pi)^2: free-space path gain at 1 m."""
    lam = SPEED_OF_LIGHT / carrier_hz
    return (lam / (4.0 * math.pi)) ** 2


DEFAULT_CARRIER_HZ = 38e9
DEFAULT_NLOS_GAP_DB = 27.0
_DEFAULT_BETA_LOS = free_space_intercept(DEFAULT_CARRIER_HZ)


@dataclass(frozen=True)
class SystemParams:
    """Physical and model constants for one network configuration.

    ``blockage_form`` selects how ``blockage_decay_m`` enters the LoS
    probability: ``"length"`` gives exp(-R / rho_b), ``"rate"`` gives
    exp(-rho_b * R) with ``blockage_decay_m`` read as a rate in 1/m.
    """

    pmm_watts: float = dbm_to_watts(43.0)
    m_bs: int = 32
    n_ue: int = 16
    spacing_ratio: float = 0.5
    alpha_los: float = 2.0
    alpha_nlos: float = 4.0
    beta_los: float = _DEFAULT_BETA_LOS
    beta_nlos: float = _DEFAULT_BETA_LOS * 10.0 ** (-DEFAULT_NLOS_GAP_DB / 10.0)
    blockage_decay_m: float = 141.4
    bs_density: float = 1e-4
    ref_dist_m: float = 1.0
    phi_split: float = 0.5
    eta_rfdc: float = 0.5
    noise_watts: float = dbm_to_watts(noise_power_dbm(2e9, 10.0))
    bandwidth_hz: float = 2e9
    noise_figure_db: float = 10.0
    blockage_form: str = "length"

    def __post_init__(self):
        for name in ("pmm_watts", "spacing_ratio", "alpha_los", "alpha_nlos", "beta_los",
                     "beta_nlos", "blockage_decay_m", "bs_density", "ref_dist_m",
                     "bandwidth_hz"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"must be a finite number > 0, got {v!r}", name)
        for name in ("m_bs", "n_ue"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"must be an integer >= 1, got {v!r}", name)
        if not 0.0 < self.phi_split < 1.0:
            raise ConfigError(f"must lie strictly inside (0, 1), got {self.phi_split!r}", "phi_split")
        # eta = 0 is allowed: it is the "no harvesting" corner case.
        if not 0.0 <= self.eta_rfdc <= 1.0:
            raise ConfigError(f"must lie in [0, 1], got {self.eta_rfdc!r}", "eta_rfdc")
        # noise = 0 is allowed for interference-only studies (SNR capped downstream).
        if not (math.isfinite(self.noise_watts) and self.noise_watts >= 0):
            raise ConfigError(f"must be finite and >= 0, got {self.noise_watts!r}", "noise_watts")
        if not math.isfinite(self.noise_figure_db):
            raise ConfigError("must be finite", "noise_figure_db")
        if self.alpha_nlos < self.alpha_los:
            raise ConfigError("alpha_nlos must be >= alpha_los", "alpha_nlos")
        if self.blockage_form not in ("length", "rate"):
            raise ConfigError("must be 'length' or 'rate'", "blockage_form")

    @property
    def los_decay_length(self) -> float:
        """Distance over which the LoS probability falls by a factor e."""
        if self.blockage_form == "length":
            return float(self.blockage_decay_m)
        return 1.0 / float(self.blockage_decay_m)

    @property
    def array_gain(self) -> int:
        return self.m_bs * self.n_ue

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))
