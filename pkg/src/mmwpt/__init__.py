"""mmWave wireless power transfer network lab: analytic engine plus Monte Carlo oracle."""

__version__ = "0.1.0"

from .params import ConfigError, LinkClass, SystemParams  # noqa: E402
from .config import load_config  # noqa: E402

__all__ = ["__version__", "ConfigError", "LinkClass", "SystemParams", "load_config"]
