"""Low-latency streaming blind source separation.

Joint dereverberation and separation of a two-channel stream with a
convolutional beamformer updated online in the STFT domain and applied in
the time domain, so the algorithmic delay can be reduced to a few
milliseconds independently of the analysis frame length.
"""

from .engine import Engine, EngineConfig, Mode, PRESETS, preset
from .errors import (
    ConfigError,
    DegenerateDirectionError,
    IoError,
    LowLatBssError,
    NumericalDivergenceError,
)
from .tdfilter import DelayLedger

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "EngineConfig",
    "Mode",
    "PRESETS",
    "preset",
    "DelayLedger",
    "LowLatBssError",
    "ConfigError",
    "NumericalDivergenceError",
    "DegenerateDirectionError",
    "IoError",
    "__version__",
]
