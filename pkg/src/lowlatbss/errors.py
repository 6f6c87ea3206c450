"""Exception hierarchy shared by all processing modules."""


class LowLatBssError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LowLatBssError):
    """Invalid or inconsistent configuration."""


class NumericalContractError(LowLatBssError):
    """An input violated a numerical precondition (e.g. non-Hermitian matrix)."""


class DecompositionError(LowLatBssError):
    """Matrix decomposition failed (singular or indefinite input)."""


class NumericalDivergenceError(LowLatBssError):
    """A recursive update produced non-finite values.

    Carries the (frame, bin, source) coordinates of the first offending update.
    """

    def __init__(self, message, frame=None, bin_index=None, source=None):
        super().__init__(message)
        self.frame = frame
        self.bin_index = bin_index
        self.source = source


class DegenerateDirectionError(LowLatBssError):
    """An ISS denominator collapsed below tolerance.

    Carries (source, steered_source, bin) coordinates.
    """

    def __init__(self, message, source=None, steered=None, bin_index=None):
        super().__init__(message)
        self.source = source
        self.steered = steered
        self.bin_index = bin_index


class NotReadyError(LowLatBssError):
    """Not enough samples buffered for the requested operation."""


class InfeasibleRoomError(ConfigError):
    """Room geometry cannot realize the requested reverberation time."""


class IoError(LowLatBssError):
    """File I/O problem (unreadable corpus, bad WAV, ...)."""
