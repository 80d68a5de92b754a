"""Exception types shared across the toolkit."""


class PlcError(ValueError):
    """Base class for domain errors (bad inputs, contract violations)."""


class WavFormatError(PlcError):
    """Malformed or unsupported WAV container."""


class TraceParseError(PlcError):
    """Packet trace text contains a character other than 0/1/whitespace."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class SilenceGateError(PlcError):
    """Clip exceeds the allowed silence fraction and must be discarded."""
