"""Exception types shared across the package."""


class SwarmlinkError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteInput(SwarmlinkError):
    """A coordinate, angle, or command contained NaN or infinity."""


class MatMismatch(SwarmlinkError):
    """A calibration record was applied against the wrong mat."""


class UnknownRobot(SwarmlinkError):
    """A command or override referenced a robot id not in the world."""


class UnresolvedSource(SwarmlinkError):
    """An active binding's source key could not be found in the inputs."""


class DegenerateAnchors(SwarmlinkError):
    """Image anchors with zero or negative extent."""


class CodecError(SwarmlinkError):
    """Base class for wire-format decode failures."""


class BadMagic(CodecError):
    """Datagram does not start with the protocol magic bytes."""


class VersionMismatch(CodecError):
    """Datagram carries an unsupported protocol version."""


class UnknownType(CodecError):
    """Datagram carries an unrecognized message type byte."""


class TruncatedPayload(CodecError):
    """Payload shorter/longer than its type requires, or a field out of range."""


class MissingEvent(SwarmlinkError):
    """An event required by a log-derived metric is absent from the log."""


class ConfigError(SwarmlinkError):
    """Scenario configuration is invalid; carries the offending config path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class CorruptLog(SwarmlinkError):
    """A JSONL log line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number
