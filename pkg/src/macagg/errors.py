"""Exception types shared across the package."""


class StateError(RuntimeError):
    """An operation needs data (e.g. a payload) that is not available."""


class InfeasibleParameters(ValueError):
    """A parameter combination cannot satisfy its own constraints."""


class UnsupportedScheme(ValueError):
    pass


class TraceParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class IntegrityFailure(Exception):
    """A received tag slot did not match its recomputed value."""

    def __init__(self, packet_index: int, slot: int):
        super().__init__(f"tag mismatch in packet {packet_index}, slot {slot}")
        self.packet_index = packet_index
        self.slot = slot
