"""Codec error types."""

from __future__ import annotations


class CodecError(ValueError):
    pass


class EncodeError(CodecError):
    pass


class DecodeError(CodecError):
    """Raised on malformed input; carries the offending stream position."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at char {position})"
        super().__init__(message)
        self.position = position
