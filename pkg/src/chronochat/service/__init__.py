"""Interactive session service over WebSocket."""

from .server import ChatServer, SessionRuntime, serve_forever
from .transcript_log import (
    ReplayedTranscript,
    TranscriptLog,
    decode_line,
    encode_line,
    entry_record,
    replay,
)

__all__ = [
    "ChatServer", "ReplayedTranscript", "SessionRuntime", "TranscriptLog",
    "decode_line", "encode_line", "entry_record", "replay", "serve_forever",
]
