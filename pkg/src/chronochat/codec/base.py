"""Shared continuation-mask vocabulary for both formats.

``legal_continuations`` answers with either a concrete character set or
one of these markers for the unbounded message-body positions.
"""

from __future__ import annotations

_WS = frozenset(" \t\r\n\v\f")

FREE_TEXT = "free-text"             # any character (messenger body)
WORD = "word-chars"                 # any non-whitespace; sentinel not yet legal
WORD_OR_EOM = "word-chars-or-eom"   # any non-whitespace, or the newline sentinel

MARKERS = (FREE_TEXT, WORD, WORD_OR_EOM)


def char_allowed(legal, ch: str) -> bool:
    """Membership test against a legal-continuation answer."""
    if legal == FREE_TEXT:
        return True
    if legal == WORD_OR_EOM:
        return ch == "\n" or ch not in _WS
    if legal == WORD:
        return ch not in _WS
    return ch in legal
