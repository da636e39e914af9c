"""Synthetic conversation corpora.

Desk-scale stand-in for real chat history: a two-level process (session
arrivals, then within-session messages alternating speakers with
occasional self-follow-ups) produces the heavy-tailed delay structure the
formats must survive, from multi-day gaps down to sub-second bursts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..codec import MESSENGER, SPOKEN, Event
from ..rand import seeded_rng
from ..timebase import US_PER_SECOND

_WORDS = (
    "ok", "yes", "no", "lol", "right", "so", "what", "why", "when", "how",
    "really", "sure", "maybe", "later", "now", "done", "working", "running",
    "broken", "fixed", "paper", "code", "model", "data", "time", "good",
    "bad", "nice", "wow", "hmm", "wait", "see", "look", "read", "send",
    "got", "it", "that", "this", "here", "there", "tomorrow", "tonight",
)


@dataclass
class SyntheticParams:
    fmt: str = MESSENGER
    sessions: int = 20
    session_gap_mean_s: float = 6 * 3600.0
    session_gap_sigma: float = 1.5          # lognormal shape for arrivals
    messages_per_session_mean: float = 12.0
    within_gap_mean_s: float = 5.0
    self_followup_prob: float = 0.35
    words_per_message_mean: float = 4.0
    speakers: str = "AB"
    start_time_us: int = 1_700_000_000 * US_PER_SECOND
    vocabulary: tuple = _WORDS


def generate_synthetic_corpus(seed: int,
                              params: SyntheticParams | None = None
                              ) -> list[Event]:
    """Deterministic given the seed. Messenger corpora span many sessions
    with heavy-tailed gaps; spoken corpora are one conversation with all
    gaps inside the codec's 10 s window."""
    p = params or SyntheticParams()
    if p.sessions < 1 or p.within_gap_mean_s <= 0:
        raise ValueError("degenerate parameters")
    rng = seeded_rng(seed)
    if p.fmt == SPOKEN:
        return _spoken_corpus(rng, p)
    return _messenger_corpus(rng, p)


def _messenger_corpus(rng, p: SyntheticParams) -> list[Event]:
    events = []
    t = p.start_time_us
    for _ in range(p.sessions):
        t += int(rng.lognormal(0.0, p.session_gap_sigma)
                 * p.session_gap_mean_s * US_PER_SECOND)
        speaker = p.speakers[int(rng.integers(0, len(p.speakers)))]
        n = 1 + int(rng.poisson(max(p.messages_per_session_mean - 1, 0)))
        for _ in range(n):
            events.append(Event(t, speaker, _message(rng, p)))
            t += int(rng.exponential(p.within_gap_mean_s) * US_PER_SECOND)
            if rng.random() >= p.self_followup_prob:
                others = p.speakers.replace(speaker, "")
                speaker = others[int(rng.integers(0, len(others)))]
    return events


def _spoken_corpus(rng, p: SyntheticParams) -> list[Event]:
    events = []
    t = 0
    speaker = p.speakers[int(rng.integers(0, len(p.speakers)))]
    total = max(2, int(p.sessions * p.messages_per_session_mean))
    turn_left = 1 + int(rng.poisson(6))
    for _ in range(total):
        word = p.vocabulary[int(rng.integers(0, len(p.vocabulary)))]
        events.append(Event(t, speaker, word))
        gap_s = min(rng.exponential(p.within_gap_mean_s), 9.9)
        t += max(int(gap_s * US_PER_SECOND), 10_000)
        turn_left -= 1
        if turn_left <= 0:
            others = p.speakers.replace(speaker, "")
            speaker = others[int(rng.integers(0, len(others)))]
            turn_left = 1 + int(rng.poisson(6))
    return events


def _message(rng, p: SyntheticParams) -> str:
    n = 1 + int(rng.poisson(max(p.words_per_message_mean - 1, 0)))
    words = [p.vocabulary[int(rng.integers(0, len(p.vocabulary)))]
             for _ in range(n)]
    return " ".join(words)
