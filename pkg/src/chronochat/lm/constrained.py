"""Constrained event sampling and scoring.

The codec automaton defines which characters may come next; a token is
legal iff every byte of its expansion walks a legal transition, it never
runs past the entry's sentinel, and the timestamp it commits to can still
complete at or after the floor. Each step filters the backend's
distribution to the legal tokens and renormalizes, so probabilities are
recorded under the realized (masked) generation process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..codec import char_allowed
from ..codec.base import FREE_TEXT, MARKERS
from ..codec.errors import DecodeError
from ..codec.events import Event
from ..rand import choice_index
from .backends import TokenDistribution, logsumexp


class SamplingError(RuntimeError):
    pass


class DistributionStarvedError(SamplingError):
    """No legal token has positive probability (possible with truncated
    remote top-k; local backends treat it as a hard error)."""

    def __init__(self, step_index: int, detail: str = ""):
        super().__init__(
            f"distribution starved at token step {step_index}{detail}")
        self.step_index = step_index


class MaskViolation(SamplingError):
    def __init__(self, position: int, token_id: int, detail: str = ""):
        super().__init__(
            f"token {token_id} at position {position} is illegal under the "
            f"mask{detail}")
        self.position = position
        self.token_id = token_id


class EventTooLongError(SamplingError):
    pass


class GenerationInterrupted(Exception):
    """Raised between tokens when a cancel check fires; carries the draft."""

    def __init__(self, partial: "CandidateEvent"):
        super().__init__("generation interrupted")
        self.partial = partial


@dataclass
class CandidateEvent:
    """A sampled (possibly still unfinished) event plus its token trail."""

    event: Event | None
    tokens: list[int]
    stepwise: list[float]      # per-token probability under the masked process
    min_time_used: int
    text: str                  # decoded encoding fragment for these tokens
    time_us: int | None        # known once the timestamp parses
    speaker: str | None
    body_text: str = ""        # message text parsed so far

    @property
    def complete(self) -> bool:
        return self.event is not None

    def logprob(self) -> float:
        return float(sum(math.log(p) for p in self.stepwise))


class _Walk:
    __slots__ = ("ok", "state", "pending", "event")

    def __init__(self, ok, state=None, pending=b"", event=None):
        self.ok = ok
        self.state = state
        self.pending = pending
        self.event = event


def _second_byte_range(lead: int):
    """RFC 3629 constraints: (width, lo, hi) for the byte after `lead`,
    or None for bytes that can never start a character."""
    if lead < 0x80:
        return 1, 0, 0
    if 0xC2 <= lead <= 0xDF:
        return 2, 0x80, 0xBF
    if lead == 0xE0:
        return 3, 0xA0, 0xBF
    if lead == 0xED:
        return 3, 0x80, 0x9F
    if 0xE1 <= lead <= 0xEF:
        return 3, 0x80, 0xBF
    if lead == 0xF0:
        return 4, 0x90, 0xBF
    if lead == 0xF4:
        return 4, 0x80, 0x8F
    if 0xF1 <= lead <= 0xF3:
        return 4, 0x80, 0xBF
    return None


def _utf8_chars(buf: bytes):
    """Split a byte string into complete characters plus a trailing
    incomplete (but still completable) sequence; None signals bytes no
    continuation could ever repair."""
    chars = []
    i = 0
    n = len(buf)
    while i < n:
        spec = _second_byte_range(buf[i])
        if spec is None:
            return None, b""
        width, lo, hi = spec
        tail = buf[i:i + width]
        if len(tail) >= 2 and not lo <= tail[1] <= hi:
            return None, b""
        if any(b >> 6 != 0b10 for b in tail[2:]):
            return None, b""
        if i + width > n:
            return chars, tail
        chars.append(tail.decode("utf-8"))
        i += width
    return chars, b""


class TokenWalker:
    """Token-level legality via byte walks through the codec automaton."""

    def __init__(self, tokenizer):
        self.tokenizer = tokenizer
        self._bytes = [tokenizer.token_bytes(i)
                       for i in range(tokenizer.vocab_size)]

    def walk(self, state, pending: bytes, token_id: int,
             min_time_us: int) -> _Walk:
        """Advance a copy of `state` over one token.

        Legal iff every complete character is admitted by the mask, an
        entry completion lands exactly at the token's end, and any
        trailing partial UTF-8 sequence sits in a free-text position.
        """
        chars, left = _utf8_chars(pending + self._bytes[token_id])
        if chars is None:
            return _Walk(False)
        st = state.copy()
        event = None
        for k, ch in enumerate(chars):
            legal = st.legal_chars(min_time_us)
            if not char_allowed(legal, ch):
                return _Walk(False)
            try:
                event = st.step(ch)
            except DecodeError:
                return _Walk(False)
            if event is not None and (k + 1 < len(chars) or left):
                return _Walk(False)  # token runs past the entry boundary
        if left and st.legal_chars(min_time_us) not in MARKERS:
            return _Walk(False)  # partial characters only inside bodies
        return _Walk(True, st, left, event)


@dataclass
class _Step:
    ids: np.ndarray            # legal token ids
    probs: np.ndarray          # renormalized masked probabilities
    walks: list                # parallel _Walk results
    starved_fallback: bool = False


def _masked_step(backend, walker, prefix, state, pending, min_time_us,
                 step_cache=None, stats=None) -> _Step:
    key = None
    if step_cache is not None:
        key = (tuple(prefix), state.signature(), pending, min_time_us)
        hit = step_cache.get(key)
        if hit is not None:
            return hit
    dist = backend.next_logprobs(prefix)
    logp = dist.logprobs
    candidates = np.flatnonzero(np.isfinite(logp))
    ids = []
    walks = []
    lps = []
    for tid in candidates:
        w = walker.walk(state, pending, int(tid), min_time_us)
        if w.ok:
            ids.append(int(tid))
            walks.append(w)
            lps.append(logp[tid])
    starved = False
    if not ids:
        if getattr(backend, "sparse_top_k", False):
            # Truncated top-k may simply have missed every legal token:
            # fall back to uniform over the legal vocabulary.
            starved = True
            if stats is not None:
                stats["mask_starved"] = stats.get("mask_starved", 0) + 1
            for tid in range(backend.tokenizer.vocab_size):
                w = walker.walk(state, pending, tid, min_time_us)
                if w.ok:
                    ids.append(tid)
                    walks.append(w)
                    lps.append(0.0)
        if not ids:
            raise DistributionStarvedError(len(prefix))
    lps = np.asarray(lps, dtype=np.float64)
    probs = np.exp(lps - logsumexp(lps))
    step = _Step(np.asarray(ids), probs, walks, starved)
    if step_cache is not None:
        step_cache[key] = step
    return step


def constrained_sample_event(backend, history_tokens, codec_state,
                             min_time_us: int, rng, *, max_tokens: int = 512,
                             cancel_check=None, step_cache=None, stats=None,
                             pending: bytes = b"") -> CandidateEvent:
    """Sample one event under the grammar/floor mask (Event termination at
    the format's sentinel). ``cancel_check(n_tokens)`` is consulted after
    every token; a truthy answer raises GenerationInterrupted carrying the
    partial draft."""
    walker = _walker_for(backend)
    state = codec_state.copy()
    prefix = list(history_tokens)
    tokens: list[int] = []
    stepwise: list[float] = []
    texts: list[str] = []
    while True:
        step = _masked_step(backend, walker, prefix, state, pending,
                            min_time_us, step_cache, stats)
        pick = choice_index(rng, step.probs)
        tid = int(step.ids[pick])
        walk = step.walks[pick]
        tokens.append(tid)
        stepwise.append(float(step.probs[pick]))
        texts.append(backend.tokenizer.token_bytes(tid).decode(
            "utf-8", errors="ignore"))
        prefix.append(tid)
        state = walk.state.copy()
        pending = walk.pending
        if walk.event is not None:
            return CandidateEvent(walk.event, tokens, stepwise, min_time_us,
                                  "".join(texts), walk.event.time_us,
                                  walk.event.speaker, walk.event.text)
        if cancel_check is not None and cancel_check(len(tokens)):
            raise GenerationInterrupted(CandidateEvent(
                None, tokens, stepwise, min_time_us, "".join(texts),
                state.entry_time_us(), state.entry_speaker(),
                state.partial_text()))
        if len(tokens) >= max_tokens:
            raise EventTooLongError(
                f"no sentinel within {max_tokens} tokens")


def event_stepwise_probs(backend, history_tokens, codec_state,
                         event_tokens, min_time_us: int, *,
                         step_cache=None, stats=None) -> list[float]:
    """Probability of each token under the same masked process the sampler
    uses; the product is the event's constrained likelihood."""
    walker = _walker_for(backend)
    state = codec_state.copy()
    pending = b""
    prefix = list(history_tokens)
    out: list[float] = []
    for pos, tid in enumerate(event_tokens):
        step = _masked_step(backend, walker, prefix, state, pending,
                            min_time_us, step_cache, stats)
        where = np.flatnonzero(step.ids == tid)
        if len(where):
            k = int(where[0])
            out.append(float(step.probs[k]))
            walk = step.walks[k]
        else:
            # Grammar-legal tokens the backend gives no mass score zero;
            # anything the grammar rejects is a caller error.
            walk = walker.walk(state, pending, tid, min_time_us)
            if not walk.ok:
                raise MaskViolation(pos, tid)
            out.append(0.0)
        prefix.append(tid)
        state = walk.state.copy()
        pending = walk.pending
        if walk.event is not None and pos + 1 < len(event_tokens):
            raise MaskViolation(pos + 1, event_tokens[pos + 1],
                                " (entry already complete)")
    return out


def masked_next_distribution(backend, history_tokens, codec_state, pending,
                             min_time_us: int, *, step_cache=None,
                             stats=None) -> _Step:
    """Expose one masked step (speculation needs raw P and Q vectors)."""
    walker = _walker_for(backend)
    return _masked_step(backend, walker, list(history_tokens), codec_state,
                        pending, min_time_us, step_cache, stats)


_WALKERS: dict = {}


def _walker_for(backend) -> TokenWalker:
    key = id(backend.tokenizer)
    walker = _WALKERS.get(key)
    if walker is None or walker.tokenizer is not backend.tokenizer:
        walker = TokenWalker(backend.tokenizer)
        _WALKERS[key] = walker
    return walker
