"""In-place revision of past user inputs.

A retcon replaces one user-provenance entry (addressed by stable id, so
interleaved appends cannot misdirect it) while every later entry stays
untouched; the model simply resamples its next candidate against the
revised history. Model outputs are never retconned. The feeder adapts an
unstable word-level transcription stream (first sighting emits a word,
changed resightings revise it) into session inputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ..codec.events import Event
from .clock import RetconInput, UserInput

logger = logging.getLogger(__name__)


def apply_retcon(config, backend, state, rng, clock, item: RetconInput,
                 sink, step_cache) -> bool:
    """Apply one retcon; False when the command is rejected."""
    from .session import (  # deferred: session imports this module
        DISCARD, KEEP, SPECULATION_ELIGIBLE, USER, candidate_disposition,
    )
    from .speculation import (
        SpeculationError, rerender_draft_tokens, speculative_resample,
    )

    t_issue = item.time_us if item.time_us is not None else clock.now_us()
    if item.entry_id is not None:
        index = state.entry_index_by_id(item.entry_id)
    elif item.user_ordinal is not None:
        entry = state.user_entry_by_ordinal(item.user_ordinal)
        index = state.entries.index(entry) if entry is not None else None
    else:
        index = None
    if index is None:
        state.metrics.bump("retcons_rejected")
        state.trace.record(clock.now_us(), "retcon-rejected",
                           reason="no such entry")
        return False
    entry = state.entries[index]
    if entry.provenance != USER:
        state.metrics.bump("retcons_rejected")
        state.trace.record(clock.now_us(), "retcon-rejected", id=entry.id,
                           reason="model outputs are immutable")
        return False

    old_event = entry.event
    new_time = (item.new_event_time_us if item.new_event_time_us is not None
                else old_event.time_us)
    replacement = Event(new_time, config.user_speaker, item.text)

    old_tokens = list(state.history.tokens)
    old_codec_state = state.history.codec_state()

    entry.event = replacement
    entry.revision += 1
    entry.retcon_of = entry.id
    state.history.replace(index, replacement)
    state.t_cur_us = max(state.t_cur_us, t_issue)
    state.metrics.bump("retcons_applied")
    state.trace.record(clock.now_us(), "retcon", id=entry.id,
                       revision=entry.revision, old_text=old_event.text,
                       new_text=replacement.text)
    sink.on_entry(entry)

    cand = state.candidate
    if cand is None:
        return True
    if cand.complete:
        disposition = candidate_disposition(cand, t_issue, config)
    else:
        disposition = (DISCARD if cand.speaker == config.user_speaker
                       else SPECULATION_ELIGIBLE)
    if disposition == KEEP:
        # Unconditional acceptance inside the window, but the candidate's
        # rendering must still be legal against the revised context.
        new_prev = state.history.last_time_us()
        if cand.time_us is None or (new_prev is not None
                                    and cand.time_us < new_prev):
            disposition = DISCARD
        else:
            try:
                tokens = rerender_draft_tokens(backend.tokenizer, config.fmt,
                                               new_prev, cand)
                cand.tokens = tokens
                cand.text = backend.tokenizer.detokenize(tokens)
            except SpeculationError:
                disposition = DISCARD
    if disposition == KEEP:
        state.metrics.bump("kept_through_retcon")
        state.trace.record(clock.now_us(), "keep", time_us=cand.time_us)
        sink.on_debug({"kind": "keep", "t_us": cand.time_us})
        return True
    if disposition == SPECULATION_ELIGIBLE and config.speculation \
            and cand.time_us is not None and cand.time_us >= t_issue:
        try:
            outcome = speculative_resample(
                backend, config.fmt, old_tokens, old_codec_state,
                state.history.tokens, state.history.codec_state(), cand,
                t_issue, rng, max_tokens=config.max_event_tokens,
                step_cache=step_cache, stats=state.metrics.counters)
        except SpeculationError:
            outcome = None
        if outcome is not None:
            state.metrics.bump("speculation_drafts")
            state.metrics.bump("speculation_draft_tokens",
                               outcome.draft_tokens_offered)
            state.metrics.bump("speculation_accepted_tokens",
                               outcome.accepted_prefix_len)
            state.candidate = outcome.candidate
            state.trace.record(clock.now_us(), "speculate",
                               offered=outcome.draft_tokens_offered,
                               accepted=outcome.accepted_prefix_len,
                               time_us=outcome.candidate.time_us)
            sink.on_debug({"kind": "speculate",
                           "offered": outcome.draft_tokens_offered,
                           "accepted": outcome.accepted_prefix_len})
            return True
    state.metrics.bump("discarded_retcon")
    state.trace.record(clock.now_us(), "discard", time_us=cand.time_us)
    sink.on_debug({"kind": "discard", "t_us": cand.time_us})
    state.candidate = None
    return True


@dataclass
class WordUpdate:
    """One message from a streaming transcriber."""

    index: int
    text: str
    time_us: int
    final: bool = False
    revised: bool = False  # explicit revision marker (optional)


class StreamingWordFeeder:
    """Incremental form of the feeder, for live word streams."""

    def __init__(self):
        self._latest: dict[int, WordUpdate] = {}
        self._ordinal: dict[int, int] = {}

    def update(self, upd: WordUpdate) -> list:
        prev = self._latest.get(upd.index)
        if prev is None:
            if upd.revised:
                logger.warning("revision for never-emitted word %d dropped",
                               upd.index)
                return []
            self._ordinal[upd.index] = len(self._ordinal)
            self._latest[upd.index] = upd
            return [UserInput(upd.text, time_us=upd.time_us)]
        if prev.final:
            logger.warning("revision for finalized word %d dropped",
                           upd.index)
            return []
        out = []
        if upd.text != prev.text or upd.time_us != prev.time_us:
            out.append(RetconInput(upd.text,
                                   user_ordinal=self._ordinal[upd.index],
                                   time_us=upd.time_us,
                                   new_event_time_us=upd.time_us))
        self._latest[upd.index] = upd
        return out


def unstable_asr_feeder(updates):
    """Adapt a word stream with revisions into session input items.

    First sighting of an index emits a UserInput; a changed resighting
    emits a RetconInput addressed by user ordinal; a final sighting stops
    further revisions. Yields items ready for an input source.
    """
    feeder = StreamingWordFeeder()
    for upd in updates:
        if not isinstance(upd, WordUpdate):
            upd = WordUpdate(*upd)
        yield from feeder.update(upd)
