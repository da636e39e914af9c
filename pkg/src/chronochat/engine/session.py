"""Causal rejection sampling over a live event timeline.

The loop: keep one candidate event sampled from the model with its time
floored at the current clock; wait until the candidate's timestamp; if
nothing intervened, emit it (or silently discard it when the model
predicted the user speaking). User input during the wait joins the
history and the candidate survives only inside the reaction window; an
input outside the window either discards it or, with speculation on,
recycles it as a draft. Self-speaker candidates re-floor the next sample
at their own timestamp, so predicted-user silence still moves time
forward.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..codec import MESSENGER, SPOKEN
from ..codec import spoken as cs
from ..codec.events import Event
from ..lm.backends import BackendError
from ..lm.constrained import (
    CandidateEvent,
    EventTooLongError,
    DistributionStarvedError,
    GenerationInterrupted,
    constrained_sample_event,
)
from ..lm.history import TokenHistory
from ..rand import seeded_rng
from ..timebase import US_PER_SECOND
from .clock import (
    CloseInput,
    QueueInputSource,
    RetconInput,
    ScriptedInputSource,
    UserInput,
    VirtualClock,
    WallClock,
)
from .config import VIRTUAL, WALL, SessionConfig
from .retcon import apply_retcon
from .speculation import SpeculationError, speculative_resample
from .trace import Trace

KEEP = "keep"
DISCARD = "discard"
SPECULATION_ELIGIBLE = "speculation-eligible"

USER = "user"
MODEL = "model"

_MAX_CONSECUTIVE_FAILURES = 3


@dataclass
class HistoryEntry:
    id: int
    event: Event
    provenance: str            # "user" | "model"
    revision: int = 0          # bumped by retcons
    retcon_of: int | None = None


@dataclass
class Metrics:
    counters: dict = field(default_factory=dict)
    token_latency_us: list = field(default_factory=list)
    event_latency_us: list = field(default_factory=list)
    emission_lag_us: list = field(default_factory=list)
    input_gap_us: list = field(default_factory=list)

    def bump(self, name: str, by: int = 1) -> None:
        self.counters[name] = self.counters.get(name, 0) + by


class OutputSink:
    """Override to observe a session; default is a no-op."""

    def on_entry(self, entry: HistoryEntry) -> None:
        pass

    def on_debug(self, record: dict) -> None:
        pass


class CollectingSink(OutputSink):
    def __init__(self):
        self.entries: list[HistoryEntry] = []
        self.debug: list[dict] = []

    def on_entry(self, entry: HistoryEntry) -> None:
        self.entries.append(entry)

    def on_debug(self, record: dict) -> None:
        self.debug.append(record)


class SessionState:
    def __init__(self, config: SessionConfig, tokenizer):
        self.config = config
        self.entries: list[HistoryEntry] = []
        self.next_id = 0
        self.candidate: CandidateEvent | None = None
        self.t_cur_us = config.start_time_us or 0
        self.history = TokenHistory(tokenizer, config.fmt,
                                    lenient=config.lenient,
                                    budget=config.context_budget)
        self.metrics = Metrics()
        self.trace = Trace()
        self.error: str | None = None
        self._last_input_us: int | None = None
        self._det_candidate_sig = None

    def events(self) -> list[Event]:
        return [e.event for e in self.entries]

    def model_events(self) -> list[Event]:
        return [e.event for e in self.entries if e.provenance == MODEL]

    def append_entry(self, event: Event, provenance: str) -> HistoryEntry:
        entry = HistoryEntry(self.next_id, event, provenance)
        self.next_id += 1
        self.entries.append(entry)
        self.history.append(event)
        return entry

    def user_entry_by_ordinal(self, ordinal: int) -> HistoryEntry | None:
        seen = 0
        for entry in self.entries:
            if entry.provenance == USER:
                if seen == ordinal:
                    return entry
                seen += 1
        return None

    def entry_index_by_id(self, entry_id: int) -> int | None:
        for i, entry in enumerate(self.entries):
            if entry.id == entry_id:
                return i
        return None


def candidate_disposition(candidate: CandidateEvent, input_time_us: int,
                          config: SessionConfig) -> str:
    """Reaction-window rule for a complete candidate: Keep iff the
    candidate is not the user's speaker and lands within t_react of the
    input; the user's own predicted events always drop."""
    if candidate.speaker == config.user_speaker:
        return DISCARD
    if candidate.time_us is not None and \
            candidate.time_us - input_time_us <= config.t_react_us:
        return KEEP
    return SPECULATION_ELIGIBLE


def sampling_floor(state: SessionState) -> int:
    """Next candidate's minimum time: the session clock floor, capped for
    the spoken format at the edge of its 10 s window (longer silences are
    unrepresentable and would starve the mask)."""
    floor = state.t_cur_us
    prev = state.history.last_time_us()
    if state.config.fmt == SPOKEN and prev is not None:
        floor = min(floor, prev + cs.WINDOW_US - cs.US_PER_CENTISECOND)
    return max(floor, 0)


def run_session(config: SessionConfig, backend, input_source,
                sink: OutputSink | None = None, *, clock=None,
                step_cache=None) -> SessionState:
    """Run a session to completion (a Close input or script exhaustion).

    Virtual sessions replay bit-identically given (config.seed, script);
    wall sessions sleep until candidate timestamps and stamp inputs at
    arrival.
    """
    config.validate()
    sink = sink or OutputSink()
    state = SessionState(config, backend.tokenizer)
    rng = seeded_rng(config.seed)
    virtual = config.clock_mode == VIRTUAL
    if virtual and isinstance(input_source, ScriptedInputSource) \
            and not input_source.has_close():
        raise ValueError("virtual scripts must end with a CloseInput")
    if clock is None:
        clock = VirtualClock(config.start_time_us or 0) if virtual \
            else WallClock(config.start_time_us)
    if virtual and config.start_time_us is None:
        state.t_cur_us = clock.now_us()
    elif not virtual:
        state.t_cur_us = clock.now_us()
    state.trace.record(state.t_cur_us, "session-start",
                       seed=config.seed, fmt=config.fmt,
                       user_speaker=config.user_speaker,
                       t_react_us=config.t_react_us,
                       speculation=config.speculation)
    failures = 0
    try:
        while True:
            if state.candidate is None:
                due = _due_item(input_source, clock, virtual)
                if due is not None:
                    if _handle_item(config, backend, state, rng, clock, due,
                                    sink, step_cache, virtual):
                        break
                    continue
                interrupted_item = _generate(config, backend, state, rng,
                                             clock, input_source, virtual,
                                             step_cache, sink)
                if isinstance(interrupted_item, str):
                    failures += 1
                    if failures >= _MAX_CONSECUTIVE_FAILURES:
                        state.error = interrupted_item
                        state.trace.record(clock.now_us(), "abort",
                                           reason=interrupted_item)
                        break
                    continue
                failures = 0
                if interrupted_item is not None:
                    if _handle_item(config, backend, state, rng, clock,
                                    interrupted_item, sink, step_cache,
                                    virtual):
                        break
                    continue
            # wait until the candidate's timestamp or the next input
            t_hat = state.candidate.time_us
            item = _wait(clock, input_source, t_hat, virtual)
            if item is None:
                _deadline_reached(config, state, clock, sink)
            else:
                if _handle_item(config, backend, state, rng, clock, item,
                                sink, step_cache, virtual):
                    break
    except BackendError as exc:
        state.error = f"backend failure: {exc}"
        state.trace.record(clock.now_us(), "abort", reason=state.error)
    state.trace.record(clock.now_us(), "session-end",
                       entries=len(state.entries))
    return state


def _generate(config, backend, state, rng, clock, input_source, virtual,
              step_cache, sink):
    """Sample the next candidate. Returns None on success, an input item
    if generation was interrupted, or an error string on failure."""
    floor = sampling_floor(state)
    g0 = clock.now_us()
    lat = config.token_latency_us if virtual else 0

    if virtual:
        def cancel_check(n):
            nxt = input_source.peek_time()
            return nxt is not None and lat and nxt <= g0 + n * lat
    else:
        def cancel_check(n):
            return input_source.has_pending()

    wall_t0 = time.perf_counter_ns()
    try:
        cand = constrained_sample_event(
            backend, state.history.tokens, state.history.codec_state(),
            floor, rng, max_tokens=config.max_event_tokens,
            cancel_check=cancel_check, step_cache=step_cache,
            stats=state.metrics.counters)
    except GenerationInterrupted as gi:
        n = len(gi.partial.tokens)
        if virtual:
            clock.advance_to(g0 + n * lat)
            state.metrics.token_latency_us.extend([lat] * n)
        else:
            el = (time.perf_counter_ns() - wall_t0) // 1000
            state.metrics.token_latency_us.extend([el // max(n, 1)] * n)
        state.metrics.bump("generation_interrupted")
        state.candidate = gi.partial
        state.trace.record(clock.now_us(), "sample-interrupted",
                           tokens=n, time_us=gi.partial.time_us,
                           speaker=gi.partial.speaker)
        item = _next_item(input_source, clock, virtual)
        return item
    except (EventTooLongError, DistributionStarvedError) as exc:
        state.metrics.bump("generation_failures")
        state.trace.record(clock.now_us(), "sample-failed", error=str(exc))
        return f"generation failure: {exc}"
    n = len(cand.tokens)
    if virtual:
        clock.advance_to(g0 + n * lat)
        state.metrics.token_latency_us.extend([lat] * n)
        state.metrics.event_latency_us.append(n * lat)
    else:
        el = (time.perf_counter_ns() - wall_t0) // 1000
        state.metrics.token_latency_us.extend([el // max(n, 1)] * n)
        state.metrics.event_latency_us.append(el)
    state.metrics.bump("candidates_sampled")
    # A candidate produced with probability one that does not advance the
    # clock can repeat forever (a self-speaker event pinned at the floor,
    # or an identical emission at delta zero). Certain repetition: same
    # deterministic candidate from an unchanged history; heuristic cap for
    # the grown-history variant.
    if all(p == 1.0 for p in cand.stepwise) and cand.time_us is not None \
            and cand.time_us <= state.t_cur_us:
        sig = (tuple(cand.tokens), floor, state.t_cur_us)
        prev = state._det_candidate_sig
        if prev is not None and prev[0] == sig:
            state._det_candidate_sig = (sig, prev[1], prev[2] + 1)
            if prev[1] == len(state.entries) or prev[2] + 1 >= 8:
                raise BackendError(
                    "deterministic livelock: the only legal continuation "
                    "repeats without advancing the session clock")
        else:
            state._det_candidate_sig = (sig, len(state.entries), 0)
    else:
        state._det_candidate_sig = None
    state.candidate = cand
    state.trace.record(clock.now_us(), "sample", time_us=cand.time_us,
                       speaker=cand.speaker, tokens=n, text=cand.text)
    sink.on_debug({"kind": "candidate", "t_us": cand.time_us,
                   "speaker": cand.speaker, "n_tokens": n})
    return None


def _wait(clock, input_source, t_hat_us, virtual):
    """Wait until the candidate's time, yielding any input that arrives
    strictly before it (ties go to the deadline)."""
    if virtual:
        nxt = input_source.peek_time()
        if nxt is not None and nxt < t_hat_us:
            clock.advance_to(nxt)
            return input_source.pop()
        clock.advance_to(t_hat_us)
        return None
    while True:
        now = clock.now_us()
        if now >= t_hat_us:
            if input_source.has_pending():
                item = input_source.get(0)
                if item is not None:
                    return item
            return None
        timeout = min(t_hat_us - now, 50_000)  # stay responsive to inputs
        item = input_source.get(timeout / 1e6)
        if item is not None:
            return item


def _next_item(input_source, clock, virtual):
    if virtual:
        nxt = input_source.peek_time()
        if nxt is None:
            return None
        clock.advance_to(nxt)
        return input_source.pop()
    return input_source.get(None)


def _due_item(input_source, clock, virtual):
    """An input that has already arrived (processed before sampling)."""
    if virtual:
        nxt = input_source.peek_time()
        if nxt is not None and nxt <= clock.now_us():
            return input_source.pop()
        return None
    if input_source.has_pending():
        return input_source.get(0)
    return None


def _deadline_reached(config, state, clock, sink):
    cand = state.candidate
    state.t_cur_us = max(state.t_cur_us, cand.time_us)
    if not cand.complete:
        # a partial candidate only reaches here in pathological scripts;
        # treat as discard so the loop resamples beyond its time
        state.candidate = None
        state.metrics.bump("partial_expired")
        return
    if cand.speaker == config.user_speaker:
        state.candidate = None
        state.metrics.bump("discarded_self")
        state.trace.record(clock.now_us(), "self-discard",
                           time_us=cand.time_us)
        sink.on_debug({"kind": "self-discard", "t_us": cand.time_us})
        return
    entry = state.append_entry(cand.event, MODEL)
    state.metrics.bump("emitted")
    state.metrics.emission_lag_us.append(clock.now_us() - cand.time_us)
    state.trace.record(clock.now_us(), "emit", id=entry.id,
                       time_us=cand.event.time_us, speaker=cand.speaker,
                       text=cand.event.text)
    sink.on_entry(entry)
    state.candidate = None


def _handle_item(config, backend, state, rng, clock, item, sink, step_cache,
                 virtual) -> bool:
    """Apply one input item; True means the session should close."""
    if isinstance(item, CloseInput):
        state.trace.record(clock.now_us(), "close")
        return True
    if isinstance(item, UserInput):
        _user_input(config, backend, state, rng, clock, item, sink,
                    step_cache)
        return False
    if isinstance(item, RetconInput):
        apply_retcon(config, backend, state, rng, clock, item, sink,
                     step_cache)
        return False
    raise TypeError(f"unknown input item {item!r}")


def _user_input(config, backend, state, rng, clock, item, sink, step_cache):
    t = item.time_us if item.time_us is not None else clock.now_us()
    last = state.history.last_time_us()
    if last is not None and t < last:
        state.trace.record(clock.now_us(), "input-clamped",
                           from_us=t, to_us=clock.now_us())
        t = max(clock.now_us(), last)
    if state._last_input_us is not None:
        state.metrics.input_gap_us.append(t - state._last_input_us)
    state._last_input_us = t
    event = Event(t, config.user_speaker, item.text)
    old_tokens = list(state.history.tokens)
    old_state = state.history.codec_state()
    entry = state.append_entry(event, USER)
    state.t_cur_us = max(state.t_cur_us, t)
    state.trace.record(clock.now_us(), "user-input", id=entry.id,
                       time_us=t, text=item.text)
    sink.on_entry(entry)
    _dispose_candidate(config, backend, state, rng, clock, t, old_tokens,
                       old_state, sink, step_cache)


def _dispose_candidate(config, backend, state, rng, clock, t_us, old_tokens,
                       old_state, sink, step_cache):
    cand = state.candidate
    if cand is None:
        return
    if cand.complete:
        disposition = candidate_disposition(cand, t_us, config)
    else:
        disposition = (DISCARD if cand.speaker == config.user_speaker
                       else SPECULATION_ELIGIBLE)
    if disposition == KEEP:
        state.metrics.bump("kept_through_interruption")
        state.trace.record(clock.now_us(), "keep", time_us=cand.time_us)
        sink.on_debug({"kind": "keep", "t_us": cand.time_us})
        return
    if disposition == SPECULATION_ELIGIBLE and config.speculation \
            and cand.time_us is not None and cand.time_us >= t_us:
        try:
            outcome = speculative_resample(
                backend, config.fmt, old_tokens, old_state,
                state.history.tokens, state.history.codec_state(), cand,
                t_us, rng, max_tokens=config.max_event_tokens,
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
            state.trace.record(
                clock.now_us(), "speculate",
                offered=outcome.draft_tokens_offered,
                accepted=outcome.accepted_prefix_len,
                time_us=outcome.candidate.time_us)
            sink.on_debug({"kind": "speculate",
                           "offered": outcome.draft_tokens_offered,
                           "accepted": outcome.accepted_prefix_len})
            return
    state.metrics.bump("discarded_interrupt")
    state.trace.record(clock.now_us(), "discard", time_us=cand.time_us)
    sink.on_debug({"kind": "discard", "t_us": cand.time_us})
    state.candidate = None


def measure_t_latency(state: SessionState) -> dict:
    """Generation-latency statistics plus the starvation diagnostics."""
    tok = np.asarray(state.metrics.token_latency_us or [0], dtype=np.float64)
    ev = np.asarray(state.metrics.event_latency_us or [0], dtype=np.float64)
    gaps = np.asarray(state.metrics.input_gap_us, dtype=np.float64)
    p99_tok = float(np.percentile(tok, 99))
    p99_ev = float(np.percentile(ev, 99))
    meets_react = p99_ev < state.config.t_react_us
    attempts = (state.metrics.counters.get("candidates_sampled", 0)
                + state.metrics.counters.get("generation_interrupted", 0))
    interrupted = state.metrics.counters.get("generation_interrupted", 0)
    starved = (attempts >= 5 and interrupted / attempts >= 0.9)
    return {
        "token_latency_p50_us": float(np.percentile(tok, 50)),
        "token_latency_p99_us": p99_tok,
        "event_latency_p50_us": float(np.percentile(ev, 50)),
        "event_latency_p99_us": p99_ev,
        "event_latency_max_us": float(ev.max()),
        "meets_react_budget": bool(meets_react),
        "generation_attempts": attempts,
        "generation_interrupted": interrupted,
        "starved": bool(starved),
        "median_input_gap_us": (float(np.median(gaps)) if gaps.size else None),
        "emitted": state.metrics.counters.get("emitted", 0),
    }
