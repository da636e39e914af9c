"""Speculative reuse of interrupted drafts.

When an interruption lands outside the reaction window, the outstanding
draft need not be thrown away: re-render its timestamp under the new
history (prefix omission can change the encoding), then accept or reject
its tokens one by one against the post-interruption distribution P,
using the draft distribution Q re-masked to times at or after the
interruption. The first rejected position resamples from the residual
norm(max(0, P - Q)) and generation continues from P alone.

With the draft drawn from Q this reproduces direct constrained sampling
from P exactly (the per-token speculative sampling identity); reusing a
draft that was sampled under an earlier floor and merely survived past
the interruption is the documented approximation for multi-token
timestamps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..codec import MESSENGER, SPOKEN
from ..codec import messenger as cm
from ..lm.constrained import (
    CandidateEvent,
    constrained_sample_event,
    masked_next_distribution,
)
from ..rand import choice_index


@dataclass
class SpeculationOutcome:
    candidate: CandidateEvent
    draft_tokens_offered: int
    accepted_prefix_len: int
    resampled_from_residual: bool


class SpeculationError(ValueError):
    pass


def rerender_draft_tokens(tokenizer, fmt: str, new_prev_us: int | None,
                          draft: CandidateEvent) -> list[int]:
    """The draft's encoding under the new previous-timestamp context.

    Spoken renderings are absolute within the 10 s window and never
    change; messenger timestamps re-render through prefix omission.
    """
    if draft.time_us is None:
        raise SpeculationError("draft has no parsed timestamp yet")
    if fmt == SPOKEN:
        return list(draft.tokens)
    ts = cm.render_timestamp(new_prev_us, draft.time_us)
    speaker = draft.speaker or ""
    body = draft.body_text + (cm.EOM if draft.complete else "")
    return tokenizer.tokenize(ts + speaker + body)


def speculative_resample(backend, fmt: str, old_history_tokens, old_state,
                         new_history_tokens, new_state,
                         draft: CandidateEvent, t_interrupt_us: int, rng, *,
                         max_tokens: int = 512, step_cache=None,
                         stats=None) -> SpeculationOutcome:
    """Token-level accept/reject of `draft` against the new history.

    The codec states are the decoder states after the respective
    histories. The draft must come from the old history with a timestamp
    at or after the interruption.
    """
    if draft.time_us is None or draft.time_us < t_interrupt_us:
        raise SpeculationError(
            "draft cannot be conditioned on times past the interruption")
    tokenizer = backend.tokenizer
    d_tokens = rerender_draft_tokens(tokenizer, fmt, new_state.prev_us, draft)

    new_prefix = list(new_history_tokens)
    p_state, p_pending = new_state.copy(), b""
    old_prefix = list(old_history_tokens)
    q_state, q_pending = old_state.copy(), b""
    q_alive = True

    tokens: list[int] = []
    stepwise: list[float] = []
    accepted = 0
    resampled = False
    done_event = None

    for d_tok in d_tokens:
        p_step = masked_next_distribution(
            backend, new_prefix, p_state, p_pending, t_interrupt_us,
            step_cache=step_cache, stats=stats)
        p_idx = np.flatnonzero(p_step.ids == d_tok)
        p = float(p_step.probs[p_idx[0]]) if len(p_idx) else 0.0

        q = 0.0
        q_step = None
        if q_alive:
            q_step = masked_next_distribution(
                backend, old_prefix, q_state, q_pending, t_interrupt_us,
                step_cache=step_cache, stats=stats)
            q_idx = np.flatnonzero(q_step.ids == d_tok)
            q = float(q_step.probs[q_idx[0]]) if len(q_idx) else 0.0

        accept = p > 0.0 and (q <= p or rng.random() < p / q)
        if accept:
            accepted += 1
            tokens.append(d_tok)
            stepwise.append(p)
            walk = p_step.walks[int(p_idx[0])]
            new_prefix.append(d_tok)
            p_state, p_pending = walk.state.copy(), walk.pending
            if q_alive and q > 0.0:
                qk = int(np.flatnonzero(q_step.ids == d_tok)[0])
                qwalk = q_step.walks[qk]
                old_prefix.append(d_tok)
                q_state, q_pending = qwalk.state.copy(), qwalk.pending
            else:
                q_alive = False  # old context cannot follow this path
            if walk.event is not None:
                done_event = walk.event
            if done_event is not None:
                break
            continue
        # rejection: resample this position from norm(max(0, P - Q))
        resampled = True
        residual = p_step.probs.copy()
        if q_step is not None:
            q_of = {int(t): float(pr)
                    for t, pr in zip(q_step.ids, q_step.probs)}
            for i, tid in enumerate(p_step.ids):
                residual[i] = max(0.0, residual[i] - q_of.get(int(tid), 0.0))
        if residual.sum() <= 0.0:
            residual = p_step.probs  # P <= Q pointwise over the legal set
            if stats is not None:
                stats["residual_degenerate"] = (
                    stats.get("residual_degenerate", 0) + 1)
        pick = choice_index(rng, residual)
        tid = int(p_step.ids[pick])
        tokens.append(tid)
        stepwise.append(float(p_step.probs[pick]))
        walk = p_step.walks[pick]
        new_prefix.append(tid)
        p_state, p_pending = walk.state.copy(), walk.pending
        if walk.event is not None:
            done_event = walk.event
        break

    offered = len(d_tokens)
    if done_event is None:
        cont = constrained_sample_event(
            backend, new_prefix, p_state, t_interrupt_us, rng,
            max_tokens=max(1, max_tokens - len(tokens)),
            step_cache=step_cache, stats=stats, pending=p_pending)
        done_event = cont.event
        tokens = tokens + cont.tokens
        stepwise = stepwise + cont.stepwise
    cand = CandidateEvent(done_event, tokens, stepwise, t_interrupt_us,
                          tokenizer.detokenize(tokens), done_event.time_us,
                          done_event.speaker, done_event.text)
    return SpeculationOutcome(cand, offered, accepted, resampled)


@dataclass
class SavingsReport:
    interruptions: int = 0
    draft_tokens_offered: int = 0
    accepted_tokens: int = 0
    skipped_already_final: int = 0   # draft finished before the interruption
    skipped_kept: int = 0            # inside the reaction window

    @property
    def mean_accepted(self) -> float:
        return (self.accepted_tokens / self.interruptions
                if self.interruptions else 0.0)

    @property
    def accepted_fraction(self) -> float:
        return (self.accepted_tokens / self.draft_tokens_offered
                if self.draft_tokens_offered else 0.0)

    def as_dict(self) -> dict:
        return {
            "interruptions": self.interruptions,
            "draft_tokens_offered": self.draft_tokens_offered,
            "accepted_tokens": self.accepted_tokens,
            "mean_accepted_tokens_per_interruption": self.mean_accepted,
            "accepted_fraction": self.accepted_fraction,
            "skipped_already_final": self.skipped_already_final,
            "skipped_kept": self.skipped_kept,
        }


def speculation_savings(events, backend, fmt: str, rng, *,
                        policy: str = "cross-speaker",
                        t_react_us: int = 200_000, max_tokens: int = 512,
                        step_cache=None) -> SavingsReport:
    """Replay a corpus, treating each cross-speaker message onset as an
    interruption of the draft the model would have been holding, and
    measure how much of each draft survives speculative reuse."""
    if policy != "cross-speaker":
        raise ValueError(f"unknown interruption policy {policy!r}")
    from ..lm.history import TokenHistory

    history = TokenHistory(backend.tokenizer, fmt)
    report = SavingsReport()
    for i, ev in enumerate(events):
        interrupts = i > 0 and ev.speaker != events[i - 1].speaker
        if interrupts:
            floor = history.last_time_us() or 0
            old_tokens = list(history.tokens)
            old_state = history.codec_state()
            draft = constrained_sample_event(
                backend, old_tokens, old_state, floor, rng,
                max_tokens=max_tokens, step_cache=step_cache)
            t_int = ev.time_us
            if draft.time_us is None or draft.time_us < t_int:
                report.skipped_already_final += 1
            elif draft.time_us - t_int <= t_react_us:
                report.skipped_kept += 1
            else:
                history.append(ev)
                outcome = speculative_resample(
                    backend, fmt, old_tokens, old_state, history.tokens,
                    history.codec_state(), draft, t_int, rng,
                    max_tokens=max_tokens, step_cache=step_cache)
                report.interruptions += 1
                report.draft_tokens_offered += outcome.draft_tokens_offered
                report.accepted_tokens += outcome.accepted_prefix_len
                continue
        history.append(ev)
    return report
