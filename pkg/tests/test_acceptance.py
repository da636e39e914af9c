"""Acceptance suite: one test per acceptance criterion, each printing a
PASS line (run with -s to see them). Set CHRONOCHAT_ACCEPTANCE_FULL=1 to
stretch the wall-clock real-time session to its full ten minutes."""

import os
import threading
import time
from collections import Counter

import numpy as np
import pytest

from chronochat.analysis import (
    SyntheticParams,
    delay_histogram,
    generate_synthetic_corpus,
    inter_message_delays_s,
    kl_divergence,
    required_rates,
    shared_delay_histograms,
)
from chronochat.codec import (
    MESSENGER,
    SPOKEN,
    Event,
    decode,
    encode,
    encode_entries,
    initial_state,
    legal_continuations,
)
from chronochat.codec import messenger as cm
from chronochat.engine import (
    DISCARD,
    KEEP,
    MODEL,
    SPECULATION_ELIGIBLE,
    CloseInput,
    CollectingSink,
    QueueInputSource,
    RetconInput,
    ScriptedInputSource,
    SessionConfig,
    UserInput,
    WALL,
    candidate_disposition,
    event_digest,
    run_session,
    speculative_resample,
)
from chronochat.lm import (
    ByteTokenizer,
    CandidateEvent,
    EventSpaceBackend,
    ScriptedBackend,
    byte_tokenizer,
    constrained_sample_event,
    masked_next_distribution,
)
from chronochat.rand import seeded_rng
from chronochat.timebase import US_PER_CENTISECOND, US_PER_SECOND, fields_to_us

from oracles import (
    enumerate_masked_process,
    messenger_all_renderings,
    messenger_oracle_legal,
    oracle_histogram_counts,
    oracle_required_rates,
    random_messenger_events,
    random_spoken_events,
    spoken_decode_time,
)

TOK = byte_tokenizer()
MS = 1_000
SEC = US_PER_SECOND
FULL = os.environ.get("CHRONOCHAT_ACCEPTANCE_FULL") == "1"


def ok(name):
    print(f"[ACCEPTANCE] {name}: PASS")


# ----------------------------------------------------------------------
# Criterion 1: codec round-trip, 1e5 randomized lists per format + the
# published worked examples. Runtime < 60 s.
# ----------------------------------------------------------------------

def test_codec_roundtrip_100k_lists_per_format():
    t0 = time.monotonic()
    rng = np.random.default_rng(2024)
    n = 100_000
    for _ in range(n):
        evs = random_messenger_events(rng)
        back, _ = decode(encode(evs, MESSENGER), MESSENGER)
        assert back == [e.truncated(MESSENGER) for e in evs]
    rng = np.random.default_rng(2025)
    for _ in range(n):
        evs = random_spoken_events(rng)
        back, _ = decode(encode(evs, SPOKEN), SPOKEN)
        assert back == [e.truncated(SPOKEN) for e in evs]
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0, f"{elapsed:.1f}s"
    ok(f"codec round-trip 2x{n} lists in {elapsed:.1f}s")


def test_codec_worked_examples():
    # chat excerpt (with the documented normalizations: month spelling,
    # no spaces, ':'-led minute; the separator-less minute form decodes
    # in lenient mode)
    t1 = fields_to_us(2024, 2, 28, 22, 32, 13, 8)
    text = ("2024February28W+22:32;13.8Bgetting some cuda device error though<eom>"
            ";18.4Bthis is what I get for developing on cpu...<eom>"
            ";45.2Aone sec I'm running<eom>"
            "33;03.6BI was also in the middle of editing it so it's not working too<eom>"
            "34;15.4Bnvm fixed<eom>")
    events, _ = decode(text, MESSENGER, lenient=True)
    assert [e.time_us for e in events] == [
        t1, fields_to_us(2024, 2, 28, 22, 32, 18, 4),
        fields_to_us(2024, 2, 28, 22, 32, 45, 2),
        fields_to_us(2024, 2, 28, 22, 33, 3, 6),
        fields_to_us(2024, 2, 28, 22, 34, 15, 4)]
    assert events[2] == Event(events[2].time_us, "A", "one sec I'm running")
    # canonical renderings reproduce the strict examples
    strict = encode_entries(events[:3], MESSENGER)
    assert strict[0].startswith("2024February28W+22:32;13.8B")
    assert strict[1].startswith(";18.4B")
    assert strict[2].startswith(";45.2A")

    # ground-truth transcript fragment: minute-led and second-led entries
    base = fields_to_us(2024, 3, 1, 22, 55, 50, 0)
    evs = [Event(base, "A", "I think chatbot + speechbot could be a nice paper together"),
           Event(fields_to_us(2024, 3, 1, 22, 56, 16, 6), "A",
                 "the contribution is real-time language modeling with timestamp decoding"),
           Event(fields_to_us(2024, 3, 1, 22, 56, 19, 1), "B",
                 "the worst thing about this paper"),
           Event(fields_to_us(2024, 3, 1, 22, 56, 43, 8), "A", "yes")]
    parts = encode_entries(evs, MESSENGER)
    assert parts[1].startswith(":56;16.6A")
    assert parts[2].startswith(";19.1B")
    assert parts[3].startswith(";43.8A")
    back, _ = decode("".join(parts), MESSENGER)
    assert back == evs

    # decisecond-only rendering after a same-second message
    prev = Event(fields_to_us(2024, 3, 1, 10, 20, 43, 6), "B", "for days")
    nxt = Event(fields_to_us(2024, 3, 1, 10, 20, 43, 9), "A",
                "if you're not already doing work")
    assert encode_entries([prev, nxt], MESSENGER)[1].startswith(".9A")

    # word-level transcript (newline as the sentinel)
    codes = [55, 79, 154, 186, 252, 316, 377, 443, 448, 473]
    speakers = "AABBAABBAB"
    words = ["knock", "knock", "who's", "there", "interrupting", "cow",
             "interrupting", "cow", "moo", "who"]
    evs = [Event(c * US_PER_CENTISECOND, s, w)
           for c, s, w in zip(codes, speakers, words)]
    assert encode(evs, SPOKEN) == "".join(
        f"{c:03d}{s}{w}\n" for c, s, w in zip(codes, speakers, words))
    back, _ = decode(encode(evs, SPOKEN), SPOKEN)
    assert back == evs
    ok("codec worked examples")


# ----------------------------------------------------------------------
# Criterion 2: omission minimality + bounded-lookahead determinism
# against brute force over the grammar automaton.
# ----------------------------------------------------------------------

def test_omission_minimality_bruteforce():
    rng = np.random.default_rng(77)
    checked = 0
    for _ in range(400):
        evs = random_messenger_events(rng, n=3)
        parts = encode_entries(evs, MESSENGER)
        prev = None
        for ev, part in zip(evs, parts):
            if prev is not None:
                want_t = ev.truncated(MESSENGER).time_us
                viable = []
                for cand in messenger_all_renderings(None, ev):
                    st = initial_state(MESSENGER, prev.time_us)
                    try:
                        got, _ = decode(cand, MESSENGER, state=st)
                    except Exception:
                        continue
                    if got and got[0].time_us == want_t:
                        viable.append(cand)
                assert part == min(viable, key=len)
                checked += 1
            prev = ev
    assert checked > 500
    ok(f"omission minimality ({checked} pairs vs re-encoding oracle)")


def test_bounded_lookahead_determinism():
    """Every state transition is single-valued, hypothesis states resolve
    within two characters, and the continuation sets at field boundaries
    match the brute-force automaton search."""
    rng = np.random.default_rng(78)
    seen_phases = set()
    oracle_checks = 0
    for _ in range(60):
        evs = random_messenger_events(rng, n=3)
        text = encode(evs, MESSENGER)
        st = initial_state(MESSENGER)
        floor = 0
        ambig_run = 0
        for ch in text:
            phase = st.phase
            seen_phases.add(phase)
            boundary = phase not in (cm.P_MSG, cm.P_SPEAKER)
            if boundary and rng.random() < 0.2:
                legal = legal_continuations(st, floor)
                assert legal == messenger_oracle_legal(st, floor)
                oracle_checks += 1
                # determinism: stepping any legal char yields exactly one
                # well-defined state
                for c in sorted(legal)[:4]:
                    s2 = st.copy()
                    s3 = st.copy()
                    s2.step(c)
                    s3.step(c)
                    assert s2 == s3
            ev = st.step(ch)
            if st.phase in (cm.P_AMBIG1, cm.P_AMBIG2):
                ambig_run += 1
                assert ambig_run <= 2  # one char of lookahead past digits
            else:
                ambig_run = 0
            if ev is not None:
                floor = ev.time_us
    # all field phases exercised
    assert {cm.P_ENTRY, cm.P_AMBIG1, cm.P_AMBIG2, cm.P_MONTH, cm.P_WDAY,
            cm.P_HOUR0, cm.P_MIN0, cm.P_SEC0, cm.P_DSEC}.issubset(seen_phases)
    assert oracle_checks > 100
    ok(f"bounded lookahead + mask vs oracle ({oracle_checks} states)")


# ----------------------------------------------------------------------
# Criterion 3: spoken wrap-around.
# ----------------------------------------------------------------------

def test_spoken_wraparound():
    evs, _ = decode("961Areading\n001Ais\n", SPOKEN)
    assert evs[1].time_us - evs[0].time_us == 40 * US_PER_CENTISECOND
    rng = np.random.default_rng(99)
    for _ in range(5000):
        prev = int(rng.integers(0, 20_000)) * US_PER_CENTISECOND
        code = int(rng.integers(0, 1000))
        got, _ = decode(f"{code:03d}Aw\n", SPOKEN, prev_time_us=prev)
        assert got[0].time_us == spoken_decode_time(prev, code)
    ok("spoken wrap-around (961->001 = +0.40s; 5000 randomized codes)")


# ----------------------------------------------------------------------
# Criterion 4: Algorithm-1 distributional correctness, 1e5 virtual runs
# against brute-force process enumeration. Runtime < 5 min.
# ----------------------------------------------------------------------

ALG1_ENTRIES = {"100Ahi\n": 0.30, "250Ayo\n": 0.25, "250Uyo\n": 0.20,
                "400Ahi\n": 0.25}
ALG1_T_IN = 1_500 * MS
ALG1_T_CLOSE = 2_800 * MS
T_REACT = 200 * MS


def _alg1_enumerate(backend):
    memo = {}

    def event_dist(prev_us, floor):
        key = (prev_us, floor)
        if key not in memo:
            st = initial_state(SPOKEN, prev_us)
            res, slack = enumerate_masked_process(backend, [], st,
                                                  max(floor, 0),
                                                  max_tokens=8)
            assert slack < 1e-12
            out = {}
            for toks, p in res.items():
                text = TOK.detokenize(list(toks))
                evs, _ = decode(text, SPOKEN, prev_time_us=prev_us)
                out[evs[0]] = out.get(evs[0], 0.0) + p
            memo[key] = out
        return memo[key]

    outcomes = {}
    pruned = [0.0]

    def key_of(history):
        return tuple((e.time_us, e.speaker, e.text) for e in history)

    def rec(history, prev_us, t_cur, cand, script_idx, p):
        if p < 1e-10:
            pruned[0] += p
            return
        if cand is None:
            for ev, q in event_dist(prev_us, t_cur).items():
                rec(history, prev_us, t_cur, ev, script_idx, p * q)
            return
        next_t = (ALG1_T_IN, ALG1_T_CLOSE)[script_idx] if script_idx < 2 \
            else None
        if next_t is not None and next_t < cand.time_us:
            if script_idx == 0:
                h2 = history + [Event(ALG1_T_IN, "U", "ok")]
                t2 = max(t_cur, ALG1_T_IN)
                keep = (cand.speaker != "U"
                        and cand.time_us - ALG1_T_IN <= T_REACT)
                rec(h2, ALG1_T_IN, t2, cand if keep else None, 1, p)
            else:
                outcomes[key_of(history)] = outcomes.get(key_of(history),
                                                         0.0) + p
            return
        t2 = max(t_cur, cand.time_us)
        if cand.speaker == "U":
            rec(history, prev_us, t2, None, script_idx, p)
        else:
            rec(history + [cand], cand.time_us, t2, None, script_idx, p)

    rec([], None, 0, None, 0, 1.0)
    return outcomes, pruned[0]


def test_algorithm1_distribution_vs_enumeration():
    t0 = time.monotonic()
    backend = EventSpaceBackend(TOK, ALG1_ENTRIES, sentinel="\n")
    analytic, pruned = _alg1_enumerate(backend)
    assert abs(sum(analytic.values()) + pruned - 1.0) < 1e-9

    n = 100_000
    cache = {}
    counts = Counter()
    items = [UserInput("ok", time_us=ALG1_T_IN),
             CloseInput(time_us=ALG1_T_CLOSE)]
    for seed in range(n):
        sink = CollectingSink()
        config = SessionConfig(user_speaker="U", fmt=SPOKEN, seed=seed,
                               t_react_us=T_REACT)
        state = run_session(config, backend, ScriptedInputSource(list(items)),
                            sink, step_cache=cache)
        assert state.error is None
        counts[tuple((e.event.time_us, e.event.speaker, e.event.text)
                     for e in state.entries)] += 1
    empirical = {k: v / n for k, v in counts.items()}
    keys = set(empirical) | set(analytic)
    tv = 0.5 * (sum(abs(empirical.get(k, 0.0) - analytic.get(k, 0.0))
                    for k in keys) + pruned)
    elapsed = time.monotonic() - t0
    assert tv <= 0.02, tv
    assert elapsed < 300.0, f"{elapsed:.0f}s"
    ok(f"Algorithm 1 transcript distribution TV={tv:.4f} over {n} runs "
       f"({elapsed:.0f}s)")


# ----------------------------------------------------------------------
# Criterion 5: speculation unbiasedness at 1e5 trials; acceptance rate
# min(1, p/q) within 3 SE; residual never emits P <= Q.
# ----------------------------------------------------------------------

def _spec_backend():
    old_hist = "100Ahi\n"
    new_hist = "100Ahi\n150Uhm\n"
    table = {}
    for ctx, cont in ((old_hist, "300Aab\n"), (old_hist, "400Aba\n"),
                      (new_hist, "300Aab\n"), (new_hist, "400Aba\n")):
        h = TOK.tokenize(ctx)
        ids = TOK.tokenize(cont)
        for i in range(len(ids)):
            table.setdefault(tuple(h + ids[:i]), {ids[i]: 1.0})
    table[tuple(TOK.tokenize(old_hist))] = {ord("3"): 0.7, ord("4"): 0.3}
    table[tuple(TOK.tokenize(new_hist))] = {ord("3"): 0.2, ord("4"): 0.8}
    return ScriptedBackend(TOK, table), old_hist, new_hist


def test_speculation_unbiasedness():
    t0 = time.monotonic()
    be, old_hist, new_hist = _spec_backend()
    t_int = 1_500 * MS
    old_tokens = TOK.tokenize(old_hist)
    new_tokens = TOK.tokenize(new_hist)
    analytic, slack = enumerate_masked_process(
        be, new_tokens, initial_state(SPOKEN, 1_500 * MS), t_int,
        max_tokens=10)
    assert slack == 0

    n = 100_000
    cache = {}
    counts = Counter()
    accepts_first = 0
    residual_checks = 0
    for seed in range(n):
        rng = seeded_rng(seed)
        old_state = initial_state(SPOKEN, 1_000 * MS)
        new_state = initial_state(SPOKEN, 1_500 * MS)
        draft = constrained_sample_event(be, old_tokens, old_state, t_int,
                                         rng, step_cache=cache)
        out = speculative_resample(be, SPOKEN, old_tokens, old_state,
                                   new_tokens, new_state, draft, t_int, rng,
                                   step_cache=cache)
        counts[tuple(out.candidate.tokens)] += 1
        if out.accepted_prefix_len >= 1:
            accepts_first += 1
        if out.resampled_from_residual:
            # recompute P and Q at the rejected position: the replacement
            # token must have strictly more mass under P than under Q
            k = out.accepted_prefix_len
            tok_k = out.candidate.tokens[k]
            p_step = masked_next_distribution(
                be, new_tokens + out.candidate.tokens[:k],
                _advance(initial_state(SPOKEN, 1_500 * MS),
                         out.candidate.tokens[:k]), b"", t_int,
                step_cache=cache)
            q_step = masked_next_distribution(
                be, old_tokens + out.candidate.tokens[:k],
                _advance(initial_state(SPOKEN, 1_000 * MS),
                         out.candidate.tokens[:k]), b"", t_int,
                step_cache=cache)
            p = _prob_of(p_step, tok_k)
            q = _prob_of(q_step, tok_k)
            assert p > q, (p, q)
            residual_checks += 1
    empirical = {k: v / n for k, v in counts.items()}
    keys = set(empirical) | set(analytic)
    tv = 0.5 * sum(abs(empirical.get(k, 0.0) - analytic.get(k, 0.0))
                   for k in keys)
    assert tv <= 0.02, tv
    # first-token acceptance: .7*min(1,.2/.7) + .3*min(1,.8/.3) = 0.5
    rate = accepts_first / n
    se = (0.25 / n) ** 0.5
    assert abs(rate - 0.5) <= 3 * se, rate
    assert residual_checks > 0
    elapsed = time.monotonic() - t0
    ok(f"speculation unbiasedness TV={tv:.4f}, acceptance rate "
       f"{rate:.4f}~0.5, {residual_checks} residual draws all P>Q "
       f"({elapsed:.0f}s)")


def _advance(state, tokens):
    for tid in tokens:
        for ch in TOK.detokenize([tid]):
            state.step(ch)
    return state


def _prob_of(step, tok):
    where = np.flatnonzero(step.ids == tok)
    return float(step.probs[where[0]]) if len(where) else 0.0


# ----------------------------------------------------------------------
# Criterion 6: retcon correctness.
# ----------------------------------------------------------------------

def test_retcon_revision_storm_and_immutability():
    entries = {"300Ahi\n": 0.4, "470Ayo\n": 0.3, "620Ahi\n": 0.3}
    backend = EventSpaceBackend(TOK, entries, sentinel="\n")
    words = [("eye", "i"), ("sea", "c"), ("bee", "b")]
    items = []
    for k, (orig, revised) in enumerate(words):
        t = (300 + 900 * k) * MS
        items.append(UserInput(orig, time_us=t))
        items.append(RetconInput(revised, user_ordinal=k,
                                 time_us=t + 200 * MS))
    items.append(CloseInput(time_us=4_000 * MS))
    sink = CollectingSink()
    config = SessionConfig(user_speaker="U", fmt=SPOKEN, seed=11,
                           t_react_us=T_REACT)
    state = run_session(config, backend, ScriptedInputSource(items), sink)
    assert state.error is None
    assert state.metrics.counters["retcons_applied"] == len(words)
    # user entries carry the revision; ids stable
    user_entries = [e for e in state.entries if e.provenance == "user"]
    assert [e.event.text for e in user_entries] == [r for _, r in words]
    assert all(e.revision == 1 for e in user_entries)
    # finalized model events are bit-identical to their emission copies
    emitted = {}
    for entry in sink.entries:
        if entry.provenance == MODEL:
            emitted.setdefault(entry.id, (entry.event.time_us,
                                          entry.event.speaker,
                                          entry.event.text))
    for entry in state.entries:
        if entry.provenance == MODEL:
            assert emitted[entry.id] == (entry.event.time_us,
                                         entry.event.speaker,
                                         entry.event.text)
            assert entry.revision == 0
    ok("retcon revision storm: ids stable, model events immutable")


def test_retcon_future_matches_corrected_run():
    # all candidate times sit >= 1.5 s after the first input, so the
    # masked distributions after "retcon aa->bb at 1.2s" and after a
    # from-scratch run with "bb" coincide; transcripts must too. The
    # self-speaker entry lands beyond the close, so the floor never rises
    # past any entry's window position (no mask dead-ends for this
    # deliberately sparse mock).
    entries = {"260Ahi\n": 0.5, "420Ayo\n": 0.3, "620Uhm\n": 0.2}
    backend = EventSpaceBackend(TOK, entries, sentinel="\n")
    n = 60_000
    cache = {}

    def transcript(seed, retcon):
        items = [UserInput("aa" if retcon else "bb", time_us=1_000 * MS)]
        if retcon:
            items.append(RetconInput("bb", user_ordinal=0,
                                     time_us=1_200 * MS))
        items.append(CloseInput(time_us=5_000 * MS))
        config = SessionConfig(user_speaker="U", fmt=SPOKEN, seed=seed,
                               t_react_us=T_REACT)
        state = run_session(config, backend, ScriptedInputSource(items),
                            step_cache=cache)
        assert state.error is None
        return tuple((e.event.time_us, e.event.speaker, e.event.text)
                     for e in state.entries)

    a = Counter(transcript(s, True) for s in range(n))
    b = Counter(transcript(10_000_000 + s, False) for s in range(n))
    keys = set(a) | set(b)
    tv = 0.5 * sum(abs(a.get(k, 0) / n - b.get(k, 0) / n) for k in keys)
    assert tv <= 0.02, tv
    ok(f"retcon future distribution matches corrected run (TV={tv:.4f})")


# ----------------------------------------------------------------------
# Criterion 7: reaction-window rule, exhaustive grid.
# ----------------------------------------------------------------------

def test_reaction_window_grid():
    config = SessionConfig(user_speaker="U", fmt=SPOKEN,
                           t_react_us=200 * MS)
    t_input = 50 * SEC
    checked = 0
    for speaker in ("A", "B", "U"):
        for dt_ms in range(-1000, 1001, 1):
            t_hat = t_input + dt_ms * MS
            cand = CandidateEvent(Event(t_hat, speaker, "w"), [], [], 0, "",
                                  t_hat, speaker)
            got = candidate_disposition(cand, t_input, config)
            keep = speaker != "U" and t_hat - t_input <= config.t_react_us
            if speaker == "U":
                assert got == DISCARD
            elif keep:
                assert got == KEEP
            else:
                assert got == SPECULATION_ELIGIBLE
            checked += 1
    ok(f"reaction-window rule grid ({checked} points)")


# ----------------------------------------------------------------------
# Criterion 8: analysis equals brute-force recomputation exactly on a
# 1e4-message synthetic corpus; Fig-2 hand example.
# ----------------------------------------------------------------------

def test_analysis_oracle_equivalence():
    corpus = generate_synthetic_corpus(
        123, SyntheticParams(sessions=850, messages_per_session_mean=12))
    assert len(corpus) >= 10_000
    stats = required_rates(corpus, TOK, MESSENGER, t_react_us=200 * MS)
    rates, pct, curve = oracle_required_rates(corpus, TOK, MESSENGER,
                                              200 * MS)
    assert stats.rates == rates
    assert stats.percentiles == pct
    assert stats.curve == curve

    hist = delay_histogram(corpus)
    want = oracle_histogram_counts(inter_message_delays_s(corpus),
                                   list(hist.edges_s))
    assert list(hist.counts) == want
    h1, h2 = shared_delay_histograms(corpus, corpus[: len(corpus) // 2])
    assert kl_divergence(h1, h1) == 0.0
    assert kl_divergence(h1, h2) >= 0.0

    # Fig-2 hand example: 16 formatted tokens, 1.0 s gap -> 16 tok/s
    t0 = fields_to_us(2024, 2, 28, 22, 32, 17, 4)
    evs = [Event(t0, "B", "x"), Event(t0 + SEC, "B", "hello")]
    hand = required_rates(evs, TOK, MESSENGER, t_react_us=200 * MS)
    assert hand.formatted_tokens[1] == 16
    assert hand.rates[1] == pytest.approx(16.0)
    ok(f"analysis == brute force on {len(corpus)} messages; 16 tok/s "
       "hand example")


# ----------------------------------------------------------------------
# Criterion 9: real-time budget. Paced mock at 30 tok/s; every emission
# within 50 ms of its sampled timestamp; engine overhead <= 100 us/token.
# ----------------------------------------------------------------------

class PacedBackend:
    """Fixed token rate on top of any deterministic mock."""

    sparse_top_k = False
    context_budget = None

    def __init__(self, inner, tokens_per_s):
        self.inner = inner
        self.tokenizer = inner.tokenizer
        self.delay_s = 1.0 / tokens_per_s

    def next_logprobs(self, prefix):
        time.sleep(self.delay_s)
        return self.inner.next_logprobs(prefix)


class CycleBackend:
    """Deterministically walks a fixed cycle of entries (codes step by
    +150 cs, so the transcript advances 1.5 s per message forever)."""

    sparse_top_k = False
    context_budget = None

    def __init__(self, tokenizer, entries):
        self.tokenizer = tokenizer
        self.entries = entries

    def next_logprobs(self, prefix):
        text = self.tokenizer.detokenize(list(prefix))
        done = text.count("\n")
        partial = text.rsplit("\n", 1)[-1]
        target = self.entries[done % len(self.entries)]
        vec = np.zeros(self.tokenizer.vocab_size)
        vec[ord(target[len(partial)])] = 1.0
        from chronochat.lm import TokenDistribution
        return TokenDistribution.from_probs(vec)


def test_realtime_emission_budget():
    duration_s = 600.0 if FULL else 30.0
    words = ["abcdefgh", "ijklmnop", "qrstuvwx", "zyxwvuts"]
    entries = [f"{(150 + 150 * k) % 1000:03d}A{words[k % 4]}\n"
               for k in range(20)]
    backend = PacedBackend(CycleBackend(TOK, entries), 30)
    config = SessionConfig(user_speaker="U", fmt=SPOKEN, clock_mode=WALL,
                           seed=4, start_time_us=0)
    inputs = QueueInputSource()
    timer = threading.Timer(duration_s, lambda: inputs.submit(CloseInput()))
    timer.start()
    state = run_session(config, backend, inputs)
    assert state.error is None
    lags = np.asarray(state.metrics.emission_lag_us)
    # one message per 1.5 s of transcript time, generated at ~0.45 s each
    assert state.metrics.counters.get("emitted", 0) >= duration_s / 2.5
    assert lags.min() >= 0                # never early
    assert lags.max() <= 50 * MS, lags.max()
    ok(f"real-time budget: {len(lags)} emissions over {duration_s:.0f}s, "
       f"max lag {lags.max() / 1000:.1f}ms <= 50ms")


def test_engine_overhead_per_token():
    entries = {
        "150Aabcdefgh\n": 0.35, "320Aijklmnop\n": 0.30,
        "480Aqrstuvwx\n": 0.20, "640Uyzabcdef\n": 0.15,
    }
    backend = EventSpaceBackend(TOK, entries, sentinel="\n")
    best = None
    for attempt in range(3):  # take the best of three to dodge CPU noise
        rng = seeded_rng(attempt)
        floor = 0
        tokens = 0
        t0 = time.perf_counter()
        for _ in range(400):
            cand = constrained_sample_event(
                backend, [], initial_state(SPOKEN, floor or None), floor,
                rng, cancel_check=lambda n: False)
            tokens += len(cand.tokens)
            floor = cand.time_us
        per_token_us = (time.perf_counter() - t0) * 1e6 / tokens
        best = per_token_us if best is None else min(best, per_token_us)
    assert best <= 100.0, f"{best:.1f}us"
    ok(f"engine overhead {best:.1f}us/token <= 100us")


# ----------------------------------------------------------------------
# Criterion 10: determinism: virtual session replays bit-identically.
# ----------------------------------------------------------------------

def test_virtual_replay_is_bit_identical():
    backend = EventSpaceBackend(TOK, ALG1_ENTRIES, sentinel="\n")
    items = [UserInput("ok", time_us=ALG1_T_IN),
             RetconInput("uh", user_ordinal=0, time_us=1_900 * MS),
             CloseInput(time_us=4_200 * MS)]
    traces = []
    for _ in range(2):
        config = SessionConfig(user_speaker="U", fmt=SPOKEN, seed=21,
                               t_react_us=T_REACT, speculation=True)
        state = run_session(config, backend,
                            ScriptedInputSource(list(items)))
        traces.append((state.trace.to_jsonl(), state.trace.digest()))
    assert traces[0] == traces[1]
    ok(f"deterministic replay (trace digest {traces[0][1][:12]}...)")
