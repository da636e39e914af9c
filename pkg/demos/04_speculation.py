"""Speculative draft reuse after an interruption.

Run: python3 demos/04_speculation.py
"""

from collections import Counter

from chronochat.codec import SPOKEN, initial_state
from chronochat.engine import speculative_resample
from chronochat.lm import ScriptedBackend, byte_tokenizer, constrained_sample_event
from chronochat.rand import seeded_rng

tok = byte_tokenizer()
OLD = "100Ahi\n"                  # history when the draft was planned
NEW = "100Ahi\n150Uhm\n"          # the user interrupted at 1.5 s
T = 1_500_000

# two possible next events; the interruption shifts the model's belief
table = {}
for ctx, cont in ((OLD, "300Aab\n"), (OLD, "400Aba\n"),
                  (NEW, "300Aab\n"), (NEW, "400Aba\n")):
    h, ids = tok.tokenize(ctx), tok.tokenize(cont)
    for i in range(len(ids)):
        table.setdefault(tuple(h + ids[:i]), {ids[i]: 1.0})
table[tuple(tok.tokenize(OLD))] = {ord("3"): 0.7, ord("4"): 0.3}  # Q
table[tuple(tok.tokenize(NEW))] = {ord("3"): 0.2, ord("4"): 0.8}  # P
backend = ScriptedBackend(tok, table)

n = 30_000
outcomes = Counter()
accepted = offered = 0
cache = {}
for seed in range(n):
    rng = seeded_rng(seed)
    old_state = initial_state(SPOKEN, 1_000_000)
    draft = constrained_sample_event(backend, tok.tokenize(OLD), old_state,
                                     T, rng, step_cache=cache)
    out = speculative_resample(backend, SPOKEN, tok.tokenize(OLD), old_state,
                               tok.tokenize(NEW),
                               initial_state(SPOKEN, T), draft, T, rng,
                               step_cache=cache)
    outcomes[out.candidate.event.text] += 1
    accepted += out.accepted_prefix_len
    offered += out.draft_tokens_offered

print(f"draft distribution Q: ab 70% / ba 30%")
print(f"target distribution P: ab 20% / ba 80%")
print("speculation outcomes:",
      {k: f"{v / n:.3f}" for k, v in sorted(outcomes.items())})
print(f"accepted {accepted}/{offered} draft tokens "
      f"({accepted / offered:.1%}) - work saved versus resampling from")
print("scratch, while the outcome distribution still matches P exactly.")
