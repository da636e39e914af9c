"""Retconning: unstable transcription revises history in place.

Run: python3 demos/05_retcon.py
"""

from chronochat.codec import SPOKEN
from chronochat.engine import (
    CloseInput, ScriptedInputSource, SessionConfig, WordUpdate, run_session,
    unstable_asr_feeder,
)
from chronochat.lm import EventSpaceBackend, byte_tokenizer

# a streaming transcriber first hears "eye scream", then fixes itself
stream = [
    WordUpdate(0, "eye", 300_000),
    WordUpdate(1, "scream", 700_000),
    WordUpdate(0, "i", 900_000),            # revision of word 0
    WordUpdate(1, "sc", 1_100_000),         # and of word 1
    WordUpdate(1, "scream", 1_300_000, final=True),
]

items = list(unstable_asr_feeder(stream))
print("feeder output:")
for it in items:
    print("   ", it)

backend = EventSpaceBackend(byte_tokenizer(),
                            {"300Ahello\n": 0.6, "470Athere\n": 0.4},
                            sentinel="\n")
items.append(CloseInput(time_us=4_000_000))
config = SessionConfig(user_speaker="U", fmt=SPOKEN, seed=3)
state = run_session(config, backend, ScriptedInputSource(items))

print("\nfinal history (revisions applied in place, ids stable):")
for entry in state.entries:
    mark = f" rev{entry.revision}" if entry.revision else ""
    print(f"  #{entry.id} {entry.event.time_us/1e6:5.2f}s "
          f"{entry.event.speaker} {entry.event.text!r}{mark} "
          f"({entry.provenance})")

print("\nmodel messages finalized before a revision are never rewritten;")
print("the model simply resamples its next candidate against the revised")
print("history.")
