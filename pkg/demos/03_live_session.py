"""A virtual-clock session: rejection sampling with an interruption.

Run: python3 demos/03_live_session.py
"""

from chronochat.codec import SPOKEN
from chronochat.engine import (
    CloseInput, CollectingSink, ScriptedInputSource, SessionConfig,
    UserInput, measure_t_latency, run_session,
)
from chronochat.lm import EventSpaceBackend, byte_tokenizer

entries = {
    "100Ahi\n": 0.30,       # model speaks at 1.0 s
    "250Ayo\n": 0.25,       # ... or at 2.5 s
    "250Uyo\n": 0.20,       # ... or predicts the user (never emitted)
    "400Ahi\n": 0.25,
}
backend = EventSpaceBackend(byte_tokenizer(), entries, sentinel="\n")

config = SessionConfig(user_speaker="U", fmt=SPOKEN, seed=12,
                       t_react_us=200_000)
script = ScriptedInputSource([
    UserInput("ok", time_us=1_500_000),   # lands mid-wait
    CloseInput(time_us=2_800_000),
])
sink = CollectingSink()
state = run_session(config, backend, script, sink)

print("decision trace:")
for rec in state.trace.records:
    print(f"  t={rec['t']/1e6:5.2f}s  {rec['kind']:<16} {rec['payload']}")

print("\nfinal transcript:")
for entry in state.entries:
    print(f"  {entry.event.time_us/1e6:5.2f}s  {entry.event.speaker}  "
          f"{entry.event.text}  ({entry.provenance})")

print("\nlatency stats:", measure_t_latency(state))
print("\nsame seed + same script replays to the identical trace;")
print("see tests/test_acceptance.py for the distributional check against")
print("exhaustive enumeration of the decision process.")
