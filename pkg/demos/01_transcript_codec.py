"""Tour of the two transcript wire formats.

Run: python3 demos/01_transcript_codec.py
"""

from chronochat.codec import (
    MESSENGER, SPOKEN, Event, StreamDecoder, decode, encode, encode_entries,
    initial_state, legal_continuations,
)
from chronochat.timebase import fields_to_us

# --- messenger: calendar timestamps with prefix omission ---------------

chat = [
    Event(fields_to_us(2024, 2, 28, 22, 32, 13, 8), "B",
          "getting some cuda device error though"),
    Event(fields_to_us(2024, 2, 28, 22, 32, 18, 4), "B",
          "this is what I get for developing on cpu..."),
    Event(fields_to_us(2024, 2, 28, 22, 32, 45, 2), "A", "one sec I'm running"),
    Event(fields_to_us(2024, 2, 28, 22, 56, 16, 6), "A",
          "the contribution is real-time language modeling"),
]

print("per-entry renderings (note the shrinking timestamps):")
for part in encode_entries(chat, MESSENGER):
    print("   ", part)

text = encode(chat, MESSENGER)
back, _ = decode(text, MESSENGER)
assert back == chat
print("round-trip ok:", len(text), "chars for", len(chat), "messages\n")

# --- spoken: three digits of window position per word -------------------

words = [Event(550_000, "A", "knock"), Event(790_000, "A", "knock"),
         Event(1_540_000, "B", "who's"), Event(1_860_000, "B", "there")]
print("spoken transcript:")
print(encode(words, SPOKEN))

# wrap-around: "961" then "001" is +0.40s, not a regression
evs, _ = decode("961Areading\n001Ais\n", SPOKEN)
print("wrap-around delta:",
      (evs[1].time_us - evs[0].time_us) / 1e6, "s\n")

# --- streaming: feed any chunking, get the same events ------------------

dec = StreamDecoder(MESSENGER)
got = []
for chunk in (text[:15], text[15:40], text[40:]):
    got.extend(dec.feed(chunk))
assert got == chat
print("streaming decode matches bulk decode")

# --- continuation masks: time only flows forward ------------------------

prev = fields_to_us(2024, 2, 28, 22, 32, 45, 2)
state = initial_state(MESSENGER, prev)
for consumed in ("", ";", ";4", ";45", ";45."):
    st = initial_state(MESSENGER, prev)
    for ch in consumed:
        st.step(ch)
    legal = legal_continuations(st, prev)
    shown = "".join(sorted(legal)) if isinstance(legal, frozenset) else legal
    print(f"after {consumed!r:7} the mask allows: {shown}")
