"""Constrained event sampling from an n-gram over the knock-knock joke.

Run: python3 demos/02_constrained_sampling.py
"""

from chronochat.codec import SPOKEN, Event, encode, initial_state
from chronochat.lm import byte_tokenizer, constrained_sample_event, train_ngram
from chronochat.rand import seeded_rng
from chronochat.timebase import US_PER_CENTISECOND

codes = [55, 79, 154, 186, 252, 316, 377, 443, 448, 473]
speakers = "AABBAABBAB"
words = ["knock", "knock", "who's", "there", "interrupting", "cow",
         "interrupting", "cow", "moo", "who"]
joke = [Event(c * US_PER_CENTISECOND, s, w)
        for c, s, w in zip(codes, speakers, words)]

tok = byte_tokenizer()
corpus = encode(joke, SPOKEN)
model = train_ngram(corpus, tok, order=2, alpha=1e-3)

history = encode(joke[:9], SPOKEN)          # everything before "473Bwho"
prefix = tok.tokenize(history)
state = initial_state(SPOKEN, joke[8].time_us)

print("history ends at", joke[8].time_us / 1e6, "s; sampling continuations"
      " floored at 4.73 s:\n")
rng = seeded_rng(7)
for i in range(8):
    cand = constrained_sample_event(model, prefix, state.copy(),
                                    473 * US_PER_CENTISECOND, rng)
    lp = sum(__import__("math").log(p) for p in cand.stepwise)
    print(f"  {cand.text.strip():28}  t={cand.event.time_us/1e6:6.2f}s"
          f"  logprob={lp:7.2f}")

print("\nevery sample lands at or after the floor; masked digits make")
print("regressions impossible rather than merely unlikely.")
