"""chronochat: real-time interactive conversations over timed diarized
transcripts, decoded with causal rejection sampling."""

__version__ = "0.1.0"
