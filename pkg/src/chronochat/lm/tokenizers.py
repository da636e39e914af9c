"""Tokenizers: byte-level, greedy longest-match over a vocabulary file,
and the digit-triple augmentation that packs 3-digit timestamps into
single tokens."""

from __future__ import annotations


class ByteTokenizer:
    """Every byte is a token; ids are the byte values."""

    vocab_size = 256

    def token_bytes(self, token_id: int) -> bytes:
        return bytes([token_id])

    def tokenize(self, text: str) -> list[int]:
        return list(text.encode("utf-8"))

    def detokenize(self, ids) -> str:
        return bytes(ids).decode("utf-8")


class VocabTokenizer:
    """Greedy longest-match over an explicit token list.

    Deterministic: at each position the longest matching token wins.
    Round-trips arbitrary strings only when every single byte is present;
    pass require_full_coverage=False for deliberately tiny test vocabs.
    """

    def __init__(self, tokens: list[bytes], require_full_coverage: bool = True):
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self._tokens = list(tokens)
        self._ids = {tok: i for i, tok in enumerate(tokens)}
        if require_full_coverage:
            missing = [b for b in range(256) if bytes([b]) not in self._ids]
            if missing:
                raise ValueError(
                    f"vocabulary lacks {len(missing)} single bytes "
                    f"(first: {missing[0]:#04x}); round-trips would fail")
        self._max_len = max(len(t) for t in tokens)
        self.vocab_size = len(tokens)

    def token_bytes(self, token_id: int) -> bytes:
        return self._tokens[token_id]

    def tokenize(self, text: str) -> list[int]:
        data = text.encode("utf-8")
        out = []
        pos = 0
        n = len(data)
        while pos < n:
            match = None
            for ln in range(min(self._max_len, n - pos), 0, -1):
                tid = self._ids.get(data[pos:pos + ln])
                if tid is not None:
                    match = tid
                    pos += ln
                    break
            if match is None:
                raise ValueError(
                    f"byte {data[pos]:#04x} at {pos} not covered by vocabulary")
            out.append(match)
        return out

    def detokenize(self, ids) -> str:
        return b"".join(self._tokens[i] for i in ids).decode("utf-8")


def byte_tokenizer() -> ByteTokenizer:
    return ByteTokenizer()


def optimized_tokenizer() -> VocabTokenizer:
    """Byte tokens plus one token per 3-digit string 000-999, so timestamp
    codes cost one token instead of three."""
    tokens = [bytes([b]) for b in range(256)]
    tokens += [f"{i:03d}".encode() for i in range(1000)]
    return VocabTokenizer(tokens)


# Vocabulary files: one token per line, byte-escaped so arbitrary bytes
# (newlines included) survive the line format.

def escape_token(token: bytes) -> str:
    out = []
    for b in token:
        if b == 0x5C:
            out.append("\\\\")
        elif 0x20 <= b < 0x7F:
            out.append(chr(b))
        else:
            out.append(f"\\x{b:02x}")
    return "".join(out)


def unescape_token(text: str) -> bytes:
    out = bytearray()
    i = 0
    while i < len(text):
        c = text[i]
        if c != "\\":
            out.append(ord(c))
            i += 1
        elif text[i:i + 2] == "\\\\":
            out.append(0x5C)
            i += 2
        elif text[i:i + 2] == "\\x":
            out.append(int(text[i + 2:i + 4], 16))
            i += 4
        else:
            raise ValueError(f"bad escape at {i} in {text!r}")
    return bytes(out)


def save_vocab(tokenizer, path: str) -> None:
    with open(path, "w", encoding="ascii") as fp:
        for i in range(tokenizer.vocab_size):
            fp.write(escape_token(tokenizer.token_bytes(i)))
            fp.write("\n")


def load_vocab(path: str, require_full_coverage: bool = True) -> VocabTokenizer:
    with open(path, encoding="ascii") as fp:
        tokens = [unescape_token(line.rstrip("\n")) for line in fp
                  if line.rstrip("\n")]
    return VocabTokenizer(tokens, require_full_coverage)


def make_tokenizer(spec: str):
    """CLI selector: 'bytes', 'optimized', or 'vocab:FILE'."""
    if spec == "bytes":
        return byte_tokenizer()
    if spec == "optimized":
        return optimized_tokenizer()
    if spec.startswith("vocab:"):
        return load_vocab(spec[len("vocab:"):])
    raise ValueError(f"unknown tokenizer spec {spec!r}")
