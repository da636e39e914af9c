"""Backend construction from CLI/config specs."""

from __future__ import annotations

import json
import os

from ..codec import eom_sentinel
from .backends import EventSpaceBackend, RemoteBackend, RemoteConfig
from .ngram import NgramBackend


def make_backend(spec: str, tokenizer, fmt: str):
    """Build a backend from a spec string.

    - ``mock:FILE``  JSON file {"entries": {"<encoded entry>": weight}}
    - ``ngram:FILE`` model file written by NgramBackend.save
    - ``remote:URL`` completion endpoint (env overrides apply)
    """
    kind, _, arg = spec.partition(":")
    if kind == "mock":
        with open(arg, encoding="utf-8") as fp:
            payload = json.load(fp)
        return EventSpaceBackend(tokenizer, payload["entries"],
                                 sentinel=eom_sentinel(fmt))
    if kind == "ngram":
        return NgramBackend.load(arg, tokenizer)
    if kind == "remote":
        url = os.environ.get("CHRONOCHAT_REMOTE_URL", arg)
        config = RemoteConfig(
            base_url=url,
            top_k=int(os.environ.get("CHRONOCHAT_REMOTE_TOP_K", "50")),
            timeout_s=float(os.environ.get("CHRONOCHAT_REMOTE_TIMEOUT_S",
                                           "10")),
        )
        return RemoteBackend(tokenizer, config)
    raise ValueError(f"unknown backend spec {spec!r}")
