"""Command-line interface.

Events travel as JSON lines ({"t_us": int, "speaker": str, "text": str});
transcripts as the raw control-token text. See README for examples.
"""

from __future__ import annotations

import json
import sys

import click

from .analysis import (
    DEFAULT_PERCENTILES,
    SyntheticParams,
    document_nll,
    generate_synthetic_corpus,
    kl_divergence,
    overhead_stats,
    required_rates,
    shared_delay_histograms,
)
from .codec import FORMATS, decode as codec_decode, encode as codec_encode
from .codec.events import load_events, save_events
from .engine import (
    CloseInput,
    RetconInput,
    ScriptedInputSource,
    SessionConfig,
    UserInput,
    measure_t_latency,
    run_session,
    speculation_savings,
)
from .lm.factory import make_backend
from .lm.ngram import NgramBackend, train_ngram
from .lm.tokenizers import make_tokenizer
from .rand import seeded_rng
from .timebase import parse_duration_us

_format_option = click.option("--format", "fmt", required=True,
                              type=click.Choice(FORMATS))
_tokenizer_option = click.option("--tokenizer", "tokenizer_spec",
                                 default="bytes", show_default=True,
                                 help="bytes | optimized | vocab:FILE")


@click.group()
def main():
    """Timed diarized transcripts with causal rejection sampling."""


@main.command()
@_format_option
@click.option("--in", "src", required=True, type=click.Path(exists=True))
@click.option("--out", "dst", required=True, type=click.Path())
def encode(fmt, src, dst):
    """Encode events.jsonl into transcript text."""
    events = load_events(src)
    text = codec_encode(events, fmt)
    with open(dst, "w", encoding="utf-8") as fp:
        fp.write(text)
    click.echo(f"encoded {len(events)} events")


@main.command()
@_format_option
@click.option("--in", "src", required=True, type=click.Path(exists=True))
@click.option("--out", "dst", required=True, type=click.Path())
@click.option("--lenient", is_flag=True)
def decode(fmt, src, dst, lenient):
    """Decode transcript text into events.jsonl."""
    with open(src, encoding="utf-8") as fp:
        text = fp.read()
    events, state = codec_decode(text, fmt, lenient=lenient)
    save_events(events, dst)
    if not state.at_entry_start():
        click.echo("warning: stream ends mid-entry "
                   f"(partial text {state.partial_text()!r})", err=True)
    click.echo(f"decoded {len(events)} events")


@main.command("train-ngram")
@click.option("--order", required=True, type=int)
@click.option("--alpha", required=True, type=float)
@_format_option
@_tokenizer_option
@click.option("--in", "src", required=True, type=click.Path(exists=True))
@click.option("--out", "dst", required=True, type=click.Path())
def train_ngram_cmd(order, alpha, fmt, tokenizer_spec, src, dst):
    """Train a backoff n-gram on an events corpus."""
    tokenizer = make_tokenizer(tokenizer_spec)
    corpus = codec_encode(load_events(src), fmt)
    backend = train_ngram(corpus, tokenizer, order, alpha)
    backend.save(dst)
    click.echo(f"trained order-{order} model on {len(corpus)} characters")


@main.command()
@click.option("--model", required=True, type=click.Path(exists=True))
@_format_option
@_tokenizer_option
@click.option("--in", "src", required=True, type=click.Path(exists=True))
def nll(model, fmt, tokenizer_spec, src):
    """Document NLL of a corpus under a trained model."""
    tokenizer = make_tokenizer(tokenizer_spec)
    backend = NgramBackend.load(model, tokenizer)
    value = document_nll(backend, load_events(src), fmt)
    click.echo(json.dumps({"document_nll_nats": value}))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--script", "script_path", required=True,
              type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", "dst", required=True, type=click.Path())
def simulate(config_path, script_path, seed, dst):
    """Run a virtual-clock session from a timed script; write the trace.

    Script lines: {"t_us": int, "kind": "user"|"retcon"|"close", ...}
    with "text" for user lines and "event_id"/"ordinal" for retcons.
    """
    config, extras = _load_config(config_path)
    if seed is not None:
        config.seed = seed
    if not config.backend_spec:
        raise click.ClickException("config must set backend_spec")
    items = []
    with open(script_path, encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            kind = rec["kind"]
            if kind == "user":
                items.append(UserInput(rec["text"], time_us=rec["t_us"]))
            elif kind == "retcon":
                items.append(RetconInput(
                    rec["text"], entry_id=rec.get("event_id"),
                    user_ordinal=rec.get("ordinal"), time_us=rec["t_us"],
                    new_event_time_us=rec.get("new_t_us")))
            elif kind == "close":
                items.append(CloseInput(time_us=rec["t_us"]))
            else:
                raise click.ClickException(f"unknown script kind {kind!r}")
    tokenizer = make_tokenizer(extras.get("tokenizer", "bytes"))
    backend = make_backend(config.backend_spec, tokenizer, config.fmt)
    state = run_session(config, backend, ScriptedInputSource(items))
    with open(dst, "w", encoding="utf-8") as fp:
        fp.write(state.trace.to_jsonl())
    summary = measure_t_latency(state)
    summary["trace_digest"] = state.trace.digest()
    summary["error"] = state.error
    click.echo(json.dumps(summary))


@main.group()
def analyze():
    """Performance-analysis reports."""


def _report(dst, payload):
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if dst:
        with open(dst, "w", encoding="utf-8") as fp:
            fp.write(text + "\n")
    click.echo(text)


@analyze.command()
@_format_option
@_tokenizer_option
@click.option("--in", "src", required=True, type=click.Path(exists=True))
@click.option("--out", "dst", type=click.Path())
def overhead(fmt, tokenizer_spec, src, dst):
    """Control-token overhead versus plaintext."""
    stats = overhead_stats(load_events(src), make_tokenizer(tokenizer_spec),
                           fmt)
    _report(dst, stats.report())


@analyze.command()
@_format_option
@_tokenizer_option
@click.option("--t-react", default="200ms", show_default=True)
@click.option("--percentiles", default="50,90,99,99.9", show_default=True)
@click.option("--speaker", default=None)
@click.option("--in", "src", required=True, type=click.Path(exists=True))
@click.option("--out", "dst", type=click.Path())
def bandwidth(fmt, tokenizer_spec, t_react, percentiles, speaker, src, dst):
    """Required generation bandwidth percentiles (Fig-2 style)."""
    pcts = tuple(float(p) for p in percentiles.split(","))
    stats = required_rates(load_events(src), make_tokenizer(tokenizer_spec),
                           fmt, t_react_us=parse_duration_us(t_react),
                           percentiles=pcts, speaker=speaker)
    _report(dst, stats.report())


@analyze.command()
@_format_option
@click.option("--bins", default=25, show_default=True, type=int)
@click.option("--in", "src", required=True, type=click.Path(exists=True))
@click.option("--compare", "other", type=click.Path(exists=True))
@click.option("--out", "dst", type=click.Path())
def delays(fmt, bins, src, other, dst):
    """Log-binned inter-message delay histogram (and KL vs --compare)."""
    events = load_events(src)
    payload = {}
    if other:
        h1, h2 = shared_delay_histograms(events, load_events(other), bins)
        payload["kl_nats"] = kl_divergence(h1, h2)
    else:
        from .analysis import delay_histogram
        h1 = delay_histogram(events, bins)
    payload["bin_edges_s"] = [float(e) for e in h1.edges_s]
    payload["counts"] = [int(c) for c in h1.counts]
    _report(dst, payload)


@analyze.command("nll")
@click.option("--model", required=True, type=click.Path(exists=True))
@_format_option
@_tokenizer_option
@click.option("--in", "src", required=True, type=click.Path(exists=True))
@click.option("--out", "dst", type=click.Path())
def analyze_nll(model, fmt, tokenizer_spec, src, dst):
    """Document NLL (same as the top-level nll command)."""
    tokenizer = make_tokenizer(tokenizer_spec)
    backend = NgramBackend.load(model, tokenizer)
    _report(dst, {"document_nll_nats":
                  document_nll(backend, load_events(src), fmt)})


@analyze.command()
@click.option("--model", required=True, type=click.Path(exists=True))
@_format_option
@_tokenizer_option
@click.option("--policy", default="cross-speaker", show_default=True)
@click.option("--t-react", default="200ms", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--in", "src", required=True, type=click.Path(exists=True))
@click.option("--out", "dst", type=click.Path())
def speculation(model, fmt, tokenizer_spec, policy, t_react, seed, src, dst):
    """Draft-token savings under the interruption policy."""
    tokenizer = make_tokenizer(tokenizer_spec)
    backend = NgramBackend.load(model, tokenizer)
    report = speculation_savings(
        load_events(src), backend, fmt, seeded_rng(seed), policy=policy,
        t_react_us=parse_duration_us(t_react))
    _report(dst, report.as_dict())


@main.command()
@_format_option
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--sessions", default=20, show_default=True, type=int)
@click.option("--out", "dst", required=True, type=click.Path())
def synth(fmt, seed, sessions, dst):
    """Generate a synthetic conversation corpus."""
    events = generate_synthetic_corpus(
        seed, SyntheticParams(fmt=fmt, sessions=sessions))
    save_events(events, dst)
    click.echo(f"wrote {len(events)} events")


@main.command()
@click.option("--port", default=8765, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--backend", "backend_spec", required=True,
              help="mock:FILE | ngram:FILE | remote:URL")
@_format_option
@_tokenizer_option
@click.option("--t-react", default="200ms", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--user-speaker", default=None)
@click.option("--log-dir", default="transcripts", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="flat key=value config file (flags win)")
def serve(port, host, backend_spec, fmt, tokenizer_spec, t_react, seed,
          user_speaker, log_dir, config_path):
    """Host interactive sessions over WebSocket."""
    from .service import serve_forever

    config, _extras = _load_config(config_path)
    config.fmt = fmt
    config.backend_spec = backend_spec
    config.t_react_us = parse_duration_us(t_react)
    config.seed = seed
    if user_speaker:
        config.user_speaker = user_speaker
    elif config.fmt == "spoken" and config.user_speaker == "A":
        config.user_speaker = "U"
    serve_forever(config, backend_spec=backend_spec,
                  tokenizer_spec=tokenizer_spec, host=host, port=port,
                  log_dir=log_dir)


def _load_config(path: str | None) -> tuple[SessionConfig, dict]:
    """Flat key=value file onto SessionConfig; unknown keys are returned
    separately (e.g. tokenizer=...). CLI flags override afterwards."""
    config = SessionConfig()
    extras: dict = {}
    if not path:
        return config, extras
    import dataclasses

    fields = {f.name for f in dataclasses.fields(SessionConfig)}
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in fields:
                extras[key] = value
                continue
            current = getattr(config, key)
            if isinstance(current, bool):
                setattr(config, key, value.lower() in ("1", "true", "yes"))
            elif key.endswith("_us"):
                try:
                    setattr(config, key, int(value))
                except ValueError:
                    setattr(config, key, parse_duration_us(value))
            elif isinstance(current, int):
                setattr(config, key, int(value))
            else:
                setattr(config, key, value)
    return config, extras
